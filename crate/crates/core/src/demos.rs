//! Small bundled circuits with known fault-resistance properties, plus the
//! open cell library they are mapped to.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::liberty::{parse_liberty, CellLibrary};

pub const DEMO_LIBERTY: &str = r#"library(demo_cells) {
  cell(INV_X1) {
    area : 0.532;
    pin(A) { direction : input; }
    pin(ZN) { direction : output; function : "!A"; }
  }
  cell(BUF_X1) {
    area : 0.798;
    pin(A) { direction : input; }
    pin(Z) { direction : output; function : "A"; }
  }
  cell(NAND2_X1) {
    area : 0.798;
    pin(A1) { direction : input; }
    pin(A2) { direction : input; }
    pin(ZN) { direction : output; function : "!(A1 & A2)"; }
  }
  cell(NOR2_X1) {
    area : 0.798;
    pin(A1) { direction : input; }
    pin(A2) { direction : input; }
    pin(ZN) { direction : output; function : "!(A1 | A2)"; }
  }
  cell(AND2_X1) {
    area : 1.064;
    pin(A1) { direction : input; }
    pin(A2) { direction : input; }
    pin(ZN) { direction : output; function : "A1 & A2"; }
  }
  cell(OR2_X1) {
    area : 1.064;
    pin(A1) { direction : input; }
    pin(A2) { direction : input; }
    pin(ZN) { direction : output; function : "A1 | A2"; }
  }
  cell(XOR2_X1) {
    area : 1.596;
    pin(A) { direction : input; }
    pin(B) { direction : input; }
    pin(Z) { direction : output; function : "A ^ B"; }
  }
  cell(XNOR2_X1) {
    area : 1.596;
    pin(A) { direction : input; }
    pin(B) { direction : input; }
    pin(ZN) { direction : output; function : "!(A ^ B)"; }
  }
  cell(AOI21_X1) {
    area : 1.064;
    pin(A1) { direction : input; }
    pin(B1) { direction : input; }
    pin(B2) { direction : input; }
    pin(ZN) { direction : output; function : "!(A1 & (B1 | B2))"; }
  }
  cell(DFF_X1) {
    area : 4.522;
    ff(IQ, IQN) { next_state : "D"; clocked_on : "CK"; }
    pin(D) { direction : input; }
    pin(CK) { direction : input; clock : true; }
    pin(Q) { direction : output; function : "IQ"; }
  }
}
"#;

pub fn demo_library() -> CellLibrary {
    parse_liberty(DEMO_LIBERTY).expect("bundled library parses")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demo {
    pub name: &'static str,
    pub description: &'static str,
    pub netlist: String,
    pub spec: String,
}

/// Gate-level module writer: every helper instantiates one cell and
/// returns the wire it drives.
struct ModuleWriter {
    name: String,
    ports: Vec<String>,
    decls: Vec<String>,
    body: String,
    wires: usize,
    cells: usize,
}

impl ModuleWriter {
    fn new(name: &str) -> Self {
        ModuleWriter { name: name.into(), ports: vec![], decls: vec![], body: String::new(), wires: 0, cells: 0 }
    }

    fn port(&mut self, dir: &str, name: &str, width: usize) {
        self.ports.push(name.into());
        match width {
            1 => self.decls.push(format!("{dir} {name};")),
            w => self.decls.push(format!("{dir} [{}:0] {name};", w - 1)),
        }
    }

    fn cell(&mut self, cell: &str, inst: Option<&str>, pins: &[(&str, &str)], out: (&str, Option<&str>)) -> String {
        let y = match out.1 {
            Some(net) => net.to_string(),
            None => {
                self.wires += 1;
                self.decls.push(format!("wire n{};", self.wires));
                format!("n{}", self.wires)
            }
        };
        self.cells += 1;
        let inst = inst.map_or_else(|| format!("U{}", self.cells), str::to_string);
        let conns: Vec<String> =
            pins.iter().map(|(p, n)| format!(".{p}({n})")).chain([format!(".{}({y})", out.0)]).collect();
        let _ = writeln!(self.body, "  {cell} {inst} ({});", conns.join(", "));
        y
    }

    fn g1(&mut self, cell: &str, out_pin: &str, a: &str, y: Option<&str>) -> String {
        self.cell(cell, None, &[("A", a)], (out_pin, y))
    }

    fn g2(&mut self, cell: &str, a: &str, b: &str, y: Option<&str>) -> String {
        match cell {
            "XOR2_X1" => self.cell(cell, None, &[("A", a), ("B", b)], ("Z", y)),
            "XNOR2_X1" => self.cell(cell, None, &[("A", a), ("B", b)], ("ZN", y)),
            _ => self.cell(cell, None, &[("A1", a), ("A2", b)], ("ZN", y)),
        }
    }

    fn inv(&mut self, a: &str) -> String {
        self.g1("INV_X1", "ZN", a, None)
    }

    fn and(&mut self, a: &str, b: &str) -> String {
        self.g2("AND2_X1", a, b, None)
    }

    fn or(&mut self, a: &str, b: &str) -> String {
        self.g2("OR2_X1", a, b, None)
    }

    fn xor(&mut self, a: &str, b: &str) -> String {
        self.g2("XOR2_X1", a, b, None)
    }

    fn tree(&mut self, cell: &str, xs: &[String]) -> String {
        match xs {
            [] => panic!("empty gate tree"),
            [x] => x.clone(),
            _ => {
                let (l, r) = xs.split_at(xs.len() / 2);
                let (l, r) = (self.tree(cell, l), self.tree(cell, r));
                self.g2(cell, &l, &r, None)
            }
        }
    }

    /// Drive an output net from an existing wire.
    fn buf_to(&mut self, a: &str, y: &str) {
        self.g1("BUF_X1", "Z", a, Some(y));
    }

    fn finish(self) -> String {
        let mut s = format!("module {} ({});\n", self.name, self.ports.join(", "));
        for d in &self.decls {
            let _ = writeln!(s, "  {d}");
        }
        s.push_str(&self.body);
        s.push_str("endmodule\n");
        s
    }
}

fn bit(name: &str, i: usize) -> String {
    format!("{name}[{i}]")
}

/// Three independent rails produce a 3-bit code: bits 0 and 1 carry
/// `(a & b) | c`, bit 2 its complement.
pub fn sp2v_demo() -> Demo {
    let mut m = ModuleWriter::new("sp2v_driver");
    for p in ["a", "b", "c"] {
        m.port("input", p, 1);
    }
    m.port("output", "out_valid", 3);
    for rail in 0..3 {
        let n1 = m.g2("NAND2_X1", "a", "b", None);
        let n2 = m.inv("c");
        let cell = if rail < 2 { "NAND2_X1" } else { "AND2_X1" };
        m.g2(cell, &n1, &n2, Some(&bit("out_valid", rail)));
    }
    let spec = r#"{
  "fimodels": {
    "sp2v_low_to_high": {
      "setting": "FS",
      "stages": {"driver": {"inputs": ["a", "b", "c"], "outputs": ["out_valid"]}},
      "output_values": {"out_valid": "3'b100"},
      "output_fault_values": {"out_valid": "3'b011"},
      "simultaneous_faults": 1,
      "fault_locations": []
    }
  }
}
"#;
    Demo {
        name: "sp2v",
        description: "multi-rail encoded signal, SP2V_LOW forced to SP2V_HIGH",
        netlist: m.finish(),
        spec: spec.into(),
    }
}

/// Increment (`up`) or decrement of a 4-bit vector.
fn step4(m: &mut ModuleWriter, q: &str, up: bool) -> Vec<String> {
    let lit: Vec<String> = (0..4).map(|i| if up { bit(q, i) } else { m.inv(&bit(q, i)) }).collect();
    let mut out = vec![m.inv(&bit(q, 0))];
    let mut carry = lit[0].clone();
    for i in 1..4 {
        out.push(m.xor(&bit(q, i), &carry));
        if i < 3 {
            carry = m.and(&carry, &lit[i]);
        }
    }
    out
}

/// Up counter and redundant down counter, each computed by three copies
/// and OR-combined; the alert fires when `ctr_d + rem_d != num_rounds`.
pub fn tmr_counter_demo() -> Demo {
    let mut m = ModuleWriter::new("round_counter");
    for p in ["ctr_q", "rem_q", "num_rounds"] {
        m.port("input", p, 4);
    }
    m.port("output", "ctr_d", 4);
    m.port("output", "rem_d", 4);
    m.port("output", "err", 1);
    let ups: Vec<Vec<String>> = (0..3).map(|_| step4(&mut m, "ctr_q", true)).collect();
    let downs: Vec<Vec<String>> = (0..3).map(|_| step4(&mut m, "rem_q", false)).collect();
    for (copies, out) in [(&ups, "ctr_d"), (&downs, "rem_d")] {
        for i in 0..4 {
            let a = m.or(&copies[0][i], &copies[1][i]);
            m.g2("OR2_X1", &a, &copies[2][i], Some(&bit(out, i)));
        }
    }
    // ripple sum, modulo 16
    let mut diffs = Vec::new();
    let mut carry: Option<String> = None;
    for i in 0..4 {
        let (x, y) = (bit("ctr_d", i), bit("rem_d", i));
        let t = m.xor(&x, &y);
        let s = match &carry {
            None => t.clone(),
            Some(c) => m.xor(&t, c),
        };
        if i < 3 {
            let g = m.and(&x, &y);
            carry = Some(match &carry {
                None => g,
                Some(c) => {
                    let p = m.and(&t, c);
                    m.or(&g, &p)
                }
            });
        }
        diffs.push(m.xor(&s, &bit("num_rounds", i)));
    }
    let any = m.tree("OR2_X1", &diffs);
    m.buf_to(&any, "err");
    let spec = r#"{
  "fimodels": {
    "counter_detect": {
      "stages": {"counter": {"inputs": ["ctr_q", "rem_q", "num_rounds"], "outputs": ["ctr_d"]}},
      "input_values": {"ctr_q": "4'b0001"},
      "output_values": {"ctr_d": "4'b0010"},
      "alert_values": {"err": "1'b0"},
      "simultaneous_faults": 1,
      "fault_locations": ["*"]
    },
    "counter_effect": {
      "stages": {"counter": {"inputs": ["ctr_q", "rem_q", "num_rounds"], "outputs": ["ctr_d"]}},
      "input_values": {"ctr_q": "4'b0001"},
      "output_values": {"ctr_d": "4'b0010"},
      "simultaneous_faults": 1
    }
  }
}
"#;
    Demo {
        name: "tmr_counter",
        description: "redundant round counter with sum-check alert",
        netlist: m.finish(),
        spec: spec.into(),
    }
}

/// Six-bit sparse state encoding with pairwise Hamming distance of at
/// least three.
pub const FSM_STATES: [(&str, u8); 8] = [
    ("IDLE", 0b001001),
    ("INIT", 0b100011),
    ("ROUND", 0b111101),
    ("FINISH", 0b010000),
    ("PRNG_RESEED", 0b100100),
    ("CLEAR_S", 0b111010),
    ("CLEAR_KD", 0b001110),
    ("ERROR", 0b010111),
];

/// Reference next-state function of the sparse FSM demo.
pub fn fsm_next_state(state: u8, start: bool, last: bool) -> u8 {
    let code = |n: &str| FSM_STATES.iter().find(|s| s.0 == n).unwrap().1;
    match FSM_STATES.iter().find(|s| s.1 == state).map(|s| s.0) {
        Some("IDLE") if start => code("INIT"),
        Some("IDLE") => code("IDLE"),
        Some("INIT") => code("ROUND"),
        Some("ROUND") if last => code("FINISH"),
        Some("ROUND") => code("ROUND"),
        Some("FINISH" | "PRNG_RESEED" | "CLEAR_KD") => code("IDLE"),
        Some("CLEAR_S") => code("CLEAR_KD"),
        _ => code("ERROR"),
    }
}

/// State register followed by the next-state logic; faults flip register
/// bits.
pub fn sparse_fsm_demo() -> Demo {
    let mut m = ModuleWriter::new("cipher_ctrl_fsm");
    m.port("input", "clk", 1);
    m.port("input", "state_i", 6);
    m.port("input", "start", 1);
    m.port("input", "last", 1);
    m.port("output", "state_o", 6);
    let s: Vec<String> = (0..6)
        .map(|i| {
            m.decls.push(format!("wire cs{i};"));
            let q = format!("cs{i}");
            m.cell("DFF_X1", Some(&format!("state_reg_{i}")), &[("D", &bit("state_i", i)), ("CK", "clk")], ("Q", Some(&q)))
        })
        .collect();
    let ns: Vec<String> = s.iter().map(|q| m.inv(q)).collect();
    let mut matches = Vec::new();
    for (_, code) in FSM_STATES {
        let lits: Vec<String> =
            (0..6).map(|j| if code >> j & 1 == 1 { s[j].clone() } else { ns[j].clone() }).collect();
        matches.push(m.tree("AND2_X1", &lits));
    }
    let idx = |n: &str| FSM_STATES.iter().position(|s| s.0 == n).unwrap();
    let not_start = m.inv("start");
    let not_last = m.inv("last");
    let any_valid = m.tree("OR2_X1", &matches);
    let invalid = m.inv(&any_valid);
    let mut terms: Vec<(String, &str)> = vec![
        (m.and(&matches[idx("IDLE")], "start"), "INIT"),
        (m.and(&matches[idx("IDLE")], &not_start), "IDLE"),
        (matches[idx("INIT")].clone(), "ROUND"),
        (m.and(&matches[idx("ROUND")], "last"), "FINISH"),
        (m.and(&matches[idx("ROUND")], &not_last), "ROUND"),
        (matches[idx("FINISH")].clone(), "IDLE"),
        (matches[idx("PRNG_RESEED")].clone(), "IDLE"),
        (matches[idx("CLEAR_S")].clone(), "CLEAR_KD"),
        (matches[idx("CLEAR_KD")].clone(), "IDLE"),
    ];
    let to_error = m.or(&matches[idx("ERROR")], &invalid);
    terms.push((to_error, "ERROR"));
    for j in 0..6 {
        let set: Vec<String> = terms
            .iter()
            .filter(|(_, target)| FSM_STATES[idx(target)].1 >> j & 1 == 1)
            .map(|(t, _)| t.clone())
            .collect();
        let y = m.tree("OR2_X1", &set);
        m.buf_to(&y, &bit("state_o", j));
    }
    let spec = r#"{
  "fimodels": {
    "skip_to_finish": {
      "setting": "FS",
      "stages": {"next_state": {"inputs": ["state_i", "start", "last"], "outputs": ["state_o"]}},
      "input_values": {"state_i": "6'b001001"},
      "output_values": {"state_o": "6'b001001"},
      "output_fault_values": {"state_o": "6'b010000"},
      "simultaneous_faults": 1,
      "fault_locations": ["state_reg_0", "state_reg_1", "state_reg_2", "state_reg_3", "state_reg_4", "state_reg_5"],
      "node_fault_mapping": {"DFF_X1": ["INV_X1"]}
    }
  }
}
"#;
    Demo {
        name: "sparse_fsm",
        description: "sparsely encoded FSM state register, IDLE skipped to FINISH",
        netlist: m.finish(),
        spec: spec.into(),
    }
}

/// The two-gate netlist of the graph-representation example.
pub fn two_gate_demo() -> Demo {
    let netlist = "module two_gate (a, b, c, d, y);
  input a, b, c, d;
  output y;
  wire n1;
  NAND2_X1 U1 (.A1(a), .A2(b), .ZN(n1));
  AOI21_X1 U2 (.A1(n1), .B1(c), .B2(d), .ZN(y));
endmodule
";
    let spec = r#"{
  "fimodels": {
    "any_effect": {
      "stages": {"s": {"inputs": ["a", "b", "c", "d"], "outputs": ["y"]}},
      "output_values": {"y": 1},
      "simultaneous_faults": 1
    }
  }
}
"#;
    Demo { name: "two_gate", description: "NAND2 feeding an AOI21", netlist: netlist.into(), spec: spec.into() }
}

pub const MULTIPLIER_WIDTH: usize = 10;
pub const MULTIPLIER_A: u64 = 0b10_1101_0011;
pub const MULTIPLIER_B: u64 = 0b01_1001_0110;

/// Unsigned array multiplier built from ripple-carry rows.
pub fn multiplier_demo() -> Demo {
    let w = MULTIPLIER_WIDTH;
    let mut m = ModuleWriter::new("array_multiplier");
    m.port("input", "a", w);
    m.port("input", "b", w);
    m.port("output", "p", 2 * w);
    let pp = |m: &mut ModuleWriter, i: usize, j: usize| m.and(&bit("a", j), &bit("b", i));
    let mut acc: Vec<String> = (0..w).map(|j| pp(&mut m, 0, j)).collect();
    for i in 1..w {
        let mut carry: Option<String> = None;
        for j in 0..w {
            let x = acc.get(i + j).cloned();
            let y = pp(&mut m, i, j);
            let (s, c) = match (x, carry.take()) {
                (None, None) => (y, None),
                (Some(x), None) | (None, Some(x)) => {
                    let s = m.xor(&x, &y);
                    (s, Some(m.and(&x, &y)))
                }
                (Some(x), Some(c)) => {
                    let t = m.xor(&x, &y);
                    let s = m.xor(&t, &c);
                    let g = m.and(&x, &y);
                    let p = m.and(&t, &c);
                    (s, Some(m.or(&g, &p)))
                }
            };
            if i + j < acc.len() {
                acc[i + j] = s;
            } else {
                acc.push(s);
            }
            carry = c;
        }
        if let Some(c) = carry {
            acc.push(c);
        }
    }
    for (k, net) in acc.iter().enumerate() {
        m.buf_to(net, &bit("p", k));
    }
    let spec = format!(
        r#"{{
  "fimodels": {{
    "product": {{
      "stages": {{"mul": {{"inputs": ["a", "b"], "outputs": ["p"]}}}},
      "input_values": {{"a": {a}}},
      "output_values": {{"p": {p}}},
      "simultaneous_faults": 1
    }}
  }}
}}
"#,
        a = MULTIPLIER_A,
        p = MULTIPLIER_A * MULTIPLIER_B
    );
    Demo { name: "multiplier", description: "10x10 array multiplier", netlist: m.finish(), spec }
}

pub fn all_demos() -> Vec<Demo> {
    vec![sp2v_demo(), tmr_counter_demo(), sparse_fsm_demo(), two_gate_demo(), multiplier_demo()]
}

/// Write `demo_cells.lib` and a `NAME.v` / `NAME.json` pair per demo.
pub fn generate_demos(out: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = vec![out.join("demo_cells.lib")];
    std::fs::write(&written[0], DEMO_LIBERTY)?;
    for d in all_demos() {
        for (ext, text) in [("v", &d.netlist), ("json", &d.spec)] {
            let p = out.join(format!("{}.{ext}", d.name));
            std::fs::write(&p, text)?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::campaign::load_design;
    use crate::fault_spec::parse_fault_spec;

    #[test]
    fn library_and_demos_load() {
        let lib = demo_library();
        assert_eq!(lib.cells.len(), 10);
        assert_eq!(lib.nand2_area, Some(0.798));
        for d in all_demos() {
            let design = load_design(&lib, &d.netlist, &BTreeMap::new(), None).unwrap_or_else(|e| panic!("{}: {e}", d.name));
            assert!(parse_fault_spec(&d.spec).is_ok(), "{}", d.name);
            assert!(design.graph.topological_order().is_ok());
        }
    }

    #[test]
    fn encodings_have_distance_three() {
        for (i, a) in FSM_STATES.iter().enumerate() {
            for b in &FSM_STATES[i + 1..] {
                assert!((a.1 ^ b.1).count_ones() >= 3, "{} {}", a.0, b.0);
            }
        }
        assert_eq!((0b011u8 ^ 0b100).count_ones(), 3);
    }

    #[test]
    fn fsm_netlist_matches_reference() {
        let lib = demo_library();
        let design = load_design(&lib, &sparse_fsm_demo().netlist, &BTreeMap::new(), None).unwrap();
        let g = &design.graph;
        for state in 0u8..64 {
            for (start, last) in [(false, false), (false, true), (true, false), (true, true)] {
                let vals = g
                    .evaluate(&|n, _| {
                        let name = g.name(n);
                        let b = match name {
                            "start" => start,
                            "last" => last,
                            "clk" => false,
                            _ => state >> name.strip_prefix("state_i[")?.trim_end_matches(']').parse::<u8>().ok()? & 1 == 1,
                        };
                        Some(if b { !0 } else { 0 })
                    })
                    .unwrap();
                let got = (0..6).fold(0u8, |acc, j| {
                    let v = vals.get(g, g.node_id(&format!("state_o[{j}]")).unwrap(), "o").unwrap() & 1;
                    acc | (v as u8) << j
                });
                assert_eq!(got, fsm_next_state(state, start, last), "state {state:06b}");
            }
        }
    }

    #[test]
    fn multiplier_size_and_function() {
        let lib = demo_library();
        let design = load_design(&lib, &multiplier_demo().netlist, &BTreeMap::new(), None).unwrap();
        let g = &design.graph;
        let gates = (0..g.len()).filter(|&v| g.is_logic(v)).count();
        assert!((450..=600).contains(&gates), "{gates}");
        let word = |name: &str, v: u64| -> Option<u64> {
            let (port, rest) = name.split_once('[')?;
            let i: u32 = rest.trim_end_matches(']').parse().ok()?;
            let x = match port {
                "a" => v & 0x3ff,
                "b" => v >> 10,
                _ => return None,
            };
            Some(if x >> i & 1 == 1 { !0 } else { 0 })
        };
        for (a, b) in [(0u64, 0u64), (1023, 1023), (MULTIPLIER_A, MULTIPLIER_B), (517, 3)] {
            let packed = a | b << 10;
            let vals = g.evaluate(&|n, _| word(g.name(n), packed)).unwrap();
            let p = (0..20).fold(0u64, |acc, k| {
                acc | (vals.get(g, g.node_id(&format!("p[{k}]")).unwrap(), "o").unwrap() & 1) << k
            });
            assert_eq!(p, a * b);
        }
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = generate_demos(dir.path()).unwrap();
        assert_eq!(files.len(), 1 + 2 * all_demos().len());
        assert!(files.iter().all(|f| f.exists()));
    }
}
