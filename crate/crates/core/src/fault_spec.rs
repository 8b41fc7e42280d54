//! Fault specification documents: target boundary, circuit state,
//! expected values and the fault model.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::liberty::CellLibrary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("schema error at `{path}`: {reason}")]
    SchemaError { path: String, reason: String },
    #[error("width mismatch for `{node}`: value has {found} bits, net has {expected}")]
    WidthMismatch { node: String, expected: usize, found: usize },
    #[error("`{0}` does not name a node in the circuit")]
    UnknownNode(String),
    #[error("replacement `{replacement}` for `{cell}`: {reason}")]
    BadMapping { cell: String, replacement: String, reason: String },
}

fn schema<T>(path: &str, reason: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError::SchemaError { path: path.to_string(), reason: reason.into() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BitValue {
    /// Explicit bits, least significant first.
    Bits(Vec<bool>),
    /// An integer whose width comes from the net it is assigned to.
    Int(u64),
}

/// A value for one named node. `pin` is the key of the per-bit map (`"i"`,
/// `"o"`, or an output pin of a cell node).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    pub pin: Option<String>,
    pub value: BitValue,
}

impl BitVector {
    pub fn bits(bits: Vec<bool>) -> Self {
        BitVector { pin: None, value: BitValue::Bits(bits) }
    }

    /// Parse `"4'b0010"`, `"4'h2"`, `"4'd2"`, or a plain decimal.
    pub fn parse_literal(text: &str) -> Option<BitVector> {
        let t: String = text.trim().chars().filter(|c| *c != '_').collect();
        let Some((w, rest)) = t.split_once('\'') else {
            return t.parse::<u64>().ok().map(|v| BitVector { pin: None, value: BitValue::Int(v) });
        };
        let width: usize = w.parse().ok().filter(|w| (1..=64).contains(w))?;
        let mut chars = rest.chars();
        let radix = match chars.next()?.to_ascii_lowercase() {
            'b' => 2,
            'h' => 16,
            'o' => 8,
            'd' => 10,
            _ => return None,
        };
        let digits = chars.as_str();
        if digits.is_empty() {
            return None;
        }
        let v = u64::from_str_radix(digits, radix).ok()?;
        if width < 64 && v >> width != 0 {
            return None;
        }
        if radix == 2 && digits.len() != width {
            return None;
        }
        Some(BitVector::bits((0..width).map(|i| (v >> i) & 1 == 1).collect()))
    }

    /// Bits for a net of `width`, least significant first.
    pub fn resolve(&self, node: &str, width: usize) -> Result<Vec<bool>, SpecError> {
        match &self.value {
            BitValue::Bits(b) if b.len() == width => Ok(b.clone()),
            BitValue::Bits(b) => Err(SpecError::WidthMismatch { node: node.into(), expected: width, found: b.len() }),
            BitValue::Int(v) => {
                let needed = 64 - v.leading_zeros() as usize;
                if needed > width {
                    return Err(SpecError::WidthMismatch { node: node.into(), expected: width, found: needed });
                }
                Ok((0..width).map(|i| i < 64 && (v >> i) & 1 == 1).collect())
            }
        }
    }

    fn to_json(&self) -> Value {
        match (&self.value, &self.pin) {
            (BitValue::Bits(_), None) => json!(self.to_string()),
            (BitValue::Bits(bits), Some(pin)) => {
                let mut m = Map::new();
                for (i, b) in bits.iter().enumerate() {
                    m.insert(i.to_string(), json!(*b as u8));
                }
                let mut outer = Map::new();
                outer.insert(pin.clone(), Value::Object(m));
                Value::Object(outer)
            }
            (BitValue::Int(v), None) => json!(v),
            (BitValue::Int(v), Some(pin)) => json!({ pin.clone(): v }),
        }
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            BitValue::Bits(b) => {
                write!(f, "{}'b", b.len())?;
                b.iter().rev().try_for_each(|x| write!(f, "{}", *x as u8))
            }
            BitValue::Int(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// The `type` tag; carried along without meaning.
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Replacement {
    Cell(String),
    Const(bool),
}

impl fmt::Display for Replacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Replacement::Cell(c) => f.write_str(c),
            Replacement::Const(b) => write!(f, "{}", *b as u8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvaluationMode {
    Unspecific,
    UnspecificWithAlerts,
    Specific,
    SpecificWithAlerts,
}

impl EvaluationMode {
    pub fn from_fields(has_fault_values: bool, has_alerts: bool) -> Self {
        match (has_fault_values, has_alerts) {
            (false, false) => EvaluationMode::Unspecific,
            (false, true) => EvaluationMode::UnspecificWithAlerts,
            (true, false) => EvaluationMode::Specific,
            (true, true) => EvaluationMode::SpecificWithAlerts,
        }
    }

    /// Short setting label: FE, FD or FS.
    pub fn setting(self) -> &'static str {
        match self {
            EvaluationMode::Unspecific => "FE",
            EvaluationMode::UnspecificWithAlerts => "FD",
            EvaluationMode::Specific | EvaluationMode::SpecificWithAlerts => "FS",
        }
    }

    pub fn is_specific(self) -> bool {
        matches!(self, EvaluationMode::Specific | EvaluationMode::SpecificWithAlerts)
    }

    pub fn has_alerts(self) -> bool {
        matches!(self, EvaluationMode::UnspecificWithAlerts | EvaluationMode::SpecificWithAlerts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpecification {
    pub stages: Vec<Stage>,
    pub input_values: Vec<(String, BitVector)>,
    pub output_values: Vec<(String, BitVector)>,
    pub output_fault_values: Option<Vec<(String, BitVector)>>,
    pub alert_values: Vec<(String, BitVector)>,
    pub simultaneous_faults: usize,
    /// `None` means every mappable gate.
    pub fault_locations: Option<Vec<String>>,
    /// Mapping keys as written (cell names or name prefixes) with their raw
    /// replacement strings. Empty means the default mapping.
    pub fault_mappings: Vec<(String, Vec<String>)>,
}

impl FaultSpecification {
    pub fn mode(&self) -> EvaluationMode {
        EvaluationMode::from_fields(self.output_fault_values.is_some(), !self.alert_values.is_empty())
    }

    pub fn to_json(&self) -> Value {
        let values = |v: &[(String, BitVector)]| {
            Value::Object(v.iter().map(|(k, b)| (k.clone(), b.to_json())).collect())
        };
        let mut m = Map::new();
        m.insert("simultaneous_faults".into(), json!(self.simultaneous_faults));
        let mut stages = Map::new();
        for s in &self.stages {
            let mut o = json!({ "inputs": s.inputs, "outputs": s.outputs });
            if let Some(k) = &s.kind {
                o["type"] = json!(k);
            }
            stages.insert(s.name.clone(), o);
        }
        m.insert("stages".into(), Value::Object(stages));
        m.insert("input_values".into(), values(&self.input_values));
        m.insert("output_values".into(), values(&self.output_values));
        if let Some(f) = &self.output_fault_values {
            m.insert("output_fault_values".into(), values(f));
        }
        m.insert("alert_values".into(), values(&self.alert_values));
        m.insert(
            "node_fault_mapping".into(),
            Value::Object(self.fault_mappings.iter().map(|(k, v)| (k.clone(), json!(v))).collect()),
        );
        m.insert("fault_locations".into(), json!(self.fault_locations.clone().unwrap_or_default()));
        Value::Object(m)
    }
}

/// One named entry of a specification document.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultModel {
    pub name: String,
    pub spec: FaultSpecification,
    pub mode: EvaluationMode,
}

/// Serialize models back into a `fimodels` document.
pub fn fault_models_to_json(models: &[FaultModel]) -> Value {
    let mut m = Map::new();
    for model in models {
        m.insert(model.name.clone(), model.spec.to_json());
    }
    json!({ "fimodels": Value::Object(m) })
}

fn string_list(v: &Value, path: &str) -> Result<Vec<String>, SpecError> {
    match v {
        Value::Array(a) => a
            .iter()
            .enumerate()
            .map(|(i, x)| match x {
                Value::String(s) => Ok(s.clone()),
                _ => schema(&format!("{path}[{i}]"), "expected a string"),
            })
            .collect(),
        Value::String(s) => Ok(vec![s.clone()]),
        _ => schema(path, "expected a list of strings"),
    }
}

fn bit_of(v: &Value, path: &str) -> Result<bool, SpecError> {
    match v {
        Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        Value::Bool(b) => Ok(*b),
        Value::String(s) if s == "0" || s == "1" => Ok(s == "1"),
        _ => schema(path, "bit must be 0 or 1"),
    }
}

fn parse_bitvector(v: &Value, path: &str) -> Result<BitVector, SpecError> {
    match v {
        Value::String(s) => BitVector::parse_literal(s)
            .map_or_else(|| schema(path, format!("malformed bit-vector literal `{s}`")), Ok),
        Value::Number(n) => match n.as_u64() {
            Some(x) => Ok(BitVector { pin: None, value: BitValue::Int(x) }),
            None => schema(path, "expected a non-negative integer"),
        },
        Value::Object(m) => {
            if m.len() != 1 {
                return schema(path, "expected exactly one pin key");
            }
            let (pin, inner) = m.iter().next().unwrap();
            let p = format!("{path}.{pin}");
            let mut bv = match inner {
                Value::Object(bits) => {
                    let mut idx: Vec<(usize, bool)> = Vec::new();
                    for (k, b) in bits {
                        let i = k.parse::<usize>().map_or_else(|_| schema(&p, format!("bit index `{k}`")), Ok)?;
                        idx.push((i, bit_of(b, &format!("{p}.{k}"))?));
                    }
                    idx.sort();
                    if idx.iter().enumerate().any(|(n, (i, _))| n != *i) {
                        return schema(&p, "bit indices must be 0..n-1 without gaps");
                    }
                    BitVector::bits(idx.into_iter().map(|(_, b)| b).collect())
                }
                other => parse_bitvector(other, &p)?,
            };
            bv.pin = Some(pin.clone());
            Ok(bv)
        }
        _ => schema(path, "expected a bit-vector"),
    }
}

fn value_map(v: &Value, path: &str) -> Result<Vec<(String, BitVector)>, SpecError> {
    match v {
        Value::Object(m) => {
            m.iter().map(|(k, x)| Ok((k.clone(), parse_bitvector(x, &format!("{path}.{k}"))?))).collect()
        }
        Value::Null => Ok(Vec::new()),
        _ => schema(path, "expected an object of node values"),
    }
}

fn parse_stages(v: &Value, path: &str) -> Result<Vec<Stage>, SpecError> {
    let one = |name: String, body: &Value, p: &str| -> Result<Stage, SpecError> {
        let Value::Object(o) = body else { return schema(p, "expected an object") };
        for k in o.keys() {
            if !["inputs", "outputs", "type", "name"].contains(&k.as_str()) {
                return schema(&format!("{p}.{k}"), "unknown stage field");
            }
        }
        let inputs = string_list(o.get("inputs").unwrap_or(&Value::Null), &format!("{p}.inputs"))?;
        let outputs = string_list(o.get("outputs").unwrap_or(&Value::Null), &format!("{p}.outputs"))?;
        let kind = match o.get("type") {
            Some(Value::String(s)) => Some(s.clone()),
            None => None,
            Some(_) => return schema(&format!("{p}.type"), "expected a string"),
        };
        Ok(Stage { name, inputs, outputs, kind })
    };
    let stages = match v {
        Value::Object(m) => {
            m.iter().map(|(k, b)| one(k.clone(), b, &format!("{path}.{k}"))).collect::<Result<Vec<_>, _>>()?
        }
        Value::Array(a) => a
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let p = format!("{path}[{i}]");
                let name = match b.get("name") {
                    Some(Value::String(s)) => s.clone(),
                    _ => format!("stage{i}"),
                };
                one(name, b, &p)
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return schema(path, "expected stages"),
    };
    if stages.is_empty() {
        return schema(path, "at least one stage is required");
    }
    Ok(stages)
}

const MODEL_FIELDS: &[&str] = &[
    "simultaneous_faults",
    "stages",
    "input_values",
    "output_values",
    "output_fault_values",
    "alert_values",
    "node_fault_mapping",
    "fault_locations",
    "setting",
];

fn parse_model(name: &str, v: &Value, path: &str) -> Result<FaultModel, SpecError> {
    let Value::Object(o) = v else { return schema(path, "expected an object") };
    for k in o.keys() {
        if !MODEL_FIELDS.contains(&k.as_str()) {
            return schema(&format!("{path}.{k}"), "unknown field");
        }
    }
    let field = |k: &str| o.get(k).unwrap_or(&Value::Null);
    let p = |k: &str| format!("{path}.{k}");

    let simultaneous_faults = match field("simultaneous_faults") {
        Value::Null => 1,
        Value::Number(n) => match n.as_u64() {
            Some(k) if k >= 1 => k as usize,
            _ => return schema(&p("simultaneous_faults"), "must be an integer >= 1"),
        },
        _ => return schema(&p("simultaneous_faults"), "must be an integer >= 1"),
    };
    let stages = parse_stages(field("stages"), &p("stages"))?;
    let input_values = value_map(field("input_values"), &p("input_values"))?;
    let output_values = value_map(field("output_values"), &p("output_values"))?;
    let output_fault_values = match field("output_fault_values") {
        Value::Null => None,
        v => Some(value_map(v, &p("output_fault_values"))?),
    };
    let alert_values = value_map(field("alert_values"), &p("alert_values"))?;
    if output_values.is_empty() {
        return schema(&p("output_values"), "at least one expected output is required");
    }
    if let Some(f) = &output_fault_values {
        let keys = |v: &[(String, BitVector)]| v.iter().map(|(k, _)| k.clone()).collect::<Vec<_>>();
        let (mut a, mut b) = (keys(f), keys(&output_values));
        a.sort();
        b.sort();
        if a != b {
            return schema(&p("output_fault_values"), "must name the same nodes as output_values");
        }
    }

    let fault_mappings = match field("node_fault_mapping") {
        Value::Null => Vec::new(),
        Value::Object(m) => m
            .iter()
            .map(|(k, r)| {
                let rp = format!("{}.{k}", p("node_fault_mapping"));
                let list = match r {
                    Value::Array(a) => a
                        .iter()
                        .enumerate()
                        .map(|(i, x)| match x {
                            Value::String(s) => Ok(s.clone()),
                            Value::Number(n) if n.as_u64().is_some_and(|v| v <= 1) => Ok(n.to_string()),
                            _ => schema(&format!("{rp}[{i}]"), "expected a cell name, 0 or 1"),
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                    _ => return schema(&rp, "expected a list of replacements"),
                };
                if list.is_empty() {
                    return schema(&rp, "replacement list is empty");
                }
                Ok((k.clone(), list))
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return schema(&p("node_fault_mapping"), "expected an object"),
    };

    let fault_locations = match field("fault_locations") {
        Value::Null => None,
        Value::Object(m) => Some(m.keys().cloned().collect::<Vec<_>>()),
        v => Some(string_list(v, &p("fault_locations"))?),
    }
    .filter(|l| !l.is_empty() && l.iter().all(|s| s != "*"));

    let spec = FaultSpecification {
        stages,
        input_values,
        output_values,
        output_fault_values,
        alert_values,
        simultaneous_faults,
        fault_locations,
        fault_mappings,
    };
    let mode = spec.mode();
    match field("setting") {
        Value::Null => {}
        Value::String(s) if s == mode.setting() => {}
        Value::String(s) if ["FE", "FD", "FS"].contains(&s.as_str()) => {
            return schema(&p("setting"), format!("`{s}` contradicts the given fields, which select {}", mode.setting()));
        }
        _ => return schema(&p("setting"), "expected FE, FD or FS"),
    }
    Ok(FaultModel { name: name.to_string(), spec, mode })
}

/// Parse a `fimodels` document into its named models, in file order.
pub fn parse_fault_spec(text: &str) -> Result<Vec<FaultModel>, SpecError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))?;
    let Some(models) = doc.get("fimodels") else { return schema("$", "missing `fimodels`") };
    let Value::Object(models) = models else { return schema("fimodels", "expected an object") };
    if models.is_empty() {
        return schema("fimodels", "no fault models");
    }
    models.iter().map(|(name, v)| parse_model(name, v, &format!("fimodels.{name}"))).collect()
}

/// Per cell type, the replacements to try.
pub type FaultMappings = BTreeMap<String, Vec<Replacement>>;

const FAMILIES: &[(&str, &str)] =
    &[("INV", "BUF"), ("BUF", "INV"), ("NAND", "AND"), ("AND", "NAND"), ("NOR", "OR"), ("OR", "NOR"), ("XNOR", "XOR"), ("XOR", "XNOR")];

/// The inverted-function counterpart plus both stuck-at values for every
/// 1- and 2-input standard gate of `lib`.
pub fn default_mappings(lib: &CellLibrary) -> FaultMappings {
    let mut out = BTreeMap::new();
    for cell in lib.cells.values() {
        if cell.is_sequential || cell.output_pins.len() != 1 || cell.input_pins.len() > 2 {
            continue;
        }
        let Some((prefix, counter)) = FAMILIES.iter().find(|(p, _)| cell.name.starts_with(p)) else { continue };
        let Some(tt) = cell.truth_table(&cell.output_pins[0]) else { continue };
        let mask = (1u64 << (1 << cell.input_pins.len())) - 1;
        let mut reps = Vec::new();
        let name = format!("{counter}{}", &cell.name[prefix.len()..]);
        if let Some(c) = lib.get(&name) {
            let same_shape = c.input_pins.len() == cell.input_pins.len() && c.output_pins.len() == 1 && !c.is_sequential;
            if same_shape && c.truth_table(&c.output_pins[0]) == Some(!tt & mask) {
                reps.push(Replacement::Cell(name));
            }
        }
        reps.push(Replacement::Const(false));
        reps.push(Replacement::Const(true));
        out.insert(cell.name.clone(), reps);
    }
    out
}

/// Expand mapping keys against the library. A key names a cell exactly or
/// is a prefix of cell names (the longest matching key wins). A
/// replacement names a cell, or is a prefix that is completed with the
/// remainder of the original cell name (`NAND` + `AND` turns `NAND2_X1`
/// into `AND2_X1`). Prefix expansions that do not exist or do not fit are
/// skipped and reported.
pub fn resolve_mappings(
    raw: &[(String, Vec<String>)],
    lib: &CellLibrary,
) -> Result<(FaultMappings, Vec<String>), SpecError> {
    if raw.is_empty() {
        return Ok((default_mappings(lib), Vec::new()));
    }
    let mut out = BTreeMap::new();
    let mut warnings = Vec::new();
    for key in raw.iter().map(|(k, _)| k) {
        if lib.get(key).is_none() && !lib.cells.keys().any(|c| c.starts_with(key.as_str())) {
            warnings.push(format!("mapping key `{key}` matches no library cell"));
        }
    }
    for cell in lib.cells.values() {
        let Some((key, reps)) = raw
            .iter()
            .filter(|(k, _)| cell.name.starts_with(k.as_str()))
            .max_by_key(|(k, _)| (k == &cell.name, k.len()))
        else {
            continue;
        };
        let exact = key == &cell.name;
        let remainder = &cell.name[key.len()..];
        let mut list = Vec::new();
        for r in reps {
            if r == "0" || r == "1" {
                list.push(Replacement::Const(r == "1"));
                continue;
            }
            let candidate = if lib.get(r).is_some() { r.clone() } else { format!("{r}{remainder}") };
            let problem = match lib.get(&candidate) {
                None => Some("no such cell".to_string()),
                Some(c) if c.input_pins.len() > cell.input_pins.len() => {
                    Some(format!("{} inputs exceed the {} of `{}`", c.input_pins.len(), cell.input_pins.len(), cell.name))
                }
                Some(c) if c.output_pins.len() < cell.output_pins.len() => {
                    Some(format!("{} outputs, `{}` has {}", c.output_pins.len(), cell.name, cell.output_pins.len()))
                }
                Some(_) => None,
            };
            match problem {
                None => list.push(Replacement::Cell(candidate)),
                Some(reason) if exact => {
                    return Err(SpecError::BadMapping { cell: cell.name.clone(), replacement: r.clone(), reason })
                }
                Some(reason) => warnings.push(format!("skipping `{candidate}` for `{}`: {reason}", cell.name)),
            }
        }
        if !list.is_empty() {
            out.insert(cell.name.clone(), list);
        }
    }
    Ok((out, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liberty::CellDefinition;

    const ROUND_COUNTER: &str = r#"{
        "fimodels": {
            "aes_cipher_control_fsm_rnd_cntr_target_value": {
                "simultaneous_faults": 1,
                "stages": { "stage_cntr": { "inputs": ["rnd_ctr_q_i"], "outputs": ["rnd_ctr_d_o"], "type": "inout" } },
                "input_values": { "rnd_ctr_q_i": { "i": { "0": 1, "1": 0, "2": 0, "3": 0 } } },
                "output_values": { "rnd_ctr_d_o": { "o": { "0": 0, "1": 1, "2": 0, "3": 0 } } },
                "output_fault_values": { "rnd_ctr_d_o": { "o": { "0": 0, "1": 0, "2": 1, "3": 0 } } },
                "alert_values": { },
                "node_fault_mapping": { "NAND": ["AND"] },
                "fault_locations": { "Gate_189": ["stage_cntr"] }
            }
        }
    }"#;

    #[test]
    fn round_counter_document() {
        let models = parse_fault_spec(ROUND_COUNTER).unwrap();
        assert_eq!(models.len(), 1);
        let m = &models[0];
        assert_eq!(m.mode, EvaluationMode::Specific);
        assert_eq!(m.spec.simultaneous_faults, 1);
        assert_eq!(m.spec.stages[0].inputs, ["rnd_ctr_q_i"]);
        assert_eq!(m.spec.stages[0].kind.as_deref(), Some("inout"));
        assert_eq!(m.spec.input_values[0].1.to_string(), "4'b0001");
        assert_eq!(m.spec.output_values[0].1.to_string(), "4'b0010");
        assert_eq!(m.spec.output_fault_values.as_ref().unwrap()[0].1.to_string(), "4'b0100");
        assert_eq!(m.spec.input_values[0].1.pin.as_deref(), Some("i"));
        assert_eq!(m.spec.fault_locations, Some(vec!["Gate_189".to_string()]));
        assert_eq!(m.spec.fault_mappings, vec![("NAND".to_string(), vec!["AND".to_string()])]);
    }

    fn doc(body: &str) -> String {
        format!(r#"{{"fimodels": {{"m": {{"stages": {{"s": {{"inputs": ["a"], "outputs": ["y"]}}}}, {body}}}}}}}"#)
    }

    #[test]
    fn modes_from_fields() {
        let m = |body: &str| parse_fault_spec(&doc(body)).unwrap()[0].mode;
        assert_eq!(m(r#""output_values": {"y": "1'b0"}"#), EvaluationMode::Unspecific);
        assert_eq!(m(r#""output_values": {"y": "1'b0"}, "alert_values": {"e": "1'b0"}"#), EvaluationMode::UnspecificWithAlerts);
        assert_eq!(
            m(r#""output_values": {"y": "1'b0"}, "output_fault_values": {"y": "1'b1"}, "alert_values": {"e": 0}"#),
            EvaluationMode::SpecificWithAlerts
        );
        let e = parse_fault_spec(&doc(r#""output_values": {"y": "1'b0"}, "setting": "FS""#)).unwrap_err();
        assert!(matches!(e, SpecError::SchemaError { path, .. } if path == "fimodels.m.setting"));
    }

    #[test]
    fn exhaustive_locations() {
        for locs in [r#"[]"#, r#"["*"]"#, r#"{}"#] {
            let body = format!(r#""output_values": {{"y": "1'b0"}}, "fault_locations": {locs}"#);
            assert_eq!(parse_fault_spec(&doc(&body)).unwrap()[0].spec.fault_locations, None);
        }
    }

    #[test]
    fn schema_errors_carry_paths() {
        let e = parse_fault_spec(&doc(r#""output_values": {"y": "3'b01"}"#)).unwrap_err();
        assert_eq!(e, SpecError::SchemaError { path: "fimodels.m.output_values.y".into(), reason: "malformed bit-vector literal `3'b01`".into() });
        let e = parse_fault_spec(&doc(r#""output_values": {"y": 1}, "simultaneous_faults": 0"#)).unwrap_err();
        assert!(matches!(e, SpecError::SchemaError { path, .. } if path == "fimodels.m.simultaneous_faults"));
        let e = parse_fault_spec(&doc(r#""output_values": {"y": 1}, "alert_value": {}"#)).unwrap_err();
        assert!(matches!(e, SpecError::SchemaError { path, .. } if path == "fimodels.m.alert_value"));
        let e = parse_fault_spec(&doc(r#""output_values": {"y": {"o": {"0": 1, "2": 0}}}"#)).unwrap_err();
        assert!(matches!(e, SpecError::SchemaError { .. }));
        let e = parse_fault_spec(&doc(r#""output_values": {"y": 1}, "output_fault_values": {"z": 1}"#)).unwrap_err();
        assert!(matches!(e, SpecError::SchemaError { .. }));
    }

    #[test]
    fn literals() {
        assert_eq!(BitVector::parse_literal("3'b011").unwrap().value, BitValue::Bits(vec![true, true, false]));
        assert_eq!(BitVector::parse_literal("4'hA").unwrap().to_string(), "4'b1010");
        assert_eq!(BitVector::parse_literal("6'd40").unwrap().to_string(), "6'b101000");
        assert!(BitVector::parse_literal("2'd4").is_none());
        assert_eq!(BitVector::parse_literal("2").unwrap().resolve("n", 4).unwrap(), vec![false, true, false, false]);
        assert!(matches!(BitVector::parse_literal("9").unwrap().resolve("n", 3), Err(SpecError::WidthMismatch { .. })));
    }

    fn lib() -> CellLibrary {
        let mut l = CellLibrary::new("t");
        for (n, ins, f) in [
            ("INV_X1", &["A"][..], "!A"),
            ("BUF_X1", &["A"][..], "A"),
            ("NAND2_X1", &["A1", "A2"][..], "!(A1 & A2)"),
            ("AND2_X1", &["A1", "A2"][..], "A1 & A2"),
            ("NAND3_X1", &["A1", "A2", "A3"][..], "!(A1 & A2 & A3)"),
            ("XNOR2_X1", &["A", "B"][..], "!(A ^ B)"),
            ("XOR2_X1", &["A", "B"][..], "A ^ B"),
            ("NOR2_X1", &["A1", "A2"][..], "!(A1 | A2)"),
        ] {
            l.insert(CellDefinition::combinational(n, ins, &[("ZN", f)]).unwrap()).unwrap();
        }
        l
    }

    #[test]
    fn defaults_pair_inverted_functions() {
        let d = default_mappings(&lib());
        let c = |s: &str| Replacement::Cell(s.into());
        let (z, o) = (Replacement::Const(false), Replacement::Const(true));
        assert_eq!(d["NAND2_X1"], vec![c("AND2_X1"), z.clone(), o.clone()]);
        assert_eq!(d["XNOR2_X1"], vec![c("XOR2_X1"), z.clone(), o.clone()]);
        assert_eq!(d["INV_X1"], vec![c("BUF_X1"), z.clone(), o.clone()]);
        // No OR2 in the library: stuck-at only.
        assert_eq!(d["NOR2_X1"], vec![z, o]);
        // Three-input gates are not part of the default set.
        assert!(!d.contains_key("NAND3_X1"));
    }

    #[test]
    fn prefix_mapping_keeps_drive_suffix() {
        let raw = vec![("NAND".to_string(), vec!["AND".to_string(), "0".to_string()])];
        let (m, warnings) = resolve_mappings(&raw, &lib()).unwrap();
        assert_eq!(m["NAND2_X1"], vec![Replacement::Cell("AND2_X1".into()), Replacement::Const(false)]);
        // AND3_X1 is missing, so NAND3 keeps only the stuck-at.
        assert_eq!(m["NAND3_X1"], vec![Replacement::Const(false)]);
        assert_eq!(warnings.len(), 1);
        assert!(!m.contains_key("AND2_X1"));

        let raw = vec![("NAND2_X1".to_string(), vec!["NAND3_X1".to_string()])];
        assert!(matches!(resolve_mappings(&raw, &lib()), Err(SpecError::BadMapping { .. })));
        // A narrower replacement binds positionally and is accepted.
        let raw = vec![("NAND2_X1".to_string(), vec!["INV_X1".to_string()])];
        assert_eq!(resolve_mappings(&raw, &lib()).unwrap().0["NAND2_X1"], vec![Replacement::Cell("INV_X1".into())]);
    }

    #[test]
    fn serialize_then_parse_keeps_mode() {
        for models in [parse_fault_spec(ROUND_COUNTER).unwrap(), parse_fault_spec(&doc(r#""output_values": {"y": "2'b01"}, "alert_values": {"e": "1'b0"}"#)).unwrap()] {
            let again = parse_fault_spec(&fault_models_to_json(&models).to_string()).unwrap();
            assert_eq!(again[0].mode, models[0].mode);
            assert_eq!(again[0].spec.output_values[0].1.to_string(), models[0].spec.output_values[0].1.to_string());
        }
    }
}
