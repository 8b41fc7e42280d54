//! End-to-end campaigns: load the design, run every fault model of a
//! specification across a worker pool, and aggregate the report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::diff::{
    build_differential, count_configs, enumerate_fault_configs, evaluate, fault_sites, inject_faults, DiffError,
    DiffGraph, FaultConfig, FaultConfigs, FaultSite, Status,
};
use crate::fault_spec::{parse_fault_spec, resolve_mappings, FaultModel, SpecError};
use crate::graph::CircuitGraph;
use crate::liberty::{parse_cell_library_json, parse_liberty, parse_submodule_functions, CellDefinition, CellLibrary, LibraryError};
use crate::netlist::{build_graph, parse_netlist, select_top, NetlistError};
use crate::sat::{Cdcl, ExternalSolver, SatSolver};
use crate::target::{extract_target, preprocess, TargetError, TargetGraph};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("cell library: {0}")]
    Library(#[from] LibraryError),
    #[error("netlist: {0}")]
    Netlist(#[from] NetlistError),
    #[error("preprocessing: {0}")]
    Preprocess(TargetError),
    #[error("fault specification: {0}")]
    Spec(#[from] SpecError),
    #[error("model `{model}`, target extraction: {source}")]
    Target { model: String, source: TargetError },
    #[error("model `{model}`, fault injection: {source}")]
    Injection { model: String, source: DiffError },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    Internal,
    External(PathBuf),
}

impl FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "internal" => Ok(SolverChoice::Internal),
            _ => match s.strip_prefix("external:") {
                Some(p) if !p.is_empty() => Ok(SolverChoice::External(p.into())),
                _ => Err(format!("expected `internal` or `external:PATH`, got `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    /// Overrides the `simultaneous_faults` of every model.
    pub simultaneous_faults: Option<usize>,
    pub jobs: usize,
    /// Evaluate only the first N configurations of each model.
    pub max_faults: Option<u64>,
    pub solver: SolverChoice,
    /// Extra arguments placed before the DIMACS path of an external solver.
    pub solver_args: Vec<String>,
    pub seed: u64,
    pub conflict_limit: Option<u64>,
    /// Top module; required when the netlist has several candidates.
    pub top: Option<String>,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions {
            simultaneous_faults: None,
            jobs: 1,
            max_faults: None,
            solver: SolverChoice::Internal,
            solver_args: Vec::new(),
            seed: 0,
            conflict_limit: None,
            top: None,
        }
    }
}

impl CampaignOptions {
    pub fn solver(&self) -> Box<dyn SatSolver> {
        match &self.solver {
            SolverChoice::Internal => Box::new(Cdcl { seed: self.seed, conflict_limit: self.conflict_limit }),
            SolverChoice::External(p) => Box::new(ExternalSolver { program: p.clone(), args: self.solver_args.clone() }),
        }
    }
}

/// A parsed and preprocessed design, shared by all models.
#[derive(Debug, Clone)]
pub struct Design {
    pub graph: CircuitGraph,
    pub warnings: Vec<String>,
}

/// Build and preprocess the top module of `netlist` against `library`.
pub fn load_design(
    library: &CellLibrary,
    netlist: &str,
    submodules: &BTreeMap<String, CellDefinition>,
    top: Option<&str>,
) -> Result<Design, CampaignError> {
    let modules = parse_netlist(netlist)?;
    let module = select_top(&modules, top)?;
    let (g, dangling) = build_graph(module, library, submodules)?;
    let mut warnings: Vec<String> = dangling
        .iter()
        .map(|d| format!("`{}` pin `{}` is undriven and became a free input", d.instance, d.pin))
        .collect();
    let (graph, more) = preprocess(&g).map_err(CampaignError::Preprocess)?;
    warnings.extend(more);
    Ok(Design { graph, warnings })
}

fn read(path: &Path) -> Result<String, CampaignError> {
    std::fs::read_to_string(path).map_err(|e| CampaignError::Io { path: path.into(), reason: e.to_string() })
}

/// Liberty text, or the JSON cell-library form when the file is `.json`.
pub fn load_library(path: &Path) -> Result<CellLibrary, CampaignError> {
    let text = read(path)?;
    Ok(if path.extension().is_some_and(|e| e == "json") { parse_cell_library_json(&text)? } else { parse_liberty(&text)? })
}

/// One model made ready for injection.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub name: String,
    pub target: TargetGraph,
    pub sites: Vec<FaultSite>,
    pub k: usize,
    pub warnings: Vec<String>,
}

impl PreparedModel {
    pub fn configs(&self) -> FaultConfigs<'_> {
        enumerate_fault_configs(&self.sites, self.k)
    }

    pub fn total_configs(&self) -> u128 {
        count_configs(&self.sites, self.k)
    }

    pub fn differential(&self, config: &FaultConfig) -> Result<DiffGraph, DiffError> {
        build_differential(&self.target, &inject_faults(&self.target, config)?)
    }
}

pub fn prepare_model(design: &Design, model: &FaultModel, k_override: Option<usize>) -> Result<PreparedModel, CampaignError> {
    let target = extract_target(&design.graph, &model.spec)
        .map_err(|source| CampaignError::Target { model: model.name.clone(), source })?;
    let (mappings, mut warnings) = resolve_mappings(&model.spec.fault_mappings, &design.graph.cells)?;
    let sites = fault_sites(&target, model.spec.fault_locations.as_deref(), &mappings)
        .map_err(|source| CampaignError::Injection { model: model.name.clone(), source })?;
    warnings.splice(0..0, target.warnings.iter().cloned());
    let k = k_override.unwrap_or(model.spec.simultaneous_faults);
    if k == 0 {
        return Err(CampaignError::Usage("the number of simultaneous faults must be at least 1".into()));
    }
    Ok(PreparedModel { name: model.name.clone(), target, sites, k, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectedFault {
    pub location: String,
    pub cell: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultRecord {
    /// Position of the configuration in the enumeration order.
    pub index: u64,
    pub faults: Vec<InjectedFault>,
    pub witness: Option<Vec<(String, bool)>>,
    /// Why the record is inconclusive.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub name: String,
    pub setting: &'static str,
    pub simultaneous_faults: usize,
    pub locations: usize,
    /// Size of the configuration space before truncation.
    pub configurations: u128,
    pub total: u64,
    pub effective: u64,
    pub execution_seconds: f64,
    pub circuit_ge: f64,
    pub warnings: Vec<String>,
    pub effective_faults: Vec<FaultRecord>,
    pub inconclusive_faults: Vec<FaultRecord>,
}

impl ModelReport {
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.effective as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CampaignReport {
    pub design_warnings: Vec<String>,
    pub models: Vec<ModelReport>,
}

fn record_json(r: &FaultRecord) -> Value {
    let mut m = Map::new();
    m.insert("index".into(), json!(r.index));
    m.insert(
        "faults".into(),
        Value::Array(
            r.faults
                .iter()
                .map(|f| json!({"location": f.location, "cell": f.cell, "replacement": f.replacement}))
                .collect(),
        ),
    );
    if let Some(w) = &r.witness {
        m.insert("witness".into(), Value::Object(w.iter().map(|(n, b)| (n.clone(), json!(*b as u8))).collect()));
    }
    if let Some(reason) = &r.reason {
        m.insert("reason".into(), json!(reason));
    }
    Value::Object(m)
}

impl CampaignReport {
    pub fn effective_total(&self) -> u64 {
        self.models.iter().map(|m| m.effective).sum()
    }

    /// Report JSON in a fixed key order. Timing is the only field that
    /// varies between identical runs.
    pub fn to_json(&self, include_timing: bool) -> Value {
        let models: Vec<Value> = self
            .models
            .iter()
            .map(|m| {
                let mut o = Map::new();
                o.insert("name".into(), json!(m.name));
                o.insert("setting".into(), json!(m.setting));
                o.insert("simultaneous_faults".into(), json!(m.simultaneous_faults));
                o.insert("fault_locations".into(), json!(m.locations));
                o.insert("configurations".into(), json!(m.configurations.to_string()));
                o.insert("total".into(), json!(m.total));
                o.insert("effective".into(), json!(m.effective));
                o.insert("effective_percent".into(), json!(m.percent()));
                o.insert("inconclusive".into(), json!(m.inconclusive_faults.len()));
                if include_timing {
                    o.insert("execution_seconds".into(), json!(m.execution_seconds));
                }
                o.insert("circuit_ge".into(), json!(m.circuit_ge));
                o.insert("warnings".into(), json!(m.warnings));
                o.insert("effective_faults".into(), Value::Array(m.effective_faults.iter().map(record_json).collect()));
                o.insert(
                    "inconclusive_faults".into(),
                    Value::Array(m.inconclusive_faults.iter().map(record_json).collect()),
                );
                Value::Object(o)
            })
            .collect();
        json!({"warnings": self.design_warnings, "models": models})
    }
}

/// Table-style summary, one row per model in specification order.
pub fn summarize(report: &CampaignReport) -> String {
    let header = ["Target", "Setting", "Simult. Faults", "Effective %", "Total", "Execution", "Circuit GE"];
    let rows: Vec<[String; 7]> = report
        .models
        .iter()
        .map(|m| {
            [
                m.name.clone(),
                m.setting.to_string(),
                m.simultaneous_faults.to_string(),
                format!("{:.2} %", m.percent()),
                format!("{} / {}", m.effective, m.total),
                format!("{:.2} s", m.execution_seconds),
                format!("{:.2}", m.circuit_ge),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            let _ = write!(s, "{c:<w$}");
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&line(&widths.map(|w| "-".repeat(w))).replace(" | ", "-+-"));
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

enum Outcome {
    Ineffective,
    Effective(Vec<(String, bool)>),
    Inconclusive(String),
}

fn evaluate_config(model: &PreparedModel, config: &FaultConfig, solver: &dyn SatSolver) -> Outcome {
    let run = || -> Result<Outcome, DiffError> {
        let diff = model.differential(config)?;
        let v = evaluate(&diff, solver)?;
        Ok(match v.status {
            Status::Effective => Outcome::Effective(v.witness.unwrap_or_default()),
            Status::Ineffective => Outcome::Ineffective,
            Status::Inconclusive(r) => Outcome::Inconclusive(r),
        })
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => Outcome::Inconclusive(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_default();
            Outcome::Inconclusive(format!("evaluation panicked: {msg}"))
        }
    }
}

const BATCH: usize = 1024;

/// Evaluate every configuration of `model`. Results are folded in
/// enumeration order, so the report does not depend on `jobs`.
pub fn run_model(model: &PreparedModel, options: &CampaignOptions) -> Result<ModelReport, CampaignError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| CampaignError::Usage(format!("worker pool: {e}")))?;
    let solver: Arc<dyn SatSolver> = options.solver().into();
    let g = &model.target.graph;
    let describe = |c: &FaultConfig| -> Vec<InjectedFault> {
        c.faults
            .iter()
            .map(|(v, r)| InjectedFault {
                location: g.name(*v).to_string(),
                cell: g.cell_type(*v).unwrap_or_default().to_string(),
                replacement: r.to_string(),
            })
            .collect()
    };

    let mut stream = model.configs().take(options.max_faults.map_or(usize::MAX, |n| n as usize));
    let (mut total, mut effective) = (0u64, 0u64);
    let (mut effective_faults, mut inconclusive_faults) = (Vec::new(), Vec::new());
    loop {
        let batch: Vec<FaultConfig> = stream.by_ref().take(BATCH).collect();
        if batch.is_empty() {
            break;
        }
        let outcomes: Vec<Outcome> =
            pool.install(|| batch.par_iter().map(|c| evaluate_config(model, c, solver.as_ref())).collect());
        for (c, o) in batch.iter().zip(outcomes) {
            let index = total;
            total += 1;
            match o {
                Outcome::Ineffective => {}
                Outcome::Effective(w) => {
                    effective += 1;
                    effective_faults.push(FaultRecord { index, faults: describe(c), witness: Some(w), reason: None });
                }
                Outcome::Inconclusive(r) => {
                    inconclusive_faults.push(FaultRecord { index, faults: describe(c), witness: None, reason: Some(r) })
                }
            }
        }
    }
    let configurations = model.total_configs();
    let mut warnings = model.warnings.clone();
    if (total as u128) < configurations {
        warnings.push(format!("truncated to the first {total} of {configurations} configurations"));
    }
    Ok(ModelReport {
        name: model.name.clone(),
        setting: model.target.mode.setting(),
        simultaneous_faults: model.k,
        locations: model.sites.len(),
        configurations,
        total,
        effective,
        execution_seconds: start.elapsed().as_secs_f64(),
        circuit_ge: model.target.ge,
        warnings,
        effective_faults,
        inconclusive_faults,
    })
}

pub fn run_models(design: &Design, models: &[FaultModel], options: &CampaignOptions) -> Result<CampaignReport, CampaignError> {
    let mut report = CampaignReport { design_warnings: design.warnings.clone(), models: Vec::new() };
    for m in models {
        let prepared = prepare_model(design, m, options.simultaneous_faults)?;
        report.models.push(run_model(&prepared, options)?);
    }
    Ok(report)
}

/// File-level entry point: library, netlist, optional submodule functions,
/// and the fault specification.
pub fn run_campaign(
    lib_path: &Path,
    netlist_path: &Path,
    spec_path: &Path,
    submodules_path: Option<&Path>,
    options: &CampaignOptions,
) -> Result<CampaignReport, CampaignError> {
    let library = load_library(lib_path)?;
    let submodules = match submodules_path {
        Some(p) => parse_submodule_functions(&read(p)?)?,
        None => BTreeMap::new(),
    };
    let design = load_design(&library, &read(netlist_path)?, &submodules, options.top.as_deref())?;
    let models = parse_fault_spec(&read(spec_path)?)?;
    run_models(&design, &models, options)
}
