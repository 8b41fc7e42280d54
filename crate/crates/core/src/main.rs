use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use netlist_fi::campaign::{
    load_design, load_library, prepare_model, run_model, summarize, CampaignOptions, CampaignReport, SolverChoice,
};
use netlist_fi::demos::generate_demos;
use netlist_fi::fault_spec::parse_fault_spec;
use netlist_fi::liberty::parse_submodule_functions;
use netlist_fi::sat::{parse_dimacs, Cdcl, SatResult, SatSolver};

#[derive(Parser)]
#[command(name = "netlist-fi", version, about = "Fault-injection verification for gate-level netlists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Run every fault model of a specification against a netlist.
    Run(RunArgs),
    /// Write the bundled demo library, netlists and specifications.
    Demos {
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide a DIMACS file and answer in the competition format.
    #[command(hide = true)]
    SolveDimacs { file: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Liberty file (or JSON cell library with a `.json` extension).
    #[arg(long)]
    lib: PathBuf,
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// JSON functions for submodules instantiated by the netlist.
    #[arg(long)]
    submodules: Option<PathBuf>,
    #[arg(long)]
    top: Option<String>,
    #[arg(long, short = 'k')]
    simultaneous_faults: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    max_faults: Option<u64>,
    /// `internal` or `external:PATH`.
    #[arg(long, default_value = "internal")]
    solver: SolverChoice,
    /// Argument passed to the external solver before the DIMACS path.
    #[arg(long)]
    solver_arg: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Conflicts before a configuration is reported inconclusive.
    #[arg(long)]
    conflict_limit: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the extracted target as JSON, with a `.dot` sibling.
    #[arg(long)]
    dump_target: Option<PathBuf>,
    /// Write the differential graph of configuration N as Graphviz.
    #[arg(long, value_name = "N")]
    dump_differential: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn per_model(path: &Path, model: &str, multiple: bool) -> PathBuf {
    if !multiple {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}.{model}{ext}"))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(args: RunArgs) -> Result<CampaignReport, String> {
    let options = CampaignOptions {
        simultaneous_faults: args.simultaneous_faults,
        jobs: args.jobs,
        max_faults: args.max_faults,
        solver: args.solver,
        solver_args: args.solver_arg,
        seed: args.seed,
        conflict_limit: args.conflict_limit,
        top: args.top,
    };
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let library = load_library(&args.lib).map_err(|e| e.to_string())?;
    let submodules = match &args.submodules {
        Some(p) => parse_submodule_functions(&read(p)?).map_err(|e| e.to_string())?,
        None => Default::default(),
    };
    let design = load_design(&library, &read(&args.netlist)?, &submodules, options.top.as_deref()).map_err(|e| e.to_string())?;
    let models = parse_fault_spec(&read(&args.spec)?).map_err(|e| format!("fault specification: {e}"))?;
    let multiple = models.len() > 1;
    let mut report = CampaignReport { design_warnings: design.warnings.clone(), models: Vec::new() };
    for m in &models {
        let prepared = prepare_model(&design, m, options.simultaneous_faults).map_err(|e| e.to_string())?;
        if let Some(path) = &args.dump_target {
            let path = per_model(path, &m.name, multiple);
            let json = serde_json::to_string_pretty(&prepared.target.to_json()).expect("serializable");
            write(&path, &json)?;
            write(&path.with_extension("dot"), &prepared.target.graph.to_dot())?;
        }
        if let Some(n) = args.dump_differential {
            match prepared.configs().nth(n as usize) {
                Some(c) => {
                    let diff = prepared.differential(&c).map_err(|e| e.to_string())?;
                    write(Path::new(&format!("differential-{}-{n}.dot", m.name)), &diff.to_dot())?;
                }
                None => eprintln!("warning: model `{}` has no configuration {n}", m.name),
            }
        }
        report.models.push(run_model(&prepared, &options).map_err(|e| e.to_string())?);
    }
    if let Some(path) = &args.report {
        write(path, &(serde_json::to_string_pretty(&report.to_json(true)).expect("serializable") + "\n"))?;
    }
    match args.format {
        Format::Table => print!("{}", summarize(&report)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report.to_json(true)).expect("serializable")),
    }
    for w in report.design_warnings.iter().chain(report.models.iter().flat_map(|m| &m.warnings)) {
        eprintln!("warning: {w}");
    }
    Ok(report)
}

fn solve_dimacs(file: &Path) -> Result<u8, String> {
    let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let cnf = parse_dimacs(&text).map_err(|e| e.to_string())?;
    let (result, _) = Cdcl::default().solve(&cnf).map_err(|e| e.to_string())?;
    Ok(match result {
        SatResult::Sat(model) => {
            let lits: Vec<String> =
                model.iter().enumerate().map(|(i, &b)| if b { format!("{}", i + 1) } else { format!("-{}", i + 1) }).collect();
            println!("s SATISFIABLE\nv {} 0", lits.join(" "));
            10
        }
        SatResult::Unsat => {
            println!("s UNSATISFIABLE");
            20
        }
        SatResult::Unknown(_) => {
            println!("s UNKNOWN");
            0
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args).map(|r| if r.effective_total() > 0 { 2 } else { 0 }),
        Command::Demos { out } => generate_demos(&out)
            .map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                0
            })
            .map_err(|e| format!("{}: {e}", out.display())),
        Command::SolveDimacs { file } => solve_dimacs(&file),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
