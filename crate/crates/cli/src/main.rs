mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use saa_core::bounds::{sample_size_bound, BoundInputs, CoveringModel};
use saa_core::cond_grad::{self, SolveTrace};
use saa_core::pde_models::ControlField;
use saa_core::study::{
    self, build_reference, control_heatmap_svg, nominal_problem, run_study_with_reference,
    write_control_csv, StudyConfig, BANG_BANG_THRESHOLD,
};

use config::CliConfig;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_STUDY_DIR: u8 = 3;
const EXIT_STUDY_INVALID: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "saa", version, about = "SAA experiments for risk-neutral PDE-constrained control")]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `study.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the single-sample problem at the mean parameter.
    SolveNominal,
    /// Solve the QMC reference problem.
    SolveReference,
    /// Reference solve plus all SAA replications, tables, and plots.
    RunStudy,
    /// Sample-size estimate `ceil(12 r² τ² / ε² · N(ε / (4 r L)))`.
    Bound {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long = "L")]
        lipschitz: f64,
        #[arg(long)]
        eps: f64,
        /// `const:<c>` or `poly:<c>:<s>`.
        #[arg(long, default_value = "const:1")]
        covering: String,
    },
    /// Rebuild summary, rates, and plots from a study directory.
    Report {
        /// Study directory (defaults to --out).
        dir: Option<PathBuf>,
    },
}

enum Failure {
    Config(anyhow::Error),
    StudyDir(anyhow::Error),
    Runtime(anyhow::Error),
    Invalid(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::StudyDir(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_STUDY_DIR)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("study invalid: {msg}");
            ExitCode::from(EXIT_STUDY_INVALID)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config(anyhow::anyhow!("--threads must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    match &cli.command {
        Command::Bound {
            r,
            tau,
            lipschitz,
            eps,
            covering,
        } => {
            let covering: CoveringModel = covering.parse().map_err(|e| Failure::Config(anyhow::Error::from(e)))?;
            let inp = BoundInputs {
                r_ad: *r,
                tau: *tau,
                lipschitz: *lipschitz,
                covering,
            };
            let n = sample_size_bound(&inp, *eps).map_err(|e| Failure::Config(e.into()))?;
            println!("{n}");
            Ok(())
        }
        Command::Report { dir } => {
            let dir = dir.as_deref().unwrap_or(&cli.out);
            let summary = study::regenerate_report(dir).map_err(|e| Failure::StudyDir(e.into()))?;
            print_summary(&summary);
            Ok(())
        }
        Command::SolveNominal | Command::SolveReference | Command::RunStudy => {
            let mut config = match &cli.config {
                Some(path) => CliConfig::load(path).map_err(Failure::Config)?,
                None => CliConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.study.seed = seed;
            }
            let study_cfg = config
                .study(Some(cli.out.clone()))
                .map_err(Failure::Config)?;
            fs::create_dir_all(&cli.out)
                .with_context(|| format!("cannot create {}", cli.out.display()))?;
            write_manifest(cli, &config)?;
            match cli.command {
                Command::SolveNominal => solve_nominal(&study_cfg, &cli.out),
                Command::SolveReference => solve_reference(&study_cfg, &cli.out),
                _ => run_study_cmd(&study_cfg),
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::SolveNominal => "solve-nominal",
        Command::SolveReference => "solve-reference",
        Command::RunStudy => "run-study",
        Command::Bound { .. } => "bound",
        Command::Report { .. } => "report",
    }
}

/// Echoes the resolved configuration and records everything needed to
/// reproduce the run. No timestamps, so reruns produce identical files.
fn write_manifest(cli: &Cli, config: &CliConfig) -> anyhow::Result<()> {
    fs::write(cli.out.join("config.toml"), config.to_toml())?;
    let mut m = fs::File::create(cli.out.join("manifest.toml"))?;
    writeln!(m, "tool = \"saa\"")?;
    writeln!(m, "version = \"{}\"", env!("CARGO_PKG_VERSION"))?;
    writeln!(m, "core_version = \"{}\"", saa_core::VERSION)?;
    writeln!(m, "command = \"{}\"", command_name(&cli.command))?;
    writeln!(m, "seed = {}", config.study.seed)?;
    writeln!(m, "config = \"config.toml\"")?;
    if let Some(p) = &cli.config {
        writeln!(m, "config_source = {:?}", p.display().to_string())?;
    }
    // outputs do not depend on the thread count; recorded for timing comparisons only
    writeln!(m, "threads = {}", rayon::current_num_threads())?;
    Ok(())
}

fn write_solution(out: &Path, stem: &str, cfg: &StudyConfig, u: &ControlField, trace: &SolveTrace, title: &str) -> anyhow::Result<()> {
    let mesh = saa_core::mesh_fem::Mesh::new(cfg.n)?;
    let data = cfg.problem.data(cfg.kind, &mesh);
    trace.write_csv(fs::File::create(out.join(format!("{stem}_trace.csv")))?)?;
    write_control_csv(fs::File::create(out.join(format!("{stem}_control.csv")))?, &mesh, u)?;
    fs::write(
        out.join(format!("{stem}_control.svg")),
        control_heatmap_svg(&mesh, u, data.lower, data.upper, title),
    )?;
    Ok(())
}

fn report_trace(name: &str, trace: &SolveTrace) {
    println!(
        "{name}: {:?} after {} iterations, objective {:e}, gap {:e}",
        trace.status,
        trace.iterations(),
        trace.final_objective(),
        trace.final_gap()
    );
}

fn solve_nominal(cfg: &StudyConfig, out: &Path) -> Result<(), Failure> {
    let problem = nominal_problem(cfg).map_err(anyhow::Error::from)?;
    let u0 = ControlField::zeros(problem.mesh().num_cells());
    let trace = cond_grad::solve(&problem, &u0, &cfg.solver).map_err(anyhow::Error::from)?;
    write_solution(out, "nominal", cfg, &trace.final_u, &trace, &format!("nominal solution ({})", cfg.kind.name()))?;
    report_trace("nominal", &trace);
    Ok(())
}

fn solve_reference(cfg: &StudyConfig, out: &Path) -> Result<(), Failure> {
    let reference = build_reference(cfg).map_err(anyhow::Error::from)?;
    write_solution(
        out,
        "reference",
        cfg,
        &reference.u_ref,
        &reference.trace,
        &format!("reference solution ({})", cfg.kind.name()),
    )?;
    report_trace("reference", &reference.trace);
    let d = reference.problem.data();
    println!(
        "bang-bang-off share: {:.4}",
        study::bang_bang_fraction(&reference.u_ref, d.lower, d.upper)
    );
    Ok(())
}

fn run_study_cmd(cfg: &StudyConfig) -> Result<(), Failure> {
    let reference = build_reference(cfg).map_err(anyhow::Error::from)?;
    report_trace("reference", &reference.trace);
    let report = run_study_with_reference(cfg, &reference).map_err(anyhow::Error::from)?;
    print_summary(&report.summary);
    for (m, f) in &report.fits {
        match f {
            Some(f) => println!("rate {m}: slope {:.4} (r² {:.4})", f.slope, f.r_squared),
            None => println!("rate {m}: not enough positive means"),
        }
    }
    if report.bang_bang_fraction < BANG_BANG_THRESHOLD {
        println!(
            "note: only {:.1}% of reference cells are at a bound or zero",
            100.0 * report.bang_bang_fraction
        );
    }
    if !report.valid {
        return Err(Failure::Invalid(
            "more than 20% of the replications failed at some sample size".into(),
        ));
    }
    Ok(())
}

fn print_summary(rows: &[study::SummaryRow]) {
    println!("{:>6} {:>12} {:>12} {:>12}", "N", "obj_gap", "l1_dist", "ref_gap");
    for r in rows {
        println!(
            "{:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.n, r.mean_obj_gap, r.mean_l1, r.mean_gap
        );
    }
}
