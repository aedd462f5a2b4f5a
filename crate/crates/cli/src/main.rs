use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use csflock::config::{ConfigError, Overrides, SimConfig};
use csflock::export::{self, ExportError};
use csflock::integrator::{simulate, simulate_refinement_ladder, SimulateError};
use csflock::oracle::{classify, solve_reduced, TwoBodyState};
use csflock::scenarios::{self, ScenarioError};
use csflock::verify::{verify_run, Check, VerificationReport, VerifyOptions};
use csflock::Normalization;

const BUILD: &str = env!("CSFLOCK_BUILD");

#[derive(Parser)]
#[command(name = "csflock", version = BUILD, about = "Singular Cucker-Smale flocking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration, verify the run and write its files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-simulate an exported run and verify it.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
    /// Classify a two-particle configuration with the reference solution.
    Oracle {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        w0: f64,
        #[arg(long, allow_hyphen_values = true)]
        u0: f64,
        /// Also report the relative state at this time.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Run a shipped scenario.
    Demo {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(scenarios::SCENARIOS))]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a configuration at several tolerance levels and report convergence.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    OverN,
    Unnormalized,
}

#[derive(Args, Default)]
struct OverrideArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "normalize", value_enum)]
    normalize: Option<NormArg>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            n: self.n,
            dim: self.dim,
            t_final: self.t_final,
            seed: self.seed,
            normalization: self.normalize.map(|n| match n {
                NormArg::OverN => Normalization::OverN,
                NormArg::Unnormalized => Normalization::Unnormalized,
            }),
        }
    }
}

/// Exit statuses: pass, failed verification, bad input, runtime failure.
enum Failure {
    Verification,
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification => 1,
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<SimulateError> for Failure {
    fn from(e: SimulateError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Unknown(_) | ScenarioError::Config(_) => Failure::Usage(e.to_string()),
            ScenarioError::Simulate(_) | ScenarioError::Export(_) => Failure::Runtime(e.to_string()),
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable output"));
}

fn outcome(report: &VerificationReport) -> Result<(), Failure> {
    for c in report.failures() {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn summary_line(report: &VerificationReport) -> serde_json::Value {
    json!({
        "passed": report.passed,
        "checks": report.checks.len(),
        "skipped": report.checks.iter().filter(|c| c.skipped).count(),
        "failed": report.failures().map(|c| c.name.clone()).collect::<Vec<_>>(),
    })
}

fn run_simulate(config: &Path, out: &Path, o: &OverrideArgs) -> Result<(), Failure> {
    let cfg = SimConfig::from_path(config, &o.overrides())?;
    let run = simulate(&cfg)?;
    let report = verify_run(&run, &VerifyOptions::default());
    export::export_run(out, &run, &cfg, &report, BUILD)?;
    print_json(&json!({
        "out": out.display().to_string(),
        "events": run.events.len(),
        "sticking": run.sticking_events().count(),
        "verification": summary_line(&report),
    }));
    outcome(&report)
}

fn run_verify(dir: &Path) -> Result<(), Failure> {
    let stored = export::read_run(dir).map_err(|e| match e {
        ExportError::Io { .. } => Failure::Usage(e.to_string()),
        ExportError::Format { .. } => Failure::Usage(e.to_string()),
    })?;
    let run = simulate(&stored.config)?;
    let mut report = verify_run(&run, &VerifyOptions::default());
    let identical = run.trajectory == stored.trajectory;
    let events: Vec<export::EventLine> = run.events.iter().map(Into::into).collect();
    report.push(Check::flag(
        "reproduces_trajectory",
        identical,
        if identical {
            "re-simulated samples equal the stored ones bitwise".to_string()
        } else {
            format!(
                "re-simulated samples differ from the stored ones (sup distance {:?})",
                run.trajectory.sup_distance(&stored.trajectory)
            )
        },
    ));
    report.push(Check::flag(
        "reproduces_events",
        events == stored.events,
        format!("{} events stored, {} re-simulated", stored.events.len(), events.len()),
    ));
    print_json(&serde_json::to_value(&report).expect("serializable report"));
    if stored.build != BUILD {
        eprintln!("note: run written by build {}, verified by {}", stored.build, BUILD);
    }
    outcome(&report)
}

fn run_oracle(alpha: f64, w0: f64, u0: f64, t: Option<f64>) -> Result<(), Failure> {
    let bad = |e: csflock::oracle::OracleError| Failure::Usage(e.to_string());
    let state = TwoBodyState::new(w0, u0, alpha).map_err(bad)?;
    let out = classify(&state).map_err(bad)?;
    let mut doc = json!({
        "alpha": alpha, "w0": w0, "u0": u0,
        "first_integral": state.first_integral(),
        "outcome": out,
    });
    if let Some(t) = t {
        let (w, u) = solve_reduced(&state, t, 1e-12).map_err(bad)?;
        doc["state"] = json!({"t": t, "w": w, "u": u});
    }
    print_json(&doc);
    Ok(())
}

fn run_demo(name: &str, out: Option<&Path>, o: &OverrideArgs) -> Result<(), Failure> {
    let r = scenarios::run_scenario(name, &o.overrides(), out, BUILD)?;
    let mut doc = json!({
        "scenario": name,
        "events": r.run.events.iter().map(export::EventLine::from).collect::<Vec<_>>(),
        "verification": summary_line(&r.report),
    });
    if let Some((_, _, rep)) = &r.companion {
        doc["companion_verification"] = summary_line(rep);
    }
    if let Some(b) = &r.backward {
        doc["backward"] = serde_json::to_value(b).expect("serializable");
    }
    print_json(&doc);
    if let Some((_, _, rep)) = &r.companion {
        outcome(rep)?;
    }
    outcome(&r.report)
}

fn run_sweep(config: &Path, levels: usize, out: Option<&Path>, o: &OverrideArgs) -> Result<(), Failure> {
    if levels < 2 {
        return Err(Failure::Usage(format!("--levels must be at least 2, got {levels}")));
    }
    let cfg = SimConfig::from_path(config, &o.overrides())?;
    let ladder = simulate_refinement_ladder(&cfg, levels)?;
    let doc = json!({
        "report": ladder.report,
        "min_order": ladder.report.min_order(),
        "distances_decrease": ladder.report.distances_decrease(),
    });
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        let p = dir.join("sweep.json");
        std::fs::write(&p, serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
            .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
    }
    print_json(&doc);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate { config, out, overrides } => run_simulate(config, out, overrides),
        Command::Verify { run } => run_verify(run),
        Command::Oracle { alpha, w0, u0, t } => run_oracle(*alpha, *w0, *u0, *t),
        Command::Demo { name, out, overrides } => run_demo(name, out.as_deref(), overrides),
        Command::Sweep { config, levels, out, overrides } => {
            run_sweep(config, *levels, out.as_deref(), overrides)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verification => eprintln!("verification failed"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
