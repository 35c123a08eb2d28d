use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cyclosync_cli::{output, run, CliError, Command, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "cyclosync",
    version,
    about = "Cyclostationary timing recovery experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario spec (JSON). Optional for selftest.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the spec seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Detector characteristic curves over a tau_g grid.
    /// Columns: detector, tau_g_ui, e_t, aux_real.
    Scurve,
    /// CD estimation over random PSP draws.
    /// Columns: draw, p1, p2, p3, dgd_ps, estimator, dl_hat_ns_nm, error_ns_nm,
    /// refined_error_ns_nm, grid_step_ns_nm, peak_to_median, low_confidence.
    CdSweep,
    /// DGD and PSP estimation over a DGD grid.
    /// Columns: dgd_ps, draw, p1, p2, p3, dgd_hat_ps, psp_error_deg, low_confidence.
    DgdSweep,
    /// Closed-loop timing trajectories per detector.
    /// Columns: detector, block, time_s, phase_ui, unwrapped_ui, error_ui, e_t,
    /// strength, locked, branch, injected_ui, dgd_ps.
    Track,
    /// Monte-Carlo BER per detector and receiver.
    /// Columns: kind, osnr_db, run, detector, receiver, bits, bit_errors, ber,
    /// ci_low, ci_high.
    Ber,
    /// Oracle-equivalence and invariance checks.
    /// Columns: check, max_error, tolerance, pass.
    Selftest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Scurve => Command::Scurve,
            Cmd::CdSweep => Command::CdSweep,
            Cmd::DgdSweep => Command::DgdSweep,
            Cmd::Track => Command::Track,
            Cmd::Ber => Command::Ber,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

fn load(cli: &Cli, cmd: Command) -> Result<ScenarioSpec, CliError> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            ScenarioSpec::from_json(&text)?
        }
        None if cmd == Command::Selftest => ScenarioSpec::from_json(r#"{"seed": 0}"#)?,
        None => {
            return Err(CliError::Config {
                path: "--config".into(),
                message: format!("{} needs a scenario spec", cmd.name()),
            })
        }
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cmd = Command::from(cli.command);
    let spec = load(cli, cmd)?;
    let table = match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Failed(e.to_string()))?
            .install(|| run::run(cmd, &spec))?,
        None => run::run(cmd, &spec)?,
    };
    let path = output::write(&cli.out, cmd.name(), &spec, &table)?;
    eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
    if cmd == Command::Selftest && table.bools("pass").iter().any(|p| !p) {
        return Err(CliError::Failed("self-test failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
