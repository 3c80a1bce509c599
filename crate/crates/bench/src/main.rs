use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densebf::beamforming::{watts_to_dbm, zf_baseline, BeamformingSolver, Feasibility, ZfOutcome};
use densebf::SolverSettings;
use densebf_bench::{
    bench_solver, bench_stuffing, generate_channels, run_rate_vs_density, run_rate_vs_snr,
    run_trial_with_beamformers, selftest, BenchError, Scenario,
};

#[derive(Parser)]
#[command(
    name = "densebf",
    version,
    about = "Max-min coordinated beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file (key = value lines); defaults apply to absent keys.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the scenario trial count.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Overrides the solver tolerance.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Write CSV output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit the timestamp line so identical inputs give identical bytes.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads for trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Max-min rate and transmit power for one realization.
    Maxmin {
        /// Realization index.
        #[arg(long, default_value_t = 0)]
        trial: u32,
    },
    /// Mean optimal and zero-forcing rates against transmit SNR.
    SweepSnr,
    /// Mean rates and their gap against user density.
    SweepDensity,
    /// Stuffing versus rebuild timing.
    BenchStuff,
    /// Solver time and iterations across problem sizes.
    BenchSolve,
    /// Closed-form sanity checks.
    Selftest,
}

fn load(common: &Common) -> Result<Scenario, BenchError> {
    let mut sc = match &common.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    if let Some(trials) = common.trials {
        sc.trials = trials;
    }
    if let Some(eps) = common.eps {
        sc.solver.eps = eps;
    }
    sc.validate()?;
    Ok(sc)
}

fn emit(common: &Common, text: &str) -> Result<(), BenchError> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| BenchError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn maxmin(sc: &Scenario, trial: u32) -> Result<String, BenchError> {
    let config = sc.network(sc.aps, sc.users, sc.power_dbm)?;
    let h = generate_channels(sc, trial);
    let (record, found) = run_trial_with_beamformers(sc, &config, &h, trial);
    if let Some(e) = record.error {
        return Err(BenchError::Numerical(e));
    }
    // minimum power at the final target, else the power of the bisection's point
    let settings = SolverSettings {
        max_iter: sc.solver.max_iter.max(SolverSettings::default().max_iter),
        ..sc.solver.clone()
    };
    let mut solver = BeamformingSolver::new(config.clone(), settings)?;
    let power = match solver.feasibility(record.opt_rate.max(1e-9), &h) {
        Ok(Feasibility::Feasible { power, .. }) => Some((power, "minimum")),
        _ => found.map(|v| (v.total_power(), "attaining, not minimized")),
    };
    let zf = match zf_baseline(&h, &config) {
        Ok(ZfOutcome::Applied { min_rate, .. }) => format!("{min_rate:.6}"),
        Ok(ZfOutcome::NotApplicable) => "n/a".to_string(),
        Err(e) => format!("n/a ({e})"),
    };
    let mut out = String::new();
    out.push_str(&format!(
        "trial {trial}: L={} K={} N={}\n",
        config.l,
        config.k,
        config.total_antennas()
    ));
    out.push_str(&format!("max-min rate: {:.6} bits/s/Hz\n", record.opt_rate));
    match power {
        Some((p, kind)) => out.push_str(&format!(
            "transmit power: {:.4} dBm ({p:.6e} W, {kind})\n",
            watts_to_dbm(p)
        )),
        None => out.push_str("transmit power: n/a\n"),
    }
    out.push_str(&format!("zero-forcing rate: {zf}\n"));
    out.push_str(&format!(
        "bisection steps: {}, solver iterations: {}, inconclusive: {}\n",
        record.steps, record.iterations, record.inconclusive
    ));
    Ok(out)
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let common = &cli.common;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    }
    let sc = load(common)?;
    match cli.command {
        Command::Maxmin { trial } => emit(common, &maxmin(&sc, trial)?),
        Command::SweepSnr => emit(
            common,
            &run_rate_vs_snr(&sc)?.to_csv(&sc, common.deterministic),
        ),
        Command::SweepDensity => emit(
            common,
            &run_rate_vs_density(&sc)?.to_csv(&sc, common.deterministic),
        ),
        Command::BenchStuff => emit(common, &bench_stuffing(&sc)?.render(&sc)),
        Command::BenchSolve => emit(common, &bench_solver(&sc)?.render(&sc)),
        Command::Selftest => {
            let (lines, ok) = selftest();
            emit(common, &(lines.join("\n") + "\n"))?;
            if ok {
                Ok(())
            } else {
                Err(BenchError::Numerical("selftest failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("densebf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
