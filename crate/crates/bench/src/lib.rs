//! Scenario files, channel generation, Monte-Carlo sweeps and benchmarks
//! for `densebf`. The `densebf` binary wraps these in a CLI.

pub mod channel;
pub mod csv;
pub mod experiment;
pub mod perf;
pub mod scenario;

pub use channel::{generate_channels, generate_channels_sized};
pub use experiment::{
    run_rate_vs_density, run_rate_vs_snr, run_trial, run_trial_with_beamformers, TrialRecord,
};
pub use perf::{bench_solver, bench_stuffing};
pub use scenario::Scenario;

use densebf::beamforming::{
    feasibility_solve, max_min_bisection, ChannelRealization, Feasibility, NetworkConfig,
};
use densebf::{FieldMode, SolverSettings};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl BenchError {
    /// Process exit code: 1 for configuration errors, 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Numerical(_) => 2,
        }
    }
}

impl From<densebf::Error> for BenchError {
    fn from(e: densebf::Error) -> Self {
        use densebf::Error as E;
        match e {
            E::Dimension { .. } | E::InvalidConfig(_) | E::InvalidTarget(_) | E::FieldMismatch => {
                BenchError::Config(e.to_string())
            }
            E::Numerical(_) | E::SolverInconclusive(_) | E::DegenerateChannel => {
                BenchError::Numerical(e.to_string())
            }
        }
    }
}

/// Runs the closed-form unit checks; returns one line per check and
/// whether all passed.
pub fn selftest() -> (Vec<String>, bool) {
    let mut lines = Vec::new();
    let mut all = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        all &= ok;
        lines.push(format!(
            "{} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        ));
    };

    let config = NetworkConfig::uniform(1, 1, 1, 4.0, 1.0, FieldMode::Real);
    let h = ChannelRealization::from_real(vec![vec![vec![2.0]]]);
    let settings = SolverSettings {
        eps: 1e-5,
        ..SolverSettings::default()
    };
    match feasibility_solve(1.0, &h, &config, &settings) {
        Ok(Feasibility::Feasible { beamformers, .. }) => {
            let norm = beamformers.total_power().sqrt();
            check(
                "unit-optimum",
                (norm - 0.5).abs() <= 1e-3,
                format!("|v| = {norm:.6}"),
            );
        }
        other => check("unit-optimum", false, format!("{other:?}")),
    }
    let infeasible = feasibility_solve(18f64.log2(), &h, &config, &SolverSettings::default());
    check(
        "unit-infeasible",
        matches!(infeasible, Ok(Feasibility::Infeasible)),
        format!("{infeasible:?}"),
    );
    match max_min_bisection(&h, &config, &SolverSettings::default(), 0.01) {
        Ok(out) => {
            let expect = 17f64.log2();
            let ok = out.gamma <= expect + 1e-9 && expect - out.gamma < 0.01;
            check(
                "unit-bisection",
                ok,
                format!("gamma = {:.6}, closed form {expect:.6}", out.gamma),
            );
        }
        Err(e) => check("unit-bisection", false, e.to_string()),
    }
    (lines, all)
}
