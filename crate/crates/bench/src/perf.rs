//! Stuffing and solver timing.

use std::fmt::Write as _;
use std::time::Instant;

use densebf::beamforming::{zf_baseline, ChannelRealization, NetworkConfig, ZfOutcome};
use densebf::{build_from_scratch, build_template, compute_dims, stuff, HsdSolver, StuffParams};
use num_complex::Complex64;

use crate::channel::generate_channels_sized;
use crate::csv::{fmt9, metadata_header};
use crate::scenario::Scenario;
use crate::BenchError;

/// Sweep point keys reserved for the benchmarks' channel streams.
const STUFF_POINT: u32 = 1 << 20;
const SOLVE_POINT: u32 = (1 << 20) + 1;

pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Channels divided by the noise std, paired with unit noise.
fn normalized_channels(h: &ChannelRealization, config: &NetworkConfig) -> Vec<Vec<Complex64>> {
    (0..config.k)
        .map(|k| {
            let s = config.noise_std(k);
            h.stacked(k).into_iter().map(|z| z / s).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StuffReport {
    pub aps: usize,
    pub users: usize,
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub repeats: usize,
    pub median_stuff_secs: f64,
    pub median_rebuild_secs: f64,
    pub speedup: f64,
}

/// Times in-place stuffing against rebuilding the cone program for
/// `bench_repeats` fresh realizations at `bench_aps` × `bench_users`.
/// Every realization is checked for exact equality before timing.
pub fn bench_stuffing(sc: &Scenario) -> Result<StuffReport, BenchError> {
    let config = sc.network(sc.bench_aps, sc.bench_users, sc.power_dbm)?;
    let dims = compute_dims(config.l, config.k, &config.antennas, config.field)?;
    let (template, mut problem) = build_template(&dims)?;
    let noise: Vec<f64> = (0..config.k).map(|k| config.noise_std(k)).collect();
    let channels: Vec<Vec<Vec<Complex64>>> = (0..sc.bench_repeats as u32)
        .map(|r| {
            let h = generate_channels_sized(sc, config.l, config.k, STUFF_POINT, r);
            (0..config.k).map(|k| h.stacked(k)).collect()
        })
        .collect();
    let params = |r: usize| StuffParams {
        channels: &channels[r],
        powers: &config.powers,
        noise_std: &noise,
        weights: &config.weights,
        gamma: 1.0 + 0.1 * r as f64,
    };

    for r in 0..sc.bench_repeats {
        stuff(&template, &mut problem, &params(r))?;
        let rebuilt = build_from_scratch(&dims, &params(r))?;
        if !problem.same_data(&rebuilt) {
            return Err(BenchError::Numerical(format!(
                "stuffed problem differs from rebuild at repeat {r}"
            )));
        }
    }

    let mut stuff_times = Vec::with_capacity(sc.bench_repeats);
    let mut rebuild_times = Vec::with_capacity(sc.bench_repeats);
    for r in 0..sc.bench_repeats {
        let t = Instant::now();
        stuff(&template, &mut problem, &params(r))?;
        stuff_times.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        let rebuilt = build_from_scratch(&dims, &params(r))?;
        rebuild_times.push(t.elapsed().as_secs_f64());
        std::hint::black_box(rebuilt);
    }
    let median_stuff_secs = median(&mut stuff_times);
    let median_rebuild_secs = median(&mut rebuild_times);
    Ok(StuffReport {
        aps: config.l,
        users: config.k,
        n: dims.n,
        m: dims.m,
        nnz: problem.a().nnz(),
        repeats: sc.bench_repeats,
        median_stuff_secs,
        median_rebuild_secs,
        speedup: median_rebuild_secs / median_stuff_secs.max(f64::MIN_POSITIVE),
    })
}

impl StuffReport {
    pub fn render(&self, sc: &Scenario) -> String {
        let mut out = metadata_header("bench-stuff", sc, true);
        out.push_str("aps,users,n,m,nnz,repeats,median_stuff_s,median_rebuild_s,speedup\n");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            self.aps,
            self.users,
            self.n,
            self.m,
            self.nnz,
            self.repeats,
            fmt9(self.median_stuff_secs),
            fmt9(self.median_rebuild_secs),
            fmt9(self.speedup)
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRow {
    pub aps: usize,
    pub users: usize,
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub status: String,
    pub iterations: usize,
    pub median_solve_secs: f64,
    pub per_iter_secs: f64,
    /// Largest of the three relative residuals at termination.
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub rows: Vec<SolverRow>,
    /// Least-squares slope of log(per-iteration time) against log(m).
    pub slope: f64,
}

/// Solves one feasibility problem per size (L from `bench_sizes`,
/// K = max(1, L/2)) at half the zero-forcing rate, which is strictly
/// feasible. Budgets follow `snr_db_density`. Each size is solved `bench_repeats.min(5)` times from a
/// cold solver and the median time reported.
pub fn bench_solver(sc: &Scenario) -> Result<SolverReport, BenchError> {
    let mut rows = Vec::new();
    for &l in &sc.bench_sizes {
        let k = (l / 2).max(1);
        let config = sc.network_watts(l, k, sc.power_for_snr(sc.snr_db_density))?;
        let h = generate_channels_sized(sc, l, k, SOLVE_POINT, l as u32);
        let gamma = match zf_baseline(&h, &config) {
            Ok(ZfOutcome::Applied { min_rate, .. }) if min_rate > 0.0 => 0.5 * min_rate,
            _ => 0.1,
        };
        let dims = compute_dims(l, k, &config.antennas, config.field)?;
        let (template, mut problem) = build_template(&dims)?;
        let channels = normalized_channels(&h, &config);
        let unit = vec![1.0; k];
        stuff(
            &template,
            &mut problem,
            &StuffParams {
                channels: &channels,
                powers: &config.powers,
                noise_std: &unit,
                weights: &config.weights,
                gamma,
            },
        )?;
        let mut times = Vec::new();
        let mut last = None;
        for _ in 0..sc.bench_repeats.min(5) {
            let mut solver = HsdSolver::new();
            let t = Instant::now();
            let result = solver.solve(&problem, &sc.solver)?;
            times.push(t.elapsed().as_secs_f64());
            last = Some(result);
        }
        let result = last.expect("bench_repeats validated positive");
        let median_solve_secs = median(&mut times);
        let r = result.residuals;
        rows.push(SolverRow {
            aps: l,
            users: k,
            n: dims.n,
            m: dims.m,
            nnz: problem.a().nnz(),
            status: format!("{:?}", result.status),
            iterations: result.iterations,
            median_solve_secs,
            per_iter_secs: median_solve_secs / result.iterations.max(1) as f64,
            max_residual: r.primal.max(r.dual).max(r.gap),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.m as f64).ln(), r.per_iter_secs.ln()))
        .collect();
    Ok(SolverReport {
        slope: loglog_slope(&pts),
        rows,
    })
}

/// Ordinary least-squares slope; NaN with fewer than two distinct x.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

impl SolverReport {
    pub fn render(&self, sc: &Scenario) -> String {
        let mut out = metadata_header("bench-solve", sc, true);
        let _ = writeln!(out, "# per_iteration_loglog_slope={}", fmt9(self.slope));
        out.push_str(
            "aps,users,n,m,nnz,status,iterations,median_solve_s,per_iter_s,max_residual\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.aps,
                r.users,
                r.n,
                r.m,
                r.nnz,
                r.status,
                r.iterations,
                fmt9(r.median_solve_secs),
                fmt9(r.per_iter_secs),
                fmt9(r.max_residual)
            );
        }
        out
    }
}
