//! Monte-Carlo sweeps over independent channel realizations.

use std::fmt::Write as _;

use densebf::beamforming::{
    min_weighted_rate, zf_baseline, BeamformerSet, BeamformingSolver, ChannelRealization,
    NetworkConfig, ZfOutcome,
};
use densebf::Error;
use rayon::prelude::*;

use crate::channel::generate_channels_sized;
use crate::csv::{fmt9, metadata_header};
use crate::scenario::Scenario;

/// Outcome of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u32,
    /// Max-min rate from bisection.
    pub opt_rate: f64,
    /// Min rate actually achieved by the returned beamformers.
    pub opt_achieved: f64,
    /// `None` when zero-forcing does not apply (N < K or rank deficient).
    pub zf_rate: Option<f64>,
    pub iterations: usize,
    pub steps: usize,
    pub stuff_secs: f64,
    pub solve_secs: f64,
    pub inconclusive: usize,
    pub bound_attained: bool,
    pub error: Option<String>,
}

impl TrialRecord {
    fn failed(trial: u32, error: String) -> Self {
        Self {
            trial,
            opt_rate: 0.0,
            opt_achieved: 0.0,
            zf_rate: None,
            iterations: 0,
            steps: 0,
            stuff_secs: 0.0,
            solve_secs: 0.0,
            inconclusive: 0,
            bound_attained: false,
            error: Some(error),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Zero-forcing first, then bisection with the ZF rate as a feasible floor.
pub fn run_trial(
    sc: &Scenario,
    config: &NetworkConfig,
    h: &ChannelRealization,
    trial: u32,
) -> TrialRecord {
    run_trial_with_beamformers(sc, config, h, trial).0
}

/// As [`run_trial`], also returning the validated beamformers that attain
/// the reported rate (absent when the trial failed).
pub fn run_trial_with_beamformers(
    sc: &Scenario,
    config: &NetworkConfig,
    h: &ChannelRealization,
    trial: u32,
) -> (TrialRecord, Option<BeamformerSet>) {
    let zf = match zf_baseline(h, config) {
        Ok(ZfOutcome::Applied {
            min_rate,
            beamformers,
        }) => Some((min_rate, beamformers)),
        Ok(ZfOutcome::NotApplicable) | Err(Error::DegenerateChannel) => None,
        Err(e) => return (TrialRecord::failed(trial, e.to_string()), None),
    };
    let mut solver = match BeamformingSolver::new(config.clone(), sc.solver.clone()) {
        Ok(s) => s,
        Err(e) => return (TrialRecord::failed(trial, e.to_string()), None),
    };
    let (floor, floor_v) = match &zf {
        Some((rate, v)) => (*rate, v.clone()),
        None => (0.0, BeamformerSet::zeros(config)),
    };
    match solver.bisection_above(h, sc.eps_rate, floor, floor_v) {
        Ok(out) => {
            let stats = solver.stats();
            let record = TrialRecord {
                trial,
                opt_rate: out.gamma,
                opt_achieved: min_weighted_rate(&out.beamformers, h, config),
                zf_rate: zf.map(|(r, _)| r),
                iterations: stats.iterations,
                steps: out.steps,
                stuff_secs: stats.stuff_time.as_secs_f64(),
                solve_secs: stats.solve_time.as_secs_f64(),
                inconclusive: out.inconclusive,
                bound_attained: out.bound_attained,
                error: None,
            };
            (record, Some(out.beamformers))
        }
        Err(e) => (TrialRecord::failed(trial, e.to_string()), None),
    }
}

fn run_point(sc: &Scenario, config: &NetworkConfig, point: u32) -> Vec<TrialRecord> {
    let mut records: Vec<TrialRecord> = (0..sc.trials as u32)
        .into_par_iter()
        .map(|t| {
            let h = generate_channels_sized(sc, config.l, config.k, point, t);
            run_trial(sc, config, &h, t)
        })
        .collect();
    records.sort_by_key(|r| r.trial);
    records
}

/// Sample mean and (n−1) standard deviation; (NaN, NaN) when empty.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn failure_lines(out: &mut String, label: &str, records: &[TrialRecord]) {
    let failed = records.iter().filter(|r| !r.ok()).count();
    let inconclusive: usize = records.iter().map(|r| r.inconclusive).sum();
    let _ = writeln!(
        out,
        "# {label}: failed_trials={failed} inconclusive_solves={inconclusive}"
    );
    for r in records.iter().filter(|r| !r.ok()) {
        let _ = writeln!(
            out,
            "# {label}: trial {} failed: {}",
            r.trial,
            r.error.as_deref().unwrap_or("")
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub snr_db: f64,
    pub mean_opt: f64,
    pub mean_zf: f64,
    pub std_opt: f64,
    pub std_zf: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct SnrSweep {
    pub rows: Vec<SnrRow>,
    pub records: Vec<Vec<TrialRecord>>,
}

/// Mean optimal and ZF min-rates per SNR point. Every point reuses the
/// same realizations; only the budgets change.
pub fn run_rate_vs_snr(sc: &Scenario) -> Result<SnrSweep, crate::BenchError> {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &snr in &sc.snr_db {
        let config = sc.network_watts(sc.aps, sc.users, sc.power_for_snr(snr))?;
        let recs = run_point(sc, &config, 0);
        if sc.trials > 0 {
            let opt: Vec<f64> = recs.iter().filter(|r| r.ok()).map(|r| r.opt_rate).collect();
            let zf: Vec<f64> = recs.iter().filter_map(|r| r.zf_rate).collect();
            let (mean_opt, std_opt) = mean_std(&opt);
            let (mean_zf, std_zf) = mean_std(&zf);
            rows.push(SnrRow {
                snr_db: snr,
                mean_opt,
                mean_zf,
                std_opt,
                std_zf,
                trials: opt.len(),
            });
        }
        records.push(recs);
    }
    Ok(SnrSweep { rows, records })
}

impl SnrSweep {
    pub fn to_csv(&self, sc: &Scenario, deterministic: bool) -> String {
        let mut out = metadata_header("sweep-snr", sc, deterministic);
        for (snr, recs) in sc.snr_db.iter().zip(&self.records) {
            failure_lines(&mut out, &format!("snr_db={}", fmt9(*snr)), recs);
        }
        out.push_str("snr_db,mean_opt_rate,mean_zf_rate,std_opt,std_zf,trials\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt9(r.snr_db),
                fmt9(r.mean_opt),
                fmt9(r.mean_zf),
                fmt9(r.std_opt),
                fmt9(r.std_zf),
                r.trials
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    /// Users per km².
    pub density: f64,
    pub aps: usize,
    pub users: usize,
    pub mean_opt: f64,
    pub mean_zf: f64,
    /// Mean of per-trial (optimal − ZF) over trials where ZF applies.
    pub mean_gap: f64,
    pub stderr_gap: f64,
    pub trials: usize,
    pub zf_excluded: usize,
}

#[derive(Debug, Clone)]
pub struct DensitySweep {
    pub rows: Vec<DensityRow>,
    pub records: Vec<Vec<TrialRecord>>,
}

/// Grows L and K = ratio·L together in a fixed region at SNR
/// `snr_db_density`.
pub fn run_rate_vs_density(sc: &Scenario) -> Result<DensitySweep, crate::BenchError> {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (idx, &l) in sc.density_aps.iter().enumerate() {
        let k = sc.density_users(l);
        let config = sc.network_watts(l, k, sc.power_for_snr(sc.snr_db_density))?;
        let recs = run_point(sc, &config, idx as u32 + 1);
        if sc.trials > 0 {
            let ok: Vec<&TrialRecord> = recs.iter().filter(|r| r.ok()).collect();
            let paired: Vec<(f64, f64)> = ok
                .iter()
                .filter_map(|r| r.zf_rate.map(|z| (r.opt_rate, z)))
                .collect();
            let opt: Vec<f64> = paired.iter().map(|p| p.0).collect();
            let zf: Vec<f64> = paired.iter().map(|p| p.1).collect();
            let gap: Vec<f64> = paired.iter().map(|p| p.0 - p.1).collect();
            let (mean_gap, std_gap) = mean_std(&gap);
            rows.push(DensityRow {
                density: k as f64 / sc.area_km2(),
                aps: l,
                users: k,
                mean_opt: mean_std(&opt).0,
                mean_zf: mean_std(&zf).0,
                mean_gap,
                stderr_gap: std_gap / (gap.len() as f64).sqrt(),
                trials: paired.len(),
                zf_excluded: ok.len() - paired.len(),
            });
        }
        records.push(recs);
    }
    Ok(DensitySweep { rows, records })
}

impl DensitySweep {
    pub fn to_csv(&self, sc: &Scenario, deterministic: bool) -> String {
        let mut out = metadata_header("sweep-density", sc, deterministic);
        for (l, recs) in sc.density_aps.iter().zip(&self.records) {
            failure_lines(&mut out, &format!("aps={l}"), recs);
        }
        out.push_str("density_per_km2,aps,users,mean_opt_rate,mean_zf_rate,mean_gap,stderr_gap,trials,zf_excluded\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt9(r.density),
                r.aps,
                r.users,
                fmt9(r.mean_opt),
                fmt9(r.mean_zf),
                fmt9(r.mean_gap),
                fmt9(r.stderr_gap),
                r.trials,
                r.zf_excluded
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        "aps = 2\nusers = 2\nantennas = 2\ntrials = 3\nsnr_db = 0,10\ndensity_aps = 1,2\neps_rate = 0.05\n"
            .parse()
            .unwrap()
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn snr_sweep_shape_and_dominance() {
        let sc = small();
        let sweep = run_rate_vs_snr(&sc).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        for (row, recs) in sweep.rows.iter().zip(&sweep.records) {
            assert_eq!(row.trials, 3);
            assert!(row.mean_opt >= row.mean_zf);
            for r in recs {
                assert!(r.ok(), "{:?}", r.error);
                assert!(r.opt_rate >= r.zf_rate.unwrap());
            }
        }
        assert!(sweep.rows[1].mean_opt > sweep.rows[0].mean_opt);
        let csv = sweep.to_csv(&sc, true);
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            data[0],
            "snr_db,mean_opt_rate,mean_zf_rate,std_opt,std_zf,trials"
        );
        assert_eq!(data.len(), 3);
    }

    #[test]
    fn zero_trials_gives_header_only() {
        let sc = Scenario {
            trials: 0,
            ..small()
        };
        let csv = run_rate_vs_snr(&sc).unwrap().to_csv(&sc, true);
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            data,
            vec!["snr_db,mean_opt_rate,mean_zf_rate,std_opt,std_zf,trials"]
        );
    }

    #[test]
    fn density_excludes_zf_when_not_applicable() {
        // one single-antenna AP, two users: N < K
        let sc: Scenario =
            "antennas = 1\ntrials = 2\ndensity_aps = 1\nuser_ratio = 2\neps_rate = 0.05\n"
                .parse()
                .unwrap();
        let sweep = run_rate_vs_density(&sc).unwrap();
        assert_eq!(sweep.rows.len(), 1);
        assert_eq!(sweep.rows[0].zf_excluded, 2);
        assert_eq!(sweep.rows[0].trials, 0);
        assert!(sweep.records[0]
            .iter()
            .all(|r| r.ok() && r.zf_rate.is_none()));
    }
}
