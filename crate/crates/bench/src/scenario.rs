//! Flat `key = value` scenario files.
//!
//! One assignment per line; `#` starts a comment; lists are comma
//! separated. Unknown keys are rejected so typos fail loudly. Every key has
//! a default, so an empty file is a valid scenario.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `half_width` | 500 | square region is [−w, w]² (m) |
//! | `aps`, `users` | 10, 5 | L and K |
//! | `antennas` | 2 | antennas per AP (scalar or per-AP list) |
//! | `power_dbm` | 30 | per-AP budget for `maxmin` and benchmarks |
//! | `noise_dbm` | −102 | receiver noise power |
//! | `pathloss_a`, `pathloss_b` | 128.1, 37.6 | L(d) = a + b·log10(d/1000) dB |
//! | `shadowing_db` | 8 | lognormal shadowing std |
//! | `antenna_gain_dbi` | 9 | |
//! | `min_distance` | 10 | distances are clamped below to this (m) |
//! | `field` | complex | `real` draws real Gaussian fading |
//! | `weights` | 1 | rate weights (scalar or per-user list) |
//! | `seed`, `trials` | 1, 20 | |
//! | `snr_db` | 0,5,10 | sweep points |
//! | `snr_ref_distance` | `2·half_width/√(π·aps)` | cell-edge distance SNR is referred to |
//! | `snr_db_density` | 10 | SNR used by the density sweep |
//! | `density_aps` | 2,4,6,8,10 | L per density point |
//! | `user_ratio` | 1 | K/L in the density sweep |
//! | `eps_rate` | 0.01 | bisection width (bits/s/Hz) |
//! | `solver_eps`, `max_iter`, `alpha` | 1e-3, 3000, 1.6 | solver settings |
//! | `linsolve` | direct | or `iterative` |
//! | `normalize` | true | Ruiz equilibration |
//! | `bench_aps`, `bench_users` | 20, 10 | stuffing benchmark size |
//! | `bench_repeats` | 30 | |
//! | `bench_sizes` | 2,5,10,20,40 | L per solver-benchmark size (K = L/2) |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use densebf::beamforming::NetworkConfig;
use densebf::{FieldMode, LinSolve, SolverSettings};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub half_width: f64,
    pub aps: usize,
    pub users: usize,
    pub antennas: Vec<usize>,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub pathloss_a: f64,
    pub pathloss_b: f64,
    pub shadowing_db: f64,
    pub antenna_gain_dbi: f64,
    pub min_distance: f64,
    pub field: FieldMode,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub snr_ref_distance: Option<f64>,
    pub snr_db_density: f64,
    pub density_aps: Vec<usize>,
    pub user_ratio: f64,
    pub eps_rate: f64,
    pub solver: SolverSettings,
    pub bench_aps: usize,
    pub bench_users: usize,
    pub bench_repeats: usize,
    pub bench_sizes: Vec<usize>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            half_width: 500.0,
            aps: 10,
            users: 5,
            antennas: vec![2],
            power_dbm: 30.0,
            noise_dbm: -102.0,
            pathloss_a: 128.1,
            pathloss_b: 37.6,
            shadowing_db: 8.0,
            antenna_gain_dbi: 9.0,
            min_distance: 10.0,
            field: FieldMode::Complex,
            weights: vec![1.0],
            seed: 1,
            trials: 20,
            snr_db: vec![0.0, 5.0, 10.0],
            snr_ref_distance: None,
            snr_db_density: 10.0,
            density_aps: vec![2, 4, 6, 8, 10],
            user_ratio: 1.0,
            eps_rate: 0.01,
            solver: SolverSettings {
                verify_iterates: false,
                normalize: true,
                alpha: 1.6,
                max_iter: 3000,
                ..SolverSettings::default()
            },
            bench_aps: 20,
            bench_users: 10,
            bench_repeats: 30,
            bench_sizes: vec![2, 5, 10, 20, 40],
        }
    }
}

fn config_err(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

fn parse_scalar<T: FromStr>(key: &str, raw: &str) -> Result<T, BenchError> {
    raw.trim()
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse {raw:?}")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, BenchError> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_scalar(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(config_err(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, BenchError> {
    match raw.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(config_err(format!(
            "{key}: expected a boolean, got {other:?}"
        ))),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    fn set(&mut self, key: &str, raw: &str) -> Result<(), BenchError> {
        match key {
            "half_width" => self.half_width = parse_scalar(key, raw)?,
            "aps" => self.aps = parse_scalar(key, raw)?,
            "users" => self.users = parse_scalar(key, raw)?,
            "antennas" => self.antennas = parse_list(key, raw)?,
            "power_dbm" => self.power_dbm = parse_scalar(key, raw)?,
            "noise_dbm" => self.noise_dbm = parse_scalar(key, raw)?,
            "pathloss_a" => self.pathloss_a = parse_scalar(key, raw)?,
            "pathloss_b" => self.pathloss_b = parse_scalar(key, raw)?,
            "shadowing_db" => self.shadowing_db = parse_scalar(key, raw)?,
            "antenna_gain_dbi" => self.antenna_gain_dbi = parse_scalar(key, raw)?,
            "min_distance" => self.min_distance = parse_scalar(key, raw)?,
            "field" => {
                self.field = match raw.trim() {
                    "real" => FieldMode::Real,
                    "complex" => FieldMode::Complex,
                    other => {
                        return Err(config_err(format!(
                            "field: expected real or complex, got {other:?}"
                        )))
                    }
                }
            }
            "weights" => self.weights = parse_list(key, raw)?,
            "seed" => self.seed = parse_scalar(key, raw)?,
            "trials" => self.trials = parse_scalar(key, raw)?,
            "snr_db" => self.snr_db = parse_list(key, raw)?,
            "snr_ref_distance" => self.snr_ref_distance = Some(parse_scalar(key, raw)?),
            "snr_db_density" => self.snr_db_density = parse_scalar(key, raw)?,
            "density_aps" => self.density_aps = parse_list(key, raw)?,
            "user_ratio" => self.user_ratio = parse_scalar(key, raw)?,
            "eps_rate" => self.eps_rate = parse_scalar(key, raw)?,
            "solver_eps" => self.solver.eps = parse_scalar(key, raw)?,
            "max_iter" => self.solver.max_iter = parse_scalar(key, raw)?,
            "alpha" => self.solver.alpha = parse_scalar(key, raw)?,
            "linsolve" => {
                self.solver.linsolve = match raw.trim() {
                    "direct" => LinSolve::Direct,
                    "iterative" => LinSolve::Iterative,
                    other => {
                        return Err(config_err(format!(
                            "linsolve: expected direct or iterative, got {other:?}"
                        )))
                    }
                }
            }
            "normalize" => self.solver.normalize = parse_bool(key, raw)?,
            "bench_aps" => self.bench_aps = parse_scalar(key, raw)?,
            "bench_users" => self.bench_users = parse_scalar(key, raw)?,
            "bench_repeats" => self.bench_repeats = parse_scalar(key, raw)?,
            "bench_sizes" => self.bench_sizes = parse_list(key, raw)?,
            _ => return Err(config_err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let positive = [
            ("half_width", self.half_width),
            ("min_distance", self.min_distance),
            ("user_ratio", self.user_ratio),
            ("eps_rate", self.eps_rate),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!(
                    "{key} must be positive and finite, got {v}"
                )));
            }
        }
        if let Some(d) = self.snr_ref_distance {
            if !(d > 0.0 && d.is_finite()) {
                return Err(config_err(format!(
                    "snr_ref_distance must be positive, got {d}"
                )));
            }
        }
        let finite = [
            ("power_dbm", self.power_dbm),
            ("noise_dbm", self.noise_dbm),
            ("pathloss_a", self.pathloss_a),
            ("pathloss_b", self.pathloss_b),
            ("antenna_gain_dbi", self.antenna_gain_dbi),
            ("snr_db_density", self.snr_db_density),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(config_err(format!("{key} must be finite")));
            }
        }
        if self.shadowing_db.is_nan() || self.shadowing_db < 0.0 {
            return Err(config_err("shadowing_db must be nonnegative"));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(config_err("snr_db entries must be finite"));
        }
        if self.density_aps.contains(&0) || self.bench_sizes.contains(&0) {
            return Err(config_err("AP counts in sweeps must be positive"));
        }
        if self.bench_repeats == 0 {
            return Err(config_err("bench_repeats must be positive"));
        }
        self.solver.validate().map_err(BenchError::from)?;
        self.network(self.aps, self.users, self.power_dbm)?;
        Ok(())
    }

    /// Per-AP antenna counts for `l` APs; a single value is broadcast.
    pub fn antennas_for(&self, l: usize) -> Result<Vec<usize>, BenchError> {
        match self.antennas.len() {
            1 => Ok(vec![self.antennas[0]; l]),
            n if n == l => Ok(self.antennas.clone()),
            n => Err(config_err(format!("antennas lists {n} values for {l} APs"))),
        }
    }

    pub fn weights_for(&self, k: usize) -> Result<Vec<f64>, BenchError> {
        match self.weights.len() {
            1 => Ok(vec![self.weights[0]; k]),
            n if n == k => Ok(self.weights.clone()),
            n => Err(config_err(format!(
                "weights lists {n} values for {k} users"
            ))),
        }
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Path loss in dB at distance `d` meters (no clamping).
    pub fn path_loss_db(&self, d: f64) -> f64 {
        self.pathloss_a + self.pathloss_b * (d / 1000.0).log10()
    }

    /// Defaults to the radius of a disc covering 1/`aps` of the region.
    pub fn snr_reference(&self) -> f64 {
        self.snr_ref_distance
            .unwrap_or(2.0 * self.half_width / (std::f64::consts::PI * self.aps as f64).sqrt())
    }

    /// Per-AP budget P for SNR `snr_db`, where SNR is P/σ² received at the
    /// reference distance through path loss and antenna gain (no shadowing
    /// or fading).
    pub fn power_for_snr(&self, snr_db: f64) -> f64 {
        let db = snr_db + self.noise_dbm - 30.0 + self.path_loss_db(self.snr_reference())
            - self.antenna_gain_dbi;
        10f64.powf(db / 10.0)
    }

    /// Network with uniform budget `power_w` watts.
    pub fn network_watts(
        &self,
        l: usize,
        k: usize,
        power_w: f64,
    ) -> Result<NetworkConfig, BenchError> {
        let config = NetworkConfig {
            l,
            k,
            antennas: self.antennas_for(l)?,
            powers: vec![power_w; l],
            noise_powers: vec![self.noise_watts(); k],
            weights: self.weights_for(k)?,
            field: self.field,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn network(&self, l: usize, k: usize, power_dbm: f64) -> Result<NetworkConfig, BenchError> {
        self.network_watts(l, k, dbm_to_watts(power_dbm))
    }

    /// Users paired with `l` APs in the density sweep.
    pub fn density_users(&self, l: usize) -> usize {
        ((l as f64 * self.user_ratio).round() as usize).max(1)
    }

    /// Region area in km².
    pub fn area_km2(&self) -> f64 {
        let side = 2.0 * self.half_width / 1000.0;
        side * side
    }

    /// Canonical `key = value` rendering; parses back to an equal scenario.
    pub fn render(&self) -> String {
        fn list<T: ToString>(xs: &[T]) -> String {
            xs.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        }
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("half_width", self.half_width.to_string());
        put("aps", self.aps.to_string());
        put("users", self.users.to_string());
        put("antennas", list(&self.antennas));
        put("power_dbm", self.power_dbm.to_string());
        put("noise_dbm", self.noise_dbm.to_string());
        put("pathloss_a", self.pathloss_a.to_string());
        put("pathloss_b", self.pathloss_b.to_string());
        put("shadowing_db", self.shadowing_db.to_string());
        put("antenna_gain_dbi", self.antenna_gain_dbi.to_string());
        put("min_distance", self.min_distance.to_string());
        put("field", self.field.as_str().to_string());
        put("weights", list(&self.weights));
        put("seed", self.seed.to_string());
        put("trials", self.trials.to_string());
        put("snr_db", list(&self.snr_db));
        put("snr_ref_distance", self.snr_reference().to_string());
        put("snr_db_density", self.snr_db_density.to_string());
        put("density_aps", list(&self.density_aps));
        put("user_ratio", self.user_ratio.to_string());
        put("eps_rate", self.eps_rate.to_string());
        put("solver_eps", self.solver.eps.to_string());
        put("max_iter", self.solver.max_iter.to_string());
        put("alpha", self.solver.alpha.to_string());
        let ls = match self.solver.linsolve {
            LinSolve::Direct => "direct",
            LinSolve::Iterative => "iterative",
        };
        put("linsolve", ls.to_string());
        put("normalize", self.solver.normalize.to_string());
        put("bench_aps", self.bench_aps.to_string());
        put("bench_users", self.bench_users.to_string());
        put("bench_repeats", self.bench_repeats.to_string());
        put("bench_sizes", list(&self.bench_sizes));
        out
    }
}

impl FromStr for Scenario {
    type Err = BenchError;

    fn from_str(text: &str) -> Result<Self, BenchError> {
        let mut sc = Scenario::default();
        let mut seen = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), lineno + 1) {
                return Err(config_err(format!(
                    "line {}: {key} already set on line {prev}",
                    lineno + 1
                )));
            }
            sc.set(key, value)
                .map_err(|e| config_err(format!("line {}: {e}", lineno + 1)))?;
        }
        sc.validate()?;
        Ok(sc)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
