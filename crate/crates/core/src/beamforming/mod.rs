//! Wireless-side model: network configuration, channels, beamformers and
//! the rate metrics of max-min fair coordinated beamforming.

mod bisection;
mod feasibility;
mod zf;

pub use bisection::{max_min_bisection, BisectionOutcome};
pub use feasibility::{feasibility_solve, BeamformingSolver, Feasibility, SolveStats};
pub use zf::{zf_baseline, ZfOutcome};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::problem::FieldMode;
use crate::template::qos_threshold;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub l: usize,
    pub k: usize,
    pub antennas: Vec<usize>,
    /// Per-AP power budgets in watts.
    pub powers: Vec<f64>,
    /// Per-user noise powers σ_k² in watts.
    pub noise_powers: Vec<f64>,
    pub weights: Vec<f64>,
    pub field: FieldMode,
}

impl NetworkConfig {
    /// Identical budgets, noise and unit weights everywhere.
    pub fn uniform(
        l: usize,
        k: usize,
        antennas_per_ap: usize,
        power: f64,
        noise_power: f64,
        field: FieldMode,
    ) -> Self {
        Self {
            l,
            k,
            antennas: vec![antennas_per_ap; l],
            powers: vec![power; l],
            noise_powers: vec![noise_power; k],
            weights: vec![1.0; k],
            field,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.l == 0 || self.k == 0 {
            return bad("need at least one access point and one user");
        }
        if self.antennas.len() != self.l || self.powers.len() != self.l {
            return bad("antenna and power lists must have one entry per access point");
        }
        if self.noise_powers.len() != self.k || self.weights.len() != self.k {
            return bad("noise and weight lists must have one entry per user");
        }
        if self.antennas.contains(&0) {
            return bad("every access point needs at least one antenna");
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !positive(&self.powers) || !positive(&self.noise_powers) || !positive(&self.weights) {
            return bad("powers, noise powers and weights must be positive and finite");
        }
        Ok(())
    }

    pub fn total_antennas(&self) -> usize {
        self.antennas.iter().sum()
    }

    pub fn noise_std(&self, user: usize) -> f64 {
        self.noise_powers[user].sqrt()
    }
}

/// h_kl for every user k and access point l.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    h: Vec<Vec<Vec<Complex64>>>,
}

impl ChannelRealization {
    /// `h[k][l]` is the channel from AP l to user k.
    pub fn new(h: Vec<Vec<Vec<Complex64>>>) -> Self {
        Self { h }
    }

    /// Real-valued channels.
    pub fn from_real(h: Vec<Vec<Vec<f64>>>) -> Self {
        Self::new(
            h.into_iter()
                .map(|per_user| {
                    per_user
                        .into_iter()
                        .map(|blk| blk.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                        .collect()
                })
                .collect(),
        )
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn block(&self, user: usize, ap: usize) -> &[Complex64] {
        &self.h[user][ap]
    }

    /// h_k = [h_k1; …; h_kL].
    pub fn stacked(&self, user: usize) -> Vec<Complex64> {
        self.h[user].iter().flatten().copied().collect()
    }

    pub fn is_real(&self) -> bool {
        self.h.iter().flatten().flatten().all(|z| z.im == 0.0)
    }

    /// Checks the shape against `config`.
    pub fn check(&self, config: &NetworkConfig) -> Result<()> {
        if self.h.len() != config.k {
            return Err(Error::Dimension {
                expected: config.k,
                got: self.h.len(),
            });
        }
        for per_user in &self.h {
            if per_user.len() != config.l {
                return Err(Error::Dimension {
                    expected: config.l,
                    got: per_user.len(),
                });
            }
            for (blk, &nl) in per_user.iter().zip(&config.antennas) {
                if blk.len() != nl {
                    return Err(Error::Dimension {
                        expected: nl,
                        got: blk.len(),
                    });
                }
                if blk.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "channel entries must be finite".into(),
                    ));
                }
            }
        }
        if config.field == FieldMode::Real && !self.is_real() {
            return Err(Error::FieldMismatch);
        }
        Ok(())
    }
}

/// Stacked beamformers v_k (length N) for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    antennas: Vec<usize>,
    v: Vec<Vec<Complex64>>,
}

impl BeamformerSet {
    pub fn new(antennas: Vec<usize>, v: Vec<Vec<Complex64>>) -> Self {
        Self { antennas, v }
    }

    pub fn zeros(config: &NetworkConfig) -> Self {
        let n = config.total_antennas();
        Self {
            antennas: config.antennas.clone(),
            v: vec![vec![Complex64::new(0.0, 0.0); n]; config.k],
        }
    }

    pub fn users(&self) -> usize {
        self.v.len()
    }

    pub fn stacked(&self, user: usize) -> &[Complex64] {
        &self.v[user]
    }

    /// v_lk
    pub fn block(&self, ap: usize, user: usize) -> &[Complex64] {
        let start: usize = self.antennas[..ap].iter().sum();
        &self.v[user][start..start + self.antennas[ap]]
    }

    /// Σ_k ‖v_lk‖²
    pub fn ap_power(&self, ap: usize) -> f64 {
        (0..self.users())
            .map(|k| self.block(ap, k).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// ‖v‖²
    pub fn total_power(&self) -> f64 {
        self.v.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// Total transmit power in dBm.
    pub fn power_dbm(&self) -> f64 {
        watts_to_dbm(self.total_power())
    }

    pub fn is_finite(&self) -> bool {
        self.v
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p * 1000.0).log10()
}

/// Per-user SINR thresholds for a common rate target.
#[derive(Debug, Clone, PartialEq)]
pub struct QosTarget {
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
}

impl QosTarget {
    pub fn new(gamma: f64, weights: &[f64]) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidTarget(gamma));
        }
        let (theta, beta) = weights.iter().map(|&w| qos_threshold(gamma, w)).unzip();
        Ok(Self { gamma, theta, beta })
    }
}

fn inner(h: &[Complex64], v: &[Complex64]) -> Complex64 {
    h.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// |h_kᴴv_k|² / (Σ_{i≠k} |h_kᴴv_i|² + σ_k²)
pub fn sinr(v: &BeamformerSet, h: &ChannelRealization, user: usize, config: &NetworkConfig) -> f64 {
    let hk = h.stacked(user);
    let signal = inner(&hk, v.stacked(user)).norm_sqr();
    let interference: f64 = (0..v.users())
        .filter(|&i| i != user)
        .map(|i| inner(&hk, v.stacked(i)).norm_sqr())
        .sum();
    signal / (interference + config.noise_powers[user])
}

/// min_k ω_k log₂(1 + SINR_k)
pub fn min_weighted_rate(v: &BeamformerSet, h: &ChannelRealization, config: &NetworkConfig) -> f64 {
    (0..config.k)
        .map(|k| config.weights[k] * (1.0 + sinr(v, h, k, config)).log2())
        .fold(f64::INFINITY, f64::min)
}

/// Interference-free full-power bound
/// min_k ω_k log₂(1 + (Σ_l √P_l ‖h_kl‖)² / σ_k²) on the max-min rate.
pub fn gamma_max_default(h: &ChannelRealization, config: &NetworkConfig) -> f64 {
    (0..config.k)
        .map(|k| {
            let amp: f64 = (0..config.l)
                .map(|l| {
                    config.powers[l].sqrt()
                        * h.block(k, l)
                            .iter()
                            .map(|z| z.norm_sqr())
                            .sum::<f64>()
                            .sqrt()
                })
                .sum();
            config.weights[k] * (1.0 + amp * amp / config.noise_powers[k]).log2()
        })
        .fold(f64::INFINITY, f64::min)
}
