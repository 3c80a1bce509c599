use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{min_weighted_rate, BeamformerSet, ChannelRealization, NetworkConfig};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ZfOutcome {
    Applied {
        min_rate: f64,
        beamformers: BeamformerSet,
    },
    /// Fewer transmit antennas than users.
    NotApplicable,
}

impl ZfOutcome {
    pub fn min_rate(&self) -> Option<f64> {
        match self {
            ZfOutcome::Applied { min_rate, .. } => Some(*min_rate),
            ZfOutcome::NotApplicable => None,
        }
    }
}

/// Zero-forcing baseline: unit-norm columns of the pseudo-inverse of the
/// stacked channel matrix, all scaled by the largest common amplitude that
/// meets every per-AP budget.
pub fn zf_baseline(h: &ChannelRealization, config: &NetworkConfig) -> Result<ZfOutcome> {
    config.validate()?;
    h.check(config)?;
    let (k, n) = (config.k, config.total_antennas());
    if n < k {
        return Ok(ZfOutcome::NotApplicable);
    }
    // Row k is h_kᴴ, so H W = I means h_kᴴ w_i = δ_ki.
    let hmat = DMatrix::from_fn(k, n, |r, c| h.stacked(r)[c].conj());
    let svd = hmat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= RANK_TOL * smax {
        return Err(Error::DegenerateChannel);
    }
    let w = svd
        .pseudo_inverse(RANK_TOL * smax)
        .map_err(|e| Error::Numerical(format!("pseudo-inverse: {e}")))?;
    let dirs: Vec<Vec<Complex64>> = (0..k)
        .map(|i| {
            let col = w.column(i);
            let nrm = col.norm();
            col.iter().map(|z| z / nrm).collect()
        })
        .collect();
    let unit = BeamformerSet::new(config.antennas.clone(), dirs);
    let amplitude = (0..config.l)
        .map(|l| (config.powers[l] / unit.ap_power(l)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let v: Vec<Vec<Complex64>> = (0..k)
        .map(|i| unit.stacked(i).iter().map(|z| z * amplitude).collect())
        .collect();
    let beamformers = BeamformerSet::new(config.antennas.clone(), v);
    Ok(ZfOutcome::Applied {
        min_rate: min_weighted_rate(&beamformers, h, config),
        beamformers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::sinr;
    use crate::problem::FieldMode;

    #[test]
    fn single_user_matched_filter() {
        let cfg = NetworkConfig::uniform(2, 1, 2, 1.0, 0.5, FieldMode::Complex);
        let h = ChannelRealization::new(vec![vec![
            vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)],
            vec![Complex64::new(0.1, -0.7), Complex64::new(0.4, 0.4)],
        ]]);
        let ZfOutcome::Applied {
            min_rate,
            beamformers,
        } = zf_baseline(&h, &cfg).unwrap()
        else {
            panic!("applicable")
        };
        let hk = h.stacked(0);
        let hn: f64 = hk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v = beamformers.stacked(0);
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (a, b) in v.iter().zip(&hk) {
            assert!((a / vn - b / hn).norm() < 1e-12);
        }
        // common amplitude set by the tighter AP
        let t2 = (0..2)
            .map(|l| {
                let e: f64 = h.block(0, l).iter().map(|z| z.norm_sqr()).sum();
                hn * hn / e
            })
            .fold(f64::INFINITY, f64::min);
        let expect = (1.0 + t2 * hn * hn / 0.5).log2();
        assert!((min_rate - expect).abs() < 1e-10);
    }

    #[test]
    fn orthogonal_users_no_interference() {
        let cfg = NetworkConfig::uniform(1, 2, 2, 2.0, 1.0, FieldMode::Real);
        let h = ChannelRealization::from_real(vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 2.0]]]);
        let ZfOutcome::Applied { beamformers, .. } = zf_baseline(&h, &cfg).unwrap() else {
            panic!()
        };
        assert!(beamformers.stacked(0)[1].norm() < 1e-12);
        assert!(beamformers.stacked(1)[0].norm() < 1e-12);
        assert!((sinr(&beamformers, &h, 0, &cfg) - 1.0).abs() < 1e-12);
        assert!((sinr(&beamformers, &h, 1, &cfg) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn not_applicable_and_degenerate() {
        let cfg = NetworkConfig::uniform(1, 2, 1, 1.0, 1.0, FieldMode::Real);
        let h = ChannelRealization::from_real(vec![vec![vec![1.0]], vec![vec![2.0]]]);
        assert_eq!(zf_baseline(&h, &cfg).unwrap(), ZfOutcome::NotApplicable);
        let cfg = NetworkConfig::uniform(1, 2, 2, 1.0, 1.0, FieldMode::Real);
        let h = ChannelRealization::from_real(vec![vec![vec![1.0, 1.0]], vec![vec![2.0, 2.0]]]);
        assert_eq!(zf_baseline(&h, &cfg), Err(Error::DegenerateChannel));
    }
}
