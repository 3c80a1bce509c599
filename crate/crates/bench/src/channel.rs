use densebf::beamforming::ChannelRealization;
use densebf::FieldMode;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::scenario::Scenario;

/// Independent stream for (`seed`, `point`, `trial`). Trials share
/// realizations across sweep points that use the same `point` key.
pub fn trial_rng(seed: u64, point: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(point) << 32) | u64::from(trial));
    rng
}

/// Large-scale amplitude 10^{−L(d)/20}·√(φ·s) for one link.
pub fn large_scale_amplitude(sc: &Scenario, distance: f64, shadow_db: f64) -> f64 {
    let db = -sc.path_loss_db(distance.max(sc.min_distance)) + sc.antenna_gain_dbi + shadow_db;
    10f64.powf(db / 20.0)
}

/// Unit-variance fading entry: CN(0, 1) in complex mode, N(0, 1) in real mode.
pub fn fading<R: Rng + ?Sized>(rng: &mut R, field: FieldMode) -> Complex64 {
    match field {
        FieldMode::Complex => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
        FieldMode::Real => Complex64::new(rng.sample(StandardNormal), 0.0),
    }
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> (f64, f64) {
    (
        rng.random_range(-half_width..=half_width),
        rng.random_range(-half_width..=half_width),
    )
}

/// Drops `l` APs and `k` users uniformly in the square and draws h_kl.
/// Deterministic in (`seed`, `point`, `trial`).
pub fn generate_channels_sized(
    sc: &Scenario,
    l: usize,
    k: usize,
    point: u32,
    trial: u32,
) -> ChannelRealization {
    let antennas = sc.antennas_for(l).expect("scenario validated");
    let mut rng = trial_rng(sc.seed, point, trial);
    let aps: Vec<(f64, f64)> = (0..l)
        .map(|_| uniform_point(&mut rng, sc.half_width))
        .collect();
    let users: Vec<(f64, f64)> = (0..k)
        .map(|_| uniform_point(&mut rng, sc.half_width))
        .collect();
    let shadow = Normal::new(0.0, sc.shadowing_db).expect("shadowing std validated");
    let h = users
        .iter()
        .map(|&(ux, uy)| {
            aps.iter()
                .zip(&antennas)
                .map(|(&(ax, ay), &n)| {
                    let d = (ux - ax).hypot(uy - ay);
                    let amp = large_scale_amplitude(sc, d, shadow.sample(&mut rng));
                    (0..n).map(|_| fading(&mut rng, sc.field) * amp).collect()
                })
                .collect()
        })
        .collect();
    ChannelRealization::new(h)
}

pub fn generate_channels(sc: &Scenario, trial: u32) -> ChannelRealization {
    generate_channels_sized(sc, sc.aps, sc.users, 0, trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitude_at_one_km_without_gain() {
        let sc = Scenario {
            antenna_gain_dbi: 0.0,
            ..Scenario::default()
        };
        let amp = large_scale_amplitude(&sc, 1000.0, 0.0);
        assert!((amp / 10f64.powf(-128.1 / 20.0) - 1.0).abs() < 1e-12);
        let gained = large_scale_amplitude(&Scenario::default(), 1000.0, 0.0);
        assert!((gained / amp - 10f64.powf(9.0 / 20.0)).abs() < 1e-12);
    }

    #[test]
    fn distance_is_clamped() {
        let sc = Scenario::default();
        assert_eq!(
            large_scale_amplitude(&sc, 0.0, 0.0),
            large_scale_amplitude(&sc, sc.min_distance, 0.0)
        );
    }

    #[test]
    fn deterministic_per_trial() {
        let sc = Scenario::default();
        assert_eq!(generate_channels(&sc, 3), generate_channels(&sc, 3));
        assert_ne!(generate_channels(&sc, 3), generate_channels(&sc, 4));
        let other = Scenario {
            seed: 2,
            ..Scenario::default()
        };
        assert_ne!(generate_channels(&sc, 3), generate_channels(&other, 3));
    }

    #[test]
    fn shapes_follow_scenario() {
        let sc: Scenario = "aps = 3\nusers = 2\nantennas = 1,2,3\n".parse().unwrap();
        let h = generate_channels(&sc, 0);
        assert_eq!(h.users(), 2);
        for k in 0..2 {
            assert_eq!(h.stacked(k).len(), 6);
            assert_eq!(h.block(k, 2).len(), 3);
        }
        let real = Scenario {
            field: FieldMode::Real,
            ..sc
        };
        assert!(generate_channels(&real, 0).is_real());
    }

    #[test]
    fn fading_has_unit_variance() {
        let mut rng = trial_rng(7, 0, 0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| fading(&mut rng, FieldMode::Complex).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
