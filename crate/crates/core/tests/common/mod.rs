#![allow(dead_code)]

use densebf::beamforming::{ChannelRealization, NetworkConfig};
use densebf::{compute_dims, FieldMode, ProblemDims};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// L = K = N = 1 real, h = 2, σ = 1, P = 4.
pub fn unit_instance() -> (NetworkConfig, ChannelRealization) {
    (
        NetworkConfig::uniform(1, 1, 1, 4.0, 1.0, FieldMode::Real),
        ChannelRealization::from_real(vec![vec![vec![2.0]]]),
    )
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random network with unit noise and channels h_kl ~ CN(0, I) (or N(0, I)).
pub fn random_network(
    rng: &mut ChaCha8Rng,
    l: usize,
    k: usize,
    max_antennas: usize,
    field: FieldMode,
) -> (NetworkConfig, ChannelRealization) {
    let antennas: Vec<usize> = (0..l).map(|_| rng.random_range(1..=max_antennas)).collect();
    let powers: Vec<f64> = (0..l).map(|_| rng.random_range(0.5..4.0)).collect();
    let config = NetworkConfig {
        l,
        k,
        antennas: antennas.clone(),
        powers,
        noise_powers: vec![1.0; k],
        weights: vec![1.0; k],
        field,
    };
    let h = (0..k)
        .map(|_| {
            antennas
                .iter()
                .map(|&n| {
                    (0..n)
                        .map(|_| match field {
                            FieldMode::Complex => complex_gaussian(rng),
                            FieldMode::Real => Complex64::new(gaussian(rng), 0.0),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    (config, ChannelRealization::new(h))
}

pub fn dims_of(config: &NetworkConfig) -> ProblemDims {
    compute_dims(config.l, config.k, &config.antennas, config.field).unwrap()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
