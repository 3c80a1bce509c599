use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{sinr, BeamformerSet, ChannelRealization, NetworkConfig, QosTarget};
use crate::embed::unembed_vector;
use crate::error::{Error, Result};
use crate::hsd::{HsdSolver, IterateState, SolverSettings, Status};
use crate::problem::{compute_dims, ConicProblem, FieldMode};
use crate::template::{build_template, stuff, StuffParams, StuffingTemplate};

/// Relative slack allowed when validating extracted beamformers.
const VALIDATION_TOL: f64 = 1e-3;
/// Continues with a tenfold tighter tolerance when validation fails.
const MAX_REFINEMENTS: usize = 2;
/// Iterations between feasibility probes in [`BeamformingSolver::decide`].
const PROBE_INTERVAL: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible {
        beamformers: BeamformerSet,
        /// ‖v‖² in watts.
        power: f64,
        /// ‖v‖² in dBm.
        objective_dbm: f64,
    },
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub solves: usize,
    pub iterations: usize,
    pub stuff_time: Duration,
    pub solve_time: Duration,
}

/// Template, problem and solver cache for one network size. Each call to
/// [`BeamformingSolver::feasibility`] stuffs the realization into the
/// template and solves the resulting cone program.
pub struct BeamformingSolver {
    config: NetworkConfig,
    template: StuffingTemplate,
    problem: ConicProblem,
    /// Template objective (minimum transmit power).
    objective: Vec<f64>,
    solver: HsdSolver,
    pub settings: SolverSettings,
    stats: SolveStats,
}

impl BeamformingSolver {
    pub fn new(config: NetworkConfig, settings: SolverSettings) -> Result<Self> {
        config.validate()?;
        settings.validate()?;
        let dims = compute_dims(config.l, config.k, &config.antennas, config.field)?;
        let (template, problem) = build_template(&dims)?;
        let objective = problem.c().to_vec();
        Ok(Self {
            config,
            template,
            problem,
            objective,
            solver: HsdSolver::new(),
            settings,
            stats: SolveStats::default(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn template(&self) -> &StuffingTemplate {
        &self.template
    }

    /// The cone program as last stuffed.
    pub fn problem(&self) -> &ConicProblem {
        &self.problem
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// Decides whether every user can reach weighted rate `gamma` within
    /// the power budgets, returning minimum-power beamformers if so.
    ///
    /// QoS rows are divided by σ_k before stuffing (channels h_k/σ_k, unit
    /// noise), which leaves every SINR unchanged. Returned beamformers
    /// satisfy each SINR target and power budget to a relative 1e-3; beams
    /// are rescaled to meet their targets with equality when that saves
    /// power.
    pub fn feasibility(&mut self, gamma: f64, h: &ChannelRealization) -> Result<Feasibility> {
        self.solve_target(gamma, h, false)
    }

    /// Feasibility verdict only: solves with a zero objective and stops as
    /// soon as some iterate, after power reallocation, passes validation.
    /// The beamformers returned for a feasible target are valid but need
    /// not have minimum power.
    pub fn decide(&mut self, gamma: f64, h: &ChannelRealization) -> Result<Feasibility> {
        self.solve_target(gamma, h, true)
    }

    fn solve_target(
        &mut self,
        gamma: f64,
        h: &ChannelRealization,
        early_exit: bool,
    ) -> Result<Feasibility> {
        let target = QosTarget::new(gamma, &self.config.weights)?;
        h.check(&self.config)?;
        let channels: Vec<Vec<Complex64>> = (0..self.config.k)
            .map(|k| {
                let s = self.config.noise_std(k);
                h.stacked(k).into_iter().map(|z| z / s).collect()
            })
            .collect();
        let unit_noise = vec![1.0; self.config.k];
        let t0 = Instant::now();
        stuff(
            &self.template,
            &mut self.problem,
            &StuffParams {
                channels: &channels,
                powers: &self.config.powers,
                noise_std: &unit_noise,
                weights: &self.config.weights,
                gamma,
            },
        )?;
        // a pure feasibility problem is enough for a verdict
        if early_exit {
            self.problem.c_mut().fill(0.0);
        } else if self.problem.c() != self.objective.as_slice() {
            self.problem.c_mut().copy_from_slice(&self.objective);
        }
        self.stats.stuff_time += t0.elapsed();

        let Self {
            config,
            template,
            problem,
            solver,
            settings,
            stats,
            ..
        } = self;
        let mut settings = settings.clone();
        // refinements resume from the current iterate
        let mut state = IterateState::initial(problem.n(), problem.m());
        let every = if early_exit {
            PROBE_INTERVAL
        } else {
            usize::MAX
        };
        for attempt in 0..=MAX_REFINEMENTS {
            let t1 = Instant::now();
            let before = state.iteration;
            let mut found = None;
            let mut probe = |nu: &[f64]| {
                found = early_exit
                    .then(|| accept(config, extract(config, template, nu), h, &target))
                    .flatten();
                found.is_some()
            };
            let result =
                solver.solve_monitored(problem, &settings, &mut state, every, &mut probe)?;
            stats.solve_time += t1.elapsed();
            stats.solves += 1;
            stats.iterations += state.iteration - before;
            let v = match result.status {
                Status::Stopped => found,
                Status::Optimal => {
                    let nu = result
                        .primal
                        .expect("optimal result carries a primal point");
                    let v = extract(config, template, &nu);
                    match early_exit {
                        true => accept(config, v, h, &target),
                        false => polish(config, v, h, &target),
                    }
                }
                Status::PrimalInfeasible => return Ok(Feasibility::Infeasible),
                Status::MaxIterReached => return Err(Error::SolverInconclusive(result.iterations)),
                Status::DualInfeasible => {
                    return Err(Error::Numerical(
                        "beamforming problem reported unbounded".into(),
                    ))
                }
            };
            if let Some(v) = v {
                let power = v.total_power();
                return Ok(Feasibility::Feasible {
                    objective_dbm: v.power_dbm(),
                    power,
                    beamformers: v,
                });
            }
            if attempt == MAX_REFINEMENTS {
                return Err(Error::SolverInconclusive(result.iterations));
            }
            settings.eps *= 0.1;
        }
        unreachable!("refinement loop returns")
    }
}

/// Beamformers from the trailing block of ν.
fn extract(config: &NetworkConfig, template: &StuffingTemplate, nu: &[f64]) -> BeamformerSet {
    let dims = template.dims();
    let v_all = &nu[template.layout().v..];
    let len = dims.user_block_len();
    let v = (0..dims.k)
        .map(|k| {
            let blk = &v_all[k * len..(k + 1) * len];
            match dims.field {
                FieldMode::Real => blk.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                FieldMode::Complex => unembed_vector(blk),
            }
        })
        .collect();
    BeamformerSet::new(config.antennas.clone(), v)
}

/// `v` itself if it validates, else its power-reallocated version if that
/// validates.
fn accept(
    config: &NetworkConfig,
    v: BeamformerSet,
    h: &ChannelRealization,
    target: &QosTarget,
) -> Option<BeamformerSet> {
    if validate(config, &v, h, target) {
        return Some(v);
    }
    let v = reallocate_power(config, &v, h, target)?;
    validate(config, &v, h, target).then_some(v)
}

/// Minimum-power variant of [`accept`]: an approximate optimum overshoots
/// its SINR targets, so per-user rescaling to equality is kept whenever it
/// validates and lowers the total power.
fn polish(
    config: &NetworkConfig,
    v: BeamformerSet,
    h: &ChannelRealization,
    target: &QosTarget,
) -> Option<BeamformerSet> {
    match reallocate_power(config, &v, h, target) {
        Some(p) if p.total_power() <= v.total_power() && validate(config, &p, h, target) => Some(p),
        _ => accept(config, v, h, target),
    }
}

/// Keeps the beam directions of `v` and finds the smallest per-user
/// scalings q_k that meet every SINR target with equality:
/// q_k a_kk − θ_k Σ_{i≠k} q_i a_ki = θ_k σ_k² with a_ki = |h_kᴴ v_i|².
/// The solution is componentwise minimal when it is positive, so it
/// violates no budget that any other scaling of these directions meets.
fn reallocate_power(
    config: &NetworkConfig,
    v: &BeamformerSet,
    h: &ChannelRealization,
    target: &QosTarget,
) -> Option<BeamformerSet> {
    let k = config.k;
    let hs: Vec<Vec<Complex64>> = (0..k).map(|i| h.stacked(i)).collect();
    let gains = DMatrix::from_fn(k, k, |row, col| {
        hs[row]
            .iter()
            .zip(v.stacked(col))
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    });
    let system = DMatrix::from_fn(k, k, |row, col| {
        if row == col {
            gains[(row, col)]
        } else {
            -target.theta[row] * gains[(row, col)]
        }
    });
    let rhs = DVector::from_fn(k, |row, _| target.theta[row] * config.noise_powers[row]);
    let q = system.lu().solve(&rhs)?;
    if !q.iter().all(|&x| x > 0.0 && x.is_finite()) {
        return None;
    }
    let scaled = (0..k)
        .map(|i| v.stacked(i).iter().map(|z| z * q[i].sqrt()).collect())
        .collect();
    Some(BeamformerSet::new(config.antennas.clone(), scaled))
}

fn validate(
    config: &NetworkConfig,
    v: &BeamformerSet,
    h: &ChannelRealization,
    target: &QosTarget,
) -> bool {
    v.is_finite()
        && (0..config.l).all(|l| v.ap_power(l) <= config.powers[l] * (1.0 + VALIDATION_TOL))
        && (0..config.k).all(|k| sinr(v, h, k, config) >= target.theta[k] * (1.0 - VALIDATION_TOL))
}

/// One-shot feasibility check for rate target `gamma`.
pub fn feasibility_solve(
    gamma: f64,
    h: &ChannelRealization,
    config: &NetworkConfig,
    settings: &SolverSettings,
) -> Result<Feasibility> {
    BeamformingSolver::new(config.clone(), settings.clone())?.feasibility(gamma, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> (NetworkConfig, ChannelRealization) {
        (
            NetworkConfig::uniform(1, 1, 1, 4.0, 1.0, FieldMode::Real),
            ChannelRealization::from_real(vec![vec![vec![2.0]]]),
        )
    }

    #[test]
    fn unit_instance_optimum() {
        let (cfg, h) = unit();
        let s = SolverSettings {
            eps: 1e-5,
            ..Default::default()
        };
        match feasibility_solve(1.0, &h, &cfg, &s).unwrap() {
            Feasibility::Feasible {
                beamformers,
                power,
                objective_dbm,
            } => {
                assert!((beamformers.total_power().sqrt() - 0.5).abs() < 1e-3);
                assert!((power - 0.25).abs() < 1e-3);
                assert!((objective_dbm - 23.98).abs() < 0.02);
            }
            Feasibility::Infeasible => panic!("unit instance is feasible"),
        }
    }

    #[test]
    fn loose_optimum_is_rescaled_to_equality() {
        let (cfg, h) = unit();
        let Feasibility::Feasible { beamformers, .. } =
            feasibility_solve(1.0, &h, &cfg, &SolverSettings::default()).unwrap()
        else {
            panic!("unit instance is feasible")
        };
        assert!((beamformers.total_power().sqrt() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unit_instance_infeasible_above_bound() {
        let (cfg, h) = unit();
        // θ = 17 ⇔ γ = log2(18)
        let r = feasibility_solve(18f64.log2(), &h, &cfg, &SolverSettings::default()).unwrap();
        assert_eq!(r, Feasibility::Infeasible);
    }

    #[test]
    fn rejects_bad_target_and_shape() {
        let (cfg, h) = unit();
        let s = SolverSettings::default();
        assert!(matches!(
            feasibility_solve(0.0, &h, &cfg, &s),
            Err(Error::InvalidTarget(_))
        ));
        let h2 = ChannelRealization::from_real(vec![vec![vec![1.0, 2.0]]]);
        assert!(matches!(
            feasibility_solve(1.0, &h2, &cfg, &s),
            Err(Error::Dimension { .. })
        ));
    }
}
