use super::{
    gamma_max_default, BeamformerSet, BeamformingSolver, ChannelRealization, Feasibility,
    NetworkConfig,
};
use crate::error::{Error, Result};
use crate::hsd::SolverSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    /// Largest rate target verified feasible.
    pub gamma: f64,
    pub beamformers: BeamformerSet,
    /// Upper end of the initial bracket.
    pub gamma_max: f64,
    /// The bracket's upper end was itself feasible.
    pub bound_attained: bool,
    /// Bisection steps (midpoint solves).
    pub steps: usize,
    /// Midpoints where the solver reached no verdict; counted as infeasible.
    pub inconclusive: usize,
    /// (γ, feasible) for every midpoint, in order.
    pub trace: Vec<(f64, bool)>,
}

impl BeamformingSolver {
    /// Max-min fair rate by bisection on the common target γ over
    /// [0, γ_max], stopping once the bracket is narrower than `eps_rate`.
    pub fn bisection(&mut self, h: &ChannelRealization, eps_rate: f64) -> Result<BisectionOutcome> {
        let zeros = BeamformerSet::zeros(self.config());
        self.bisection_above(h, eps_rate, 0.0, zeros)
    }

    /// Bisection with the lower end of the bracket at `floor`, which
    /// `floor_beamformers` must already achieve (e.g. a zero-forcing
    /// solution). The result never falls below the floor.
    pub fn bisection_above(
        &mut self,
        h: &ChannelRealization,
        eps_rate: f64,
        floor: f64,
        floor_beamformers: BeamformerSet,
    ) -> Result<BisectionOutcome> {
        if !(eps_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_rate must be positive, got {eps_rate}"
            )));
        }
        h.check(self.config())?;
        let gamma_max = gamma_max_default(h, self.config());
        if !(floor >= 0.0) || floor_beamformers.users() != self.config().k {
            return Err(Error::InvalidConfig(format!(
                "invalid bisection floor {floor}"
            )));
        }
        let floor = floor.min(gamma_max);
        let mut out = BisectionOutcome {
            gamma: floor,
            beamformers: floor_beamformers,
            gamma_max,
            bound_attained: false,
            steps: 0,
            inconclusive: 0,
            trace: Vec::new(),
        };
        if !(gamma_max > floor) {
            return Ok(out);
        }
        let (mut low, mut up) = (floor, gamma_max);
        loop {
            let gamma = 0.5 * (low + up);
            out.steps += 1;
            let feasible = match self.decide(gamma, h) {
                Ok(Feasibility::Feasible { beamformers, .. }) => {
                    out.beamformers = beamformers;
                    true
                }
                Ok(Feasibility::Infeasible) => false,
                Err(Error::SolverInconclusive(_)) => {
                    out.inconclusive += 1;
                    false
                }
                Err(e) => return Err(e),
            };
            out.trace.push((gamma, feasible));
            if feasible {
                low = gamma;
            } else {
                up = gamma;
            }
            if up - low < eps_rate {
                break;
            }
        }
        // `up` is never evaluated as a midpoint, so an untouched upper end
        // is checked directly.
        out.gamma = low;
        if up == gamma_max {
            if let Ok(Feasibility::Feasible { beamformers, .. }) = self.decide(gamma_max, h) {
                out.gamma = gamma_max;
                out.beamformers = beamformers;
                out.bound_attained = true;
            }
        }
        Ok(out)
    }
}

pub fn max_min_bisection(
    h: &ChannelRealization,
    config: &NetworkConfig,
    settings: &SolverSettings,
    eps_rate: f64,
) -> Result<BisectionOutcome> {
    BeamformingSolver::new(config.clone(), settings.clone())?.bisection(h, eps_rate)
}
