//! Offline template generation and matrix stuffing for the max-min
//! beamforming SOCP.
//!
//! The variable is ν = [x₀; y₀¹..y₀ᴸ; t₀¹..t₀ᴷ; v] and the rows of (A, b)
//! are, in order:
//!
//! * L power rows `y₀ˡ + s = √P_l` with `s ≥ 0`,
//! * K QoS rows `t₀ᵏ − β_k r_kᵀv + s = 0` with `s ≥ 0`,
//! * the objective block `(x₀, v) ∈ SOC`,
//! * L per-AP blocks `(y₀ˡ, D_l v) ∈ SOC`,
//! * K QoS blocks `(t₀ᵏ, C_k v + g_k) ∈ SOC` with `g_k = (0, σ_k)`.
//!
//! Only the entries holding √P_l, σ_k, β_k r_k and C_k depend on the
//! network realization. [`build_template`] fixes the sparsity pattern once
//! and records where those entries live, so [`stuff`] reduces to writes.

use num_complex::Complex64;

use crate::cones::{ConeFactor, ConeProduct};
use crate::error::{check_len, Error, Result};
use crate::problem::{ConicProblem, FieldMode, ProblemDims};
use crate::sparse::CscMatrix;

/// θ = 2^{γ/ω} − 1 and β = √(1 + 1/θ) for rate target `gamma` and weight `weight`.
pub fn qos_threshold(gamma: f64, weight: f64) -> (f64, f64) {
    let theta = (gamma / weight * std::f64::consts::LN_2).exp_m1();
    let beta = (1.0 + 1.0 / theta).sqrt();
    (theta, beta)
}

/// Realization-dependent data copied into a template.
#[derive(Debug, Clone, Copy)]
pub struct StuffParams<'a> {
    /// Stacked channel h_k (length N) for every user.
    pub channels: &'a [Vec<Complex64>],
    /// Per-AP power budgets P_l in watts.
    pub powers: &'a [f64],
    /// Per-user noise standard deviations σ_k.
    pub noise_std: &'a [f64],
    /// Per-user rate weights ω_k.
    pub weights: &'a [f64],
    /// Common rate target γ in bits/s/Hz.
    pub gamma: f64,
}

impl StuffParams<'_> {
    fn validate(&self, dims: &ProblemDims) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidTarget(self.gamma));
        }
        check_len(dims.k, self.channels.len())?;
        check_len(dims.l, self.powers.len())?;
        check_len(dims.k, self.noise_std.len())?;
        check_len(dims.k, self.weights.len())?;
        for h in self.channels {
            check_len(dims.total_antennas, h.len())?;
            if dims.field == FieldMode::Real && h.iter().any(|z| z.im != 0.0) {
                return Err(Error::FieldMismatch);
            }
        }
        if self.powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidConfig(
                "power budgets must be finite and nonnegative".into(),
            ));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidConfig("user weights must be positive".into()));
        }
        if self
            .noise_std
            .iter()
            .any(|&s| !(s >= 0.0) || !s.is_finite())
        {
            return Err(Error::InvalidConfig(
                "noise levels must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Which scalar of a channel vector a slot is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coef {
    Re(usize),
    Im(usize),
    NegIm(usize),
}

impl Coef {
    #[inline]
    fn eval(self, h: &[Complex64]) -> f64 {
        match self {
            Coef::Re(j) => h[j].re,
            Coef::Im(j) => h[j].im,
            Coef::NegIm(j) => -h[j].im,
        }
    }
}

/// Coefficients of the row of hᴴvᵢ (real: hᵀvᵢ) over user i's block,
/// as `(offset within block, coefficient)`. `part` 0 is the real part,
/// 1 the imaginary part (complex mode only).
fn inner_product_row(dims: &ProblemDims, part: usize) -> Vec<(usize, Coef)> {
    let n = dims.total_antennas;
    match (dims.field, part) {
        (FieldMode::Real, _) => (0..n).map(|j| (j, Coef::Re(j))).collect(),
        (FieldMode::Complex, 0) => (0..n)
            .map(|j| (j, Coef::Re(j)))
            .chain((0..n).map(|j| (n + j, Coef::Im(j))))
            .collect(),
        (FieldMode::Complex, _) => (0..n)
            .map(|j| (j, Coef::NegIm(j)))
            .chain((0..n).map(|j| (n + j, Coef::Re(j))))
            .collect(),
    }
}

/// Offsets of the variable groups within ν.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub x0: usize,
    pub y0: usize,
    pub t0: usize,
    pub v: usize,
}

#[derive(Debug, Clone)]
pub struct StuffingTemplate {
    dims: ProblemDims,
    power_slots: Vec<usize>,
    sigma_slots: Vec<usize>,
    beta_r_slots: Vec<Vec<(usize, Coef)>>,
    c_slots: Vec<Vec<(usize, Coef)>>,
    layout: VariableLayout,
}

impl StuffingTemplate {
    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn layout(&self) -> VariableLayout {
        self.layout
    }

    /// Indices into b holding √P_l.
    pub fn power_slots(&self) -> &[usize] {
        &self.power_slots
    }

    /// Indices into b holding σ_k.
    pub fn sigma_slots(&self) -> &[usize] {
        &self.sigma_slots
    }

    /// Indices into the value array of A holding −β_k r_k, per user.
    pub fn beta_r_slots(&self, user: usize) -> Vec<usize> {
        self.beta_r_slots[user].iter().map(|s| s.0).collect()
    }

    /// Indices into the value array of A holding −C_k, per user.
    pub fn c_slots(&self, user: usize) -> Vec<usize> {
        self.c_slots[user].iter().map(|s| s.0).collect()
    }
}

/// Structural (parameter-free) triplets of A.
fn structural_triplets(dims: &ProblemDims) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    let ff = dims.field_factor();
    for ap in 0..dims.l {
        t.push((dims.power_row(ap), dims.y0_col(ap), 1.0));
    }
    for k in 0..dims.k {
        t.push((dims.qos_row(k), dims.t0_col(k), 1.0));
    }
    let g1 = dims.objective_block_row();
    t.push((g1, dims.x0_col(), -1.0));
    for j in 0..dims.beam_len {
        t.push((g1 + 1 + j, dims.v_offset() + j, -1.0));
    }
    for ap in 0..dims.l {
        let row0 = dims.ap_block_row(ap);
        t.push((row0, dims.y0_col(ap), -1.0));
        // D_l picks AP l's antennas out of every user block; complex blocks
        // contribute real and imaginary parts.
        let nl = dims.antennas[ap];
        let a_off = dims.ap_antenna_offset(ap);
        let mut row = row0 + 1;
        for k in 0..dims.k {
            for part in 0..ff {
                for j in 0..nl {
                    let col = dims.user_col(k) + part * dims.total_antennas + a_off + j;
                    t.push((row, col, -1.0));
                    row += 1;
                }
            }
        }
    }
    for k in 0..dims.k {
        t.push((dims.user_block_row(k), dims.t0_col(k), -1.0));
    }
    t
}

/// Rows and columns of the parameter entries of A: per user, the QoS row
/// entries and the C_k entries, each tagged with its channel coefficient.
#[allow(clippy::type_complexity)]
fn parameter_positions(
    dims: &ProblemDims,
) -> (
    Vec<Vec<(usize, usize, Coef)>>,
    Vec<Vec<(usize, usize, Coef)>>,
) {
    let ff = dims.field_factor();
    let mut beta = Vec::with_capacity(dims.k);
    let mut cmat = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        let row = dims.qos_row(k);
        let col0 = dims.user_col(k);
        beta.push(
            inner_product_row(dims, 0)
                .into_iter()
                .map(|(o, c)| (row, col0 + o, c))
                .collect(),
        );

        let mut entries = Vec::new();
        let block = dims.user_block_row(k);
        for i in 0..dims.k {
            for part in 0..ff {
                let row = block + 1 + ff * i + part;
                let col0 = dims.user_col(i);
                entries.extend(
                    inner_product_row(dims, part)
                        .into_iter()
                        .map(|(o, c)| (row, col0 + o, c)),
                );
            }
        }
        cmat.push(entries);
    }
    (beta, cmat)
}

fn cone_for(dims: &ProblemDims) -> ConeProduct {
    let mut f = Vec::with_capacity(2 * (dims.l + dims.k) + 1);
    f.extend(std::iter::repeat_n(ConeFactor::nonneg(1), dims.l + dims.k));
    f.push(ConeFactor::soc(dims.beam_len + 1));
    f.extend((0..dims.l).map(|ap| ConeFactor::soc(dims.ap_block_len(ap))));
    f.extend((0..dims.k).map(|_| ConeFactor::soc(dims.qos_block_len())));
    ConeProduct::new(f)
}

fn objective(dims: &ProblemDims) -> Vec<f64> {
    let mut c = vec![0.0; dims.n];
    c[dims.x0_col()] = 1.0;
    c
}

/// Builds the fixed structure for `dims`. Parameter slots hold zeros.
pub fn build_template(dims: &ProblemDims) -> Result<(StuffingTemplate, ConicProblem)> {
    let mut triplets = structural_triplets(dims);
    let (beta, cmat) = parameter_positions(dims);
    for entries in beta.iter().chain(&cmat) {
        triplets.extend(entries.iter().map(|&(r, c, _)| (r, c, 0.0)));
    }
    let a = CscMatrix::from_triplets(dims.m, dims.n, triplets)?;
    let locate = |entries: &Vec<(usize, usize, Coef)>| -> Vec<(usize, Coef)> {
        entries
            .iter()
            .map(|&(r, c, coef)| (a.position(r, c).expect("parameter entry in pattern"), coef))
            .collect()
    };
    let beta_r_slots = beta.iter().map(locate).collect();
    let c_slots = cmat.iter().map(locate).collect();

    let power_slots = (0..dims.l).map(|ap| dims.power_row(ap)).collect();
    let sigma_slots = (0..dims.k)
        .map(|k| dims.user_block_row(k) + dims.qos_block_len() - 1)
        .collect();
    let layout = VariableLayout {
        x0: dims.x0_col(),
        y0: dims.y0_col(0),
        t0: dims.t0_col(0),
        v: dims.v_offset(),
    };

    let problem = ConicProblem::new(a, vec![0.0; dims.m], objective(dims), cone_for(dims))?
        .with_dims(dims.clone());
    let template = StuffingTemplate {
        dims: dims.clone(),
        power_slots,
        sigma_slots,
        beta_r_slots,
        c_slots,
        layout,
    };
    Ok((template, problem))
}

/// Copies the realization `params` into the parameter slots of `problem`.
/// The sparsity pattern and all structural entries are left untouched.
pub fn stuff(
    template: &StuffingTemplate,
    problem: &mut ConicProblem,
    params: &StuffParams,
) -> Result<()> {
    let dims = &template.dims;
    if problem.dims() != Some(dims) {
        return Err(Error::InvalidConfig(
            "problem was not built from this template".into(),
        ));
    }
    params.validate(dims)?;
    let (values, b) = problem.data_mut();
    for (&slot, &p) in template.power_slots.iter().zip(params.powers) {
        b[slot] = p.sqrt();
    }
    for (&slot, &s) in template.sigma_slots.iter().zip(params.noise_std) {
        b[slot] = s;
    }
    for k in 0..dims.k {
        let h = &params.channels[k];
        let (_, beta) = qos_threshold(params.gamma, params.weights[k]);
        for &(slot, coef) in &template.beta_r_slots[k] {
            values[slot] = -beta * coef.eval(h);
        }
        for &(slot, coef) in &template.c_slots[k] {
            values[slot] = -coef.eval(h);
        }
    }
    Ok(())
}

/// Assembles the problem for `params` from nothing: a fresh triplet list,
/// sort and compression. Equivalent to [`build_template`] + [`stuff`].
pub fn build_from_scratch(dims: &ProblemDims, params: &StuffParams) -> Result<ConicProblem> {
    params.validate(dims)?;
    let ff = dims.field_factor();
    let n_ant = dims.total_antennas;
    let mut triplets = structural_triplets(dims);
    for k in 0..dims.k {
        let h = &params.channels[k];
        let (_, beta) = qos_threshold(params.gamma, params.weights[k]);
        let row = dims.qos_row(k);
        let col0 = dims.user_col(k);
        for j in 0..n_ant {
            triplets.push((row, col0 + j, -beta * h[j].re));
        }
        if ff == 2 {
            for j in 0..n_ant {
                triplets.push((row, col0 + n_ant + j, -beta * h[j].im));
            }
        }
        let block = dims.user_block_row(k);
        for i in 0..dims.k {
            let col0 = dims.user_col(i);
            let re_row = block + 1 + ff * i;
            for j in 0..n_ant {
                triplets.push((re_row, col0 + j, -h[j].re));
            }
            if ff == 2 {
                for j in 0..n_ant {
                    triplets.push((re_row, col0 + n_ant + j, -h[j].im));
                    triplets.push((re_row + 1, col0 + j, -(-h[j].im)));
                    triplets.push((re_row + 1, col0 + n_ant + j, -h[j].re));
                }
            }
        }
    }
    let a = CscMatrix::from_triplets(dims.m, dims.n, triplets)?;
    let mut b = vec![0.0; dims.m];
    for ap in 0..dims.l {
        b[dims.power_row(ap)] = params.powers[ap].sqrt();
    }
    for k in 0..dims.k {
        b[dims.user_block_row(k) + ff * dims.k + 1] = params.noise_std[k];
    }
    Ok(ConicProblem::new(a, b, objective(dims), cone_for(dims))?.with_dims(dims.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::ConeKind;
    use crate::problem::compute_dims;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    type UnitParams = (Vec<Vec<Complex64>>, [f64; 1], [f64; 1], [f64; 1], f64);

    fn unit_params(gamma: f64) -> UnitParams {
        (vec![vec![c(2.0)]], [4.0], [1.0], [1.0], gamma)
    }

    #[test]
    fn beta_at_gamma_equal_weight() {
        let (theta, beta) = qos_threshold(1.0, 1.0);
        assert!((theta - 1.0).abs() < 1e-15);
        assert!((beta - 2f64.sqrt()).abs() < 1e-15);
        let (theta, _) = qos_threshold(3.0, 1.5);
        assert!((theta - 3.0).abs() < 1e-14);
    }

    #[test]
    fn unit_template_layout() {
        let dims = compute_dims(1, 1, &[1], FieldMode::Real).unwrap();
        let (tpl, p) = build_template(&dims).unwrap();
        assert_eq!((p.m(), p.n()), (9, 4));
        let kinds: Vec<_> = p
            .cone()
            .factors()
            .iter()
            .map(|f| (f.kind(), f.dim()))
            .collect();
        use ConeKind::*;
        assert_eq!(
            kinds,
            vec![
                (Nonneg, 1),
                (Nonneg, 1),
                (SecondOrder, 2),
                (SecondOrder, 2),
                (SecondOrder, 3)
            ]
        );
        assert_eq!(p.c(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(tpl.power_slots(), &[0]);
        assert_eq!(tpl.sigma_slots(), &[8]);
        assert_eq!(
            tpl.layout(),
            VariableLayout {
                x0: 0,
                y0: 1,
                t0: 2,
                v: 3
            }
        );
        let structural: Vec<(usize, usize, f64)> =
            p.a().triplets().filter(|t| t.2 != 0.0).collect();
        let mut expect = vec![
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 0, -1.0),
            (3, 3, -1.0),
            (4, 1, -1.0),
            (5, 3, -1.0),
            (6, 2, -1.0),
        ];
        expect.sort_by_key(|t| (t.1, t.0));
        assert_eq!(structural, expect);
        // parameter slots: QoS row (1, 3) and C row (7, 3)
        assert_eq!(p.a().position(1, 3), Some(tpl.beta_r_slots(0)[0]));
        assert_eq!(p.a().position(7, 3), Some(tpl.c_slots(0)[0]));
    }

    #[test]
    fn unit_stuffing_values() {
        let dims = compute_dims(1, 1, &[1], FieldMode::Real).unwrap();
        let (tpl, mut p) = build_template(&dims).unwrap();
        let (h, pw, s, w, g) = unit_params(1.0);
        stuff(
            &tpl,
            &mut p,
            &StuffParams {
                channels: &h,
                powers: &pw,
                noise_std: &s,
                weights: &w,
                gamma: g,
            },
        )
        .unwrap();
        assert_eq!(p.b(), &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((p.a().get(1, 3) + 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.a().get(7, 3), -2.0);
    }

    #[test]
    fn stuffing_twice_is_bit_identical() {
        let dims = compute_dims(2, 2, &[1, 2], FieldMode::Complex).unwrap();
        let (tpl, mut p) = build_template(&dims).unwrap();
        let h: Vec<Vec<Complex64>> = (0..2)
            .map(|k| {
                (0..3)
                    .map(|j| Complex64::new(k as f64 + 0.5 * j as f64, 1.0 - j as f64))
                    .collect()
            })
            .collect();
        let params = StuffParams {
            channels: &h,
            powers: &[1.0, 2.0],
            noise_std: &[0.5, 0.25],
            weights: &[1.0, 2.0],
            gamma: 1.3,
        };
        stuff(&tpl, &mut p, &params).unwrap();
        let first = p.clone();
        let rev = p.revision();
        stuff(&tpl, &mut p, &params).unwrap();
        assert!(p.same_data(&first));
        assert_ne!(p.revision(), rev);
        assert!(p.same_data(&build_from_scratch(&dims, &params).unwrap()));
    }

    #[test]
    fn stuffing_errors() {
        let dims = compute_dims(1, 1, &[1], FieldMode::Real).unwrap();
        let (tpl, mut p) = build_template(&dims).unwrap();
        let (h, pw, s, w, _) = unit_params(1.0);
        for bad in [0.0, -1.0, f64::NAN] {
            let r = stuff(
                &tpl,
                &mut p,
                &StuffParams {
                    channels: &h,
                    powers: &pw,
                    noise_std: &s,
                    weights: &w,
                    gamma: bad,
                },
            );
            assert!(matches!(r, Err(Error::InvalidTarget(_))));
        }
        let hc = vec![vec![Complex64::new(1.0, 1.0)]];
        let r = stuff(
            &tpl,
            &mut p,
            &StuffParams {
                channels: &hc,
                powers: &pw,
                noise_std: &s,
                weights: &w,
                gamma: 1.0,
            },
        );
        assert_eq!(r, Err(Error::FieldMismatch));
        let h2 = vec![vec![c(1.0), c(2.0)]];
        let r = stuff(
            &tpl,
            &mut p,
            &StuffParams {
                channels: &h2,
                powers: &pw,
                noise_std: &s,
                weights: &w,
                gamma: 1.0,
            },
        );
        assert!(matches!(r, Err(Error::Dimension { .. })));
        let other = compute_dims(1, 2, &[1], FieldMode::Real).unwrap();
        let (_, mut q) = build_template(&other).unwrap();
        let r = stuff(
            &tpl,
            &mut q,
            &StuffParams {
                channels: &h,
                powers: &pw,
                noise_std: &s,
                weights: &w,
                gamma: 1.0,
            },
        );
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }
}
