//! Standard-form conic problems
//!
//! ```text
//! minimize cᵀν  subject to  Aν + μ = b,  μ ∈ V
//! ```
//!
//! and the dimension bookkeeping of the beamforming instance family.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::cones::ConeProduct;
use crate::error::{check_len, Error, Result};
use crate::sparse::CscMatrix;

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn next_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldMode {
    Real,
    Complex,
}

impl FieldMode {
    /// Real coordinates per scalar: 1 for real data, 2 for complex data.
    pub fn factor(self) -> usize {
        match self {
            FieldMode::Real => 1,
            FieldMode::Complex => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FieldMode::Real => "real",
            FieldMode::Complex => "complex",
        }
    }
}

/// Sizes of the SOCP built for a network of `l` access points and `k` users.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProblemDims {
    pub l: usize,
    pub k: usize,
    pub antennas: Vec<usize>,
    pub field: FieldMode,
    /// Total antennas N = Σ N_l.
    pub total_antennas: usize,
    /// Length of the stacked real beamformer vector.
    pub beam_len: usize,
    /// Variable count.
    pub n: usize,
    /// Constraint row count.
    pub m: usize,
}

pub fn compute_dims(
    l: usize,
    k: usize,
    antennas: &[usize],
    field: FieldMode,
) -> Result<ProblemDims> {
    if l == 0 || k == 0 {
        return Err(Error::InvalidConfig(
            "need at least one access point and one user".into(),
        ));
    }
    if antennas.len() != l {
        return Err(Error::InvalidConfig(format!(
            "{} antenna counts given for {l} access points",
            antennas.len()
        )));
    }
    if antennas.contains(&0) {
        return Err(Error::InvalidConfig(
            "every access point needs at least one antenna".into(),
        ));
    }
    let ff = field.factor();
    let total_antennas: usize = antennas.iter().sum();
    let beam_len = ff * k * total_antennas;
    let n = 1 + l + k + beam_len;
    let per_ap: usize = antennas.iter().map(|&nl| ff * k * nl + 1).sum();
    let m = (l + k) + (beam_len + 1) + per_ap + k * (ff * k + 2);
    Ok(ProblemDims {
        l,
        k,
        antennas: antennas.to_vec(),
        field,
        total_antennas,
        beam_len,
        n,
        m,
    })
}

impl ProblemDims {
    pub fn field_factor(&self) -> usize {
        self.field.factor()
    }

    pub fn x0_col(&self) -> usize {
        0
    }

    pub fn y0_col(&self, ap: usize) -> usize {
        1 + ap
    }

    pub fn t0_col(&self, user: usize) -> usize {
        1 + self.l + user
    }

    /// First column of the stacked beamformer v.
    pub fn v_offset(&self) -> usize {
        1 + self.l + self.k
    }

    /// Real coordinates per user block of v.
    pub fn user_block_len(&self) -> usize {
        self.field_factor() * self.total_antennas
    }

    /// First column of user `k`'s beamformer block.
    pub fn user_col(&self, user: usize) -> usize {
        self.v_offset() + user * self.user_block_len()
    }

    /// Antenna index of the first antenna of AP `ap` in a stacked length-N vector.
    pub fn ap_antenna_offset(&self, ap: usize) -> usize {
        self.antennas[..ap].iter().sum()
    }

    pub fn power_row(&self, ap: usize) -> usize {
        ap
    }

    pub fn qos_row(&self, user: usize) -> usize {
        self.l + user
    }

    pub fn objective_block_row(&self) -> usize {
        self.l + self.k
    }

    pub fn ap_block_row(&self, ap: usize) -> usize {
        let ff = self.field_factor();
        self.objective_block_row()
            + self.beam_len
            + 1
            + self.antennas[..ap]
                .iter()
                .map(|&nl| ff * self.k * nl + 1)
                .sum::<usize>()
    }

    pub fn ap_block_len(&self, ap: usize) -> usize {
        self.field_factor() * self.k * self.antennas[ap] + 1
    }

    pub fn user_block_row(&self, user: usize) -> usize {
        self.ap_block_row(self.l) + user * self.qos_block_len()
    }

    pub fn qos_block_len(&self) -> usize {
        self.field_factor() * self.k + 2
    }
}

/// Standard-form problem data.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    cone: ConeProduct,
    dims: Option<ProblemDims>,
    revision: u64,
}

impl ConicProblem {
    pub fn new(a: CscMatrix, b: Vec<f64>, c: Vec<f64>, cone: ConeProduct) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        check_len(a.ncols(), c.len())?;
        check_len(a.nrows(), cone.total_dim())?;
        Ok(Self {
            a,
            b,
            c,
            cone,
            dims: None,
            revision: next_revision(),
        })
    }

    pub(crate) fn with_dims(mut self, dims: ProblemDims) -> Self {
        self.dims = Some(dims);
        self
    }

    pub fn a(&self) -> &CscMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn cone(&self) -> &ConeProduct {
        &self.cone
    }

    pub fn dims(&self) -> Option<&ProblemDims> {
        self.dims.as_ref()
    }

    /// Variable count n.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Row count m.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Changes whenever any value of (A, b, c) may have changed. Unique
    /// across problems, so it can key cached factorizations.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn a_values_mut(&mut self) -> &mut [f64] {
        self.revision = next_revision();
        self.a.values_mut()
    }

    pub fn b_mut(&mut self) -> &mut [f64] {
        self.revision = next_revision();
        &mut self.b
    }

    pub fn c_mut(&mut self) -> &mut [f64] {
        self.revision = next_revision();
        &mut self.c
    }

    /// Writes into A values and b together, bumping the revision once.
    pub(crate) fn data_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        self.revision = next_revision();
        (self.a.values_mut(), &mut self.b)
    }

    /// True when (A, b, c, cone) are bit-identical.
    pub fn same_data(&self, other: &ConicProblem) -> bool {
        let bits = |x: &[f64], y: &[f64]| {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
        };
        self.a.same_pattern(&other.a)
            && bits(self.a.values(), other.a.values())
            && bits(&self.b, &other.b)
            && bits(&self.c, &other.c)
            && self.cone == other.cone
    }

    /// Plain-text dump: header, A triplets, b, c and the cone list.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        s.push_str("conic-problem\n");
        if let Some(d) = &self.dims {
            let ants: Vec<String> = d.antennas.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(
                s,
                "dims L={} K={} antennas={} field={} n={} m={}",
                d.l,
                d.k,
                ants.join(","),
                d.field.as_str(),
                d.n,
                d.m
            );
        }
        let _ = writeln!(s, "A {} {} {}", self.m(), self.n(), self.a.nnz());
        for (r, c, v) in self.a.triplets() {
            let _ = writeln!(s, "{r},{c},{v:?}");
        }
        let _ = writeln!(s, "b {}", self.b.len());
        for v in &self.b {
            let _ = writeln!(s, "{v:?}");
        }
        let _ = writeln!(s, "c {}", self.c.len());
        for v in &self.c {
            let _ = writeln!(s, "{v:?}");
        }
        let _ = writeln!(s, "cones {}", self.cone.len());
        s.push_str(&self.cone.describe());
        s
    }
}
