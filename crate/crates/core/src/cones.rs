//! Cone factors, dual cones and Euclidean projections onto Cartesian
//! products of cones.
//!
//! A [`ConeProduct`] is an ordered list of factors. Projection onto the
//! product is the concatenation of the per-factor projections, so factors
//! are projected independently (and in parallel for large products).

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};

/// Products with at least this many coordinates are projected in parallel.
const PARALLEL_MIN_DIM: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeKind {
    /// All of R^d.
    Free,
    /// The single point {0}.
    Zero,
    /// The nonnegative orthant.
    Nonneg,
    /// {(t, x) : ‖x‖₂ ≤ t}. A one-dimensional second-order cone is the
    /// nonnegative half-line.
    SecondOrder,
}

impl ConeKind {
    pub fn dual(self) -> ConeKind {
        match self {
            ConeKind::Free => ConeKind::Zero,
            ConeKind::Zero => ConeKind::Free,
            ConeKind::Nonneg => ConeKind::Nonneg,
            ConeKind::SecondOrder => ConeKind::SecondOrder,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ConeKind::Free => "free",
            ConeKind::Zero => "zero",
            ConeKind::Nonneg => "nonneg",
            ConeKind::SecondOrder => "soc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConeFactor {
    kind: ConeKind,
    dim: usize,
}

impl ConeFactor {
    pub fn new(kind: ConeKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "cone factor dimension must be at least 1".into(),
            ));
        }
        Ok(Self { kind, dim })
    }

    pub fn free(dim: usize) -> Self {
        Self::new(ConeKind::Free, dim).expect("free cone of dimension 0")
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(ConeKind::Zero, dim).expect("zero cone of dimension 0")
    }

    pub fn nonneg(dim: usize) -> Self {
        Self::new(ConeKind::Nonneg, dim).expect("nonnegative cone of dimension 0")
    }

    pub fn soc(dim: usize) -> Self {
        Self::new(ConeKind::SecondOrder, dim).expect("second-order cone of dimension 0")
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dual(&self) -> ConeFactor {
        ConeFactor {
            kind: self.kind.dual(),
            dim: self.dim,
        }
    }

    /// Euclidean projection of `w` onto this factor.
    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, w.len())?;
        let mut out = vec![0.0; self.dim];
        project_slice(self.kind, w, &mut out);
        Ok(out)
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        if w.len() != self.dim {
            return false;
        }
        match self.kind {
            ConeKind::Free => true,
            ConeKind::Zero => w.iter().all(|x| x.abs() <= tol),
            ConeKind::Nonneg => w.iter().all(|&x| x >= -tol),
            ConeKind::SecondOrder => norm2(&w[1..]) <= w[0] + tol,
        }
    }
}

/// Projection of `w` onto a cone of kind `kind`, written to `out`.
fn project_slice(kind: ConeKind, w: &[f64], out: &mut [f64]) {
    match kind {
        ConeKind::Free => out.copy_from_slice(w),
        ConeKind::Zero => out.fill(0.0),
        ConeKind::Nonneg => {
            for (o, &x) in out.iter_mut().zip(w) {
                *o = x.max(0.0);
            }
        }
        ConeKind::SecondOrder => {
            let head = w[0];
            let tail = &w[1..];
            let tail_norm = norm2(tail);
            if tail_norm <= -head {
                out.fill(0.0);
            } else if tail_norm <= head {
                out.copy_from_slice(w);
            } else {
                // tail_norm > |head| here, so the division is safe.
                let scale = 0.5 * (1.0 + head / tail_norm);
                out[0] = scale * tail_norm;
                for (o, &x) in out[1..].iter_mut().zip(tail) {
                    *o = scale * x;
                }
            }
        }
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// An ordered Cartesian product of cone factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConeProduct {
    factors: Vec<ConeFactor>,
    total_dim: usize,
}

impl ConeProduct {
    pub fn new(factors: Vec<ConeFactor>) -> Self {
        let total_dim = factors.iter().map(|f| f.dim).sum();
        Self { factors, total_dim }
    }

    pub fn factors(&self) -> &[ConeFactor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Factor-wise dual cone, same order.
    pub fn dual(&self) -> ConeProduct {
        ConeProduct {
            factors: self.factors.iter().map(ConeFactor::dual).collect(),
            total_dim: self.total_dim,
        }
    }

    /// Concatenation with another product (factors of `self` first).
    pub fn concat(&self, other: &ConeProduct) -> ConeProduct {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        ConeProduct::new(factors)
    }

    /// Iterator over `(offset, factor)` pairs.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, &ConeFactor)> {
        self.factors.iter().scan(0usize, |off, f| {
            let start = *off;
            *off += f.dim;
            Some((start, f))
        })
    }

    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.total_dim];
        self.project_into(w, &mut out)?;
        Ok(out)
    }

    /// Projection of `w` written into `out`. The output depends only on `w`,
    /// not on whether factors were processed in parallel.
    pub fn project_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.total_dim, w.len())?;
        check_len(self.total_dim, out.len())?;
        if self.total_dim >= PARALLEL_MIN_DIM && self.factors.len() > 1 {
            let mut chunks = Vec::with_capacity(self.factors.len());
            let mut rest = out;
            for f in &self.factors {
                let (head, tail) = rest.split_at_mut(f.dim);
                chunks.push(head);
                rest = tail;
            }
            chunks
                .into_par_iter()
                .zip(self.blocks().collect::<Vec<_>>())
                .for_each(|(o, (off, f))| project_slice(f.kind, &w[off..off + f.dim], o));
        } else {
            for (off, f) in self.blocks() {
                project_slice(f.kind, &w[off..off + f.dim], &mut out[off..off + f.dim]);
            }
        }
        Ok(())
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.len() == self.total_dim
            && self
                .blocks()
                .all(|(off, f)| f.contains(&w[off..off + f.dim], tol))
    }

    /// One line per factor, e.g. `soc 3`.
    pub fn describe(&self) -> String {
        self.factors
            .iter()
            .map(|f| format!("{} {}\n", f.kind.label(), f.dim))
            .collect()
    }
}

pub fn project_factor(factor: &ConeFactor, w: &[f64]) -> Result<Vec<f64>> {
    factor.project(w)
}

pub fn project_product(cone: &ConeProduct, w: &[f64]) -> Result<Vec<f64>> {
    cone.project(w)
}

pub fn dual_cone(cone: &ConeProduct) -> ConeProduct {
    cone.dual()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn nonneg_part() {
        let p = ConeFactor::nonneg(2).project(&[-1.5, 2.0]).unwrap();
        assert_eq!(p, vec![0.0, 2.0]);
    }

    #[test]
    fn soc_three_cases() {
        let soc = ConeFactor::soc(3);
        assert_eq!(
            soc.project(&[10.0, 3.0, 4.0]).unwrap(),
            vec![10.0, 3.0, 4.0]
        );
        assert!(close(
            &soc.project(&[0.0, 3.0, 4.0]).unwrap(),
            &[2.5, 1.5, 2.0],
            1e-15
        ));
        assert_eq!(soc.project(&[-6.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn soc_zero_tail() {
        let soc = ConeFactor::soc(3);
        assert_eq!(soc.project(&[-2.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(soc.project(&[2.0, 0.0, 0.0]).unwrap(), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn soc_dim_one_is_nonneg() {
        let soc = ConeFactor::soc(1);
        let nn = ConeFactor::nonneg(1);
        for w in [-3.0, -0.0, 0.0, 0.5, 7.0] {
            assert_eq!(soc.project(&[w]).unwrap(), nn.project(&[w]).unwrap());
        }
    }

    #[test]
    fn product_examples() {
        let c = ConeProduct::new(vec![ConeFactor::nonneg(1), ConeFactor::soc(2)]);
        assert_eq!(c.project(&[-1.0, 5.0, 3.0]).unwrap(), vec![0.0, 5.0, 3.0]);
        let z = ConeProduct::new(vec![ConeFactor::zero(2)]);
        assert_eq!(z.project(&[7.0, -3.0]).unwrap(), vec![0.0, 0.0]);
        let f = ConeProduct::new(vec![ConeFactor::free(2)]);
        assert_eq!(f.project(&[7.0, -3.0]).unwrap(), vec![7.0, -3.0]);
    }

    #[test]
    fn length_mismatch() {
        let c = ConeProduct::new(vec![ConeFactor::soc(3)]);
        assert_eq!(
            c.project(&[1.0, 2.0]),
            Err(Error::Dimension {
                expected: 3,
                got: 2
            })
        );
        assert!(ConeFactor::nonneg(2).project(&[1.0]).is_err());
        assert!(ConeFactor::new(ConeKind::Nonneg, 0).is_err());
    }

    #[test]
    fn dual_examples() {
        let v = ConeProduct::new(vec![ConeFactor::zero(2), ConeFactor::soc(4)]);
        assert_eq!(
            v.dual(),
            ConeProduct::new(vec![ConeFactor::free(2), ConeFactor::soc(4)])
        );
        let nn = ConeProduct::new(vec![ConeFactor::nonneg(3)]);
        assert_eq!(nn.dual(), nn);
        let mixed = ConeProduct::new(vec![
            ConeFactor::free(1),
            ConeFactor::zero(3),
            ConeFactor::nonneg(2),
            ConeFactor::soc(5),
        ]);
        assert_eq!(mixed.dual().dual(), mixed);
    }

    #[test]
    fn large_product_parallel_matches_sequential() {
        let factors: Vec<_> = (0..6000)
            .map(|i| match i % 3 {
                0 => ConeFactor::nonneg(2),
                1 => ConeFactor::soc(7),
                _ => ConeFactor::free(3),
            })
            .collect();
        let cone = ConeProduct::new(factors);
        assert!(cone.total_dim() >= PARALLEL_MIN_DIM);
        let w: Vec<f64> = (0..cone.total_dim())
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0)
            .collect();
        let par = cone.project(&w).unwrap();
        let mut seq = vec![0.0; w.len()];
        for (off, f) in cone.blocks() {
            seq[off..off + f.dim()].copy_from_slice(&f.project(&w[off..off + f.dim()]).unwrap());
        }
        assert_eq!(par, seq);
    }

    fn factor_strategy() -> impl Strategy<Value = ConeFactor> {
        (0..4u8, 1..6usize).prop_map(|(k, d)| {
            let kind = match k {
                0 => ConeKind::Free,
                1 => ConeKind::Zero,
                2 => ConeKind::Nonneg,
                _ => ConeKind::SecondOrder,
            };
            ConeFactor::new(kind, d).unwrap()
        })
    }

    fn factor_and_points() -> impl Strategy<Value = (ConeFactor, Vec<f64>, Vec<f64>)> {
        factor_strategy().prop_flat_map(|f| {
            let d = f.dim();
            (
                Just(f),
                prop::collection::vec(-10.0..10.0f64, d),
                prop::collection::vec(-10.0..10.0f64, d),
            )
        })
    }

    proptest! {
        #[test]
        fn idempotent((f, a, _b) in factor_and_points()) {
            let p = f.project(&a).unwrap();
            let pp = f.project(&p).unwrap();
            prop_assert!(close(&p, &pp, 1e-12));
        }

        #[test]
        fn nonexpansive((f, a, b) in factor_and_points()) {
            let pa = f.project(&a).unwrap();
            let pb = f.project(&b).unwrap();
            let d: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
            let e: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            prop_assert!(norm2(&d) <= norm2(&e) + 1e-12);
        }

        #[test]
        fn moreau((f, w, _b) in factor_and_points()) {
            let p = f.project(&w).unwrap();
            let neg: Vec<f64> = w.iter().map(|x| -x).collect();
            let q = f.dual().project(&neg).unwrap();
            for i in 0..w.len() {
                prop_assert!((w[i] - (p[i] - q[i])).abs() <= 1e-12);
            }
            let dot: f64 = p.iter().zip(&q).map(|(x, y)| x * y).sum();
            prop_assert!(dot.abs() <= 1e-10);
        }

        #[test]
        fn membership((f, w, _b) in factor_and_points()) {
            let p = f.project(&w).unwrap();
            match f.kind() {
                ConeKind::SecondOrder => prop_assert!(norm2(&p[1..]) <= p[0] + 1e-12),
                ConeKind::Nonneg => prop_assert!(p.iter().all(|&x| x >= -1e-15)),
                ConeKind::Zero => prop_assert!(p.iter().all(|&x| x == 0.0)),
                ConeKind::Free => prop_assert_eq!(p, w),
            }
        }
    }
}
