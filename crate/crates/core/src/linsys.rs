//! Linear systems with the matrix I + Q of the self-dual embedding.
//!
//! With M = [I Aᵀ; −A I] and h = (c, b), the system (I + Q) z = w splits as
//!
//! ```text
//! z_xy = M⁻¹ w_xy − M⁻¹h · z_τ,   z_τ = (w_τ + hᵀ M⁻¹ w_xy) / (1 + hᵀ M⁻¹ h)
//! ```
//!
//! and M z = r reduces to (I + AᵀA) z_x = r_x − Aᵀ r_y, z_y = r_y + A z_x.
//! The reduced matrix is symmetric positive definite; it is either factored
//! once by a sparse Cholesky (direct mode) or handled matrix-free by
//! conjugate gradients (iterative mode). Since Mᵀ + M = 2I, hᵀM⁻¹h ≥ 0 and
//! the scalar denominator is at least one.

use crate::error::{check_len, Error, Result};
use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

/// Upper-triangular pattern of I + AᵀA together with the row-wise copy of A
/// used to fill its values.
#[derive(Debug, Clone)]
struct NormalPattern {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
}

impl NormalPattern {
    fn new(a: &CscMatrix, at: &CscMatrix) -> Self {
        let n = a.ncols();
        let mut mark = vec![NONE; n];
        let mut colptr = vec![0usize; n + 1];
        let mut rowidx = Vec::new();
        for j in 0..n {
            let start = rowidx.len();
            mark[j] = j;
            rowidx.push(j);
            for p in a.colptr()[j]..a.colptr()[j + 1] {
                let r = a.rowidx()[p];
                for q in at.colptr()[r]..at.colptr()[r + 1] {
                    let i = at.rowidx()[q];
                    if i < j && mark[i] != j {
                        mark[i] = j;
                        rowidx.push(i);
                    }
                }
            }
            rowidx[start..].sort_unstable();
            colptr[j + 1] = rowidx.len();
        }
        Self { n, colptr, rowidx }
    }

    /// Values of I + AᵀA on this pattern.
    fn values(&self, a: &CscMatrix, at: &CscMatrix, work: &mut [f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.rowidx.len()];
        for j in 0..self.n {
            for p in a.colptr()[j]..a.colptr()[j + 1] {
                let r = a.rowidx()[p];
                let arj = a.values()[p];
                for q in at.colptr()[r]..at.colptr()[r + 1] {
                    let i = at.rowidx()[q];
                    if i <= j {
                        work[i] += at.values()[q] * arj;
                    }
                }
            }
            work[j] += 1.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowidx[p];
                vals[p] = work[i];
                work[i] = 0.0;
            }
        }
        vals
    }
}

/// Elimination tree and column layout of the Cholesky factor.
#[derive(Debug, Clone)]
struct Symbolic {
    parent: Vec<usize>,
    lp: Vec<usize>,
}

/// Nonzero pattern of row k of L, returned in `stack[top..]` in
/// topological order.
fn ereach(
    colptr: &[usize],
    rowidx: &[usize],
    k: usize,
    parent: &[usize],
    stack: &mut [usize],
    flag: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    flag[k] = k;
    for p in colptr[k]..colptr[k + 1] {
        let mut i = rowidx[p];
        if i > k {
            continue;
        }
        let mut len = 0;
        while flag[i] != k {
            stack[len] = i;
            len += 1;
            flag[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl Symbolic {
    fn new(pat: &NormalPattern) -> Self {
        let n = pat.n;
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for p in pat.colptr[k]..pat.colptr[k + 1] {
                let mut i = pat.rowidx[p];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            let top = ereach(&pat.colptr, &pat.rowidx, k, &parent, &mut stack, &mut flag);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + counts[j];
        }
        Self { parent, lp }
    }
}

/// Sparse Cholesky factor L (column-compressed, diagonal first) of a
/// symmetric positive definite matrix.
#[derive(Debug, Clone)]
struct Cholesky {
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

impl Cholesky {
    /// Up-looking factorization of the matrix with upper pattern `pat` and
    /// values `vals`.
    fn factor(pat: &NormalPattern, sym: &Symbolic, vals: &[f64]) -> Result<Self> {
        let n = pat.n;
        let nnz = sym.lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut next: Vec<usize> = sym.lp[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut stack = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            let top = ereach(
                &pat.colptr,
                &pat.rowidx,
                k,
                &sym.parent,
                &mut stack,
                &mut flag,
            );
            for p in pat.colptr[k]..pat.colptr[k + 1] {
                x[pat.rowidx[p]] = vals[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / lx[sym.lp[i]];
                x[i] = 0.0;
                for p in sym.lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "nonpositive pivot {d} at column {k}"
                )));
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(Self {
            lp: sym.lp.clone(),
            li,
            lx,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.lp.len() - 1;
        for j in 0..n {
            let p0 = self.lp[j];
            x[j] /= self.lx[p0];
            let xj = x[j];
            for p in p0 + 1..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let p0 = self.lp[j];
            let mut acc = x[j];
            for p in p0 + 1..self.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc / self.lx[p0];
        }
    }

    fn nnz(&self) -> usize {
        self.lx.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinSolve {
    /// Sparse Cholesky of I + AᵀA, factored once per data revision.
    Direct,
    /// Matrix-free conjugate gradients on I + AᵀA.
    Iterative,
}

enum Backend {
    Direct(Cholesky),
    Iterative {
        tol: f64,
        warm: Vec<f64>,
        cg_iterations: usize,
    },
}

/// Cached solver for (I + Q) z = w on fixed (A, b, c).
pub struct EmbeddingSystem {
    a: CscMatrix,
    at: CscMatrix,
    h: Vec<f64>,
    q: Vec<f64>,
    hq: f64,
    backend: Backend,
    pattern: Option<(NormalPattern, Symbolic)>,
    factorizations: usize,
    work_x: Vec<f64>,
}

impl EmbeddingSystem {
    /// `tol` is the residual target of the iterative mode; unused for
    /// direct solves.
    pub fn new(a: &CscMatrix, b: &[f64], c: &[f64], mode: LinSolve, tol: f64) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        check_len(a.ncols(), c.len())?;
        let n = a.ncols();
        let backend = match mode {
            LinSolve::Direct => Backend::Direct(Cholesky {
                lp: vec![0],
                li: vec![],
                lx: vec![],
            }),
            LinSolve::Iterative => Backend::Iterative {
                tol,
                warm: vec![0.0; n],
                cg_iterations: 0,
            },
        };
        let mut sys = Self {
            a: a.clone(),
            at: a.transpose(),
            h: c.iter().chain(b).copied().collect(),
            q: Vec::new(),
            hq: 0.0,
            backend,
            pattern: None,
            factorizations: 0,
            work_x: vec![0.0; n],
        };
        sys.refresh()?;
        Ok(sys)
    }

    /// Replaces the data with new values on the same pattern, refactoring.
    pub fn update(&mut self, a: &CscMatrix, b: &[f64], c: &[f64]) -> Result<()> {
        if !self.a.same_pattern(a) {
            self.pattern = None;
        }
        check_len(self.a.nrows(), b.len())?;
        check_len(self.a.ncols(), c.len())?;
        self.a = a.clone();
        self.at = a.transpose();
        self.h = c.iter().chain(b).copied().collect();
        self.refresh()
    }

    fn refresh(&mut self) -> Result<()> {
        if let Backend::Direct(_) = self.backend {
            if self.pattern.is_none() {
                let pat = NormalPattern::new(&self.a, &self.at);
                let sym = Symbolic::new(&pat);
                self.pattern = Some((pat, sym));
            }
            let (pat, sym) = self.pattern.as_ref().expect("pattern");
            let vals = pat.values(&self.a, &self.at, &mut self.work_x);
            self.backend = Backend::Direct(Cholesky::factor(pat, sym, &vals)?);
            self.factorizations += 1;
        }
        let h = self.h.clone();
        let mut q = vec![0.0; h.len()];
        self.solve_m(&h, &mut q, true)?;
        self.hq = h.iter().zip(&q).map(|(x, y)| x * y).sum();
        self.q = q;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a.ncols() + self.a.nrows() + 1
    }

    /// Number of numeric factorizations performed (direct mode).
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    /// Nonzeros in the Cholesky factor (direct mode), else 0.
    pub fn factor_nnz(&self) -> usize {
        match &self.backend {
            Backend::Direct(l) => l.nnz(),
            Backend::Iterative { .. } => 0,
        }
    }

    /// Total conjugate-gradient iterations spent (iterative mode).
    pub fn cg_iterations(&self) -> usize {
        match &self.backend {
            Backend::Iterative { cg_iterations, .. } => *cg_iterations,
            Backend::Direct(_) => 0,
        }
    }

    /// z = M⁻¹ r for M = [I Aᵀ; −A I].
    fn solve_m(&mut self, r: &[f64], z: &mut [f64], cold: bool) -> Result<()> {
        let n = self.a.ncols();
        let (rx, ry) = r.split_at(n);
        let mut rhs = rx.to_vec();
        self.at.gemv(-1.0, ry, &mut rhs);
        let (zx, zy) = z.split_at_mut(n);
        match &mut self.backend {
            Backend::Direct(l) => {
                zx.copy_from_slice(&rhs);
                l.solve_in_place(zx);
            }
            Backend::Iterative {
                tol,
                warm,
                cg_iterations,
            } => {
                // Each of the two M-solves gets half the residual budget.
                let target = 0.5 * *tol * (1.0 + norm(r));
                if cold {
                    zx.fill(0.0);
                } else {
                    zx.copy_from_slice(warm);
                }
                *cg_iterations += conjugate_gradient(&self.a, &rhs, zx, target)?;
                if !cold {
                    warm.copy_from_slice(zx);
                }
            }
        }
        zy.copy_from_slice(ry);
        self.a.gemv(1.0, zx, zy);
        Ok(())
    }

    /// Solves (I + Q) z = w.
    pub fn solve(&mut self, w: &[f64], z: &mut [f64]) -> Result<()> {
        let d = self.dim();
        check_len(d, w.len())?;
        check_len(d, z.len())?;
        let (wxy, wt) = w.split_at(d - 1);
        let (zxy, zt) = z.split_at_mut(d - 1);
        self.solve_m(wxy, zxy, false)?;
        let hp: f64 = self.h.iter().zip(zxy.iter()).map(|(x, y)| x * y).sum();
        let tau = (wt[0] + hp) / (1.0 + self.hq);
        for (zi, qi) in zxy.iter_mut().zip(&self.q) {
            *zi -= qi * tau;
        }
        zt[0] = tau;
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves (I + AᵀA) x = rhs from the initial guess in `x` until the
/// residual norm is at most `target`. Returns the iteration count.
fn conjugate_gradient(a: &CscMatrix, rhs: &[f64], x: &mut [f64], target: f64) -> Result<usize> {
    let n = x.len();
    let mut ax = vec![0.0; a.nrows()];
    let apply = |v: &[f64], out: &mut [f64], tmp: &mut [f64]| {
        tmp.fill(0.0);
        a.gemv(1.0, v, tmp);
        out.copy_from_slice(v);
        a.gemv_t(1.0, tmp, out);
    };
    let mut r = vec![0.0; n];
    apply(x, &mut r, &mut ax);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    if rr.sqrt() <= target {
        return Ok(0);
    }
    let mut p = r.clone();
    let mut kp = vec![0.0; n];
    let max_iter = 10 * n.max(10);
    for it in 1..=max_iter {
        apply(&p, &mut kp, &mut ax);
        let alpha = rr / p.iter().zip(&kp).map(|(u, v)| u * v).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new.sqrt() <= target {
            return Ok(it);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::Numerical(format!(
        "conjugate gradients stalled at residual {:e}",
        rr.sqrt()
    )))
}
