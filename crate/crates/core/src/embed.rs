//! Real embedding of complex inner products.
//!
//! For complex h and v, hᴴv = Σ (h̄ⱼ vⱼ) has real part Σ (ℜhⱼ ℜvⱼ + ℑhⱼ ℑvⱼ)
//! and imaginary part Σ (ℜhⱼ ℑvⱼ − ℑhⱼ ℜvⱼ). With ṽ = [ℜv; ℑv] both parts
//! are linear in ṽ, which is what lets the complex problem be posed over
//! real variables.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedChannel {
    /// Coefficients of ℜ(hᴴv) against ṽ = [ℜv; ℑv].
    pub re_row: Vec<f64>,
    /// Coefficients of ℑ(hᴴv) against ṽ.
    pub im_row: Vec<f64>,
}

impl EmbeddedChannel {
    pub fn new(h: &[Complex64]) -> Self {
        let n = h.len();
        let mut re_row = vec![0.0; 2 * n];
        let mut im_row = vec![0.0; 2 * n];
        for (j, hj) in h.iter().enumerate() {
            re_row[j] = hj.re;
            re_row[n + j] = hj.im;
            im_row[j] = -hj.im;
            im_row[n + j] = hj.re;
        }
        Self { re_row, im_row }
    }

    pub fn len(&self) -> usize {
        self.re_row.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.re_row.is_empty()
    }

    /// (ℜ(hᴴv), ℑ(hᴴv)) evaluated through the real rows.
    pub fn apply(&self, v: &[Complex64]) -> [f64; 2] {
        let vt = embed_vector(v);
        let dot = |row: &[f64]| row.iter().zip(&vt).map(|(a, b)| a * b).sum::<f64>();
        [dot(&self.re_row), dot(&self.im_row)]
    }
}

/// ṽ = [ℜv; ℑv]
pub fn embed_vector(v: &[Complex64]) -> Vec<f64> {
    v.iter()
        .map(|z| z.re)
        .chain(v.iter().map(|z| z.im))
        .collect()
}

/// Inverse of [`embed_vector`].
pub fn unembed_vector(vt: &[f64]) -> Vec<Complex64> {
    let n = vt.len() / 2;
    (0..n).map(|j| Complex64::new(vt[j], vt[n + j])).collect()
}

pub fn embed_complex(channels: &[Vec<Complex64>]) -> Vec<EmbeddedChannel> {
    channels.iter().map(|h| EmbeddedChannel::new(h)).collect()
}
