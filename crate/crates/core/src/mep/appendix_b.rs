//! A banded problem with a complete closed-form solution set. Row `j` encodes
//! the recursion `sum_i lambda_i v_{j+1-i} = 0` with one wrap-around entry
//! `lambda_k v_n` in the first row. Solutions are indexed by `k-1`-subsets of the
//! `(n+k-1)`-th roots of unity; for `k = 2` they are the discrete Fourier vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{normalize_lambda, Eigenpair, MepSource, RectMEP};
use crate::error::{JopError, Result};
use crate::poly::Polynomial;

/// Constant matrices `A_i[j, j+1-i] = 1` (columns in range) plus `A_k[0, n] = 1`.
pub fn appendix_b_build(n: usize, k: usize) -> RectMEP {
    let rows = n + k - 1;
    let cols = n + 1;
    let mut a = vec![DMatrix::zeros(rows, cols); k];
    for (i, m) in a.iter_mut().enumerate() {
        for j in 0..rows {
            // column j + 1 - (i + 1) = j - i
            if j >= i && j - i < cols {
                m[(j, j - i)] = 1.0;
            }
        }
    }
    a[k - 1][(0, n)] += 1.0;
    RectMEP { k, n, a, source: MepSource::AppendixB, basis: None }
}

/// Reverses the column order of every matrix.
pub fn symmetrize(mep: &RectMEP) -> RectMEP {
    let a = mep
        .a
        .iter()
        .map(|m| {
            let c = m.ncols();
            DMatrix::from_fn(m.nrows(), c, |i, s| m[(i, c - 1 - s)])
        })
        .collect();
    RectMEP { k: mep.k, n: mep.n, a, source: mep.source.clone(), basis: None }
}

#[derive(Debug, Clone)]
pub struct ClosedFormPair {
    /// Exponents `m` of the chosen roots `exp(2 pi i m / (n + k - 1))`.
    pub choice: Vec<usize>,
    /// Coefficients of `prod (x - zeta)`, highest power first.
    pub lambda: Vec<Complex64>,
    pub vector: Vec<Complex64>,
    /// Template residual `|sum lambda_i A_i v| / (|v| |lambda| max |A_i|)`.
    pub residual: f64,
    /// The choice is closed under conjugation, so the pair is real up to phase.
    pub is_real: bool,
}

impl ClosedFormPair {
    /// Real pair after removing the phase of the largest vector entry.
    pub fn to_eigenpair(&self) -> Option<Eigenpair> {
        if !self.is_real {
            return None;
        }
        let big = self.vector.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
        let phase = big / big.norm();
        let v: Vec<f64> = self.vector.iter().map(|z| (z / phase).re).collect();
        let lambda: Vec<f64> = self.lambda.iter().map(|z| z.re).collect();
        Some(Eigenpair { vector: Polynomial::new(v), lambda: normalize_lambda(&lambda), residual: self.residual })
    }
}

/// All `(k-1)`-subsets of `0..n+k-1`, lexicographic.
pub fn unity_choices(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, total: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for m in start..total {
            cur.push(m);
            rec(m + 1, total, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n + k - 1, k - 1, &mut Vec::new(), &mut out);
    out
}

fn template_residual(mep: &RectMEP, lambda: &[Complex64], v: &[Complex64]) -> f64 {
    let mut acc = DVector::<Complex64>::zeros(mep.rows());
    let vv = DVector::from_column_slice(v);
    for (l, a) in lambda.iter().zip(&mep.a) {
        acc += a.map(|x| Complex64::new(x, 0.0)) * &vv * *l;
    }
    let lnorm = lambda.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    acc.norm() / (vv.norm() * lnorm * mep.scale())
}

/// Closed-form eigenpair for the chosen roots of unity `exp(2 pi i m / (n+k-1))`.
pub fn appendix_b_closed_form(n: usize, k: usize, choice: &[usize]) -> Result<ClosedFormPair> {
    let kappa = k - 1;
    let order = n + kappa;
    if choice.len() != kappa {
        return Err(JopError::InvalidConfig(format!("need {kappa} roots of unity, got {}", choice.len())));
    }
    if let Some(&m) = choice.iter().find(|&&m| m >= order) {
        return Err(JopError::InvalidConfig(format!("root index {m} exceeds {order}")));
    }
    let mut sorted = choice.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(JopError::DuplicateRoots);
    }
    let zeta: Vec<Complex64> =
        choice.iter().map(|&m| Complex64::from_polar(1.0, std::f64::consts::TAU * m as f64 / order as f64)).collect();

    // coefficients of prod (x - zeta_i), lowest power first
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for z in &zeta {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (s, c) in poly.iter().enumerate() {
            next[s + 1] += c;
            next[s] -= z * c;
        }
        poly = next;
    }
    let lambda: Vec<Complex64> = (1..=k).map(|j| poly[k - j]).collect();

    // rows conj(zeta)^0 .. conj(zeta)^{kappa-2}, then zeta^{j+1}
    let vector: Vec<Complex64> = (0..=n)
        .map(|j| {
            let m = DMatrix::from_fn(kappa, kappa, |r, c| {
                if r + 1 < kappa {
                    zeta[c].conj().powu(r as u32)
                } else {
                    zeta[c].powu(j as u32 + 1)
                }
            });
            m.determinant()
        })
        .collect();

    let mep = appendix_b_build(n, k);
    let residual = template_residual(&mep, &lambda, &vector);
    let is_real = sorted.iter().all(|&m| sorted.binary_search(&((order - m) % order)).is_ok());
    Ok(ClosedFormPair { choice: sorted, lambda, vector, residual, is_real })
}

/// Every closed-form pair, one per choice of roots.
pub fn appendix_b_all(n: usize, k: usize) -> Result<Vec<ClosedFormPair>> {
    unity_choices(n, k).iter().map(|c| appendix_b_closed_form(n, k, c)).collect()
}

/// Smallest distance between the eigenvalue vectors of two pairs; the
/// eigenvalues are already scaled to `lambda_1 = 1`.
pub fn min_separation(pairs: &[ClosedFormPair]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in pairs.iter().enumerate() {
        for q in &pairs[a + 1..] {
            let d = p.lambda.iter().zip(&q.lambda).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            best = best.min(d);
        }
    }
    best
}
