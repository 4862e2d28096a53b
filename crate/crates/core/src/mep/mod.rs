//! Symmetric rectangular multiparameter eigenvalue problems `sum_j lambda_j A_j v = 0`.
//!
//! For an inner-product family the `A_j` are the `(n+k-1) x (n+1)` Hankel
//! moment matrices, so `A_j v` lists `<x^i, v>_j` for `i = 0..n+k-2`. The
//! eigenvectors of this problem are exactly the jointly orthogonal systems.

mod appendix_b;
mod basis;
mod newton;

pub use appendix_b::{
    appendix_b_all, appendix_b_build, appendix_b_closed_form, min_separation, symmetrize, unity_choices, ClosedFormPair,
};
pub use basis::build_conditioned;
pub use newton::{
    compositions, newton_refine, refine_seed, seed_from_distribution, solve, solve_newton, NewtonOptions,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::poly::Polynomial;

/// Angle below which two eigenvalue rays are treated as the same eigenvalue.
pub const TAU_DUP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum MepSource {
    /// Moment matrices of a family on the listed intervals.
    Family {
        intervals: Vec<(f64, f64)>,
    },
    AppendixB,
    Custom,
}

#[derive(Debug, Clone)]
pub struct RectMEP {
    pub k: usize,
    pub n: usize,
    pub a: Vec<DMatrix<f64>>,
    pub source: MepSource,
    /// Column `b` holds the monomial coefficients of the `b`-th coordinate
    /// polynomial; `None` means coordinates are monomial coefficients.
    pub basis: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub vector: Polynomial,
    pub lambda: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct JointSystem {
    pub n: usize,
    pub k: usize,
    pub pairs: Vec<Eigenpair>,
    /// Smallest angle between two eigenvalue rays.
    pub min_angle: f64,
    /// Per deleted form `j`, the matrix of `|D_j(u, v)| / sqrt(D_j(u,u) D_j(v,v))`
    /// over all pairs (diagonal set to zero). Empty when no family is attached.
    pub orthogonality: Vec<DMatrix<f64>>,
    /// Seeds whose Newton iteration failed.
    pub seed_failures: usize,
}

/// Binomial coefficient `C(n, r)`.
pub fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Expected size `C(n+k-1, k-1)` of a jointly orthogonal system.
pub fn expected_count(n: usize, k: usize) -> usize {
    binomial(n + k - 1, k - 1)
}

/// Unit length, first nonzero component positive.
pub fn normalize_lambda(lambda: &[f64]) -> Vec<f64> {
    let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return lambda.to_vec();
    }
    let first = lambda.iter().copied().find(|&x| x != 0.0).unwrap_or(1.0);
    let s = first.signum() / norm;
    lambda.iter().map(|x| x * s).collect()
}

/// Angle between the lines spanned by `a` and `b`, accurate for tiny angles.
pub fn ray_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    let chord = a.iter().zip(b).map(|(x, y)| (x / na - s * y / nb).powi(2)).sum::<f64>().sqrt();
    2.0 * (chord / 2.0).min(1.0).asin()
}

impl RectMEP {
    pub fn custom(a: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = a.len();
        if k < 2 {
            return Err(JopError::InvalidConfig(format!("need at least 2 matrices, got {k}")));
        }
        let cols = a[0].ncols();
        if cols == 0 {
            return Err(JopError::InvalidConfig("matrices have no columns".into()));
        }
        let rows = cols + k - 2;
        if a.iter().any(|m| m.nrows() != rows || m.ncols() != cols) {
            return Err(JopError::InvalidConfig(format!("every matrix must be {rows} x {cols} for k = {k}")));
        }
        Ok(RectMEP { k, n: cols - 1, a, source: MepSource::Custom, basis: None })
    }

    pub fn rows(&self) -> usize {
        self.n + self.k - 1
    }

    pub fn cols(&self) -> usize {
        self.n + 1
    }

    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        match &self.source {
            MepSource::Family { intervals } => Some(intervals),
            _ => None,
        }
    }

    pub fn combined(&self, lambda: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        for (l, a) in lambda.iter().zip(&self.a) {
            m += a * *l;
        }
        m
    }

    /// `max_j |A_j|` in the Frobenius norm.
    pub fn scale(&self) -> f64 {
        self.a.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// `|sum lambda_j A_j v| / (|v| |lambda| max_j |A_j|)`.
    pub fn residual(&self, v: &[f64], lambda: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        let lnorm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        let denom = v.norm() * lnorm * self.scale();
        if denom == 0.0 {
            return f64::INFINITY;
        }
        (self.combined(lambda) * v).norm() / denom
    }

    pub fn is_hankel(&self, tol: f64) -> bool {
        self.a.iter().all(|m| {
            (0..m.nrows()).all(|i| {
                (0..m.ncols()).all(|s| {
                    let d = i + s;
                    let (i0, s0) = if d < m.ncols() { (0, d) } else { (d - m.ncols() + 1, m.ncols() - 1) };
                    (m[(i, s)] - m[(i0, s0)]).abs() <= tol * (1.0 + m[(i0, s0)].abs())
                })
            })
        })
    }

    /// Square block of rows `r..r+n` of `A_j` (both 0-based).
    pub fn block(&self, j: usize, r: usize) -> DMatrix<f64> {
        self.a[j].rows(r, self.cols()).into_owned()
    }

    /// Every square block `A_j[r..r+n, :]`, `r < k-1`, is symmetric.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.k).all(|j| {
            (0..self.k - 1).all(|r| {
                let b = self.block(j, r);
                (&b - b.transpose()).norm() <= tol * (1.0 + b.norm())
            })
        })
    }

    /// The vector-valued determinant: alternating-sign maximal minors of the
    /// `(k-1) x k` matrix `(u^T A_{j, r} v)`.
    pub fn mu_vector(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        let mut m = DMatrix::zeros(self.k - 1, self.k);
        for r in 0..self.k - 1 {
            for j in 0..self.k {
                m[(r, j)] = u.dot(&(self.block(j, r) * &v));
            }
        }
        (0..self.k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m.clone().remove_column(j).determinant()
            })
            .collect()
    }

    /// Solver coordinates of a polynomial of degree `<= n`.
    pub fn to_coords(&self, v: &Polynomial) -> DVector<f64> {
        let mono = DVector::from_vec(v.padded(self.cols()));
        match &self.basis {
            None => mono,
            Some(t) => t.solve_upper_triangular(&mono).unwrap_or(mono),
        }
    }

    pub fn from_coords(&self, c: &[f64]) -> Polynomial {
        match &self.basis {
            None => Polynomial::new(c.to_vec()),
            Some(t) => Polynomial::new((t * DVector::from_column_slice(c)).as_slice().to_vec()),
        }
    }

    /// Pair from solver coordinates: monic vector, normalized eigenvalue and
    /// the residual in these coordinates.
    pub fn eigenpair(&self, c: &[f64], lambda: &[f64]) -> Eigenpair {
        let residual = self.residual(c, lambda);
        let vector = monic(self.from_coords(c));
        Eigenpair { vector, lambda: normalize_lambda(lambda), residual }
    }
}

fn monic(p: Polynomial) -> Polynomial {
    match p.normalize() {
        Ok(q) => q,
        Err(_) => p,
    }
}

/// Moment matrices `A_j[i, s] = m_j(i + s)`, `i = 0..n+k-2`, `s = 0..n`.
pub fn build(fam: &InnerProductFamily, n: usize) -> Result<RectMEP> {
    let k = fam.k();
    if n > fam.n_max() {
        return Err(JopError::InsufficientMoments { needed: 2 * (n + k), available: 2 * (fam.n_max() + k) });
    }
    let rows = n + k - 1;
    let cols = n + 1;
    let a = fam
        .tables()
        .iter()
        .map(|t| {
            let mut m = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                for s in 0..cols {
                    m[(i, s)] = t.moment(i + s)?;
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RectMEP { k, n, a, source: MepSource::Family { intervals: fam.intervals() }, basis: None })
}

/// `((-1)^{j-1} D_j(v, v))_j`, normalized.
pub fn eigenvalue_formula(fam: &InnerProductFamily, v: &Polynomial) -> Result<Vec<f64>> {
    if v.is_zero() {
        return Err(JopError::DegenerateVector);
    }
    let d = fam.deleted_forms(v, v)?;
    let lambda: Vec<f64> = d.iter().enumerate().map(|(j, x)| if j % 2 == 0 { *x } else { -x }).collect();
    if lambda.iter().all(|&x| x == 0.0) {
        return Err(JopError::DegenerateVector);
    }
    Ok(normalize_lambda(&lambda))
}

/// Pencil path for `k = 2`. With `S = A_1 + A_2 = L L^T` and `C = L^{-1} A_1 L^{-T}`,
/// an eigenvalue `theta` of `C` gives `(1 - theta) A_1 v - theta A_2 v = 0`; this is
/// `A_1 v = mu A_2 v` with `mu = theta / (1 - theta)` and `lambda ~ (1, -mu)`.
pub fn solve_k2(mep: &RectMEP) -> Result<JointSystem> {
    if mep.k != 2 {
        return Err(JopError::NotK2(mep.k));
    }
    let sum = &mep.a[0] + &mep.a[1];
    let chol = sum.cholesky().ok_or(JopError::CholeskyFailure)?;
    let l = chol.l();
    let x = l.solve_lower_triangular(&mep.a[0]).ok_or(JopError::CholeskyFailure)?;
    let c = l.solve_lower_triangular(&x.transpose()).ok_or(JopError::CholeskyFailure)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let lt = l.transpose();
    let pairs = (0..mep.cols())
        .map(|i| {
            let theta = eig.eigenvalues[i];
            let y = eig.eigenvectors.column(i).into_owned();
            let v = lt.solve_upper_triangular(&y).unwrap_or(y);
            mep.eigenpair(v.as_slice(), &[1.0 - theta, -theta])
        })
        .collect();
    Ok(JointSystem::assemble(mep, pairs, 0))
}

/// Real roots inside each interval (interior, with a small guard).
pub fn root_signature(v: &Polynomial, intervals: &[(f64, f64)]) -> Vec<usize> {
    let roots = match v.roots() {
        Ok(r) => r,
        Err(_) => return vec![0; intervals.len()],
    };
    intervals
        .iter()
        .map(|&(lo, hi)| {
            roots
                .iter()
                .filter(|r| r.im.abs() <= 1e-7 * (1.0 + r.re.abs()) && r.re > lo && r.re < hi)
                .map(|r| r.multiplicity)
                .sum()
        })
        .collect()
}

/// Sorts by root signature (most roots in the leftmost interval first), then
/// by coefficients.
pub fn canonical_order(pairs: &mut [Eigenpair], intervals: Option<&[(f64, f64)]>) {
    let key = |p: &Eigenpair| intervals.map(|iv| root_signature(&p.vector, iv)).unwrap_or_default();
    let mut keyed: Vec<(Vec<usize>, Eigenpair)> = pairs.iter().map(|p| (key(p), p.clone())).collect();
    keyed.sort_by(|(ka, a), (kb, b)| {
        kb.cmp(ka).then_with(|| {
            let n = a.vector.coeffs().len().max(b.vector.coeffs().len());
            let (ca, cb) = (a.vector.padded(n), b.vector.padded(n));
            ca.iter().zip(&cb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    for (slot, (_, p)) in pairs.iter_mut().zip(keyed) {
        *slot = p;
    }
}

impl JointSystem {
    pub fn assemble(mep: &RectMEP, mut pairs: Vec<Eigenpair>, seed_failures: usize) -> Self {
        canonical_order(&mut pairs, mep.intervals());
        let mut min_angle = f64::INFINITY;
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                min_angle = min_angle.min(ray_angle(&pairs[i].lambda, &pairs[j].lambda));
            }
        }
        JointSystem { n: mep.n, k: mep.k, pairs, min_angle, orthogonality: Vec::new(), seed_failures }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.pairs.len() == expected_count(self.n, self.k)
    }

    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    /// Fills the deleted-form orthogonality matrices.
    pub fn with_orthogonality(mut self, fam: &InnerProductFamily) -> Result<Self> {
        let n = self.pairs.len();
        let mut mats = vec![DMatrix::zeros(n, n); fam.k()];
        let diag: Vec<Vec<f64>> =
            self.pairs.iter().map(|p| fam.deleted_forms(&p.vector, &p.vector)).collect::<Result<_>>()?;
        for a in 0..n {
            for b in a + 1..n {
                let d = fam.deleted_forms(&self.pairs[a].vector, &self.pairs[b].vector)?;
                for j in 0..fam.k() {
                    let scale = (diag[a][j] * diag[b][j]).abs().sqrt();
                    let rel = if scale > 0.0 { d[j].abs() / scale } else { d[j].abs() };
                    mats[j][(a, b)] = rel;
                    mats[j][(b, a)] = rel;
                }
            }
        }
        self.orthogonality = mats;
        Ok(self)
    }

    pub fn max_orthogonality(&self) -> f64 {
        self.orthogonality.iter().map(|m| m.max()).fold(0.0, f64::max)
    }

    /// Largest angle between a pair's eigenvalue and the formula applied to its vector.
    pub fn max_formula_angle(&self, fam: &InnerProductFamily) -> Result<f64> {
        self.pairs
            .iter()
            .try_fold(0.0f64, |acc, p| Ok(acc.max(ray_angle(&p.lambda, &eigenvalue_formula(fam, &p.vector)?))))
    }
}

/// The `k x k` matrix `M(u, v)` with entries `<u, x^r v>_j` (rows `r < k-1`
/// taken from the blocks of `mep`, the last row from `fam`) and its `k` minors
/// with the last row and column `j` removed.
pub fn m_matrix_minors(
    mep: &RectMEP,
    fam: &InnerProductFamily,
    u: &Polynomial,
    v: &Polynomial,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let k = mep.k;
    let cols = mep.cols();
    if mep.basis.is_some() {
        return Err(JopError::InvalidConfig("M-matrix needs the monomial problem".into()));
    }
    if u.coeffs().len() > cols || v.coeffs().len() > cols {
        return Err(JopError::InvalidConfig(format!("vectors must have degree at most {}", mep.n)));
    }
    let uu = DVector::from_vec(u.padded(cols));
    let vv = DVector::from_vec(v.padded(cols));
    let mut m = DMatrix::zeros(k, k);
    for r in 0..k - 1 {
        for j in 0..k {
            m[(r, j)] = uu.dot(&(mep.block(j, r) * &vv));
        }
    }
    let xv = v.shift(k - 1);
    for j in 0..k {
        m[(k - 1, j)] = fam.inner(j + 1, u, &xv)?;
    }
    let head = m.rows(0, k - 1).into_owned();
    let minors = (0..k).map(|j| head.clone().remove_column(j).determinant()).collect();
    Ok((m, minors))
}

#[cfg(test)]
mod tests;
