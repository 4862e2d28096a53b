//! Determinantal bilinear forms built from `k` interval inner products.
//!
//! For rank-one symmetric tensors the `k`-fold form is
//! `<p^(k), q^(k)> = det( <p, x^r q>_j )` with rows `r = 0..k-1` and columns
//! `j = 1..k`; the `j`-th deleted form drops column `j` and the last row. Tensors
//! are never expanded; every form acts on the univariate representatives.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{JopError, Result};
use crate::measure::{IntervalMeasure, MomentCache, MomentTable};
use crate::poly::Polynomial;

pub const MAX_K: usize = 6;

/// `k` inner products on ordered, pairwise disjoint intervals.
#[derive(Debug, Clone)]
pub struct InnerProductFamily {
    tables: Vec<Arc<MomentTable>>,
    n_max: usize,
    sign: f64,
}

/// Moment order needed to support polynomials of degree `n_max`.
pub fn required_moments(n_max: usize, k: usize) -> usize {
    2 * (n_max + k) + 8
}

impl InnerProductFamily {
    /// Builds the family, ordering the measures left to right and computing
    /// (cached) moment tables up to `2(n_max + k) + 8`.
    pub fn new(measures: Vec<IntervalMeasure>, n_max: usize) -> Result<Self> {
        let k = measures.len();
        let count = required_moments(n_max, k);
        let mut measures = measures;
        measures.sort_by(|a, b| a.lower.total_cmp(&b.lower));
        check_layout(&measures)?;
        let tables = measures.iter().map(|m| MomentCache::global().get(m, count)).collect::<Result<Vec<_>>>()?;
        Self::from_tables(tables, n_max)
    }

    pub fn from_tables(mut tables: Vec<Arc<MomentTable>>, n_max: usize) -> Result<Self> {
        let k = tables.len();
        if !(2..=MAX_K).contains(&k) {
            return Err(JopError::InvalidConfig(format!("need between 2 and {MAX_K} inner products, got {k}")));
        }
        tables.sort_by(|a, b| a.measure.lower.total_cmp(&b.measure.lower));
        let measures: Vec<IntervalMeasure> = tables.iter().map(|t| t.measure.clone()).collect();
        check_layout(&measures)?;
        let needed = 2 * (n_max + k);
        if let Some(t) = tables.iter().find(|t| t.max_order() < needed) {
            return Err(JopError::InsufficientMoments { needed, available: t.max_order() });
        }
        let mut fam = InnerProductFamily { tables, n_max, sign: 1.0 };
        let one = Polynomial::constant(1.0);
        let raw = fam.raw_rank_one(&one, &one)?;
        fam.sign = if raw < 0.0 { -1.0 } else { 1.0 };
        Ok(fam)
    }

    pub fn k(&self) -> usize {
        self.tables.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Sign applied to the `k`-fold form so that it is positive at `p = 1`.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn tables(&self) -> &[Arc<MomentTable>] {
        &self.tables
    }

    /// Table of the `j`-th inner product, `j` counted from 1.
    pub fn table(&self, j: usize) -> Result<&MomentTable> {
        self.check_index(j)?;
        Ok(&self.tables[j - 1])
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.tables.iter().map(|t| (t.measure.lower, t.measure.upper)).collect()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.k() {
            return Err(JopError::IndexOutOfRange { index: j, len: self.k() });
        }
        Ok(())
    }

    /// `<p, q>_j`, `j` counted from 1.
    pub fn inner(&self, j: usize, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        Ok(self.table(j)?.nodal_pairings(p, q, 1)?[0])
    }

    /// The `rows x k` matrix with entry `(r, j) = <p, x^r q>_{j+1}`, summed on
    /// the certified rules rather than through the moments.
    pub fn pairing_matrix(&self, p: &Polynomial, q: &Polynomial, rows: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, self.k());
        for (j, t) in self.tables.iter().enumerate() {
            for (r, v) in t.nodal_pairings(p, q, rows)?.into_iter().enumerate() {
                m[(r, j)] = v;
            }
        }
        Ok(m)
    }

    /// Same matrix from the moment sums `sum p_a q_b m_j(a + b + r)`.
    pub fn moment_pairing_matrix(&self, p: &Polynomial, q: &Polynomial, rows: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, self.k());
        for r in 0..rows {
            let xq = q.shift(r);
            for (j, t) in self.tables.iter().enumerate() {
                m[(r, j)] = t.inner_product(p, &xq)?;
            }
        }
        Ok(m)
    }

    fn raw_rank_one(&self, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        Ok(self.pairing_matrix(p, q, self.k())?.determinant())
    }

    /// `<p^(k), q^(k)>`, sign-normalized.
    pub fn rank_one_form(&self, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        Ok(self.sign * self.raw_rank_one(p, q)?)
    }

    /// `<p^(k-1), q^(k-1)>_(j)`: column `j` (from 1) omitted.
    pub fn deleted_form(&self, j: usize, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        self.check_index(j)?;
        let m = self.pairing_matrix(p, q, self.k() - 1)?;
        Ok(m.remove_column(j - 1).determinant())
    }

    /// All `k` deleted forms at once.
    pub fn deleted_forms(&self, p: &Polynomial, q: &Polynomial) -> Result<Vec<f64>> {
        let m = self.pairing_matrix(p, q, self.k() - 1)?;
        Ok((0..self.k()).map(|j| m.clone().remove_column(j).determinant()).collect())
    }

    /// Product of the natural scales of `p` and `q` under the forms: the value
    /// `|<p^(k), q^(k)>|` can reach, used to turn residuals into relative numbers.
    pub fn rank_one_scale(&self, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        Ok((self.rank_one_form(p, p)?.abs() * self.rank_one_form(q, q)?.abs()).sqrt())
    }

    pub fn deleted_scale(&self, j: usize, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        Ok((self.deleted_form(j, p, p)?.abs() * self.deleted_form(j, q, q)?.abs()).sqrt())
    }
}

fn check_layout(measures: &[IntervalMeasure]) -> Result<()> {
    for pair in measures.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.upper > b.lower {
            return Err(JopError::OverlappingIntervals { left: (a.lower, a.upper), right: (b.lower, b.upper) });
        }
    }
    Ok(())
}

/// Direct tensor-product quadrature of the `k`-fold (or, with `deleted = Some(j)`,
/// the `(k-1)`-fold) integral with the Vandermonde factor. Independent of the
/// determinant route; intended for cross-checks at `k <= 3`.
pub fn vandermonde_oracle(
    fam: &InnerProductFamily,
    p: &Polynomial,
    q: &Polynomial,
    deleted: Option<usize>,
) -> Result<f64> {
    let k = fam.k();
    if k > 3 {
        return Err(JopError::UnsupportedDimension(k));
    }
    if let Some(j) = deleted {
        fam.check_index(j)?;
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = fam
        .tables()
        .iter()
        .enumerate()
        .filter(|(i, _)| deleted != Some(i + 1))
        .map(|(_, t)| {
            let vals: Vec<f64> =
                t.rule.nodes.iter().zip(&t.rule.weights).map(|(&x, &w)| w * p.evaluate(x) * q.evaluate(x)).collect();
            (t.rule.nodes.clone(), vals)
        })
        .collect();

    fn recurse(axes: &[(Vec<f64>, Vec<f64>)], chosen: &mut Vec<f64>, acc: f64) -> f64 {
        let Some(((nodes, vals), rest)) = axes.split_first() else {
            return acc;
        };
        let mut total = 0.0;
        for (&x, &v) in nodes.iter().zip(vals) {
            let vandermonde: f64 = chosen.iter().map(|&y| x - y).product();
            chosen.push(x);
            total += recurse(rest, chosen, acc * v * vandermonde);
            chosen.pop();
        }
        total
    }

    let raw = recurse(&axes, &mut Vec::with_capacity(k), 1.0);
    Ok(if deleted.is_none() { fam.sign() * raw } else { raw })
}

#[derive(Debug, Clone)]
pub struct DefinitenessReport {
    pub trials: usize,
    /// Smallest `<p^(k), p^(k)> / |p|^{2k}` observed.
    pub min_full: f64,
    /// Per deleted form, smallest `|<p^(k-1), p^(k-1)>_(j)| / |p|^{2(k-1)}`.
    pub min_deleted: Vec<f64>,
    pub full_positive: bool,
    /// Every deleted form kept one sign across all trials.
    pub deleted_sign_consistent: bool,
}

/// Samples random polynomials of degree `<= degree` and reports how definite
/// the `k`-fold and deleted forms look on them.
pub fn definiteness_check(
    fam: &InnerProductFamily,
    trials: usize,
    degree: usize,
    seed: u64,
) -> Result<DefinitenessReport> {
    let k = fam.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_full = f64::INFINITY;
    let mut min_deleted = vec![f64::INFINITY; k];
    let mut signs: Vec<Option<f64>> = vec![None; k];
    let mut full_positive = true;
    let mut consistent = true;
    for _ in 0..trials {
        let p = Polynomial::new((0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect());
        if p.is_zero() {
            continue;
        }
        let norm = p.norm();
        let full = fam.rank_one_form(&p, &p)? / norm.powi(2 * k as i32);
        full_positive &= full > 0.0;
        min_full = min_full.min(full);
        for (j, d) in fam.deleted_forms(&p, &p)?.into_iter().enumerate() {
            let rel = d / norm.powi(2 * (k as i32 - 1));
            min_deleted[j] = min_deleted[j].min(rel.abs());
            match signs[j] {
                None => signs[j] = Some(rel.signum()),
                Some(s) => consistent &= s == rel.signum() && rel != 0.0,
            }
        }
    }
    Ok(DefinitenessReport { trials, min_full, min_deleted, full_positive, deleted_sign_consistent: consistent })
}
