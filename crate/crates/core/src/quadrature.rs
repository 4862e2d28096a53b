//! Gauss rules for the classical weight families used to build moment tables.
//!
//! Nodes come from the eigenvalues of the Jacobi (recurrence) matrix computed by
//! an implicit QL sweep on the tridiagonal form, polished by Newton steps on the
//! orthonormal recurrence. Weights use the Christoffel formula
//! `w_i = mu0 / sum_j p_j(x_i)^2`, which keeps small weights relatively accurate.

use statrs::function::gamma::ln_gamma;

use crate::error::{JopError, Result};

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Gauss–Jacobi rule for `(1 - x)^alpha (1 + x)^beta` on `[-1, 1]`.
    pub fn jacobi(order: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(JopError::NonIntegrable(format!("Jacobi exponents ({alpha}, {beta}) must exceed -1")));
        }
        let ab = alpha + beta;
        let mut diag = Vec::with_capacity(order);
        let mut off = Vec::with_capacity(order.saturating_sub(1));
        for i in 0..order {
            let fi = i as f64;
            let d = if i == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * fi + ab) * (2.0 * fi + ab + 2.0))
            };
            diag.push(d);
            if i + 1 < order {
                let j = fi + 1.0;
                let s = 2.0 * j + ab;
                let b2 = if i == 0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
                } else {
                    4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))
                };
                off.push(b2.sqrt());
            }
        }
        let log_mu0 =
            (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0) - ln_gamma(ab + 2.0);
        Self::from_recurrence(&diag, &off, log_mu0.exp())
    }

    /// Gauss–Legendre rule on `[-1, 1]`.
    pub fn legendre(order: usize) -> Result<Self> {
        Self::jacobi(order, 0.0, 0.0)
    }

    /// Generalized Gauss–Laguerre rule for `t^beta e^{-t}` on `[0, inf)`.
    pub fn laguerre(order: usize, beta: f64) -> Result<Self> {
        if beta <= -1.0 {
            return Err(JopError::NonIntegrable(format!("Laguerre exponent {beta} must exceed -1")));
        }
        let diag: Vec<f64> = (0..order).map(|i| 2.0 * i as f64 + beta + 1.0).collect();
        let off: Vec<f64> = (1..order).map(|i| (i as f64 * (i as f64 + beta)).sqrt()).collect();
        Self::from_recurrence(&diag, &off, ln_gamma(beta + 1.0).exp())
    }

    fn from_recurrence(diag: &[f64], off: &[f64], mu0: f64) -> Result<Self> {
        let order = diag.len();
        let mut nodes = tridiagonal_eigenvalues(diag, off)?;
        nodes.sort_by(f64::total_cmp);
        let mut weights = Vec::with_capacity(order);
        for x in nodes.iter_mut() {
            // two Newton steps on p_N, then Christoffel weight at the polished node
            for _ in 0..2 {
                let (pn, dpn, _) = orthonormal_values(diag, off, *x);
                if dpn != 0.0 {
                    let step = pn / dpn;
                    if step.is_finite() && step.abs() < 1e-6 * (1.0 + x.abs()) {
                        *x -= step;
                    }
                }
            }
            let (_, _, sum_sq) = orthonormal_values(diag, off, *x);
            weights.push(if sum_sq.is_finite() { mu0 / sum_sq } else { 0.0 });
        }
        Ok(GaussRule { nodes, weights })
    }
}

/// Evaluates `p_N(x)`, `p_N'(x)` and `sum_{j<N} p_j(x)^2` for the orthonormal
/// family with `p_0 = 1` (the `mu0` normalization is applied by the caller).
fn orthonormal_values(diag: &[f64], off: &[f64], x: f64) -> (f64, f64, f64) {
    let n = diag.len();
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut d_prev, mut d) = (0.0, 0.0);
    let mut sum_sq = 0.0;
    for j in 0..n {
        sum_sq += p * p;
        let b_prev = if j == 0 { 0.0 } else { off[j - 1] };
        // the final step uses a unit leading coefficient: only roots matter
        let b_next = if j + 1 < n { off[j] } else { 1.0 };
        let p_next = ((x - diag[j]) * p - b_prev * p_prev) / b_next;
        let d_next = (p + (x - diag[j]) * d - b_prev * d_prev) / b_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d, sum_sq)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// sub/super-diagonal `off` (implicit QL with Wilkinson shifts).
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e: Vec<f64> = off.iter().copied().chain(std::iter::once(0.0)).collect();
    e.truncate(n);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(JopError::ConvergenceFailure("tridiagonal QL sweep exceeded 100 iterations".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}
