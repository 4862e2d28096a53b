//! Well-conditioned coordinates for the moment problem.
//!
//! The monomial Hankel matrices lose roughly two digits per degree. The solver
//! instead works with polynomials `P_0, P_1, ...` orthonormal for the sum of
//! the `k` measures, built on the union of the certified quadrature rules. The
//! matrices `<P_a, P_b>_j` differ from the Hankel ones by a row transform shared
//! by all `j` and a column change of basis, so eigenvalues are unchanged and
//! eigenvectors map back through the coefficient matrix of the `P_b`.

use nalgebra::{DMatrix, DVector};

use super::{MepSource, RectMEP};
use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;

/// Nodal values (rows: basis index, columns: nodes) and monomial coefficients
/// (column `b` holds `P_b`) of the first `count` orthonormal polynomials.
fn orthonormal_basis(nodes: &[f64], weights: &[f64], count: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let len = nodes.len();
    let mut values = DMatrix::zeros(count, len);
    let mut coeffs = DMatrix::zeros(count, count);
    let dot = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        a.iter().zip(b.iter()).zip(weights).map(|((x, y), w)| w * x * y).sum()
    };
    for b in 0..count {
        let (mut val, mut coef): (DVector<f64>, DVector<f64>) = if b == 0 {
            let mut c = DVector::zeros(count);
            c[0] = 1.0;
            (DVector::from_element(len, 1.0), c)
        } else {
            let prev_v = values.row(b - 1).transpose();
            let prev_c = coeffs.column(b - 1).into_owned();
            let v = DVector::from_fn(len, |i, _| nodes[i] * prev_v[i]);
            let mut c = DVector::zeros(count);
            for s in 0..count - 1 {
                c[s + 1] = prev_c[s];
            }
            (v, c)
        };
        // two Gram-Schmidt passes against all earlier members
        for _ in 0..2 {
            for a in 0..b {
                let pa = values.row(a).transpose();
                let h = dot(&val, &pa);
                val -= &pa * h;
                coef -= coeffs.column(a) * h;
            }
        }
        let norm = dot(&val, &val).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(JopError::ConvergenceFailure(format!("orthonormal basis breaks down at degree {b}")));
        }
        values.row_mut(b).copy_from(&(val / norm).transpose());
        coeffs.column_mut(b).copy_from(&(coef / norm));
    }
    Ok((values, coeffs))
}

/// The problem of [`super::build`] expressed in orthonormal coordinates.
pub fn build_conditioned(fam: &InnerProductFamily, n: usize) -> Result<RectMEP> {
    let k = fam.k();
    if n > fam.n_max() {
        return Err(JopError::InsufficientMoments { needed: 2 * (n + k), available: 2 * (fam.n_max() + k) });
    }
    let rows = n + k - 1;
    let cols = n + 1;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut spans = Vec::with_capacity(k);
    for t in fam.tables() {
        let start = nodes.len();
        nodes.extend_from_slice(&t.rule.nodes);
        weights.extend_from_slice(&t.rule.weights);
        spans.push(start..nodes.len());
    }
    let (values, coeffs) = orthonormal_basis(&nodes, &weights, rows)?;
    let a = spans
        .iter()
        .map(|span| {
            DMatrix::from_fn(rows, cols, |i, s| {
                span.clone().map(|q| weights[q] * values[(i, q)] * values[(s, q)]).sum()
            })
        })
        .collect();
    let basis = coeffs.view((0, 0), (cols, cols)).into_owned();
    Ok(RectMEP { k, n, a, source: MepSource::Family { intervals: fam.intervals() }, basis: Some(basis) })
}
