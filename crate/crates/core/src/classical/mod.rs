//! Classical operators whose polynomial eigenvectors are jointly orthogonal:
//! Heun and Lamé, Whittaker–Hill and Ince, the sextic oscillator, and
//! Heine–Stieltjes. Each supplies an operator-side oracle for the solvers.

mod heine_stieltjes;
mod heun;
mod ince;
pub mod jet;
mod sextic;

pub use heine_stieltjes::{heine_stieltjes_solve, ode_residual, van_vleck, HeineStieltjesSolution, HeineStieltjesSpec};
pub use heun::{heun_matrix, heun_solve, lame_catalog, HeunSolution, HeunSpec, LameCatalog, LameEntry};
pub use ince::{
    default_angles, ince_catalog, ince_check, whittaker_hill_residual, InceEntry, IncePeriodicity, InceSpec,
};
pub use sextic::{default_radii, schrodinger_residual, sextic_check, SexticSpec};

use nalgebra::DMatrix;

use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::mep::{self, eigenvalue_formula, Eigenpair, JointSystem};
use crate::poly::Polynomial;

/// `q y'' + p y' + r y` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderOperator {
    pub q: Polynomial,
    pub p: Polynomial,
    pub r: Polynomial,
}

impl SecondOrderOperator {
    pub fn apply(&self, y: &Polynomial) -> Polynomial {
        let d1 = y.derivative();
        let d2 = d1.derivative();
        let a = &self.q * &d2;
        let b = &self.p * &d1;
        let c = &self.r * y;
        &(&a + &b) + &c
    }

    /// Matrix on monomials: column `b` holds the coefficients of `L x^b`,
    /// rows `0..rows`. Entries beyond `rows` are dropped.
    pub fn matrix(&self, cols: usize, rows: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows, cols);
        for b in 0..cols {
            let image = self.apply(&Polynomial::monomial(b, 1.0));
            for (a, &c) in image.coeffs().iter().enumerate().take(rows) {
                m[(a, b)] = c;
            }
        }
        m
    }
}

/// `|B - B^T| / |B|` for `B = G L`, where `G[a, c] = <x^a, x^c>_j` pairs the
/// domain `V_n` with the range of `opmatrix` (`rows >= cols`).
pub fn selfadjointness_residual(fam: &InnerProductFamily, opmatrix: &DMatrix<f64>, j: usize) -> Result<f64> {
    let (rows, cols) = opmatrix.shape();
    let g = fam.table(j)?.gram_matrix(cols, rows)?;
    let b = g * opmatrix;
    let norm = b.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok((&b - b.transpose()).norm() / norm)
}

/// `|L v - theta v| / max(|L v|, |theta| |v|)` with `theta` the least-squares
/// eigenvalue. Zero when `L v` vanishes.
pub fn eigen_residual(op: &SecondOrderOperator, v: &Polynomial) -> f64 {
    let image = op.apply(v);
    let lv = image.padded(v.coeffs().len().max(image.coeffs().len()));
    let c = v.padded(lv.len());
    let cc: f64 = c.iter().map(|x| x * x).sum();
    if cc == 0.0 {
        return 0.0;
    }
    let theta = lv.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / cc;
    let diff = lv.iter().zip(&c).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
    let lnorm = lv.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = lnorm.max(theta.abs() * cc.sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Chebyshev points of the first kind in `(lo, hi)` after trimming a guard band
/// of `1e-3 (hi - lo)` at both ends.
pub fn guarded_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let guard = 1e-3 * (hi - lo);
    let (a, b) = (lo + guard, hi - guard);
    (0..count)
        .map(|i| {
            let t = ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect()
}

/// Real eigenpairs of a dense operator matrix on `V_n`: eigenvalues from the
/// Schur form, eigenvectors as null vectors of `L - theta I`, made monic.
pub fn operator_eigenpairs(op: &DMatrix<f64>) -> Result<Vec<(f64, Polynomial)>> {
    let dim = op.nrows();
    let mut thetas: Vec<f64> = Vec::with_capacity(dim);
    let scale = op.norm().max(1.0);
    for z in op.clone().complex_eigenvalues().iter() {
        if z.im.abs() > 1e-9 * scale {
            return Err(JopError::ComplexEigenvalues { re: z.re, im: z.im });
        }
        thetas.push(z.re);
    }
    thetas.sort_by(f64::total_cmp);
    thetas
        .into_iter()
        .map(|theta| {
            let shifted = op - DMatrix::identity(dim, dim) * theta;
            let svd = shifted.svd(false, true);
            let vt = svd.v_t.ok_or_else(|| JopError::ConvergenceFailure("svd without vectors".into()))?;
            let smallest =
                svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
            let v = Polynomial::new(vt.row(smallest).iter().copied().collect());
            let v = v.normalize()?;
            // Rayleigh quotient on the final vector
            let c = nalgebra::DVector::from_column_slice(&v.padded(dim));
            let refined = c.dot(&(op * &c)) / c.dot(&c);
            Ok((refined, v))
        })
        .collect()
}

/// Packs operator eigenvectors as a joint system of `fam`, eigenvalues taken
/// from the forms and residuals from the moment problem.
pub(crate) fn system_from_vectors(fam: &InnerProductFamily, n: usize, vectors: Vec<Polynomial>) -> Result<JointSystem> {
    let m = mep::build(fam, n)?;
    let pairs = vectors
        .into_iter()
        .map(|v| {
            let lambda = eigenvalue_formula(fam, &v)?;
            let residual = m.residual(&v.padded(n + 1), &lambda);
            Ok(Eigenpair { vector: v, lambda, residual })
        })
        .collect::<Result<Vec<_>>>()?;
    JointSystem::assemble(&m, pairs, 0).with_orthogonality(fam)
}
