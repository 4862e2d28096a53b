//! Heun operator on `V_n` and the Lamé species built from it.

use nalgebra::DMatrix;

use super::ince::fitted_residual;
use super::jet::Jet;
use super::{guarded_samples, operator_eigenpairs, system_from_vectors, SecondOrderOperator};
use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::measure::IntervalMeasure;
use crate::mep::{self, JointSystem};
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct HeunSpec {
    pub e: [f64; 3],
    pub a: [f64; 3],
    pub n: usize,
}

impl HeunSpec {
    pub fn new(e: [f64; 3], a: [f64; 3], n: usize) -> Result<Self> {
        if !(e[0] < e[1] && e[1] < e[2]) || e.iter().any(|x| !x.is_finite()) {
            return Err(JopError::InvalidConfig(format!("Heun roots {e:?} are not strictly increasing")));
        }
        if a.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(JopError::InvalidConfig(format!("Heun exponents {a:?} must be positive")));
        }
        Ok(HeunSpec { e, a, n })
    }

    pub fn q(&self) -> Polynomial {
        Polynomial::from_roots(&self.e, 1.0)
    }

    /// `sum_i a_i prod_{j != i} (x - e_j)`.
    pub fn p(&self) -> Polynomial {
        (0..3).fold(Polynomial::zero(), |acc, i| {
            let others: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| self.e[j]).collect();
            &acc + &Polynomial::from_roots(&others, self.a[i])
        })
    }

    /// `P(e_i) / Q'(e_i)`, which reproduces `a`.
    pub fn recovered_a(&self) -> [f64; 3] {
        let (p, dq) = (self.p(), self.q().derivative());
        self.e.map(|x| p.evaluate(x) / dq.evaluate(x))
    }

    pub fn accessory(&self) -> f64 {
        let n = self.n as f64;
        n * (n - 1.0 + self.a.iter().sum::<f64>())
    }

    pub fn operator(&self) -> SecondOrderOperator {
        SecondOrderOperator { q: self.q(), p: self.p(), r: Polynomial::monomial(1, -self.accessory()) }
    }

    /// Intervals `(e_1, e_2)`, `(e_2, e_3)` with weight `prod |x - e_i|^{a_i - 1}`.
    pub fn family(&self, n_max: usize) -> Result<InnerProductFamily> {
        let measures = (1..3)
            .map(|j| {
                self.e
                    .iter()
                    .zip(&self.a)
                    .fold(IntervalMeasure::uniform(self.e[j - 1], self.e[j]), |m, (&x, &a)| m.with_factor(x, a - 1.0))
            })
            .collect();
        InnerProductFamily::new(measures, n_max)
    }
}

/// Matrix of `L_n` on the monomials of `V_n`.
pub fn heun_matrix(spec: &HeunSpec) -> DMatrix<f64> {
    spec.operator().matrix(spec.n + 1, spec.n + 1)
}

#[derive(Debug, Clone)]
pub struct HeunSolution {
    pub system: JointSystem,
    /// Operator eigenvalue of each member, in the system's order.
    pub eigenvalues: Vec<f64>,
    /// Largest coefficient difference to the pencil solution after ordering.
    pub pencil_difference: f64,
}

/// Dense eigen-decomposition of `L_n`, packaged as a joint system and compared
/// with the two-product pencil.
pub fn heun_solve(spec: &HeunSpec) -> Result<HeunSolution> {
    let op = heun_matrix(spec);
    let fam = spec.family(spec.n)?;
    let pairs = operator_eigenpairs(&op)?;
    let system = system_from_vectors(&fam, spec.n, pairs.iter().map(|(_, v)| v.clone()).collect())?;
    let eigenvalues = system
        .pairs
        .iter()
        .map(|p| {
            let c = nalgebra::DVector::from_column_slice(&p.vector.padded(spec.n + 1));
            c.dot(&(&op * &c)) / c.dot(&c)
        })
        .collect();
    let pencil = mep::solve_k2(&mep::build_conditioned(&fam, spec.n)?)?;
    let pencil_difference = max_difference(&system, &pencil);
    Ok(HeunSolution { system, eigenvalues, pencil_difference })
}

pub(crate) fn max_difference(a: &JointSystem, b: &JointSystem) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.pairs
        .iter()
        .zip(&b.pairs)
        .flat_map(|(p, q)| {
            let len = p.vector.coeffs().len().max(q.vector.coeffs().len());
            p.vector.padded(len).into_iter().zip(q.vector.padded(len)).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct LameEntry {
    pub epsilon: [u8; 3],
    /// `1 + eps_1 + eps_2 + eps_3`.
    pub species: usize,
    /// Polynomial part `p` of `prod (x - e_i)^{eps_i/2} p(x)`.
    pub polynomial: Polynomial,
    /// Spectral parameter of the Lamé equation, fitted on samples.
    pub lambda: f64,
    /// Scaled residual of the Lamé equation at the samples.
    pub ode_residual: f64,
}

#[derive(Debug, Clone)]
pub struct LameCatalog {
    pub nu: usize,
    pub entries: Vec<LameEntry>,
}

impl LameCatalog {
    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn species_count(&self, species: usize) -> usize {
        self.entries.iter().filter(|e| e.species == species).count()
    }
}

/// Every Lamé polynomial of degree `nu`: for each pattern `eps` of the parity
/// of `nu`, the Heun system with `a_i = eps_i + 1/2` at degree
/// `(nu - |eps|) / 2`.
pub fn lame_catalog(e: [f64; 3], nu: usize) -> Result<LameCatalog> {
    let mut entries = Vec::new();
    for mask in 0..8u8 {
        let eps = [mask & 1, (mask >> 1) & 1, (mask >> 2) & 1];
        let weight: usize = eps.iter().map(|&x| x as usize).sum();
        if weight > nu || !(nu - weight).is_multiple_of(2) {
            continue;
        }
        let n = (nu - weight) / 2;
        let spec = HeunSpec::new(e, eps.map(|x| x as f64 + 0.5), n)?;
        for (_, p) in operator_eigenpairs(&heun_matrix(&spec))? {
            let (lambda, ode_residual) = lame_residual(e, nu, eps, &p);
            entries.push(LameEntry { epsilon: eps, species: 1 + weight, polynomial: p, lambda, ode_residual });
        }
    }
    Ok(LameCatalog { nu, entries })
}

/// Fits `lambda` in `Q y'' + Q' y' / 2 - (nu (nu + 1) x + lambda) y / 4 = 0` and
/// returns it with the scaled residual.
fn lame_residual(e: [f64; 3], nu: usize, eps: [u8; 3], p: &Polynomial) -> (f64, f64) {
    let q = Polynomial::from_roots(&e, 1.0);
    let dq = q.derivative();
    let c = (nu * (nu + 1)) as f64 / 4.0;
    let mut samples = guarded_samples(e[0], e[1], 12);
    samples.extend(guarded_samples(e[1], e[2], 12));
    let rows: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&x| {
            let t = Jet::variable(x);
            let y = (0..3).fold(t.poly(p), |acc, i| acc * (t - Jet::constant(e[i])).abs_powf(eps[i] as f64 / 2.0));
            let (qx, dqx) = (q.evaluate(x), dq.evaluate(x));
            let r = qx * y.d2 + 0.5 * dqx * y.d1 - c * x * y.v;
            let scale = (qx * y.d2).abs() + (0.5 * dqx * y.d1).abs() + (c * x * y.v).abs();
            (r, y.v, scale)
        })
        .collect();
    let num: f64 = rows.iter().map(|(r, y, _)| r * y).sum();
    let den: f64 = rows.iter().map(|(_, y, _)| y * y).sum();
    (4.0 * num / den, fitted_residual(&rows))
}
