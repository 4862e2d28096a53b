//! Quasi-exactly solvable sextic oscillator: the products on the two half
//! lines with weight `|x|^{l + 1/2} exp(-x^2 / 2)`.

use super::ince::fitted_residual;
use super::jet::Jet;
use super::SecondOrderOperator;
use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::measure::IntervalMeasure;
use crate::mep::{self, JointSystem, NewtonOptions};
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct SexticSpec {
    pub ell: f64,
    pub n: usize,
}

impl SexticSpec {
    pub fn new(ell: f64, n: usize) -> Result<Self> {
        if !(ell > -1.0) || !ell.is_finite() {
            return Err(JopError::InvalidConfig(format!("sextic parameter l = {ell} must exceed -1")));
        }
        Ok(SexticSpec { ell, n })
    }

    pub fn nu(&self) -> f64 {
        4.0 * self.n as f64 + 5.0 + 2.0 * self.ell
    }

    pub fn operator(&self) -> SecondOrderOperator {
        SecondOrderOperator {
            q: Polynomial::monomial(1, -2.0),
            p: Polynomial::new(vec![-2.0 * self.ell - 3.0, 0.0, 2.0]),
            r: Polynomial::monomial(1, -2.0 * self.n as f64),
        }
    }

    pub fn family(&self, n_max: usize) -> Result<InnerProductFamily> {
        let weight = |m: IntervalMeasure| m.with_factor(0.0, self.ell + 0.5).with_gauss();
        InnerProductFamily::new(
            vec![
                weight(IntervalMeasure::uniform(f64::NEG_INFINITY, 0.0)),
                weight(IntervalMeasure::uniform(0.0, f64::INFINITY)),
            ],
            n_max,
        )
    }

    pub fn solve(&self, opts: &NewtonOptions) -> Result<JointSystem> {
        mep::solve(&self.family(self.n)?, self.n, opts)
    }
}

/// Equispaced radii in `[0.3, 2.5]`.
pub fn default_radii(count: usize) -> Vec<f64> {
    (0..count).map(|i| 0.3 + 2.2 * i as f64 / (count - 1).max(1) as f64).collect()
}

/// Scaled residual of `H psi = mu psi` for `psi = r^{l+1} exp(-r^4/4) E(r^2)`
/// and `H = -d^2 + r^6 - nu r^2 + l (l + 1) / r^2`; `mu` is fitted.
pub fn schrodinger_residual(ell: f64, nu: f64, e: &Polynomial, samples: &[f64]) -> f64 {
    let rows: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&r| {
            let t = Jet::variable(r);
            let psi = t.abs_powf(ell + 1.0) * t.powi(4).scale(-0.25).exp() * (t * t).poly(e);
            let potential = r.powi(6) - nu * r * r + ell * (ell + 1.0) / (r * r);
            let h = -psi.d2 + potential * psi.v;
            let scale = psi.d2.abs()
                + (r.powi(6) * psi.v).abs()
                + (nu * r * r * psi.v).abs()
                + (ell * (ell + 1.0) / (r * r) * psi.v).abs();
            (h, psi.v, scale)
        })
        .collect();
    fitted_residual(&rows)
}

/// Largest sextic residual over the members of `system`.
pub fn sextic_check(spec: &SexticSpec, system: &JointSystem, samples: &[f64]) -> f64 {
    system.pairs.iter().map(|p| schrodinger_residual(spec.ell, spec.nu(), &p.vector, samples)).fold(0.0, f64::max)
}
