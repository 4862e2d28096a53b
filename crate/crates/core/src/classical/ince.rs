//! Whittaker–Hill operator and Ince polynomials: the two products on `(-1, 1)`
//! and `(1, inf)` with weight `exp(2 alpha x) |1 - x|^{a_1 - 1} |1 + x|^{a_2 - 1}`.

use super::jet::Jet;
use super::SecondOrderOperator;
use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::measure::IntervalMeasure;
use crate::mep::{self, JointSystem, NewtonOptions};
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct InceSpec {
    pub alpha: f64,
    /// `eps_i = a_i - 1/2`.
    pub eps: [u8; 2],
    pub n: usize,
}

impl InceSpec {
    pub fn new(alpha: f64, eps: [u8; 2], n: usize) -> Result<Self> {
        if !(alpha < 0.0) || !alpha.is_finite() {
            return Err(JopError::InvalidConfig(format!("Ince parameter alpha = {alpha} must be negative")));
        }
        if eps.iter().any(|&e| e > 1) {
            return Err(JopError::InvalidConfig(format!("Ince pattern {eps:?} must be 0 or 1")));
        }
        Ok(InceSpec { alpha, eps, n })
    }

    pub fn a(&self) -> [f64; 2] {
        self.eps.map(|e| e as f64 + 0.5)
    }

    pub fn nu(&self) -> usize {
        2 * self.n + 1 + (self.eps[0] + self.eps[1]) as usize
    }

    pub fn operator(&self) -> SecondOrderOperator {
        let [a1, a2] = self.a();
        let q = Polynomial::new(vec![-1.0, 0.0, 1.0]);
        let p = Polynomial::new(vec![a1 - a2 - 2.0 * self.alpha, a1 + a2, 2.0 * self.alpha]);
        let r = Polynomial::monomial(1, -2.0 * self.n as f64 * self.alpha);
        SecondOrderOperator { q, p, r }
    }

    pub fn family(&self, n_max: usize) -> Result<InnerProductFamily> {
        let [a1, a2] = self.a();
        let weight = |m: IntervalMeasure| {
            m.with_factor(1.0, a1 - 1.0).with_factor(-1.0, a2 - 1.0).with_exp_linear(2.0 * self.alpha)
        };
        InnerProductFamily::new(
            vec![weight(IntervalMeasure::uniform(-1.0, 1.0)), weight(IntervalMeasure::uniform(1.0, f64::INFINITY))],
            n_max,
        )
    }

    pub fn solve(&self, opts: &NewtonOptions) -> Result<JointSystem> {
        mep::solve(&self.family(self.n)?, self.n, opts)
    }

    /// The trigonometric polynomial `sin^eps1 cos^eps2 E(cos 2 theta)` as a jet.
    fn trig_part(&self, e: &Polynomial, theta: f64) -> Jet {
        let t = Jet::variable(theta);
        t.sin().powi(self.eps[0] as i32) * t.cos().powi(self.eps[1] as i32) * t.scale(2.0).cos().poly(e)
    }
}

/// Equispaced angles in `(0, pi)`.
pub fn default_angles(count: usize) -> Vec<f64> {
    (0..count).map(|i| std::f64::consts::PI * (i as f64 + 0.37) / count as f64).collect()
}

/// Scaled residual of `H_nu psi = mu psi` for
/// `psi = sin^eps1 cos^eps2 E(cos 2 theta) exp(alpha cos 2 theta)` with
/// `H_nu = -d^2 - 4 alpha nu cos 2 theta - 2 alpha^2 cos 4 theta`; `mu` is fitted.
pub fn whittaker_hill_residual(spec: &InceSpec, nu: f64, e: &Polynomial, samples: &[f64]) -> f64 {
    let alpha = spec.alpha;
    let rows: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&theta| {
            let t = Jet::variable(theta);
            let psi = spec.trig_part(e, theta) * t.scale(2.0).cos().scale(alpha).exp();
            let potential = -4.0 * alpha * nu * (2.0 * theta).cos() - 2.0 * alpha * alpha * (4.0 * theta).cos();
            let h = -psi.d2 + potential * psi.v;
            (h, psi.v, psi.d2.abs() + (potential * psi.v).abs())
        })
        .collect();
    fitted_residual(&rows)
}

/// `max |h - mu y| / max scale` with `mu` the least-squares fit of `h ~ mu y`.
pub(crate) fn fitted_residual(rows: &[(f64, f64, f64)]) -> f64 {
    let num: f64 = rows.iter().map(|(h, y, _)| h * y).sum();
    let den: f64 = rows.iter().map(|(_, y, _)| y * y).sum();
    let mu = if den > 0.0 { num / den } else { 0.0 };
    let scale = rows.iter().map(|r| r.2 + (mu * r.1).abs()).fold(0.0, f64::max);
    let worst = rows.iter().map(|(h, y, _)| (h - mu * y).abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Largest Whittaker–Hill residual over the members of `system`.
pub fn ince_check(spec: &InceSpec, system: &JointSystem, samples: &[f64]) -> f64 {
    system.pairs.iter().map(|p| whittaker_hill_residual(spec, spec.nu() as f64, &p.vector, samples)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncePeriodicity {
    /// `p(theta + pi) = p(theta)`.
    Periodic,
    /// `p(theta + pi) = -p(theta)`.
    Antiperiodic,
    Neither,
}

#[derive(Debug, Clone)]
pub struct InceEntry {
    pub spec: InceSpec,
    pub polynomial: Polynomial,
    pub periodicity: IncePeriodicity,
    pub residual: f64,
}

fn periodicity(spec: &InceSpec, e: &Polynomial) -> IncePeriodicity {
    let angles = default_angles(7);
    let pairs: Vec<(f64, f64)> =
        angles.iter().map(|&t| (spec.trig_part(e, t).v, spec.trig_part(e, t + std::f64::consts::PI).v)).collect();
    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    if pairs.iter().all(|(a, b)| (a - b).abs() <= tol) {
        IncePeriodicity::Periodic
    } else if pairs.iter().all(|(a, b)| (a + b).abs() <= tol) {
        IncePeriodicity::Antiperiodic
    } else {
        IncePeriodicity::Neither
    }
}

/// All Ince eigenfunctions for `H_nu`, `nu >= 1`: patterns `(1,0)` and `(0,1)`
/// for even `nu`, `(0,0)` and `(1,1)` for odd `nu`.
pub fn ince_catalog(alpha: f64, nu: usize, opts: &NewtonOptions) -> Result<Vec<InceEntry>> {
    if nu == 0 {
        return Err(JopError::InvalidConfig("Ince catalog needs nu >= 1".into()));
    }
    let patterns: &[[u8; 2]] = if nu.is_multiple_of(2) { &[[1, 0], [0, 1]] } else { &[[0, 0], [1, 1]] };
    let mut out = Vec::new();
    for &eps in patterns {
        let weight = (eps[0] + eps[1]) as usize;
        if nu < 1 + weight {
            continue;
        }
        let spec = InceSpec::new(alpha, eps, (nu - 1 - weight) / 2)?;
        let system = spec.solve(opts)?;
        for p in &system.pairs {
            out.push(InceEntry {
                spec: spec.clone(),
                polynomial: p.vector.clone(),
                periodicity: periodicity(&spec, &p.vector),
                residual: whittaker_hill_residual(&spec, nu as f64, &p.vector, &default_angles(20)),
            });
        }
    }
    Ok(out)
}
