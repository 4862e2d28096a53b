//! Weighted intervals and their certified moment tables.
//!
//! A measure is `w(x) dx` on `(lower, upper)` with
//! `w(x) = prod_i |x - e_i|^{b_i} * exp(c x) * [exp(-x^2/2)] * s(x)`.
//! Singular factors must sit at an endpoint or outside the closed interval.
//!
//! Moments are computed by a Gauss rule matched to the weight class:
//!
//! * bounded interval: Gauss–Jacobi carrying the two endpoint exponents;
//! * half line with `exp(c x)` decay: generalized Gauss–Laguerre carrying the
//!   finite-endpoint exponent;
//! * Gaussian decay: Gauss–Jacobi on a truncated interval whose cut is placed
//!   where the integrand of the highest moment has dropped below `1e-21` of its
//!   peak.
//!
//! Every other factor is folded into the integrand. The order is doubled until
//! successive moment tables agree to [`TARGET_REL_CHANGE`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{JopError, Result};
use crate::poly::Polynomial;
use crate::quadrature::GaussRule;

/// Successive-doubling agreement that certifies a table.
pub const TARGET_REL_CHANGE: f64 = 1e-13;
/// Tables whose best agreement is worse than this are rejected.
pub const HARD_REL_LIMIT: f64 = 1e-9;
/// Floor on the reported certified error (rounding in the weighted sums).
const CERT_FLOOR: f64 = 1e-14;
const MAX_ORDER: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularFactor {
    pub location: f64,
    /// Power `b` in `|x - location|^b`; must exceed -1.
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMeasure {
    pub lower: f64,
    pub upper: f64,
    pub singular_factors: Vec<SingularFactor>,
    pub exp_linear: f64,
    pub exp_gauss: bool,
    pub smooth_factor: Polynomial,
}

impl IntervalMeasure {
    /// Plain Lebesgue measure on `(lower, upper)`.
    pub fn uniform(lower: f64, upper: f64) -> Self {
        IntervalMeasure {
            lower,
            upper,
            singular_factors: Vec::new(),
            exp_linear: 0.0,
            exp_gauss: false,
            smooth_factor: Polynomial::constant(1.0),
        }
    }

    pub fn with_factor(mut self, location: f64, exponent: f64) -> Self {
        self.singular_factors.push(SingularFactor { location, exponent });
        self
    }

    pub fn with_exp_linear(mut self, c: f64) -> Self {
        self.exp_linear = c;
        self
    }

    pub fn with_gauss(mut self) -> Self {
        self.exp_gauss = true;
        self
    }

    pub fn with_smooth(mut self, smooth: Polynomial) -> Self {
        self.smooth_factor = smooth;
        self
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(JopError::NonIntegrable(msg));
        if self.lower.is_nan() || self.upper.is_nan() || !(self.lower < self.upper) {
            return bad(format!("interval ({}, {}) is empty", self.lower, self.upper));
        }
        for f in &self.singular_factors {
            if !(f.exponent > -1.0) || !f.exponent.is_finite() || !f.location.is_finite() {
                return bad(format!("factor |x - {}|^{} is not locally integrable", f.location, f.exponent));
            }
            if f.location > self.lower && f.location < self.upper {
                return bad(format!("singular location {} lies inside ({}, {})", f.location, self.lower, self.upper));
            }
        }
        if self.endpoint_exponent(self.lower) <= -1.0 || self.endpoint_exponent(self.upper) <= -1.0 {
            return bad("combined endpoint exponent must exceed -1".into());
        }
        if self.upper == f64::INFINITY && !(self.exp_gauss || self.exp_linear < 0.0) {
            return bad("upper end +inf needs exp_linear < 0 or a Gaussian factor".into());
        }
        if self.lower == f64::NEG_INFINITY && !(self.exp_gauss || self.exp_linear > 0.0) {
            return bad("lower end -inf needs exp_linear > 0 or a Gaussian factor".into());
        }
        if self.smooth_factor.is_zero() {
            return bad("smooth factor is identically zero".into());
        }
        if self.smooth_factor.degree().unwrap_or(0) > 0 {
            let inside = self.smooth_factor.real_roots()?.into_iter().any(|r| r > self.lower && r < self.upper);
            if inside {
                return bad("smooth factor changes sign inside the interval".into());
            }
        }
        if self.smooth_factor.evaluate(self.sample_point()) <= 0.0 {
            return bad("smooth factor is not positive on the interval".into());
        }
        Ok(())
    }

    fn sample_point(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower + 1.0,
            (false, true) => self.upper - 1.0,
            (false, false) => 0.0,
        }
    }

    /// Sum of exponents of the factors located exactly at `point`.
    fn endpoint_exponent(&self, point: f64) -> f64 {
        self.singular_factors.iter().filter(|f| f.location == point).map(|f| f.exponent).sum()
    }

    /// The full weight `w(x)`.
    pub fn weight(&self, x: f64) -> f64 {
        self.folded(x, &[]) * self.exp_factor(x)
    }

    fn exp_factor(&self, x: f64) -> f64 {
        let mut e = self.exp_linear * x;
        if self.exp_gauss {
            e -= 0.5 * x * x;
        }
        e.exp()
    }

    /// Weight with the factors at `skip` locations and the exponentials removed.
    fn folded(&self, x: f64, skip: &[f64]) -> f64 {
        let mut w = self.smooth_factor.evaluate(x);
        for f in &self.singular_factors {
            if !skip.contains(&f.location) {
                w *= (x - f.location).abs().powf(f.exponent);
            }
        }
        w
    }

    /// Effective rule `int f w dx ~ sum W_i f(x_i)` of the given base order.
    pub fn rule(&self, order: usize, max_moment: usize) -> Result<GaussRule> {
        let (lo, hi) = (self.lower, self.upper);
        if self.is_bounded() {
            return self.bounded_rule(order, lo, hi, true);
        }
        if !self.exp_gauss {
            return self.laguerre_rule(order);
        }
        // Gaussian decay: truncate where x^S w(x) is negligible.
        let s = max_moment as f64
            + self.smooth_factor.degree().unwrap_or(0) as f64
            + self.singular_factors.iter().map(|f| f.exponent.max(0.0)).sum::<f64>();
        let centre = if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        };
        let reach = self.exp_linear.abs() + s.sqrt() + 14.0 + centre.abs();
        let cut_hi = if hi.is_finite() { hi } else { reach };
        let cut_lo = if lo.is_finite() { lo } else { -reach };
        self.bounded_rule(order, cut_lo, cut_hi, false)
    }

    fn bounded_rule(&self, order: usize, lo: f64, hi: f64, exact_ends: bool) -> Result<GaussRule> {
        let alpha = if exact_ends || hi == self.upper { self.endpoint_exponent(hi) } else { 0.0 };
        let beta = if exact_ends || lo == self.lower { self.endpoint_exponent(lo) } else { 0.0 };
        let skip: Vec<f64> =
            [(alpha != 0.0).then_some(hi), (beta != 0.0).then_some(lo)].into_iter().flatten().collect();
        let base = GaussRule::jacobi(order, alpha, beta)?;
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let scale = h.powf(alpha + beta + 1.0);
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for (&t, &w) in base.nodes.iter().zip(&base.weights) {
            let x = c + h * t;
            nodes.push(x);
            weights.push(w * scale * self.folded(x, &skip) * self.exp_factor(x));
        }
        Ok(GaussRule { nodes, weights })
    }

    fn laguerre_rule(&self, order: usize) -> Result<GaussRule> {
        let rate = self.exp_linear.abs();
        // t = rate * (x - lo) on the right half line, t = rate * (hi - x) on the left
        let (end, dir) = if self.upper == f64::INFINITY { (self.lower, 1.0) } else { (self.upper, -1.0) };
        let beta = self.endpoint_exponent(end);
        let base = GaussRule::laguerre(order, beta)?;
        let scale = (self.exp_linear * end).exp() * rate.powf(-beta - 1.0);
        let skip = [end];
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for (&t, &w) in base.nodes.iter().zip(&base.weights) {
            let x = end + dir * t / rate;
            nodes.push(x);
            weights.push(w * scale * self.folded(x, &skip));
        }
        Ok(GaussRule { nodes, weights })
    }
}

#[derive(Debug, Clone)]
pub struct MomentTable {
    pub measure: IntervalMeasure,
    /// `moments[s] = int x^s w(x) dx`, `s = 0..=S`.
    pub moments: Vec<f64>,
    /// `int |x|^s w(x) dx`, the scale against which errors are measured.
    pub abs_moments: Vec<f64>,
    pub certified_rel_err: f64,
    /// The certified effective rule (useful for direct quadrature oracles).
    pub rule: GaussRule,
}

impl MomentTable {
    /// Highest available moment order `S`.
    pub fn max_order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn moment(&self, s: usize) -> Result<f64> {
        self.moments.get(s).copied().ok_or(JopError::InsufficientMoments { needed: s, available: self.max_order() })
    }

    /// `<p, q> = sum_{a,b} p_a q_b m(a + b)`.
    pub fn inner_product(&self, p: &Polynomial, q: &Polynomial) -> Result<f64> {
        let (Some(dp), Some(dq)) = (p.degree(), q.degree()) else {
            return Ok(0.0);
        };
        if dp + dq > self.max_order() {
            return Err(JopError::InsufficientMoments { needed: dp + dq, available: self.max_order() });
        }
        let mut sum = 0.0;
        for (a, pa) in p.coeffs().iter().enumerate() {
            for (b, qb) in q.coeffs().iter().enumerate() {
                sum += pa * qb * self.moments[a + b];
            }
        }
        Ok(sum)
    }

    /// `<p, x^r q>` for `r = 0..rows`, summed on the certified rule. Equal to the
    /// moment sums but free of their cancellation, which grows with degree.
    pub fn nodal_pairings(&self, p: &Polynomial, q: &Polynomial, rows: usize) -> Result<Vec<f64>> {
        let (Some(dp), Some(dq)) = (p.degree(), q.degree()) else {
            return Ok(vec![0.0; rows]);
        };
        let needed = dp + dq + rows.saturating_sub(1);
        if needed > self.max_order() {
            return Err(JopError::InsufficientMoments { needed, available: self.max_order() });
        }
        let mut out = vec![0.0; rows];
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let mut term = w * p.evaluate(x) * q.evaluate(x);
            for slot in out.iter_mut() {
                *slot += term;
                term *= x;
            }
        }
        Ok(out)
    }

    /// Hankel block with entry `(i, s) = m(i + s)`.
    pub fn gram_matrix(&self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        if rows == 0 || cols == 0 {
            return Ok(DMatrix::zeros(rows, cols));
        }
        let needed = rows + cols - 2;
        if needed > self.max_order() {
            return Err(JopError::InsufficientMoments { needed, available: self.max_order() });
        }
        Ok(DMatrix::from_fn(rows, cols, |i, s| self.moments[i + s]))
    }

    /// Cholesky succeeds on the square Hankel matrix of size `t + 1`.
    pub fn hankel_positive(&self, t: usize) -> bool {
        self.gram_matrix(t + 1, t + 1).ok().and_then(|g| g.cholesky()).is_some()
    }
}

/// Moment table `m(0..=count)` for a validated measure.
pub fn moments(measure: &IntervalMeasure, count: usize) -> Result<MomentTable> {
    measure.validate()?;
    let smooth_deg = measure.smooth_factor.degree().unwrap_or(0);
    let mut order = ((count + smooth_deg) / 2 + 2).max(16);
    let (mut prev, mut prev_abs, mut prev_rule) = evaluate_moments(measure, order, count)?;
    let mut best = f64::INFINITY;
    while order < MAX_ORDER {
        order *= 2;
        let (next, next_abs, rule) = evaluate_moments(measure, order, count)?;
        let change =
            next.iter().zip(&prev).zip(&next_abs).map(|((a, b), scale)| (a - b).abs() / scale).fold(0.0, f64::max);
        prev = next;
        prev_abs = next_abs;
        prev_rule = rule;
        best = change;
        if change < TARGET_REL_CHANGE {
            break;
        }
    }
    if !(best <= HARD_REL_LIMIT) {
        return Err(JopError::ConvergenceFailure(format!(
            "moment quadrature reached order {order} with relative change {best:e}"
        )));
    }
    if best >= TARGET_REL_CHANGE {
        log::warn!("moment table certified only to {best:e} at order {order}");
    }
    if !(prev[0] > 0.0) {
        return Err(JopError::NonIntegrable("total mass is not positive".into()));
    }
    Ok(MomentTable {
        measure: measure.clone(),
        moments: prev,
        abs_moments: prev_abs,
        certified_rel_err: best.max(CERT_FLOOR),
        rule: prev_rule,
    })
}

type MomentSums = (Vec<f64>, Vec<f64>, GaussRule);

fn evaluate_moments(measure: &IntervalMeasure, order: usize, count: usize) -> Result<MomentSums> {
    let rule = measure.rule(order, count)?;
    let mut m = vec![0.0; count + 1];
    let mut abs = vec![0.0; count + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let mut xp = 1.0;
        for s in 0..=count {
            m[s] += w * xp;
            abs[s] += (w * xp).abs();
            xp *= x;
        }
    }
    if abs.iter().any(|a| !a.is_finite()) {
        return Err(JopError::NonIntegrable("moment sums overflowed".into()));
    }
    for a in abs.iter_mut() {
        if *a == 0.0 {
            *a = f64::MIN_POSITIVE;
        }
    }
    Ok((m, abs, rule))
}

/// Insert-once, internally synchronized store of moment tables.
#[derive(Default)]
pub struct MomentCache {
    tables: Mutex<HashMap<String, Arc<MomentTable>>>,
}

impl MomentCache {
    pub fn global() -> &'static MomentCache {
        static CACHE: OnceLock<MomentCache> = OnceLock::new();
        CACHE.get_or_init(MomentCache::default)
    }

    /// Returns a cached table with at least `count` moments, computing it if needed.
    pub fn get(&self, measure: &IntervalMeasure, count: usize) -> Result<Arc<MomentTable>> {
        let key = format!("{measure:?}");
        if let Some(t) = self.tables.lock().expect("moment cache poisoned").get(&key) {
            if t.max_order() >= count {
                return Ok(Arc::clone(t));
            }
        }
        let table = Arc::new(moments(measure, count)?);
        let mut map = self.tables.lock().expect("moment cache poisoned");
        let entry = map.entry(key).or_insert_with(|| Arc::clone(&table));
        if entry.max_order() < count {
            *entry = Arc::clone(&table);
        }
        Ok(Arc::clone(entry))
    }

    pub fn len(&self) -> usize {
        self.tables.lock().expect("moment cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300) || (a - b).abs() <= tol
    }

    #[test]
    fn unit_interval_moments() {
        let t = moments(&IntervalMeasure::uniform(0.0, 1.0), 3).unwrap();
        for (s, m) in t.moments.iter().enumerate() {
            assert!(close(*m, 1.0 / (s as f64 + 1.0), 1e-14));
        }
        assert!(t.certified_rel_err <= 1e-12);
    }

    #[test]
    fn symmetric_interval_moments() {
        let t = moments(&IntervalMeasure::uniform(-1.0, 1.0), 4).unwrap();
        assert!(close(t.moments[0], 2.0, 1e-15));
        assert!(t.moments[1].abs() < 1e-15);
    }

    #[test]
    fn inner_product_on_negative_interval() {
        let t = moments(&IntervalMeasure::uniform(-2.0, -1.0), 6).unwrap();
        let one = Polynomial::constant(1.0);
        assert!(close(t.inner_product(&one, &one).unwrap(), 1.0, 1e-14));
        assert!(close(t.inner_product(&one, &Polynomial::x()).unwrap(), -1.5, 1e-14));
        // sign pattern (-1)^s on a negative support
        for (s, m) in t.moments.iter().enumerate() {
            assert_eq!(m.signum(), if s % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn gram_matrices() {
        let t = moments(&IntervalMeasure::uniform(0.0, 1.0), 6).unwrap();
        let g = t.gram_matrix(3, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(g[(i, j)], 1.0 / (i + j + 1) as f64, 1e-14));
                assert_eq!(g[(i, j)], g[(j, i)]);
            }
        }
        let t = moments(&IntervalMeasure::uniform(-2.0, -1.0), 4).unwrap();
        let g = t.gram_matrix(2, 2).unwrap();
        let expect = [[1.0, -1.5], [-1.5, 7.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(g[(i, j)], expect[i][j], 1e-14));
            }
        }
        assert!(matches!(t.gram_matrix(3, 4), Err(JopError::InsufficientMoments { needed: 5, available: 4 })));
    }

    #[test]
    fn jacobi_endpoint_weights() {
        // int_0^1 x^{s} x^{-1/2} (1-x)^{-1/2} dx = B(s + 1/2, 1/2)
        let m = IntervalMeasure::uniform(0.0, 1.0).with_factor(0.0, -0.5).with_factor(1.0, -0.5);
        let t = moments(&m, 4).unwrap();
        let pi = std::f64::consts::PI;
        assert!(close(t.moments[0], pi, 1e-14));
        assert!(close(t.moments[1], pi / 2.0, 1e-14));
        assert!(close(t.moments[2], 3.0 * pi / 8.0, 1e-14));
    }

    #[test]
    fn exterior_factor_is_folded() {
        // int_1^2 |x - 3|^{1/2} dx = (2/3)(2^{3/2} - 1)
        let m = IntervalMeasure::uniform(1.0, 2.0).with_factor(3.0, 0.5);
        let t = moments(&m, 0).unwrap();
        let exact = 2.0 / 3.0 * (2f64.powf(1.5) - 1.0);
        assert!(close(t.moments[0], exact, 1e-13));
    }

    #[test]
    fn laguerre_half_line() {
        // int_1^inf (x-1)^{1/2} e^{-2x} dx = e^{-2} Gamma(3/2) / 2^{3/2}
        let m = IntervalMeasure::uniform(1.0, f64::INFINITY).with_factor(1.0, 0.5).with_exp_linear(-2.0);
        let t = moments(&m, 2).unwrap();
        let exact = (-2f64).exp() * 0.5 * std::f64::consts::PI.sqrt() / 2f64.powf(1.5);
        assert!(close(t.moments[0], exact, 1e-13));
        let left = IntervalMeasure::uniform(f64::NEG_INFINITY, -1.0).with_factor(-1.0, 0.5).with_exp_linear(2.0);
        let tl = moments(&left, 2).unwrap();
        assert!(close(tl.moments[0], exact, 1e-13));
        assert!(close(tl.moments[1], -t.moments[1], 1e-13));
    }

    #[test]
    fn gaussian_half_line_closed_form() {
        // int_0^inf x^{s+g} e^{-x^2/2} dx = 2^{(s+g-1)/2} Gamma((s+g+1)/2)
        let g = 0.5;
        let m = IntervalMeasure::uniform(0.0, f64::INFINITY).with_factor(0.0, g).with_gauss();
        let t = moments(&m, 12).unwrap();
        for s in 0..=12 {
            let a = s as f64 + g;
            let exact = 2f64.powf((a - 1.0) / 2.0) * statrs::function::gamma::gamma((a + 1.0) / 2.0);
            assert!(close(t.moments[s], exact, 1e-12), "s = {s}");
        }
    }

    #[test]
    fn invalid_measures_are_rejected() {
        let inside = IntervalMeasure::uniform(0.0, 2.0).with_factor(1.0, 0.5);
        assert!(matches!(moments(&inside, 2), Err(JopError::NonIntegrable(_))));
        let strong = IntervalMeasure::uniform(0.0, 1.0).with_factor(0.0, -1.0);
        assert!(matches!(moments(&strong, 2), Err(JopError::NonIntegrable(_))));
        let growth = IntervalMeasure::uniform(0.0, f64::INFINITY);
        assert!(matches!(moments(&growth, 2), Err(JopError::NonIntegrable(_))));
        let wrong_side = IntervalMeasure::uniform(f64::NEG_INFINITY, 0.0).with_exp_linear(-1.0);
        assert!(matches!(moments(&wrong_side, 2), Err(JopError::NonIntegrable(_))));
        let empty = IntervalMeasure::uniform(1.0, 1.0);
        assert!(matches!(moments(&empty, 2), Err(JopError::NonIntegrable(_))));
        let sign = IntervalMeasure::uniform(-1.0, 1.0).with_smooth(Polynomial::x());
        assert!(matches!(moments(&sign, 2), Err(JopError::NonIntegrable(_))));
    }

    #[test]
    fn hankel_positivity_holds() {
        let m = IntervalMeasure::uniform(1.0, 2.0).with_factor(1.0, -0.5).with_factor(0.0, 0.5);
        let t = moments(&m, 16).unwrap();
        for size in 0..=8 {
            assert!(t.hankel_positive(size));
        }
    }

    #[test]
    fn cache_reuses_tables() {
        let cache = MomentCache::default();
        let m = IntervalMeasure::uniform(3.0, 4.0);
        let a = cache.get(&m, 8).unwrap();
        let b = cache.get(&m, 6).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = cache.get(&m, 12).unwrap();
        assert_eq!(c.max_order(), 12);
        assert_eq!(cache.len(), 1);
    }
}
