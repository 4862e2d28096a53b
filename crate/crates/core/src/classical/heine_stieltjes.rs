//! Heine–Stieltjes equation `Q y'' + S y' + V y = 0` with
//! `Q = prod (x - e_i)`, `S = sum m_j prod_{i != j} (x - e_i)`, and its van
//! Vleck polynomials `V`.

use super::jet::Jet;
use super::{guarded_samples, SecondOrderOperator};
use crate::error::{JopError, Result};
use crate::forms::{InnerProductFamily, MAX_K};
use crate::measure::IntervalMeasure;
use crate::mep::{self, JointSystem, NewtonOptions};
use crate::poly::Polynomial;

/// Accepted relative size of the remainder when dividing by `y`.
pub const REMAINDER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct HeineStieltjesSpec {
    /// `e_0 < ... < e_k`.
    pub e: Vec<f64>,
    /// `m_0, ..., m_k > 0`.
    pub m: Vec<f64>,
    pub n: usize,
}

impl HeineStieltjesSpec {
    pub fn new(e: Vec<f64>, m: Vec<f64>, n: usize) -> Result<Self> {
        if e.len() < 3 || e.len() > MAX_K + 1 || m.len() != e.len() {
            return Err(JopError::InvalidConfig(format!(
                "need 3 to {} points with one exponent each, got {} and {}",
                MAX_K + 1,
                e.len(),
                m.len()
            )));
        }
        if e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|x| !x.is_finite()) {
            return Err(JopError::InvalidConfig(format!("points {e:?} are not strictly increasing")));
        }
        if m.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(JopError::InvalidConfig(format!("exponents {m:?} must be positive")));
        }
        Ok(HeineStieltjesSpec { e, m, n })
    }

    pub fn k(&self) -> usize {
        self.e.len() - 1
    }

    pub fn q(&self) -> Polynomial {
        Polynomial::from_roots(&self.e, 1.0)
    }

    pub fn s(&self) -> Polynomial {
        (0..self.e.len()).fold(Polynomial::zero(), |acc, j| {
            let others: Vec<f64> = (0..self.e.len()).filter(|&i| i != j).map(|i| self.e[i]).collect();
            &acc + &Polynomial::from_roots(&others, self.m[j])
        })
    }

    /// `-n (n - 1 + sum m_j)`.
    pub fn van_vleck_leading(&self) -> f64 {
        let n = self.n as f64;
        -n * (n - 1.0 + self.m.iter().sum::<f64>())
    }

    /// `Q d^2 + S d`, mapping `V_n` into `V_{n+k-1}`.
    pub fn operator(&self) -> SecondOrderOperator {
        SecondOrderOperator { q: self.q(), p: self.s(), r: Polynomial::zero() }
    }

    /// Intervals `(e_{j-1}, e_j)` with weight `prod |x - e_i|^{m_i - 1}`.
    pub fn family(&self, n_max: usize) -> Result<InnerProductFamily> {
        let measures = (1..self.e.len())
            .map(|j| {
                self.e
                    .iter()
                    .zip(&self.m)
                    .fold(IntervalMeasure::uniform(self.e[j - 1], self.e[j]), |w, (&x, &m)| w.with_factor(x, m - 1.0))
            })
            .collect();
        InnerProductFamily::new(measures, n_max)
    }
}

#[derive(Debug, Clone)]
pub struct HeineStieltjesSolution {
    pub system: JointSystem,
    /// Van Vleck polynomial of each member, in the system's order.
    pub van_vleck: Vec<Polynomial>,
    /// Relative division remainders.
    pub remainders: Vec<f64>,
    /// Largest scaled residual of the equation at the samples.
    pub ode_residual: f64,
}

/// `V = -(Q y'' + S y') / y` by division, with the relative remainder.
pub fn van_vleck(spec: &HeineStieltjesSpec, y: &Polynomial) -> Result<(Polynomial, f64)> {
    let numerator = spec.operator().apply(y);
    let (quot, rem) = numerator.div_rem(y)?;
    let scale = numerator.norm().max(f64::MIN_POSITIVE);
    Ok((-&quot, rem.norm() / scale))
}

/// Largest scaled residual `|Q y'' + S y' + V y| / (|Q y''| + |S y'| + |V y|)`
/// at guarded Chebyshev points, at least `count` in total.
pub fn ode_residual(spec: &HeineStieltjesSpec, y: &Polynomial, v: &Polynomial, count: usize) -> f64 {
    let (q, s) = (spec.q(), spec.s());
    let per = count.div_ceil(spec.k());
    (1..spec.e.len())
        .flat_map(|j| guarded_samples(spec.e[j - 1], spec.e[j], per))
        .map(|x| {
            let yj = Jet::variable(x).poly(y);
            let terms = [q.evaluate(x) * yj.d2, s.evaluate(x) * yj.d1, v.evaluate(x) * yj.v];
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            let total: f64 = terms.iter().sum();
            if scale > 0.0 {
                total.abs() / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the family with the Newton path, then extracts and checks the van
/// Vleck polynomial of every member.
pub fn heine_stieltjes_solve(spec: &HeineStieltjesSpec, opts: &NewtonOptions) -> Result<HeineStieltjesSolution> {
    let fam = spec.family(spec.n)?;
    let system = mep::solve(&fam, spec.n, opts)?;
    if !system.is_complete() {
        return Err(JopError::IncompleteSystem {
            found: system.len(),
            expected: mep::expected_count(spec.n, spec.k()),
        });
    }
    let mut van_vleck_polys = Vec::with_capacity(system.len());
    let mut remainders = Vec::with_capacity(system.len());
    let mut worst = 0.0f64;
    for p in &system.pairs {
        let (v, rem) = van_vleck(spec, &p.vector)?;
        if !(rem <= REMAINDER_TOL) {
            return Err(JopError::DivisionRemainder(rem));
        }
        worst = worst.max(ode_residual(spec, &p.vector, &v, 30));
        van_vleck_polys.push(v);
        remainders.push(rem);
    }
    Ok(HeineStieltjesSolution { system, van_vleck: van_vleck_polys, remainders, ode_residual: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::selfadjointness_residual;
    use crate::mep::root_signature;

    fn spec(m: f64, n: usize) -> HeineStieltjesSpec {
        HeineStieltjesSpec::new(vec![0.0, 1.0, 2.0, 3.0], vec![m; 4], n).unwrap()
    }

    #[test]
    fn degree_one_has_a_root_in_each_interval() {
        let s = spec(1.0, 1);
        let sol = heine_stieltjes_solve(&s, &NewtonOptions::default()).unwrap();
        assert_eq!(sol.system.len(), 3);
        let fam = s.family(1).unwrap();
        let mut sigs: Vec<_> = sol.system.pairs.iter().map(|p| root_signature(&p.vector, &fam.intervals())).collect();
        sigs.sort();
        assert_eq!(sigs, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
    }

    #[test]
    fn van_vleck_leading_coefficients_and_residuals() {
        let o = NewtonOptions::default();
        for m in [1.0, 1.5] {
            for n in 0..=3 {
                let s = spec(m, n);
                let sol = heine_stieltjes_solve(&s, &o).unwrap();
                assert!(sol.ode_residual < 1e-7, "m={m} n={n}: {}", sol.ode_residual);
                let want = s.van_vleck_leading();
                for v in &sol.van_vleck {
                    let lead = v.coeff(s.k() - 1);
                    assert!((lead - want).abs() <= 1e-8 * want.abs().max(1.0), "{lead} vs {want}");
                    assert!(v.degree().is_none_or(|d| d < s.k()));
                }
                // distinct signatures
                let fam = s.family(n).unwrap();
                let mut sigs: Vec<_> =
                    sol.system.pairs.iter().map(|p| root_signature(&p.vector, &fam.intervals())).collect();
                sigs.sort();
                sigs.dedup();
                assert_eq!(sigs.len(), sol.system.len());
            }
        }
    }

    #[test]
    fn rank_one_and_deleted_orthogonality() {
        let s = spec(1.5, 2);
        let sol = heine_stieltjes_solve(&s, &NewtonOptions::default()).unwrap();
        let fam = s.family(2).unwrap();
        let pairs = &sol.system.pairs;
        for a in 0..pairs.len() {
            for b in 0..pairs.len() {
                if a == b {
                    continue;
                }
                let (u, v) = (&pairs[a].vector, &pairs[b].vector);
                let r = fam.rank_one_form(u, v).unwrap().abs() / fam.rank_one_scale(u, v).unwrap();
                assert!(r < 1e-8);
                for j in 1..=3 {
                    let d = fam.deleted_form(j, u, v).unwrap().abs() / fam.deleted_scale(j, u, v).unwrap();
                    assert!(d < 1e-8);
                }
            }
        }
    }

    #[test]
    fn operator_is_selfadjoint_for_every_product() {
        for (e, m) in
            [(vec![0.0, 1.0, 2.0, 3.0], vec![1.5; 4]), (vec![-1.0, 0.0, 1.5, 2.0, 4.0], vec![0.5, 1.0, 1.5, 2.0, 1.0])]
        {
            let s = HeineStieltjesSpec::new(e, m, 3).unwrap();
            let fam = s.family(4).unwrap();
            let op = s.operator().matrix(4, 3 + s.k());
            for j in 1..=s.k() {
                assert!(selfadjointness_residual(&fam, &op, j).unwrap() < 1e-8);
            }
            let mut bad = s.operator();
            bad.p = &bad.p + &Polynomial::monomial(s.k(), 0.5);
            assert!(selfadjointness_residual(&fam, &bad.matrix(4, 3 + s.k()), 1).unwrap() > 1e-3);
        }
    }

    #[test]
    fn remainder_flags_a_non_solution() {
        let s = spec(1.0, 2);
        let (_, rem) = van_vleck(&s, &Polynomial::new(vec![0.3, -1.1, 1.0])).unwrap();
        assert!(rem > 1e-3);
    }
}
