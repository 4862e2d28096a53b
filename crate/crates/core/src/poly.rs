//! Dense univariate real polynomials in the monomial basis.
//!
//! Coefficients are stored in ascending order (`coeffs[s]` multiplies `x^s`).
//! The representation is canonical: trailing zero coefficients are stripped,
//! so the zero polynomial has an empty coefficient vector and no degree.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{JopError, Result};

/// Clustering tolerance for roots after Newton polishing.
pub const ROOT_CLUSTER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

/// A (possibly complex) root with its clustered multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `c * x^s`
    pub fn monomial(s: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; s + 1];
        coeffs[s] = c;
        Polynomial::new(coeffs)
    }

    pub fn x() -> Self {
        Polynomial::monomial(1, 1.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^s` (zero beyond the degree).
    pub fn coeff(&self, s: usize) -> f64 {
        self.coeffs.get(s).copied().unwrap_or(0.0)
    }

    /// Coefficients padded (or truncated) to exactly `len` entries.
    pub fn padded(&self, len: usize) -> Vec<f64> {
        (0..len).map(|s| self.coeff(s)).collect()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn evaluate_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// Multiplication by `x^shift`.
    pub fn shift(&self, shift: usize) -> Self {
        if self.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; shift];
        coeffs.extend_from_slice(&self.coeffs);
        Polynomial { coeffs }
    }

    pub fn derivative(&self) -> Self {
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(s, c)| s as f64 * c).collect())
    }

    /// Divides by the leading coefficient.
    pub fn normalize(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(JopError::ZeroPolynomial);
        }
        Ok(self.scale(1.0 / self.leading()))
    }

    /// Euclidean division; returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        let dd = divisor.degree().ok_or(JopError::ZeroPolynomial)?;
        let Some(nd) = self.degree() else {
            return Ok((Polynomial::zero(), Polynomial::zero()));
        };
        if nd < dd {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; nd - dd + 1];
        for s in (0..=nd - dd).rev() {
            let c = rem[s + dd] / lead;
            quot[s] = c;
            for (t, dc) in divisor.coeffs.iter().enumerate() {
                rem[s + t] -= c * dc;
            }
            rem[s + dd] = 0.0;
        }
        rem.truncate(dd);
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// `scale * prod (x - r_i)`.
    pub fn from_roots(roots: &[f64], scale: f64) -> Self {
        let mut coeffs = vec![scale];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (s, c) in coeffs.iter().enumerate() {
                next[s + 1] += c;
                next[s] -= r * c;
            }
            coeffs = next;
        }
        Polynomial::new(coeffs)
    }

    /// All complex roots: companion-matrix eigenvalues, Newton polishing, then
    /// clustering within [`ROOT_CLUSTER_TOL`]. Multiplicities sum to the degree.
    pub fn roots(&self) -> Result<Vec<Root>> {
        let deg = self.degree().ok_or(JopError::ZeroPolynomial)?;
        if deg == 0 {
            return Ok(Vec::new());
        }
        let monic = self.normalize()?;
        let mut companion = DMatrix::<f64>::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -monic.coeffs[i];
        }
        let deriv = monic.derivative();
        let mut raw: Vec<Complex64> =
            companion.complex_eigenvalues().iter().map(|z| polish_root(&monic, &deriv, *z)).collect();
        raw.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

        let mut clusters: Vec<(Complex64, usize)> = Vec::new();
        for z in raw {
            match clusters.iter_mut().find(|(c, m)| (*c / *m as f64 - z).norm() < ROOT_CLUSTER_TOL) {
                Some((sum, m)) => {
                    *sum += z;
                    *m += 1;
                }
                None => clusters.push((z, 1)),
            }
        }
        Ok(clusters
            .into_iter()
            .map(|(sum, m)| {
                let z = sum / m as f64;
                Root { re: z.re, im: if z.im.abs() < ROOT_CLUSTER_TOL { 0.0 } else { z.im }, multiplicity: m }
            })
            .collect())
    }

    /// Real roots (imaginary part within the clustering tolerance), with multiplicity.
    pub fn real_roots(&self) -> Result<Vec<f64>> {
        Ok(self
            .roots()?
            .into_iter()
            .filter(|r| r.im == 0.0)
            .flat_map(|r| std::iter::repeat_n(r.re, r.multiplicity))
            .collect())
    }
}

fn polish_root(p: &Polynomial, dp: &Polynomial, mut z: Complex64) -> Complex64 {
    let mut fz = p.evaluate_complex(z).norm();
    for _ in 0..60 {
        let d = dp.evaluate_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = p.evaluate_complex(z) / d;
        let candidate = z - step;
        let fc = p.evaluate_complex(candidate).norm();
        if fc < fz || (fc == fz && fc == 0.0) {
            z = candidate;
            fz = fc;
            if step.norm() <= 1e-16 * z.norm().max(1.0) {
                break;
            }
        } else {
            break;
        }
    }
    z
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|s| self.coeff(s) + rhs.coeff(s)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|s| self.coeff(s) - rhs.coeff(s)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (a, ca) in self.coeffs.iter().enumerate() {
            for (b, cb) in rhs.coeffs.iter().enumerate() {
                coeffs[a + b] += ca * cb;
            }
        }
        Polynomial::new(coeffs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (s, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match s {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}x", c.abs())?,
                _ => write!(f, "{}x^{s}", c.abs())?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_real(p: &Polynomial) -> Vec<(f64, usize)> {
        p.roots()
            .unwrap()
            .into_iter()
            .map(|r| {
                assert_eq!(r.im, 0.0);
                (r.re, r.multiplicity)
            })
            .collect()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Polynomial::constant(1.0).evaluate(17.5), 1.0);
        assert_eq!(Polynomial::new(vec![-1.0, 0.0, 1.0]).evaluate(1.0), 0.0);
        // 0.25 - 1.5 + 2
        assert_eq!(Polynomial::new(vec![2.0, -3.0, 1.0]).evaluate(0.5), 0.75);
    }

    #[test]
    fn canonical_zero() {
        let z = Polynomial::new(vec![0.0, 0.0]);
        assert!(z.is_zero());
        assert_eq!(z.degree(), None);
        assert_eq!(z, Polynomial::zero());
        assert!(matches!(z.normalize(), Err(JopError::ZeroPolynomial)));
        assert!(matches!(z.roots(), Err(JopError::ZeroPolynomial)));
    }

    #[test]
    fn roots_of_factored_quadratics() {
        let r = sorted_real(&Polynomial::new(vec![-1.0, 0.0, 1.0]));
        assert_eq!(r.len(), 2);
        assert!((r[0].0 + 1.0).abs() < 1e-14 && r[0].1 == 1);
        assert!((r[1].0 - 1.0).abs() < 1e-14 && r[1].1 == 1);

        let r = sorted_real(&Polynomial::new(vec![2.0, -3.0, 1.0]));
        assert!((r[0].0 - 1.0).abs() < 1e-14);
        assert!((r[1].0 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn complex_roots_come_in_pairs() {
        let r = Polynomial::new(vec![1.0, 0.0, 1.0]).roots().unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|z| z.re.abs() < 1e-14 && (z.im.abs() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn double_root_is_clustered() {
        let p = Polynomial::from_roots(&[0.5, 0.5, -2.0], 1.0);
        let r = sorted_real(&p);
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].1, 2);
        assert!((r[1].0 - 0.5).abs() < 1e-7);
    }

    #[test]
    fn from_roots_examples() {
        assert_eq!(Polynomial::from_roots(&[1.0, 2.0], 1.0).coeffs(), &[2.0, -3.0, 1.0]);
        assert_eq!(Polynomial::from_roots(&[], 3.0).coeffs(), &[3.0]);
        // 2 (x+1) x (x-1) = 2x^3 - 2x
        assert_eq!(Polynomial::from_roots(&[-1.0, 0.0, 1.0], 2.0).coeffs(), &[0.0, -2.0, 0.0, 2.0]);
    }

    #[test]
    fn degree_five_round_trip() {
        let known = [-2.5, -1.0, 0.3, 1.7, 4.0];
        let p = Polynomial::from_roots(&known, 1.0);
        let found: Vec<f64> = sorted_real(&p).into_iter().map(|(r, _)| r).collect();
        for (a, b) in known.iter().zip(&found) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn division_recovers_factors() {
        let a = Polynomial::new(vec![1.0, -2.0, 0.5]);
        let b = Polynomial::new(vec![3.0, 0.0, 1.0, -1.0]);
        let (q, r) = (&a * &b).div_rem(&a).unwrap();
        assert!(r.norm() < 1e-13);
        assert!((&q - &b).norm() < 1e-13);
        let (q, r) = b.div_rem(&Polynomial::new(vec![-1.0, 1.0])).unwrap();
        assert!((r.coeff(0) - b.evaluate(1.0)).abs() < 1e-14);
        assert_eq!(q.degree(), Some(2));
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(Polynomial::new(vec![2.0, -3.0, 1.0]).to_string(), "1x^2 - 3x + 2");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }

    fn small_poly(max_deg: usize) -> impl Strategy<Value = Polynomial> {
        prop::collection::vec(-1e3..1e3f64, 1..=max_deg + 1).prop_map(Polynomial::new)
    }

    proptest! {
        #[test]
        fn product_evaluates_as_product(p in small_poly(6), q in small_poly(6), x in -2.0..2.0f64) {
            let lhs = (&p * &q).evaluate(x);
            let rhs = p.evaluate(x) * q.evaluate(x);
            let scale: f64 = p.coeffs().iter().map(|c| c.abs()).sum::<f64>()
                * q.coeffs().iter().map(|c| c.abs()).sum::<f64>()
                * 2f64.powi(12);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn derivative_lowers_degree(mut c in prop::collection::vec(-5.0..5.0f64, 2..10)) {
            let last = c.len() - 1;
            if c[last].abs() < 1e-3 { c[last] = 1.0; }
            let p = Polynomial::new(c);
            prop_assert_eq!(p.derivative().degree(), Some(p.degree().unwrap() - 1));
        }

        #[test]
        fn roots_round_trip(
            base in prop::collection::vec(-4.0..4.0f64, 1..=10),
            lead in 0.5..3.0f64,
        ) {
            // force separation by spreading a sorted draw
            let mut rts = base;
            rts.sort_by(f64::total_cmp);
            for i in 1..rts.len() {
                if rts[i] - rts[i - 1] < 0.3 { rts[i] = rts[i - 1] + 0.3; }
            }
            let p = Polynomial::from_roots(&rts, lead);
            let back = Polynomial::from_roots(&p.real_roots().unwrap(), p.leading());
            prop_assert_eq!(back.degree(), p.degree());
            for s in 0..=p.degree().unwrap() {
                let scale = p.coeffs().iter().map(|c| c.abs()).fold(0.0, f64::max);
                prop_assert!((back.coeff(s) - p.coeff(s)).abs() <= 1e-8 * scale);
            }
        }
    }
}
