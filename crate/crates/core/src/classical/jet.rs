//! Second-order jets `(f, f', f'')` for exact derivatives of closed-form
//! eigenfunctions.

use std::ops::{Add, Mul, Neg, Sub};

use crate::poly::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, d1: 0.0, d2: 0.0 }
    }

    /// The independent variable at `x`.
    pub fn variable(x: f64) -> Self {
        Jet { v: x, d1: 1.0, d2: 0.0 }
    }

    /// `g(self)` from `g`, `g'`, `g''` at `self.v`.
    fn chain(self, g: f64, g1: f64, g2: f64) -> Self {
        Jet { v: g, d1: g1 * self.d1, d2: g2 * self.d1 * self.d1 + g1 * self.d2 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    /// `|self|^p`; the value must stay away from zero unless `p` is a
    /// non-negative integer.
    pub fn abs_powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Jet::constant(1.0);
        }
        let s = self.v.signum();
        let a = self.v.abs();
        self.chain(a.powf(p), s * p * a.powf(p - 1.0), p * (p - 1.0) * a.powf(p - 2.0))
    }

    pub fn powi(self, p: i32) -> Self {
        match p {
            0 => Jet::constant(1.0),
            1 => self,
            _ => {
                let pf = p as f64;
                self.chain(self.v.powi(p), pf * self.v.powi(p - 1), pf * (pf - 1.0) * self.v.powi(p - 2))
            }
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    /// Horner evaluation of `p(self)`.
    pub fn poly(self, p: &Polynomial) -> Self {
        p.coeffs().iter().rev().fold(Jet::constant(0.0), |acc, &c| acc * self + Jet::constant(c))
    }

    pub fn scale(self, c: f64) -> Self {
        Jet { v: c * self.v, d1: c * self.d1, d2: c * self.d2 }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}
