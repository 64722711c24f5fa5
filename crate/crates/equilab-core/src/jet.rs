//! Second-order jets (value, first and second derivative with respect to one
//! scalar parameter). Arithmetic on jets gives exact directional derivatives
//! of any composite formula, which is how Lie derivatives of observables are
//! evaluated without finite differencing.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Real 2-jet: f, f', f'' along a curve parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, d1: 0.0, d2: 0.0 }
    }

    /// The curve parameter itself: value `v`, unit first derivative.
    pub const fn variable(v: f64) -> Self {
        Jet { v, d1: 1.0, d2: 0.0 }
    }

    /// Chain rule through a scalar function with given derivatives at `self.v`.
    fn lift(self, f: f64, fp: f64, fpp: f64) -> Self {
        Jet {
            v: f,
            d1: fp * self.d1,
            d2: fpp * self.d1 * self.d1 + fp * self.d2,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.lift(e, e, e)
    }

    pub fn ln(self) -> Self {
        self.lift(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.lift(r, 0.5 / r, -0.25 / (r * r * r))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.lift(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.lift(c, -s, -c)
    }

    pub fn cosh(self) -> Self {
        self.lift(self.v.cosh(), self.v.sinh(), self.v.cosh())
    }

    pub fn sinh(self) -> Self {
        self.lift(self.v.sinh(), self.v.cosh(), self.v.sinh())
    }

    pub fn recip(self) -> Self {
        let iv = 1.0 / self.v;
        self.lift(iv, -iv * iv, 2.0 * iv * iv * iv)
    }

    /// Two-argument arctangent; smooth away from the origin.
    pub fn atan2(y: Jet, x: Jet) -> Jet {
        let r2 = x.v * x.v + y.v * y.v;
        let v = y.v.atan2(x.v);
        let num = x.v * y.d1 - y.v * x.d1;
        let d1 = num / r2;
        let num_p = x.v * y.d2 - y.v * x.d2;
        let r2_p = 2.0 * (x.v * x.d1 + y.v * y.d1);
        let d2 = num_p / r2 - num * r2_p / (r2 * r2);
        Jet { v, d1, d2 }
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
        Jet { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
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

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet { v: self.v * s, d1: self.d1 * s, d2: self.d2 * s }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        Jet { v: self.v + s, ..self }
    }
}

/// Complex 2-jet.
#[derive(Clone, Copy, Debug)]
pub struct JetC {
    pub re: Jet,
    pub im: Jet,
}

impl JetC {
    pub fn from_real(r: Jet) -> Self {
        JetC { re: r, im: Jet::constant(0.0) }
    }

    /// e^{i*phi} for a real jet phi.
    pub fn cis(phi: Jet) -> Self {
        JetC { re: phi.cos(), im: phi.sin() }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.v, self.im.v)
    }

    pub fn d1(&self) -> Complex64 {
        Complex64::new(self.re.d1, self.im.d1)
    }

    pub fn d2(&self) -> Complex64 {
        Complex64::new(self.re.d2, self.im.d2)
    }

    pub fn scale(self, s: f64) -> Self {
        JetC { re: self.re * s, im: self.im * s }
    }
}

impl Mul for JetC {
    type Output = JetC;
    fn mul(self, o: JetC) -> JetC {
        JetC {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl Add for JetC {
    type Output = JetC;
    fn add(self, o: JetC) -> JetC {
        JetC { re: self.re + o.re, im: self.im + o.im }
    }
}
