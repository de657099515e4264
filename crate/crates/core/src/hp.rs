//! Arbitrary-precision complex arithmetic on top of MPFR floats.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use rug::float::Constant;
use rug::Float;

/// Default significand width for high-precision evaluation.
pub const DEFAULT_PRECISION: u32 = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct BigComplex {
    pub re: Float,
    pub im: Float,
}

impl BigComplex {
    pub fn new(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        Self { re: Float::with_val(prec, z.re), im: Float::with_val(prec, z.im) }
    }

    pub fn zero(prec: u32) -> Self {
        Self { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Self { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.clone().square() + self.im.clone().square())
    }

    pub fn abs(&self) -> Float {
        self.re.clone().hypot(&self.im)
    }

    pub fn arg(&self) -> Float {
        self.im.clone().atan2(&self.re)
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { re: self.re.clone() * k, im: self.im.clone() * k }
    }

    pub fn square(&self) -> Self {
        let p = self.prec();
        let re = Float::with_val(p, self.re.clone().square() - self.im.clone().square());
        let im = Float::with_val(p, &self.re * &self.im) * 2u32;
        Self { re, im }
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        Self { re: self.re.clone() / &d, im: -(self.im.clone() / &d) }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = self.re.clone().exp();
        let (s, c) = self.im.clone().sin_cos(Float::new(p));
        Self { re: c * &m, im: s * m }
    }

    pub fn ln(&self) -> Self {
        Self { re: self.abs().ln(), im: self.arg() }
    }

    pub fn cos(&self) -> Self {
        let p = self.prec();
        let (s, c) = self.re.clone().sin_cos(Float::new(p));
        let (sh, ch) = self.im.clone().sinh_cosh(Float::new(p));
        Self { re: c * ch, im: -(s * sh) }
    }

    pub fn sin(&self) -> Self {
        let p = self.prec();
        let (s, c) = self.re.clone().sin_cos(Float::new(p));
        let (sh, ch) = self.im.clone().sinh_cosh(Float::new(p));
        Self { re: s * ch, im: c * sh }
    }

    /// Hex significand strings that round-trip exactly.
    pub fn to_exact_strings(&self) -> (String, String) {
        (self.re.to_string_radix(16, None), self.im.to_string_radix(16, None))
    }

    pub fn from_exact_strings(prec: u32, re: &str, im: &str) -> Option<Self> {
        let re = Float::parse_radix(re, 16).ok()?;
        let im = Float::parse_radix(im, 16).ok()?;
        Some(Self { re: Float::with_val(prec, re), im: Float::with_val(prec, im) })
    }
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x > -PI && x <= PI {
        return x;
    }
    let k = ((x - PI) / (2.0 * PI)).ceil();
    let y = x - 2.0 * PI * k;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Same as [`wrap_pi`] for MPFR values.
pub fn wrap_pi_big(x: &Float) -> Float {
    let p = x.prec();
    let pi = pi(p);
    let two_pi = Float::with_val(p, &pi * 2u32);
    if *x > -pi.clone() && *x <= pi {
        return x.clone();
    }
    let k = Float::with_val(p, (x.clone() - &pi) / &two_pi).ceil();
    let mut y = Float::with_val(p, x - k * &two_pi);
    if y <= -pi {
        y += &two_pi;
    }
    y
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&BigComplex> for &BigComplex {
            type Output = BigComplex;
            fn $m(self, o: &BigComplex) -> BigComplex {
                let f: fn(&BigComplex, &BigComplex) -> BigComplex = $body;
                f(self, o)
            }
        }
        impl $tr<BigComplex> for BigComplex {
            type Output = BigComplex;
            fn $m(self, o: BigComplex) -> BigComplex {
                (&self).$m(&o)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    let p = a.prec().max(b.prec());
    BigComplex { re: Float::with_val(p, &a.re + &b.re), im: Float::with_val(p, &a.im + &b.im) }
});
binop!(Sub, sub, |a, b| {
    let p = a.prec().max(b.prec());
    BigComplex { re: Float::with_val(p, &a.re - &b.re), im: Float::with_val(p, &a.im - &b.im) }
});
binop!(Mul, mul, |a, b| {
    let p = a.prec().max(b.prec());
    let ac = Float::with_val(p, &a.re * &b.re);
    let bd = Float::with_val(p, &a.im * &b.im);
    let ad = Float::with_val(p, &a.re * &b.im);
    let bc = Float::with_val(p, &a.im * &b.re);
    BigComplex { re: ac - bd, im: ad + bc }
});
binop!(Div, div, |a, b| a * &b.recip());

impl Neg for BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        BigComplex { re: -self.re, im: -self.im }
    }
}

impl Neg for &BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        -(self.clone())
    }
}
