//! Bicomplex numbers `z = z1 + i zi + j zj + k zk` with `i² = j² = -1`,
//! `k = ij`, `k² = 1`.
//!
//! Values are stored in the idempotent basis `e± = (1 ± k)/2`, where every
//! field operation acts independently on the two complex coefficients
//! (unit `i`):
//!
//! ```text
//! z+ = (z1 + zk) + i (zi - zj)
//! z- = (z1 - zk) + i (zi + zj)
//! ```
//!
//! The alternative idempotent representation with coefficients in the unit
//! `j` is obtained from the same pair by `w± = (z1 ± zk) + j (zj ∓ zi)`; it is
//! not used anywhere in this crate.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default absolute tolerance for [`Bicomplex::approx_eq`].
pub const DEFAULT_EQ_TOL: f64 = 1e-12;

/// The two complex coefficients of a bicomplex number in the idempotent basis.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct IdempotentPair {
    pub plus: Complex64,
    pub minus: Complex64,
}

impl IdempotentPair {
    pub fn new(plus: Complex64, minus: Complex64) -> Self {
        Self { plus, minus }
    }
}

/// A bicomplex number.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Bicomplex {
    pair: IdempotentPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticFn {
    Exp,
    Sqrt,
    Log,
}

impl Bicomplex {
    pub const ZERO: Bicomplex = Bicomplex {
        pair: IdempotentPair {
            plus: Complex64::new(0.0, 0.0),
            minus: Complex64::new(0.0, 0.0),
        },
    };
    pub const ONE: Bicomplex = Bicomplex::from_parts(1.0, 0.0, 0.0, 0.0);
    pub const I: Bicomplex = Bicomplex::from_parts(0.0, 1.0, 0.0, 0.0);
    pub const J: Bicomplex = Bicomplex::from_parts(0.0, 0.0, 1.0, 0.0);
    pub const K: Bicomplex = Bicomplex::from_parts(0.0, 0.0, 0.0, 1.0);
    /// `e+ = (1 + k)/2`
    pub const E_PLUS: Bicomplex = Bicomplex::from_parts(0.5, 0.0, 0.0, 0.5);
    /// `e- = (1 - k)/2`
    pub const E_MINUS: Bicomplex = Bicomplex::from_parts(0.5, 0.0, 0.0, -0.5);

    /// Builds a number from its `(1, i, j, k)` components.
    pub const fn from_parts(z1: f64, zi: f64, zj: f64, zk: f64) -> Self {
        Bicomplex {
            pair: IdempotentPair {
                plus: Complex64::new(z1 + zk, zi - zj),
                minus: Complex64::new(z1 - zk, zi + zj),
            },
        }
    }

    pub fn from_idempotent(pair: IdempotentPair) -> Self {
        Bicomplex { pair }
    }

    pub fn from_pm(plus: Complex64, minus: Complex64) -> Self {
        Bicomplex {
            pair: IdempotentPair { plus, minus },
        }
    }

    /// Embeds an ordinary complex number (unit `i`); both coefficients agree.
    pub fn from_complex(z: Complex64) -> Self {
        Self::from_pm(z, z)
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    pub fn to_idempotent(self) -> IdempotentPair {
        self.pair
    }

    pub fn plus(self) -> Complex64 {
        self.pair.plus
    }

    pub fn minus(self) -> Complex64 {
        self.pair.minus
    }

    pub fn z1(self) -> f64 {
        0.5 * (self.pair.plus.re + self.pair.minus.re)
    }

    pub fn zi(self) -> f64 {
        0.5 * (self.pair.plus.im + self.pair.minus.im)
    }

    pub fn zj(self) -> f64 {
        0.5 * (self.pair.minus.im - self.pair.plus.im)
    }

    pub fn zk(self) -> f64 {
        0.5 * (self.pair.plus.re - self.pair.minus.re)
    }

    /// Components in the order `[z1, zi, zj, zk]`.
    pub fn parts(self) -> [f64; 4] {
        [self.z1(), self.zi(), self.zj(), self.zk()]
    }

    pub fn is_finite(self) -> bool {
        self.pair.plus.is_finite() && self.pair.minus.is_finite()
    }

    /// True when one idempotent coefficient vanishes, i.e. the number has no
    /// multiplicative inverse.
    pub fn is_zero_divisor(self) -> bool {
        self.pair.plus == Complex64::new(0.0, 0.0) || self.pair.minus == Complex64::new(0.0, 0.0)
    }

    /// Conjugation with respect to `i`: flips the signs of `zi` and `zk`.
    /// In the idempotent basis it swaps and conjugates the coefficients.
    pub fn conj_i(self) -> Self {
        Self::from_pm(self.pair.minus.conj(), self.pair.plus.conj())
    }

    /// Conjugation with respect to `j`: flips the signs of `zj` and `zk`.
    /// In the idempotent basis it swaps the coefficients.
    pub fn conj_j(self) -> Self {
        Self::from_pm(self.pair.minus, self.pair.plus)
    }

    pub fn arith(op: ArithOp, z: Bicomplex, w: Bicomplex) -> Result<Bicomplex> {
        match op {
            ArithOp::Add => Ok(z + w),
            ArithOp::Sub => Ok(z - w),
            ArithOp::Mul => Ok(z * w),
            ArithOp::Div => z.checked_div(w),
        }
    }

    pub fn checked_div(self, w: Bicomplex) -> Result<Bicomplex> {
        if w.is_zero_divisor() {
            return Err(Error::DivisionByZeroDivisor);
        }
        Ok(Self::from_pm(
            self.pair.plus / w.pair.plus,
            self.pair.minus / w.pair.minus,
        ))
    }

    /// Applies an analytic function coefficient-wise; principal branch for
    /// `sqrt` and `log`.
    pub fn lift_analytic(self, f: AnalyticFn) -> Result<Bicomplex> {
        match f {
            AnalyticFn::Exp => Ok(self.exp()),
            AnalyticFn::Sqrt => self.sqrt(),
            AnalyticFn::Log => self.ln(),
        }
    }

    pub fn exp(self) -> Self {
        Self::from_pm(self.pair.plus.exp(), self.pair.minus.exp())
    }

    pub fn sqrt(self) -> Result<Self> {
        for c in [self.pair.plus, self.pair.minus] {
            if on_negative_axis(c) {
                return Err(Error::BranchCutViolation);
            }
        }
        Ok(Self::from_pm(self.pair.plus.sqrt(), self.pair.minus.sqrt()))
    }

    pub fn ln(self) -> Result<Self> {
        for c in [self.pair.plus, self.pair.minus] {
            if on_negative_axis(c) || c == Complex64::new(0.0, 0.0) {
                return Err(Error::BranchCutViolation);
            }
        }
        Ok(Self::from_pm(self.pair.plus.ln(), self.pair.minus.ln()))
    }

    /// Absolute comparison of all four components.
    pub fn approx_eq(self, other: Bicomplex, tol: f64) -> bool {
        let a = self.parts();
        let b = other.parts();
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    /// Largest absolute component.
    pub fn max_abs(self) -> f64 {
        self.parts().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

fn on_negative_axis(c: Complex64) -> bool {
    c.im == 0.0 && c.re < 0.0
}

impl fmt::Debug for Bicomplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.parts();
        write!(f, "Bicomplex({a} + {b}i + {c}j + {d}k)")
    }
}

impl fmt::Display for Bicomplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.parts();
        write!(f, "{a} + {b}i + {c}j + {d}k")
    }
}

impl Add for Bicomplex {
    type Output = Bicomplex;
    fn add(self, w: Bicomplex) -> Bicomplex {
        Self::from_pm(self.pair.plus + w.pair.plus, self.pair.minus + w.pair.minus)
    }
}

impl Sub for Bicomplex {
    type Output = Bicomplex;
    fn sub(self, w: Bicomplex) -> Bicomplex {
        Self::from_pm(self.pair.plus - w.pair.plus, self.pair.minus - w.pair.minus)
    }
}

impl Mul for Bicomplex {
    type Output = Bicomplex;
    fn mul(self, w: Bicomplex) -> Bicomplex {
        Self::from_pm(self.pair.plus * w.pair.plus, self.pair.minus * w.pair.minus)
    }
}

impl Mul<f64> for Bicomplex {
    type Output = Bicomplex;
    fn mul(self, s: f64) -> Bicomplex {
        Self::from_pm(self.pair.plus * s, self.pair.minus * s)
    }
}

impl Neg for Bicomplex {
    type Output = Bicomplex;
    fn neg(self) -> Bicomplex {
        Self::from_pm(-self.pair.plus, -self.pair.minus)
    }
}

impl AddAssign for Bicomplex {
    fn add_assign(&mut self, w: Bicomplex) {
        *self = *self + w;
    }
}

impl SubAssign for Bicomplex {
    fn sub_assign(&mut self, w: Bicomplex) {
        *self = *self - w;
    }
}

impl MulAssign for Bicomplex {
    fn mul_assign(&mut self, w: Bicomplex) {
        *self = *self * w;
    }
}

impl Serialize for Bicomplex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.parts().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Bicomplex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [z1, zi, zj, zk] = <[f64; 4]>::deserialize(deserializer)?;
        Ok(Bicomplex::from_parts(z1, zi, zj, zk))
    }
}
