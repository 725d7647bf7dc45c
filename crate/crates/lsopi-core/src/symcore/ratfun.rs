//! Canonical rational functions: quotients of integer polynomials kept in
//! reduced form.
//!
//! Invariants maintained by every constructor and operation:
//! * the denominator is a nonzero polynomial,
//! * numerator and denominator share no polynomial factor (gcd 1, integer
//!   content included),
//! * the denominator's leading coefficient (graded-lex) is positive,
//! * the zero function is `0/1`.
//!
//! With these rules each rational function has exactly one representation,
//! so equality is structural and `is_zero` is a pure numerator test.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::symcore::poly::Poly;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatFun {
    num: Poly,
    den: Poly,
}

impl RatFun {
    /// Build from a numerator/denominator pair, reducing to canonical form.
    pub fn new(num: Poly, den: Poly) -> Result<RatFun> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(RatFun {
                den: Poly::one(num.arity()),
                num,
            });
        }
        let g = num.gcd(&den);
        let mut num = num.div_exact(&g).expect("gcd divides numerator");
        let mut den = den.div_exact(&g).expect("gcd divides denominator");
        if !den.leading_coeff_sign_positive() {
            num = num.neg();
            den = den.neg();
        }
        Ok(RatFun { num, den })
    }

    pub fn zero(arity: usize) -> RatFun {
        RatFun {
            num: Poly::zero(arity),
            den: Poly::one(arity),
        }
    }

    pub fn one(arity: usize) -> RatFun {
        RatFun {
            num: Poly::one(arity),
            den: Poly::one(arity),
        }
    }

    pub fn var(arity: usize, index: usize) -> RatFun {
        RatFun {
            num: Poly::var(arity, index),
            den: Poly::one(arity),
        }
    }

    pub fn from_int(arity: usize, c: i64) -> RatFun {
        RatFun {
            num: Poly::constant(arity, BigInt::from(c)),
            den: Poly::one(arity),
        }
    }

    pub fn from_rational(arity: usize, q: &BigRational) -> RatFun {
        let num = Poly::constant(arity, q.numer().clone());
        let den = Poly::constant(arity, q.denom().clone());
        RatFun::new(num, den).expect("rational denominator nonzero")
    }

    pub fn from_poly(p: Poly) -> RatFun {
        RatFun {
            den: Poly::one(p.arity()),
            num: p,
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn arity(&self) -> usize {
        self.num.arity()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    /// Constant value if this function is a constant.
    pub fn constant_value(&self) -> Option<BigRational> {
        match (self.num.constant_value(), self.den.constant_value()) {
            (Some(n), Some(d)) => Some(BigRational::new(n, d)),
            _ => None,
        }
    }

    /// Crude size measure used for pivot selection: total degree of
    /// numerator plus denominator.
    pub fn degree_weight(&self) -> u32 {
        self.num.total_degree() + self.den.total_degree()
    }

    pub fn add(&self, other: &RatFun) -> RatFun {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        RatFun::new(num, den).expect("product of nonzero denominators")
    }

    pub fn sub(&self, other: &RatFun) -> RatFun {
        let num = self
            .num
            .mul(&other.den)
            .sub(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        RatFun::new(num, den).expect("product of nonzero denominators")
    }

    pub fn neg(&self) -> RatFun {
        RatFun {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RatFun) -> RatFun {
        RatFun::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("product of nonzero denominators")
    }

    /// Reinterpret over a larger variable set (new variables appended).
    pub fn extended(&self, new_arity: usize) -> RatFun {
        RatFun {
            num: self.num.extended(new_arity),
            den: self.den.extended(new_arity),
        }
    }

    pub fn div(&self, other: &RatFun) -> Result<RatFun> {
        if other.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        RatFun::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn inv(&self) -> Result<RatFun> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        RatFun::new(self.den.clone(), self.num.clone())
    }

    pub fn pow(&self, e: i64) -> Result<RatFun> {
        if !(-64..=64).contains(&e) {
            return Err(Error::ExponentRange(e));
        }
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        Ok(RatFun::new(self.num.pow(e as u32), self.den.pow(e as u32))
            .expect("power of nonzero denominator"))
    }

    /// Partial derivative by the quotient rule, reduced.
    pub fn derivative(&self, var: usize) -> RatFun {
        let num = self
            .num
            .derivative(var)
            .mul(&self.den)
            .sub(&self.num.mul(&self.den.derivative(var)));
        let den = self.den.mul(&self.den);
        RatFun::new(num, den).expect("square of nonzero denominator")
    }

    /// Exact evaluation; errors when the denominator vanishes at the point.
    pub fn eval(&self, point: &[BigRational]) -> Result<BigRational> {
        let d = self.den.eval(point);
        if d.is_zero() {
            return Err(Error::NonGenericPoint {
                detail: "denominator vanishes".into(),
            });
        }
        Ok(self.num.eval(point) / d)
    }

    /// True when the denominator is nonzero at the point.
    pub fn defined_at(&self, point: &[BigRational]) -> bool {
        !self.den.eval(point).is_zero()
    }

    /// Round-trippable rendering: `num` or `(num)/(den)`.
    pub fn to_display(&self, names: &[String]) -> String {
        let n = self.num.to_display(names);
        if self.den.is_one() {
            n
        } else {
            format!("({})/({})", n, self.den.to_display(names))
        }
    }

    /// Stable fingerprint input for deterministic sampling streams.
    pub fn fingerprint_into(&self, acc: &mut u64) {
        fn mix(acc: &mut u64, bytes: &[u8]) {
            // FNV-1a, fixed parameters: stable across runs and platforms.
            for &b in bytes {
                *acc ^= b as u64;
                *acc = acc.wrapping_mul(0x100000001b3);
            }
        }
        for (m, c) in self.num.terms() {
            for &e in &m.0 {
                mix(acc, &e.to_le_bytes());
            }
            mix(acc, &c.to_signed_bytes_le());
        }
        mix(acc, b"/");
        for (m, c) in self.den.terms() {
            for &e in &m.0 {
                mix(acc, &e.to_le_bytes());
            }
            mix(acc, &c.to_signed_bytes_le());
        }
    }
}
