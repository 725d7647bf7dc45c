//! Sparse multivariate polynomials with arbitrary-precision integer
//! coefficients.
//!
//! Monomials are kept in graded lexicographic order (total degree first,
//! then lexicographic with the first variable strongest). All arithmetic is
//! exact; division helpers either divide exactly or report failure, so no
//! rounding can ever enter a decision path.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exponent vector of a monomial. All monomials of a polynomial share the
/// same arity (number of variables).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(arity: usize) -> Self {
        Monomial(vec![0; arity])
    }

    pub fn var(arity: usize, index: usize) -> Self {
        let mut e = vec![0; arity];
        e[index] = 1;
        Monomial(e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise divisibility.
    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// Graded lexicographic order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => self.0.cmp(&other.0),
            ord => ord,
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial over the integers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly {
    arity: usize,
    /// Nonzero terms only, keyed by monomial in graded-lex order.
    terms: BTreeMap<Monomial, BigInt>,
}

impl Poly {
    pub fn zero(arity: usize) -> Self {
        Poly {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(arity: usize) -> Self {
        Poly::constant(arity, BigInt::one())
    }

    pub fn constant(arity: usize, c: BigInt) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(arity), c);
        }
        Poly { arity, terms }
    }

    pub fn var(arity: usize, index: usize) -> Self {
        assert!(index < arity, "variable index out of range");
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(arity, index), BigInt::one());
        Poly { arity, terms }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Monomial::one(self.arity))
                .is_some_and(|c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
            || (self.terms.len() == 1 && self.terms.keys().next().unwrap().total_degree() == 0)
    }

    /// The constant value, if this polynomial is constant.
    pub fn constant_value(&self) -> Option<BigInt> {
        if self.terms.is_empty() {
            Some(BigInt::zero())
        } else if self.is_constant() {
            Some(self.terms.values().next().unwrap().clone())
        } else {
            None
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(Monomial::total_degree)
            .max()
            .unwrap_or(0)
    }

    /// Degree in one variable.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.0[var]).max().unwrap_or(0)
    }

    /// Largest monomial (graded-lex) with its coefficient.
    pub fn leading_term(&self) -> Option<(&Monomial, &BigInt)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff_sign_positive(&self) -> bool {
        self.leading_term().map(|(_, c)| c.is_positive()).unwrap_or(true)
    }

    fn insert_term(terms: &mut BTreeMap<Monomial, BigInt>, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.arity, other.arity);
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_term(&mut terms, m.clone(), c.clone());
        }
        Poly {
            arity: self.arity,
            terms,
        }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.arity, other.arity);
        let mut terms = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                Self::insert_term(&mut terms, m1.mul(m2), c1 * c2);
            }
        }
        Poly {
            arity: self.arity,
            terms,
        }
    }

    pub fn mul_scalar(&self, c: &BigInt) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.arity);
        }
        Poly {
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn mul_term(&self, m: &Monomial, c: &BigInt) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.arity);
        }
        Poly {
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(mm, k)| (mm.mul(m), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(self.arity);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Reinterpret over a larger variable set (new variables appended with
    /// exponent zero). Canonical form is preserved: the monomial order on
    /// old variables is unchanged by trailing zeros.
    pub fn extended(&self, new_arity: usize) -> Poly {
        assert!(new_arity >= self.arity, "extended arity must not shrink");
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut exps = m.0.clone();
                exps.resize(new_arity, 0);
                (Monomial(exps), c.clone())
            })
            .collect();
        Poly {
            arity: new_arity,
            terms,
        }
    }

    /// Partial derivative with respect to one variable.
    pub fn derivative(&self, var: usize) -> Poly {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[var] = e - 1;
            Self::insert_term(&mut terms, m2, c * BigInt::from(e));
        }
        Poly {
            arity: self.arity,
            terms,
        }
    }

    /// Exact evaluation at a rational point (coordinates indexed by variable).
    pub fn eval(&self, point: &[BigRational]) -> BigRational {
        debug_assert_eq!(point.len(), self.arity);
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = BigRational::from(c.clone());
            for (v, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t *= &point[v];
                }
            }
            acc += t;
        }
        acc
    }

    /// GCD of all coefficients (non-negative); zero polynomial has content 0.
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Divide all coefficients by an exact common divisor.
    pub fn div_scalar_exact(&self, d: &BigInt) -> Result<Poly> {
        if d.is_zero() {
            return Err(Error::Internal("division by zero scalar".into()));
        }
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let (q, r) = c.div_rem(d);
            if !r.is_zero() {
                return Err(Error::Internal("non-exact scalar division".into()));
            }
            terms.insert(m.clone(), q);
        }
        Ok(Poly {
            arity: self.arity,
            terms,
        })
    }

    /// Primitive part: the polynomial divided by its content, with leading
    /// coefficient made positive. Zero stays zero.
    pub fn primitive_part(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let mut c = self.content();
        if !self.leading_coeff_sign_positive() {
            c = -c;
        }
        self.div_scalar_exact(&c).expect("content divides")
    }

    /// Exact multivariate division: returns `self / divisor` when the
    /// division leaves no remainder, `None` otherwise.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        debug_assert_eq!(self.arity, divisor.arity);
        if divisor.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero(self.arity));
        }
        let (dm, dc) = divisor.leading_term().expect("nonzero divisor");
        let dm = dm.clone();
        let dc = dc.clone();
        let mut rem = self.clone();
        let mut quo = BTreeMap::new();
        while !rem.is_zero() {
            let (rm, rc) = rem.leading_term().expect("nonzero remainder");
            if !dm.divides(rm) {
                return None;
            }
            let (qc, rr) = rc.div_rem(&dc);
            if !rr.is_zero() {
                return None;
            }
            let qm = rm.div(&dm);
            rem = rem.sub(&divisor.mul_term(&qm, &qc));
            quo.insert(qm, qc);
        }
        Some(Poly {
            arity: self.arity,
            terms: quo,
        })
    }

    /// View as a univariate polynomial in `var` with `Poly` coefficients
    /// (dense vector indexed by the degree in `var`; coefficients keep the
    /// full arity with zero exponent on `var`).
    fn coeffs_in(&self, var: usize) -> Vec<Poly> {
        let d = self.degree_in(var) as usize;
        let mut out = vec![Poly::zero(self.arity); d + 1];
        for (m, c) in &self.terms {
            let e = m.0[var] as usize;
            let mut m2 = m.clone();
            m2.0[var] = 0;
            Self::insert_term(&mut out[e].terms, m2, c.clone());
        }
        out
    }

    fn from_coeffs_in(arity: usize, var: usize, coeffs: &[Poly]) -> Poly {
        let mut acc = Poly::zero(arity);
        for (e, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut m = Monomial::one(arity);
            m.0[var] = e as u32;
            acc = acc.add(&c.mul_term(&m, &BigInt::one()));
        }
        acc
    }

    /// Greatest common divisor over the integers (content included), with
    /// positive leading coefficient. Computed by a primitive polynomial
    /// remainder sequence, recursing on the number of variables.
    pub fn gcd(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.arity, other.arity);
        if self.is_zero() {
            return other.primitive_signed();
        }
        if other.is_zero() {
            return self.primitive_signed();
        }
        // Integer contents combine at the end.
        let ca = self.content();
        let cb = other.content();
        let cg = ca.gcd(&cb);
        let a = self.div_scalar_exact(&ca).expect("content divides");
        let b = other.div_scalar_exact(&cb).expect("content divides");
        if !gcd_worth_attempting(&a, &b) {
            // Degrade to the integer-content gcd: still a common divisor,
            // the quotient merely stays under-reduced.
            return Poly::constant(self.arity, cg);
        }
        let g = Self::gcd_primitive(&a, &b);
        // Size-gated recursion inside the remainder sequence can leave `g`
        // carrying unextracted content, so accept it only after checking it
        // divides both inputs; otherwise settle for the integer content.
        if a.div_exact(&g).is_some() && b.div_exact(&g).is_some() {
            g.mul_scalar(&cg)
        } else {
            Poly::constant(self.arity, cg)
        }
    }

    /// Like `primitive_part` but keeps sign normalization only (used when a
    /// zero argument short-circuits gcd).
    fn primitive_signed(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        if self.leading_coeff_sign_positive() {
            self.clone()
        } else {
            self.neg()
        }
    }

    /// GCD of primitive (integer content 1) polynomials.
    /// Primitive polynomial remainder sequence. Operands past the size
    /// gate fall back to the content-level gcd (a valid common divisor),
    /// so a single call can never run away.
    fn gcd_primitive(a: &Poly, b: &Poly) -> Poly {
        // Pick the highest variable actually present; if none, both are
        // constants with content 1, so the gcd is 1.
        let arity = a.arity;
        let var = (0..arity)
            .rev()
            .find(|&v| a.degree_in(v) > 0 || b.degree_in(v) > 0);
        let var = match var {
            Some(v) => v,
            None => return Poly::one(arity),
        };
        if a.degree_in(var) == 0 || b.degree_in(var) == 0 {
            // One side is free of the main variable: gcd divides the other
            // side's coefficients.
            let (flat, deep) = if a.degree_in(var) == 0 { (a, b) } else { (b, a) };
            let mut g = flat.clone();
            for c in deep.coeffs_in(var) {
                if g.is_one() {
                    break;
                }
                if !c.is_zero() {
                    g = g.gcd(&c);
                }
            }
            return g.primitive_signed();
        }

        // Univariate view in `var`; primitive PRS.
        let (mut p, mut q) = if a.degree_in(var) >= b.degree_in(var) {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        // Contents with respect to the main variable.
        let cont = |f: &Poly| -> Poly {
            let cs = f.coeffs_in(var);
            let mut g = Poly::zero(arity);
            for c in cs {
                if c.is_zero() {
                    continue;
                }
                g = if g.is_zero() { c } else { g.gcd(&c) };
                if g.is_one() {
                    break;
                }
            }
            g
        };
        let cp = cont(&p);
        let cq = cont(&q);
        let cg = cp.gcd(&cq);
        p = p.div_exact(&cp).expect("content divides");
        q = q.div_exact(&cq).expect("content divides");
        loop {
            if !gcd_worth_attempting(&p, &q) {
                // The sequence is growing past the gate: settle for the
                // content gcd, which divides both inputs.
                return cg.primitive_signed();
            }
            let r = Self::pseudo_rem(&p, &q, var);
            if r.is_zero() {
                break;
            }
            let rc = cont(&r);
            p = q;
            q = r.div_exact(&rc).expect("content divides");
            if q.degree_in(var) == 0 {
                // Coefficient gcds already extracted; remainder is a unit.
                q = Poly::one(arity);
                break;
            }
        }
        cg.mul(&q).primitive_signed()
    }

    /// Pseudo-remainder of `a` by `b` in variable `var`:
    /// `lc(b)^(deg a - deg b + 1) * a  mod  b`.
    fn pseudo_rem(a: &Poly, b: &Poly, var: usize) -> Poly {
        let da = a.degree_in(var) as i64;
        let db = b.degree_in(var) as i64;
        debug_assert!(db >= 1 && da >= db);
        let bc = b.coeffs_in(var);
        let lc_b = bc.last().expect("nonzero").clone();
        let mut rc = a.coeffs_in(var);
        let mut k = da;
        while k >= db && rc.iter().any(|c| !c.is_zero()) {
            let deg_r = rc
                .iter()
                .rposition(|c| !c.is_zero())
                .map(|d| d as i64)
                .unwrap_or(-1);
            if deg_r < db {
                break;
            }
            let lead = rc[deg_r as usize].clone();
            // r <- lc(b) * r - lead * x^(deg_r - db) * b
            for c in rc.iter_mut() {
                *c = c.mul(&lc_b);
            }
            let shift = (deg_r - db) as usize;
            for (i, bci) in bc.iter().enumerate() {
                let idx = i + shift;
                rc[idx] = rc[idx].sub(&lead.mul(bci));
            }
            k = deg_r - 1;
        }
        // Make the multiplier exactly lc^(da-db+1) to match the definition;
        // extra factors do not matter for a primitive PRS, so skip that
        // bookkeeping and return what we have.
        let _ = k;
        Poly::from_coeffs_in(a.arity, var, &rc)
    }

    /// Render with explicit `*` and `^`, terms in descending graded-lex
    /// order, for round-trippable printing.
    pub fn to_display(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.total_degree() == 0 {
                factors.push(abs.to_string());
            }
            for (v, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if e == 1 {
                    factors.push(names[v].clone());
                } else {
                    factors.push(format!("{}^{}", names[v], e));
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

/// Size gate for the exact gcd: beyond these bounds the primitive
/// remainder sequence tends to explode, and callers are better served by
/// an under-reduced fraction than by an unbounded computation.
fn gcd_worth_attempting(a: &Poly, b: &Poly) -> bool {
    const MAX_TERMS: usize = 120;
    const MAX_DEGREE: u32 = 14;
    a.num_terms() <= MAX_TERMS
        && b.num_terms() <= MAX_TERMS
        && a.total_degree() <= MAX_DEGREE
        && b.total_degree() <= MAX_DEGREE
}
