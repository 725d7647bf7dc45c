//! Exact scalar symbolic layer: expressions over named state variables with
//! rational-number coefficients.
//!
//! An [`Expr`] is an immutable expression tree (constants, variable
//! references, `+ - * /`, integer powers) together with a lazily computed
//! canonical form: a reduced quotient of integer polynomials ([`RatFun`]).
//! The canonical form is the single source of truth for equality, zero
//! tests, differentiation and evaluation; no floating point is involved
//! anywhere.

pub mod parse;
pub mod poly;
pub mod ratfun;

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_rational::BigRational;

use crate::error::{Error, Result};
pub use poly::{Monomial, Poly};
pub use ratfun::RatFun;

/// Shared, ordered list of variable names. Cheap to clone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vars(Arc<Vec<String>>);

impl Vars {
    pub fn new(names: Vec<String>) -> Vars {
        Vars(Arc::new(names))
    }

    pub fn from_strs(names: &[&str]) -> Vars {
        Vars::new(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn name(&self, i: usize) -> &str {
        &self.0[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    /// Extend with one more variable, returning the new table.
    pub fn with_appended(&self, name: &str) -> Vars {
        let mut v = self.0.as_ref().clone();
        v.push(name.to_string());
        Vars::new(v)
    }

    pub fn same_table(&self, other: &Vars) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

/// A rational point: one coordinate per variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Point(pub Vec<BigRational>);

impl Point {
    pub fn coords(&self) -> &[BigRational] {
        &self.0
    }
}

#[derive(Debug)]
enum ExprKind {
    Lit(BigRational),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, i64),
    /// Already-canonical leaf (results of engine arithmetic).
    Canon(RatFun),
}

#[derive(Debug)]
struct ExprNode {
    kind: ExprKind,
    canon: OnceLock<Result<RatFun>>,
}

/// Immutable symbolic expression over a fixed variable table.
#[derive(Clone, Debug)]
pub struct Expr {
    vars: Vars,
    node: Arc<ExprNode>,
}

impl Expr {
    fn from_kind(vars: Vars, kind: ExprKind) -> Expr {
        Expr {
            vars,
            node: Arc::new(ExprNode {
                kind,
                canon: OnceLock::new(),
            }),
        }
    }

    pub fn from_ratfun(vars: Vars, r: RatFun) -> Expr {
        debug_assert_eq!(vars.len(), r.arity());
        Expr::from_kind(vars, ExprKind::Canon(r))
    }

    pub fn lit(vars: Vars, q: BigRational) -> Expr {
        Expr::from_kind(vars, ExprKind::Lit(q))
    }

    pub fn int(vars: Vars, c: i64) -> Expr {
        Expr::lit(vars, BigRational::from_integer(c.into()))
    }

    pub fn var(vars: Vars, index: usize) -> Expr {
        assert!(index < vars.len());
        Expr::from_kind(vars, ExprKind::Var(index))
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::from_kind(self.vars.clone(), ExprKind::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        Expr::from_kind(self.vars.clone(), ExprKind::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        Expr::from_kind(self.vars.clone(), ExprKind::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Expr) -> Expr {
        Expr::from_kind(self.vars.clone(), ExprKind::Div(self.clone(), other.clone()))
    }

    pub fn neg(&self) -> Expr {
        Expr::from_kind(self.vars.clone(), ExprKind::Neg(self.clone()))
    }

    pub fn pow(&self, e: i64) -> Expr {
        Expr::from_kind(self.vars.clone(), ExprKind::Pow(self.clone(), e))
    }

    /// Canonical form: reduced polynomial quotient. Cached per node.
    pub fn canon(&self) -> Result<RatFun> {
        self.node
            .canon
            .get_or_init(|| self.compute_canon())
            .clone()
    }

    fn compute_canon(&self) -> Result<RatFun> {
        let arity = self.vars.len();
        match &self.node.kind {
            ExprKind::Lit(q) => Ok(RatFun::from_rational(arity, q)),
            ExprKind::Var(i) => Ok(RatFun::var(arity, *i)),
            ExprKind::Add(a, b) => Ok(a.canon()?.add(&b.canon()?)),
            ExprKind::Sub(a, b) => Ok(a.canon()?.sub(&b.canon()?)),
            ExprKind::Mul(a, b) => Ok(a.canon()?.mul(&b.canon()?)),
            ExprKind::Div(a, b) => a.canon()?.div(&b.canon()?),
            ExprKind::Neg(a) => Ok(a.canon()?.neg()),
            ExprKind::Pow(a, e) => a.canon()?.pow(*e),
            ExprKind::Canon(r) => Ok(r.clone()),
        }
    }

    /// Rebuild as a canonical-leaf expression; idempotent.
    pub fn normalize(&self) -> Result<Expr> {
        Ok(Expr::from_ratfun(self.vars.clone(), self.canon()?))
    }

    /// Exact partial derivative, returned in canonical form.
    pub fn differentiate(&self, var: usize) -> Result<Expr> {
        if var >= self.vars.len() {
            return Err(Error::Dimension(format!(
                "variable index {} out of range for arity {}",
                var,
                self.vars.len()
            )));
        }
        Ok(Expr::from_ratfun(
            self.vars.clone(),
            self.canon()?.derivative(var),
        ))
    }

    /// Decide `self == 0` symbolically (canonical numerator is zero).
    pub fn equals_zero(&self) -> Result<bool> {
        Ok(self.canon()?.is_zero())
    }

    /// Decide symbolic equality via the difference's canonical form.
    pub fn equals(&self, other: &Expr) -> Result<bool> {
        Ok(self.canon()? == other.canon()?)
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate(&self, point: &Point) -> Result<BigRational> {
        if point.0.len() != self.vars.len() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, expression has arity {}",
                point.0.len(),
                self.vars.len()
            )));
        }
        self.canon()?.eval(point.coords())
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // Precedence levels: 0 add, 1 mul, 2 unary, 3 power/atom.
        let names = self.vars.names();
        match &self.node.kind {
            ExprKind::Lit(q) => {
                let neg = q < &BigRational::from_integer(0.into());
                let need = (neg && prec >= 2) || (!q.is_integer() && prec >= 3);
                if need {
                    write!(f, "({})", q)
                } else {
                    write!(f, "{}", q)
                }
            }
            ExprKind::Var(i) => write!(f, "{}", names[*i]),
            ExprKind::Add(a, b) => {
                let need = prec >= 1;
                if need {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 0)?;
                f.write_str(" + ")?;
                b.fmt_prec(f, 1)?;
                if need {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExprKind::Sub(a, b) => {
                let need = prec >= 1;
                if need {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 0)?;
                f.write_str(" - ")?;
                b.fmt_prec(f, 1)?;
                if need {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExprKind::Mul(a, b) => {
                let need = prec >= 2;
                if need {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 1)?;
                f.write_str("*")?;
                b.fmt_prec(f, 2)?;
                if need {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExprKind::Div(a, b) => {
                let need = prec >= 2;
                if need {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 1)?;
                f.write_str("/")?;
                b.fmt_prec(f, 2)?;
                if need {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExprKind::Neg(a) => {
                let need = prec >= 2;
                if need {
                    f.write_str("(")?;
                }
                f.write_str("-")?;
                a.fmt_prec(f, 2)?;
                if need {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExprKind::Pow(a, e) => {
                a.fmt_prec(f, 3)?;
                write!(f, "^{}", e)
            }
            ExprKind::Canon(r) => {
                let s = r.to_display(names);
                if prec >= 1 && (s.contains(' ') || s.contains('/') || s.starts_with('-')) {
                    write!(f, "({})", s)
                } else {
                    write!(f, "{}", s)
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Parse an expression over the given variables.
pub fn parse_expr(text: &str, vars: &Vars) -> Result<Expr> {
    parse::parse(text, vars)
}
