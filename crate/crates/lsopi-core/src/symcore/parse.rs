//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' exponent)?
//! atom   := INTEGER | IDENT | '(' expr ')'
//! exponent := ('-')? INTEGER | '(' ('-')? INTEGER ')'
//! ```
//!
//! Rational constants are written as quotients of integers (`3/4`), which
//! the grammar already covers via division. Unknown identifiers are
//! rejected against the variable table with their byte position.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Expr, Vars};
use crate::error::{Error, Result};

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a Vars,
}

pub fn parse(text: &str, vars: &Vars) -> Result<Expr> {
    let mut p = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        vars,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                let rhs = self.term()?;
                acc = acc.add(&rhs);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                acc = acc.sub(&rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                let rhs = self.unary()?;
                acc = acc.mul(&rhs);
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                acc = acc.div(&rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.eat(b'-') {
            let inner = self.unary()?;
            Ok(inner.neg())
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            let e = self.exponent()?;
            Ok(base.pow(e))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<i64> {
        self.skip_ws();
        let parenthesized = self.eat(b'(');
        self.skip_ws();
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected integer exponent"));
        }
        let digits = &self.text[start..self.pos];
        let mag: i64 = digits
            .parse()
            .map_err(|_| Error::ExponentRange(i64::MAX))?;
        if parenthesized {
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.error("expected `)` after exponent"));
            }
        }
        Ok(if neg { -mag } else { mag })
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(b'0'..=b'9') => self.integer(),
            Some(c) if c == b'_' || c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error("expected number, variable or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let digits = &self.text[start..self.pos];
        let n: BigInt = digits
            .parse()
            .map_err(|_| self.error("invalid integer literal"))?;
        Ok(Expr::lit(
            self.vars.clone(),
            BigRational::from_integer(n),
        ))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c == b'_' || c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        match self.vars.index_of(name) {
            Some(i) => Ok(Expr::var(self.vars.clone(), i)),
            None => Err(Error::UnknownVariable {
                name: name.to_string(),
                position: start,
            }),
        }
    }
}
