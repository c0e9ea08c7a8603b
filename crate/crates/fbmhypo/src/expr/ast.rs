use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Immutable expression tree over the variables `x1..xn` (stored 0-based).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Tanh(Arc<Expr>),
}

use Expr::*;

impl Expr {
    pub fn zero() -> Expr {
        Const(0.0)
    }
    pub fn one() -> Expr {
        Const(1.0)
    }
    pub fn var(i: usize) -> Expr {
        Var(i)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Const(c) => Some(*c),
            _ => None,
        }
    }
    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }
    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Largest variable index appearing in the tree, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Const(_) => None,
            Var(i) => Some(*i),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Neg(a) | Pow(a, _) | Sin(a) | Cos(a) | Exp(a) | Tanh(a) => a.max_var(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Const(_) | Var(_) => 1,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => 1 + a.node_count() + b.node_count(),
            Neg(a) | Pow(a, _) | Sin(a) | Cos(a) | Exp(a) | Tanh(a) => 1 + a.node_count(),
        }
    }

    /// Tree-walking evaluation; division by zero is a domain error.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Const(c) => *c,
            Var(i) => *x
                .get(*i)
                .ok_or_else(|| Error::UnknownVariable(format!("x{}", i + 1)))?,
            Add(a, b) => a.eval(x)? + b.eval(x)?,
            Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Div(a, b) => {
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(Error::Domain(format!("division by zero in `{self}`")));
                }
                a.eval(x)? / den
            }
            Neg(a) => -a.eval(x)?,
            Pow(a, n) => {
                let v = a.eval(x)?;
                if v == 0.0 && *n < 0 {
                    return Err(Error::Domain(format!("zero raised to a negative power in `{self}`")));
                }
                v.powi(*n)
            }
            Sin(a) => a.eval(x)?.sin(),
            Cos(a) => a.eval(x)?.cos(),
            Exp(a) => a.eval(x)?.exp(),
            Tanh(a) => a.eval(x)?.tanh(),
        })
    }

    /// Exact partial derivative with respect to variable `var` (0-based).
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Const(_) => Expr::zero(),
            Var(i) => Const(if *i == var { 1.0 } else { 0.0 }),
            Add(a, b) => add(a.diff(var), b.diff(var)),
            Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.diff(var), (**b).clone()),
                    mul((**a).clone(), b.diff(var)),
                );
                div(num, pow((**b).clone(), 2))
            }
            Neg(a) => neg(a.diff(var)),
            Pow(a, n) => mul(
                mul(Const(*n as f64), pow((**a).clone(), n - 1)),
                a.diff(var),
            ),
            Sin(a) => mul(cos((**a).clone()), a.diff(var)),
            Cos(a) => neg(mul(sin((**a).clone()), a.diff(var))),
            Exp(a) => mul(self.clone(), a.diff(var)),
            Tanh(a) => {
                // 1 - tanh^2
                let t = self.clone();
                mul(sub(Expr::one(), pow(t, 2)), a.diff(var))
            }
        }
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Add(Arc::new(a), Arc::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ if a == b => Expr::zero(),
        _ => Sub(Arc::new(a), Arc::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Mul(Arc::new(a), Arc::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Const(x / y),
        (Some(0.0), _) => Expr::zero(),
        (_, Some(1.0)) => a,
        _ => Div(Arc::new(a), Arc::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Const(c) => Const(-c),
        Neg(inner) => (*inner).clone(),
        other => Neg(Arc::new(other)),
    }
}

pub fn pow(a: Expr, n: i32) -> Expr {
    match (n, a.as_const()) {
        (0, _) => Expr::one(),
        (1, _) => a,
        (_, Some(c)) if !(c == 0.0 && n < 0) => Const(c.powi(n)),
        _ => Pow(Arc::new(a), n),
    }
}

macro_rules! unary {
    ($name:ident, $variant:ident, $f:ident) => {
        pub fn $name(a: Expr) -> Expr {
            match a.as_const() {
                Some(c) => Const(c.$f()),
                None => $variant(Arc::new(a)),
            }
        }
    };
}
unary!(sin, Sin, sin);
unary!(cos, Cos, cos);
unary!(exp, Exp, exp);
unary!(tanh, Tanh, tanh);

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Add(..) | Sub(..) => PREC_ADD,
            Mul(..) | Div(..) => PREC_MUL,
            Neg(..) => PREC_NEG,
            Const(c) if *c < 0.0 || c.is_sign_negative() => PREC_NEG,
            Pow(..) => PREC_POW,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let p = self.precedence();
        let paren = p < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Const(c) => write!(f, "{c:?}")?,
            Var(i) => write!(f, "x{}", i + 1)?,
            Add(a, b) => {
                a.write_at(f, PREC_ADD)?;
                f.write_str(" + ")?;
                b.write_at(f, PREC_ADD + 1)?;
            }
            Sub(a, b) => {
                a.write_at(f, PREC_ADD)?;
                f.write_str(" - ")?;
                b.write_at(f, PREC_ADD + 1)?;
            }
            Mul(a, b) => {
                a.write_at(f, PREC_MUL)?;
                f.write_str("*")?;
                b.write_at(f, PREC_MUL + 1)?;
            }
            Div(a, b) => {
                a.write_at(f, PREC_MUL)?;
                f.write_str("/")?;
                b.write_at(f, PREC_MUL + 1)?;
            }
            Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, PREC_NEG)?;
            }
            Pow(a, n) => {
                a.write_at(f, PREC_POW + 1)?;
                write!(f, "^{n}")?;
            }
            Sin(a) => write!(f, "sin({a})")?,
            Cos(a) => write!(f, "cos({a})")?,
            Exp(a) => write!(f, "exp({a})")?,
            Tanh(a) => write!(f, "tanh({a})")?,
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}
impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}
impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}
impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        div(self, rhs)
    }
}
impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}
