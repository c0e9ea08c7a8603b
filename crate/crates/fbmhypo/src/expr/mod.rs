//! Expression DSL for smooth vector fields: parsing, printing, evaluation,
//! exact differentiation and Lie brackets.

mod ast;
mod compile;
mod parse;

use std::fmt;

pub use ast::{add, cos, div, exp, mul, neg, pow, sin, sub, tanh, Expr};
pub use compile::{Program, ProgramVec};
pub use parse::parse_expr;

use crate::error::{Error, Result};

/// A vector field on R^n given by one expression per component.
pub type FieldExpr = Vec<Expr>;

/// Row-major n×n matrix of expressions.
pub type MatrixExpr = Vec<Vec<Expr>>;

/// Evaluate a vector of expressions at `x`.
pub fn eval(v: &[Expr], x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("evaluation point is not finite".into()));
    }
    v.iter().map(|e| e.eval(x)).collect()
}

/// Symbolic Jacobian `DV[i][j] = ∂V_i/∂x_j` for a field on R^n.
pub fn differentiate(v: &[Expr], n: usize) -> MatrixExpr {
    v.iter().map(|e| (0..n).map(|j| e.diff(j)).collect()).collect()
}

/// `M · w` for an expression matrix and vector.
pub fn mat_vec(m: &MatrixExpr, w: &[Expr]) -> FieldExpr {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(w)
                .fold(Expr::zero(), |acc, (a, b)| add(acc, mul(a.clone(), b.clone())))
        })
        .collect()
}

/// Lie bracket `[V, W] = DW·V - DV·W`.
pub fn lie_bracket(v: &[Expr], w: &[Expr]) -> Result<FieldExpr> {
    if v.len() != w.len() {
        return Err(Error::Dimension(format!(
            "bracket of fields of dimension {} and {}",
            v.len(),
            w.len()
        )));
    }
    let n = v.len();
    let a = mat_vec(&differentiate(w, n), v);
    let b = mat_vec(&differentiate(v, n), w);
    Ok(a.into_iter().zip(b).map(|(x, y)| sub(x, y)).collect())
}

/// Drift `V_0` and diffusion fields `V_1..V_d` on R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSet {
    n: usize,
    fields: Vec<FieldExpr>,
    bounded_claimed: Vec<bool>,
}

impl VectorFieldSet {
    /// Build from explicit fields; `fields[0]` is the drift.
    pub fn new(n: usize, fields: Vec<FieldExpr>, bounded_claimed: Vec<bool>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        if fields.len() < 2 {
            return Err(Error::Dimension("need a drift and at least one diffusion field".into()));
        }
        if bounded_claimed.len() != fields.len() {
            return Err(Error::Dimension("one bounded flag per field".into()));
        }
        for (k, f) in fields.iter().enumerate() {
            if f.len() != n {
                return Err(Error::Dimension(format!("V{k} has {} components, expected {n}", f.len())));
            }
            for e in f {
                if let Some(i) = e.max_var() {
                    if i >= n {
                        return Err(Error::UnknownVariable(format!("x{} in V{k}", i + 1)));
                    }
                }
            }
        }
        Ok(Self {
            n,
            fields,
            bounded_claimed,
        })
    }

    /// Parse a block of `V<k> = [...]` statements for the given dimensions.
    pub fn parse(text: &str, n: usize, d: usize) -> Result<Self> {
        Self::parse_block(text, 1, Some((n, d)))
    }

    /// Parse a block, inferring `n` from the component count and `d` from the
    /// highest field index.
    pub fn parse_infer(text: &str) -> Result<Self> {
        Self::parse_block(text, 1, None)
    }

    /// Parse a block whose first line is `first_line` in an enclosing file.
    pub fn parse_block(text: &str, first_line: usize, dims: Option<(usize, usize)>) -> Result<Self> {
        let stmts = parse::parse_statements(text, first_line, dims.map(|x| x.0))?;
        let Some(first) = stmts.first() else {
            return Err(Error::Parse {
                line: first_line,
                column: 1,
                message: "no field definitions".into(),
            });
        };
        let n = dims.map_or(first.components.len(), |x| x.0);
        let d = dims.map_or_else(|| stmts.iter().map(|s| s.index).max().unwrap_or(0), |x| x.1);
        let mut fields: Vec<Option<(FieldExpr, bool)>> = vec![None; d + 1];
        for s in stmts {
            let at = |message: String| Error::Parse {
                line: s.line,
                column: 1,
                message,
            };
            if s.index > d {
                return Err(at(format!("V{} exceeds the noise dimension d = {d}", s.index)));
            }
            if s.components.len() != n {
                return Err(Error::Dimension(format!(
                    "line {}: V{} has {} components, expected {n}",
                    s.line,
                    s.index,
                    s.components.len()
                )));
            }
            if fields[s.index].is_some() {
                return Err(at(format!("V{} defined twice", s.index)));
            }
            fields[s.index] = Some((s.components, s.bounded));
        }
        let mut fs = Vec::with_capacity(d + 1);
        let mut flags = Vec::with_capacity(d + 1);
        for (k, f) in fields.into_iter().enumerate() {
            let (f, b) = f.ok_or_else(|| Error::Dimension(format!("V{k} is missing")))?;
            fs.push(f);
            flags.push(b);
        }
        Self::new(n, fs, flags)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    /// Noise dimension.
    pub fn d(&self) -> usize {
        self.fields.len() - 1
    }
    pub fn field(&self, k: usize) -> &FieldExpr {
        &self.fields[k]
    }
    pub fn fields(&self) -> &[FieldExpr] {
        &self.fields
    }
    pub fn drift(&self) -> &FieldExpr {
        &self.fields[0]
    }
    pub fn bounded_claimed(&self, k: usize) -> bool {
        self.bounded_claimed[k]
    }

    pub fn eval_field(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("point of length {}, expected {}", x.len(), self.n)));
        }
        eval(&self.fields[k], x)
    }

    /// Fields are affine in x and the diffusion fields are constant.
    pub fn is_additive_linear(&self) -> bool {
        let n = self.n;
        let constant = |f: &FieldExpr| f.iter().all(|e| e.as_const().is_some());
        self.fields[1..].iter().all(constant)
            && differentiate(&self.fields[0], n).iter().all(|row| row.iter().all(|e| e.as_const().is_some()))
    }
}

impl fmt::Display for VectorFieldSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, field) in self.fields.iter().enumerate() {
            write!(f, "V{k} = [")?;
            for (i, e) in field.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{e}")?;
            }
            f.write_str("]")?;
            if self.bounded_claimed[k] {
                f.write_str(" bounded")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
