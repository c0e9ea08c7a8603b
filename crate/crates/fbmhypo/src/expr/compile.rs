//! Postfix compilation of expression trees for fast repeated evaluation.

use super::ast::Expr;

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Pow(i32),
    Sin,
    Cos,
    Exp,
    Tanh,
}

/// A compiled scalar expression.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    pub fn compile(e: &Expr) -> Self {
        let mut ops = Vec::with_capacity(e.node_count());
        emit(e, &mut ops);
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                _ => {}
            }
            max = max.max(depth);
        }
        Self { ops, depth: max }
    }

    /// Constant value if the program is a single literal.
    pub fn as_const(&self) -> Option<f64> {
        match self.ops.as_slice() {
            [Op::Const(c)] => Some(*c),
            _ => None,
        }
    }

    /// Evaluate with a caller-provided scratch stack. Division by zero
    /// yields a non-finite value rather than an error.
    #[inline]
    pub fn eval(&self, x: &[f64], stack: &mut Vec<f64>) -> f64 {
        if let [Op::Const(c)] = self.ops.as_slice() {
            return *c;
        }
        stack.clear();
        stack.reserve(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Var(i) => stack.push(x[i]),
                Op::Add => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() += b;
                }
                Op::Sub => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() -= b;
                }
                Op::Mul => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() *= b;
                }
                Op::Div => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() /= b;
                }
                Op::Neg => {
                    let a = stack.last_mut().unwrap();
                    *a = -*a;
                }
                Op::Pow(n) => {
                    let a = stack.last_mut().unwrap();
                    *a = a.powi(n);
                }
                Op::Sin => {
                    let a = stack.last_mut().unwrap();
                    *a = a.sin();
                }
                Op::Cos => {
                    let a = stack.last_mut().unwrap();
                    *a = a.cos();
                }
                Op::Exp => {
                    let a = stack.last_mut().unwrap();
                    *a = a.exp();
                }
                Op::Tanh => {
                    let a = stack.last_mut().unwrap();
                    *a = a.tanh();
                }
            }
        }
        stack[0]
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var(i) => ops.push(Op::Var(*i)),
        Expr::Add(a, b) => bin(a, b, Op::Add, ops),
        Expr::Sub(a, b) => bin(a, b, Op::Sub, ops),
        Expr::Mul(a, b) => bin(a, b, Op::Mul, ops),
        Expr::Div(a, b) => bin(a, b, Op::Div, ops),
        Expr::Neg(a) => un(a, Op::Neg, ops),
        Expr::Pow(a, n) => un(a, Op::Pow(*n), ops),
        Expr::Sin(a) => un(a, Op::Sin, ops),
        Expr::Cos(a) => un(a, Op::Cos, ops),
        Expr::Exp(a) => un(a, Op::Exp, ops),
        Expr::Tanh(a) => un(a, Op::Tanh, ops),
    }
}

fn bin(a: &Expr, b: &Expr, op: Op, ops: &mut Vec<Op>) {
    emit(a, ops);
    emit(b, ops);
    ops.push(op);
}

fn un(a: &Expr, op: Op, ops: &mut Vec<Op>) {
    emit(a, ops);
    ops.push(op);
}

/// A compiled list of scalar expressions evaluated together (a vector or a
/// row-major matrix of expressions).
#[derive(Debug, Clone)]
pub struct ProgramVec {
    progs: Vec<Program>,
}

impl ProgramVec {
    pub fn compile<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> Self {
        Self {
            progs: exprs.into_iter().map(Program::compile).collect(),
        }
    }
    pub fn len(&self) -> usize {
        self.progs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.progs.is_empty()
    }
    /// True when every entry is a literal zero.
    pub fn is_zero(&self) -> bool {
        self.progs.iter().all(|p| p.as_const() == Some(0.0))
    }
    /// True when every entry is a literal.
    pub fn is_constant(&self) -> bool {
        self.progs.iter().all(|p| p.as_const().is_some())
    }
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64], stack: &mut Vec<f64>) {
        for (o, p) in out.iter_mut().zip(&self.progs) {
            *o = p.eval(x, stack);
        }
    }
}
