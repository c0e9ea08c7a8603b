//! Recursive-descent parser for expressions and field-set blocks.
//!
//! Grammar:
//! ```text
//! block   := stmt ((newline | ';') stmt)*
//! stmt    := 'V' int '=' '[' expr (',' expr)* ']' ['bounded']
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := atom ['^' ['-'] int]
//! atom    := number | 'x' int | 'pi' | func '(' expr ')' | '(' expr ')'
//! ```

use super::ast::{self, Expr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Sep,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str, line0: usize) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, line0, 1usize);
    let mut depth = 0i32;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '\n' {
            if depth == 0 {
                out.push(Token { tok: Tok::Sep, line: tl, column: tc });
            }
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == ';' {
            out.push(Token { tok: Tok::Sep, line: tl, column: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("malformed number `{s}`"),
            })?;
            col += i - start;
            out.push(Token { tok: Tok::Num(v), line: tl, column: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        if "+-*/^()[],=".contains(c) {
            match c {
                '[' | '(' => depth += 1,
                ']' | ')' => depth -= 1,
                _ => {}
            }
            out.push(Token { tok: Tok::Sym(c), line: tl, column: tc });
            i += 1;
            col += 1;
            continue;
        }
        return Err(Error::Parse {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    n: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }
    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }
    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }
    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`, found {}", describe(&self.peek().tok)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = ast::add(lhs, self.term()?);
            } else if self.eat('-') {
                lhs = ast::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = ast::mul(lhs, self.unary()?);
            } else if self.eat('/') {
                lhs = ast::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(ast::neg(self.unary()?));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let negative = self.eat('-');
        match self.peek().tok {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                self.bump();
                let n = if negative { -(v as i32) } else { v as i32 };
                Ok(ast::pow(base, n))
            }
            _ => self.err("exponent must be an integer literal"),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(*v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                let func: Option<fn(Expr) -> Expr> = match name.as_str() {
                    "sin" => Some(ast::sin),
                    "cos" => Some(ast::cos),
                    "exp" => Some(ast::exp),
                    "tanh" => Some(ast::tanh),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    return Ok(f(e));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    let bad = idx == 0 || self.n.is_some_and(|n| idx > n);
                    if bad {
                        return Err(Error::Parse {
                            line: t.line,
                            column: t.column,
                            message: format!("unknown variable `{name}`"),
                        });
                    }
                    return Ok(Expr::Var(idx - 1));
                }
                Err(Error::Parse {
                    line: t.line,
                    column: t.column,
                    message: format!("unknown identifier `{name}`"),
                })
            }
            other => self.err(format!("expected an expression, found {}", describe(other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Sep => "end of statement".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse a single expression. `n` bounds the admissible variable indices.
pub fn parse_expr(text: &str, n: Option<usize>) -> Result<Expr> {
    let toks = lex(text, 1)?;
    let mut p = Parser { toks, pos: 0, n };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return p.err(format!("unexpected {}", describe(&p.peek().tok)));
    }
    Ok(e)
}

/// One parsed `V<k> = [...]` statement.
#[derive(Debug, Clone)]
pub(crate) struct FieldStmt {
    pub index: usize,
    pub components: Vec<Expr>,
    pub bounded: bool,
    pub line: usize,
}

pub(crate) fn parse_statements(text: &str, first_line: usize, n: Option<usize>) -> Result<Vec<FieldStmt>> {
    let toks = lex(text, first_line)?;
    let mut p = Parser { toks, pos: 0, n };
    let mut out = Vec::new();
    loop {
        while p.peek().tok == Tok::Sep {
            p.bump();
        }
        if p.peek().tok == Tok::End {
            break;
        }
        let head = p.bump();
        let index = match &head.tok {
            Tok::Ident(s) if s.starts_with('V') => s[1..].parse::<usize>().ok(),
            _ => None,
        };
        let Some(index) = index else {
            return Err(Error::Parse {
                line: head.line,
                column: head.column,
                message: format!("expected a field name `V<k>`, found {}", describe(&head.tok)),
            });
        };
        p.expect('=')?;
        p.expect('[')?;
        let mut components = vec![p.expr()?];
        while p.eat(',') {
            components.push(p.expr()?);
        }
        p.expect(']')?;
        let mut bounded = false;
        if let Tok::Ident(s) = &p.peek().tok {
            if s == "bounded" {
                bounded = true;
                p.bump();
            }
        }
        match p.peek().tok {
            Tok::Sep | Tok::End => {}
            ref other => return p.err(format!("unexpected {} after field definition", describe(other))),
        }
        out.push(FieldStmt {
            index,
            components,
            bounded,
            line: head.line,
        });
    }
    Ok(out)
}
