//! Small arithmetic expression language over complex numbers.
//!
//! Grammar: numbers, named variables, the constants `i`, `pi`, `e`, binary
//! `+ - * / ^` (with `^` right-associative and binding tighter than unary
//! minus), parentheses and the functions `sqrt exp log ln sin cos tan sinh
//! cosh tanh sech arctan atan arcsin asin arccos acos arccosh acosh arcsinh
//! asinh`. Expressions can be differentiated symbolically with respect to any
//! variable, which is how free functions get their derivatives and how wave
//! vectors given as expressions get their u-derivatives.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fun {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sech,
    Atan,
    Asin,
    Acos,
    Acosh,
    Asinh,
}

impl Fun {
    fn from_name(s: &str) -> Option<Fun> {
        Some(match s {
            "sqrt" => Fun::Sqrt,
            "exp" => Fun::Exp,
            "log" | "ln" => Fun::Log,
            "sin" => Fun::Sin,
            "cos" => Fun::Cos,
            "tan" => Fun::Tan,
            "sinh" => Fun::Sinh,
            "cosh" => Fun::Cosh,
            "tanh" => Fun::Tanh,
            "sech" => Fun::Sech,
            "arctan" | "atan" => Fun::Atan,
            "arcsin" | "asin" => Fun::Asin,
            "arccos" | "acos" => Fun::Acos,
            "arccosh" | "acosh" => Fun::Acosh,
            "arcsinh" | "asinh" => Fun::Asinh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Fun::Sqrt => "sqrt",
            Fun::Exp => "exp",
            Fun::Log => "log",
            Fun::Sin => "sin",
            Fun::Cos => "cos",
            Fun::Tan => "tan",
            Fun::Sinh => "sinh",
            Fun::Cosh => "cosh",
            Fun::Tanh => "tanh",
            Fun::Sech => "sech",
            Fun::Atan => "atan",
            Fun::Asin => "asin",
            Fun::Acos => "acos",
            Fun::Acosh => "acosh",
            Fun::Asinh => "asinh",
        }
    }

    fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Fun::Sqrt => {
                if z.im == 0.0 && z.re >= 0.0 {
                    Complex64::new(z.re.sqrt(), 0.0)
                } else {
                    z.sqrt()
                }
            }
            Fun::Exp => z.exp(),
            Fun::Log => z.ln(),
            Fun::Sin => z.sin(),
            Fun::Cos => z.cos(),
            Fun::Tan => z.tan(),
            Fun::Sinh => z.sinh(),
            Fun::Cosh => z.cosh(),
            Fun::Tanh => z.tanh(),
            Fun::Sech => z.cosh().inv(),
            Fun::Atan => z.atan(),
            Fun::Asin => z.asin(),
            Fun::Acos => z.acos(),
            Fun::Acosh => z.acosh(),
            Fun::Asinh => z.asinh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(Complex64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Fun, Box<Node>),
}

fn c(re: f64) -> Node {
    Node::Const(Complex64::new(re, 0.0))
}

fn is_const(n: &Node, v: f64) -> bool {
    matches!(n, Node::Const(z) if z.re == v && z.im == 0.0)
}

fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => c(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (&a, &b) {
        _ if is_const(&a, 0.0) => c(0.0),
        _ if is_const(&b, 1.0) => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(x) => Node::Const(-x),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn pow(a: Node, b: Node) -> Node {
    if is_const(&b, 0.0) {
        return c(1.0);
    }
    if is_const(&b, 1.0) {
        return a;
    }
    Node::Pow(Box::new(a), Box::new(b))
}

fn call(f: Fun, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

fn powc(base: Complex64, ex: Complex64) -> Complex64 {
    if ex.im == 0.0 && ex.re.fract() == 0.0 && ex.re.abs() <= 64.0 {
        base.powi(ex.re as i32)
    } else if ex.im == 0.0 && base.im == 0.0 && base.re >= 0.0 {
        Complex64::new(base.re.powf(ex.re), 0.0)
    } else if base == Complex64::new(0.0, 0.0) {
        Complex64::new(0.0, 0.0)
    } else {
        base.powc(ex)
    }
}

impl Node {
    fn eval(&self, vars: &[Complex64]) -> Complex64 {
        match self {
            Node::Const(z) => *z,
            Node::Var(k) => vars[*k],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => powc(a.eval(vars), b.eval(vars)),
            Node::Call(f, a) => f.apply(a.eval(vars)),
        }
    }

    fn depends_on(&self, k: usize) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(j) => *j == k,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on(k),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.depends_on(k) || b.depends_on(k),
        }
    }

    fn diff(&self, k: usize) -> Node {
        if !self.depends_on(k) {
            return c(0.0);
        }
        match self {
            Node::Const(_) => c(0.0),
            Node::Var(j) => c(if *j == k { 1.0 } else { 0.0 }),
            Node::Neg(a) => neg(a.diff(k)),
            Node::Add(a, b) => add(a.diff(k), b.diff(k)),
            Node::Sub(a, b) => sub(a.diff(k), b.diff(k)),
            Node::Mul(a, b) => add(
                mul(a.diff(k), (**b).clone()),
                mul((**a).clone(), b.diff(k)),
            ),
            Node::Div(a, b) => div(
                sub(
                    mul(a.diff(k), (**b).clone()),
                    mul((**a).clone(), b.diff(k)),
                ),
                pow((**b).clone(), c(2.0)),
            ),
            Node::Pow(a, b) => {
                if !b.depends_on(k) {
                    // d(a^n) = n a^(n-1) a'
                    mul(
                        mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), c(1.0)))),
                        a.diff(k),
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(k), call(Fun::Log, (**a).clone())),
                            div(mul((**b).clone(), a.diff(k)), (**a).clone()),
                        ),
                    )
                }
            }
            Node::Call(f, a) => {
                let g = (**a).clone();
                let outer = match f {
                    Fun::Sqrt => div(c(0.5), call(Fun::Sqrt, g)),
                    Fun::Exp => call(Fun::Exp, g),
                    Fun::Log => div(c(1.0), g),
                    Fun::Sin => call(Fun::Cos, g),
                    Fun::Cos => neg(call(Fun::Sin, g)),
                    Fun::Tan => div(c(1.0), pow(call(Fun::Cos, g), c(2.0))),
                    Fun::Sinh => call(Fun::Cosh, g),
                    Fun::Cosh => call(Fun::Sinh, g),
                    Fun::Tanh => sub(c(1.0), pow(call(Fun::Tanh, g), c(2.0))),
                    Fun::Sech => neg(mul(call(Fun::Sech, g.clone()), call(Fun::Tanh, g))),
                    Fun::Atan => div(c(1.0), add(c(1.0), pow(g, c(2.0)))),
                    Fun::Asin => div(c(1.0), call(Fun::Sqrt, sub(c(1.0), pow(g, c(2.0))))),
                    Fun::Acos => neg(div(c(1.0), call(Fun::Sqrt, sub(c(1.0), pow(g, c(2.0)))))),
                    Fun::Acosh => div(
                        c(1.0),
                        mul(
                            call(Fun::Sqrt, sub(g.clone(), c(1.0))),
                            call(Fun::Sqrt, add(g, c(1.0))),
                        ),
                    ),
                    Fun::Asinh => div(c(1.0), call(Fun::Sqrt, add(pow(g, c(2.0)), c(1.0)))),
                };
                mul(outer, a.diff(k))
            }
        }
    }

    fn fmt_with(&self, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(z) => {
                if z.im == 0.0 {
                    write!(f, "{}", z.re)
                } else {
                    write!(f, "({}+{}*i)", z.re, z.im)
                }
            }
            Node::Var(k) => write!(f, "{}", names[*k]),
            Node::Neg(a) => {
                write!(f, "(-")?;
                a.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                let op = match self {
                    Node::Add(..) => "+",
                    Node::Sub(..) => "-",
                    Node::Mul(..) => "*",
                    Node::Div(..) => "/",
                    _ => "^",
                };
                write!(f, "(")?;
                a.fmt_with(names, f)?;
                write!(f, "{op}")?;
                b.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Call(fun, a) => {
                write!(f, "{}(", fun.name())?;
                a.fmt_with(names, f)?;
                write!(f, ")")
            }
        }
    }
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Clone)]
pub struct Expr {
    root: Arc<Node>,
    vars: Arc<Vec<String>>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_with(&self.vars, f)
    }
}

impl Expr {
    /// Parse `src`; identifiers other than `vars`, constants and functions
    /// are rejected with the byte position of the offending token.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
            len: src.len(),
        };
        let root = p.expr(0)?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(Error::Parse {
                pos: t.pos,
                msg: format!("unexpected token {:?}", t.kind),
            });
        }
        Ok(Expr {
            root: Arc::new(root),
            vars: Arc::new(vars.iter().map(|s| s.to_string()).collect()),
        })
    }

    pub fn constant(v: f64, vars: &[&str]) -> Expr {
        Expr {
            root: Arc::new(c(v)),
            vars: Arc::new(vars.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, vals: &[Complex64]) -> Complex64 {
        assert_eq!(vals.len(), self.vars.len(), "expression arity mismatch");
        self.root.eval(vals)
    }

    /// Evaluate at real arguments and return the real part.
    pub fn eval_re(&self, vals: &[f64]) -> f64 {
        let z: Vec<Complex64> = vals.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.eval(&z).re
    }

    /// Evaluate at real arguments, insisting on a finite real result.
    pub fn eval_real(&self, vals: &[f64]) -> Result<f64> {
        let z: Vec<Complex64> = vals.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let w = self.eval(&z);
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(Error::Evaluation(format!("`{self}` is not finite at {vals:?}")));
        }
        if w.im.abs() > 1e-12 * (1.0 + w.re.abs()) {
            return Err(Error::Evaluation(format!(
                "`{self}` is not real at {vals:?} (imaginary part {:e})",
                w.im
            )));
        }
        Ok(w.re)
    }

    /// Symbolic partial derivative with respect to variable index `k`.
    pub fn diff(&self, k: usize) -> Expr {
        Expr {
            root: Arc::new(self.root.diff(k)),
            vars: self.vars.clone(),
        }
    }

    pub fn diff_by_name(&self, name: &str) -> Result<Expr> {
        let k = self
            .vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Input(format!("unknown variable `{name}`")))?;
        Ok(self.diff(k))
    }

    pub fn is_constant(&self) -> bool {
        (0..self.vars.len()).all(|k| !self.root.depends_on(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })?;
            out.push(Token {
                kind: Tok::Num(v),
                pos: start,
            });
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: Tok::Ident(src[start..i].to_string()),
                pos: start,
            });
        } else if "+-*/^(),".contains(ch) {
            out.push(Token {
                kind: Tok::Op(ch),
                pos: i,
            });
            i += 1;
        } else {
            return Err(Error::Parse {
                pos: i,
                msg: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
    len: usize,
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_pos(&self) -> usize {
        self.len
    }

    fn expect(&mut self, op: char) -> Result<()> {
        match self.peek() {
            Some(Token { kind: Tok::Op(c), .. }) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(Error::Parse {
                pos: t.pos,
                msg: format!("expected `{op}`"),
            }),
            None => Err(Error::Parse {
                pos: self.end_pos(),
                msg: format!("expected `{op}` before end of input"),
            }),
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<Node> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, prec, right_assoc) = match self.peek() {
                Some(Token { kind: Tok::Op(c), .. }) => match c {
                    '+' | '-' => (*c, PREC_ADD, false),
                    '*' | '/' => (*c, PREC_MUL, false),
                    '^' => (*c, PREC_POW, true),
                    _ => break,
                },
                Some(t) => {
                    return Err(Error::Parse {
                        pos: t.pos,
                        msg: "expected an operator".into(),
                    })
                }
                None => break,
            };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let next = if right_assoc { prec } else { prec + 1 };
            let rhs = self.expr(next)?;
            lhs = match op {
                '+' => add(lhs, rhs),
                '-' => sub(lhs, rhs),
                '*' => mul(lhs, rhs),
                '/' => Node::Div(Box::new(lhs), Box::new(rhs)),
                _ => Node::Pow(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Node> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => {
                return Err(Error::Parse {
                    pos: self.end_pos(),
                    msg: "unexpected end of input".into(),
                })
            }
        };
        self.pos += 1;
        match tok.kind {
            Tok::Num(v) => Ok(c(v)),
            Tok::Op('-') => Ok(neg(self.expr(PREC_NEG)?)),
            Tok::Op('+') => self.expr(PREC_NEG),
            Tok::Op('(') => {
                let e = self.expr(0)?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(ch) => Err(Error::Parse {
                pos: tok.pos,
                msg: format!("unexpected `{ch}`"),
            }),
            Tok::Ident(name) => {
                if let Some(k) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(k));
                }
                match name.as_str() {
                    "i" => return Ok(Node::Const(Complex64::i())),
                    "pi" => return Ok(c(std::f64::consts::PI)),
                    "e" => return Ok(c(std::f64::consts::E)),
                    _ => {}
                }
                if let Some(f) = Fun::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr(0)?;
                    self.expect(')')?;
                    return Ok(call(f, arg));
                }
                Err(Error::Parse {
                    pos: tok.pos,
                    msg: format!("unknown identifier `{name}`"),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, vars: &[&str], vals: &[f64]) -> f64 {
        Expr::parse(src, vars).unwrap().eval_real(vals).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1+2*3", &[], &[]), 7.0);
        assert_eq!(ev("-2^2", &[], &[]), -4.0);
        assert_eq!(ev("2^3^2", &[], &[]), 512.0);
        assert_eq!(ev("(1+2)*3", &[], &[]), 9.0);
        assert_eq!(ev("8/4/2", &[], &[]), 1.0);
        assert_eq!(ev("2*-3", &[], &[]), -6.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("sech(x)", &["x"], &[0.5]) - 1.0 / 0.5f64.cosh()).abs() < 1e-15);
        assert!((ev("cos(pi)", &[], &[]) + 1.0).abs() < 1e-15);
        assert!((ev("log(e)", &[], &[]) - 1.0).abs() < 1e-15);
        assert!((ev("arccosh(2)", &[], &[]) - 2f64.acosh()).abs() < 1e-14);
        assert!((ev("1.5e-3*x", &["x"], &[2.0]) - 3e-3).abs() < 1e-18);
    }

    #[test]
    fn complex_unit() {
        let e = Expr::parse("(x+i*y)*(x-i*y)", &["x", "y"]).unwrap();
        let z = e.eval(&[Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)]);
        assert!((z - Complex64::new(25.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn parse_errors_carry_position() {
        match Expr::parse("1 + foo", &["x"]) {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        match Expr::parse("(1+2", &[]) {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("1 $ 2", &[]).is_err());
        assert!(Expr::parse("sin 2", &[]).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let srcs = [
            "x^3 - 2*x",
            "sqrt(1+x^2)",
            "exp(-x)*sin(2*x)",
            "log(2+x)/cosh(x)",
            "sech(x)*tanh(x)",
            "atan(x)+asinh(x)",
            "x^x",
            "acosh(2+x^2)",
            "tan(0.3*x)",
        ];
        for s in srcs {
            let e = Expr::parse(s, &["x"]).unwrap();
            let d = e.diff(0);
            for &x in &[0.3, 0.7, 1.3] {
                let h = 1e-6;
                let fd = (e.eval_re(&[x + h]) - e.eval_re(&[x - h])) / (2.0 * h);
                let an = d.eval_re(&[x]);
                assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{s} at {x}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn partial_derivatives() {
        let e = Expr::parse("r0^2*r1 + sin(r1)", &["r0", "r1"]).unwrap();
        assert!((e.diff(0).eval_re(&[2.0, 3.0]) - 12.0).abs() < 1e-14);
        assert!((e.diff(1).eval_re(&[2.0, 3.0]) - (4.0 + 3f64.cos())).abs() < 1e-14);
        assert!(e.diff(0).diff(0).diff(0).is_constant());
    }
}
