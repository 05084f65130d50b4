//! Small arithmetic expression language for user-supplied fields.
//!
//! Supports `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, and the functions `abs`, `min`, `max`, `sqrt`,
//! `exp`, `ln`, `sin`, `cos`, `tan`. Variables are bound by name at parse time.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Min,
    Max,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            _ => return None,
        })
    }
}

/// A parsed expression over a fixed list of variable names.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Arc<Node>,
    vars: Arc<Vec<String>>,
    source: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part: 1e-3, 2.5E+4
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
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Expression(format!("bad number '{text}' in '{src}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a [String],
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} at token {} in '{}'", self.pos, self.src))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin(Op::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin(Op::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin(Op::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin(Op::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            // right associative, binds tighter than unary minus on the left
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let (func, arity) = Func::lookup(&name).ok_or_else(|| self.err(&format!("unknown function '{name}'")))?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return Err(self.err("expected ')' after arguments"));
                    }
                    if args.len() != arity {
                        return Err(self.err(&format!("'{name}' takes {arity} argument(s), got {}", args.len())));
                    }
                    return Ok(Node::Call(func, args));
                }
                if let Some(k) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(k));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(self.err(&format!("unknown variable '{name}'"))),
                }
            }
            _ => Err(self.err("expected a number, variable, function or '('")),
        }
    }
}

impl Expr {
    /// Parses `src`, binding the identifiers in `vars` to argument positions.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let mut p = Parser { toks: tokenize(src)?, pos: 0, vars: &vars, src };
        if p.toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self { root: Arc::new(root), vars: Arc::new(vars), source: src.to_string() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// True when the expression does not reference variable `name`.
    pub fn is_independent_of(&self, name: &str) -> bool {
        fn uses(n: &Node, k: usize) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(j) => *j == k,
                Node::Neg(a) => uses(a, k),
                Node::Bin(_, a, b) => uses(a, k) || uses(b, k),
                Node::Call(_, args) => args.iter().any(|a| uses(a, k)),
            }
        }
        match self.vars.iter().position(|v| v == name) {
            Some(k) => !uses(&self.root, k),
            None => true,
        }
    }

    /// Evaluates with `args[k]` bound to the k-th variable.
    pub fn eval<T: Real>(&self, args: &[T]) -> T {
        fn go<T: Real>(n: &Node, args: &[T]) -> T {
            match n {
                Node::Num(v) => T::lit(*v),
                Node::Var(k) => args[*k],
                Node::Neg(a) => -go(a, args),
                Node::Bin(op, a, b) => {
                    let (x, y) = (go(a, args), go(b, args));
                    match op {
                        Op::Add => x + y,
                        Op::Sub => x - y,
                        Op::Mul => x * y,
                        Op::Div => x / y,
                        Op::Pow => {
                            // integer exponents keep negative bases well defined
                            if y == y.round() && y.abs() < T::lit(64.0) {
                                x.powi(y.to_i32().unwrap_or(0))
                            } else {
                                x.powf(y)
                            }
                        }
                    }
                }
                Node::Call(f, a) => {
                    let x = go(&a[0], args);
                    match f {
                        Func::Abs => x.abs(),
                        Func::Min => x.min(go(&a[1], args)),
                        Func::Max => x.max(go(&a[1], args)),
                        Func::Sqrt => x.sqrt(),
                        Func::Exp => x.exp(),
                        Func::Ln => x.ln(),
                        Func::Sin => x.sin(),
                        Func::Cos => x.cos(),
                        Func::Tan => x.tan(),
                    }
                }
            }
        }
        go(&self.root, args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, y: f64) -> f64 {
        Expr::parse(src, &["x", "y"]).unwrap().eval(&[x, y])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0), -4.0);
        assert_eq!(ev("2e-1 * 10", 0.0, 0.0), 2.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x * y + abs(-x)", 2.0, 3.0), 8.0);
        assert_eq!(ev("min(x, y) + max(x, y)", 2.0, 3.0), 5.0);
        assert!((ev("cos(pi * x)", 1.0, 0.0) + 1.0).abs() < 1e-15);
        assert_eq!(ev("(-2)^3", 0.0, 0.0), -8.0);
        assert!((ev("x^0.5", 4.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("1 +", &["x"]).is_err());
        assert!(Expr::parse("foo(1)", &["x"]).is_err());
        assert!(Expr::parse("z", &["x"]).is_err());
        assert!(Expr::parse("min(1)", &["x"]).is_err());
        assert!(Expr::parse("(1", &["x"]).is_err());
        assert!(Expr::parse("1 2", &["x"]).is_err());
        assert!(Expr::parse("", &["x"]).is_err());
        assert!(Expr::parse("1 $ 2", &["x"]).is_err());
    }

    #[test]
    fn dependency_query() {
        let e = Expr::parse("x + 1", &["x", "u"]).unwrap();
        assert!(e.is_independent_of("u"));
        assert!(!e.is_independent_of("x"));
    }

    #[test]
    fn generic_scalar() {
        let e = Expr::parse("x / 4", &["x"]).unwrap();
        assert_eq!(e.eval(&[2.0_f32]), 0.5_f32);
    }
}
