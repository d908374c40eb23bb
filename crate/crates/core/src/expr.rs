//! Arithmetic expressions over named variables, evaluated on any [`Scalar`].
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, and the functions `sqrt exp ln log sin cos tan atan
//! tanh abs`. `^` is right associative and binds tighter than unary minus.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Atan,
    Tanh,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowI(i32),
    PowF(f64),
    Pow,
    Call(Func),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A compiled expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    ops: Vec<Op>,
    depth: usize,
    uses: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
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
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let v = lit
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number '{lit}' in '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character '{c}' in '{s}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
    src: &'a str,
}

impl<'a> Parser<'a> {
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
        Error::Expr(format!("{msg} in '{}'", self.src))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin('/', Box::new(lhs), Box::new(self.unary()?));
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
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("missing ')'"));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let f = match name.as_str() {
                        "sqrt" => Func::Sqrt,
                        "exp" => Func::Exp,
                        "ln" | "log" => Func::Ln,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tan" => Func::Tan,
                        "atan" => Func::Atan,
                        "tanh" => Func::Tanh,
                        "abs" => Func::Abs,
                        _ => return Err(self.err(&format!("unknown function '{name}'"))),
                    };
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.err("missing ')'"));
                    }
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Const(std::f64::consts::PI)),
                    "e" => Ok(Node::Const(std::f64::consts::E)),
                    _ => Err(self.err(&format!("unknown variable '{name}'"))),
                }
            }
            _ => Err(self.err("unexpected end of expression")),
        }
    }
}

fn fold(node: Node) -> Node {
    match node {
        Node::Neg(a) => match fold(*a) {
            Node::Const(v) => Node::Const(-v),
            a => Node::Neg(Box::new(a)),
        },
        Node::Bin(op, a, b) => {
            let (a, b) = (fold(*a), fold(*b));
            if let (Node::Const(x), Node::Const(y)) = (&a, &b) {
                let v = match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => x / y,
                    _ => x.powf(*y),
                };
                return Node::Const(v);
            }
            Node::Bin(op, Box::new(a), Box::new(b))
        }
        Node::Call(f, a) => Node::Call(f, Box::new(fold(*a))),
        n => n,
    }
}

fn emit(node: &Node, ops: &mut Vec<Op>, depth: usize, max: &mut usize) {
    *max = (*max).max(depth + 1);
    match node {
        Node::Const(v) => ops.push(Op::Const(*v)),
        Node::Var(i) => ops.push(Op::Var(*i)),
        Node::Neg(a) => {
            emit(a, ops, depth, max);
            ops.push(Op::Neg);
        }
        Node::Call(f, a) => {
            emit(a, ops, depth, max);
            ops.push(Op::Call(*f));
        }
        Node::Bin('^', a, b) => {
            emit(a, ops, depth, max);
            if let Node::Const(p) = **b {
                if p.fract() == 0.0 && p.abs() < 64.0 {
                    ops.push(Op::PowI(p as i32));
                } else {
                    ops.push(Op::PowF(p));
                }
            } else {
                emit(b, ops, depth + 1, max);
                ops.push(Op::Pow);
            }
        }
        Node::Bin(op, a, b) => {
            emit(a, ops, depth, max);
            emit(b, ops, depth + 1, max);
            ops.push(match op {
                '+' => Op::Add,
                '-' => Op::Sub,
                '*' => Op::Mul,
                _ => Op::Div,
            });
        }
    }
}

impl Expr {
    /// Parse `src`; identifiers are resolved against `vars` by position.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            vars,
            src,
        };
        let node = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        let node = fold(node);
        let mut ops = Vec::new();
        let mut depth = 0;
        emit(&node, &mut ops, 0, &mut depth);
        let mut uses = vec![false; vars.len()];
        for op in &ops {
            if let Op::Var(i) = op {
                uses[*i] = true;
            }
        }
        Ok(Expr {
            source: src.to_string(),
            ops,
            depth,
            uses,
        })
    }

    pub fn constant(v: f64) -> Expr {
        Expr {
            source: format!("{v}"),
            ops: vec![Op::Const(v)],
            depth: 1,
            uses: Vec::new(),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether variable `i` occurs in the expression.
    pub fn uses(&self, i: usize) -> bool {
        self.uses.get(i).copied().unwrap_or(false)
    }

    /// Constant value if the expression references no variable.
    pub fn as_constant(&self) -> Option<f64> {
        match self.ops.as_slice() {
            [Op::Const(v)] => Some(*v),
            _ => None,
        }
    }

    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        let mut stack: Vec<S> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(S::from_f64(v)),
                Op::Var(i) => stack.push(vars[i]),
                Op::Neg => {
                    let a = stack.pop().unwrap();
                    stack.push(-a);
                }
                Op::PowI(n) => {
                    let a = stack.pop().unwrap();
                    stack.push(a.powi(n));
                }
                Op::PowF(p) => {
                    let a = stack.pop().unwrap();
                    stack.push(a.powf(p));
                }
                Op::Call(f) => {
                    let a = stack.pop().unwrap();
                    stack.push(match f {
                        Func::Sqrt => a.sqrt(),
                        Func::Exp => a.exp(),
                        Func::Ln => a.ln(),
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => a.tan(),
                        Func::Atan => a.atan(),
                        Func::Tanh => a.tanh(),
                        Func::Abs => a.abs(),
                    });
                }
                _ => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        _ => (a.ln() * b).exp(),
                    });
                }
            }
        }
        stack.pop().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Jet;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2*3^2^0.5 - -4/2", &[]).unwrap();
        let want = 1.0 + 2.0 * 3f64.powf(2f64.powf(0.5)) + 2.0;
        assert!((e.eval::<f64>(&[]) - want).abs() < 1e-14);
        let e = Expr::parse("-x^2", &["x"]).unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("sqrt(x0^2 + x1^2) + 0.3*x0 + cos(pi) + ln(e)", &["x0", "x1"]).unwrap();
        assert!((e.eval(&[3.0, 4.0]) - 5.9).abs() < 1e-14);
        assert!(e.uses(1));
        assert!(Expr::parse("2*pi", &["x"]).unwrap().as_constant().is_some());
    }

    #[test]
    fn jets_differentiate_through_expressions() {
        let e = Expr::parse("x^y", &["x", "y"]).unwrap();
        let x = Jet::seeded(2.0, &[1.0, 0.0]);
        let y = Jet::seeded(3.0, &[0.0, 1.0]);
        let r = e.eval(&[x, y]);
        assert!((r.coeff(0) - 8.0).abs() < 1e-13);
        assert!((r.coeff(1) - 12.0).abs() < 1e-12);
        assert!((r.coeff(2) - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +", &[]).is_err());
        assert!(Expr::parse("foo(1)", &[]).is_err());
        assert!(Expr::parse("q", &["x"]).is_err());
        assert!(Expr::parse("(1", &[]).is_err());
        assert!(Expr::parse("1 $ 2", &[]).is_err());
    }
}
