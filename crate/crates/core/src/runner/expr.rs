//! Closed-form expressions over `x`, `y`, `z`.
//!
//! Grammar: numbers, the variables `x y z`, the constant `pi`, the binary
//! operators `+ - * / ^` with the usual precedence (`^` binds tightest and is
//! right-associative), unary minus, parentheses, and the functions `sin cos
//! tan exp log sqrt abs`.

use std::fmt;
use std::str::FromStr;

use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("expression {text:?}, position {position}: {msg}")]
pub struct ExprError {
    pub text: String,
    pub position: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Parsed expression, cheap to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    text: String,
    root: Node,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { text, chars: text.char_indices().collect(), pos: 0 };
        let root = p.sum()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr { text: text.to_string(), root })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        eval(&self.root, p)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Whether the expression is a constant (no variables).
    pub fn is_constant(&self) -> bool {
        fn has_var(n: &Node) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(_) => true,
                Node::Neg(a) | Node::Call(_, a) => has_var(a),
                Node::Bin(_, a, b) => has_var(a) || has_var(b),
            }
        }
        !has_var(&self.root)
    }
}

impl FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn eval(n: &Node, p: &Point) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(i) => p[*i],
        Node::Neg(a) => -eval(a, p),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, p), eval(b, p));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, p);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        let position = self.chars.get(self.pos).map_or(self.text.len(), |c| c.0);
        ExprError { text: self.text.to_string(), position, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.1.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.chars.get(self.pos).is_some_and(|c| c.1.is_ascii_alphanumeric() || c.1 == '_') {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                let func = match name.as_str() {
                    "x" => return Ok(Node::Var(0)),
                    "y" => return Ok(Node::Var(1)),
                    "z" => return Ok(Node::Var(2)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "tan" => Func::Tan,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    _ => {
                        self.pos = start;
                        return Err(self.err(&format!("unknown name {name:?}")));
                    }
                };
                if self.peek() != Some('(') {
                    return Err(self.err("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.sum()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let at = |p: &Self, i: usize| p.chars.get(i).map(|c| c.1);
        while at(self, self.pos).is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(at(self, self.pos), Some('e' | 'E')) {
            let mut k = self.pos + 1;
            if matches!(at(self, k), Some('+' | '-')) {
                k += 1;
            }
            if at(self, k).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = k;
                while at(self, self.pos).is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let s: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        s.parse().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.err("malformed number")
        })
    }
}
