//! Scalar expressions over the decision variables `x1..xn`.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary (('^' | '**') unary)?
//! primary := number | 'x' index | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sqrt | abs | sin | cos
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x1^2` is `-(x1^2)` and `2^3^2` is `2^9`. Constraints are written as
//! `E <= 0`, `E >= 0`, `E1 <= E2` or `E1 >= E2` and are normalized to a
//! single expression `g` meaning `g(x) <= 0`.

use std::fmt;

use thiserror::Error;

/// Parse failure. Offsets are 0-based character positions in the source.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable x{index} at offset {offset} is out of range (problem has {n_vars} variables)")]
    VariableOutOfRange {
        offset: usize,
        index: usize,
        n_vars: usize,
    },
    #[error("equality constraint at offset {offset} is not supported; use <= or >=")]
    EqualityConstraint { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. }
            | ParseError::EqualityConstraint { offset } => *offset,
        }
    }
}

/// Evaluation failure.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    /// The named operation was applied outside its real domain.
    #[error("domain error in `{op}` with operand {operand}")]
    Domain { op: &'static str, operand: f64 },
    #[error("point has {got} coordinates but the expression needs {need}")]
    Dimension { need: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            _ => return None,
        })
    }

    fn apply(self, a: f64) -> Result<f64, EvalError> {
        let domain = |op| Err(EvalError::Domain { op, operand: a });
        let v = match self {
            UnaryOp::Neg => -a,
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log if a <= 0.0 => return domain("log"),
            UnaryOp::Log => a.ln(),
            UnaryOp::Sqrt if a < 0.0 => return domain("sqrt"),
            UnaryOp::Sqrt => a.sqrt(),
            UnaryOp::Abs => a.abs(),
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
        };
        finite(v, self.name(), a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn apply(self, a: f64, b: f64) -> Result<f64, EvalError> {
        let v = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    return Err(EvalError::Domain {
                        op: "/",
                        operand: b,
                    });
                }
                a / b
            }
            BinaryOp::Pow => {
                if a < 0.0 && b.fract() != 0.0 {
                    return Err(EvalError::Domain {
                        op: "^",
                        operand: a,
                    });
                }
                if a == 0.0 && b < 0.0 {
                    return Err(EvalError::Domain {
                        op: "^",
                        operand: a,
                    });
                }
                if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                    a.powi(b as i32)
                } else {
                    a.powf(b)
                }
            }
        };
        finite(v, self.symbol(), a)
    }
}

fn finite(v: f64, op: &'static str, operand: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain { op, operand })
    }
}

/// Expression tree node. Variable indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    fn eval_with<F: Fn(usize) -> f64 + Copy>(&self, var: F) -> Result<f64, EvalError> {
        match self {
            Node::Const(c) => Ok(*c),
            Node::Var(i) => Ok(var(*i)),
            Node::Unary(op, a) => op.apply(a.eval_with(var)?),
            Node::Binary(op, a, b) => op.apply(a.eval_with(var)?, b.eval_with(var)?),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Unary(_, a) => a.max_var(),
            Node::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    fn references(&self, i: usize) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(j) => *j == i,
            Node::Unary(_, a) => a.references(i),
            Node::Binary(_, a, b) => a.references(i) || b.references(i),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// A parsed expression in `n_vars` variables. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    n_vars: usize,
    arity: usize,
}

impl Expr {
    /// Parses an arithmetic expression in the variables `x1..x{n_vars}`.
    pub fn parse(source: &str, n_vars: usize) -> Result<Self, ParseError> {
        let tokens = tokenize(source)?;
        if tokens.iter().any(|t| matches!(t.kind, Tok::Cmp(_))) {
            let t = tokens.iter().find(|t| matches!(t.kind, Tok::Cmp(_))).unwrap();
            return Err(ParseError::Syntax {
                offset: t.offset,
                message: "comparison is only allowed in constraints".into(),
            });
        }
        let root = Parser::new(&tokens, source.chars().count(), n_vars).parse_all()?;
        Ok(Self::from_node(root, n_vars))
    }

    /// Parses a constraint and normalizes it to `g(x) <= 0`.
    pub fn parse_constraint(source: &str, n_vars: usize) -> Result<Self, ParseError> {
        let tokens = tokenize(source)?;
        let end = source.chars().count();
        let cmps: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t.kind, Tok::Cmp(_)))
            .map(|(k, _)| k)
            .collect();
        let Some(&at) = cmps.first() else {
            return Err(ParseError::Syntax {
                offset: 0,
                message: "constraint needs `<=` or `>=`".into(),
            });
        };
        if let Some(&second) = cmps.get(1) {
            return Err(ParseError::Syntax {
                offset: tokens[second].offset,
                message: "chained comparisons are not supported".into(),
            });
        }
        let Tok::Cmp(cmp) = tokens[at].kind else {
            unreachable!()
        };
        let offset = tokens[at].offset;
        match cmp {
            Cmp::Eq => return Err(ParseError::EqualityConstraint { offset }),
            Cmp::Lt | Cmp::Gt => {
                return Err(ParseError::Syntax {
                    offset,
                    message: "strict comparison; use `<=` or `>=`".into(),
                })
            }
            Cmp::Le | Cmp::Ge => {}
        }
        let lhs = Parser::new(&tokens[..at], offset, n_vars).parse_all()?;
        let rhs = Parser::new(&tokens[at + 1..], end, n_vars).parse_all()?;
        let rhs_zero = rhs == Node::Const(0.0);
        let root = match (cmp, rhs_zero) {
            (Cmp::Le, true) => lhs,
            (Cmp::Le, false) => Node::Binary(BinaryOp::Sub, Box::new(lhs), Box::new(rhs)),
            (Cmp::Ge, true) => Node::Unary(UnaryOp::Neg, Box::new(lhs)),
            (Cmp::Ge, false) => Node::Binary(BinaryOp::Sub, Box::new(rhs), Box::new(lhs)),
            _ => unreachable!(),
        };
        Ok(Self::from_node(root, n_vars))
    }

    /// Builds an expression from a tree. Panics if the tree references a
    /// variable outside `0..n_vars`.
    pub fn from_node(root: Node, n_vars: usize) -> Self {
        let arity = root.max_var().map_or(0, |m| m + 1);
        assert!(arity <= n_vars, "expression references x{arity} but n_vars = {n_vars}");
        Self {
            root,
            n_vars,
            arity,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// One past the highest variable index referenced.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn references(&self, i: usize) -> bool {
        self.root.references(i)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        self.root.eval_with(|j| x[j])
    }

    /// Evaluates with coordinate `i` (0-based) replaced by `v`.
    pub fn eval_partial(&self, x: &[f64], i: usize, v: f64) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        self.root
            .eval_with(|j| if j == i { v } else { x[j] })
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() < self.arity {
            Err(EvalError::Dimension {
                need: self.arity,
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Cmp(Cmp),
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let start = k;
        let next = chars.get(k + 1).copied();
        let kind = match c {
            c if c.is_whitespace() => {
                k += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' if next == Some('*') => {
                k += 1;
                Tok::Caret
            }
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '<' | '>' | '=' => {
                let eq_follows = next == Some('=');
                if eq_follows {
                    k += 1;
                }
                Tok::Cmp(match (c, eq_follows) {
                    ('<', true) => Cmp::Le,
                    ('>', true) => Cmp::Ge,
                    ('<', false) => Cmp::Lt,
                    ('>', false) => Cmp::Gt,
                    _ => Cmp::Eq,
                })
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut end = k;
                while end < chars.len() && (chars[end].is_ascii_digit() || chars[end] == '.') {
                    end += 1;
                }
                if end < chars.len() && (chars[end] == 'e' || chars[end] == 'E') {
                    let mut e = end + 1;
                    if e < chars.len() && (chars[e] == '+' || chars[e] == '-') {
                        e += 1;
                    }
                    if e < chars.len() && chars[e].is_ascii_digit() {
                        while e < chars.len() && chars[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text: String = chars[k..end].iter().collect();
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("number `{text}` is out of range"),
                    });
                }
                k = end;
                out.push(Token {
                    kind: Tok::Num(value),
                    offset: start,
                });
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut end = k;
                while end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '_') {
                    end += 1;
                }
                let text: String = chars[k..end].iter().collect();
                k = end;
                out.push(Token {
                    kind: Tok::Ident(text),
                    offset: start,
                });
                continue;
            }
            other => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Token {
            kind,
            offset: start,
        });
        k += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end_offset: usize,
    n_vars: usize,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token], end_offset: usize, n_vars: usize) -> Self {
        Self {
            tokens,
            pos: 0,
            end_offset,
            n_vars,
        }
    }

    fn parse_all(mut self) -> Result<Node, ParseError> {
        if self.tokens.is_empty() {
            return Err(self.error("empty expression"));
        }
        let node = self.expr()?;
        if self.pos < self.tokens.len() {
            return Err(self.error("unexpected token"));
        }
        Ok(node)
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.end_offset, |t| t.offset)
    }

    fn error(&self, message: &str) -> ParseError {
        let message = if self.pos >= self.tokens.len() {
            format!("{message} (unexpected end of input)")
        } else {
            message.to_string()
        };
        ParseError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Node::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let offset = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(op) = UnaryOp::from_name(&name) {
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(self.error(&format!("expected `(` after `{name}`")));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Unary(op, Box::new(arg)));
                }
                self.variable(&name, offset)
            }
            _ => Err(self.error("expected a number, variable, function or `(`")),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Node, ParseError> {
        let digits = name.strip_prefix('x').filter(|d| {
            !d.is_empty() && d.chars().all(|c| c.is_ascii_digit())
        });
        let Some(digits) = digits else {
            return Err(ParseError::UnknownIdentifier {
                offset,
                name: name.to_string(),
            });
        };
        let index: usize = digits.parse().unwrap_or(usize::MAX);
        if index == 0 || index > self.n_vars {
            return Err(ParseError::VariableOutOfRange {
                offset,
                index,
                n_vars: self.n_vars,
            });
        }
        Ok(Node::Var(index - 1))
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error("expected `)`"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BENCH3_COST: &str = "(x1 - x2)^2 + (1/x2 + 2)^2 + 0.5*x3^2";

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, x.len().max(1)).unwrap().eval(x).unwrap()
    }

    #[test]
    fn bench3_cost_value() {
        let e = Expr::parse(BENCH3_COST, 3).unwrap();
        let expected = 1.0 + (1.0f64 / 3.0 + 2.0).powi(2) + 0.5;
        assert!((e.eval(&[2.0, 3.0, 1.0]).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 6.9444).abs() < 1e-4);
    }

    #[test]
    fn identity() {
        assert_eq!(ev("x1", &[7.0]), 7.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2+3*4", &[0.0]), 14.0);
        assert_eq!(ev("2^3^2", &[0.0]), 512.0);
        assert_eq!(ev("2**3**2", &[0.0]), 512.0);
        assert_eq!(ev("-x1^2", &[2.0]), -4.0);
        assert_eq!(ev("2^-1", &[0.0]), 0.5);
        assert_eq!(ev("10 - 4 - 3", &[0.0]), 3.0);
        assert_eq!(ev("12 / 3 / 2", &[0.0]), 2.0);
        assert_eq!(ev("-2*-3", &[0.0]), 6.0);
        assert_eq!(ev(" 1.5e1 + .5 ", &[0.0]), 15.5);
    }

    #[test]
    fn functions() {
        assert!((ev("exp(log(x1))", &[3.5]) - 3.5).abs() < 1e-14);
        assert_eq!(ev("sqrt(x1) + abs(-2)", &[9.0]), 5.0);
        assert!((ev("sin(x1)^2 + cos(x1)^2", &[0.3]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_position() {
        let err = Expr::parse("x1 + * x2", 2).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 5, .. }), "{err:?}");
        let err = Expr::parse("(x1 + 2", 1).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 7, .. }), "{err:?}");
        assert!(Expr::parse("", 1).is_err());
        assert!(Expr::parse("   ", 1).is_err());
        assert!(Expr::parse("x1 x2", 2).is_err());
        assert!(Expr::parse("sqrt x1", 1).is_err());
    }

    #[test]
    fn identifier_errors() {
        assert_eq!(
            Expr::parse("x1 + y", 1).unwrap_err(),
            ParseError::UnknownIdentifier {
                offset: 5,
                name: "y".into()
            }
        );
        assert_eq!(
            Expr::parse("x3", 2).unwrap_err(),
            ParseError::VariableOutOfRange {
                offset: 0,
                index: 3,
                n_vars: 2
            }
        );
        assert!(matches!(
            Expr::parse("x0", 2).unwrap_err(),
            ParseError::VariableOutOfRange { index: 0, .. }
        ));
    }

    #[test]
    fn domain_errors() {
        let log = Expr::parse("log(x1)", 1).unwrap();
        assert!(matches!(
            log.eval(&[-1.0]),
            Err(EvalError::Domain { op: "log", operand }) if operand == -1.0
        ));
        assert!(Expr::parse("1/x1", 1).unwrap().eval(&[0.0]).is_err());
        assert!(Expr::parse("sqrt(x1)", 1).unwrap().eval(&[-0.1]).is_err());
        assert!(Expr::parse("x1^0.5", 1).unwrap().eval(&[-4.0]).is_err());
        assert_eq!(ev("x1^3", &[-2.0]), -8.0);
        assert!(Expr::parse("x1^-1", 1).unwrap().eval(&[0.0]).is_err());
        assert!(Expr::parse("exp(x1)", 1).unwrap().eval(&[1e4]).is_err());
    }

    #[test]
    fn cancellation() {
        let e = Expr::parse("x1 - x1", 1).unwrap();
        for v in [-3.0, 0.0, 1e6] {
            assert_eq!(e.eval(&[v]).unwrap(), 0.0);
        }
    }

    #[test]
    fn partial_evaluation() {
        let cost = Expr::parse(BENCH3_COST, 3).unwrap();
        assert_eq!(
            cost.eval_partial(&[2.0, 3.0, 1.0], 2, 0.8).unwrap(),
            cost.eval(&[2.0, 3.0, 0.8]).unwrap()
        );
        let e = Expr::parse("x2", 2).unwrap();
        assert_eq!(e.eval_partial(&[5.0, 9.0], 0, 100.0).unwrap(), 9.0);
        let v = cost.eval_partial(&[2.5, 2.5, 0.8], 1, 2.5).unwrap();
        assert!((v - 6.08).abs() < 1e-12);
    }

    #[test]
    fn constraint_normalization() {
        let x = [2.0, 3.0, 1.0];
        let c = |s: &str| Expr::parse_constraint(s, 3).unwrap().eval(&x).unwrap();
        assert_eq!(c("x1 + x2 <= 5"), 0.0);
        assert_eq!(c("x1*x3 >= 2"), 0.0);
        assert_eq!(c("x1 - 4 <= 0"), -2.0);
        assert_eq!(c("x1 - 4 >= 0"), 2.0);
        assert_eq!(c("x1 >= x2"), 1.0);
        assert_eq!(
            Expr::parse_constraint("x1 = x2", 3).unwrap_err(),
            ParseError::EqualityConstraint { offset: 3 }
        );
        assert!(matches!(
            Expr::parse_constraint("x1 == x2", 3),
            Err(ParseError::EqualityConstraint { .. })
        ));
        assert!(Expr::parse_constraint("x1 < 2", 3).is_err());
        assert!(Expr::parse_constraint("x1 + 2", 3).is_err());
        assert!(Expr::parse_constraint("0 <= x1 <= 2", 3).is_err());
        assert!(Expr::parse("x1 <= 2", 3).is_err());
    }

    fn arb_node(n: usize) -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(Node::Const),
            (0..n).prop_map(Node::Var),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(UnaryOp::Neg),
                        Just(UnaryOp::Exp),
                        Just(UnaryOp::Abs),
                        Just(UnaryOp::Sin),
                        Just(UnaryOp::Sqrt)
                    ],
                    inner.clone()
                )
                    .prop_map(|(op, a)| Node::Unary(op, Box::new(a))),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div),
                        Just(BinaryOp::Pow)
                    ],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| Node::Binary(op, Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trip(node in arb_node(3), points in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 100)) {
            let e = Expr::from_node(node, 3);
            let printed = e.to_string();
            let back = Expr::parse(&printed, 3).unwrap();
            for x in &points {
                match (e.eval(x), back.eval(x)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{printed}: {a} vs {b}"),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{printed}: {a:?} vs {b:?}"),
                }
            }
        }

        #[test]
        fn partial_at_current_value_is_exact(node in arb_node(3), x in prop::array::uniform3(-3.0f64..3.0), i in 0usize..3) {
            let e = Expr::from_node(node, 3);
            let full = e.eval(&x);
            let partial = e.eval_partial(&x, i, x[i]);
            match (full, partial) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }
}
