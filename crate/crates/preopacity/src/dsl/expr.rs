//! Parser and evaluator for scalar dynamics/output expressions.
//!
//! Grammar (usual precedence, unary minus binds tightest of the operators):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'pi' | x<k> | u<k>
//!          | ('abs'|'cos'|'sin'|'exp'|'sqrt') '(' expr ')'
//!          | ('min'|'max') '(' expr ',' expr ')'
//!          | '(' expr ')'
//! ```
//!
//! Variables are 1-based: `x1` is the first state coordinate, `u1` the
//! first input coordinate. Parse errors carry byte offsets into the source.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum UnaryFn {
    Neg,
    Abs,
    Cos,
    Sin,
    Exp,
    Sqrt,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Neg => "-",
            UnaryFn::Abs => "abs",
            UnaryFn::Cos => "cos",
            UnaryFn::Sin => "sin",
            UnaryFn::Exp => "exp",
            UnaryFn::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

impl BinOp {
    fn is_infix(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Min => "min",
            BinOp::Max => "max",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Min | BinOp::Max => 4, // printed as calls, never needs parens
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Literal(f64),
    Pi,
    /// 0-based state coordinate (written `x1`, `x2`, … in source).
    StateVar(usize),
    /// 0-based input coordinate (written `u1`, `u2`, …).
    InputVar(usize),
    Unary(UnaryFn, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

/// A parsed expression, pinned to the state/input dimensions it was parsed
/// against so evaluation can check argument shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    pub(crate) node: Node,
    pub(crate) state_dim: usize,
    pub(crate) input_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undefined identifier '{name}' at offset {pos}")]
    UndefinedIdentifier { pos: usize, name: String },
    #[error("{name}{index} at offset {pos} is out of range: declared dimension is {dim}")]
    VariableOutOfRange {
        pos: usize,
        name: char,
        index: usize,
        dim: usize,
    },
    #[error("{name} expects {expected} argument(s), found more at offset {pos}")]
    Arity {
        pos: usize,
        name: String,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("sqrt of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("expression expects {expected} coordinates for {kind}, got {got}")]
    DimensionMismatch {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number {v}"),
            Token::Ident(s) => write!(f, "'{s}'"),
            Token::Plus => write!(f, "'+'"),
            Token::Minus => write!(f, "'-'"),
            Token::Star => write!(f, "'*'"),
            Token::Slash => write!(f, "'/'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::Comma => write!(f, "','"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let slice = &text[start..i];
                let value: f64 = slice.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    msg: format!("malformed number '{slice}'"),
                })?;
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    state_dim: usize,
    input_dim: usize,
    _text: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Token, usize)> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token) -> Result<(), ParseError> {
        match self.next() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, p)) => Err(ParseError::Syntax {
                pos: p,
                msg: format!("expected {want}, found {t}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                msg: format!("expected {want}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some((t, _)) = self.peek() {
            let op = match t {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((t, _)) = self.peek() {
            let op = match t {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if let Some((Token::Minus, _)) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Node::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.next() {
            Some((Token::Num(v), _)) => Ok(Node::Literal(v)),
            Some((Token::LParen, _)) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some((Token::Ident(name), pos)) => self.ident(&name, pos),
            Some((t, p)) => Err(ParseError::Syntax {
                pos: p,
                msg: format!("expected a value, found {t}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                msg: "expected a value, found end of input".to_string(),
            }),
        }
    }

    fn ident(&mut self, name: &str, pos: usize) -> Result<Node, ParseError> {
        if name == "pi" {
            return Ok(Node::Pi);
        }
        if let Some(f) = match name {
            "abs" => Some(UnaryFn::Abs),
            "cos" => Some(UnaryFn::Cos),
            "sin" => Some(UnaryFn::Sin),
            "exp" => Some(UnaryFn::Exp),
            "sqrt" => Some(UnaryFn::Sqrt),
            _ => None,
        } {
            self.expect(Token::LParen)?;
            let arg = self.expr()?;
            if let Some((Token::Comma, p)) = self.peek() {
                return Err(ParseError::Arity {
                    pos: *p,
                    name: name.to_string(),
                    expected: 1,
                });
            }
            self.expect(Token::RParen)?;
            return Ok(Node::Unary(f, Box::new(arg)));
        }
        if let Some(op) = match name {
            "min" => Some(BinOp::Min),
            "max" => Some(BinOp::Max),
            _ => None,
        } {
            self.expect(Token::LParen)?;
            let a = self.expr()?;
            if let Some((Token::RParen, p)) = self.peek() {
                return Err(ParseError::Arity {
                    pos: *p,
                    name: name.to_string(),
                    expected: 2,
                });
            }
            self.expect(Token::Comma)?;
            let b = self.expr()?;
            if let Some((Token::Comma, p)) = self.peek() {
                return Err(ParseError::Arity {
                    pos: *p,
                    name: name.to_string(),
                    expected: 2,
                });
            }
            self.expect(Token::RParen)?;
            return Ok(Node::Binary(op, Box::new(a), Box::new(b)));
        }
        let mut chars = name.chars();
        let head = chars.next().unwrap();
        let rest: String = chars.collect();
        if (head == 'x' || head == 'u') && !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
        {
            let index: usize = rest.parse().map_err(|_| ParseError::Syntax {
                pos,
                msg: format!("variable index in '{name}' is too large"),
            })?;
            let dim = if head == 'x' {
                self.state_dim
            } else {
                self.input_dim
            };
            if index == 0 || index > dim {
                return Err(ParseError::VariableOutOfRange {
                    pos,
                    name: head,
                    index,
                    dim,
                });
            }
            return Ok(if head == 'x' {
                Node::StateVar(index - 1)
            } else {
                Node::InputVar(index - 1)
            });
        }
        Err(ParseError::UndefinedIdentifier {
            pos,
            name: name.to_string(),
        })
    }
}

/// Parses `text` against declared state/input dimensions. Variable indices
/// beyond the declared dimensions are rejected at parse time.
pub fn parse_expression(
    text: &str,
    state_dim: usize,
    input_dim: usize,
) -> Result<Expression, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        state_dim,
        input_dim,
        _text: text,
    };
    let node = parser.expr()?;
    if let Some((t, p)) = parser.peek() {
        return Err(ParseError::Syntax {
            pos: *p,
            msg: format!("unexpected {t} after complete expression"),
        });
    }
    Ok(Expression {
        node,
        state_dim,
        input_dim,
    })
}

impl Expression {
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// True if any `u<k>` variable occurs — output maps must be state-only.
    pub fn references_input(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::InputVar(_) => true,
                Node::Literal(_) | Node::Pi | Node::StateVar(_) => false,
                Node::Unary(_, a) => walk(a),
                Node::Binary(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.node)
    }

    pub fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.state_dim {
            return Err(EvalError::DimensionMismatch {
                kind: "state",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        if u.len() != self.input_dim {
            return Err(EvalError::DimensionMismatch {
                kind: "input",
                expected: self.input_dim,
                got: u.len(),
            });
        }
        eval_node(&self.node, x, u)
    }
}

fn eval_node(n: &Node, x: &[f64], u: &[f64]) -> Result<f64, EvalError> {
    Ok(match n {
        Node::Literal(v) => *v,
        Node::Pi => std::f64::consts::PI,
        Node::StateVar(i) => x[*i],
        Node::InputVar(i) => u[*i],
        Node::Unary(f, a) => {
            let v = eval_node(a, x, u)?;
            match f {
                UnaryFn::Neg => -v,
                UnaryFn::Abs => v.abs(),
                UnaryFn::Cos => v.cos(),
                UnaryFn::Sin => v.sin(),
                UnaryFn::Exp => v.exp(),
                UnaryFn::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError::SqrtOfNegative(v));
                    }
                    v.sqrt()
                }
            }
        }
        Node::Binary(op, a, b) => {
            let va = eval_node(a, x, u)?;
            let vb = eval_node(b, x, u)?;
            match op {
                BinOp::Add => va + vb,
                BinOp::Sub => va - vb,
                BinOp::Mul => va * vb,
                BinOp::Div => {
                    if vb == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    va / vb
                }
                BinOp::Min => va.min(vb),
                BinOp::Max => va.max(vb),
            }
        }
    })
}

// Precedence-aware printing: parenthesize a child only when its binding is
// too weak for the context, so `print ∘ parse ∘ print` is idempotent.
fn fmt_node(n: &Node, parent_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let my_prec = match n {
        Node::Literal(_) | Node::Pi | Node::StateVar(_) | Node::InputVar(_) => 4,
        Node::Unary(UnaryFn::Neg, _) => 3,
        Node::Unary(..) => 4,
        Node::Binary(op, ..) if op.is_infix() => op.precedence(),
        Node::Binary(..) => 4,
    };
    let parens = my_prec < parent_prec;
    if parens {
        write!(f, "(")?;
    }
    match n {
        Node::Literal(v) => write!(f, "{v}")?,
        Node::Pi => write!(f, "pi")?,
        Node::StateVar(i) => write!(f, "x{}", i + 1)?,
        Node::InputVar(i) => write!(f, "u{}", i + 1)?,
        Node::Unary(UnaryFn::Neg, a) => {
            write!(f, "-")?;
            fmt_node(a, 3, f)?;
        }
        Node::Unary(func, a) => {
            write!(f, "{}(", func.name())?;
            fmt_node(a, 0, f)?;
            write!(f, ")")?;
        }
        Node::Binary(op, a, b) if op.is_infix() => {
            fmt_node(a, my_prec, f)?;
            write!(f, " {} ", op.symbol())?;
            // left-associative: right operand of - and / needs the next level
            fmt_node(b, my_prec + 1, f)?;
        }
        Node::Binary(op, a, b) => {
            write!(f, "{}(", op.symbol())?;
            fmt_node(a, 0, f)?;
            write!(f, ", ")?;
            fmt_node(b, 0, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.node, 0, f)
    }
}
