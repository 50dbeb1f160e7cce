//! Right-hand-side expression language.
//!
//! Expressions are scalar formulas in the time `t` and the state components
//! `y1 .. yn`. The grammar is deliberately small:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := unary ("^" int_literal)?
//! unary  := "-" unary | atom
//! atom   := number | "t" | "y" digits | ident "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Exponents are integer literals only. Fractional powers are spelled with
//! `cbrt` / `sqrt`, so `y^{2/3}` becomes `cbrt(y1)^2`, which is total on the
//! real line because `cbrt` is the odd real cube root.

use std::fmt;

use thiserror::Error;

use crate::fmt_f64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },

    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { name: String, column: usize },

    #[error("function `{name}` at column {column} expects {expected} argument(s), found {found}")]
    Arity {
        name: String,
        column: usize,
        expected: String,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{expr}`")]
    DivisionByZero { expr: String },

    #[error("log of nonpositive value {value} in `{expr}`")]
    LogDomain { expr: String, value: f64 },

    #[error("sqrt of negative value {value} in `{expr}`")]
    SqrtDomain { expr: String, value: f64 },

    #[error("non-finite value in `{expr}`")]
    NonFinite { expr: String },

    #[error("variable y{index} referenced but the state has dimension {dim}")]
    MissingVariable { index: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
    Sign,
    Sqrt,
    Cbrt,
    Min,
    Max,
}

impl Function {
    pub const ALL: [Function; 11] = [
        Function::Sin,
        Function::Cos,
        Function::Tan,
        Function::Exp,
        Function::Log,
        Function::Abs,
        Function::Sign,
        Function::Sqrt,
        Function::Cbrt,
        Function::Min,
        Function::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Tan => "tan",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Abs => "abs",
            Function::Sign => "sign",
            Function::Sqrt => "sqrt",
            Function::Cbrt => "cbrt",
            Function::Min => "min",
            Function::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }

    /// `min` and `max` take two or more arguments, everything else exactly one.
    pub fn is_variadic(self) -> bool {
        matches!(self, Function::Min | Function::Max)
    }

    fn accepts(self, count: usize) -> bool {
        if self.is_variadic() {
            count >= 2
        } else {
            count == 1
        }
    }
}

/// Abstract syntax tree of a right-hand-side formula.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Time,
    /// State component, 1-based (`y1` is `State(1)`).
    State(usize),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Function, Vec<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        parse(source)
    }

    /// Literal for `x`; negative values become `Neg(Number(-x))` so that the
    /// tree matches what the parser produces for the printed form.
    pub fn constant(x: f64) -> Expr {
        if x.is_sign_negative() && x != 0.0 {
            Expr::Neg(Box::new(Expr::Number(-x)))
        } else {
            Expr::Number(x)
        }
    }

    /// Largest state index referenced, 0 when the expression is state-free.
    pub fn max_state_index(&self) -> usize {
        match self {
            Expr::Number(_) | Expr::Time => 0,
            Expr::State(i) => *i,
            Expr::Neg(e) | Expr::Pow(e, _) => e.max_state_index(),
            Expr::Binary(_, a, b) => a.max_state_index().max(b.max_state_index()),
            Expr::Call(_, args) => args.iter().map(Expr::max_state_index).max().unwrap_or(0),
        }
    }

    /// Replaces every `y_i` by `replacements[i - 1]`.
    pub fn substitute_states(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Number(_) | Expr::Time => self.clone(),
            Expr::State(i) => i
                .checked_sub(1)
                .and_then(|k| replacements.get(k))
                .cloned()
                .unwrap_or_else(|| self.clone()),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute_states(replacements))),
            Expr::Pow(e, n) => Expr::Pow(Box::new(e.substitute_states(replacements)), *n),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute_states(replacements)),
                Box::new(b.substitute_states(replacements)),
            ),
            Expr::Call(f, args) => Expr::Call(
                *f,
                args.iter().map(|a| a.substitute_states(replacements)).collect(),
            ),
        }
    }

    /// Evaluates at time `t` and state `y`. Domain violations are errors,
    /// never silent NaNs.
    pub fn eval(&self, t: f64, y: &[f64]) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Number(x) => *x,
            Expr::Time => t,
            Expr::State(i) => *i.checked_sub(1).and_then(|k| y.get(k)).ok_or(EvalError::MissingVariable {
                index: *i,
                dim: y.len(),
            })?,
            Expr::Neg(e) => -e.eval(t, y)?,
            Expr::Binary(op, a, b) => {
                let lhs = a.eval(t, y)?;
                let rhs = b.eval(t, y)?;
                match op {
                    BinaryOp::Add => lhs + rhs,
                    BinaryOp::Sub => lhs - rhs,
                    BinaryOp::Mul => lhs * rhs,
                    BinaryOp::Div => {
                        if rhs == 0.0 {
                            return Err(EvalError::DivisionByZero {
                                expr: self.to_string(),
                            });
                        }
                        lhs / rhs
                    }
                }
            }
            Expr::Pow(base, n) => {
                let x = base.eval(t, y)?;
                if x == 0.0 && *n < 0 {
                    return Err(EvalError::DivisionByZero {
                        expr: self.to_string(),
                    });
                }
                x.powi(*n)
            }
            Expr::Call(f, args) => {
                let first = args[0].eval(t, y)?;
                match f {
                    Function::Sin => first.sin(),
                    Function::Cos => first.cos(),
                    Function::Tan => first.tan(),
                    Function::Exp => first.exp(),
                    Function::Log => {
                        if first <= 0.0 {
                            return Err(EvalError::LogDomain {
                                expr: self.to_string(),
                                value: first,
                            });
                        }
                        first.ln()
                    }
                    Function::Abs => first.abs(),
                    Function::Sign => {
                        if first > 0.0 {
                            1.0
                        } else if first < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Function::Sqrt => {
                        if first < 0.0 {
                            return Err(EvalError::SqrtDomain {
                                expr: self.to_string(),
                                value: first,
                            });
                        }
                        first.sqrt()
                    }
                    Function::Cbrt => first.cbrt(),
                    Function::Min | Function::Max => {
                        let mut acc = first;
                        for arg in &args[1..] {
                            let v = arg.eval(t, y)?;
                            acc = if *f == Function::Min { acc.min(v) } else { acc.max(v) };
                        }
                        acc
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite {
                expr: self.to_string(),
            })
        }
    }

    fn is_atomic(&self) -> bool {
        matches!(
            self,
            Expr::Number(_) | Expr::Time | Expr::State(_) | Expr::Call(..)
        )
    }
}

impl fmt::Display for Expr {
    /// Prints in a form that parses back to a structurally equal tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(x) => f.write_str(&fmt_f64(*x)),
            Expr::Time => f.write_str("t"),
            Expr::State(i) => write!(f, "y{i}"),
            Expr::Neg(e) => {
                if e.is_atomic() || matches!(**e, Expr::Neg(_) | Expr::Binary(..)) {
                    write!(f, "-{e}")
                } else {
                    write!(f, "-({e})")
                }
            }
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(base, n) => {
                if base.is_atomic() || matches!(**base, Expr::Neg(_) | Expr::Binary(..)) {
                    write!(f, "{base}^{n}")
                } else {
                    write!(f, "({base})^{n}")
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number { value: f64, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    column: usize,
}

fn tokenize(source: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' | '\u{2212}' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            ',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(token) = simple {
            tokens.push(Spanned { token, column });
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                column,
                message: format!("malformed number `{text}`"),
            })?;
            tokens.push(Spanned {
                token: Token::Number { value, integral },
                column,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Spanned {
                token: Token::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        return Err(ParseError::Syntax {
            column,
            message: format!("unexpected character `{c}`"),
        });
    }
    tokens.push(Spanned {
        token: Token::End,
        column: chars.len() + 1,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn column(&self) -> usize {
        self.tokens[self.pos].column
    }

    fn advance(&mut self) -> Spanned {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            column: self.column(),
            message: message.into(),
        })
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<(), ParseError> {
        if *self.peek() == token {
            self.advance();
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if *self.peek() != Token::Caret {
            return Ok(base);
        }
        self.advance();
        let negative = if *self.peek() == Token::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Token::Number {
                value,
                integral: true,
            } if value <= i32::MAX as f64 => {
                self.advance();
                let n = value as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -n } else { n }))
            }
            _ => self.syntax("exponent must be an integer literal (use sqrt/cbrt for fractional powers)"),
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Spanned { token, column } = self.advance();
        match token {
            Token::Number { value, .. } => Ok(Expr::Number(value)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Token::Ident(name) => self.identifier(name, column),
            Token::End => Err(ParseError::Syntax {
                column,
                message: "unexpected end of input".into(),
            }),
            other => Err(ParseError::Syntax {
                column,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn identifier(&mut self, name: String, column: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Function::from_name(&name) {
            self.expect(Token::LParen, &format!("`(` after `{name}`"))?;
            let mut args = vec![self.expr()?];
            while *self.peek() == Token::Comma {
                self.advance();
                args.push(self.expr()?);
            }
            self.expect(Token::RParen, "`)`")?;
            if !func.accepts(args.len()) {
                return Err(ParseError::Arity {
                    name,
                    column,
                    expected: if func.is_variadic() { "at least 2".into() } else { "1".into() },
                    found: args.len(),
                });
            }
            return Ok(Expr::Call(func, args));
        }
        if name == "t" {
            return Ok(Expr::Time);
        }
        if let Some(digits) = name.strip_prefix('y') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(index) = digits.parse::<usize>() {
                    if index >= 1 {
                        return Ok(Expr::State(index));
                    }
                }
            }
        }
        Err(ParseError::UnknownIdentifier { name, column })
    }
}

/// Parses a single expression.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(source)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return parser.syntax("trailing input");
    }
    Ok(expr)
}
