use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DslError;

/// Rational constant operand: an integer `c` or its reciprocal `1/c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constant {
    Integer(u32),
    Reciprocal(u32),
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Integer(c) => c as f64,
            Constant::Reciprocal(c) => 1.0 / c as f64,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Integer(c) => write!(f, "{c}"),
            Constant::Reciprocal(c) => write!(f, "1/{c}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operand {
    U,
    X,
    T,
    Const(Constant),
}

impl Operand {
    pub fn is_const(self) -> bool {
        matches!(self, Operand::Const(_))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::U => f.write_str("u"),
            Operand::X => f.write_str("x"),
            Operand::T => f.write_str("t"),
            Operand::Const(c) => c.fmt(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnaryOp {
    Identity,
    Negate,
    Exp,
    LogAbs,
    Sin,
    Cos,
    Ddx,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 7] = [
        UnaryOp::Identity,
        UnaryOp::Negate,
        UnaryOp::Exp,
        UnaryOp::LogAbs,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Ddx,
    ];

    /// Configuration name.
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Identity => "identity",
            UnaryOp::Negate => "negate",
            UnaryOp::Exp => "exp",
            UnaryOp::LogAbs => "log_abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Ddx => "ddx",
        }
    }
}

impl FromStr for UnaryOp {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UnaryOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| DslError::UnknownToken(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    /// Infix symbol used by the renderer.
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

impl FromStr for BinaryOp {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BinaryOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| DslError::UnknownToken(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Operand,
    Unary,
    Binary,
}

/// Any element of the vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Operand(Operand),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

impl Token {
    pub fn kind(self) -> TokenKind {
        match self {
            Token::Operand(_) => TokenKind::Operand,
            Token::Unary(_) => TokenKind::Unary,
            Token::Binary(_) => TokenKind::Binary,
        }
    }
}
