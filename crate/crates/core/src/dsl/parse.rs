//! Reader for the canonical text form produced by [`Expr::render`].

use std::str::FromStr;

use super::expr::Expr;
use super::token::{BinaryOp, Constant, Operand, UnaryOp};
use super::DslError;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> DslError {
        DslError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), DslError> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{lit}`")))
        }
    }

    fn integer(&mut self) -> Result<u32, DslError> {
        let digits = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(self.error("expected integer"));
        }
        let value = self.rest()[..digits]
            .parse()
            .map_err(|_| self.error("integer out of range"))?;
        self.pos += digits;
        Ok(value)
    }

    fn unary_body(&mut self, op: UnaryOp, close: &str) -> Result<Expr, DslError> {
        let child = self.expr()?;
        self.expect(close)?;
        Ok(Expr::Unary(op, Box::new(child)))
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        self.skip_ws();
        for (prefix, op, close) in [
            ("id(", UnaryOp::Identity, ")"),
            ("exp(", UnaryOp::Exp, ")"),
            ("log(|", UnaryOp::LogAbs, "|)"),
            ("sin(", UnaryOp::Sin, ")"),
            ("cos(", UnaryOp::Cos, ")"),
            ("d/dx(", UnaryOp::Ddx, ")"),
            ("(-(", UnaryOp::Negate, "))"),
        ] {
            if self.eat(prefix) {
                return self.unary_body(op, close);
            }
        }
        if self.eat("(") {
            let left = self.expr()?;
            self.skip_ws();
            // Redundant parentheses around a single operand.
            if self.eat(")") {
                return Ok(left);
            }
            let op = match self.rest().chars().next() {
                Some('+') => BinaryOp::Add,
                Some('-') => BinaryOp::Sub,
                Some('*') => BinaryOp::Mul,
                Some('/') => BinaryOp::Div,
                _ => return Err(self.error("expected binary operator")),
            };
            self.pos += 1;
            let right = self.expr()?;
            self.expect(")")?;
            return Ok(Expr::binary(op, left, right));
        }
        for (name, operand) in [("u", Operand::U), ("x", Operand::X), ("t", Operand::T)] {
            if self.eat(name) {
                return Ok(Expr::Leaf(operand));
            }
        }
        let c = self.integer()?;
        // `1/c` only when written without spaces; `(1 / c)` is a division.
        if c == 1 && self.rest().starts_with('/') {
            self.pos += 1;
            let d = self.integer()?;
            return Ok(Expr::Leaf(Operand::Const(Constant::Reciprocal(d))));
        }
        Ok(Expr::Leaf(Operand::Const(Constant::Integer(c))))
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, DslError> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

impl FromStr for Expr {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}
