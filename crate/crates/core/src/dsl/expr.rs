use std::fmt;

use super::token::{BinaryOp, Constant, Operand, UnaryOp};

/// Immutable expression tree over the token vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Leaf(Operand),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn leaf(operand: Operand) -> Self {
        Expr::Leaf(operand)
    }

    pub fn u() -> Self {
        Expr::Leaf(Operand::U)
    }

    pub fn x() -> Self {
        Expr::Leaf(Operand::X)
    }

    pub fn t() -> Self {
        Expr::Leaf(Operand::T)
    }

    pub fn integer(c: u32) -> Self {
        Expr::Leaf(Operand::Const(Constant::Integer(c)))
    }

    pub fn reciprocal(c: u32) -> Self {
        Expr::Leaf(Operand::Const(Constant::Reciprocal(c)))
    }

    /// Applies `op`; the identity is elided so constructed trees never contain it.
    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        match op {
            UnaryOp::Identity => child,
            op => Expr::Unary(op, Box::new(child)),
        }
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn neg(self) -> Self {
        Expr::unary(UnaryOp::Negate, self)
    }

    pub fn ddx(self) -> Self {
        Expr::unary(UnaryOp::Ddx, self)
    }

    pub fn add(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Add, self, rhs)
    }

    pub fn sub(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }

    pub fn mul(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }

    pub fn div(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Div, self, rhs)
    }

    /// Number of top-level additive terms: leaves of the tree obtained by
    /// splitting the root recursively on `+` and `-`.
    pub fn term_count(&self) -> usize {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, l, r) => l.term_count() + r.term_count(),
            _ => 1,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Leaf(_) => 1,
            Expr::Unary(_, c) => 1 + c.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Plain tree depth, a leaf counting as one.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Leaf(_) => 1,
            Expr::Unary(_, c) => 1 + c.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Same tree with explicit identity nodes removed.
    pub fn without_identity(&self) -> Expr {
        match self {
            Expr::Leaf(o) => Expr::Leaf(*o),
            Expr::Unary(UnaryOp::Identity, c) => c.without_identity(),
            Expr::Unary(op, c) => Expr::Unary(*op, Box::new(c.without_identity())),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.without_identity(), r.without_identity()),
        }
    }

    pub fn contains_unary(&self, target: UnaryOp) -> bool {
        match self {
            Expr::Leaf(_) => false,
            Expr::Unary(op, c) => *op == target || c.contains_unary(target),
            Expr::Binary(_, l, r) => l.contains_unary(target) || r.contains_unary(target),
        }
    }

    /// Canonical fully parenthesized text form.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Leaf(o) => o.fmt(f),
            Expr::Unary(op, c) => match op {
                UnaryOp::Identity => write!(f, "id({c})"),
                UnaryOp::Negate => write!(f, "(-({c}))"),
                UnaryOp::Exp => write!(f, "exp({c})"),
                UnaryOp::LogAbs => write!(f, "log(|{c}|)"),
                UnaryOp::Sin => write!(f, "sin({c})"),
                UnaryOp::Cos => write!(f, "cos({c})"),
                UnaryOp::Ddx => write!(f, "d/dx({c})"),
            },
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}
