use super::expr::Expr;
use super::token::{BinaryOp, Operand, UnaryOp};
use crate::numerics::{ddx_into, Field, Grid};

/// Denominators smaller than this in magnitude yield NaN instead of a quotient.
pub const DIVISION_GUARD: f64 = 1e-30;

#[derive(Clone, Copy, Debug)]
enum Instr {
    Push(Operand),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

fn compile(expr: &Expr, program: &mut Vec<Instr>) {
    match expr {
        Expr::Leaf(o) => program.push(Instr::Push(*o)),
        Expr::Unary(op, c) => {
            compile(c, program);
            program.push(Instr::Unary(*op));
        }
        Expr::Binary(op, l, r) => {
            compile(l, program);
            compile(r, program);
            program.push(Instr::Binary(*op));
        }
    }
}

/// An expression compiled to a postfix program over reusable grid buffers.
///
/// Evaluation is pointwise in double precision except `d/dx`, which applies the
/// periodic fourth-order stencil of [`crate::numerics::ddx_into`].
#[derive(Clone, Debug)]
pub struct Evaluator {
    program: Vec<Instr>,
    stack: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    coords: Vec<f64>,
    h: f64,
}

impl Evaluator {
    pub fn new(expr: &Expr, grid: &Grid) -> Self {
        let mut program = Vec::with_capacity(expr.node_count());
        compile(expr, &mut program);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for instr in &program {
            match instr {
                Instr::Push(_) => depth += 1,
                Instr::Unary(_) => {}
                Instr::Binary(_) => depth -= 1,
            }
            max_depth = max_depth.max(depth);
        }
        let n = grid.len();
        Self {
            program,
            stack: vec![vec![0.0; n]; max_depth],
            scratch: vec![0.0; n],
            coords: grid.coords().to_vec(),
            h: grid.h(),
        }
    }

    /// Evaluates at state `u` and time `t` into `out`.
    pub fn eval_into(&mut self, u: &[f64], t: f64, out: &mut [f64]) {
        let mut sp = 0usize;
        for instr in &self.program {
            match *instr {
                Instr::Push(o) => {
                    let buf = &mut self.stack[sp];
                    match o {
                        Operand::U => buf.copy_from_slice(u),
                        Operand::X => buf.copy_from_slice(&self.coords),
                        Operand::T => buf.fill(t),
                        Operand::Const(c) => buf.fill(c.value()),
                    }
                    sp += 1;
                }
                Instr::Unary(op) => {
                    let buf = &mut self.stack[sp - 1];
                    match op {
                        UnaryOp::Identity => {}
                        UnaryOp::Negate => buf.iter_mut().for_each(|v| *v = -*v),
                        UnaryOp::Exp => buf.iter_mut().for_each(|v| *v = v.exp()),
                        UnaryOp::LogAbs => buf.iter_mut().for_each(|v| *v = v.abs().ln()),
                        UnaryOp::Sin => buf.iter_mut().for_each(|v| *v = v.sin()),
                        UnaryOp::Cos => buf.iter_mut().for_each(|v| *v = v.cos()),
                        UnaryOp::Ddx => {
                            ddx_into(buf, self.h, &mut self.scratch);
                            std::mem::swap(buf, &mut self.scratch);
                        }
                    }
                }
                Instr::Binary(op) => {
                    let (lower, upper) = self.stack.split_at_mut(sp - 1);
                    let a = &mut lower[sp - 2];
                    let b = &upper[0];
                    match op {
                        BinaryOp::Add => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
                        BinaryOp::Sub => a.iter_mut().zip(b).for_each(|(x, y)| *x -= y),
                        BinaryOp::Mul => a.iter_mut().zip(b).for_each(|(x, y)| *x *= y),
                        BinaryOp::Div => a.iter_mut().zip(b).for_each(|(x, y)| {
                            *x = if y.abs() < DIVISION_GUARD { f64::NAN } else { *x / y }
                        }),
                    }
                    sp -= 1;
                }
            }
        }
        debug_assert_eq!(sp, 1);
        out.copy_from_slice(&self.stack[0]);
    }
}

/// Pointwise evaluation of `expr` on state `u` at time `t`.
pub fn evaluate(expr: &Expr, u: &Field, grid: &Grid, t: f64) -> Field {
    let mut out = vec![0.0; grid.len()];
    Evaluator::new(expr, grid).eval_into(u.values(), t, &mut out);
    Field::new(out)
}
