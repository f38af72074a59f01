//! Numerical fingerprints for deciding algebraic equivalence of expressions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::Evaluator;
use super::expr::Expr;
use crate::numerics::{Field, Grid};

pub const DEFAULT_PROBE_COUNT: usize = 8;
pub const DEFAULT_SAMPLE_POINTS: usize = 16;
pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_f00d;
pub const DEFAULT_EQUIVALENCE_TOL: f64 = 1e-8;

const PROBE_GRID_POINTS: usize = 1000;
const PROBE_MODES: usize = 2;

/// Fixed smooth periodic states and times on which expressions are compared.
#[derive(Clone, Debug)]
pub struct ProbeSet {
    grid: Grid,
    fields: Vec<Field>,
    times: Vec<f64>,
    points: Vec<usize>,
}

impl ProbeSet {
    /// `count` random low-mode Fourier profiles (changing sign, so `|u|` and `u`
    /// differ), each sampled at the same `sample_points` grid indices.
    pub fn new(seed: u64, count: usize, sample_points: usize) -> Self {
        let grid = Grid::unit(PROBE_GRID_POINTS).expect("fixed probe grid");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fields = Vec::with_capacity(count);
        let mut times = Vec::with_capacity(count);
        for _ in 0..count {
            let mean = rng.random_range(-0.5..0.5);
            let coeffs: Vec<(f64, f64)> = (0..PROBE_MODES)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            fields.push(Field::from_fn(&grid, |x| {
                coeffs
                    .iter()
                    .enumerate()
                    .fold(mean, |acc, (m, &(a, b))| {
                        let w = 2.0 * std::f64::consts::PI * (m + 1) as f64 * x;
                        acc + a * w.sin() + b * w.cos()
                    })
            }));
            times.push(rng.random_range(0.05..0.8));
        }
        let mut points: Vec<usize> = rand::seq::index::sample(&mut rng, grid.len(), sample_points)
            .into_iter()
            .collect();
        points.sort_unstable();
        Self {
            grid,
            fields,
            times,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn eval_probe(&self, ev: &mut Evaluator, k: usize, buf: &mut [f64], out: &mut Vec<f64>) {
        ev.eval_into(self.fields[k].values(), self.times[k], buf);
        out.extend(self.points.iter().map(|&i| buf[i]));
    }
}

impl Default for ProbeSet {
    fn default() -> Self {
        Self::new(DEFAULT_PROBE_SEED, DEFAULT_PROBE_COUNT, DEFAULT_SAMPLE_POINTS)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub values: Vec<f64>,
    pub finite: bool,
}

pub fn fingerprint(expr: &Expr, probes: &ProbeSet) -> Fingerprint {
    let mut ev = Evaluator::new(expr, &probes.grid);
    let mut buf = vec![0.0; probes.grid.len()];
    let mut values = Vec::with_capacity(probes.len() * probes.points.len());
    for k in 0..probes.len() {
        probes.eval_probe(&mut ev, k, &mut buf, &mut values);
    }
    let finite = values.iter().all(|v| v.is_finite());
    Fingerprint { values, finite }
}

#[inline]
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn fingerprints_agree(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| close(x, y, tol))
}

impl Fingerprint {
    pub fn agrees_with(&self, other: &Fingerprint, tol: f64) -> bool {
        self.finite && other.finite && fingerprints_agree(&self.values, &other.values, tol)
    }
}

/// True iff both fingerprints are finite and agree entrywise within `tol`
/// relative to `max(1, |entry|)`.
pub fn equivalent(e1: &Expr, e2: &Expr, probes: &ProbeSet, tol: f64) -> bool {
    fingerprint(e1, probes).agrees_with(&fingerprint(e2, probes), tol)
}

/// Equivalence test against one fixed expression, probe by probe with early exit.
#[derive(Clone, Debug)]
pub struct TargetMatcher {
    probes: ProbeSet,
    target: Fingerprint,
    tol: f64,
}

impl TargetMatcher {
    pub fn new(target: &Expr, probes: ProbeSet, tol: f64) -> Self {
        let target = fingerprint(target, &probes);
        Self { probes, target, tol }
    }

    pub fn matches(&self, expr: &Expr) -> bool {
        if !self.target.finite {
            return false;
        }
        let mut ev = Evaluator::new(expr, &self.probes.grid);
        let mut buf = vec![0.0; self.probes.grid.len()];
        let mut values = Vec::with_capacity(self.probes.points.len());
        let p = self.probes.points.len();
        for k in 0..self.probes.len() {
            values.clear();
            self.probes.eval_probe(&mut ev, k, &mut buf, &mut values);
            if !fingerprints_agree(&values, &self.target.values[k * p..(k + 1) * p], self.tol)
                || !values.iter().all(|v| v.is_finite())
            {
                return false;
            }
        }
        true
    }

    pub fn probes(&self) -> &ProbeSet {
        &self.probes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::token::UnaryOp;

    fn closure() -> Expr {
        Expr::reciprocal(2).neg().mul(Expr::u().mul(Expr::u().ddx()))
    }

    #[test]
    fn identical_trees_identical_fingerprints() {
        let p = ProbeSet::default();
        assert_eq!(fingerprint(&closure(), &p), fingerprint(&closure(), &p));
        assert_eq!(fingerprint(&closure(), &p).values.len(), 8 * 16);
    }

    #[test]
    fn spellings_of_the_closure_agree() {
        let p = ProbeSet::default();
        let a = closure();
        let b = Expr::u().neg().mul(Expr::u().ddx()).mul(Expr::reciprocal(2));
        let c = Expr::u().mul(Expr::u().ddx()).div(Expr::integer(2).neg());
        let fa = fingerprint(&a, &p);
        let fb = fingerprint(&b, &p);
        for (x, y) in fa.values.iter().zip(&fb.values) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
        for (e1, e2) in [(&a, &b), (&a, &c), (&b, &c)] {
            assert!(equivalent(e1, e2, &p, DEFAULT_EQUIVALENCE_TOL));
            assert!(equivalent(e2, e1, &p, DEFAULT_EQUIVALENCE_TOL));
        }
    }

    #[test]
    fn offset_by_one_everywhere() {
        let p = ProbeSet::default();
        let f = fingerprint(&Expr::u(), &p);
        let g = fingerprint(&Expr::u().add(Expr::integer(1)), &p);
        for (x, y) in f.values.iter().zip(&g.values) {
            assert!((y - x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sign_and_abs_are_distinguished() {
        let p = ProbeSet::default();
        let tol = DEFAULT_EQUIVALENCE_TOL;
        assert!(!equivalent(&Expr::u(), &Expr::u().neg(), &p, tol));
        let abs_u = Expr::unary(UnaryOp::Exp, Expr::unary(UnaryOp::LogAbs, Expr::u()));
        assert!(!equivalent(&Expr::u(), &abs_u, &p, tol));
        assert!(equivalent(&Expr::u(), &Expr::u(), &p, tol));
    }

    #[test]
    fn nonfinite_is_never_equivalent() {
        let p = ProbeSet::default();
        let bad = Expr::u().div(Expr::u().sub(Expr::u()));
        assert!(!fingerprint(&bad, &p).finite);
        assert!(!equivalent(&bad, &bad, &p, DEFAULT_EQUIVALENCE_TOL));
    }

    #[test]
    fn matcher_agrees_with_equivalent() {
        let p = ProbeSet::default();
        let m = TargetMatcher::new(&closure(), p.clone(), DEFAULT_EQUIVALENCE_TOL);
        let spelled = Expr::u().ddx().mul(Expr::u()).mul(Expr::reciprocal(2).neg());
        assert!(m.matches(&spelled));
        assert!(!m.matches(&Expr::u().mul(Expr::u().ddx())));
        // Discrete product rule differs from the continuous one at the 1e-9 level.
        let product_rule = Expr::u().mul(Expr::u()).ddx().mul(Expr::reciprocal(2)).mul(Expr::reciprocal(2)).neg();
        assert_eq!(m.matches(&product_rule), equivalent(&closure(), &product_rule, &p, DEFAULT_EQUIVALENCE_TOL));
    }
}
