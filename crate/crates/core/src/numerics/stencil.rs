//! Fourth-order central differences with periodic wrap-around.

use super::{Field, Grid};

#[inline(always)]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// First derivative `(-f[i+2] + 8 f[i+1] - 8 f[i-1] + f[i-2]) / (12 h)`.
///
/// `f` and `out` must have the same length, at least 5.
pub fn ddx_into(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(n, out.len());
    debug_assert!(n >= 5);
    let inv = 1.0 / (12.0 * h);
    let at = |i: isize| f[wrap(i, n)];
    for i in [0, 1, n - 2, n - 1] {
        let j = i as isize;
        out[i] = (8.0 * (at(j + 1) - at(j - 1)) - (at(j + 2) - at(j - 2))) * inv;
    }
    for i in 2..n - 2 {
        out[i] = (8.0 * (f[i + 1] - f[i - 1]) - (f[i + 2] - f[i - 2])) * inv;
    }
}

/// Second derivative `(-f[i+2] + 16 f[i+1] - 30 f[i] + 16 f[i-1] - f[i-2]) / (12 h^2)`.
///
/// Evaluated on differences against `f[i]` so constants map to exactly zero.
pub fn d2dx2_into(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(n, out.len());
    debug_assert!(n >= 5);
    let inv = 1.0 / (12.0 * h * h);
    let at = |i: isize| f[wrap(i, n)];
    for i in [0, 1, n - 2, n - 1] {
        let j = i as isize;
        let c = at(j);
        out[i] = (16.0 * ((at(j + 1) - c) + (at(j - 1) - c)) - ((at(j + 2) - c) + (at(j - 2) - c)))
            * inv;
    }
    for i in 2..n - 2 {
        let c = f[i];
        out[i] = (16.0 * ((f[i + 1] - c) + (f[i - 1] - c)) - ((f[i + 2] - c) + (f[i - 2] - c))) * inv;
    }
}

pub fn ddx(f: &Field, grid: &Grid) -> Field {
    let mut out = vec![0.0; f.len()];
    ddx_into(f.values(), grid.h(), &mut out);
    Field::new(out)
}

pub fn d2dx2(f: &Field, grid: &Grid) -> Field {
    let mut out = vec![0.0; f.len()];
    d2dx2_into(f.values(), grid.h(), &mut out);
    Field::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_err(a: &Field, b: &Field) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid::unit(1000).unwrap();
        let c = Field::constant(&g, 3.7);
        assert!(ddx(&c, &g).max_abs() <= 1e-13);
        assert_eq!(d2dx2(&c, &g).max_abs(), 0.0);
    }

    #[test]
    fn sine_first_derivative() {
        let g = Grid::unit(1000).unwrap();
        let f = Field::from_fn(&g, |x| (2.0 * PI * x).sin());
        let exact = Field::from_fn(&g, |x| 2.0 * PI * (2.0 * PI * x).cos());
        assert!(max_err(&ddx(&f, &g), &exact) <= 1e-8);
    }

    #[test]
    fn sine_second_derivative() {
        let g = Grid::unit(1000).unwrap();
        let f = Field::from_fn(&g, |x| (2.0 * PI * x).sin());
        let exact = Field::from_fn(&g, |x| -4.0 * PI * PI * (2.0 * PI * x).sin());
        // Leading error (2 pi)^6 h^4 / 90 ~ 6.8e-10, plus round-off ~ eps / h^2.
        assert!(max_err(&d2dx2(&f, &g), &exact) <= 1e-7);
    }

    #[test]
    fn wrap_matches_interior_formula() {
        // A periodic profile shifted by k points must shift its derivative by k.
        let g = Grid::unit(40).unwrap();
        let f = Field::from_fn(&g, |x| (2.0 * PI * x).cos() + 0.3 * (6.0 * PI * x).sin());
        let d = ddx(&f, &g);
        let shifted: Vec<f64> = (0..40).map(|i| f.values()[(i + 7) % 40]).collect();
        let ds = ddx(&Field::new(shifted), &g);
        for i in 0..40 {
            assert!((ds.values()[i] - d.values()[(i + 7) % 40]).abs() < 1e-12);
        }
    }
}
