use serde::{Deserialize, Serialize};

use super::rk4::{Rhs, Rk4};
use super::stencil::{d2dx2_into, ddx_into};
use super::{Field, Grid, GridConfig, NumericsError};
use crate::dsl::{Evaluator, Expr};

/// Piecewise-constant pulse: `u_high` on `[a, b)`, `u_low` elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RectangularIc {
    pub u_low: f64,
    pub u_high: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for RectangularIc {
    fn default() -> Self {
        Self {
            u_low: 0.0,
            u_high: 1.0,
            a: 0.25,
            b: 0.5,
        }
    }
}

pub fn rectangular_ic(grid: &Grid, params: &RectangularIc) -> Result<Field, NumericsError> {
    let RectangularIc { u_low, u_high, a, b } = *params;
    if !(a < b && a >= grid.x0() && b <= grid.x1()) {
        return Err(NumericsError::InvalidPulse {
            a,
            b,
            x0: grid.x0(),
            x1: grid.x1(),
        });
    }
    Ok(Field::from_fn(grid, |x| if a <= x && x < b { u_high } else { u_low }))
}

/// Largest `nu * dt / h^2` accepted before integrating.
///
/// The second-derivative stencil has spectral radius `16 / (3 h^2)` and RK4 is
/// stable on the negative real axis down to about `-2.785`, so the hard bound is
/// `nu dt / h^2 < 0.522`.
pub const DIFFUSIVE_LIMIT: f64 = 0.52;
/// Largest `max|u| * dt / h` accepted before integrating.
pub const ADVECTIVE_LIMIT: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nu: f64,
    pub t_end: f64,
    pub dt: f64,
    pub grid: GridConfig,
    pub ic: RectangularIc,
    pub blowup_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: 0.01,
            t_end: 0.8,
            dt: 5e-5,
            grid: GridConfig::default(),
            ic: RectangularIc::default(),
            blowup_cap: 1e6,
        }
    }
}

/// Stability numbers of a configuration, measured on its initial condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityNumbers {
    pub advective: f64,
    pub diffusive: f64,
}

impl StabilityNumbers {
    pub fn within_limits(&self) -> bool {
        self.advective <= ADVECTIVE_LIMIT && self.diffusive <= DIFFUSIVE_LIMIT
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(NumericsError::InvalidConfig(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NumericsError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(NumericsError::InvalidConfig(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(NumericsError::InvalidConfig(format!(
                "dt {} exceeds t_end {}",
                self.dt, self.t_end
            )));
        }
        steps_for(self.t_end, self.dt)?;
        if !(self.blowup_cap > 0.0) {
            return Err(NumericsError::InvalidConfig("blowup_cap must be positive".into()));
        }
        let grid = self.grid.build()?;
        rectangular_ic(&grid, &self.ic)?;
        Ok(())
    }

    pub fn steps(&self) -> Result<usize, NumericsError> {
        steps_for(self.t_end, self.dt)
    }

    pub fn stability(&self) -> Result<StabilityNumbers, NumericsError> {
        let grid = self.grid.build()?;
        let umax = self.ic.u_low.abs().max(self.ic.u_high.abs());
        Ok(StabilityNumbers {
            advective: umax * self.dt / grid.h(),
            diffusive: self.nu * self.dt / (grid.h() * grid.h()),
        })
    }
}

fn steps_for(t_end: f64, dt: f64) -> Result<usize, NumericsError> {
    let ratio = t_end / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(NumericsError::InvalidConfig(format!(
            "t_end / dt = {ratio} is not an integer step count"
        )));
    }
    Ok(steps as usize)
}

/// `-u u_x + nu u_xx`.
///
/// The convective term is accumulated as two halves in the same order
/// [`ModeledRhs`] uses, so the exact closure reproduces this bitwise.
#[derive(Debug, Clone)]
pub struct BurgersRhs {
    nu: f64,
    h: f64,
    ux: Vec<f64>,
    uxx: Vec<f64>,
}

impl BurgersRhs {
    pub fn new(grid: &Grid, nu: f64) -> Self {
        Self {
            nu,
            h: grid.h(),
            ux: vec![0.0; grid.len()],
            uxx: vec![0.0; grid.len()],
        }
    }
}

impl Rhs for BurgersRhs {
    fn eval_into(&mut self, u: &[f64], _t: f64, out: &mut [f64]) {
        ddx_into(u, self.h, &mut self.ux);
        d2dx2_into(u, self.h, &mut self.uxx);
        let nu = self.nu;
        for i in 0..u.len() {
            let half = -0.5 * (u[i] * self.ux[i]);
            out[i] = (half + nu * self.uxx[i]) + half;
        }
    }
}

/// `-(1/2) u u_x + nu u_xx + M(u, x, t)`.
#[derive(Debug, Clone)]
pub struct ModeledRhs {
    nu: f64,
    h: f64,
    ux: Vec<f64>,
    uxx: Vec<f64>,
    model: Vec<f64>,
    evaluator: Evaluator,
}

impl ModeledRhs {
    pub fn new(grid: &Grid, nu: f64, expr: &Expr) -> Self {
        Self {
            nu,
            h: grid.h(),
            ux: vec![0.0; grid.len()],
            uxx: vec![0.0; grid.len()],
            model: vec![0.0; grid.len()],
            evaluator: Evaluator::new(expr, grid),
        }
    }
}

impl Rhs for ModeledRhs {
    fn eval_into(&mut self, u: &[f64], t: f64, out: &mut [f64]) {
        ddx_into(u, self.h, &mut self.ux);
        d2dx2_into(u, self.h, &mut self.uxx);
        self.evaluator.eval_into(u, t, &mut self.model);
        let nu = self.nu;
        for i in 0..u.len() {
            out[i] = (-0.5 * (u[i] * self.ux[i]) + nu * self.uxx[i]) + self.model[i];
        }
    }
}

pub fn burgers_rhs(u: &Field, grid: &Grid, nu: f64) -> Field {
    let mut out = vec![0.0; u.len()];
    BurgersRhs::new(grid, nu).eval_into(u.values(), 0.0, &mut out);
    Field::new(out)
}

pub fn modeled_rhs(u: &Field, grid: &Grid, nu: f64, model: &Expr, t: f64) -> Field {
    let mut out = vec![0.0; u.len()];
    ModeledRhs::new(grid, nu, model).eval_into(u.values(), t, &mut out);
    Field::new(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IntegrationStatus {
    Completed,
    /// The state became non-finite or exceeded the blow-up cap after `step` steps.
    Diverged { step: usize, t: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// State at `t_end`, or at the step where divergence was detected.
    pub final_field: Field,
    pub snapshots: Vec<Snapshot>,
    pub status: IntegrationStatus,
    pub steps_taken: usize,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        matches!(self.status, IntegrationStatus::Diverged { .. })
    }
}

/// Integrates from the configured rectangular pulse to `t_end`.
///
/// `snapshot_times` are rounded to the nearest step; times beyond `t_end` are ignored.
pub fn integrate<R: Rhs + ?Sized>(
    config: &SolverConfig,
    rhs: &mut R,
    snapshot_times: &[f64],
) -> Result<Trajectory, NumericsError> {
    config.validate()?;
    let grid = config.grid.build()?;
    let initial = rectangular_ic(&grid, &config.ic)?;
    Ok(integrate_from(
        initial,
        config.dt,
        config.steps()?,
        config.blowup_cap,
        rhs,
        snapshot_times,
    ))
}

/// Time-marches `initial` for `steps` RK4 steps of size `dt`.
pub fn integrate_from<R: Rhs + ?Sized>(
    initial: Field,
    dt: f64,
    steps: usize,
    blowup_cap: f64,
    rhs: &mut R,
    snapshot_times: &[f64],
) -> Trajectory {
    let mut wanted: Vec<(usize, f64)> = snapshot_times
        .iter()
        .filter(|&&t| t >= 0.0)
        .map(|&t| ((t / dt).round() as usize, t))
        .filter(|&(k, _)| k <= steps)
        .collect();
    wanted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut next_snapshot = 0;
    let mut snapshots = Vec::with_capacity(wanted.len());
    let take = |k: usize, u: &[f64], snaps: &mut Vec<Snapshot>, next: &mut usize| {
        while *next < wanted.len() && wanted[*next].0 == k {
            snaps.push(Snapshot {
                t: k as f64 * dt,
                field: Field::new(u.to_vec()),
            });
            *next += 1;
        }
    };

    let mut u = initial.into_values();
    let mut stepper = Rk4::new(u.len());
    take(0, &u, &mut snapshots, &mut next_snapshot);
    for k in 0..steps {
        let t = k as f64 * dt;
        stepper.step(&mut u, rhs, t, dt);
        if u.iter().any(|v| !(v.abs() <= blowup_cap)) {
            return Trajectory {
                final_field: Field::new(u),
                snapshots,
                status: IntegrationStatus::Diverged {
                    step: k + 1,
                    t: (k + 1) as f64 * dt,
                },
                steps_taken: k + 1,
            };
        }
        take(k + 1, &u, &mut snapshots, &mut next_snapshot);
    }
    Trajectory {
        final_field: Field::new(u),
        snapshots,
        status: IntegrationStatus::Completed,
        steps_taken: steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_grid() -> Grid {
        Grid::unit(1000).unwrap()
    }

    #[test]
    fn default_pulse_has_250_high_points() {
        let g = unit_grid();
        let u = rectangular_ic(&g, &RectangularIc::default()).unwrap();
        assert_eq!(u.values().iter().filter(|&&v| v == 1.0).count(), 250);
        assert_eq!(u.values().iter().filter(|&&v| v == 0.0).count(), 750);
    }

    #[test]
    fn flat_pulse_is_constant() {
        let g = unit_grid();
        let ic = RectangularIc {
            u_low: 0.3,
            u_high: 0.3,
            ..Default::default()
        };
        let u = rectangular_ic(&g, &ic).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn pulse_outside_domain_is_rejected() {
        let g = unit_grid();
        for (a, b) in [(-0.1, 0.5), (0.5, 1.5), (0.6, 0.4)] {
            let ic = RectangularIc {
                a,
                b,
                ..Default::default()
            };
            assert!(rectangular_ic(&g, &ic).is_err());
        }
    }

    #[test]
    fn burgers_rhs_of_constant_is_zero() {
        let g = unit_grid();
        let rhs = burgers_rhs(&Field::constant(&g, 0.7), &g, 0.01);
        assert!(rhs.max_abs() <= 1e-13);
    }

    #[test]
    fn burgers_rhs_of_sine() {
        let g = unit_grid();
        let u = Field::from_fn(&g, |x| (2.0 * PI * x).sin());
        let inviscid = burgers_rhs(&u, &g, 0.0);
        let viscous = burgers_rhs(&u, &g, 0.01);
        for (i, &x) in g.coords().iter().enumerate() {
            let conv = -PI * (4.0 * PI * x).sin();
            assert!((inviscid.values()[i] - conv).abs() < 1e-8);
            let diff = -0.04 * PI * PI * (2.0 * PI * x).sin();
            assert!((viscous.values()[i] - (conv + diff)).abs() < 1e-8);
        }
    }

    #[test]
    fn step_count_must_be_integral() {
        let cfg = SolverConfig {
            dt: 3e-4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(SolverConfig::default().steps().unwrap(), 16_000);
    }

    #[test]
    fn default_config_is_within_stability_limits() {
        let s = SolverConfig::default().stability().unwrap();
        assert!(s.within_limits(), "{s:?}");
        let large_nu = SolverConfig {
            nu: 10.0,
            ..Default::default()
        };
        assert!(!large_nu.stability().unwrap().within_limits());
    }

    #[test]
    fn zero_rhs_returns_initial_condition() {
        let cfg = SolverConfig {
            t_end: 0.01,
            ..Default::default()
        };
        let mut zero = |_: &[f64], _: f64, out: &mut [f64]| out.fill(0.0);
        let traj = integrate(&cfg, &mut zero, &[]).unwrap();
        let g = cfg.grid.build().unwrap();
        assert_eq!(traj.final_field, rectangular_ic(&g, &cfg.ic).unwrap());
        assert_eq!(traj.status, IntegrationStatus::Completed);
    }

    #[test]
    fn snapshots_land_on_requested_steps() {
        let cfg = SolverConfig {
            t_end: 0.001,
            ..Default::default()
        };
        let mut rhs = BurgersRhs::new(&cfg.grid.build().unwrap(), cfg.nu);
        let traj = integrate(&cfg, &mut rhs, &[0.0, 0.0005, 0.001, 0.5]).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.0005).abs() < 1e-15);
        assert_eq!(traj.snapshots[2].field, traj.final_field);
    }

    #[test]
    fn blowup_is_a_status() {
        let cfg = SolverConfig {
            t_end: 0.01,
            ..Default::default()
        };
        let mut explode = |u: &[f64], _: f64, out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(u) {
                *o = (v.exp()).exp() * 1e3;
            }
        };
        let traj = integrate(&cfg, &mut explode, &[]).unwrap();
        assert!(traj.diverged());
        assert!(traj.steps_taken < cfg.steps().unwrap());
    }
}
