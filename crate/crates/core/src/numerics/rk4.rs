use super::Field;

/// Right-hand side of `du/dt = f(u, t)`, evaluated into a caller buffer.
pub trait Rhs {
    fn eval_into(&mut self, u: &[f64], t: f64, out: &mut [f64]);
}

impl<F> Rhs for F
where
    F: FnMut(&[f64], f64, &mut [f64]),
{
    fn eval_into(&mut self, u: &[f64], t: f64, out: &mut [f64]) {
        self(u, t, out)
    }
}

/// Classical four-stage Runge-Kutta stepper with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            stage: vec![0.0; n],
        }
    }

    /// Advances `u` in place from `t` to `t + dt`.
    pub fn step<R: Rhs + ?Sized>(&mut self, u: &mut [f64], rhs: &mut R, t: f64, dt: f64) {
        let half = 0.5 * dt;
        rhs.eval_into(u, t, &mut self.k1);
        for ((s, &ui), &k) in self.stage.iter_mut().zip(u.iter()).zip(&self.k1) {
            *s = ui + half * k;
        }
        rhs.eval_into(&self.stage, t + half, &mut self.k2);
        for ((s, &ui), &k) in self.stage.iter_mut().zip(u.iter()).zip(&self.k2) {
            *s = ui + half * k;
        }
        rhs.eval_into(&self.stage, t + half, &mut self.k3);
        for ((s, &ui), &k) in self.stage.iter_mut().zip(u.iter()).zip(&self.k3) {
            *s = ui + dt * k;
        }
        rhs.eval_into(&self.stage, t + dt, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..u.len() {
            u[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// One RK4 step returning a new state.
pub fn rk4_step<R: Rhs + ?Sized>(state: &Field, rhs: &mut R, t: f64, dt: f64) -> Field {
    let mut u = state.values().to_vec();
    Rk4::new(u.len()).step(&mut u, rhs, t, dt);
    Field::new(u)
}
