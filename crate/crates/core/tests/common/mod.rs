#![allow(dead_code)]

use twofluid::closure::ClosureParams;
use twofluid::config::RunConfig;
use twofluid::dynamics::{step_forced, SimParams, State, Tendency};
use twofluid::grid::{self, Norm, PeriodicGrid, ScalarField, VectorField};

pub fn std1d(n: usize) -> (State, SimParams) {
    let mut cfg = RunConfig::default();
    cfg.grid.n = n;
    (cfg.initial_state().unwrap(), cfg.params)
}

/// Smooth travelling solution of the forced system with equal exponents,
/// for which `Z = R + Q` and `p = (R + Q)^gamma_plus`.
pub struct Manufactured {
    pub gamma_plus: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Manufactured {
    pub fn params(&self, t_end: f64) -> SimParams {
        let closure = ClosureParams::new(self.gamma_plus, self.gamma_plus).unwrap();
        SimParams::new(self.mu, self.lambda, closure, 0.4, t_end).unwrap()
    }

    /// `(R, Q, u)` and their `t` and `x` derivatives, plus `u_xx`.
    fn fields(&self, x: f64, t: f64) -> [[f64; 3]; 3] {
        let r = [
            1.0 + 0.2 * (x - t).sin(),
            -0.2 * (x - t).cos(),
            0.2 * (x - t).cos(),
        ];
        let q = [
            1.0 + 0.2 * (x + 0.5 * t).cos(),
            -0.1 * (x + 0.5 * t).sin(),
            -0.2 * (x + 0.5 * t).sin(),
        ];
        let u = [
            0.1 * (x + t).sin(),
            0.1 * (x + t).cos(),
            0.1 * (x + t).cos(),
        ];
        [r, q, u]
    }

    pub fn exact(&self, grid: &PeriodicGrid, t: f64) -> State {
        let r = ScalarField::from_fn(*grid, |x| self.fields(x[0], t)[0][0]);
        let q = ScalarField::from_fn(*grid, |x| self.fields(x[0], t)[1][0]);
        let u = VectorField::from_fn(*grid, |x| [self.fields(x[0], t)[2][0], 0.0, 0.0]);
        State::from_primitive(r, q, &u, t)
    }

    /// Residual of the exact solution in the unforced equations.
    pub fn source(&self, grid: &PeriodicGrid, t: f64) -> Tendency {
        let g = *grid;
        let gp = self.gamma_plus;
        let visc = 2.0 * self.mu + self.lambda;
        let at = |x: [f64; 3]| {
            let [r, q, u] = self.fields(x[0], t);
            let u_xx = -0.1 * (x[0] + t).sin();
            let (rho, rho_t, rho_x) = (r[0] + q[0], r[1] + q[1], r[2] + q[2]);
            let s_r = r[1] + r[2] * u[0] + r[0] * u[2];
            let s_q = q[1] + q[2] * u[0] + q[0] * u[2];
            let s_m = rho_t * u[0]
                + rho * u[1]
                + rho_x * u[0] * u[0]
                + 2.0 * rho * u[0] * u[2]
                + gp * rho.powf(gp - 1.0) * rho_x
                - visc * u_xx;
            [s_r, s_q, s_m]
        };
        Tendency {
            dr: ScalarField::from_fn(g, |x| at(x)[0]),
            dq: ScalarField::from_fn(g, |x| at(x)[1]),
            dm: VectorField::from_components(vec![ScalarField::from_fn(g, |x| at(x)[2])]),
            floor_hits: 0,
        }
    }

    /// Forced run on `n` points with `steps` equal steps up to `t_end`.
    pub fn run(&self, n: usize, steps: usize, t_end: f64) -> State {
        let grid = PeriodicGrid::torus(1, n).unwrap();
        let params = self.params(t_end);
        let forcing = |t: f64| self.source(&grid, t);
        let dt = t_end / steps as f64;
        let mut s = self.exact(&grid, 0.0);
        for _ in 0..steps {
            s = step_forced(&s, &params, dt, Some(&forcing)).unwrap().0;
        }
        s
    }

    /// `|R - R*|_2 + |Q - Q*|_2 + |m - m*|_2` against the exact solution.
    pub fn error(&self, s: &State) -> f64 {
        let e = self.exact(s.grid(), s.t);
        distance(s, &e)
    }
}

pub fn distance(a: &State, b: &State) -> f64 {
    let d = |x: &ScalarField, y: &ScalarField| grid::norm(&x.zip_map(y, |p, q| p - q), Norm::L2);
    d(&a.r, &b.r) + d(&a.q, &b.q) + grid::vector_norm(&a.m.sub(&b.m), Norm::L2)
}

pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
