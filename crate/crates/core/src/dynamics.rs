//! Conservative finite-difference integration of the two-fluid system
//!
//! ```text
//! d_t R + div(R u) = 0
//! d_t Q + div(Q u) = 0
//! d_t m + div(m (x) u) + grad p(Z) = mu lap u + (mu + lambda) grad div u,   m = (R + Q) u
//! ```
//!
//! on a periodic grid, with centered fluxes and a two-stage SSP Runge-Kutta
//! (Heun) step.

use thiserror::Error;

use crate::closure::{self, ClosureError, ClosureParams, Tolerance};
use crate::energy;
use crate::grid::{self, PeriodicGrid, ScalarField, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error(transparent)]
    Energy(#[from] energy::EnergyError),
    #[error("non-finite {field} tendency at grid index {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("vanishing time step: {dt:e} is below the minimum {dt_min:e}")]
    VanishingTimeStep { dt: f64, dt_min: f64 },
    #[error("invalid simulation parameter: {0}")]
    Params(String),
    #[error("prescribed time-step schedule ran out after {0} steps")]
    ScheduleExhausted(usize),
}

/// A failed run: where it stopped and why.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("run failed at step {step} (t = {t}): {source}")]
pub struct RunError {
    pub step: usize,
    pub t: f64,
    #[source]
    pub source: SimError,
}

/// Discretization of `mu lap u` in the momentum equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViscousStencil {
    /// `divergence(gradient(u))`: discretely adjoint to the centered gradient,
    /// so the viscous work equals the measured dissipation exactly.
    #[default]
    Wide,
    /// Nearest-neighbour `laplacian(u)`; dissipates an extra `O(dx^2)` beyond
    /// the centered dissipation functional.
    Compact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub mu: f64,
    pub lambda: f64,
    pub closure: ClosureParams,
    pub cfl: f64,
    pub density_floor: f64,
    pub t_end: f64,
    /// Snapshot cadence in time units; zero keeps every step.
    pub output_interval: f64,
    pub dt_min: f64,
    pub tol: Tolerance,
    pub viscous_stencil: ViscousStencil,
}

impl SimParams {
    pub fn new(
        mu: f64,
        lambda: f64,
        closure: ClosureParams,
        cfl: f64,
        t_end: f64,
    ) -> Result<Self, SimError> {
        let params = Self {
            mu,
            lambda,
            closure,
            cfl,
            density_floor: 1e-10,
            t_end,
            output_interval: 0.0,
            dt_min: 1e-12,
            tol: Tolerance::default(),
            viscous_stencil: ViscousStencil::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Params(msg));
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.lambda.is_finite() && self.mu + self.lambda >= 0.0) {
            return bad(format!(
                "mu + lambda must be nonnegative, got {}",
                self.mu + self.lambda
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.density_floor >= 0.0 && self.density_floor.is_finite()) {
            return bad(format!(
                "density_floor must be nonnegative, got {}",
                self.density_floor
            ));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.output_interval >= 0.0 && self.output_interval.is_finite()) {
            return bad(format!(
                "output_interval must be nonnegative, got {}",
                self.output_interval
            ));
        }
        if !(self.dt_min > 0.0) {
            return bad(format!("dt_min must be positive, got {}", self.dt_min));
        }
        Ok(())
    }
}

/// Solution snapshot in conservative variables.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub r: ScalarField,
    pub q: ScalarField,
    /// Momentum `(R + Q) u`.
    pub m: VectorField,
    pub t: f64,
}

impl State {
    pub fn new(r: ScalarField, q: ScalarField, m: VectorField, t: f64) -> Self {
        assert_eq!(r.grid(), q.grid());
        assert_eq!(r.grid(), m.grid());
        Self { r, q, m, t }
    }

    /// Build a state from primitive variables `(R, Q, u)`.
    pub fn from_primitive(r: ScalarField, q: ScalarField, u: &VectorField, t: f64) -> Self {
        let rho = r.zip_map(&q, |a, b| a + b);
        let m = u.scale_by(&rho);
        Self::new(r, q, m, t)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.r.grid()
    }

    pub fn density(&self) -> ScalarField {
        self.r.zip_map(&self.q, |a, b| a + b)
    }

    /// `u = m / max(R + Q, floor)` plus the number of floored points.
    pub fn velocity(&self, floor: f64) -> (VectorField, usize) {
        let rho = self.density();
        let mut hits = 0;
        let inv = rho.map(|d| 1.0 / d.max(floor));
        for &d in rho.values() {
            if d < floor {
                hits += 1;
            }
        }
        (self.m.scale_by(&inv), hits)
    }
}

/// Time derivatives of the conservative variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub dr: ScalarField,
    pub dq: ScalarField,
    pub dm: VectorField,
    pub floor_hits: usize,
}

impl Tendency {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            dr: ScalarField::zeros(grid),
            dq: ScalarField::zeros(grid),
            dm: VectorField::zeros(grid),
            floor_hits: 0,
        }
    }

    pub fn add(&mut self, other: &Tendency) {
        self.dr.axpy(1.0, &other.dr);
        self.dq.axpy(1.0, &other.dq);
        self.dm.axpy(1.0, &other.dm);
    }
}

fn check_finite(field: &'static str, f: &ScalarField) -> Result<(), SimError> {
    match f.values().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(SimError::NonFinite { field, index }),
        None => Ok(()),
    }
}

/// Semi-discrete right-hand side; see [`ViscousStencil`] for the viscous term.
pub fn rhs(state: &State, params: &SimParams) -> Result<Tendency, SimError> {
    let grid = *state.grid();
    let dim = grid.dim();
    let (u, floor_hits) = state.velocity(params.density_floor);
    let (z, _) = closure::solve_z_field(&state.r, &state.q, &params.closure, &params.tol)?;
    let p = z.map(|zv| closure::pressure(zv, &params.closure));

    let dr = grid::divergence(&u.scale_by(&state.r)).map(|v| -v);
    let dq = grid::divergence(&u.scale_by(&state.q)).map(|v| -v);

    let div_u = grid::divergence(&u);
    let grad_div = grid::gradient(&div_u);
    let grad_p = grid::gradient(&p);
    let lap_u = match params.viscous_stencil {
        ViscousStencil::Compact => grid::vector_laplacian(&u),
        ViscousStencil::Wide => VectorField::from_components(
            u.components()
                .iter()
                .map(|c| grid::divergence(&grid::gradient(c)))
                .collect(),
        ),
    };
    let bulk = params.mu + params.lambda;

    let mut dm = Vec::with_capacity(dim);
    for b in 0..dim {
        // -div(m_b u) - d_b p + mu lap u_b + (mu + lambda) d_b div u
        let flux = VectorField::from_components(
            (0..dim)
                .map(|a| state.m.component(b).zip_map(u.component(a), |x, y| x * y))
                .collect(),
        );
        let mut comp = grid::divergence(&flux).map(|v| -v);
        comp.axpy(-1.0, grad_p.component(b));
        comp.axpy(params.mu, lap_u.component(b));
        comp.axpy(bulk, grad_div.component(b));
        dm.push(comp);
    }
    let dm = VectorField::from_components(dm);

    check_finite("R", &dr)?;
    check_finite("Q", &dq)?;
    for c in dm.components() {
        check_finite("momentum", c)?;
    }
    Ok(Tendency {
        dr,
        dq,
        dm,
        floor_hits,
    })
}

/// Sound-speed proxy `max sqrt(gamma_plus Z^(gamma_plus - 1) max(|Z_R|, |Z_Q|))`.
pub fn sound_speed_bound(state: &State, params: &SimParams) -> Result<f64, SimError> {
    let gp = params.closure.gamma_plus();
    let mut c2: f64 = 0.0;
    for (&r, &q) in state.r.values().iter().zip(state.q.values()) {
        let point = closure::solve_z(r, q, &params.closure, &params.tol)?;
        if point.is_vacuum() {
            continue;
        }
        let dr = closure::dz_dr(&point, &params.closure)?.abs();
        let dq = closure::dz_dq(&point, &params.closure)?.abs();
        c2 = c2.max(gp * point.z.powf(gp - 1.0) * dr.max(dq));
    }
    Ok(c2.sqrt())
}

/// Advective and viscous step limits before the CFL factor is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLimits {
    pub advective: f64,
    pub viscous: f64,
}

pub fn step_limits(state: &State, params: &SimParams) -> Result<StepLimits, SimError> {
    let grid = state.grid();
    let dx = grid.dx();
    let (u, _) = state.velocity(params.density_floor);
    let max_u = u.magnitude().max();
    let c = sound_speed_bound(state, params)?;
    let nu = (2.0 * params.mu + params.lambda) / params.density_floor.max(state.density().min());
    let advective = if max_u + c > 0.0 {
        dx / (max_u + c)
    } else {
        f64::INFINITY
    };
    let viscous = if nu > 0.0 {
        dx * dx / (2.0 * grid.dim() as f64 * nu)
    } else {
        f64::INFINITY
    };
    Ok(StepLimits { advective, viscous })
}

/// `cfl * min(dx / (max|u| + c_max), dx^2 / (2 dim nu_max))`.
pub fn stable_dt(state: &State, params: &SimParams) -> Result<f64, SimError> {
    let limits = step_limits(state, params)?;
    let dt = params.cfl * limits.advective.min(limits.viscous);
    if dt < params.dt_min {
        return Err(SimError::VanishingTimeStep {
            dt,
            dt_min: params.dt_min,
        });
    }
    Ok(dt)
}

fn advance(state: &State, tend: &Tendency, dt: f64) -> State {
    let mut next = state.clone();
    next.r.axpy(dt, &tend.dr);
    next.q.axpy(dt, &tend.dq);
    next.m.axpy(dt, &tend.dm);
    next.t = state.t + dt;
    next
}

fn average(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |x, y| 0.5 * x + 0.5 * y)
}

/// One Heun step with an additional source term evaluated at the stage times.
///
/// Returns the new state and the number of density-floor activations over
/// both stages.
pub fn step_forced(
    state: &State,
    params: &SimParams,
    dt: f64,
    forcing: Option<&dyn Fn(f64) -> Tendency>,
) -> Result<(State, usize), SimError> {
    let mut k1 = rhs(state, params)?;
    if let Some(f) = forcing {
        k1.add(&f(state.t));
    }
    let stage = advance(state, &k1, dt);
    let mut k2 = rhs(&stage, params)?;
    if let Some(f) = forcing {
        k2.add(&f(stage.t));
    }
    let pushed = advance(&stage, &k2, dt);
    let m = VectorField::from_components(
        state
            .m
            .components()
            .iter()
            .zip(pushed.m.components())
            .map(|(a, b)| average(a, b))
            .collect(),
    );
    let next = State {
        r: average(&state.r, &pushed.r),
        q: average(&state.q, &pushed.q),
        m,
        t: state.t + dt,
    };
    Ok((next, k1.floor_hits + k2.floor_hits))
}

pub fn step(state: &State, params: &SimParams, dt: f64) -> Result<State, SimError> {
    step_forced(state, params, dt, None).map(|(s, _)| s)
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    pub mass_r: f64,
    pub mass_q: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub min_r: f64,
    pub min_q: f64,
    pub max_u: f64,
    pub floor_hits: usize,
}

impl StepDiagnostics {
    pub const CSV_HEADER: [&'static str; 10] = [
        "t",
        "dt",
        "mass_R",
        "mass_Q",
        "energy",
        "dissipation",
        "min_R",
        "min_Q",
        "max_u",
        "floor_hits",
    ];

    pub fn measure(
        state: &State,
        params: &SimParams,
        dt: f64,
        floor_hits: usize,
    ) -> Result<Self, SimError> {
        let report = energy::total_energy(state, params)?;
        let (u, _) = state.velocity(params.density_floor);
        Ok(Self {
            t: state.t,
            dt,
            mass_r: grid::integrate(&state.r),
            mass_q: grid::integrate(&state.q),
            kinetic: report.kinetic,
            internal: report.internal,
            energy: report.total(),
            dissipation: energy::dissipation(state, params),
            min_r: state.r.min(),
            min_q: state.q.min(),
            max_u: u.magnitude().max(),
            floor_hits,
        })
    }
}

/// How the run chooses its time steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Schedule {
    /// `stable_dt` at every step, clipped to land on output times and `t_end`.
    #[default]
    Adaptive,
    /// Replay a prescribed sequence of steps.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Every step actually taken, in order.
    pub dts: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.snapshots
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Advance `initial` to `params.t_end`.
///
/// Snapshots are kept at every multiple of `output_interval` (every step when
/// it is zero) and always at the final time; diagnostics are recorded at
/// every step, starting with the initial state.
pub fn run(
    initial: &State,
    params: &SimParams,
    schedule: &Schedule,
) -> Result<Trajectory, RunError> {
    let fail = |step: usize, t: f64| move |source: SimError| RunError { step, t, source };
    params.validate().map_err(fail(0, initial.t))?;

    let mut state = initial.clone();
    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
        diagnostics: vec![
            StepDiagnostics::measure(&state, params, 0.0, 0).map_err(fail(0, state.t))?
        ],
        dts: Vec::new(),
    };
    let t_end = params.t_end;
    let interval = params.output_interval;
    let mut next_output = if interval > 0.0 {
        state.t + interval
    } else {
        t_end
    };
    let mut k = 0;
    // relative guard so accumulated round-off cannot leave a sliver step
    let eps_t = 1e-12 * t_end.abs().max(1.0);

    while state.t < t_end - eps_t {
        let t0 = state.t;
        let dt = match schedule {
            Schedule::Adaptive => {
                let dt = stable_dt(&state, params).map_err(fail(k, t0))?;
                let mut target = t_end;
                if interval > 0.0 {
                    target = target.min(next_output);
                }
                if t0 + dt >= target - eps_t {
                    target - t0
                } else {
                    dt
                }
            }
            Schedule::Fixed(dts) => *dts
                .get(k)
                .ok_or(SimError::ScheduleExhausted(k))
                .map_err(fail(k, t0))?,
        };
        let (mut next, hits) = step_forced(&state, params, dt, None).map_err(fail(k, t0))?;
        if (next.t - t_end).abs() <= eps_t {
            next.t = t_end;
        }
        state = next;
        k += 1;
        traj.dts.push(dt);
        traj.diagnostics
            .push(StepDiagnostics::measure(&state, params, dt, hits).map_err(fail(k, state.t))?);

        let at_output = interval <= 0.0 || state.t >= next_output - eps_t;
        let at_end = state.t >= t_end - eps_t;
        if at_output || at_end {
            traj.snapshots.push(state.clone());
            if interval > 0.0 {
                while next_output <= state.t + eps_t {
                    next_output += interval;
                }
            }
        }
    }
    Ok(traj)
}
