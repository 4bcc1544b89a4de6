//! Mixture energy, viscous dissipation and the energy-inequality audit.
//!
//! The internal energy density
//! `(R/alpha)^gp alpha / (gp - 1) + (Q/(1-alpha))^gm (1-alpha) / (gm - 1)`
//! collapses to `Z^gp [alpha/(gp - 1) + (1-alpha)/(gm - 1)]` because
//! `R/alpha = Z` and `(Q/(1-alpha))^gm = Z^gp`. The simplified form is used
//! for evaluation; the raw form is kept for cross-checks. Vacuum points
//! (`Z = 0`) contribute nothing.

use thiserror::Error;

use crate::closure::{self, ClosureError};
use crate::dynamics::{SimParams, State};
use crate::grid::{self, ScalarField};

/// Admissible overshoot of the volume fraction outside `[0, 1]`.
pub const ALPHA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error("volume fraction {alpha} outside [0, 1] at grid index {index}")]
    Alpha { index: usize, alpha: f64 },
}

/// Instantaneous energy split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub internal: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.internal
    }
}

/// Pointwise `(Z, alpha)`, rejecting volume fractions outside `[0, 1]`.
fn closure_fields(
    state: &State,
    params: &SimParams,
) -> Result<(ScalarField, ScalarField), EnergyError> {
    let (z, alpha) = closure::solve_z_field(&state.r, &state.q, &params.closure, &params.tol)?;
    for (index, &a) in alpha.values().iter().enumerate() {
        if !a.is_nan() && !(-ALPHA_TOLERANCE..=1.0 + ALPHA_TOLERANCE).contains(&a) {
            return Err(EnergyError::Alpha { index, alpha: a });
        }
    }
    Ok((z, alpha))
}

pub fn kinetic_energy(state: &State, params: &SimParams) -> f64 {
    let rho = state.density();
    let density = state
        .m
        .magnitude_sq()
        .zip_map(&rho, |m2, d| 0.5 * m2 / d.max(params.density_floor));
    grid::integrate(&density)
}

/// Internal energy via `Z^gp [alpha/(gp - 1) + (1 - alpha)/(gm - 1)]`.
pub fn internal_energy(state: &State, params: &SimParams) -> Result<f64, EnergyError> {
    let (z, alpha) = closure_fields(state, params)?;
    let gp = params.closure.gamma_plus();
    let gm = params.closure.gamma_minus();
    let density = z.zip_map(&alpha, |zv, a| {
        if zv > 0.0 {
            zv.powf(gp) * (a / (gp - 1.0) + (1.0 - a) / (gm - 1.0))
        } else {
            0.0
        }
    });
    Ok(grid::integrate(&density))
}

/// Internal energy from the phase-wise integrand
/// `(R/alpha)^gp alpha/(gp - 1) + (Q/(1 - alpha))^gm (1 - alpha)/(gm - 1)`.
pub fn internal_energy_raw(state: &State, params: &SimParams) -> Result<f64, EnergyError> {
    let (_, alpha) = closure_fields(state, params)?;
    let gp = params.closure.gamma_plus();
    let gm = params.closure.gamma_minus();
    let values: Vec<f64> = state
        .r
        .values()
        .iter()
        .zip(state.q.values())
        .zip(alpha.values())
        .map(|((&r, &q), &a)| {
            if a.is_nan() {
                return 0.0;
            }
            let plus = if a > 0.0 {
                (r / a).powf(gp) * a / (gp - 1.0)
            } else {
                0.0
            };
            let minus = if a < 1.0 {
                (q / (1.0 - a)).powf(gm) * (1.0 - a) / (gm - 1.0)
            } else {
                0.0
            };
            plus + minus
        })
        .collect();
    Ok(grid::integrate(&ScalarField::from_values(
        *state.grid(),
        values,
    )))
}

pub fn total_energy(state: &State, params: &SimParams) -> Result<EnergyParts, EnergyError> {
    Ok(EnergyParts {
        kinetic: kinetic_energy(state, params),
        internal: internal_energy(state, params)?,
    })
}

/// `int mu |grad u|^2 + (mu + lambda) (div u)^2 dx` with centered differences.
pub fn dissipation(state: &State, params: &SimParams) -> f64 {
    let (u, _) = state.velocity(params.density_floor);
    let shear = grid::jacobian_norm_sq(&u);
    let div = grid::divergence(&u);
    let bulk = params.mu + params.lambda;
    let density = shear.zip_map(&div, |s, d| params.mu * s + bulk * d * d);
    grid::integrate(&density)
}

/// One time sample fed to [`audit_energy`]. `kinetic` and `internal` may be
/// NaN when only the total is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub total: f64,
    pub dissipation_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub dissipation_rate: f64,
    pub cumulative_dissipation: f64,
    /// `E(t) + int_0^t D - E(0)` before clipping at zero.
    pub balance: f64,
    /// `max(0, balance)`
    pub defect: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: [&'static str; 6] = [
        "t",
        "kinetic",
        "internal",
        "dissipation_rate",
        "cumulative_dissipation",
        "defect",
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    pub reports: Vec<EnergyReport>,
}

impl EnergyAudit {
    pub fn max_defect(&self) -> f64 {
        self.reports.iter().fold(0.0, |m, r| m.max(r.defect))
    }

    pub fn max_balance(&self) -> f64 {
        self.reports
            .iter()
            .fold(f64::NEG_INFINITY, |m, r| m.max(r.balance))
    }

    /// Samples whose defect exceeds `tol`.
    pub fn flagged(&self, tol: f64) -> Vec<usize> {
        self.reports
            .iter()
            .enumerate()
            .filter(|(_, r)| r.defect > tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Trapezoidal time integral of the dissipation and the resulting defect.
pub fn audit_energy(samples: &[EnergySample]) -> EnergyAudit {
    let Some(first) = samples.first() else {
        return EnergyAudit { reports: vec![] };
    };
    let e0 = first.total;
    let mut cumulative = 0.0;
    let mut prev = first;
    let reports = samples
        .iter()
        .map(|s| {
            cumulative += 0.5 * (s.t - prev.t) * (s.dissipation_rate + prev.dissipation_rate);
            prev = s;
            let balance = s.total + cumulative - e0;
            EnergyReport {
                t: s.t,
                kinetic: s.kinetic,
                internal: s.internal,
                dissipation_rate: s.dissipation_rate,
                cumulative_dissipation: cumulative,
                balance,
                defect: balance.max(0.0),
            }
        })
        .collect();
    EnergyAudit { reports }
}

/// Energy samples for every diagnostic record of a trajectory.
pub fn samples_from_diagnostics(diags: &[crate::dynamics::StepDiagnostics]) -> Vec<EnergySample> {
    diags
        .iter()
        .map(|d| EnergySample {
            t: d.t,
            kinetic: d.kinetic,
            internal: d.internal,
            total: d.energy,
            dissipation_rate: d.dissipation,
        })
        .collect()
}
