//! Twin experiments: a reference run and a perturbed run from nearby data,
//! compared sample by sample.
//!
//! With `U = u - u~`, `frakR = R - R~` and `calQ = Q - Q~`, the comparison
//! tracks the difference norms together with the reference-run quantities
//! that bound their growth. Every unknown constant is fitted from the data and
//! reported, never assumed.

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{self, RunError, Schedule, SimError, SimParams, State, Trajectory};
use crate::grid::{self, GridError, Norm, PeriodicGrid, ScalarField, VectorField};
use crate::gronwall::{self, GronwallError, GronwallTrace};

/// Floor for the denominator of the density-stability ratio.
pub const EPS_DIV: f64 = 1e-14;
/// Largest admissible relative mismatch of total mass between the two runs.
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("trajectories are not comparable: {0}")]
    Mismatch(String),
    #[error("total masses differ by {relative:e} (relative) at t = {t}")]
    MassMismatch { t: f64, relative: f64 },
    #[error("empty diagnostics series")]
    Empty,
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Gronwall(#[from] GronwallError),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Reference-run norms entering the growth bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceNorms {
    /// `sup |grad u~|` (pointwise Frobenius norm).
    pub grad_u_inf: f64,
    pub grad_u_l2: f64,
    pub grad_r_l3: f64,
    pub grad_q_l3: f64,
    /// `|| d_t u~ + u~ . grad u~ ||_3`.
    pub material_l3: f64,
}

/// Sup norms of both density pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensitySups {
    pub r: f64,
    pub q: f64,
    pub r_ref: f64,
    pub q_ref: f64,
}

/// Both sides of `int (R+Q) U = -int (frakR + calQ)(u~ - mean u~)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanIdentity {
    /// `|int (R+Q) U|`.
    pub lhs: f64,
    /// Euclidean norm of the difference of the two sides.
    pub residual: f64,
    /// `int (R+Q)|u| + int (R~+Q~)|u~|`.
    pub scale: f64,
    pub mass: f64,
    pub mass_ref: f64,
}

/// One paired sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairDiagnostics {
    pub t: f64,
    pub norm_frak_r: f64,
    pub norm_cal_q: f64,
    /// `|| sqrt(R+Q) U ||_2` over the perturbed densities.
    pub norm_wu: f64,
    pub norm_grad_u: f64,
    pub norm_u6: f64,
    /// `|int U|`.
    pub mean_u: f64,
    /// Cumulative trapezoid of `norm_grad_u`.
    pub int_grad_u: f64,
    pub m_bound: f64,
    pub reference: ReferenceNorms,
    pub sups: DensitySups,
    pub identity: MeanIdentity,
}

impl PairDiagnostics {
    pub const CSV_HEADER: [&'static str; 9] = [
        "t",
        "norm_frakR",
        "norm_calQ",
        "norm_wU",
        "norm_gradU",
        "norm_U6",
        "mean_U",
        "int_gradU",
        "M_bound",
    ];

    pub fn csv_row(&self) -> [f64; 9] {
        [
            self.t,
            self.norm_frak_r,
            self.norm_cal_q,
            self.norm_wu,
            self.norm_grad_u,
            self.norm_u6,
            self.mean_u,
            self.int_grad_u,
            self.m_bound,
        ]
    }

    /// `||frakR||_2 + ||calQ||_2 + ||sqrt(R+Q) U||_2`.
    pub fn distance(&self) -> f64 {
        self.norm_frak_r + self.norm_cal_q + self.norm_wu
    }

    pub fn density_distance(&self) -> f64 {
        self.norm_frak_r + self.norm_cal_q
    }
}

fn grad_sup(v: &VectorField) -> f64 {
    grid::jacobian_norm_sq(v)
        .values()
        .iter()
        .fold(0.0_f64, |a, &x| a.max(x))
        .sqrt()
}

fn grad_l2(v: &VectorField) -> f64 {
    grid::integrate(&grid::jacobian_norm_sq(v)).max(0.0).sqrt()
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `d_t u + u . grad u` from the right-hand side of the reference state.
pub fn material_derivative(state: &State, params: &SimParams) -> Result<VectorField, SimError> {
    let tend = dynamics::rhs(state, params)?;
    let floor = params.density_floor;
    let rho = state.density();
    let (u, _) = state.velocity(floor);
    let drho = tend.dr.zip_map(&tend.dq, |a, b| a + b);
    let inv = rho.map(|d| 1.0 / d.max(floor));
    let dim = state.grid().dim();
    let grads: Vec<VectorField> = u.components().iter().map(grid::gradient).collect();
    let comps = (0..dim)
        .map(|i| {
            let ui = u.component(i).values();
            let dmi = tend.dm.component(i).values();
            let mut vals: Vec<f64> = (0..ui.len())
                .map(|k| (dmi[k] - ui[k] * drho.values()[k]) * inv.values()[k])
                .collect();
            for (j, uj) in u.components().iter().enumerate() {
                let dij = grads[i].component(j).values();
                for (k, v) in vals.iter_mut().enumerate() {
                    *v += uj.values()[k] * dij[k];
                }
            }
            ScalarField::from_values(*state.grid(), vals)
        })
        .collect();
    Ok(VectorField::from_components(comps))
}

fn pair_sample(
    weak: &State,
    strong: &State,
    params: &SimParams,
) -> Result<PairDiagnostics, HarnessError> {
    let floor = params.density_floor;
    let (u, _) = weak.velocity(floor);
    let (us, _) = strong.velocity(floor);
    let diff_u = u.sub(&us);
    let frak_r = weak.r.zip_map(&strong.r, |a, b| a - b);
    let cal_q = weak.q.zip_map(&strong.q, |a, b| a - b);
    let rho = weak.density();
    let rho_s = strong.density();

    let norm_grad_u = grad_l2(&diff_u);
    let mean_u = euclid(&grid::integrate_vector(&diff_u));

    let material = material_derivative(strong, params)?;
    let reference = ReferenceNorms {
        grad_u_inf: grad_sup(&us),
        grad_u_l2: grad_l2(&us),
        grad_r_l3: grid::vector_norm(&grid::gradient(&strong.r), Norm::L3),
        grad_q_l3: grid::vector_norm(&grid::gradient(&strong.q), Norm::L3),
        material_l3: grid::vector_norm(&material, Norm::L3),
    };
    let sups = DensitySups {
        r: weak.r.sup_abs(),
        q: weak.q.sup_abs(),
        r_ref: strong.r.sup_abs(),
        q_ref: strong.q.sup_abs(),
    };

    let volume = strong.grid().length().powi(strong.grid().dim() as i32);
    let dsum = frak_r.zip_map(&cal_q, |a, b| a + b);
    let lhs_vec = grid::integrate_vector(&diff_u.scale_by(&rho));
    let residual_vec: Vec<f64> = us
        .components()
        .iter()
        .zip(&lhs_vec)
        .map(|(c, lhs)| {
            let mean = grid::integrate(c) / volume;
            let rhs = -grid::integrate(&dsum.zip_map(c, |d, v| d * (v - mean)));
            lhs - rhs
        })
        .collect();
    let identity = MeanIdentity {
        lhs: euclid(&lhs_vec),
        residual: euclid(&residual_vec),
        scale: grid::integrate(&rho.zip_map(&u.magnitude(), |a, b| a.abs() * b))
            + grid::integrate(&rho_s.zip_map(&us.magnitude(), |a, b| a.abs() * b)),
        mass: grid::integrate(&rho),
        mass_ref: grid::integrate(&rho_s),
    };

    Ok(PairDiagnostics {
        t: strong.t,
        norm_frak_r: grid::norm(&frak_r, Norm::L2),
        norm_cal_q: grid::norm(&cal_q, Norm::L2),
        norm_wu: grid::weighted_l2(&rho, &diff_u)?,
        norm_grad_u,
        norm_u6: grid::vector_norm(&diff_u, Norm::L6),
        mean_u,
        int_grad_u: 0.0,
        m_bound: sups.r.max(sups.q).max(sups.r_ref).max(sups.q_ref),
        reference,
        sups,
        identity,
    })
}

/// Pair two snapshot sequences sample by sample.
///
/// Both sequences must live on the same grid and carry bitwise equal sample
/// times, which holds when the perturbed run replays the reference step
/// schedule.
pub fn compare(
    weak: &[State],
    strong: &[State],
    params: &SimParams,
) -> Result<Vec<PairDiagnostics>, HarnessError> {
    if weak.len() != strong.len() {
        return Err(HarnessError::Mismatch(format!(
            "{} perturbed samples against {} reference samples",
            weak.len(),
            strong.len()
        )));
    }
    if weak.is_empty() {
        return Err(HarnessError::Empty);
    }
    for (k, (w, s)) in weak.iter().zip(strong).enumerate() {
        if w.grid() != s.grid() {
            return Err(HarnessError::Mismatch(format!(
                "grids differ at sample {k}"
            )));
        }
        if w.t.to_bits() != s.t.to_bits() {
            return Err(HarnessError::Mismatch(format!(
                "sample {k} taken at t = {} and t = {}",
                w.t, s.t
            )));
        }
    }
    let mut diags = weak
        .iter()
        .zip(strong)
        .map(|(w, s)| pair_sample(w, s, params))
        .collect::<Result<Vec<_>, _>>()?;
    let t: Vec<f64> = diags.iter().map(|d| d.t).collect();
    let g: Vec<f64> = diags.iter().map(|d| d.norm_grad_u).collect();
    for (d, c) in diags.iter_mut().zip(gronwall::cumulative_trapezoid(&t, &g)) {
        d.int_grad_u = c;
    }
    Ok(diags)
}

/// Which fields a perturbation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationTarget {
    Velocity,
    Densities,
    All,
}

impl PerturbationTarget {
    pub fn name(self) -> &'static str {
        match self {
            Self::Velocity => "velocity",
            Self::Densities => "densities",
            Self::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "velocity" => Some(Self::Velocity),
            "densities" => Some(Self::Densities),
            "all" => Some(Self::All),
            _ => None,
        }
    }
}

/// Single Fourier mode `delta sin(2 pi k x_1 / L)` along the first axis.
///
/// The velocity part perturbs the first velocity component; the density part
/// adds the mode to both `R` and `Q` at fixed velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub target: PerturbationTarget,
    pub delta: f64,
    pub mode: u32,
}

impl Perturbation {
    pub fn shape(&self, grid: &PeriodicGrid) -> ScalarField {
        let k = 2.0 * std::f64::consts::PI * f64::from(self.mode) / grid.length();
        ScalarField::from_fn(*grid, |x| (k * x[0]).sin())
    }

    /// Apply to `base`. A zero amplitude returns a bitwise copy.
    pub fn apply(&self, base: &State, floor: f64) -> State {
        let s = self.shape(base.grid());
        let d = self.delta;
        let mut out = base.clone();
        if matches!(
            self.target,
            PerturbationTarget::Densities | PerturbationTarget::All
        ) {
            let (u, _) = base.velocity(floor);
            out.r.axpy(d, &s);
            out.q.axpy(d, &s);
            for (mc, uc) in out.m.components_mut().iter_mut().zip(u.components()) {
                let su = s.zip_map(uc, |a, b| 2.0 * a * b);
                mc.axpy(d, &su);
            }
        }
        if matches!(
            self.target,
            PerturbationTarget::Velocity | PerturbationTarget::All
        ) {
            let rho = out.density();
            let srho = s.zip_map(&rho, |a, b| a * b);
            out.m.component_mut(0).axpy(d, &srho);
        }
        out
    }
}

/// Reference run, perturbed run on the reference step schedule, and their
/// paired diagnostics.
#[derive(Debug, Clone)]
pub struct TwinRun {
    pub strong: Trajectory,
    pub weak: Trajectory,
    pub diagnostics: Vec<PairDiagnostics>,
}

pub fn twin_run(
    base: &State,
    params: &SimParams,
    perturbation: &Perturbation,
) -> Result<TwinRun, HarnessError> {
    let strong = dynamics::run(base, params, &Schedule::Adaptive)?;
    let perturbed = perturbation.apply(base, params.density_floor);
    let weak = dynamics::run(&perturbed, params, &Schedule::Fixed(strong.dts.clone()))?;
    let diagnostics = compare(&weak.snapshots, &strong.snapshots, params)?;
    Ok(TwinRun {
        strong,
        weak,
        diagnostics,
    })
}

/// `lhs / rhs`, with `0/0 = 0` and `x/0 = inf` for `x > 0`.
fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityStability {
    /// `(||frakR|| + ||calQ||) / max(EPS_DIV, int_0^t ||grad U||)` per sample.
    pub ratios: Vec<f64>,
    /// Supremum over samples with `t > t_0`.
    pub fitted: f64,
    pub median: f64,
}

impl DensityStability {
    pub fn verdict(&self) -> bool {
        self.fitted.is_finite() && self.fitted <= 2.0 * self.median
    }
}

pub fn check_density_stability(diag: &[PairDiagnostics]) -> DensityStability {
    let ratios: Vec<f64> = diag
        .iter()
        .map(|d| d.density_distance() / d.int_grad_u.max(EPS_DIV))
        .collect();
    let later: Vec<f64> = match diag.first() {
        Some(first) => diag
            .iter()
            .zip(&ratios)
            .filter(|(d, _)| d.t > first.t)
            .map(|(_, &c)| c)
            .collect(),
        None => Vec::new(),
    };
    let fitted = later.iter().fold(
        0.0_f64,
        |a, &c| if c.is_nan() { f64::NAN } else { a.max(c) },
    );
    DensityStability {
        fitted,
        median: if later.is_empty() {
            0.0
        } else {
            median(&later)
        },
        ratios,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanVelocityReport {
    /// `residual / scale` per sample (0 where both vanish).
    pub relative_residuals: Vec<f64>,
    pub max_relative_residual: f64,
    /// `|int U|` per sample.
    pub lhs: Vec<f64>,
    /// Bracket of the mean-value bound, divided by the initial total mass.
    pub bracket: Vec<f64>,
    /// Smallest constant for which `lhs <= C bracket` at every sample.
    pub fitted: f64,
}

impl MeanVelocityReport {
    pub fn identity_holds(&self, tol: f64) -> bool {
        self.max_relative_residual <= tol
    }
}

/// Check the mean-velocity identity and fit the constant in the mean-value
/// bound. Requires matched total masses.
pub fn check_mean_velocity(diag: &[PairDiagnostics]) -> Result<MeanVelocityReport, HarnessError> {
    let first = diag.first().ok_or(HarnessError::Empty)?;
    for d in diag {
        let id = &d.identity;
        let relative = (id.mass - id.mass_ref).abs() / id.mass_ref.abs().max(f64::MIN_POSITIVE);
        if relative > MASS_TOLERANCE {
            return Err(HarnessError::MassMismatch { t: d.t, relative });
        }
    }
    let mass0 = first.identity.mass_ref;
    let relative_residuals: Vec<f64> = diag
        .iter()
        .map(|d| ratio(d.identity.residual, d.identity.scale))
        .collect();
    let lhs: Vec<f64> = diag.iter().map(|d| d.mean_u).collect();
    let bracket: Vec<f64> = diag
        .iter()
        .map(|d| {
            ((d.sups.r + d.sups.q) * d.norm_grad_u + d.reference.grad_u_l2 * d.density_distance())
                / mass0
        })
        .collect();
    let fitted = lhs
        .iter()
        .zip(&bracket)
        .fold(0.0_f64, |a, (&l, &b)| a.max(ratio(l, b)));
    Ok(MeanVelocityReport {
        max_relative_residual: relative_residuals.iter().fold(0.0_f64, |a, &r| a.max(r)),
        relative_residuals,
        lhs,
        bracket,
        fitted,
    })
}

/// Inputs to the transport estimate for one density difference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSample {
    pub t: f64,
    /// `||frakR||_2` (or `||calQ||_2`).
    pub diff_norm: f64,
    pub grad_u_l2: f64,
    /// `||R||_inf + ||R~||_inf`.
    pub sup_sum: f64,
    /// `||grad u~||_inf`.
    pub grad_ref_inf: f64,
    /// `||grad R~||_3`.
    pub grad_density_l3: f64,
    pub u6: f64,
}

impl RateSample {
    pub fn bracket(&self) -> f64 {
        self.sup_sum * self.grad_u_l2
            + self.grad_ref_inf * self.diff_norm
            + self.grad_density_l3 * self.u6
    }
}

impl PairDiagnostics {
    pub fn rate_sample_r(&self) -> RateSample {
        RateSample {
            t: self.t,
            diff_norm: self.norm_frak_r,
            grad_u_l2: self.norm_grad_u,
            sup_sum: self.sups.r + self.sups.r_ref,
            grad_ref_inf: self.reference.grad_u_inf,
            grad_density_l3: self.reference.grad_r_l3,
            u6: self.norm_u6,
        }
    }

    pub fn rate_sample_q(&self) -> RateSample {
        RateSample {
            t: self.t,
            diff_norm: self.norm_cal_q,
            grad_u_l2: self.norm_grad_u,
            sup_sum: self.sups.q + self.sups.q_ref,
            grad_ref_inf: self.reference.grad_u_inf,
            grad_density_l3: self.reference.grad_q_l3,
            u6: self.norm_u6,
        }
    }
}

/// Forward-difference growth rates against the transport bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `(|d|_{k+1} - |d|_k) / dt_k`.
    pub rates: Vec<f64>,
    /// Interval mean of the bracket.
    pub brackets: Vec<f64>,
    /// Smallest `C` with `rate <= C bracket` on every interval.
    pub fitted: f64,
}

pub fn fit_rates(samples: &[RateSample]) -> RateReport {
    let mut rates = Vec::with_capacity(samples.len().saturating_sub(1));
    let mut brackets = Vec::with_capacity(rates.capacity());
    for w in samples.windows(2) {
        rates.push((w[1].diff_norm - w[0].diff_norm) / (w[1].t - w[0].t));
        brackets.push(0.5 * (w[0].bracket() + w[1].bracket()));
    }
    let fitted = rates
        .iter()
        .zip(&brackets)
        .fold(0.0_f64, |a, (&r, &b)| a.max(ratio(r, b)));
    RateReport {
        rates,
        brackets,
        fitted,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportRates {
    pub r: RateReport,
    pub q: RateReport,
}

pub fn check_transport_rates(diag: &[PairDiagnostics]) -> TransportRates {
    let r: Vec<RateSample> = diag.iter().map(PairDiagnostics::rate_sample_r).collect();
    let q: Vec<RateSample> = diag.iter().map(PairDiagnostics::rate_sample_q).collect();
    TransportRates {
        r: fit_rates(&r),
        q: fit_rates(&q),
    }
}

/// How the dissipation enters the Gronwall trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceForm {
    /// `f = |sqrt(rho) U|^2 / 2 + (1/2) int |grad U|^2`, `g' = |grad U|`.
    Literal,
    /// `f = |sqrt(rho) U|^2 / 2 + (mu/2) int |grad U|^2`,
    /// `g' = sqrt(mu/2) |grad U|`, so that `f' + g'^2` is the left side of
    /// the relative energy balance with viscosity `mu`.
    #[default]
    Weighted,
}

impl TraceForm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Literal => "literal",
            Self::Weighted => "weighted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "literal" => Some(Self::Literal),
            "weighted" => Some(Self::Weighted),
            _ => None,
        }
    }
}

/// Assemble `(f, g', alpha, beta)` from paired diagnostics, with times
/// shifted to start at zero.
pub fn build_gronwall_trace(
    diag: &[PairDiagnostics],
    params: &SimParams,
    constant: f64,
    form: TraceForm,
) -> Result<GronwallTrace, HarnessError> {
    let t0 = diag.first().ok_or(HarnessError::Empty)?.t;
    let (w, s) = match form {
        TraceForm::Literal => (1.0, 1.0),
        TraceForm::Weighted => (params.mu, (0.5 * params.mu).sqrt()),
    };
    let t: Vec<f64> = diag.iter().map(|d| d.t - t0).collect();
    let grad_sq: Vec<f64> = diag.iter().map(|d| d.norm_grad_u * d.norm_grad_u).collect();
    let int_grad_sq = gronwall::cumulative_trapezoid(&t, &grad_sq);
    let f = diag
        .iter()
        .zip(&int_grad_sq)
        .map(|(d, &i)| 0.5 * d.norm_wu * d.norm_wu + 0.5 * w * i)
        .collect();
    let gprime = diag.iter().map(|d| s * d.norm_grad_u).collect();
    let alpha = diag
        .iter()
        .zip(&t)
        .map(|(d, &ti)| {
            let r = &d.reference;
            constant * (ti * r.material_l3 * r.grad_u_l2 + r.grad_u_inf)
        })
        .collect();
    let beta = diag
        .iter()
        .map(|d| constant * (d.reference.material_l3 + 1.0))
        .collect();
    Ok(GronwallTrace::new(t, f, gprime, alpha, beta)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    /// `sup_t (||frakR|| + ||calQ|| + ||sqrt(R+Q) U||)`.
    pub sup_distance: f64,
    /// `sup_distance / delta`; NaN at `delta = 0`.
    pub ratio: f64,
    pub fitted_c: f64,
}

impl SweepRow {
    pub const CSV_HEADER: [&'static str; 4] = ["delta", "sup_distance", "ratio", "fitted_C"];

    pub fn csv_row(&self) -> [f64; 4] {
        [self.delta, self.sup_distance, self.ratio, self.fitted_c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Paired diagnostics of each run, in row order.
    pub runs: Vec<Vec<PairDiagnostics>>,
}

impl SweepReport {
    /// Largest over smallest finite ratio.
    pub fn ratio_spread(&self) -> f64 {
        let finite: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.ratio)
            .filter(|r| r.is_finite())
            .collect();
        if finite.is_empty() {
            return f64::NAN;
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(0.0_f64, f64::max);
        hi / lo
    }

    pub fn verdict(&self) -> bool {
        let spread = self.ratio_spread();
        spread.is_finite() && spread <= 2.0 && self.rows.iter().all(|r| r.fitted_c.is_finite())
    }
}

/// Twin runs for each amplitude, on at most `jobs` worker threads.
/// Rows come back in the order of `deltas`.
pub fn stability_sweep(
    base: &State,
    params: &SimParams,
    deltas: &[f64],
    target: PerturbationTarget,
    mode: u32,
    jobs: usize,
) -> Result<SweepReport, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results = pool.install(|| {
        deltas
            .par_iter()
            .map(|&delta| {
                let twin = twin_run(
                    base,
                    params,
                    &Perturbation {
                        target,
                        delta,
                        mode,
                    },
                )?;
                let sup_distance = twin
                    .diagnostics
                    .iter()
                    .fold(0.0_f64, |a, d| a.max(d.distance()));
                let row = SweepRow {
                    delta,
                    sup_distance,
                    ratio: if delta == 0.0 {
                        f64::NAN
                    } else {
                        sup_distance / delta.abs()
                    },
                    fitted_c: check_density_stability(&twin.diagnostics).fitted,
                };
                Ok((row, twin.diagnostics))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    let (rows, runs) = results.into_iter().unzip();
    Ok(SweepReport { rows, runs })
}
