//! Pointwise algebraic pressure closure.
//!
//! Given phase densities `R` and `Q`, the pressure variable `Z` is the unique
//! root of
//!
//! ```text
//! (1 - R/Z) Z^gamma = Q,    R <= Z,    gamma = gamma_plus / gamma_minus
//! ```
//!
//! Writing `F(Z) = Z^(gamma-1) (Z - R)`, `F` vanishes at `Z = R` and is
//! strictly increasing on `[R, inf)`, so the root is bracketed between `R`
//! and [`z_upper_bound`]. The solver runs Newton inside that bracket and
//! bisects whenever a Newton step would leave it.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::ScalarField;

/// Lower guard on the bracket so that `Z^(gamma-2)` never divides by zero.
pub const EPS_Z: f64 = 1e-300;

/// Grid size above which [`solve_z_field`] fans out over the rayon pool.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosureError {
    #[error("closure inputs must be finite and nonnegative, got R = {r}, Q = {q}")]
    Domain { r: f64, q: f64 },
    #[error("gamma_plus must exceed 1, got {0}")]
    GammaPlus(f64),
    #[error("gamma_minus must exceed 1, got {0}")]
    GammaMinus(f64),
    #[error("closure derivative undefined at vacuum (Z = 0)")]
    Vacuum,
    #[error(
        "closure did not converge in {iterations} iterations for R = {r}, Q = {q}; \
         last bracket [{lo}, {hi}]"
    )]
    NoConvergence {
        r: f64,
        q: f64,
        lo: f64,
        hi: f64,
        iterations: usize,
    },
    #[error("closure failed at grid index {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<ClosureError>,
    },
}

/// Adiabatic exponents of the two phases.
///
/// `gamma` is always recomputed from the other two, so it cannot drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureParams {
    gamma_plus: f64,
    gamma_minus: f64,
    gamma: f64,
}

impl ClosureParams {
    pub fn new(gamma_plus: f64, gamma_minus: f64) -> Result<Self, ClosureError> {
        if !(gamma_plus.is_finite() && gamma_plus > 1.0) {
            return Err(ClosureError::GammaPlus(gamma_plus));
        }
        if !(gamma_minus.is_finite() && gamma_minus > 1.0) {
            return Err(ClosureError::GammaMinus(gamma_minus));
        }
        Ok(Self {
            gamma_plus,
            gamma_minus,
            gamma: gamma_plus / gamma_minus,
        })
    }

    pub fn gamma_plus(&self) -> f64 {
        self.gamma_plus
    }

    pub fn gamma_minus(&self) -> f64 {
        self.gamma_minus
    }

    /// The closure exponent `gamma_plus / gamma_minus`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Parameters of the mirrored problem with the phases exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            gamma_plus: self.gamma_minus,
            gamma_minus: self.gamma_plus,
            gamma: self.gamma_minus / self.gamma_plus,
        }
    }
}

/// Stopping rule for the root finder: `|F(Z) - Q| <= abs + rel * max(1, Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-12,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn bound(&self, q: f64) -> f64 {
        self.abs + self.rel * q.max(1.0)
    }
}

/// A solved closure point. `alpha` is NaN at vacuum (`Z = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosurePoint {
    pub r: f64,
    pub q: f64,
    pub z: f64,
    pub alpha: f64,
    /// Number of root-finder iterations (0 for the closed-form branches).
    pub iterations: usize,
}

impl ClosurePoint {
    fn new(r: f64, q: f64, z: f64, iterations: usize) -> Self {
        let alpha = if z > 0.0 { r / z } else { f64::NAN };
        Self {
            r,
            q,
            z,
            alpha,
            iterations,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        self.z == 0.0
    }
}

/// `F(Z) - Q` evaluated as `Z^(gamma-1) (Z - R) - Q`.
#[inline]
pub fn residual(r: f64, q: f64, z: f64, gamma: f64) -> f64 {
    if z == 0.0 {
        return -q;
    }
    z.powf(gamma - 1.0) * (z - r) - q
}

/// `max{2 R_sup, (2 Q_sup)^(1/gamma)}`: an upper bound for `Z` over any field
/// whose densities are bounded by `R_sup` and `Q_sup`.
pub fn z_upper_bound(r_sup: f64, q_sup: f64, params: &ClosureParams) -> f64 {
    z_upper_bound_gamma(r_sup, q_sup, params.gamma)
}

fn z_upper_bound_gamma(r_sup: f64, q_sup: f64, gamma: f64) -> f64 {
    (2.0 * r_sup).max((2.0 * q_sup).powf(1.0 / gamma))
}

pub fn solve_z(
    r: f64,
    q: f64,
    params: &ClosureParams,
    tol: &Tolerance,
) -> Result<ClosurePoint, ClosureError> {
    solve_z_gamma(r, q, params.gamma, tol)
}

/// Solver for an arbitrary exponent `gamma > 0`, used directly by the swap
/// identity where `gamma` may exceed one.
pub fn solve_z_gamma(
    r: f64,
    q: f64,
    gamma: f64,
    tol: &Tolerance,
) -> Result<ClosurePoint, ClosureError> {
    if !(r.is_finite() && q.is_finite()) || r < 0.0 || q < 0.0 {
        return Err(ClosureError::Domain { r, q });
    }
    debug_assert!(gamma > 0.0);
    if q == 0.0 {
        return Ok(ClosurePoint::new(r, q, r, 0));
    }
    if r == 0.0 {
        return Ok(ClosurePoint::new(r, q, q.powf(1.0 / gamma), 0));
    }

    let target = tol.bound(q);
    let mut lo = r.max(EPS_Z);
    let mut hi = z_upper_bound_gamma(r, q, gamma);
    // F is concave on the bracket for gamma < 1 and convex for gamma > 1, so
    // starting from the matching end keeps the Newton iterates monotone.
    let mut z = if gamma < 1.0 { lo } else { hi };

    for iter in 1..=tol.max_iter {
        let res = residual(r, q, z, gamma);
        let slope = z.powf(gamma - 2.0) * (gamma * (z - r) + r);
        let newton = z - res / slope;
        if res.abs() <= target {
            // One polishing step; quadratic convergence puts it at rounding level.
            if res != 0.0 && newton.is_finite() && newton >= r
                && residual(r, q, newton, gamma).abs() < res.abs() {
                    return Ok(ClosurePoint::new(r, q, newton, iter));
                }
            return Ok(ClosurePoint::new(r, q, z, iter - 1));
        }
        if res < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next <= lo || next >= hi {
            // lo and hi are adjacent floats; no representable point is closer.
            let (rl, rh) = (residual(r, q, lo, gamma), residual(r, q, hi, gamma));
            let best = if rl.abs() <= rh.abs() { lo } else { hi };
            return Ok(ClosurePoint::new(r, q, best, iter));
        }
        z = next;
    }
    Err(ClosureError::NoConvergence {
        r,
        q,
        lo,
        hi,
        iterations: tol.max_iter,
    })
}

/// Pressure law `p(Z) = Z^gamma_plus`.
pub fn pressure(z: f64, params: &ClosureParams) -> f64 {
    z.powf(params.gamma_plus)
}

fn derivative_denominator(point: &ClosurePoint, gamma: f64) -> Result<f64, ClosureError> {
    if !(point.z > 0.0) {
        return Err(ClosureError::Vacuum);
    }
    let z = point.z;
    Ok(gamma * z.powf(gamma - 1.0) - (gamma - 1.0) * point.r * z.powf(gamma - 2.0))
}

/// `dZ/dR = Z^(gamma-1) / (gamma Z^(gamma-1) - (gamma-1) R Z^(gamma-2))`.
pub fn dz_dr(point: &ClosurePoint, params: &ClosureParams) -> Result<f64, ClosureError> {
    let gamma = params.gamma;
    let den = derivative_denominator(point, gamma)?;
    Ok(point.z.powf(gamma - 1.0) / den)
}

/// `dZ/dQ = 1 / (gamma Z^(gamma-1) - (gamma-1) R Z^(gamma-2))`.
pub fn dz_dq(point: &ClosurePoint, params: &ClosureParams) -> Result<f64, ClosureError> {
    let den = derivative_denominator(point, params.gamma)?;
    Ok(1.0 / den)
}

/// Mirror the closure problem: exchange the phases and their exponents.
///
/// The mirrored root satisfies `Z' = Z^gamma` with `gamma` the original
/// exponent (substitute `W = Z^gamma` into the closure).
pub fn phase_swap_transform(r: f64, q: f64, params: &ClosureParams) -> (f64, f64, ClosureParams) {
    (q, r, params.swapped())
}

/// Pointwise closure over a grid. `alpha` carries NaN at vacuum points.
pub fn solve_z_field(
    r: &ScalarField,
    q: &ScalarField,
    params: &ClosureParams,
    tol: &Tolerance,
) -> Result<(ScalarField, ScalarField), ClosureError> {
    assert_eq!(r.grid(), q.grid(), "closure fields live on different grids");
    let solve = |(index, (&rv, &qv)): (usize, (&f64, &f64))| {
        solve_z(rv, qv, params, tol)
            .map(|p| (p.z, p.alpha))
            .map_err(|e| ClosureError::AtPoint {
                index,
                source: Box::new(e),
            })
    };
    let pairs = r.values().iter().zip(q.values());
    // Both paths keep the output order and report the lowest failing index.
    let solved: Vec<(f64, f64)> = if r.len() >= PARALLEL_THRESHOLD {
        let items: Vec<_> = pairs.enumerate().collect();
        let results: Vec<_> = items.into_par_iter().map(solve).collect();
        results.into_iter().collect::<Result<_, _>>()?
    } else {
        pairs.enumerate().map(solve).collect::<Result<_, _>>()?
    };
    let (z, alpha): (Vec<f64>, Vec<f64>) = solved.into_iter().unzip();
    Ok((
        ScalarField::from_values(*r.grid(), z),
        ScalarField::from_values(*r.grid(), alpha),
    ))
}

/// Empirical Lipschitz constant of `(R, Q) -> p(Z(R, Q))` over sampled pairs
/// in `[0, M]^2`, measured in the `|dR| + |dQ|` metric.
pub fn pressure_lipschitz_estimate(
    pairs: &[((f64, f64), (f64, f64))],
    params: &ClosureParams,
    tol: &Tolerance,
) -> Result<f64, ClosureError> {
    let mut worst: f64 = 0.0;
    for &((r1, q1), (r2, q2)) in pairs {
        let dist = (r1 - r2).abs() + (q1 - q2).abs();
        if dist == 0.0 {
            continue;
        }
        let p1 = pressure(solve_z(r1, q1, params, tol)?.z, params);
        let p2 = pressure(solve_z(r2, q2, params, tol)?.z, params);
        worst = worst.max((p1 - p2).abs() / dist);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(gp: f64, gm: f64) -> ClosureParams {
        ClosureParams::new(gp, gm).unwrap()
    }

    /// Plain bisection on `F(Z) - Q`, independent of the Newton path.
    fn bisection_oracle(r: f64, q: f64, gamma: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid.powf(gamma) * (1.0 - r / mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn rejects_bad_exponents() {
        assert_eq!(
            ClosureParams::new(0.5, 2.0),
            Err(ClosureError::GammaPlus(0.5))
        );
        assert_eq!(
            ClosureParams::new(2.0, 1.0),
            Err(ClosureError::GammaMinus(1.0))
        );
        assert_eq!(params(1.5, 3.0).gamma(), 1.5 / 3.0);
    }

    #[test]
    fn unit_gamma_is_additive() {
        let p = solve_z(1.0, 2.0, &params(2.0, 2.0), &Tolerance::default()).unwrap();
        assert_relative_eq!(p.z, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_branches() {
        let tol = Tolerance::default();
        let p = solve_z(2.0, 0.0, &params(1.5, 3.0), &tol).unwrap();
        assert_eq!((p.z, p.alpha, p.iterations), (2.0, 1.0, 0));

        let p = solve_z(0.0, 4.0, &params(1.5, 3.0), &tol).unwrap();
        assert_relative_eq!(p.z, 16.0, max_relative = 1e-15);
        assert_eq!(p.alpha, 0.0);

        let p = solve_z(0.0, 0.0, &params(1.5, 3.0), &tol).unwrap();
        assert_eq!(p.z, 0.0);
        assert!(p.alpha.is_nan());
        assert!(p.is_vacuum());
    }

    #[test]
    fn golden_ratio_root() {
        let gamma_half = params(1.5, 3.0);
        let oracle = bisection_oracle(1.0, 1.0, 0.5, 1.0, 16.0);
        let closed = ((1.0 + 5f64.sqrt()) / 2.0).powi(2);
        assert!((oracle - closed).abs() < 1e-11);
        let p = solve_z(1.0, 1.0, &gamma_half, &Tolerance::default()).unwrap();
        assert_relative_eq!(p.z, 2.618_033_988_7, epsilon = 1e-10);
        assert_relative_eq!(p.z, closed, max_relative = 1e-12);
    }

    #[test]
    fn domain_errors() {
        let p = params(1.5, 3.0);
        let tol = Tolerance::default();
        assert!(matches!(
            solve_z(-1.0, 1.0, &p, &tol),
            Err(ClosureError::Domain { .. })
        ));
        assert!(matches!(
            solve_z(1.0, f64::NAN, &p, &tol),
            Err(ClosureError::Domain { .. })
        ));
        assert!(matches!(
            solve_z(f64::INFINITY, 1.0, &p, &tol),
            Err(ClosureError::Domain { .. })
        ));
    }

    #[test]
    fn iteration_budget_is_reported() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 0.0,
            max_iter: 1,
        };
        match solve_z(1.0, 1.0, &params(1.5, 3.0), &tol) {
            Err(ClosureError::NoConvergence { lo, hi, .. }) => assert!(lo < hi),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn upper_bound_examples() {
        let half = params(1.5, 3.0);
        let one = params(2.0, 2.0);
        assert_eq!(z_upper_bound(1.0, 0.0, &half), 2.0);
        assert_relative_eq!(z_upper_bound(0.0, 2.0, &half), 16.0, epsilon = 1e-14);
        assert_eq!(z_upper_bound(3.0, 3.0, &one), 6.0);
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(pressure(2.0, &params(2.0, 2.0)), 4.0);
        assert_eq!(pressure(0.0, &params(1.5, 3.0)), 0.0);
        // 3^(3/2) = 3 sqrt(3)
        assert_relative_eq!(
            pressure(3.0, &params(1.5, 3.0)),
            3.0 * 3f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            pressure(3.0, &params(1.5, 3.0)),
            5.196_152_422_7,
            epsilon = 1e-10
        );
    }

    #[test]
    fn derivative_examples() {
        let tol = Tolerance::default();
        let one = params(2.0, 2.0);
        let p = solve_z(0.7, 1.9, &one, &tol).unwrap();
        assert_relative_eq!(dz_dr(&p, &one).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(dz_dq(&p, &one).unwrap(), 1.0, epsilon = 1e-14);

        let half = params(1.5, 3.0);
        let p = solve_z(0.0, 4.0, &half, &tol).unwrap();
        assert_relative_eq!(dz_dr(&p, &half).unwrap(), 2.0, max_relative = 1e-14);

        let vac = solve_z(0.0, 0.0, &half, &tol).unwrap();
        assert_eq!(dz_dr(&vac, &half), Err(ClosureError::Vacuum));
        assert_eq!(dz_dq(&vac, &half), Err(ClosureError::Vacuum));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let tol = Tolerance::default();
        let half = params(1.5, 3.0);
        let h = 1e-6;
        let p = solve_z(1.0, 1.0, &half, &tol).unwrap();
        let zr = |r: f64| solve_z(r, 1.0, &half, &tol).unwrap().z;
        let zq = |q: f64| solve_z(1.0, q, &half, &tol).unwrap().z;
        let fd_r = (zr(1.0 + h) - zr(1.0 - h)) / (2.0 * h);
        let fd_q = (zq(1.0 + h) - zq(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(dz_dr(&p, &half).unwrap(), fd_r, max_relative = 1e-6);
        assert_relative_eq!(dz_dq(&p, &half).unwrap(), fd_q, max_relative = 1e-6);
    }

    #[test]
    fn swap_examples() {
        let tol = Tolerance::default();
        let sym = params(2.0, 2.0);
        let (r2, q2, sp) = phase_swap_transform(1.0, 2.0, &sym);
        assert_relative_eq!(solve_z(r2, q2, &sp, &tol).unwrap().z, 3.0, epsilon = 1e-14);

        let half = params(1.5, 3.0);
        let (r2, q2, sp) = phase_swap_transform(2.0, 0.0, &half);
        assert_eq!((r2, q2, sp.gamma()), (0.0, 2.0, 2.0));
        assert_relative_eq!(
            solve_z(r2, q2, &sp, &tol).unwrap().z,
            2f64.sqrt(),
            max_relative = 1e-15
        );

        let (r2, q2, sp) = phase_swap_transform(1.0, 1.0, &half);
        let oracle = bisection_oracle(r2, q2, sp.gamma(), 1.0, 4.0);
        let z = solve_z(r2, q2, &sp, &tol).unwrap().z;
        assert_relative_eq!(z, oracle, max_relative = 1e-11);
        assert_relative_eq!(z, 1.618_033_988_7, epsilon = 1e-10);
    }

    #[test]
    fn field_solve_examples() {
        let grid = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let tol = Tolerance::default();
        let r = ScalarField::constant(grid, 1.0);
        let q = ScalarField::constant(grid, 2.0);
        let (z, alpha) = solve_z_field(&r, &q, &params(2.0, 2.0), &tol).unwrap();
        assert!(z.values().iter().all(|&v| (v - 3.0).abs() < 1e-14));
        assert!(alpha
            .values()
            .iter()
            .all(|&a| (a - 1.0 / 3.0).abs() < 1e-14));

        let r = ScalarField::constant(grid, 0.0);
        let q = ScalarField::constant(grid, 4.0);
        let (z, _) = solve_z_field(&r, &q, &params(1.5, 3.0), &tol).unwrap();
        assert!(z.values().iter().all(|&v| (v - 16.0).abs() < 1e-13));

        let mut bad = ScalarField::constant(grid, 1.0);
        bad.values_mut()[5] = -1.0;
        match solve_z_field(&bad, &q, &params(1.5, 3.0), &tol) {
            Err(ClosureError::AtPoint { index, .. }) => assert_eq!(index, 5),
            other => panic!("expected pointwise failure, got {other:?}"),
        }
    }

    #[test]
    fn vacuum_alpha_is_sentinel_in_fields() {
        let grid = PeriodicGrid::new(1, 8, 1.0).unwrap();
        let zero = ScalarField::constant(grid, 0.0);
        let (z, alpha) =
            solve_z_field(&zero, &zero, &params(1.5, 3.0), &Tolerance::default()).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(alpha.values().iter().all(|a| a.is_nan()));
    }

    #[test]
    fn parallel_and_serial_paths_agree() {
        let grid = PeriodicGrid::new(2, 64, 1.0).unwrap();
        let r = ScalarField::from_fn(grid, |x| 1.0 + 0.5 * (x[0] * 6.0).sin());
        let q = ScalarField::from_fn(grid, |x| 1.0 + 0.5 * (x[1] * 6.0).cos());
        let half = params(1.5, 3.0);
        let tol = Tolerance::default();
        let (z, _) = solve_z_field(&r, &q, &half, &tol).unwrap();
        for (i, (&rv, &qv)) in r.values().iter().zip(q.values()).enumerate() {
            assert_eq!(z.values()[i], solve_z(rv, qv, &half, &tol).unwrap().z);
        }
    }

    #[test]
    fn pressure_lipschitz_constant_saturates() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = 4.0;
        let half = params(1.5, 3.0);
        let tol = Tolerance::default();
        let mut draw = |n: usize| -> Vec<_> {
            (0..n)
                .map(|_| {
                    let a = (rng.gen_range(0.0..m), rng.gen_range(0.0..m));
                    let b = (
                        (a.0 + rng.gen_range(-0.05..0.05f64)).clamp(0.0, m),
                        (a.1 + rng.gen_range(-0.05..0.05f64)).clamp(0.0, m),
                    );
                    (a, b)
                })
                .collect()
        };
        let small = draw(2_000);
        let mut large = small.clone();
        large.extend(draw(30_000));
        let c_small = pressure_lipschitz_estimate(&small, &half, &tol).unwrap();
        let c_large = pressure_lipschitz_estimate(&large, &half, &tol).unwrap();
        assert!(c_small.is_finite() && c_small > 0.0);
        assert!(c_large >= c_small);
        assert!(c_large <= 1.25 * c_small, "{c_small} -> {c_large}");
    }

    proptest! {
        #[test]
        fn residual_and_bounds(r in 0.0f64..10.0, q in 0.0f64..10.0,
                               gamma in prop::sample::select(vec![1.0/3.0, 0.5, 1.0, 2.0, 3.0])) {
            let tol = Tolerance::default();
            let p = solve_z_gamma(r, q, gamma, &tol).unwrap();
            prop_assert!(p.z >= r);
            prop_assert!(p.z <= z_upper_bound_gamma(r, q, gamma) * (1.0 + 1e-15));
            if p.z > 0.0 {
                let res = residual(r, q, p.z, gamma).abs();
                // the bracket may collapse to adjacent floats for steep F
                let slope = p.z.powf(gamma - 2.0) * (gamma * (p.z - r) + r);
                let granularity = slope * p.z * f64::EPSILON;
                prop_assert!(res <= tol.bound(q).max(granularity), "res {res}");
            }
        }

        #[test]
        fn monotone_in_both_densities(r in 0.0f64..10.0, q in 0.0f64..10.0, d in 1e-3f64..1.0) {
            let half = ClosureParams::new(1.5, 3.0).unwrap();
            let tol = Tolerance::default();
            let z = solve_z(r, q, &half, &tol).unwrap().z;
            prop_assert!(solve_z(r + d, q, &half, &tol).unwrap().z > z);
            prop_assert!(solve_z(r, q + d, &half, &tol).unwrap().z > z);
        }

        #[test]
        fn derivative_bounds_hold(r in 0.0f64..10.0, q in 1e-6f64..10.0,
                                  gm in prop::sample::select(vec![1.5f64, 2.0, 3.0, 4.5])) {
            let p = ClosureParams::new(1.5, gm).unwrap();
            let tol = Tolerance::default();
            let pt = solve_z(r, q, &p, &tol).unwrap();
            let g = p.gamma();
            let slack = 1.0 + 1e-12;
            prop_assert!(dz_dr(&pt, &p).unwrap().abs() <= slack / g);
            prop_assert!(dz_dq(&pt, &p).unwrap().abs() <= slack * pt.z.powf(1.0 - g) / g);
        }
    }
}
