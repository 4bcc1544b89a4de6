//! Sampled checks of the classical and generalized Gronwall inequalities.
//!
//! The generalized form concerns nonnegative `f, g', alpha, beta` with
//! `g(0) = 0` and
//!
//! ```text
//! f' + (g')^2 <= alpha f + beta g g'
//! ```
//!
//! whose conclusion is
//!
//! ```text
//! e^{-A(t)} f(t) + (e^{-A(t)} - 1/2 - 1/2 int_0^t s beta(s)^2 ds) int_0^t (g')^2 <= f(0)
//! ```
//!
//! with `A(t) = int_0^t alpha`. The checkers only ever assert the numerical
//! inequality for the given samples, not its general validity.

use thiserror::Error;

/// Default relative slack folded into every verdict.
pub const DEFAULT_SLACK: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GronwallError {
    #[error("trace columns have different lengths")]
    Length,
    #[error("trace is empty")]
    Empty,
    #[error("trace must start at t = 0, got {0}")]
    Start(f64),
    #[error("sample times must be strictly increasing (index {0})")]
    Times(usize),
    #[error("column {column} has a negative or non-finite value at index {index}")]
    Value { column: &'static str, index: usize },
}

/// Time samples of `f`, `g'`, `alpha` and `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallTrace {
    t: Vec<f64>,
    f: Vec<f64>,
    gprime: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl GronwallTrace {
    pub const CSV_HEADER: [&'static str; 5] = ["t", "f", "gprime", "alpha", "beta"];

    pub fn new(
        t: Vec<f64>,
        f: Vec<f64>,
        gprime: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self, GronwallError> {
        let n = t.len();
        if [f.len(), gprime.len(), alpha.len(), beta.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(GronwallError::Length);
        }
        if n == 0 {
            return Err(GronwallError::Empty);
        }
        if t[0] != 0.0 {
            return Err(GronwallError::Start(t[0]));
        }
        for k in 1..n {
            if !(t[k] > t[k - 1]) || !t[k].is_finite() {
                return Err(GronwallError::Times(k));
            }
        }
        for (column, values) in [
            ("f", &f),
            ("gprime", &gprime),
            ("alpha", &alpha),
            ("beta", &beta),
        ] {
            if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(GronwallError::Value { column, index });
            }
        }
        Ok(Self {
            t,
            f,
            gprime,
            alpha,
            beta,
        })
    }

    /// Sample `f, g', alpha, beta` from closures on a uniform grid of `[0, t_end]`.
    pub fn sample(
        t_end: f64,
        steps: usize,
        f: impl Fn(f64) -> f64,
        gprime: impl Fn(f64) -> f64,
        alpha: impl Fn(f64) -> f64,
        beta: impl Fn(f64) -> f64,
    ) -> Result<Self, GronwallError> {
        let t: Vec<f64> = (0..=steps)
            .map(|k| t_end * k as f64 / steps as f64)
            .collect();
        Self::new(
            t.clone(),
            t.iter().map(|&s| f(s)).collect(),
            t.iter().map(|&s| gprime(s)).collect(),
            t.iter().map(|&s| alpha(s)).collect(),
            t.iter().map(|&s| beta(s)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn gprime(&self) -> &[f64] {
        &self.gprime
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `g(t) = int_0^t g'` by the trapezoid rule.
    pub fn g(&self) -> Vec<f64> {
        cumulative_trapezoid(&self.t, &self.gprime)
    }
}

/// Running trapezoidal integral, starting from zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(t.len(), y.len());
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(t.len());
    for k in 0..t.len() {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Richardson-style error estimate of a cumulative trapezoid integral: the
/// largest `|I_h - I_2h| / 3` over the even-indexed samples.
fn trapezoid_error(t: &[f64], y: &[f64], fine: &[f64]) -> f64 {
    if t.len() < 3 {
        return 0.0;
    }
    let ct: Vec<f64> = t.iter().step_by(2).copied().collect();
    let cy: Vec<f64> = y.iter().step_by(2).copied().collect();
    let coarse = cumulative_trapezoid(&ct, &cy);
    coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .fold(0.0, |m: f64, (c, f)| m.max((c - f).abs() / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalCheck {
    pub t0: f64,
    pub t1: f64,
    /// `(f1 - f0)/dt + mean((g')^2)`
    pub lhs: f64,
    /// `mean(alpha f + beta g g')`
    pub rhs: f64,
    pub flagged: bool,
}

impl IntervalCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub intervals: Vec<IntervalCheck>,
}

impl HypothesisReport {
    pub fn violations(&self) -> Vec<usize> {
        self.intervals
            .iter()
            .enumerate()
            .filter(|(_, c)| c.flagged)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn holds(&self) -> bool {
        self.intervals.iter().all(|c| !c.flagged)
    }

    /// Smallest `rhs - lhs` over all intervals (infinite for a single sample).
    pub fn min_margin(&self) -> f64 {
        self.intervals
            .iter()
            .fold(f64::INFINITY, |m, c| m.min(c.margin()))
    }
}

/// Interval-wise check of `f' + (g')^2 <= alpha f + beta g g'`.
///
/// `f'` is the forward difference over each interval; the other terms are
/// averaged over the interval endpoints, with `g` from the cumulative
/// trapezoid. An interval is flagged when `lhs > rhs + slack * scale`, where
/// `scale` is the larger magnitude of the two sides (at least one).
pub fn check_hypothesis(trace: &GronwallTrace, slack: f64) -> HypothesisReport {
    let g = trace.g();
    let t = &trace.t;
    let point_rhs = |k: usize| trace.alpha[k] * trace.f[k] + trace.beta[k] * g[k] * trace.gprime[k];
    let intervals = (1..trace.len())
        .map(|k| {
            let dt = t[k] - t[k - 1];
            let lhs = (trace.f[k] - trace.f[k - 1]) / dt
                + 0.5 * (trace.gprime[k].powi(2) + trace.gprime[k - 1].powi(2));
            let rhs = 0.5 * (point_rhs(k) + point_rhs(k - 1));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            IntervalCheck {
                t0: t[k - 1],
                t1: t[k],
                lhs,
                rhs,
                flagged: lhs > rhs + slack * scale,
            }
        })
        .collect();
    HypothesisReport { intervals }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConclusionReport {
    /// Left side minus `f(0)` at every sample.
    pub margins: Vec<f64>,
    /// Allowed positive margin: relative slack plus the quadrature error estimate.
    pub tolerance: f64,
    pub quadrature_error: f64,
    pub hypothesis: HypothesisReport,
}

impl ConclusionReport {
    pub fn max_margin(&self) -> f64 {
        self.margins
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn verdict(&self) -> bool {
        self.max_margin() <= self.tolerance
    }
}

/// Evaluate the conclusion of the generalized inequality at every sample.
pub fn check_conclusion(trace: &GronwallTrace, slack: f64) -> ConclusionReport {
    let t = &trace.t;
    let a = cumulative_trapezoid(t, &trace.alpha);
    let tb2: Vec<f64> = t.iter().zip(&trace.beta).map(|(s, b)| s * b * b).collect();
    let b = cumulative_trapezoid(t, &tb2);
    let g2: Vec<f64> = trace.gprime.iter().map(|v| v * v).collect();
    let gi = cumulative_trapezoid(t, &g2);
    let f0 = trace.f[0];

    let err_a = trapezoid_error(t, &trace.alpha, &a);
    let err_b = trapezoid_error(t, &tb2, &b);
    let err_g = trapezoid_error(t, &g2, &gi);

    let mut scale = f0;
    let mut quad: f64 = 0.0;
    let margins = (0..trace.len())
        .map(|k| {
            let decay = (-a[k]).exp();
            let coef = decay - 0.5 - 0.5 * b[k];
            let lhs = decay * trace.f[k] + coef * gi[k];
            scale = scale
                .max((decay * trace.f[k]).abs())
                .max((coef * gi[k]).abs());
            quad = quad.max(
                decay * (trace.f[k] + gi[k]) * err_a + 0.5 * gi[k] * err_b + coef.abs() * err_g,
            );
            lhs - f0
        })
        .collect();
    ConclusionReport {
        margins,
        tolerance: slack * scale + quad,
        quadrature_error: quad,
        hypothesis: check_hypothesis(trace, slack),
    }
}

/// Integrating-factor bound for `y' <= a y + b`, `y(0) = 0`:
/// `y(t) <= int_0^t exp(int_s^t a) b(s) ds`, by the trapezoid rule.
pub fn classical_gronwall_bound(t: &[f64], rate: &[f64], forcing: &[f64]) -> Vec<f64> {
    let a = cumulative_trapezoid(t, rate);
    let weighted: Vec<f64> = a
        .iter()
        .zip(forcing)
        .map(|(ak, bk)| (-ak).exp() * bk)
        .collect();
    cumulative_trapezoid(t, &weighted)
        .iter()
        .zip(&a)
        .map(|(i, ak)| ak.exp() * i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn constant_trace() -> GronwallTrace {
        GronwallTrace::sample(1.0, 100, |_| 2.0, |_| 0.0, |_| 0.0, |_| 0.0).unwrap()
    }

    #[test]
    fn trace_validation() {
        let ok = || vec![0.0, 1.0];
        assert_eq!(
            GronwallTrace::new(ok(), ok(), ok(), ok(), vec![0.0]),
            Err(GronwallError::Length)
        );
        assert_eq!(
            GronwallTrace::new(vec![], vec![], vec![], vec![], vec![]),
            Err(GronwallError::Empty)
        );
        assert_eq!(
            GronwallTrace::new(vec![0.5, 1.0], ok(), ok(), ok(), ok()),
            Err(GronwallError::Start(0.5))
        );
        assert_eq!(
            GronwallTrace::new(vec![0.0, 0.0], ok(), ok(), ok(), ok()),
            Err(GronwallError::Times(1))
        );
        assert_eq!(
            GronwallTrace::new(ok(), vec![0.0, -1.0], ok(), ok(), ok()),
            Err(GronwallError::Value {
                column: "f",
                index: 1
            })
        );
        assert!(GronwallTrace::new(ok(), ok(), ok(), ok(), vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn constant_f_holds_with_zero_margin() {
        let tr = constant_trace();
        let hyp = check_hypothesis(&tr, DEFAULT_SLACK);
        assert!(hyp.holds());
        assert_eq!(hyp.min_margin(), 0.0);
        let con = check_conclusion(&tr, DEFAULT_SLACK);
        assert!(con.margins.iter().all(|&m| m == 0.0));
        assert!(con.verdict());
    }

    #[test]
    fn exponential_f_saturates_the_bound() {
        let tr =
            GronwallTrace::sample(1.0, 1000, |t| 3.0 * t.exp(), |_| 0.0, |_| 1.0, |_| 0.0).unwrap();
        let hyp = check_hypothesis(&tr, DEFAULT_SLACK);
        assert!(hyp.holds());
        // equality up to the O(dt^2) gap between forward difference and endpoint mean
        assert!(hyp.min_margin() >= 0.0);
        assert!(hyp.intervals.iter().all(|c| c.margin() < 1e-5 * c.rhs));
        let con = check_conclusion(&tr, DEFAULT_SLACK);
        assert!(con.max_margin().abs() < 1e-13, "{}", con.max_margin());
        assert!(con.verdict());
    }

    #[test]
    fn increasing_f_without_rate_is_flagged() {
        let tr = GronwallTrace::sample(1.0, 50, |t| 1.0 + t, |_| 0.0, |_| 0.0, |_| 0.0).unwrap();
        let hyp = check_hypothesis(&tr, DEFAULT_SLACK);
        assert_eq!(hyp.violations().len(), 50);
        let con = check_conclusion(&tr, DEFAULT_SLACK);
        assert!(!con.verdict());
        assert!(!con.hypothesis.holds());
    }

    #[test]
    fn classical_bound_examples() {
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let zeros = vec![0.0; t.len()];
        let ones = vec![1.0; t.len()];

        let linear = classical_gronwall_bound(&t, &zeros, &ones);
        for (b, s) in linear.iter().zip(&t) {
            assert_relative_eq!(*b, *s, epsilon = 1e-13);
        }
        assert!(classical_gronwall_bound(&t, &ones, &zeros)
            .iter()
            .all(|&b| b == 0.0));

        let growth = classical_gronwall_bound(&t, &ones, &ones);
        for (b, s) in growth.iter().zip(&t).skip(1) {
            assert_relative_eq!(*b, s.exp() - 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        let err = |steps: usize| {
            let t: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
            let y: Vec<f64> = t.iter().map(|s| (3.0 * s).cos()).collect();
            (cumulative_trapezoid(&t, &y)[steps] - 3f64.sin() / 3.0).abs()
        };
        let order = (err(100) / err(200)).log2();
        assert!((order - 2.0).abs() < 0.05, "{order}");
    }

    #[test]
    fn violating_conclusion_is_rejected() {
        // g' large with tiny alpha, beta: the hypothesis fails badly and so does the conclusion
        let tr =
            GronwallTrace::sample(1.0, 100, |t| 1.0 + 5.0 * t, |_| 1.0, |_| 0.0, |_| 0.0).unwrap();
        let con = check_conclusion(&tr, DEFAULT_SLACK);
        assert!(con.max_margin() > 1.0);
        assert!(!con.verdict());
    }

    proptest! {
        #[test]
        fn margin_f_terms_scale_linearly(s in 0.1f64..10.0, f0 in 0.1f64..5.0) {
            let build = |scale: f64| {
                GronwallTrace::sample(1.0, 200, |t| scale * f0 * (0.5 * t).exp(), |_| 0.0,
                                      |t| 0.3 + t, |_| 0.0).unwrap()
            };
            let base = check_conclusion(&build(1.0), DEFAULT_SLACK);
            let scaled = check_conclusion(&build(s), DEFAULT_SLACK);
            for (a, b) in base.margins.iter().zip(&scaled.margins) {
                prop_assert!((b - s * a).abs() <= 1e-12 * s * f0 * 3.0);
            }
        }
    }
}
