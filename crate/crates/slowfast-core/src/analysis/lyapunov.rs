//! The energy-like monitors of the hysteresis system and their evaluation
//! along trajectories.
//!
//! In the strip chart, `Φ(u, y) = ½(tanh u − y)² + ε·ln cosh u` increases
//! along every orbit: its flow derivative is `(u̇/cosh u)² ≥ 0`. The planar
//! form is `w(x, y) = (x − y)² − ε·ln|1 − x²|` with `w = 2Φ` under
//! `x = tanh u`.
//!
//! Monitor *differences* between neighbouring samples are evaluated by a
//! compensated path (exact float cancellations plus exponential gap forms)
//! so that monotonicity and derivative checks remain meaningful even where
//! the true increment is ten orders below the monitor's own rounding.

use super::AnalysisError;
use crate::models::{ln_cosh, tanh_sat};
use crate::ode::{Chart, Trajectory};
use serde::Serialize;

/// Per-step monotonicity slack for the monitors: w may numerically decrease
/// by at most this much between consecutive accepted steps.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// `Φ(u, y) = ½(tanh u − y)² + ε·ln cosh u`, stable for any |u|.
pub fn phi(u: f64, y: f64, eps: f64) -> f64 {
    let d = tanh_sat(u) - y;
    0.5 * d * d + eps * ln_cosh(u)
}

/// `w(x, y) = (x − y)² − ε·ln|1 − x²|` evaluated from planar coordinates.
/// The factors 1 ± x are formed directly (exact near the lines x = ±1).
pub fn w(x: f64, y: f64, eps: f64) -> Result<f64, AnalysisError> {
    let gm = 1.0 - x;
    let gp = 1.0 + x;
    if gm == 0.0 || gp == 0.0 {
        return Err(AnalysisError::SingularLog { x });
    }
    let d = x - y;
    Ok(d * d - eps * (gm.abs().ln() + gp.abs().ln()))
}

/// `w` evaluated from the strip chart: `(tanh u − y)² + 2ε·ln cosh u`.
pub fn w_from_u(u: f64, y: f64, eps: f64) -> f64 {
    let d = tanh_sat(u) - y;
    d * d + 2.0 * eps * ln_cosh(u)
}

/// `sech²(u)` in exponential form (underflows to 0 only past |u| ≈ 372,
/// where the true value is below the smallest double anyway).
fn sech_sq(u: f64) -> f64 {
    (-2.0 * ln_cosh(u)).exp()
}

/// Flow derivative of Φ in the strip chart: `(u̇ / cosh u)²`.
pub fn phi_rate(u: f64, y: f64) -> f64 {
    let ud = tanh_sat(u) - y;
    ud * ud * sech_sq(u)
}

/// `tanh u1 − tanh u0` without cancellation. On a common side of 0 the
/// difference is expressed through the boundary gaps `2e^{−2|u|}/(1+e^{−2|u|})`
/// and an `expm1`, which stays exact where the plain subtraction would lose
/// every significant digit.
fn tanh_diff(u0: f64, u1: f64) -> f64 {
    if u0.signum() == u1.signum() && u0.abs().min(u1.abs()) >= 0.5 {
        let s = u1.signum();
        let (a0, a1) = (u0.abs(), u1.abs());
        // tanh|u| = 1 − g(|u|), g(a) = 2e^{−2a}/(1+e^{−2a});
        // g(a0) − g(a1) = 2·e^{−2a0}·(1 − e^{−2(a1−a0)}) / ((1+e^{−2a0})(1+e^{−2a1})).
        let e0 = (-2.0 * a0).exp();
        let num = 2.0 * e0 * (-(-2.0 * (a1 - a0)).exp_m1());
        let den = (1.0 + e0) * (1.0 + (-2.0 * a1).exp());
        s * (num / den)
    } else {
        tanh_sat(u1) - tanh_sat(u0)
    }
}

/// `ln cosh u1 − ln cosh u0` via the exact difference of |u| plus stable
/// small corrections.
fn ln_cosh_diff(u0: f64, u1: f64) -> f64 {
    (u1.abs() - u0.abs()) + (-2.0 * u1.abs()).exp().ln_1p()
        - (-2.0 * u0.abs()).exp().ln_1p()
}

/// Compensated `Φ(u1, y1) − Φ(u0, y0)`.
///
/// The two halves of Φ change by nearly opposite amounts along the flow in
/// the deep-strip regime; the difference of squares is factored so the
/// cancellation happens between exactly-representable terms.
pub fn phi_increment(u0: f64, y0: f64, u1: f64, y1: f64, eps: f64) -> f64 {
    let a = tanh_sat(u1) - y1;
    let b = tanh_sat(u0) - y0;
    let da = tanh_diff(u0, u1) - (y1 - y0);
    0.5 * (a + b) * da + eps * ln_cosh_diff(u0, u1)
}

/// One monitor sample along a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    /// Φ in the UY chart, w in the XY chart.
    pub value: f64,
    /// Analytic flow derivative of the same monitor at this state.
    pub analytic_rate: f64,
}

/// Monitor series with per-step increments and the monotonicity verdict.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSeries {
    pub chart: Chart,
    pub samples: Vec<LyapunovSample>,
    /// Compensated value differences between consecutive samples.
    pub increments: Vec<f64>,
    /// Most negative increment (0 if none are negative).
    pub worst_decrease: f64,
    /// True when every increment is at least `-MONOTONE_SLACK`.
    pub monotone: bool,
}

/// Evaluate the monitor along a trajectory: Φ with rate `(u̇/cosh u)²` in
/// the UY chart, w with rate `2(1−x²)(x−y)²` in the XY chart.
pub fn lyapunov_series(traj: &Trajectory, eps: f64) -> LyapunovSeries {
    let samples: Vec<LyapunovSample> = traj
        .samples
        .iter()
        .map(|s| {
            let (value, analytic_rate) = match traj.chart {
                Chart::UY => (phi(s.q[0], s.q[1], eps), phi_rate(s.q[0], s.q[1])),
                Chart::XY => {
                    let (x, y) = (s.q[0], s.q[1]);
                    let d = x - y;
                    let val = w(x, y, eps).unwrap_or(f64::NAN);
                    (val, 2.0 * (1.0 - x) * (1.0 + x) * d * d)
                }
            };
            LyapunovSample {
                t: s.t,
                value,
                analytic_rate,
            }
        })
        .collect();

    let increments: Vec<f64> = match traj.chart {
        Chart::UY => traj
            .samples
            .windows(2)
            .map(|p| phi_increment(p[0].q[0], p[0].q[1], p[1].q[0], p[1].q[1], eps))
            .collect(),
        Chart::XY => samples.windows(2).map(|p| p[1].value - p[0].value).collect(),
    };

    let worst_decrease = increments.iter().cloned().fold(0.0f64, f64::min);
    let monotone = worst_decrease >= -MONOTONE_SLACK;

    LyapunovSeries {
        chart: traj.chart,
        samples,
        increments,
        worst_decrease,
        monotone,
    }
}

/// Finite-difference vs analytic monitor rate at one interior sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CenteredRate {
    pub t: f64,
    pub fd_rate: f64,
    pub analytic_rate: f64,
}

/// Centered (three-point, nonuniform-grid) finite differences of the
/// monitor at interior samples, built from the compensated increments.
/// For a UY trajectory the rates are dΦ/dt.
pub fn centered_rates(traj: &Trajectory, eps: f64) -> Vec<CenteredRate> {
    let series = lyapunov_series(traj, eps);
    let n = traj.samples.len();
    if n < 3 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let h0 = traj.samples[k].t - traj.samples[k - 1].t;
        let h1 = traj.samples[k + 1].t - traj.samples[k].t;
        let d0 = series.increments[k - 1];
        let d1 = series.increments[k];
        // Quadratic fit through the three samples; exact for parabolic data.
        let fd = (d1 * h0 * h0 + d0 * h1 * h1) / (h0 * h1 * (h0 + h1));
        out.push(CenteredRate {
            t: traj.samples[k].t,
            fd_rate: fd,
            analytic_rate: match traj.chart {
                Chart::UY => phi_rate(traj.samples[k].q[0], traj.samples[k].q[1]),
                Chart::XY => series.samples[k].analytic_rate,
            },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_enhanced_delay;
    use crate::ode::{self, State, ToleranceConfig};
    use crate::testutil::splitmix;

    fn integrate_uy(
        eps: f64,
        q0: [f64; 2],
        t_end: f64,
        cfg: &ToleranceConfig,
    ) -> Trajectory {
        let m = make_enhanced_delay(eps, Chart::UY).unwrap();
        let f = m.field.clone();
        ode::integrate_with_aux(&*f, State::new(0.0, q0), t_end, cfg, &[], &[], Chart::UY)
            .unwrap()
    }

    #[test]
    fn phi_vanishes_at_origin() {
        for &eps in &[0.01, 0.1, 1.0] {
            assert_eq!(phi(0.0, 0.0, eps), 0.0);
        }
    }

    #[test]
    fn two_phi_equals_w_across_paths() {
        // Same quantity through the strip-chart and planar evaluation paths.
        let eps = 0.1;
        let (u, y) = (3.0, -2.0);
        let lhs = 2.0 * phi(u, y, eps);
        let rhs = w(u.tanh(), y, eps).unwrap();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn w_on_the_axis_is_y_squared() {
        for &a in &[0.3, 1.0, 17.5] {
            assert!((w(0.0, a, 0.05).unwrap() - a * a).abs() < 1e-14 * (a * a).max(1.0));
        }
    }

    #[test]
    fn w_singular_on_boundary() {
        assert!(matches!(
            w(1.0, 0.0, 0.1),
            Err(AnalysisError::SingularLog { .. })
        ));
        assert!(matches!(
            w(-1.0, 0.5, 0.1),
            Err(AnalysisError::SingularLog { .. })
        ));
    }

    #[test]
    fn phi_increment_matches_direct_difference_in_benign_range() {
        let eps = 0.05;
        let mut seed = 11u64;
        for _ in 0..300 {
            let u0 = 4.0 * splitmix(&mut seed) - 2.0;
            let y0 = 4.0 * splitmix(&mut seed) - 2.0;
            let u1 = u0 + 0.2 * (splitmix(&mut seed) - 0.5);
            let y1 = y0 + 0.2 * (splitmix(&mut seed) - 0.5);
            let direct = phi(u1, y1, eps) - phi(u0, y0, eps);
            let comp = phi_increment(u0, y0, u1, y1, eps);
            assert!(
                (direct - comp).abs() <= 1e-12 * direct.abs().max(1e-3),
                "direct {direct} vs compensated {comp}"
            );
        }
    }

    #[test]
    fn tanh_diff_deep_strip_precision() {
        // At u ≈ 12 the plain subtraction returns garbage at the 1e-16
        // level; the gap form keeps full relative precision. Reference:
        // tanh a − tanh b = sinh(a − b) / (cosh a · cosh b), exactly.
        let (u0, u1) = (12.0f64, 12.008f64);
        let got = tanh_diff(u0, u1);
        let expect = (u1 - u0).sinh() / (u0.cosh() * u1.cosh());
        assert!(
            (got - expect).abs() <= 1e-12 * expect.abs(),
            "{got:e} vs {expect:e}"
        );
        assert!(got > 0.0);
    }

    #[test]
    fn stationary_series_is_flat() {
        let traj = integrate_uy(0.05, [0.0, 0.0], 5.0, &ToleranceConfig::default());
        let series = lyapunov_series(&traj, 0.05);
        for s in &series.samples {
            assert_eq!(s.value, 0.0);
            assert_eq!(s.analytic_rate, 0.0);
        }
        assert!(series.monotone);
        assert_eq!(series.worst_decrease, 0.0);
    }

    #[test]
    fn monitor_increases_along_strip_orbit() {
        let eps = 0.05;
        let cfg = ToleranceConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 0.01,
            ..ToleranceConfig::default()
        };
        let traj = integrate_uy(eps, [0.3, 0.0], 30.0, &cfg);
        let series = lyapunov_series(&traj, eps);
        assert!(
            series.monotone,
            "worst decrease {:e}",
            series.worst_decrease
        );
        // Strictly increasing overall.
        let first = series.samples.first().unwrap().value;
        let last = series.samples.last().unwrap().value;
        assert!(last > first);
    }

    #[test]
    fn centered_rates_match_analytic_rate() {
        let eps = 0.05;
        let cfg = ToleranceConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 0.004,
            ..ToleranceConfig::default()
        };
        let traj = integrate_uy(eps, [0.3, 0.0], 25.0, &cfg);
        let rates = centered_rates(&traj, eps);
        assert!(rates.len() > 100);
        for r in rates {
            if r.analytic_rate.abs() > 1e-10 {
                let rel = (r.fd_rate - r.analytic_rate).abs() / r.analytic_rate.abs();
                assert!(
                    rel <= 1e-4,
                    "t = {}: fd {} vs analytic {} (rel {rel:e})",
                    r.t,
                    r.fd_rate,
                    r.analytic_rate
                );
            }
        }
    }
}
