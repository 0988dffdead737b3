//! Extraction of the axis/diagonal crossing sequences of the hysteresis
//! system and the identities and inequalities they satisfy.
//!
//! Along a strip orbit, `t_n` are the crossings of `x = 0` (u = 0 in the
//! strip chart), with `y(t_n) = (−1)ⁿ a_n`, `a_n > 0` alternating sides, and
//! `θ_n ∈ (t_n, t_{n+1})` are the crossings of the diagonal `y = x` with
//! `ξ_n = x(θ_n)`. The monitor `w` evaluates to `a_n²` at `t_n` and to
//! `−ε·ln(1 − ξ_n²)` at `θ_n`; the step `a_{n+1}² − a_n²` equals
//! `2ε·∫ x² dt` over the interval and is bounded by `2ε(t_{n+1} − t_n)`,
//! while `a_n + a_{n+1} ≤ ε(t_{n+1} − t_n)`.

use super::{w_from_u, AnalysisError};
use crate::models::{ln_cosh, tanh_sat, EV_DIAGONAL, EV_U_ZERO};
use crate::ode::{Chart, Trajectory};
use serde::Serialize;

/// Identity residuals and inequality results for one consecutive pair
/// (t_n, t_{n+1}).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairCheck {
    /// Relative residual of a_{n+1}² − a_n² = 2ε·∫x²dt (needs the
    /// quadrature aux variable; NaN when the run carried none).
    pub telescoping_rel: f64,
    /// a_{n+1}² − a_n² ≤ 2ε(t_{n+1} − t_n).
    pub energy_inequality: bool,
    /// a_n + a_{n+1} ≤ ε(t_{n+1} − t_n).
    pub time_inequality: bool,
    /// Slack of the two inequalities (positive = satisfied with margin).
    pub energy_margin: f64,
    pub time_margin: f64,
}

/// The crossing sequences of one strip trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub eps: f64,
    pub t_n: Vec<f64>,
    /// a_n = |y(t_n)| > 0.
    pub a_n: Vec<f64>,
    /// Sign of y at the first crossing (the sequence alternates from here).
    pub first_sign: f64,
    pub theta_n: Vec<f64>,
    /// ξ_n = x(θ_n) (rounds to ±1 for deep crossings; u_theta keeps the
    /// resolved position).
    pub xi_n: Vec<f64>,
    pub u_theta: Vec<f64>,
    /// Relative residual of a_n² = w(t_n) per crossing.
    pub w_axis_rel: Vec<f64>,
    /// Relative residual of w(θ_n) = −ε·ln(1 − ξ_n²) per inner crossing.
    pub w_diag_rel: Vec<f64>,
    pub pairs: Vec<PairCheck>,
}

impl CrossingReport {
    pub fn len(&self) -> usize {
        self.t_n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_n.is_empty()
    }

    /// t_n < θ_n < t_{n+1} for every inner index.
    pub fn interleaved(&self) -> bool {
        self.theta_n
            .iter()
            .enumerate()
            .all(|(n, &th)| self.t_n[n] < th && th < self.t_n[n + 1])
    }
}

fn rel_to(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-300)
}

/// Extract crossing sequences from a UY-chart trajectory of the hysteresis
/// system integrated with the standard `u = 0` and diagonal events (and,
/// for the telescoping identity, the `∫x²dt` quadrature as aux variable 0).
pub fn crossing_sequences(
    traj: &Trajectory,
    eps: f64,
) -> Result<CrossingReport, AnalysisError> {
    if traj.chart != Chart::UY {
        return Err(AnalysisError::MalformedTrajectory(
            "crossing extraction requires a UY-chart trajectory".into(),
        ));
    }

    let axis: Vec<_> = traj.events_named(EV_U_ZERO).collect();
    let diag: Vec<_> = traj.events_named(EV_DIAGONAL).collect();

    let mut t_n = Vec::with_capacity(axis.len());
    let mut a_n = Vec::with_capacity(axis.len());
    let mut w_axis_rel = Vec::with_capacity(axis.len());
    let mut signs = Vec::with_capacity(axis.len());
    let mut axis_aux = Vec::with_capacity(axis.len());

    for ev in &axis {
        let y = ev.state.q[1];
        if y == 0.0 {
            return Err(AnalysisError::MalformedTrajectory(format!(
                "axis crossing at t = {} has y = 0",
                ev.t_event
            )));
        }
        t_n.push(ev.t_event);
        a_n.push(y.abs());
        signs.push(y.signum());
        let w_here = w_from_u(ev.state.q[0], y, eps);
        w_axis_rel.push(rel_to(w_here, y * y));
        axis_aux.push(if traj.naux > 0 { ev.aux[0] } else { f64::NAN });
    }

    for (n, pair) in signs.windows(2).enumerate() {
        if pair[0] == pair[1] {
            return Err(AnalysisError::MalformedTrajectory(format!(
                "y does not alternate in sign between crossings {n} and {}",
                n + 1
            )));
        }
    }

    // One diagonal crossing strictly inside each (t_n, t_{n+1}).
    let mut theta_n = Vec::new();
    let mut xi_n = Vec::new();
    let mut u_theta = Vec::new();
    let mut w_diag_rel = Vec::new();
    for n in 0..t_n.len().saturating_sub(1) {
        let inside: Vec<_> = diag
            .iter()
            .filter(|e| e.t_event > t_n[n] && e.t_event < t_n[n + 1])
            .collect();
        if inside.len() != 1 {
            return Err(AnalysisError::MalformedTrajectory(format!(
                "expected one diagonal crossing in (t_{n}, t_{}), found {}",
                n + 1,
                inside.len()
            )));
        }
        let ev = inside[0];
        let u = ev.state.q[0];
        theta_n.push(ev.t_event);
        u_theta.push(u);
        xi_n.push(tanh_sat(u));
        // −ε·ln(1 − ξ²) = 2ε·ln cosh u, evaluated in the strip form so the
        // identity stays decidable when ξ rounds to ±1.
        let w_here = w_from_u(u, ev.state.q[1], eps);
        w_diag_rel.push(rel_to(w_here, 2.0 * eps * ln_cosh(u)));
    }

    let mut pairs = Vec::new();
    for n in 0..t_n.len().saturating_sub(1) {
        let dt = t_n[n + 1] - t_n[n];
        let da2 = a_n[n + 1] * a_n[n + 1] - a_n[n] * a_n[n];
        let telescoping_rel = if traj.naux > 0 {
            let integral = axis_aux[n + 1] - axis_aux[n];
            rel_to(da2, 2.0 * eps * integral)
        } else {
            f64::NAN
        };
        let energy_margin = 2.0 * eps * dt - da2;
        let time_margin = eps * dt - (a_n[n] + a_n[n + 1]);
        pairs.push(PairCheck {
            telescoping_rel,
            energy_inequality: energy_margin >= 0.0,
            time_inequality: time_margin >= 0.0,
            energy_margin,
            time_margin,
        });
    }

    Ok(CrossingReport {
        eps,
        first_sign: signs.first().copied().unwrap_or(0.0),
        t_n,
        a_n,
        theta_n,
        xi_n,
        u_theta,
        w_axis_rel,
        w_diag_rel,
        pairs,
    })
}

/// Increment trend of the crossing amplitudes.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub increments: Vec<f64>,
    /// a_{n+1} > a_n for every n.
    pub monotone: bool,
    /// Mean of the last three increments.
    pub limit_estimate: f64,
    /// True when the last three increments are each within 5% of 2 (the
    /// asymptotic step once x² ≈ 1 away from the transitions).
    pub approaches_two: bool,
}

/// Fit the amplitude growth of a crossing report (at least 5 crossings).
pub fn a_n_growth(report: &CrossingReport) -> Result<GrowthFit, AnalysisError> {
    if report.len() < 5 {
        return Err(AnalysisError::InsufficientData {
            needed: 5,
            got: report.len(),
        });
    }
    let increments: Vec<f64> = report.a_n.windows(2).map(|p| p[1] - p[0]).collect();
    let monotone = increments.iter().all(|&d| d > 0.0);
    let tail = &increments[increments.len() - 3..];
    let limit_estimate = tail.iter().sum::<f64>() / 3.0;
    let approaches_two = tail.iter().all(|&d| (d - 2.0).abs() <= 0.1);
    Ok(GrowthFit {
        increments,
        monotone,
        limit_estimate,
        approaches_two,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{aux_x_squared_uy, make_enhanced_delay};
    use crate::ode::{self, State, ToleranceConfig};

    fn crossing_run(eps: f64, u0: f64, y0: f64, t_end: f64) -> Trajectory {
        let m = make_enhanced_delay(eps, Chart::UY).unwrap();
        let f = m.field.clone();
        let cfg = ToleranceConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..ToleranceConfig::default()
        };
        ode::integrate_with_aux(
            &*f,
            State::new(0.0, [u0, y0]),
            t_end,
            &cfg,
            &m.standard_events,
            &[aux_x_squared_uy()],
            Chart::UY,
        )
        .unwrap()
    }

    #[test]
    fn no_crossings_gives_empty_report() {
        // Stationary at the origin: no events fire.
        let traj = crossing_run(0.05, 0.0, 0.0, 5.0);
        let rep = crossing_sequences(&traj, 0.05).unwrap();
        assert!(rep.is_empty());
        assert!(rep.pairs.is_empty());
    }

    #[test]
    fn signs_alternate_and_identities_hold() {
        let eps = 0.02;
        let traj = crossing_run(eps, 0.2, 0.5, 2300.0);
        let rep = crossing_sequences(&traj, eps).unwrap();
        assert!(rep.len() >= 4, "want several crossings, got {}", rep.len());
        assert!(rep.interleaved());
        for r in &rep.w_axis_rel {
            assert!(*r <= 1e-6, "axis identity residual {r:e}");
        }
        for r in &rep.w_diag_rel {
            assert!(*r <= 1e-6, "diagonal identity residual {r:e}");
        }
        for p in &rep.pairs {
            assert!(p.telescoping_rel <= 1e-6, "telescoping {:e}", p.telescoping_rel);
            assert!(p.energy_inequality && p.energy_margin > 0.0);
            assert!(p.time_inequality && p.time_margin > 0.0);
        }
    }

    #[test]
    fn early_identities_at_tight_tolerance() {
        // Early crossings of a short run carry event times at t = O(10),
        // where the residuals sit well below the coarse 1e-6 contract.
        let eps = 0.05;
        let traj = crossing_run(eps, 0.3, 0.4, 120.0);
        let rep = crossing_sequences(&traj, eps).unwrap();
        assert!(rep.len() >= 2);
        for r in rep.w_axis_rel.iter().take(3) {
            assert!(*r <= 1e-9, "axis identity residual {r:e}");
        }
        for r in rep.w_diag_rel.iter().take(3) {
            assert!(*r <= 1e-9, "diagonal identity residual {r:e}");
        }
    }

    #[test]
    fn mirrored_run_reproduces_times_and_amplitudes() {
        let eps = 0.02;
        let a = crossing_sequences(&crossing_run(eps, 0.2, 0.5, 1500.0), eps).unwrap();
        let b = crossing_sequences(&crossing_run(eps, -0.2, -0.5, 1500.0), eps).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.len() >= 3);
        for (ta, tb) in a.t_n.iter().zip(&b.t_n) {
            assert!((ta - tb).abs() <= 1e-9, "t mismatch {ta} vs {tb}");
        }
        for (aa, ab) in a.a_n.iter().zip(&b.a_n) {
            assert!((aa - ab).abs() <= 1e-9);
        }
        assert_eq!(a.first_sign, -b.first_sign);
    }

    #[test]
    fn growth_fit_requires_five_crossings() {
        let eps = 0.05;
        let traj = crossing_run(eps, 0.3, 0.4, 40.0);
        let rep = crossing_sequences(&traj, eps).unwrap();
        if rep.len() < 5 {
            assert!(matches!(
                a_n_growth(&rep),
                Err(AnalysisError::InsufficientData { .. })
            ));
        }
    }

    #[test]
    fn constant_amplitude_fails_monotonicity() {
        let rep = CrossingReport {
            eps: 0.05,
            t_n: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            a_n: vec![1.0; 5],
            first_sign: 1.0,
            theta_n: vec![0.5, 1.5, 2.5, 3.5],
            xi_n: vec![0.5; 4],
            u_theta: vec![0.55; 4],
            w_axis_rel: vec![0.0; 5],
            w_diag_rel: vec![0.0; 4],
            pairs: Vec::new(),
        };
        let fit = a_n_growth(&rep).unwrap();
        assert!(!fit.monotone);
        assert!(!fit.approaches_two);
    }
}
