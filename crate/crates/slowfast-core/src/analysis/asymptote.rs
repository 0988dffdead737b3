//! Behaviour of the hysteresis system outside the strip: orbits started on
//! the diagonal with |x| > 1 stay on their side of y = x and close back
//! onto it.
//!
//! Outside the strip the transverse contraction rate is x² − 1, which grows
//! without bound along the orbit; the number of explicit steps needed to
//! reach a fixed physical horizon is of order ∫(x²−1)dt ≈ x²/2ε — out of
//! reach once x is large, in any parameterization. The orbit is therefore
//! followed in two phases:
//!
//! 1. While the gap g = y − x builds up and peaks, integrate the rescaled
//!    form (dτ = (x²−1)·dt, unit transverse rate)
//!    `dx/dτ = g, dg/dτ = εx/(x²−1) − g` with physical time recovered as a
//!    quadrature. This phase runs to x = X_SWITCH, by which point the
//!    accumulated contraction exp(−τ) is far below the smallest double, so
//!    the orbit coincides with the attracting slow manifold to every
//!    representable digit (checked, not assumed).
//! 2. From there, follow the reduced flow on the manifold itself:
//!    `ẋ = (x²−1)·G(x)` with the manifold gap expansion
//!    `G(x) = εx/(x²−1)·(1 + ε(x²+1)/(x²−1)²)`, a nonstiff scalar ODE in
//!    physical time.
//!
//! By the odd symmetry of the field, an orbit from (−a, −a) is the exact
//! mirror of the one from (a, a); the gap is always measured toward the
//! orbit's own side of the diagonal, so mirrored inputs give identical
//! gap data.

use super::AnalysisError;
use crate::ode::{self, Chart, EventSpec, State, ToleranceConfig};
use serde::Serialize;
use std::sync::Arc;

/// Diagonal-gap report for one outside-strip orbit.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoteReport {
    pub x0: f64,
    pub y0: f64,
    pub eps: f64,
    /// α0 = (|x0| − 1/|x0|)/ε, the transverse rate scale at the start.
    pub alpha0: f64,
    /// Largest gap toward the orbit's side of the diagonal.
    pub sup_gap: f64,
    /// 1/(2α0), the comparison scale for sup_gap (informative).
    pub half_alpha_bound: f64,
    /// Smallest gap over all samples (≥ 0 up to integration noise means the
    /// orbit never crossed the diagonal).
    pub min_gap: f64,
    pub above_line: bool,
    /// Gap at the requested horizon.
    pub horizon_gap: f64,
    /// (t, gap) samples, thinned, covering [0, horizon].
    pub gap_tail: Vec<(f64, f64)>,
    /// Relative deviation between the integrated gap and the manifold
    /// expansion at the phase handoff (0 when the horizon ends phase 1).
    pub handoff_residual: f64,
    /// True when the input was mirrored to the positive representative.
    pub mirrored: bool,
}

/// Manifold gap expansion G(x) ≈ εx/(x²−1)·(1 + ε(x²+1)/(x²−1)²); the
/// truncation is O((ε/x²)²) relative, far below the handoff tolerance for
/// x ≥ X_SWITCH.
fn manifold_gap(x: f64, eps: f64) -> f64 {
    let d = x * x - 1.0;
    (eps * x / d) * (1.0 + eps * (x * x + 1.0) / (d * d))
}

const X_SWITCH_MIN: f64 = 200.0;
const HANDOFF_TOL: f64 = 1e-6;

/// Integrate the outside-strip orbit from (x0, x0) to the physical-time
/// horizon and report the gap y − x relative to the diagonal.
pub fn asymptote_check(
    x0: f64,
    eps: f64,
    horizon: f64,
) -> Result<AsymptoteReport, AnalysisError> {
    if !(x0.abs() > 1.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "x0 = {x0} must satisfy |x0| > 1"
        )));
    }
    if !(eps > 0.0) || !(horizon > 0.0) {
        return Err(AnalysisError::InvalidInput(
            "epsilon and horizon must be positive".into(),
        ));
    }

    let mirrored = x0 < 0.0;
    let a = x0.abs();
    let alpha0 = (a - 1.0 / a) / eps;
    // Switch once the accumulated contraction ∫(x²−1)dt exceeds ~700
    // (deviation from the manifold then underflows entirely); x² grows by
    // 2ε per unit τ. The floor keeps the expansion truncation microscopic
    // for small starting points.
    let x_switch = X_SWITCH_MIN.max((a * a + 1400.0 * eps).sqrt());

    // Phase 1: rescaled system in (x, g), physical time as aux 0, stopped
    // at x = X_SWITCH by a terminal event.
    let field = move |_tau: f64, q: [f64; 2]| {
        let (x, g) = (q[0], q[1]);
        let denom = x * x - 1.0;
        [g, eps * x / denom - g]
    };
    let time_aux: ode::AuxFn = Arc::new(|_tau, q: [f64; 2]| 1.0 / (q[0] * q[0] - 1.0));
    let stop = EventSpec::new("switch", move |s: &State| s.q[0] - x_switch).terminal();

    let cfg = ToleranceConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_step: 1e9,
        ..ToleranceConfig::default()
    };
    // τ needed to reach the switch: (x² − x0²)/(2ε), plus slack.
    let tau_budget = (x_switch * x_switch - a * a) / eps + 1500.0;
    let traj = ode::integrate_with_aux(
        &field,
        State::new(0.0, [a, 0.0]),
        tau_budget,
        &cfg,
        &[stop],
        &[time_aux.clone()],
        Chart::XY,
    )?;

    // (t, gap) in physical time.
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(traj.samples.len());
    let mut reached_horizon = false;
    for k in 0..traj.samples.len() {
        let t_here = traj.aux_at(k)[0];
        if t_here >= horizon {
            let prev = &traj.samples[k - 1];
            let here = &traj.samples[k];
            let t_prev = traj.aux_at(k - 1)[0];
            let (tq, _, gq) = horizon_point(&field, prev, here, t_prev, t_here, horizon);
            samples.push((tq, gq));
            reached_horizon = true;
            break;
        }
        samples.push((t_here, traj.samples[k].q[1]));
    }

    let mut handoff_residual = 0.0;
    if !reached_horizon {
        // Phase 2: reduced flow on the slow manifold from the switch point.
        let end = traj.last();
        let t_switch = traj.aux_at(traj.samples.len() - 1)[0];
        let (x_sw, g_sw) = (end.q[0], end.q[1]);
        let g_manifold = manifold_gap(x_sw, eps);
        handoff_residual = (g_sw - g_manifold).abs() / g_manifold;
        if handoff_residual > HANDOFF_TOL {
            return Err(AnalysisError::OracleMismatch {
                max_rel_err: handoff_residual,
                tol: HANDOFF_TOL,
            });
        }

        let reduced = move |_t: f64, q: [f64; 2]| {
            let x = q[0];
            [(x * x - 1.0) * manifold_gap(x, eps), 0.0]
        };
        let cfg2 = ToleranceConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_step: horizon,
            min_step: 1e-13,
            ..ToleranceConfig::default()
        };
        let tail = ode::integrate(
            &reduced,
            State::new(t_switch, [x_sw, 0.0]),
            horizon,
            &cfg2,
            &[],
        )?;
        for s in tail.samples.iter().skip(1) {
            samples.push((s.t, manifold_gap(s.q[0], eps)));
        }
    }

    let mut sup_gap = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    for &(_, g) in &samples {
        sup_gap = sup_gap.max(g);
        min_gap = min_gap.min(g);
    }
    // Parabolic refinement of the sampled peak.
    if let Some(i) = samples
        .iter()
        .position(|&(_, g)| g == sup_gap)
        .filter(|&i| i > 0 && i + 1 < samples.len())
    {
        let (t0, g0) = samples[i - 1];
        let (t1, g1) = samples[i];
        let (t2, g2) = samples[i + 1];
        let (h0, h1) = (t1 - t0, t2 - t1);
        if h0 > 0.0 && h1 > 0.0 {
            let d0 = (g1 - g0) / h0;
            let d1 = (g2 - g1) / h1;
            let curv = (d1 - d0) / (0.5 * (h0 + h1));
            if curv < 0.0 {
                let dt = 0.5 * (d0 + d1) / -curv;
                let peak = g1 + 0.5 * (d0 + d1) * dt + 0.5 * curv * dt * dt;
                sup_gap = sup_gap.max(peak);
            }
        }
    }

    let horizon_gap = samples.last().map(|&(_, g)| g).unwrap_or(0.0);

    // Thin for reporting, keeping the endpoints.
    let stride = (samples.len() / 512).max(1);
    let mut gap_tail: Vec<(f64, f64)> = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0)
        .map(|(_, &p)| p)
        .collect();
    if let Some(&last) = samples.last() {
        if gap_tail.last() != Some(&last) {
            gap_tail.push(last);
        }
    }

    Ok(AsymptoteReport {
        x0,
        y0: x0,
        eps,
        alpha0,
        sup_gap,
        half_alpha_bound: 1.0 / (2.0 * alpha0),
        min_gap,
        above_line: min_gap >= -1e-9,
        horizon_gap,
        gap_tail,
        handoff_residual,
        mirrored,
    })
}

/// Hermite-refine the (t, x, g) point where the physical-time quadrature
/// reaches `horizon` inside one accepted τ-step.
fn horizon_point(
    field: &dyn Fn(f64, [f64; 2]) -> [f64; 2],
    s0: &State,
    s1: &State,
    t0: f64,
    t1: f64,
    horizon: f64,
) -> (f64, f64, f64) {
    let f0 = field(s0.t, s0.q);
    let f1 = field(s1.t, s1.q);
    let h = s1.t - s0.t;
    let td0 = 1.0 / (s0.q[0] * s0.q[0] - 1.0);
    let td1 = 1.0 / (s1.q[0] * s1.q[0] - 1.0);

    let hermite = |p0: f64, m0: f64, p1: f64, m1: f64, th: f64| {
        let t2 = th * th;
        let t3 = t2 * th;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + th) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * h * m1
    };

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..80 {
        if hi - lo < 1e-14 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if hermite(t0, td0, t1, td1, mid) < horizon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = 0.5 * (lo + hi);
    let _ = t1;
    (
        hermite(t0, td0, t1, td1, th),
        hermite(s0.q[0], f0[0], s1.q[0], f1[0], th),
        hermite(s0.q[1], f0[1], s1.q[1], f1[1], th),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha0_formula() {
        let r = asymptote_check(3.0, 0.1, 5.0).unwrap();
        assert!((r.alpha0 - (3.0 - 1.0 / 3.0) / 0.1).abs() < 1e-12);
        assert!((r.alpha0 - 26.666_666_666_666_668).abs() < 1e-9);
    }

    #[test]
    fn orbit_stays_on_its_side_and_closes_in() {
        let r = asymptote_check(3.0, 0.1, 200.0).unwrap();
        assert!(r.above_line, "min gap {:e}", r.min_gap);
        assert!(r.sup_gap > 0.0);
        assert!(r.handoff_residual <= HANDOFF_TOL);
        // The gap collapses by the horizon: far under a tenth of its peak.
        assert!(r.horizon_gap >= 0.0);
        assert!(r.horizon_gap <= 0.1 * r.sup_gap);
        // Tail decreases toward 0 once past the peak.
        let tail = &r.gap_tail[r.gap_tail.len() / 2..];
        for pair in tail.windows(2) {
            assert!(pair[1].1 <= pair[0].1 * (1.0 + 1e-9));
        }
        // Reaches the horizon exactly.
        let (t_last, _) = *r.gap_tail.last().unwrap();
        assert!((t_last - 200.0).abs() < 1e-6 * 200.0);
    }

    #[test]
    fn short_horizon_ends_in_phase_one() {
        let r = asymptote_check(3.0, 0.1, 2.0).unwrap();
        assert_eq!(r.handoff_residual, 0.0);
        let (t_last, _) = *r.gap_tail.last().unwrap();
        assert!((t_last - 2.0).abs() < 1e-9 * 2.0);
    }

    #[test]
    fn mirrored_start_gives_identical_gap_data() {
        let a = asymptote_check(3.0, 0.1, 50.0).unwrap();
        let b = asymptote_check(-3.0, 0.1, 50.0).unwrap();
        assert!(b.mirrored && !a.mirrored);
        assert_eq!(a.gap_tail.len(), b.gap_tail.len());
        for (pa, pb) in a.gap_tail.iter().zip(&b.gap_tail) {
            assert!((pa.0 - pb.0).abs() <= 1e-9);
            assert!((pa.1 - pb.1).abs() <= 1e-9);
        }
        assert!((a.sup_gap - b.sup_gap).abs() <= 1e-12);
    }

    #[test]
    fn inside_strip_rejected() {
        assert!(matches!(
            asymptote_check(0.5, 0.1, 10.0),
            Err(AnalysisError::InvalidInput(_))
        ));
    }

    #[test]
    fn sup_gap_scale_is_inverse_alpha() {
        // The quasi-static gap at the start is ε·x0/(x0²−1) = 1/α0; the
        // measured sup sits just below that and well above half of it.
        let r = asymptote_check(3.0, 0.1, 100.0).unwrap();
        let inv_alpha = 1.0 / r.alpha0;
        assert!(
            r.sup_gap < inv_alpha * 1.02,
            "sup {} vs 1/alpha0 {}",
            r.sup_gap,
            inv_alpha
        );
        assert!(r.sup_gap > 0.5 * inv_alpha);
    }
}
