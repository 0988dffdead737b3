//! Residence-time measurement near the repelling boundary branches, and the
//! search for a single pass exceeding a requested duration.
//!
//! A *pass* is a maximal interval during which the orbit is simultaneously
//! within distance δ of a boundary line x = ±1 (measured stably through the
//! strip chart) and inside that branch's repelling region (beyond the
//! corner where the branch loses stability). Pass boundaries use the
//! refined band/flip event times when the trajectory carries them and fall
//! back to linear interpolation between samples otherwise, so synthetic
//! trajectories are handled too.

use super::AnalysisError;
use crate::models::{
    self, band_enter_id, band_exit_id, band_threshold_u, chart_transform, flip_id,
    make_enhanced_delay, ManifoldBranch,
};
use crate::ode::{self, Chart, State, ToleranceConfig, Trajectory};
use serde::Serialize;

/// One residence interval near a repelling boundary part.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DelayPass {
    /// +1.0 or -1.0: which boundary line.
    pub branch: f64,
    pub enter_t: f64,
    pub exit_t: f64,
    pub duration: f64,
    pub y_enter: f64,
    pub y_exit: f64,
}

/// All passes of one trajectory near one branch.
#[derive(Debug, Clone, Serialize)]
pub struct DelayReport {
    pub delta: f64,
    pub branch_id: String,
    pub passes: Vec<DelayPass>,
    pub total_time: f64,
}

struct Indicator {
    /// Signed margin of the band condition (>= 0 means inside the band).
    band: Box<dyn Fn(&State) -> f64>,
    /// Signed margin of the repelling-region condition.
    region: Box<dyn Fn(&State) -> f64>,
}

fn indicator(chart: Chart, s: f64, delta: f64) -> Indicator {
    let band: Box<dyn Fn(&State) -> f64> = match chart {
        Chart::UY => {
            let u_delta = band_threshold_u(delta);
            Box::new(move |st: &State| s * st.q[0] - u_delta)
        }
        Chart::XY => Box::new(move |st: &State| delta - (st.q[0] - s).abs()),
    };
    let region: Box<dyn Fn(&State) -> f64> = Box::new(move |st: &State| s * st.q[1] - 1.0);
    Indicator { band, region }
}

fn linear_root(t0: f64, t1: f64, g0: f64, g1: f64) -> f64 {
    if g1 == g0 {
        0.5 * (t0 + t1)
    } else {
        t0 + (0.0 - g0) * (t1 - t0) / (g1 - g0)
    }
}

/// Refined boundary time for one condition change inside (t0, t1]: prefer a
/// matching refined event, fall back to linear interpolation.
fn boundary_time(
    traj: &Trajectory,
    ids: &[String],
    t0: f64,
    t1: f64,
    g0: f64,
    g1: f64,
) -> f64 {
    for ev in &traj.events {
        if ev.t_event > t0 && ev.t_event <= t1 && ids.iter().any(|id| *id == ev.event_id) {
            return ev.t_event;
        }
    }
    linear_root(t0, t1, g0, g1)
}

fn y_at(traj: &Trajectory, k0: usize, t: f64) -> f64 {
    let s0 = &traj.samples[k0];
    let s1 = &traj.samples[k0 + 1];
    if s1.t == s0.t {
        return s0.q[1];
    }
    let th = (t - s0.t) / (s1.t - s0.t);
    s0.q[1] + th * (s1.q[1] - s0.q[1])
}

/// Residence intervals of `traj` within distance `delta` of the repelling
/// part of `branch` (a boundary line x = ±1 of the hysteresis system).
pub fn delay_report(traj: &Trajectory, branch: &ManifoldBranch, delta: f64) -> DelayReport {
    let s = match branch.locus {
        models::Locus::VerticalLine { x } if x == 1.0 || x == -1.0 => x,
        _ => {
            return DelayReport {
                delta,
                branch_id: branch.id.clone(),
                passes: Vec::new(),
                total_time: 0.0,
            }
        }
    };

    let ind = indicator(traj.chart, s, delta);
    let band_ids = [band_enter_id(s), band_exit_id(s)];
    let flip_ids = [flip_id(s)];

    let mut passes: Vec<DelayPass> = Vec::new();
    let mut open: Option<(f64, f64)> = None; // (enter_t, y_enter)

    let inside = |st: &State| (ind.band)(st) >= 0.0 && (ind.region)(st) > 0.0;

    if let Some(first) = traj.samples.first() {
        if inside(first) {
            open = Some((first.t, first.q[1]));
        }
    }

    for k in 0..traj.samples.len().saturating_sub(1) {
        let s0 = &traj.samples[k];
        let s1 = &traj.samples[k + 1];
        let in0 = inside(s0);
        let in1 = inside(s1);
        if in0 == in1 {
            continue;
        }
        let b0 = (ind.band)(s0);
        let b1 = (ind.band)(s1);
        let r0 = (ind.region)(s0);
        let r1 = (ind.region)(s1);
        let band_flip = (b0 >= 0.0) != (b1 >= 0.0);
        let region_flip = (r0 > 0.0) != (r1 > 0.0);

        let t_band = band_flip.then(|| boundary_time(traj, &band_ids, s0.t, s1.t, b0, b1));
        let t_region = region_flip.then(|| boundary_time(traj, &flip_ids, s0.t, s1.t, r0, r1));

        if !in0 && in1 {
            // Entry: both conditions must hold, so take the later boundary.
            let t = match (t_band, t_region) {
                (Some(a), Some(b)) => a.max(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => s1.t,
            };
            open = Some((t, y_at(traj, k, t)));
        } else {
            // Exit: the first condition to fail ends the pass.
            let t = match (t_band, t_region) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => s0.t,
            };
            if let Some((enter_t, y_enter)) = open.take() {
                if t > enter_t {
                    passes.push(DelayPass {
                        branch: s,
                        enter_t,
                        exit_t: t,
                        duration: t - enter_t,
                        y_enter,
                        y_exit: y_at(traj, k, t),
                    });
                }
            }
        }
    }

    if let Some((enter_t, y_enter)) = open {
        let last = traj.last();
        if last.t > enter_t {
            passes.push(DelayPass {
                branch: s,
                enter_t,
                exit_t: last.t,
                duration: last.t - enter_t,
                y_enter,
                y_exit: last.q[1],
            });
        }
    }

    let total_time = passes.iter().map(|p| p.duration).sum();
    DelayReport {
        delta,
        branch_id: branch.id.clone(),
        passes,
        total_time,
    }
}

/// Witness of a residence interval exceeding the requested duration.
#[derive(Debug, Clone, Serialize)]
pub struct DelayWitness {
    /// Index of the witness in `passes` (all passes of the run, both
    /// branches merged in time order).
    pub pass_index: usize,
    pub pass: DelayPass,
    pub passes: Vec<DelayPass>,
    pub crossings_seen: usize,
}

/// Run the hysteresis system from `(x0, y0)` until a single residence
/// interval within `delta` of a repelling boundary part exceeds `t_min`.
/// The budget is a time horizon; exhausting it is reported as
/// `NotFoundWithinBudget` together with the amplitude trend seen so far
/// (never as a claim that no such pass exists).
pub fn verify_enhanced_delay(
    x0: f64,
    y0: f64,
    eps: f64,
    delta: f64,
    t_min: f64,
    t_budget: f64,
) -> Result<DelayWitness, AnalysisError> {
    if !(x0.abs() < 1.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "x0 = {x0} must lie inside the strip |x| < 1"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    if !(t_min >= 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "T = {t_min} must be >= 0"
        )));
    }
    if !(t_budget > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "t_budget = {t_budget} must be > 0"
        )));
    }

    let model = make_enhanced_delay(eps, Chart::UY)?;
    let q0 = chart_transform([x0, y0], Chart::XY, Chart::UY)?;
    let mut events = model.standard_events.clone();
    events.extend(models::enhanced_band_events(delta));

    let cfg = ToleranceConfig::default();
    let field = model.field.clone();
    let traj = ode::integrate_with_aux(
        &*field,
        State::new(0.0, q0),
        t_budget,
        &cfg,
        &events,
        &[],
        Chart::UY,
    )?;

    let mut passes: Vec<DelayPass> = Vec::new();
    for s in [1.0, -1.0] {
        let branch = model.manifold(&models::branch_id(s)).expect("declared branch");
        passes.extend(delay_report(&traj, branch, delta).passes);
    }
    passes.sort_by(|a, b| a.enter_t.partial_cmp(&b.enter_t).unwrap());

    let crossings = traj.events_named(models::EV_U_ZERO).count();

    match passes.iter().position(|p| p.duration > t_min) {
        Some(i) => Ok(DelayWitness {
            pass_index: i,
            pass: passes[i],
            passes,
            crossings_seen: crossings,
        }),
        None => Err(AnalysisError::NotFoundWithinBudget {
            crossings,
            amplitudes: traj
                .events_named(models::EV_U_ZERO)
                .map(|e| e.state.q[1].abs())
                .collect(),
        }),
    }
}
