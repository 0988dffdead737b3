//! Attractor classification for the Liénard oscillator and bisection of the
//! parameter window where the limit cycle explodes from a small cycle to a
//! relaxation oscillation.
//!
//! Amplitudes are measured on the fast variable from event-detected extrema
//! (crossings of the critical curve, where ẋ = 0) after a discarded
//! transient, so the measurement is independent of the sampling grid.

use crate::models::{make_vdp_canard, EV_XDOT_ZERO};
use crate::ode::{self, State, Termination, ToleranceConfig};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CanardError {
    #[error("no class transition inside the range ({c_low}, {c_high}): both ends classify as {class:?}")]
    NoTransitionInRange {
        c_low: f64,
        c_high: f64,
        class: AttractorClass,
    },
    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("summary incomplete: integration budget exhausted (partial amplitude {partial_amplitude})")]
    IncompleteSummary { partial_amplitude: f64 },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Ode(#[from] crate::ode::OdeError),
}

/// Attractor class by amplitude relative to the deep-relaxation reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttractorClass {
    Equilibrium,
    SmallCycle,
    CanardLike,
    Relaxation,
}

/// Post-transient attractor measurement at one (ε, c).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttractorSummary {
    pub eps: f64,
    pub c: f64,
    /// max x − min x over event-detected extrema in the window.
    pub amplitude: f64,
    pub period_estimate: Option<f64>,
    pub class: AttractorClass,
    pub extrema_count: usize,
}

/// Transient discarded before measuring, in time units.
pub fn default_transient(eps: f64) -> f64 {
    20.0 / eps
}

/// Measurement window after the transient.
pub fn default_window(eps: f64) -> f64 {
    40.0 / eps
}

/// Amplitude below which the attractor counts as an equilibrium.
pub const EQUILIBRIUM_AMPLITUDE: f64 = 1e-4;
/// Fraction of the relaxation reference amplitude above which the class is
/// Relaxation, and below a fifth of which it is SmallCycle. The explosion
/// is steep, so any fixed fractions between the plateaus separate cleanly.
pub const RELAXATION_FRACTION: f64 = 0.6;
pub const SMALL_CYCLE_FRACTION: f64 = 0.2;

fn run_tolerances() -> ToleranceConfig {
    ToleranceConfig {
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        max_step: 0.5,
        ..ToleranceConfig::default()
    }
}

/// Raw amplitude measurement (no classification).
fn measure_amplitude(
    eps: f64,
    c: f64,
    transient: f64,
    window: f64,
) -> Result<(f64, Option<f64>, usize), CanardError> {
    let model = make_vdp_canard(eps, c)?;
    let field = model.field.clone();
    let cfg = run_tolerances();
    let f_c = c * c * c / 3.0 + c * c;
    let start = State::new(0.0, [c + 0.01, f_c]);

    let settled = if transient > 0.0 {
        let t = ode::integrate(&*field, start, transient, &cfg, &[])?;
        if t.termination != Termination::TimeLimit {
            return Err(CanardError::IncompleteSummary {
                partial_amplitude: 0.0,
            });
        }
        *t.last()
    } else {
        start
    };

    let traj = ode::integrate(
        &*field,
        settled,
        settled.t + window,
        &cfg,
        &model.standard_events,
    )?;
    let extrema: Vec<&ode::EventRecord> = traj.events_named(EV_XDOT_ZERO).collect();
    let amplitude = if extrema.is_empty() {
        0.0
    } else {
        let xs = extrema.iter().map(|e| e.state.q[0]);
        let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = extrema
            .iter()
            .map(|e| e.state.q[0])
            .fold(f64::INFINITY, f64::min);
        max - min
    };
    // Extrema alternate max/min, so one period spans two of them.
    let period = if extrema.len() >= 3 {
        let span = extrema.last().unwrap().t_event - extrema.first().unwrap().t_event;
        Some(2.0 * span / (extrema.len() - 1) as f64)
    } else {
        None
    };
    if traj.termination != Termination::TimeLimit {
        return Err(CanardError::IncompleteSummary {
            partial_amplitude: amplitude,
        });
    }
    Ok((amplitude, period, extrema.len()))
}

fn reference_cache() -> &'static Mutex<BTreeMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<BTreeMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// Amplitude of the deep-relaxation reference (c = −1) at this ε, cached.
pub fn reference_amplitude(eps: f64) -> Result<f64, CanardError> {
    if let Some(&a) = reference_cache().lock().unwrap().get(&eps.to_bits()) {
        return Ok(a);
    }
    let (a, _, _) = measure_amplitude(eps, -1.0, default_transient(eps), default_window(eps))?;
    reference_cache().lock().unwrap().insert(eps.to_bits(), a);
    Ok(a)
}

/// Measure and classify the attractor reached from the standard start point
/// (c + 0.01, f(c)) after `transient`, over `window`.
pub fn attractor_summary(
    eps: f64,
    c: f64,
    transient: f64,
    window: f64,
) -> Result<AttractorSummary, CanardError> {
    let (amplitude, period_estimate, extrema_count) =
        measure_amplitude(eps, c, transient, window)?;
    let class = if amplitude < EQUILIBRIUM_AMPLITUDE {
        AttractorClass::Equilibrium
    } else {
        let a_ref = reference_amplitude(eps)?;
        if amplitude >= RELAXATION_FRACTION * a_ref {
            AttractorClass::Relaxation
        } else if amplitude < SMALL_CYCLE_FRACTION * a_ref {
            AttractorClass::SmallCycle
        } else {
            AttractorClass::CanardLike
        }
    };
    Ok(AttractorSummary {
        eps,
        c,
        amplitude,
        period_estimate,
        class,
        extrema_count,
    })
}

/// Bisected transition bracket at one ε.
#[derive(Debug, Clone, Serialize)]
pub struct CanardScan {
    pub eps: f64,
    /// (c_low, c_high): amplitude is on opposite sides of `threshold` at
    /// the two ends.
    pub bracket: (f64, f64),
    pub width: f64,
    /// All sampled (c, amplitude) pairs, in c order.
    pub amplitudes: Vec<(f64, f64)>,
    pub threshold: f64,
}

/// Two ulps of the larger |c|: below this the bracket cannot shrink.
fn c_resolution_floor(c_low: f64, c_high: f64) -> f64 {
    let scale = c_low.abs().max(c_high.abs()).max(1e-30);
    4.0 * scale * f64::EPSILON
}

/// Bisect the amplitude transition across `threshold` inside `c_range`.
pub fn canard_bisect(
    eps: f64,
    c_range: (f64, f64),
    threshold: f64,
    tol_c: f64,
) -> Result<CanardScan, CanardError> {
    let (mut lo, mut hi) = c_range;
    let transient = default_transient(eps);
    let window = default_window(eps);

    let amp = |c: f64| -> Result<f64, CanardError> {
        Ok(measure_amplitude(eps, c, transient, window)?.0)
    };

    let mut samples: Vec<(f64, f64)> = Vec::new();
    let a_lo = amp(lo)?;
    let a_hi = amp(hi)?;
    samples.push((lo, a_lo));
    samples.push((hi, a_hi));

    let side = |a: f64| a >= threshold;
    if side(a_lo) == side(a_hi) {
        let class = attractor_summary(eps, lo, transient, window)?.class;
        return Err(CanardError::NoTransitionInRange {
            c_low: lo,
            c_high: hi,
            class,
        });
    }
    let side_lo = side(a_lo);

    // Invariant: the two bracket ends stay on opposite sides of the
    // threshold throughout.
    while (hi - lo).abs() > tol_c.max(c_resolution_floor(lo, hi)) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let a_mid = amp(mid)?;
        samples.push((mid, a_mid));
        if side(a_mid) == side_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(CanardScan {
        eps,
        bracket: (lo, hi),
        width: hi - lo,
        amplitudes: samples,
        threshold,
    })
}

/// One width measurement of the transition window at a given ε.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowMeasurement {
    pub eps: f64,
    /// c at which the amplitude crosses the lower threshold.
    pub c_at_low: f64,
    /// c at which it crosses the upper threshold (more negative).
    pub c_at_high: f64,
    pub width: f64,
    pub at_resolution_floor: bool,
}

/// Least-squares fit of ln(width) against 1/ε across several ε values.
#[derive(Debug, Clone, Serialize)]
pub struct WindowFit {
    pub measurements: Vec<WindowMeasurement>,
    /// ε values excluded because their width hit the resolution floor.
    pub excluded: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Default c search range containing the explosion for ε in [0.05, 0.2].
pub const DEFAULT_C_RANGE: (f64, f64) = (-0.2, 0.1);

/// Measure the window width (between the two amplitude thresholds) at each
/// ε and fit ln(width) against 1/ε. Widths shrink exponentially, so the
/// expected slope is negative.
pub fn window_scaling(
    eps_list: &[f64],
    thresholds: (f64, f64),
) -> Result<WindowFit, CanardError> {
    if eps_list.len() < 3 {
        return Err(CanardError::InsufficientData {
            needed: 3,
            got: eps_list.len(),
        });
    }
    let (low, high) = thresholds;
    let tol_c = 1e-10;

    // Independent pure jobs per ε; results keyed by index so the worker
    // count cannot influence anything.
    let mut results: Vec<Option<Result<WindowMeasurement, CanardError>>> =
        (0..eps_list.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &eps in eps_list {
            handles.push(scope.spawn(move || -> Result<WindowMeasurement, CanardError> {
                let scan_low = canard_bisect(eps, DEFAULT_C_RANGE, low, tol_c)?;
                let scan_high = canard_bisect(eps, DEFAULT_C_RANGE, high, tol_c)?;
                let c_at_low = 0.5 * (scan_low.bracket.0 + scan_low.bracket.1);
                let c_at_high = 0.5 * (scan_high.bracket.0 + scan_high.bracket.1);
                let width = (c_at_low - c_at_high).abs();
                let floor = c_resolution_floor(c_at_low, c_at_high);
                Ok(WindowMeasurement {
                    eps,
                    c_at_low,
                    c_at_high,
                    width,
                    at_resolution_floor: width <= floor,
                })
            }));
        }
        for (i, h) in handles.into_iter().enumerate() {
            results[i] = Some(h.join().expect("window job panicked"));
        }
    });

    let mut measurements = Vec::new();
    let mut excluded = Vec::new();
    for r in results.into_iter().flatten() {
        let m = r?;
        if m.at_resolution_floor || m.width <= 0.0 {
            excluded.push(m.eps);
        } else {
            measurements.push(m);
        }
    }
    if measurements.len() < 3 {
        return Err(CanardError::InsufficientData {
            needed: 3,
            got: measurements.len(),
        });
    }

    // ln(width) against 1/ε.
    let xs: Vec<f64> = measurements.iter().map(|m| 1.0 / m.eps).collect();
    let ys: Vec<f64> = measurements.iter().map(|m| m.width.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };

    Ok(WindowFit {
        measurements,
        excluded,
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_on_attracting_branch() {
        // f'(0.5) > 0: the stationary point is stable, orbits spiral in.
        let s = attractor_summary(0.05, 0.5, default_transient(0.05), default_window(0.05))
            .unwrap();
        assert_eq!(s.class, AttractorClass::Equilibrium);
        assert!(s.amplitude < 1e-4);
    }

    #[test]
    fn deep_relaxation_has_large_amplitude() {
        let s = attractor_summary(0.05, -1.0, default_transient(0.05), default_window(0.05))
            .unwrap();
        assert_eq!(s.class, AttractorClass::Relaxation);
        // The cycle spans roughly from the jump landing at x = -3 to x = 1.
        assert!(s.amplitude > 2.0, "amplitude {}", s.amplitude);
        assert!(s.period_estimate.is_some());
    }

    #[test]
    fn small_cycle_just_past_the_fold() {
        let s = attractor_summary(0.05, -0.001, default_transient(0.05), default_window(0.05))
            .unwrap();
        assert_eq!(s.class, AttractorClass::SmallCycle);
        assert!(s.amplitude > 1e-4);
        assert!(s.amplitude < 1.0);
    }

    #[test]
    fn bisect_finds_transition_near_fold() {
        let eps = 0.1;
        let a_ref = reference_amplitude(eps).unwrap();
        let scan = canard_bisect(eps, (-0.2, 0.1), 0.5 * a_ref, 1e-7).unwrap();
        let (lo, hi) = scan.bracket;
        assert!(lo < hi);
        assert!(hi - lo <= 1e-7);
        // Explosion sits on the negative-c side of the fold at x = 0.
        assert!(lo > -0.1 && hi < 0.02, "bracket ({lo}, {hi})");
        // Ends classify differently (amplitude straddles the threshold).
        let a_lo = scan.amplitudes.iter().find(|p| p.0 == lo).map(|p| p.1);
        let a_hi = scan.amplitudes.iter().find(|p| p.0 == hi).map(|p| p.1);
        if let (Some(a_lo), Some(a_hi)) = (a_lo, a_hi) {
            assert!((a_lo >= scan.threshold) != (a_hi >= scan.threshold));
        }
    }

    #[test]
    fn wide_tolerance_returns_range_as_bracket() {
        let eps = 0.1;
        let scan = canard_bisect(eps, (-0.2, 0.1), 2.0, 1.0).unwrap();
        assert_eq!(scan.bracket, (-0.2, 0.1));
        assert_eq!(scan.amplitudes.len(), 2);
    }

    #[test]
    fn no_transition_when_both_ends_settle() {
        let err = canard_bisect(0.1, (0.2, 0.5), 2.0, 1e-6).unwrap_err();
        match err {
            CanardError::NoTransitionInRange { class, .. } => {
                assert_eq!(class, AttractorClass::Equilibrium);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_scaling_needs_three_eps() {
        assert!(matches!(
            window_scaling(&[0.1], (1.0, 2.5)),
            Err(CanardError::InsufficientData { needed: 3, got: 1 })
        ));
        assert!(matches!(
            window_scaling(&[0.1, 0.12], (1.0, 2.5)),
            Err(CanardError::InsufficientData { .. })
        ));
    }

    #[test]
    fn reproducible_summaries() {
        let a = attractor_summary(0.1, -0.05, 50.0, 100.0).unwrap();
        let b = attractor_summary(0.1, -0.05, 50.0, 100.0).unwrap();
        assert_eq!(a.amplitude.to_bits(), b.amplitude.to_bits());
        assert_eq!(a.class, b.class);
    }
}
