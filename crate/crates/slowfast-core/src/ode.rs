//! Adaptive planar ODE integration with guaranteed event localization.
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with PI step-size
//! control, FSAL stage reuse, and cubic Hermite dense output between accepted
//! steps. Every sign change of an armed event function across an accepted
//! step is refined to `event_time_tol` by bisection with secant acceleration.
//!
//! Auxiliary quadrature variables (integrals of scalar functions of the
//! state, e.g. running `∫ x² dt`) ride along the same Runge–Kutta stages so
//! their accuracy tracks the step-size control of the state itself.
//!
//! All operations are pure: identical inputs produce bitwise-identical
//! trajectories within one build.

use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// Chart coordinates of a planar state.
pub type Vec2 = [f64; 2];

/// One time-stamped point of a trajectory. The owning trajectory's chart
/// tag determines whether `q` is `(x, y)` or `(u, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State {
    pub t: f64,
    pub q: Vec2,
}

impl State {
    pub fn new(t: f64, q: Vec2) -> Self {
        Self { t, q }
    }
}

/// Coordinate chart of a trajectory: the plane itself, or the strip chart
/// `x = tanh u` that resolves exponentially small distances to `x = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    XY,
    UY,
}

/// Mixed absolute/relative step-acceptance tolerances plus run budgets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToleranceConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Event times are bracketed to `event_time_tol * max(1, |t|)`.
    pub event_time_tol: f64,
    pub max_steps: u64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 1.0,
            min_step: 1e-13,
            event_time_tol: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<(), OdeError> {
        let all_pos = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.min_step > 0.0
            && self.event_time_tol > 0.0;
        if !all_pos {
            return Err(OdeError::InvalidTolerance(
                "all tolerances and step bounds must be strictly positive".into(),
            ));
        }
        if self.min_step >= self.max_step {
            return Err(OdeError::InvalidTolerance(
                "min_step must be smaller than max_step".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidTolerance(
                "max_steps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn event_tol_at(&self, t: f64) -> f64 {
        self.event_time_tol * t.abs().max(1.0)
    }
}

/// Which sign changes of an event function are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

/// Scalar function of the current state, shareable across runs.
pub type ScalarFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Scalar integrand `a(t, q)` accumulated as an auxiliary quadrature.
pub type AuxFn = Arc<dyn Fn(f64, Vec2) -> f64 + Send + Sync>;

/// An event is a zero crossing of `g` along the trajectory, filtered by
/// direction. Terminal events stop the run at the refined crossing time.
#[derive(Clone)]
pub struct EventSpec {
    pub id: String,
    pub g: ScalarFn,
    pub direction: Direction,
    pub terminal: bool,
}

impl EventSpec {
    pub fn new<F>(id: &str, g: F) -> Self
    where
        F: Fn(&State) -> f64 + Send + Sync + 'static,
    {
        Self {
            id: id.to_string(),
            g: Arc::new(g),
            direction: Direction::Any,
            terminal: false,
        }
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }
}

impl std::fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventSpec")
            .field("id", &self.id)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish()
    }
}

/// A refined event crossing. `aux` holds the auxiliary quadrature values
/// interpolated to the event time (empty when the run had none).
#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub event_id: String,
    pub t_event: f64,
    pub state: State,
    pub residual: f64,
    pub aux: Vec<f64>,
}

/// Why an integration run stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Termination {
    TimeLimit,
    TerminalEvent { event_id: String },
    StepFloor,
    StepBudget,
}

/// Time-ordered accepted-step samples plus refined event records.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub chart: Chart,
    pub samples: Vec<State>,
    /// Auxiliary quadrature values at each sample, flattened with stride `naux`.
    pub aux: Vec<f64>,
    pub naux: usize,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.samples.last().expect("trajectory has at least the initial state")
    }

    pub fn aux_at(&self, sample: usize) -> &[f64] {
        &self.aux[sample * self.naux..(sample + 1) * self.naux]
    }

    /// Events with a matching id, in time order.
    pub fn events_named<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a EventRecord> {
        self.events.iter().filter(move |e| e.event_id == id)
    }
}

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("non-finite field evaluation at t = {t}, q = ({x}, {y})")]
    NonFiniteField { t: f64, x: f64, y: f64 },
    #[error("no sign change across bracket: g({t0}) = {g0:e}, g({t1}) = {g1:e}")]
    NoBracket { t0: f64, g0: f64, t1: f64, g1: f64 },
    #[error("invalid tolerance configuration: {0}")]
    InvalidTolerance(String),
    #[error("integration span is empty: t_end = {t_end} does not exceed t0 = {t0}")]
    EmptySpan { t0: f64, t_end: f64 },
    #[error("initial state is not finite")]
    NonFiniteInitialState,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order solution weights (the last tableau row; FSAL).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Error weights: difference between the 5th- and embedded 4th-order rows.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
/// hnew/h is kept within [1/FACC1, 1/FACC2] = [0.2, 10].
const FACC1: f64 = 5.0;
const FACC2: f64 = 0.1;

const EVENT_REFINE_CAP: usize = 80;

fn eval_field(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    t: f64,
    q: Vec2,
) -> Result<Vec2, OdeError> {
    let f = field(t, q);
    if f[0].is_finite() && f[1].is_finite() {
        Ok(f)
    } else {
        Err(OdeError::NonFiniteField { t, x: q[0], y: q[1] })
    }
}

/// Scaled error norm: `max_i |e_i| / (abs_tol + rel_tol * |q_i|)`, using the
/// larger coordinate magnitude of the two step endpoints as the scale.
fn error_norm(err: Vec2, q0: Vec2, q1: Vec2, tol: &ToleranceConfig) -> f64 {
    let mut norm: f64 = 0.0;
    for i in 0..2 {
        let e = err[i].abs();
        if e == 0.0 {
            continue;
        }
        let scale = tol.abs_tol + tol.rel_tol * q0[i].abs().max(q1[i].abs());
        if scale == 0.0 {
            return f64::INFINITY;
        }
        norm = norm.max(e / scale);
    }
    norm
}

struct StageOut {
    q_next: Vec2,
    err: f64,
    /// Field at the right endpoint (FSAL: next step's first stage).
    f_next: Vec2,
    /// Increment of each auxiliary quadrature over the step.
    aux_inc: Vec<f64>,
    /// Auxiliary integrands evaluated at the right endpoint.
    aux_f_next: Vec<f64>,
}

/// One embedded step from `(t, q)` with first stage `f0` already evaluated.
fn dopri5_stages(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    t: f64,
    q: Vec2,
    f0: Vec2,
    h: f64,
    tol: &ToleranceConfig,
    aux: &[AuxFn],
) -> Result<StageOut, OdeError> {
    let mut k = [[0.0f64; 2]; 7];
    k[0] = f0;
    let mut aux_k = vec![[0.0f64; 7]; aux.len()];
    for (m, a) in aux.iter().enumerate() {
        aux_k[m][0] = a(t, q);
    }

    for s in 1..6 {
        let mut qs = q;
        for j in 0..s {
            let a_sj = A[s][j];
            if a_sj != 0.0 {
                qs[0] += h * a_sj * k[j][0];
                qs[1] += h * a_sj * k[j][1];
            }
        }
        let ts = t + C[s] * h;
        k[s] = eval_field(field, ts, qs)?;
        for (m, a) in aux.iter().enumerate() {
            aux_k[m][s] = a(ts, qs);
        }
    }

    // Sixth row of A is the solution itself (stage 7 sits at the endpoint).
    let mut q_next = q;
    for j in 0..6 {
        let a_7j = A[6][j];
        if a_7j != 0.0 {
            q_next[0] += h * a_7j * k[j][0];
            q_next[1] += h * a_7j * k[j][1];
        }
    }
    let t_next = t + h;
    k[6] = eval_field(field, t_next, q_next)?;
    let mut aux_f_next = vec![0.0f64; aux.len()];
    for (m, a) in aux.iter().enumerate() {
        let v = a(t_next, q_next);
        aux_k[m][6] = v;
        aux_f_next[m] = v;
    }

    let mut err_vec = [0.0f64; 2];
    for j in 0..7 {
        if E[j] != 0.0 {
            err_vec[0] += E[j] * k[j][0];
            err_vec[1] += E[j] * k[j][1];
        }
    }
    err_vec[0] *= h;
    err_vec[1] *= h;

    if !q_next[0].is_finite() || !q_next[1].is_finite() {
        return Err(OdeError::NonFiniteField {
            t: t_next,
            x: q_next[0],
            y: q_next[1],
        });
    }

    let mut aux_inc = vec![0.0f64; aux.len()];
    for (m, ks) in aux_k.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..7 {
            if B[j] != 0.0 {
                s += B[j] * ks[j];
            }
        }
        aux_inc[m] = h * s;
    }

    Ok(StageOut {
        q_next,
        err: error_norm(err_vec, q, q_next, tol),
        f_next: k[6],
        aux_inc,
        aux_f_next,
    })
}

/// One embedded Runge–Kutta step of order 5 with an embedded 4th-order error
/// estimate. Returns the candidate next state and the scaled error norm
/// (acceptance threshold is 1).
pub fn step(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    state: &State,
    h: f64,
    tol: &ToleranceConfig,
) -> Result<(State, f64), OdeError> {
    tol.validate()?;
    if !(h > 0.0) {
        return Err(OdeError::InvalidTolerance("step size must be positive".into()));
    }
    let f0 = eval_field(field, state.t, state.q)?;
    let out = dopri5_stages(field, state.t, state.q, f0, h, tol, &[])?;
    Ok((State::new(state.t + h, out.q_next), out.err))
}

/// Hairer-style automatic initial step size.
fn initial_step(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    t0: f64,
    q0: Vec2,
    f0: Vec2,
    t_end: f64,
    tol: &ToleranceConfig,
) -> Result<f64, OdeError> {
    let sc = |q: Vec2, i: usize| tol.abs_tol + tol.rel_tol * q[i].abs();
    let d0 = (q0[0] / sc(q0, 0)).abs().max((q0[1] / sc(q0, 1)).abs());
    let d1 = (f0[0] / sc(q0, 0)).abs().max((f0[1] / sc(q0, 1)).abs());
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * (d0 / d1)
    };
    h0 = h0.min(t_end - t0).min(tol.max_step);

    let q1 = [q0[0] + h0 * f0[0], q0[1] + h0 * f0[1]];
    let f1 = eval_field(field, t0 + h0, q1)?;
    let d2 = ((f1[0] - f0[0]) / sc(q0, 0))
        .abs()
        .max(((f1[1] - f0[1]) / sc(q0, 1)).abs())
        / h0;

    let max_d = d1.max(d2);
    let h1 = if max_d <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / max_d).powf(0.2)
    };

    Ok(h1.min(100.0 * h0).min(t_end - t0).min(tol.max_step))
}

/// Cubic Hermite interpolation over one accepted step.
struct Segment<'a> {
    t0: f64,
    t1: f64,
    q0: Vec2,
    q1: Vec2,
    f0: Vec2,
    f1: Vec2,
    aux0: &'a [f64],
    aux1: &'a [f64],
    aux_f0: &'a [f64],
    aux_f1: &'a [f64],
}

impl Segment<'_> {
    fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    fn state_at(&self, theta: f64) -> State {
        let h = self.h();
        let (h00, h10, h01, h11) = hermite_basis(theta);
        let q = [
            h00 * self.q0[0] + h10 * h * self.f0[0] + h01 * self.q1[0] + h11 * h * self.f1[0],
            h00 * self.q0[1] + h10 * h * self.f0[1] + h01 * self.q1[1] + h11 * h * self.f1[1],
        ];
        State::new(self.t0 + theta * h, q)
    }

    fn aux_at(&self, theta: f64) -> Vec<f64> {
        let h = self.h();
        let (h00, h10, h01, h11) = hermite_basis(theta);
        (0..self.aux0.len())
            .map(|m| {
                h00 * self.aux0[m]
                    + h10 * h * self.aux_f0[m]
                    + h01 * self.aux1[m]
                    + h11 * h * self.aux_f1[m]
            })
            .collect()
    }
}

fn hermite_basis(theta: f64) -> (f64, f64, f64, f64) {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + theta,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

fn crossed(direction: Direction, g0: f64, g1: f64) -> bool {
    if g0 == 0.0 {
        // A zero at the left endpoint belongs to the previous segment (or is
        // the initial condition sitting exactly on the event set).
        return false;
    }
    match direction {
        Direction::Any => g0 * g1 < 0.0 || g1 == 0.0,
        Direction::Rising => g0 < 0.0 && g1 >= 0.0,
        Direction::Falling => g0 > 0.0 && g1 <= 0.0,
    }
}

/// Bisection with secant acceleration on the Hermite interpolant. The
/// iterate never leaves the current bracket; the bracket shrinks to
/// `time_tol` or the iteration cap.
fn refine_crossing(
    seg: &Segment<'_>,
    g: &dyn Fn(&State) -> f64,
    g0: f64,
    g1: f64,
    time_tol: f64,
) -> (f64, State, f64) {
    let h = seg.h();
    let mut ta = 0.0f64;
    let mut tb = 1.0f64;
    let mut ga = g0;
    let mut gb = g1;

    if gb == 0.0 {
        let st = seg.state_at(1.0);
        return (1.0, st, 0.0);
    }

    for _ in 0..EVENT_REFINE_CAP {
        if (tb - ta) * h.abs() <= time_tol {
            break;
        }
        // Secant proposal, admitted only while it stays strictly inside.
        let mut theta = if gb != ga {
            tb - gb * (tb - ta) / (gb - ga)
        } else {
            0.5 * (ta + tb)
        };
        let margin = 0.125 * (tb - ta);
        if !(theta > ta + margin && theta < tb - margin) {
            theta = 0.5 * (ta + tb);
        }
        let gm = g(&seg.state_at(theta));
        if gm == 0.0 {
            ta = theta;
            tb = theta;
            break;
        }
        if ga * gm < 0.0 {
            tb = theta;
            gb = gm;
        } else {
            ta = theta;
            ga = gm;
        }
    }

    let theta = if gb.abs() < ga.abs() { tb } else { ta };
    let st = seg.state_at(theta);
    let residual = g(&st).abs();
    (theta, st, residual)
}

/// Locate a sign change of `g` between two states connected by `field`,
/// bracketing the crossing time to `time_tol`.
pub fn locate_event(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    bracket: (&State, &State),
    id: &str,
    g: &dyn Fn(&State) -> f64,
    time_tol: f64,
) -> Result<EventRecord, OdeError> {
    let (left, right) = bracket;
    let g0 = g(left);
    let g1 = g(right);
    if g0 * g1 > 0.0 {
        return Err(OdeError::NoBracket {
            t0: left.t,
            g0,
            t1: right.t,
            g1,
        });
    }
    if g0 == 0.0 {
        return Ok(EventRecord {
            event_id: id.to_string(),
            t_event: left.t,
            state: *left,
            residual: 0.0,
            aux: Vec::new(),
        });
    }
    let f0 = eval_field(field, left.t, left.q)?;
    let f1 = eval_field(field, right.t, right.q)?;
    let seg = Segment {
        t0: left.t,
        t1: right.t,
        q0: left.q,
        q1: right.q,
        f0,
        f1,
        aux0: &[],
        aux1: &[],
        aux_f0: &[],
        aux_f1: &[],
    };
    let (_, state, residual) = refine_crossing(&seg, g, g0, g1, time_tol);
    Ok(EventRecord {
        event_id: id.to_string(),
        t_event: state.t,
        state,
        residual,
        aux: Vec::new(),
    })
}

/// Adaptive integration from `q0` to `t_end` with event detection.
pub fn integrate(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    q0: State,
    t_end: f64,
    tol: &ToleranceConfig,
    events: &[EventSpec],
) -> Result<Trajectory, OdeError> {
    integrate_with_aux(field, q0, t_end, tol, events, &[], Chart::XY)
}

/// As [`integrate`], with auxiliary quadratures and an explicit chart tag.
pub fn integrate_with_aux(
    field: &dyn Fn(f64, Vec2) -> Vec2,
    q0: State,
    t_end: f64,
    tol: &ToleranceConfig,
    events: &[EventSpec],
    aux: &[AuxFn],
    chart: Chart,
) -> Result<Trajectory, OdeError> {
    tol.validate()?;
    if !(q0.t.is_finite() && q0.q[0].is_finite() && q0.q[1].is_finite()) {
        return Err(OdeError::NonFiniteInitialState);
    }
    if !(t_end > q0.t) {
        return Err(OdeError::EmptySpan { t0: q0.t, t_end });
    }

    let naux = aux.len();
    let mut traj = Trajectory {
        chart,
        samples: vec![q0],
        aux: vec![0.0; naux],
        naux,
        events: Vec::new(),
        termination: Termination::TimeLimit,
        steps_accepted: 0,
        steps_rejected: 0,
    };

    let mut t = q0.t;
    let mut q = q0.q;
    let mut f = eval_field(field, t, q)?;
    let mut aux_vals = vec![0.0f64; naux];
    let mut aux_f: Vec<f64> = aux.iter().map(|a| a(t, q)).collect();
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(&State::new(t, q))).collect();

    let mut h = initial_step(field, t, q, f, t_end, tol)?;
    let mut facold: f64 = 1e-4;

    loop {
        let remaining = t_end - t;
        if remaining <= f64::EPSILON * t.abs().max(1.0) {
            traj.termination = Termination::TimeLimit;
            break;
        }
        if traj.steps_accepted >= tol.max_steps {
            traj.termination = Termination::StepBudget;
            break;
        }
        let mut clamped = false;
        if h >= remaining {
            h = remaining;
            clamped = true;
        }

        let out = dopri5_stages(field, t, q, f, h, tol, aux)?;

        let fac11 = out.err.powf(EXPO1);
        if out.err <= 1.0 {
            // Accepted. Lund-stabilized factor uses the previous error.
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FACC2, FACC1);
            facold = out.err.max(1e-4);
            let t_next = if clamped { t_end } else { t + h };
            let q_next = out.q_next;
            let aux_next: Vec<f64> = (0..naux).map(|m| aux_vals[m] + out.aux_inc[m]).collect();

            // Event pass over this segment.
            let seg = Segment {
                t0: t,
                t1: t_next,
                q0: q,
                q1: q_next,
                f0: f,
                f1: out.f_next,
                aux0: &aux_vals,
                aux1: &aux_next,
                aux_f0: &aux_f,
                aux_f1: &out.aux_f_next,
            };
            let mut hits: Vec<(usize, f64, State, f64)> = Vec::new();
            for (i, spec) in events.iter().enumerate() {
                let g1 = (spec.g)(&State::new(t_next, q_next));
                if crossed(spec.direction, g_prev[i], g1) {
                    let (theta, st, residual) =
                        refine_crossing(&seg, &*spec.g, g_prev[i], g1, tol.event_tol_at(t_next));
                    hits.push((i, theta, st, residual));
                }
                g_prev[i] = g1;
            }
            hits.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));

            let mut terminal_hit: Option<(usize, f64, State)> = None;
            for (i, theta, st, residual) in &hits {
                if let Some((_, t_cut, _)) = &terminal_hit {
                    if theta > t_cut {
                        break;
                    }
                }
                traj.events.push(EventRecord {
                    event_id: events[*i].id.clone(),
                    t_event: st.t,
                    state: *st,
                    residual: *residual,
                    aux: seg.aux_at(*theta),
                });
                if events[*i].terminal && terminal_hit.is_none() {
                    terminal_hit = Some((*i, *theta, *st));
                }
            }

            traj.steps_accepted += 1;

            if let Some((i, theta, st)) = terminal_hit {
                traj.samples.push(st);
                traj.aux.extend(seg.aux_at(theta));
                traj.termination = Termination::TerminalEvent {
                    event_id: events[i].id.clone(),
                };
                break;
            }

            traj.samples.push(State::new(t_next, q_next));
            traj.aux.extend_from_slice(&aux_next);

            t = t_next;
            q = q_next;
            f = out.f_next;
            aux_vals = aux_next;
            aux_f = out.aux_f_next;

            h = (h / fac).min(tol.max_step);
        } else {
            // Rejected: shrink, never grow.
            traj.steps_rejected += 1;
            h /= (fac11 / SAFE).min(FACC1);
            if h < tol.min_step {
                traj.termination = Termination::StepFloor;
                break;
            }
        }
    }

    Ok(traj)
}
