//! Quantitative analysis on top of the model catalogue: closed-form
//! references, Lyapunov monitors, crossing sequences, residence-time
//! reports, and the diagonal asymptotics outside the strip.

mod asymptote;
mod bernoulli;
mod crossings;
mod delay;
mod lyapunov;

pub use asymptote::{asymptote_check, AsymptoteReport};
pub use bernoulli::{
    bernoulli_solution, exp_integral, verify_transcritical_delay, y_integral, BernoulliEval,
    TranscriticalDelayReport,
};
pub use crossings::{a_n_growth, crossing_sequences, CrossingReport, GrowthFit, PairCheck};
pub use delay::{delay_report, verify_enhanced_delay, DelayPass, DelayReport, DelayWitness};
pub use lyapunov::{
    centered_rates, lyapunov_series, phi, phi_increment, w, w_from_u, CenteredRate,
    LyapunovSample, LyapunovSeries, MONOTONE_SLACK,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("denominator 1 - x0*I(t) vanishes: blow-up inside ({t_lo}, {t_hi})")]
    BlowUp { t_lo: f64, t_hi: f64 },
    #[error("numeric trajectory disagrees with the closed form: max relative error {max_rel_err:e} exceeds {tol:e}")]
    OracleMismatch { max_rel_err: f64, tol: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("logarithmic singularity at |x| = 1 (x = {x})")]
    SingularLog { x: f64 },
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no residence interval exceeding the requested duration within budget ({crossings} crossings seen)")]
    NotFoundWithinBudget {
        crossings: usize,
        amplitudes: Vec<f64>,
    },
    #[error(transparent)]
    Ode(#[from] crate::ode::OdeError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Quad(#[from] crate::quad::QuadError),
}
