use thiserror::Error;

/// A resonant triple `(j, l, k)`: modes `j + l = k` whose denominator vanishes.
pub type Triple = (i64, i64, i64);

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("backward semigroup requested on a field with nonzero fast mode {mode}")]
    NegativeTimeOnFastModes { mode: i64 },
    #[error("zeta = {zeta} too large: zeta^-1 omega_A + 1 = {shifted} > -4 pi^2")]
    ZetaTooLarge { zeta: f64, shifted: f64 },
    #[error("timescale order violated: epsilon = {epsilon} >= threshold {threshold}")]
    TimescaleOrderViolated { epsilon: f64, threshold: f64 },
    #[error("spectral gap N_S - N_F = {gap} is not positive")]
    NonpositiveGap { gap: f64 },
    #[error("inconsistent assumption constants: {0}")]
    InconsistentConstants(String),
    #[error("fixed-point iteration did not converge after {iterations} iterations (last displacement {displacement:e})")]
    NoConvergence { iterations: usize, displacement: f64 },
    #[error("epsilon = {epsilon} is resonant; vanishing denominators at {triples:?}")]
    ResonantEpsilon { epsilon: f64, triples: Vec<Triple> },
    #[error("epsilon = {epsilon} is not a resonance value for k0 = {k0}")]
    NotResonant { epsilon: f64, k0: usize },
    #[error("tail tolerance unreachable: kernel decay {decay} does not dominate forcing growth {growth}")]
    TailToleranceUnreachable { decay: f64, growth: f64 },
    #[error("contraction violated: observed ratios {ratios:?}")]
    ContractionViolated { ratios: Vec<f64> },
    #[error("iteration cap {cap} reached (displacement {displacement:e})")]
    IterationCap { cap: usize, displacement: f64 },
    #[error("step rejected at t = {t}: non-finite state")]
    StepRejected { t: f64 },
    #[error("critical-manifold solve failed at t = {t}: {reason}")]
    CriticalSolveFailed { t: f64, reason: String },
    #[error("defect reached the numerical floor before a fit window existed")]
    DefectBelowFloor,
    #[error("insufficient points for a fit: have {have}, need {need}")]
    InsufficientPoints { have: usize, need: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable category, used by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NegativeTimeOnFastModes { .. } => "negative_time_on_fast_modes",
            Error::ZetaTooLarge { .. } => "zeta_too_large",
            Error::TimescaleOrderViolated { .. } => "timescale_order_violated",
            Error::NonpositiveGap { .. } => "nonpositive_gap",
            Error::InconsistentConstants(_) => "inconsistent_constants",
            Error::NoConvergence { .. } => "no_convergence",
            Error::ResonantEpsilon { .. } => "resonant_epsilon",
            Error::NotResonant { .. } => "not_resonant",
            Error::TailToleranceUnreachable { .. } => "tail_tolerance_unreachable",
            Error::ContractionViolated { .. } => "contraction_violated",
            Error::IterationCap { .. } => "iteration_cap",
            Error::StepRejected { .. } => "step_rejected",
            Error::CriticalSolveFailed { .. } => "critical_solve_failed",
            Error::DefectBelowFloor => "defect_below_floor",
            Error::InsufficientPoints { .. } => "insufficient_points",
            Error::Invalid(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
