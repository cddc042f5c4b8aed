use thiserror::Error;

pub type Result<T, E = MtjError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MtjError {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),

    #[error("not a PMA device: net perpendicular anisotropy field {h_k_eff:.6e} A/m is not positive")]
    NotPma { h_k_eff: f64 },

    #[error("degenerate spin-torque denominator {denominator:.3e} at m·m_p = {m_dot_p:.6} (Λ = {lambda})")]
    DegenerateTorque {
        denominator: f64,
        m_dot_p: f64,
        lambda: f64,
    },

    #[error("cannot build a magnetization state from a zero or non-finite vector")]
    ZeroVector,

    #[error("time step must be positive and finite, got {0:e}")]
    InvalidStep(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("tolerance unattainable at t = {t:.6e} s (theta = {theta}, phi = {phi}, dt = {dt:.3e})")]
    ToleranceUnattainable {
        t: f64,
        theta: f64,
        phi: f64,
        dt: f64,
    },

    #[error("non-finite state at t = {t:.6e} s: m = ({mx}, {my}, {mz}), last step {dt:.3e}")]
    NonFinite {
        t: f64,
        mx: f64,
        my: f64,
        mz: f64,
        dt: f64,
    },

    #[error("ensemble failed: {} run(s) aborted; first: run {} (seed stream {})", .failures.len(), .failures[0].0, .failures[0].1)]
    Ensemble {
        /// (run index, derived stream seed) of each failing member.
        failures: Vec<(usize, u64)>,
        first_error: String,
    },

    #[error("empty sweep grid")]
    EmptyGrid,

    #[error("corner '{corner}' unreachable: no sign change over [{lo}, {hi}] (switching times {t_lo:e} s, {t_hi:e} s vs target {target:e} s)")]
    CornerUnreachable {
        corner: String,
        lo: f64,
        hi: f64,
        t_lo: f64,
        t_hi: f64,
        target: f64,
    },

    #[error("percentile {percentile} undefined: only {switched} of {total} runs switched")]
    UndefinedPercentile {
        percentile: f64,
        switched: usize,
        total: usize,
    },

    #[error("bisection for corner '{0}' did not converge in 60 iterations")]
    NoConvergence(String),

    #[error("corner '{0}' not present in calibration result")]
    MissingCorner(String),

    #[error("invalid model template: {0}")]
    InvalidTemplate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl MtjError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MtjError::ToleranceUnattainable { .. }
                | MtjError::NonFinite { .. }
                | MtjError::Ensemble { .. }
                | MtjError::CornerUnreachable { .. }
                | MtjError::UndefinedPercentile { .. }
                | MtjError::NoConvergence(_)
                | MtjError::DegenerateTorque { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, MtjError::Io(_) | MtjError::Csv(_))
    }
}
