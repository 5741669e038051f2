use thiserror::Error;

/// Every failure the library can report. Messages are single lines so the
/// CLI can forward them verbatim as diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("outside Laplace domain: Re(z) = {re} but the transform requires Re(z) < {bound}")]
    OutsideLaplaceDomain { re: f64, bound: f64 },

    #[error("moment not finite on grid representation")]
    MomentNotFinite,

    #[error("grid overflow: support reaches {support} beyond the configured horizon {horizon}")]
    GridOverflow { support: f64, horizon: f64 },

    /// `h(iy)` is (numerically) zero somewhere on the imaginary axis.
    #[error("{}", axis_zero_message(*.y, *.abs_h))]
    AxisZero { y: f64, abs_h: f64 },

    #[error("strip scan inconclusive near z = {re} + {im}i: certificate did not resolve within the depth limit")]
    ScanInconclusive { re: f64, im: f64 },

    #[error(
        "causality violated: inversion inconsistent (negative-time L2 fraction {fraction:.3e} exceeds {tolerance:.1e})"
    )]
    CausalityViolated { fraction: f64, tolerance: f64 },

    #[error("frequency window too small: spectral tail estimate {tail:.3e} exceeds {tolerance:.1e}")]
    FrequencyWindowTooSmall { tail: f64, tolerance: f64 },

    #[error("contraction condition violated: |phi| total variation {rho} >= 1, use the transform route")]
    ContractionViolated { rho: f64 },

    #[error("1 - L[phi] vanishes in strip: |1 - L[phi](z)| = {value:.3e} at z = {re} + {im}i")]
    DenominatorVanishes { re: f64, im: f64, value: f64 },

    #[error("increment contraction fails: integral of |F_eta| = {integral} >= 1")]
    IncrementContraction { integral: f64 },

    #[error("use the stationary SDDE route: delay measure has total mass {mass}, not 0")]
    UseStationaryRoute { mass: f64 },

    #[error("theta not integrable w.r.t. x0(du)")]
    NotIntegrable,

    #[error("kernel horizon too short: tail L2 fraction {fraction:.3e} exceeds {tolerance:.1e}")]
    KernelHorizonTooShort { fraction: f64, tolerance: f64 },

    #[error("insufficient history: need {needed} samples, got {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("window not in asymptotic regime: non-positive value {value} at lag {lag}")]
    NotAsymptotic { lag: f64, value: f64 },

    #[error("lag {lag} beyond path length {length}")]
    LagTooLarge { lag: f64, length: f64 },

    #[error("fixture requires distinct roots")]
    RepeatedRoots,

    #[error("I/O error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

fn axis_zero_message(y: f64, abs_h: f64) -> String {
    if y == 0.0 {
        format!(
            "h(iy)=0 at y=0: delay measure has zero total mass, see stationarity obstruction (|h(0)| = {abs_h:.3e})"
        )
    } else {
        format!("h(iy)=0 at y={y}: characteristic function vanishes on axis (|h| = {abs_h:.3e})")
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
