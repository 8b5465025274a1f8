use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },

    #[error("Fock truncation too small: n_max_{mode} = {n_max}")]
    TruncationTooSmall { mode: &'static str, n_max: usize },

    #[error(
        "Fock truncation overflow in the {mode} mode: population {population:.3e} at n_max exceeds {threshold:.0e}"
    )]
    TruncationOverflow { mode: &'static str, population: f64, threshold: f64 },

    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("Poisson sum did not converge within {n_cut} terms (tail mass {tail:.3e})")]
    NonConvergentSum { n_cut: usize, tail: f64 },

    #[error("seed {seed} is used by more than one trajectory")]
    SeedReuse { seed: u64 },

    #[error("stream contains no GATE_COPY events; the trigger filter is inapplicable")]
    NoGateCopies,

    #[error("empty click stream")]
    EmptyStream,

    #[error("background level {dark_level} counts/bin is not below the plateau {plateau} counts/bin")]
    IllPosedBackground { dark_level: f64, plateau: f64 },

    #[error("bin width {target_ps} ps is not a multiple of the source bin width {source_ps} ps")]
    IncommensurateBins { source_ps: u64, target_ps: u64 },

    #[error("too few extrema in window: {maxima} maxima and {minima} minima (need 3 of each)")]
    TooFewExtrema { maxima: usize, minima: usize },

    #[error("curve is flat over the fit window")]
    DegenerateCurve,

    #[error("fit windows do not overlap the curve data")]
    NonOverlappingWindows,

    #[error("best shift lies at the edge of the ±half-period search range ({shift_ns:.2} ns)")]
    ShiftAmbiguous { shift_ns: f64 },

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("malformed record: {0}")]
    Format(String),

    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(key: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { key, reason: reason.into() }
    }

    /// Whether the error comes from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TruncationOverflow { .. }
                | Error::NoSteadyState(_)
                | Error::NonConvergentSum { .. }
                | Error::TooFewExtrema { .. }
                | Error::DegenerateCurve
                | Error::ShiftAmbiguous { .. }
                | Error::IllPosedBackground { .. }
        )
    }
}
