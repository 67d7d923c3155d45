use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("rasterized domain is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("resolution h = {h} too coarse: {detail}")]
    TooCoarse { h: f64, detail: String },
    #[error("domain has no interior cells")]
    EmptyInterior,
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },
    #[error("field is identically zero; the Rayleigh quotient is undefined")]
    ZeroField,
    #[error("field does not match the domain: {0}")]
    FieldMismatch(String),
    #[error(
        "initial field vanishes at interior cell {cell}; a strictly positive start is required"
    )]
    NonPositiveInit { cell: usize },
    #[error(
        "iterate collapsed to zero at sweep {sweep}; use an initial field with larger support"
    )]
    Collapsed { sweep: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("monotonicity in the exponent violated between l = {l_lo} and l = {l_hi}: min(v_lo - v_hi) = {gap:.3e} < -{slack:.3e}")]
    MonotonicityViolated {
        l_lo: f64,
        l_hi: f64,
        gap: f64,
        slack: f64,
    },
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0".into(),
        })
    }
}
