use std::fmt;

use thiserror::Error;

/// A single violated model invariant, addressed by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct InvalidParameter {
    pub field: String,
    pub reason: String,
}

impl InvalidParameter {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for InvalidParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InvalidParameter({}): {}", self.field, self.reason)
    }
}

/// Every invariant a model failed, in field order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport(pub Vec<InvalidParameter>);

impl ValidationReport {
    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|v| v.field.as_str())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),

    #[error("DegenerateRobin: {condition} has vanishing denominator {denominator}")]
    DegenerateRobin {
        condition: &'static str,
        denominator: f64,
    },

    #[error("UnsupportedBoundary: {0} has no implemented eigenbasis")]
    UnsupportedBoundary(&'static str),

    #[error("TailNotCertified: mode cap {cap} reached with tails (mu {tail_mu:e}, nu {tail_nu:e}) above {tol:e}")]
    TailNotCertified {
        cap: usize,
        tail_mu: f64,
        tail_nu: f64,
        tol: f64,
    },

    #[error("DegenerateVariance: variance {variance:e} at t = {t}, x = {x}")]
    DegenerateVariance { t: f64, x: f64, variance: f64 },

    #[error("NonPositiveDiffusion: G = {value:e} at t = {t}, x = {x}")]
    NonPositiveDiffusion { t: f64, x: f64, value: f64 },

    #[error("NegativeDiffusion: diffusion {value:e} at s = {s}")]
    NegativeDiffusion { s: f64, value: f64 },

    #[error("DegenerateInitialLaw: initial variance vanishes at x = {x}")]
    DegenerateInitialLaw { x: f64 },

    #[error("DegenerateLaw: {0}")]
    DegenerateLaw(&'static str),

    #[error("WindowViolation: x = {x} outside ({lower}, {upper})")]
    WindowViolation { x: f64, lower: f64, upper: f64 },

    #[error("RegionViolation: (u, x) = ({u}, {x}) lies outside D1 and D2")]
    RegionViolation { u: f64, x: f64 },

    #[error("QuadratureFailure: {0}")]
    QuadratureFailure(String),

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Short class name used on the diagnostic stream.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "InvalidParameter",
            Error::DegenerateRobin { .. } => "DegenerateRobin",
            Error::UnsupportedBoundary(_) => "UnsupportedBoundary",
            Error::TailNotCertified { .. } => "TailNotCertified",
            Error::DegenerateVariance { .. } => "DegenerateVariance",
            Error::NonPositiveDiffusion { .. } => "NonPositiveDiffusion",
            Error::NegativeDiffusion { .. } => "NegativeDiffusion",
            Error::DegenerateInitialLaw { .. } => "DegenerateInitialLaw",
            Error::DegenerateLaw(_) => "DegenerateLaw",
            Error::WindowViolation { .. } => "WindowViolation",
            Error::RegionViolation { .. } => "RegionViolation",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// True for errors caused by bad input parameters rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::DegenerateRobin { .. }
                | Error::UnsupportedBoundary(_)
                | Error::InvalidArgument(_)
        )
    }
}

impl From<ValidationReport> for Error {
    fn from(r: ValidationReport) -> Self {
        Error::Invalid(r)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
