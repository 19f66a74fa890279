use compreg_core::{DataError, Error};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            Error::NonPositivePart { .. }
            | Error::DimensionTooSmall(_)
            | Error::DimensionMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::NonFinite(_)
            | Error::NotInHyperplane(_) => CliError::Data(e.to_string()),
            Error::SingularBandwidth
            | Error::SingularCovariance
            | Error::AllWeightsZero
            | Error::SingularDesign(_)
            | Error::ZeroScale
            | Error::NoBracket
            | Error::DegenerateDraw(_)
            | Error::FoldTooSmall
            | Error::NoUsableBandwidth(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Model(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
