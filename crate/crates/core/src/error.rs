use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Adaptive quadrature did not reach the requested tolerance.
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },
    /// Reference integral tables did not settle within the allowed Gauss orders.
    ReferenceTableNonConvergence { max_change: f64, order: usize },
    DerivativeOrder { order: usize, max: usize },
    InvalidParameter(&'static str),
    UnsupportedDimension(usize),
    EmptyActiveSet,
    /// A cut element cannot reach an interior element through cut neighbors.
    ChainUnreachable { element: usize },
    ChainTooLong { length: usize, max: usize },
    /// A point lies outside the active (fictitious) domain.
    OutsideActiveSet,
    DimensionMismatch { expected: usize, found: usize },
    IndexOutOfRange { index: usize, len: usize },
    InvertedCell { cell: usize, volume: f64 },
    /// A diagonal entry required for Jacobi scaling is not positive.
    NonPositiveDiagonal { row: usize, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::QuadratureNonConvergence { estimate, tolerance } => write!(
                f,
                "adaptive quadrature did not converge (error estimate {estimate:e}, tolerance {tolerance:e})"
            ),
            Error::ReferenceTableNonConvergence { max_change, order } => write!(
                f,
                "reference integrals not converged at Gauss order {order} (max change {max_change:e})"
            ),
            Error::DerivativeOrder { order, max } => {
                write!(f, "derivative order {order} exceeds the configured maximum {max}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::UnsupportedDimension(d) => write!(f, "unsupported spatial dimension {d}"),
            Error::EmptyActiveSet => write!(f, "no grid element intersects the domain"),
            Error::ChainUnreachable { element } => {
                write!(f, "cut element {element} cannot reach an interior element")
            }
            Error::ChainTooLong { length, max } => {
                write!(f, "cut element chain of length {length} exceeds the limit {max}")
            }
            Error::OutsideActiveSet => write!(f, "point lies outside the active grid elements"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::InvertedCell { cell, volume } => {
                write!(f, "cell {cell} has non-positive volume {volume:e}")
            }
            Error::NonPositiveDiagonal { row, value } => {
                write!(f, "diagonal entry {row} is not positive ({value:e})")
            }
        }
    }
}

impl core::error::Error for Error {}
