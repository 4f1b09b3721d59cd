use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("unramified polynomial is not irreducible modulo p")]
    NotIrreducibleModP,
    #[error("ramified polynomial is not Eisenstein: {0}")]
    NotEisenstein(String),
    #[error("invalid field description: {0}")]
    InvalidField(String),
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("constant term of the inner series is not topologically nilpotent")]
    ConstantTermNotSmall,
    #[error("Taylor shift by an element of valuation 0")]
    ShiftNotSmall,
    #[error("series is not invertible under composition")]
    NotInvertible,
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("Newton polygon vertex cannot be certified at current precision (degree {0})")]
    PrecisionAmbiguous(usize),
    #[error("no fixed point in the maximal ideal: {0}")]
    NoSmallFixedPoint(String),
    #[error("series does not reduce to T^q modulo the uniformizer")]
    NotDistinguished,
    #[error("Laurent input cannot be handled by multiplicativity: {0}")]
    NotAUnitTail(String),
    #[error("linear coefficient P'(0) vanishes at working precision")]
    LinearCoefficientZero,
    #[error("malformed group data: {0}")]
    MalformedGroupData(String),
    #[error("modulus d = {0} is not prime")]
    DNotPrime(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
