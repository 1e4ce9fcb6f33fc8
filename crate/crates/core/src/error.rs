use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rate index {0} is outside the domain (indices start at 1)")]
    IndexOutOfDomain(u64),

    #[error("pathological block {block}: log2 rate 2^{cube} is beyond the f64 exponent range (first unrepresentable block is 11)", cube = (*block as u128).pow(3))]
    BlockOutOfRange { block: u64 },

    #[error("rate table holds {len} entries but index {index} was requested")]
    BeyondTable { len: usize, index: u64 },

    #[error("empty index range: {a} > {b}")]
    EmptyRange { a: u64, b: u64 },

    #[error("index {index} exceeds the configured maximum {max}")]
    IndexCap { index: u64, max: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n = {n} is too small for the {k}-fold iterated-log window; minimum admissible n is {min}")]
    WindowDomain { n: u64, k: u32, min: String },

    #[error("i_max = {i_max} exceeds the exact-arithmetic budget of {budget}")]
    ExactBudget { i_max: u64, budget: u64 },

    #[error("weight f({0}) is not a finite positive number")]
    NonFiniteWeight(u64),
}

impl Error {
    /// True for errors caused by numbers outside a representable or budgeted
    /// range, as opposed to malformed input.
    pub fn is_range(&self) -> bool {
        matches!(
            self,
            Error::BlockOutOfRange { .. }
                | Error::IndexCap { .. }
                | Error::ExactBudget { .. }
                | Error::BeyondTable { .. }
        )
    }
}
