use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The Student's T with `d <= 2` degrees of freedom has no variance.
    #[error("variance is infinite for {degrees_of_freedom} degrees of freedom")]
    InfiniteVariance { degrees_of_freedom: f64 },

    #[error("calibration hypothesis violated: {0}")]
    Calibration(String),

    /// No noise scale reaches the requested privacy level at this `t`.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("privacy contract violated: {0}")]
    PrivacyContract(String),

    #[error("enumeration needs {required} evaluations, budget is {budget}")]
    EnumerationBudget { required: u128, budget: u128 },
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
