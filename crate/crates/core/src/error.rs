use std::fmt;

/// Errors shared across the library.
///
/// Cap exhaustion during orbit iteration is deliberately *not* an error; it is
/// a typed outcome carried by the result types (`OrbitMin`, `PassageOutcome`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// `nu(p, 0)` requested; the valuation of zero is +infinity by convention
    /// and callers must branch before calling.
    ZeroInput,
    /// A 3-adic table at this level would exceed the configured ceiling.
    LevelTooLarge { level: u32, ceiling: u32 },
    /// A projection or oscillation scale is outside the table's level range.
    BadLevel { requested: u32, level: u32 },
    /// Two distributions live on different outcome spaces.
    SpaceMismatch,
    /// An exact enumeration would exceed the configured budget.
    BudgetExceeded { requested: u32, budget: u32 },
    /// A parameter is outside its documented domain.
    BadParameter(String),
    /// An odd-integer range is empty.
    EmptyRange,
    /// A lattice point lies outside the strip `1 <= j <= n/2`.
    OutOfStrip { j: u64, strip_max: u64 },
    /// A window scan would exceed the point budget or the vertical period.
    WindowTooLarge(String),
    /// `f_cond` requested beyond the conditional-enumeration ceiling.
    UnsupportedB { b: u64, max: u64 },
    /// `eps` too large for the white-point factor to dominate `cos(pi*eps)`.
    BadEps,
    /// A value that must be odd was not.
    NotOdd,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroInput => write!(f, "p-adic valuation of zero is +infinity"),
            Error::LevelTooLarge { level, ceiling } => {
                write!(f, "level {level} exceeds ceiling {ceiling}")
            }
            Error::BadLevel { requested, level } => {
                write!(f, "scale {requested} out of range for a level-{level} table")
            }
            Error::SpaceMismatch => write!(f, "distributions live on different outcome spaces"),
            Error::BudgetExceeded { requested, budget } => {
                write!(f, "enumeration at 2^{requested} exceeds budget 2^{budget}")
            }
            Error::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
            Error::EmptyRange => write!(f, "empty odd-integer range"),
            Error::OutOfStrip { j, strip_max } => {
                write!(f, "j = {j} outside the strip [1, {strip_max}]")
            }
            Error::WindowTooLarge(msg) => write!(f, "window too large: {msg}"),
            Error::UnsupportedB { b, max } => {
                write!(f, "conditional enumeration for b = {b} beyond ceiling {max}")
            }
            Error::BadEps => write!(f, "eps too large: cos(pi*eps) exceeds exp(-eps^3)"),
            Error::NotOdd => write!(f, "value must be odd"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
