use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("quotient has torsion: the span is not saturated")]
    TorsionQuotient,
    #[error("vertices do not span the ambient space")]
    NotFullDimensional,
    #[error("origin is not in the interior of the polytope")]
    OriginNotInterior,
    #[error("point {index} is not a vertex of the hull")]
    NotAVertex { index: usize },
    #[error("polytope out of scale ({dim} dims, {vertices} vertices); supply the face lattice explicitly")]
    OutOfScale { dim: usize, vertices: usize },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("missing slope for lift {lift} on maximal lift {max_lift}")]
    MissingSlope { lift: String, max_lift: String },
    #[error("not a cone of the section: {0}")]
    NotACone(String),
    #[error("exponent clash: {0}")]
    ExponentClash(String),
    #[error("local-system table is not a cocycle on chain {0}")]
    NotACocycle(String),
    #[error("obstruction value on flag {flag} depends on the chart: {first} gives {first_value}, {second} gives {second_value}")]
    WellDefinednessFailure { flag: String, first: String, first_value: String, second: String, second_value: String },
    #[error("cochain is not closed on flag {0}")]
    NotClosed(String),
    #[error("change of frame is singular: {0}")]
    SingularFrame(String),
    #[error("glued transition cocycle fails: {0}")]
    CocycleFailure(String),
    #[error("embedding is not equivariant: {0}")]
    NotEquivariant(String),
    #[error("no admissible preimage: {0}")]
    NoAdmissiblePreimage(String),
    #[error("search budget exceeded (bound {bound})")]
    SearchBudgetExceeded { bound: usize },
    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },
    #[error("dangling reference at {field}: unknown {name}")]
    DanglingReference { field: String, name: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// True for errors that reflect malformed input rather than a
    /// mathematical verdict.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. }
                | Error::DanglingReference { .. }
                | Error::IndexMismatch(_)
                | Error::MissingSlope { .. }
                | Error::Lattice(_)
                | Error::Invalid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
