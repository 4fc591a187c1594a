use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A Hermitian factorization met a non-positive (or numerically zero) pivot.
    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// The condensed trial operator is singular: the discrete inf-sup
    /// condition fails for this trial/test pair.
    #[error(
        "discrete inf-sup failure: condensed operator singular at pivot {pivot} (value {value:e})"
    )]
    DiscreteInfSup { pivot: usize, value: f64 },

    #[error("local Gram matrix of element {element} is not positive definite (pivot {pivot}, value {value:e})")]
    ElementGram {
        element: usize,
        pivot: usize,
        value: f64,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of a numerical factorization, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::DiscreteInfSup { .. }
            | Error::ElementGram { .. }
            | Error::Singular(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
