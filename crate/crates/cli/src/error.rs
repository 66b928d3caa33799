use billiard_core::cells::CellError;
use billiard_core::dynamics::DynamicsError;
use billiard_core::enumeration::EnumerationError;
use billiard_core::geometry::GeometryError;
use billiard_core::metric::MetricError;
use billiard_core::perturbation::PerturbError;
use billiard_core::unfolding::UnfoldError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid polygon ({0:?}): {0}")]
    Polygon(GeometryError),
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("{0}")]
    Failed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precision(_) => 2,
            _ => 1,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Polygon(e)
    }
}

impl From<EnumerationError> for CliError {
    fn from(e: EnumerationError) -> Self {
        match e {
            EnumerationError::PrecisionExhausted => CliError::Precision(e.to_string()),
            other => CliError::Failed(format!("{other:?}: {other}")),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Uncertain { .. } => CliError::Precision(e.to_string()),
            other => CliError::Failed(format!("{other:?}: {other}")),
        }
    }
}

impl From<CellError> for CliError {
    fn from(e: CellError) -> Self {
        match e {
            CellError::UncertainOrbit { .. } => CliError::Precision(e.to_string()),
            other => CliError::Failed(format!("{other:?}: {other}")),
        }
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> Self {
        match e {
            PerturbError::Enumeration(inner) => inner.into(),
            PerturbError::ValidationFailed(g) => CliError::Polygon(g),
            other => CliError::Failed(format!("{other:?}: {other}")),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<UnfoldError> for CliError {
    fn from(e: UnfoldError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(format!("csv: {e}"))
    }
}
