use smat_core::curriculum::CurriculumError;
use smat_core::dynamics::SimError;
use smat_core::gait::GaitError;
use smat_core::ppo::PpoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, arguments or stage order.
    #[error("{0}")]
    Config(String),
    /// Unreadable or malformed input data.
    #[error("{0}")]
    Data(String),
    /// Training or simulation produced non-finite values.
    #[error("{0}")]
    Diverged(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

impl From<CurriculumError> for CliError {
    fn from(e: CurriculumError) -> Self {
        let msg = e.to_string();
        match e {
            CurriculumError::InvalidTransition(_) | CurriculumError::InvalidPlan(_) | CurriculumError::DimensionMismatch(_) => {
                CliError::Config(msg)
            }
            CurriculumError::Ppo(PpoError::InvalidConfig(_)) => CliError::Config(msg),
            CurriculumError::Sim { .. } | CurriculumError::Update { .. } | CurriculumError::Ppo(_) => {
                CliError::Diverged(msg)
            }
            CurriculumError::CorruptCheckpoint(_)
            | CurriculumError::UnsupportedVersion(_)
            | CurriculumError::Io(_)
            | CurriculumError::Csv(_) => CliError::Data(msg),
        }
    }
}

impl From<GaitError> for CliError {
    fn from(e: GaitError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PpoError> for CliError {
    fn from(e: PpoError) -> Self {
        match e {
            PpoError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Diverged(e.to_string())
    }
}
