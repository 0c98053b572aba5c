use serde_json::json;

/// Exit 2 for bad input, 1 for failures during a run.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "ConfigError".into(),
            message: message.into(),
            code: 2,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: "IoError".into(),
            message: message.into(),
            code: 1,
        }
    }

    /// Single JSON line for stderr.
    pub fn line(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl From<varcycle::Error> for CliError {
    fn from(e: varcycle::Error) -> Self {
        use varcycle::Error as E;
        let kind = match &e {
            E::WeightViolation { .. } => "WeightViolation",
            E::ForbiddenPair { .. } => "ForbiddenPair",
            E::DimensionMismatch { .. } => "DimensionMismatch",
            E::TooFewAgents { .. } => "TooFewAgents",
            E::InvalidParameter { .. } => "InvalidParameter",
            E::WrongRegime { .. } => "WrongRegime",
            E::DegenerateScale(_) => "DegenerateScale",
            E::NonFiniteState { .. } => "NonFiniteState",
            E::RangeError { .. } => "RangeError",
            E::ConditionViolated { .. } => "ConditionViolated",
            E::IndexError { .. } => "IndexError",
            E::NotInvertible { .. } => "NotInvertible",
            E::TooShort { .. } => "TooShort",
            E::InvalidMoments(_) => "InvalidMoments",
        };
        let code = if matches!(e, E::NonFiniteState { .. }) { 1 } else { 2 };
        Self {
            kind: kind.into(),
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::io(e.to_string())
    }
}
