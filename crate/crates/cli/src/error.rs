use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] tlsim_core::Error),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use tlsim_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical_guard() => 3,
            CliError::Core(E::InvalidParameter { .. } | E::UnknownParameterSet(_) | E::Json(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Validation(_) => 4,
            CliError::Output { .. } => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 4);
        let guard = tlsim_core::Error::GridTooCoarse { reason: "x".into() };
        assert_eq!(CliError::from(guard).exit_code(), 3);
        assert_eq!(CliError::from(tlsim_core::Error::EmptyChannel(1)).exit_code(), 1);
    }
}
