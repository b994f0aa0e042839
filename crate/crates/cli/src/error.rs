use thiserror::Error;
use vspectra::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("writing {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 0 success, 1 output failure, 2 input error, 3 spectral degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::ZeroInSpectrum { .. } | CoreError::EigenSolver) => 3,
            CliError::Output { .. } => 1,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let zero = CliError::Core(CoreError::ZeroInSpectrum {
            condition: 1e12,
            suggested_shift: 1.0,
        });
        assert_eq!(zero.exit_code(), 3);
        assert_eq!(CliError::Core(CoreError::EigenSolver).exit_code(), 3);
        assert_eq!(CliError::Core(CoreError::NoRightConditions).exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    }
}
