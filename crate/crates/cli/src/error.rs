use qbeat_core::Error;

/// A failure tied to the configuration key, flag or input that caused it.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(Error),

    #[error("`{key}`: {source}")]
    At {
        key: String,
        #[source]
        source: Error,
    },

    #[error("`{key}`: {reason}")]
    Usage { key: String, reason: String },
}

impl CliError {
    pub fn at(key: impl Into<String>) -> impl FnOnce(Error) -> CliError {
        let key = key.into();
        move |source| match source {
            // Already names its key.
            e @ Error::Config { .. } => CliError::Config(e),
            source => CliError::At { key, source },
        }
    }

    pub fn usage(key: impl Into<String>, reason: impl Into<String>) -> CliError {
        CliError::Usage { key: key.into(), reason: reason.into() }
    }

    /// 2 for numerical failures, 1 for everything the user can fix in the input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::At { source, .. } if source.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            e @ Error::Config { .. } => CliError::Config(e),
            source => CliError::At { key: "--config".into(), source },
        }
    }
}
