use std::fmt;
use std::process::ExitCode;

/// A command failure tagged with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, bad configuration or a missing precondition. Exit code 2.
    Invalid(anyhow::Error),
    /// The work itself failed: provider, network or filesystem. Exit code 1.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Invalid(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, err) = match self {
            Failure::Invalid(e) => ("invalid input", e),
            Failure::Runtime(e) => ("failed", e),
        };
        write!(f, "{kind}: {err:#}")
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn runtime(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub fn invalid(message: impl fmt::Display) -> Failure {
    Failure::Invalid(anyhow::anyhow!("{message}"))
}
