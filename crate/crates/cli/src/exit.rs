use std::fmt;

/// Process exit status. Attach one to an error with `.context(...)`;
/// errors without one exit with [`ExitKind::Input`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Input = 1,
    ExtractionEmpty = 2,
    Training = 3,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn of(error: &anyhow::Error) -> ExitKind {
        error.downcast_ref::<ExitKind>().copied().unwrap_or(ExitKind::Input)
    }
}

impl fmt::Display for ExitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExitKind::Input => "invalid input",
            ExitKind::ExtractionEmpty => "extraction produced no samples",
            ExitKind::Training => "training failed",
        })
    }
}

/// Training errors that are about the optimisation itself rather than the
/// configuration.
pub fn is_training_failure(e: &metasel::Error) -> bool {
    matches!(e, metasel::Error::TrainingFailed(_) | metasel::Error::Numeric(_))
}
