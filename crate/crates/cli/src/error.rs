//! Errors with stable exit codes.

use storycut_core::editing::baseline::BaselineError;
use storycut_core::editing::scoring::ScoringError;
use storycut_core::editing::EditError;
use storycut_core::io::export::ExportError;
use storycut_core::io::IoError;
use storycut_core::metrics::MetricError;
use storycut_core::understanding::dialogue::DialogueError;
use storycut_core::understanding::pipeline::UnderstandError;
use storycut_core::understanding::provider::CallError;
use storycut_core::understanding::segmentation::SegmentationError;
use storycut_core::understanding::speakers::SpeakerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments, or unreadable files. Exit code 1.
    #[error("config: {0}")]
    Config(String),
    /// Malformed input file or model reply. Exit code 2.
    #[error("parse: {0}")]
    Parse(String),
    /// A model provider or external tool failed. Exit code 3.
    #[error("provider: {0}")]
    Provider(String),
    /// Well-formed input that breaks a rule of the pipeline. Exit code 4.
    #[error("validation: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

fn call(e: &CallError, context: &str) -> CliError {
    match e {
        CallError::Provider(p) => CliError::Provider(format!("{context}{p}")),
        CallError::Parse(p) => CliError::Parse(format!("{context}model reply: {p}")),
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => CliError::Config(e.to_string()),
            IoError::Schema { .. } => CliError::Parse(e.to_string()),
        }
    }
}

impl From<EditError> for CliError {
    fn from(e: EditError) -> Self {
        match &e {
            EditError::InvalidK | EditError::Pool(_) => CliError::Config(e.to_string()),
            EditError::Scoring(ScoringError::Call(c)) => call(c, "scoring: "),
            EditError::Boundary(c) => call(c, "boundary selection: "),
            EditError::Prune(c) => call(c, "pruning: "),
            EditError::EmptySeries
            | EditError::EmptyHighlights
            | EditError::NoWindows
            | EditError::Scoring(ScoringError::MissingNarration { .. }) => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match &e {
            BaselineError::Call(c) => call(c, "baseline: "),
            BaselineError::EmptyInput | BaselineError::EmptyPlan => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

impl From<UnderstandError> for CliError {
    fn from(e: UnderstandError) -> Self {
        let c = match &e {
            UnderstandError::Provider { .. } => return CliError::Provider(e.to_string()),
            UnderstandError::Characters { source, .. } => Some(source),
            UnderstandError::Dialogue {
                source: DialogueError::Call(c),
                ..
            }
            | UnderstandError::Speakers {
                source: SpeakerError::Call(c),
                ..
            }
            | UnderstandError::Segmentation {
                source: SegmentationError::Call(c),
                ..
            } => Some(c),
            UnderstandError::Segmentation {
                source: SegmentationError::Fusion(_),
                ..
            } => return CliError::Provider(e.to_string()),
            _ => None,
        };
        match c {
            Some(c) => call(c, ""),
            None => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Io(io) => io.into(),
            ExportError::Tool { .. } => CliError::Provider(e.to_string()),
            ExportError::MissingSource(_)
            | ExportError::OutOfBounds { .. }
            | ExportError::InvalidPlan(_) => CliError::Validation(e.to_string()),
        }
    }
}
