//! Batch annotation of use-pair semantic proximity with chat-completion
//! models.
//!
//! The crate covers the whole loop: gold filtering and seeded splits
//! ([`corpus`]), guideline normalization ([`guidelines`]), prompt assembly
//! ([`prompt`]), backends ([`provider`]), response parsing ([`parse`]),
//! agreement metrics ([`metrics`]) and multi-trial runs and sweeps
//! ([`runner`]).

pub mod corpus;
pub mod guidelines;
pub mod metrics;
pub mod parse;
pub mod prompt;
pub mod provider;
pub mod runner;
pub mod scale;

pub use corpus::{DataSplit, GoldInstance, JudgmentRecord, LabelHistogram, SplitSizes, TutorialExample, UsePair};
pub use metrics::{AgreementReport, Alpha, Annotation, AnnotationFailure, Metric, ReliabilityData};
pub use parse::{parse_judgment, Judgment, ParseFailure};
pub use prompt::{PromptBuilder, PromptSpec, Strategy};
pub use provider::{CompletionResult, ModelConfig, Provider, ProviderError};
pub use runner::{Grid, RunOptions, SweepResult, TrialResult};
pub use scale::{Label, RawLabel};
