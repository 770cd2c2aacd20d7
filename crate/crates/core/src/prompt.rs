//! Prompt templates and fine-tuning file emission.
//!
//! Every template puts the role preamble in the system message and the live
//! instance in the user message. Placeholders are substituted verbatim: no
//! escaping, no trimming.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldInstance, UsePair};
use crate::guidelines::NormalizedGuidelines;

/// Common opening of every system message.
pub const ROLE_PREFIX: &str = "You are a highly trained text data annotation tool capable of providing";

pub const PREAMBLE_SUBJECTIVE: &str =
    "You are a highly trained text data annotation tool capable of providing subjective responses.";

pub const PREAMBLE_CONTEXTUAL: &str =
    "You are a highly trained text data annotation tool capable of providing judgments based on contexts provided to you.";

const CUSTOM1_TASK: &str = "Your task is to rate the degree of semantic relatedness between two uses of a target word in the given sentences.";

const CUSTOM2_TASK: &str = "Rate the semantic similarity of the target word in these sentences 1 and 2. \
Consider only the objects/concepts the word forms refer to: ignore any common etymology and metaphorical similarity! \
Ignore case! Ignore number (cat/Cats = identical meaning). \
If target is emoji then rate by its contextual function. \
Homonyms (like bat the animal vs bat in baseball) count as unrelated. \
Output numeric rating: 1 is unrelated; 2 is distantly related; 3 is closely related; 4 is identical meaning.\
Your response should align with a human's succinct judgment.";

const FINETUNE_QUERY_TASK: &str = "Annotate this pair of given sentences";

const CUSTOM_INSTRUCTION: &str = "Please provide a judgment as a single integer. For example, if your judgment is Identical, then provide 4. If your judgment is Unrelated, provide 1.";

const AUTO_INSTRUCTION: &str = "Please provide a judgment as a single integer for Sentence 1 and Sentence 2 above. For example, if your judgment is Identical, then provide 4. If your judgment is Unrelated, provide 1.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Custom1,
    Custom2,
    FinetuneQuery,
    AutoGuidelines,
    AutoGuidelinesTutorial,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Custom1,
        Strategy::Custom2,
        Strategy::FinetuneQuery,
        Strategy::AutoGuidelines,
        Strategy::AutoGuidelinesTutorial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Custom1 => "custom1",
            Strategy::Custom2 => "custom2",
            Strategy::FinetuneQuery => "finetune_query",
            Strategy::AutoGuidelines => "auto_guidelines",
            Strategy::AutoGuidelinesTutorial => "auto_guidelines_tutorial",
        }
    }

    pub fn needs_guidelines(self) -> bool {
        matches!(self, Strategy::AutoGuidelines | Strategy::AutoGuidelinesTutorial)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CustomVariant {
    V1,
    V2,
}

/// A fully assembled message pair for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_message: String,
    pub user_message: String,
    pub strategy: Strategy,
    pub instance_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("guideline text is empty")]
    EmptyGuidelines,
    #[error("strategy `{0}` requires guidelines")]
    MissingGuidelines(Strategy),
}

fn instance_lines(pair: &UsePair) -> String {
    format!(
        "Sentence 1: {}\nSentence 2: {}\nTarget word: {}",
        pair.sentence1, pair.sentence2, pair.lemma
    )
}

pub fn build_custom_prompt(variant: CustomVariant, pair: &UsePair) -> PromptSpec {
    let (task, strategy) = match variant {
        CustomVariant::V1 => (CUSTOM1_TASK, Strategy::Custom1),
        CustomVariant::V2 => (CUSTOM2_TASK, Strategy::Custom2),
    };
    PromptSpec {
        system_message: PREAMBLE_SUBJECTIVE.to_string(),
        user_message: format!("{task}\n{}\n{CUSTOM_INSTRUCTION}", instance_lines(pair)),
        strategy,
        instance_id: pair.instance_id.clone(),
    }
}

/// Guidelines (and an optional tutorial block) go to the system message. An
/// empty tutorial block is the same as none.
pub fn build_auto_prompt(
    guidelines: &NormalizedGuidelines,
    tutorial: Option<&str>,
    pair: &UsePair,
) -> Result<PromptSpec, PromptError> {
    let text = guidelines.text.trim_end_matches(['\n', '\r']);
    if text.trim().is_empty() {
        return Err(PromptError::EmptyGuidelines);
    }
    let tutorial = tutorial
        .map(|t| t.trim_end_matches(['\n', '\r']))
        .filter(|t| !t.is_empty());
    let (system_message, strategy) = match tutorial {
        None => (format!("{PREAMBLE_SUBJECTIVE}\n{text}"), Strategy::AutoGuidelines),
        Some(block) => (
            format!("{PREAMBLE_CONTEXTUAL}\n{text}\n{block}"),
            Strategy::AutoGuidelinesTutorial,
        ),
    };
    Ok(PromptSpec {
        system_message,
        user_message: format!("{}\n{AUTO_INSTRUCTION}", instance_lines(pair)),
        strategy,
        instance_id: pair.instance_id.clone(),
    })
}

/// Query template for a model fine-tuned on the custom-2 prompt.
pub fn build_finetune_query_prompt(pair: &UsePair) -> PromptSpec {
    PromptSpec {
        system_message: PREAMBLE_SUBJECTIVE.to_string(),
        user_message: format!("{FINETUNE_QUERY_TASK}\n{}", instance_lines(pair)),
        strategy: Strategy::FinetuneQuery,
        instance_id: pair.instance_id.clone(),
    }
}

/// Builds prompts for one strategy, holding whatever guideline material the
/// strategy needs.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    strategy: Strategy,
    guidelines: Option<NormalizedGuidelines>,
    tutorial: Option<String>,
}

impl PromptBuilder {
    pub fn new(
        strategy: Strategy,
        guidelines: Option<NormalizedGuidelines>,
        tutorial: Option<String>,
    ) -> Result<Self, PromptError> {
        if strategy.needs_guidelines() {
            match &guidelines {
                None => return Err(PromptError::MissingGuidelines(strategy)),
                Some(g) if g.text.trim().is_empty() => return Err(PromptError::EmptyGuidelines),
                Some(_) => {}
            }
        }
        Ok(PromptBuilder { strategy, guidelines, tutorial })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn build(&self, pair: &UsePair) -> Result<PromptSpec, PromptError> {
        match self.strategy {
            Strategy::Custom1 => Ok(build_custom_prompt(CustomVariant::V1, pair)),
            Strategy::Custom2 => Ok(build_custom_prompt(CustomVariant::V2, pair)),
            Strategy::FinetuneQuery => Ok(build_finetune_query_prompt(pair)),
            Strategy::AutoGuidelines | Strategy::AutoGuidelinesTutorial => {
                let guidelines = self
                    .guidelines
                    .as_ref()
                    .ok_or(PromptError::MissingGuidelines(self.strategy))?;
                let tutorial = match self.strategy {
                    Strategy::AutoGuidelinesTutorial => self.tutorial.as_deref(),
                    _ => None,
                };
                let mut spec = build_auto_prompt(guidelines, tutorial, pair)?;
                spec.strategy = self.strategy;
                Ok(spec)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// One line of a chat-format fine-tuning file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneRecord {
    pub messages: Vec<ChatMessage>,
}

impl FinetuneRecord {
    pub fn new(system: &str, user: &str, assistant: &str) -> Self {
        let msg = |role: &str, content: &str| ChatMessage { role: role.into(), content: content.into() };
        FinetuneRecord { messages: vec![msg("system", system), msg("user", user), msg("assistant", assistant)] }
    }
}

/// Serializes the training split with the custom-2 prompt and the gold label
/// as the assistant turn, one JSON record per line.
pub fn emit_finetune_dataset(train: &[GoldInstance]) -> String {
    let mut out = String::new();
    for gold in train {
        let prompt = build_custom_prompt(CustomVariant::V2, &gold.pair);
        let record = FinetuneRecord::new(&prompt.system_message, &prompt.user_message, &gold.gold_label.to_string());
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FinetuneFormatError {
    #[error("line {line}: {message}")]
    InvalidJson { line: usize, message: String },
    #[error("line {line}: expected roles system, user, assistant")]
    WrongRoles { line: usize },
    #[error("line {line}: assistant content `{content}` is not a scale label")]
    BadAssistant { line: usize, content: String },
}

/// Checks a fine-tuning file against the record schema and returns the
/// number of records.
pub fn validate_finetune_file(content: &str) -> Result<usize, FinetuneFormatError> {
    let mut count = 0;
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        let record: FinetuneRecord = serde_json::from_str(line)
            .map_err(|e| FinetuneFormatError::InvalidJson { line: line_no, message: e.to_string() })?;
        let roles: Vec<&str> = record.messages.iter().map(|m| m.role.as_str()).collect();
        if roles != ["system", "user", "assistant"] {
            return Err(FinetuneFormatError::WrongRoles { line: line_no });
        }
        let content = &record.messages[2].content;
        if !matches!(content.as_str(), "1" | "2" | "3" | "4") {
            return Err(FinetuneFormatError::BadAssistant { line: line_no, content: content.clone() });
        }
        count += 1;
    }
    Ok(count)
}
