//! Reading a scale judgment out of free-form completion text.
//!
//! The parser is deliberately conservative: it accepts a response only when
//! it contains exactly one run of ASCII digits and that run is a scale value.
//! Answers such as "2 out of 4" are rejected rather than guessed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scale::Label;

/// A model judgment on the 4-point scale.
pub type Judgment = Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    #[error("blank response")]
    Empty,
    #[error("no number in response")]
    NonNumeric,
    #[error("number outside the 1-4 scale")]
    OutOfRange,
    #[error("more than one number in response")]
    Ambiguous,
}

pub fn parse_judgment(text: &str) -> Result<Judgment, ParseFailure> {
    if text.trim().is_empty() {
        return Err(ParseFailure::Empty);
    }
    let mut runs = text
        .split(|c: char| !c.is_ascii_digit())
        .filter(|run| !run.is_empty());
    let run = runs.next().ok_or(ParseFailure::NonNumeric)?;
    if runs.next().is_some() {
        return Err(ParseFailure::Ambiguous);
    }
    let digits = run.trim_start_matches('0');
    if digits.len() != 1 {
        return Err(ParseFailure::OutOfRange);
    }
    Label::new(digits.as_bytes()[0] - b'0').ok_or(ParseFailure::OutOfRange)
}
