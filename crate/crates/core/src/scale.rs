//! The 4-point semantic relatedness scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A label on the relatedness scale: 1 unrelated, 2 distantly related,
/// 3 closely related, 4 identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u8);

impl Label {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 4;

    /// All labels in scale order.
    pub const ALL: [Label; 4] = [Label(1), Label(2), Label(3), Label(4)];

    pub fn new(value: u8) -> Option<Label> {
        (Self::MIN..=Self::MAX).contains(&value).then_some(Label(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based position on the scale, usable as an array index.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(index: usize) -> Option<Label> {
        u8::try_from(index + 1).ok().and_then(Label::new)
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "Unrelated",
            2 => "Distantly related",
            3 => "Closely related",
            _ => "Identical",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0.to_string())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u8>()
            .ok()
            .and_then(Label::new)
            .ok_or_else(|| format!("`{s}` is not a label on the 1-4 scale"))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = u8::deserialize(deserializer)?;
        Label::new(raw).ok_or_else(|| serde::de::Error::custom(format!("label {raw} outside 1-4")))
    }
}

/// A human judgment: a scale label, or an explicit refusal to decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawLabel {
    Scale(Label),
    CannotDecide,
}

impl RawLabel {
    /// Parses the judgment-file encoding: `1`-`4`, or `0` / `-` for CannotDecide.
    pub fn parse(field: &str) -> Option<RawLabel> {
        match field {
            "0" | "-" => Some(RawLabel::CannotDecide),
            other => other.parse::<Label>().ok().map(RawLabel::Scale),
        }
    }

    pub fn label(self) -> Option<Label> {
        match self {
            RawLabel::Scale(label) => Some(label),
            RawLabel::CannotDecide => None,
        }
    }
}

impl fmt::Display for RawLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawLabel::Scale(label) => label.fmt(f),
            RawLabel::CannotDecide => f.write_str("-"),
        }
    }
}
