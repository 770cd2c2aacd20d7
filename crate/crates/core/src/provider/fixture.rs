use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One recorded response. Fixture files hold one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub instance_id: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("duplicate instance id `{0}` in fixture")]
    DuplicateId(String),
    #[error("fixture line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn record_fixture(runs: &[(String, String)]) -> Result<String, FixtureError> {
    let mut seen = HashSet::new();
    let mut out = String::new();
    for (instance_id, response) in runs {
        if !seen.insert(instance_id.as_str()) {
            return Err(FixtureError::DuplicateId(instance_id.clone()));
        }
        let entry = FixtureEntry { instance_id: instance_id.clone(), response: response.clone() };
        out.push_str(&serde_json::to_string(&entry).expect("fixture entries serialize"));
        out.push('\n');
    }
    Ok(out)
}

pub fn load_fixture(content: &str) -> Result<Vec<FixtureEntry>, FixtureError> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureEntry = serde_json::from_str(line)
            .map_err(|e| FixtureError::Malformed { line: i + 1, message: e.to_string() })?;
        if !seen.insert(entry.instance_id.clone()) {
            return Err(FixtureError::DuplicateId(entry.instance_id));
        }
        entries.push(entry);
    }
    Ok(entries)
}
