//! Deterministic inputs shared by the benchmarks.

use semprox_core::corpus::UsePair;
use semprox_core::metrics::ReliabilityData;
use semprox_core::Label;

/// Two-coder units where the second coder drifts by one step on every
/// third unit. Cheap to build and free of RNG state.
pub fn two_coder_units(n: usize) -> ReliabilityData {
    let units = (0..n)
        .map(|i| {
            let a = Label::from_index(i % 4).expect("index in range");
            let b = if i % 3 == 0 { Label::from_index((i + 1) % 4).expect("index in range") } else { a };
            vec![a, b]
        })
        .collect();
    ReliabilityData::new(units)
}

pub fn use_pair(i: usize) -> UsePair {
    UsePair {
        instance_id: format!("b{i}"),
        lemma: "bank".into(),
        sentence1: "His parents had left a lot of money in the bank and now it was all gone.".into(),
        sentence2: "Sherrell was sitting on the bank of the river close by.".into(),
        target_offsets1: None,
        target_offsets2: None,
    }
}

/// Model outputs of the kinds seen in practice.
pub const RESPONSES: [&str; 6] = ["4", "Judgment: 3", " 2\n", "The answer is 1.", "3 or 4", "I cannot decide."];
