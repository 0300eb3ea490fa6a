use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{CodeArtifact, Dialect, Evaluation, Stage};

/// Minimum evaluation score for an artifact to be kept.
pub const RETENTION_THRESHOLD: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub source: String,
    pub dialect: Dialect,
    pub score: u8,
}

/// Retained programs keyed by task signature. Serializes as a plain map
/// `{signature: {source, dialect, score}}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolLibrary {
    entries: BTreeMap<String, LibraryEntry>,
}

impl ToolLibrary {
    pub fn new() -> Self {
        ToolLibrary::default()
    }

    /// Drops entries below the threshold (e.g. from a hand-edited file).
    pub fn from_entries(entries: BTreeMap<String, LibraryEntry>) -> Self {
        let entries = entries
            .into_iter()
            .filter(|(_, e)| e.score >= RETENTION_THRESHOLD && e.score <= 10)
            .collect();
        ToolLibrary { entries }
    }

    pub fn get(&self, signature: &str) -> Option<&LibraryEntry> {
        self.entries.get(signature)
    }

    /// The retained program for a signature as a reusable artifact.
    pub fn artifact(&self, signature: &str) -> Option<CodeArtifact> {
        self.entries.get(signature).map(|e| CodeArtifact {
            source: e.source.clone(),
            dialect: e.dialect,
            stage: Stage::Init,
            task_signature: String::from(signature),
            revision: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LibraryEntry)> {
        self.entries.iter()
    }

    pub fn min_score(&self) -> Option<u8> {
        self.entries.values().map(|e| e.score).min()
    }
}

/// Upserts `code` when it was judged accomplished with a score at or above
/// the threshold and does not score lower than the existing entry. Returns
/// whether the library changed.
pub fn retain(lib: &mut ToolLibrary, code: &CodeArtifact, eval: &Evaluation) -> bool {
    if !eval.accomplished() || eval.score < RETENTION_THRESHOLD {
        return false;
    }
    if let Some(existing) = lib.entries.get(&code.task_signature) {
        if existing.score > eval.score || (existing.score == eval.score && existing.source == code.source) {
            return false;
        }
    }
    lib.entries.insert(
        code.task_signature.clone(),
        LibraryEntry {
            source: code.source.clone(),
            dialect: code.dialect,
            score: eval.score,
        },
    );
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codex::Judge;
    use proptest::prelude::*;

    fn eval(score: u8) -> Evaluation {
        Evaluation {
            judge: Judge::Accomplished,
            score,
            rationale: String::new(),
            score_clamped: false,
        }
    }

    fn art(src: &str) -> CodeArtifact {
        CodeArtifact::init(src, Dialect::Shell, "count files").unwrap()
    }

    #[test]
    fn threshold_examples() {
        let mut lib = ToolLibrary::new();
        assert!(!retain(&mut lib, &art("ls"), &eval(7)));
        assert!(lib.is_empty());
        assert!(retain(&mut lib, &art("ls | wc -l"), &eval(9)));
        assert_eq!(lib.len(), 1);
    }

    #[test]
    fn higher_score_replaces() {
        let mut lib = ToolLibrary::new();
        retain(&mut lib, &art("a"), &eval(8));
        assert!(retain(&mut lib, &art("b"), &eval(9)));
        assert_eq!(lib.get(&art("b").task_signature).unwrap().source, "b");
        assert!(!retain(&mut lib, &art("c"), &eval(8)));
        assert_eq!(lib.get(&art("b").task_signature).unwrap().score, 9);
    }

    #[test]
    fn not_accomplished_never_retained() {
        let mut lib = ToolLibrary::new();
        let mut e = eval(10);
        e.judge = Judge::NotAccomplished;
        assert!(!retain(&mut lib, &art("a"), &e));
    }

    proptest! {
        #[test]
        fn retention_soundness(ops in proptest::collection::vec((0u8..4, 0u8..=10, any::<bool>()), 0..60)) {
            let mut lib = ToolLibrary::new();
            let mut best: BTreeMap<u8, u8> = BTreeMap::new();
            for (sig, score, ok) in ops {
                let mut c = art("x");
                c.task_signature = alloc::format!("t{sig}");
                c.source = alloc::format!("echo {score}");
                let mut e = eval(score);
                if !ok { e.judge = Judge::NotAccomplished; }
                retain(&mut lib, &c, &e);
                if ok && score >= RETENTION_THRESHOLD {
                    let b = best.entry(sig).or_insert(score);
                    *b = (*b).max(score);
                }
                prop_assert!(lib.min_score().is_none_or(|m| m >= RETENTION_THRESHOLD));
            }
            for (sig, score) in best {
                prop_assert_eq!(lib.get(&alloc::format!("t{sig}")).map(|e| e.score), Some(score));
            }
        }
    }
}
