//! Exact-match answer scoring and benchmark aggregation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Expected answer of a question-answering task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruth {
    Number(f64),
    Text(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Trim surrounding whitespace and fold case.
    #[default]
    Normalized,
    /// Byte equality.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ScoreResult {
    fn of(correct: bool) -> Self {
        ScoreResult { correct, note: None }
    }
}

fn text_eq(a: &str, b: &str, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Strict => a == b,
        MatchMode::Normalized => {
            let (a, b) = (a.trim(), b.trim());
            a == b || a.to_lowercase() == b.to_lowercase()
        }
    }
}

/// Parses a numeric answer, ignoring surrounding whitespace, currency and
/// percent signs, and thousands separators.
pub fn parse_number(s: &str) -> Option<f64> {
    let cleaned: String = s
        .trim()
        .chars()
        .filter(|c| !matches!(c, '$' | '%' | ',' | '€' | '£'))
        .collect();
    let cleaned = cleaned.trim();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn score_exact(answer: &str, truth: &GroundTruth, mode: MatchMode) -> ScoreResult {
    match truth {
        GroundTruth::Text(t) => ScoreResult::of(text_eq(answer, t, mode)),
        GroundTruth::Number(n) => match parse_number(answer) {
            Some(v) => ScoreResult::of(v == *n),
            None => ScoreResult {
                correct: false,
                note: Some(alloc::format!("unparseable number: {:?}", answer)),
            },
        },
        GroundTruth::List(items) => {
            let parts: Vec<&str> = answer.split(',').collect();
            let ok = parts.len() == items.len()
                && parts.iter().zip(items).all(|(a, t)| text_eq(a.trim(), t.trim(), mode));
            ScoreResult::of(ok)
        }
    }
}

/// `correct / total` as a percentage, rounded half-up to hundredths and
/// returned in hundredths of a percent (2591 = 25.91%). Zero for empty.
pub fn percent_hundredths(correct: u64, total: u64) -> u64 {
    if total == 0 {
        return 0;
    }
    (correct * 20_000 + total) / (2 * total)
}

/// A percentage carried as hundredths, displayed with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pct(pub u64);

impl Pct {
    pub fn of(correct: u64, total: u64) -> Pct {
        Pct(percent_hundredths(correct, total))
    }
}

impl fmt::Display for Pct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        if correct {
            self.correct += 1;
        }
    }

    pub fn pct(&self) -> Pct {
        Pct::of(self.correct, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaiaTask {
    pub id: String,
    pub question: String,
    pub level: u8,
    pub ground_truth: GroundTruth,
    #[serde(default)]
    pub attachments: Vec<String>,
}

impl GaiaTask {
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=3).contains(&self.level) {
            return Err(alloc::format!("task {}: level {} is not 1, 2 or 3", self.id, self.level));
        }
        if self.question.trim().is_empty() {
            return Err(alloc::format!("task {}: empty question", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaiaItem {
    pub id: String,
    pub level: u8,
    pub answer: Option<String>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaiaReport {
    pub per_level: BTreeMap<u8, Tally>,
    pub overall: Tally,
    pub items: Vec<GaiaItem>,
}

impl GaiaReport {
    /// Micro-averaged: overall is total correct over total tasks.
    pub fn from_items(items: Vec<GaiaItem>) -> GaiaReport {
        let mut per_level: BTreeMap<u8, Tally> = BTreeMap::new();
        let mut overall = Tally::default();
        for it in &items {
            per_level.entry(it.level).or_default().add(it.correct);
            overall.add(it.correct);
        }
        GaiaReport {
            per_level,
            overall,
            items,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "3D")]
    ThreeD,
    Recreation,
    Office,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::ThreeD, Category::Recreation, Category::Office];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ThreeD => "3D",
            Category::Recreation => "Recreation",
            Category::Office => "Office",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VibTask {
    pub id: String,
    pub fixture: String,
    pub request: String,
    pub goal: String,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VibItem {
    pub id: String,
    pub category: Category,
    pub success: bool,
    pub rounds_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VibReport {
    pub per_category: BTreeMap<Category, Tally>,
    pub average: Tally,
    pub items: Vec<VibItem>,
}

impl VibReport {
    pub fn from_items(items: Vec<VibItem>) -> VibReport {
        let mut per_category: BTreeMap<Category, Tally> = BTreeMap::new();
        let mut average = Tally::default();
        for it in &items {
            per_category.entry(it.category).or_default().add(it.success);
            average.add(it.success);
        }
        VibReport {
            per_category,
            average,
            items,
        }
    }
}

impl fmt::Display for ScoreResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.correct { "correct" } else { "incorrect" })?;
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

impl From<&str> for GroundTruth {
    fn from(s: &str) -> Self {
        GroundTruth::Text(s.to_string())
    }
}
