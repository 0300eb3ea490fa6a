//! Label-based grounding of natural-language targets onto screenshot
//! elements.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::state::{RenderedElement, Screenshot};

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "on", "in", "of", "to", "at", "for", "with", "into", "onto", "from", "and",
    "my", "your", "this", "that", "click", "press", "tap", "select", "open",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grounding {
    pub element: String,
    /// Other elements that matched equally well; the lowest id won.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tied_with: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("empty target description")]
    EmptyDescription,
    #[error("no element matches `{0}`")]
    GroundingFailure(String),
}

pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut space = true;
    for c in text.chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
            space = false;
        } else if !space {
            out.push(' ');
            space = true;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

fn tokens(text: &str) -> BTreeSet<String> {
    normalize(text)
        .split(' ')
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(ToString::to_string)
        .collect()
}

fn element_tokens(e: &RenderedElement) -> BTreeSet<String> {
    let mut set = tokens(&e.label);
    set.extend(tokens(&e.id.replace('_', " ")));
    set.extend(e.kind.synonyms().iter().map(|s| s.to_string()));
    set
}

fn pick(mut ids: Vec<&str>) -> Option<Grounding> {
    ids.sort_unstable();
    ids.dedup();
    let (first, rest) = ids.split_first()?;
    Some(Grounding {
        element: first.to_string(),
        tied_with: rest.iter().map(|s| s.to_string()).collect(),
    })
}

/// Resolves `description` to one element of `shot`.
///
/// Normalized exact label (or id) matches win; otherwise every meaningful
/// word of the description must appear among the element's label, id and
/// kind words. Ties go to the lexicographically lowest id.
pub fn ground(shot: &Screenshot, description: &str) -> Result<Grounding, GroundError> {
    let wanted = normalize(description);
    if wanted.is_empty() {
        return Err(GroundError::EmptyDescription);
    }
    let exact: Vec<&str> = shot
        .elements
        .iter()
        .filter(|e| normalize(&e.label) == wanted || normalize(&e.id.replace('_', " ")) == wanted)
        .map(|e| e.id.as_str())
        .collect();
    if let Some(g) = pick(exact) {
        return Ok(g);
    }
    let want = tokens(description);
    if want.is_empty() {
        return Err(GroundError::GroundingFailure(description.to_string()));
    }
    let subset: Vec<&str> = shot
        .elements
        .iter()
        .filter(|e| want.is_subset(&element_tokens(e)))
        .map(|e| e.id.as_str())
        .collect();
    pick(subset).ok_or_else(|| GroundError::GroundingFailure(description.to_string()))
}
