use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

/// Prompt templates keyed by name. Placeholders are written `{{name}}`;
/// unknown placeholders are left as-is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

pub const PROMPT_NAMES: &[&str] = &[
    "planner",
    "planner_revise",
    "librarian",
    "programmer",
    "programmer_analyze",
    "programmer_refine",
    "programmer_evaluate",
    "viewer",
    "video_analyst",
    "mentor",
];

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        let pairs: [(&str, &str); 10] = [
            ("planner", include_str!("../../prompts/planner.txt")),
            ("planner_revise", include_str!("../../prompts/planner_revise.txt")),
            ("librarian", include_str!("../../prompts/librarian.txt")),
            ("programmer", include_str!("../../prompts/programmer.txt")),
            ("programmer_analyze", include_str!("../../prompts/programmer_analyze.txt")),
            ("programmer_refine", include_str!("../../prompts/programmer_refine.txt")),
            ("programmer_evaluate", include_str!("../../prompts/programmer_evaluate.txt")),
            ("viewer", include_str!("../../prompts/viewer.txt")),
            ("video_analyst", include_str!("../../prompts/video_analyst.txt")),
            ("mentor", include_str!("../../prompts/mentor.txt")),
        ];
        PromptSet {
            templates: pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Replaces (or adds) one template.
    pub fn set(&mut self, name: impl Into<String>, text: impl Into<String>) {
        self.templates.insert(name.into(), text.into());
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        let mut out = self.get(name).unwrap_or_default().to_string();
        for (k, v) in vars {
            let needle = alloc::format!("{{{{{k}}}}}");
            out = out.replace(&needle, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_present() {
        let p = PromptSet::builtin();
        for n in PROMPT_NAMES {
            assert!(p.get(n).is_some_and(|t| !t.is_empty()), "{n}");
        }
    }

    #[test]
    fn placeholders_replaced() {
        let mut p = PromptSet::builtin();
        p.set("t", "a {{x}} b {{y}} {{x}}");
        assert_eq!(p.render("t", &[("x", "1"), ("y", "2")]), "a 1 b 2 1");
    }
}
