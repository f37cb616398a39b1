//! Audience-specific highlight scoring rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RULES_FORMAT_VERSION: u32 = 1;

const MALE_RULES: &str = include_str!("../../rules/male.json");
const FEMALE_RULES: &str = include_str!("../../rules/female.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audience {
    Male,
    Female,
}

impl fmt::Display for Audience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Audience::Male => "Male",
            Audience::Female => "Female",
        })
    }
}

impl FromStr for Audience {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "male" => Ok(Audience::Male),
            "female" => Ok(Audience::Female),
            other => Err(format!(
                "unknown audience `{other}` (expected male or female)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighlightRule {
    pub category: String,
    pub pattern: String,
    pub points: u32,
    /// Second-tier moments, used only when no first-tier rule applies.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighlightRuleSet {
    pub format_version: u32,
    pub audience: Audience,
    pub rules: Vec<HighlightRule>,
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule set: {0}")]
    Json(#[from] serde_path_to_error::Error<serde_json::Error>),
    #[error("unsupported rule format_version {0}")]
    Version(u32),
    #[error("rule {index}: {reason}")]
    Invalid { index: usize, reason: String },
    #[error("rule set has no rules")]
    Empty,
}

impl HighlightRuleSet {
    /// The bundled rule set for `audience`.
    pub fn builtin(audience: Audience) -> Self {
        let text = match audience {
            Audience::Male => MALE_RULES,
            Audience::Female => FEMALE_RULES,
        };
        Self::from_json(text).expect("bundled rule sets are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let set: Self = serde_path_to_error::deserialize(de)?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule set serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        if self.format_version != RULES_FORMAT_VERSION {
            return Err(RuleError::Version(self.format_version));
        }
        if self.rules.is_empty() {
            return Err(RuleError::Empty);
        }
        for (index, rule) in self.rules.iter().enumerate() {
            let invalid = |reason: &str| RuleError::Invalid {
                index,
                reason: reason.into(),
            };
            if rule.pattern.trim().is_empty() {
                return Err(invalid("empty pattern"));
            }
            if rule.category.trim().is_empty() {
                return Err(invalid("empty category"));
            }
            if !(1..=3).contains(&rule.points) {
                return Err(invalid("points must be 1, 2 or 3"));
            }
        }
        Ok(())
    }

    /// Prompt text: rules grouped by category in file order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut categories: Vec<&str> = Vec::new();
        for rule in &self.rules {
            if !categories.contains(&rule.category.as_str()) {
                categories.push(&rule.category);
            }
        }
        for category in categories {
            out.push_str(&format!("{category}\n"));
            let rules = self.rules.iter().filter(|r| r.category == category);
            let (primary, fallback): (Vec<_>, Vec<_>) = rules.partition(|r| !r.fallback);
            if !primary.is_empty() {
                out.push_str("Typical Highlight Moments:\n");
                for r in primary {
                    out.push_str(&format!("- {} ({} points)\n", r.pattern, r.points));
                }
            }
            if !fallback.is_empty() {
                out.push_str("If none of the above apply, you can choose:\n");
                for r in fallback {
                    out.push_str(&format!("- {} ({} points)\n", r.pattern, r.points));
                }
            }
            out.push('\n');
        }
        out.trim_end().to_string()
    }
}
