//! A deterministic stand-in for the editing model: fixed scene scores,
//! every boundary candidate accepted, nothing pruned.

use std::collections::BTreeMap;

use crate::model::{EpisodeId, SceneSequence};
use crate::prompt;
use crate::understanding::provider::{ChatProvider, ChatRequest, ProviderError};

#[derive(Debug, Clone, Default)]
pub struct AcceptAllEditor {
    scores: BTreeMap<(EpisodeId, u32), u32>,
}

/// Scene references in the rendered listing, with the line's tags.
fn listed(prompt: &str) -> Vec<(EpisodeId, u32, &str)> {
    prompt
        .lines()
        .filter_map(|line| {
            let rest = line.strip_prefix("Episode ")?;
            let (ep, rest) = rest.split_once(", Scene ")?;
            let digits = rest
                .find(|c: char| !c.is_ascii_digit())
                .unwrap_or(rest.len());
            let tags = rest[digits..].split_once(':').map_or("", |(t, _)| t);
            Some((ep.parse().ok()?, rest[..digits].parse().ok()?, tags))
        })
        .collect()
}

fn head(template: &str) -> &str {
    &template[..template.find('{').unwrap_or(template.len())]
}

impl AcceptAllEditor {
    /// Scores each scene with the score it already carries.
    pub fn from_scored(scenes: &SceneSequence) -> Self {
        Self {
            scores: scenes.scenes().iter().map(|s| (s.key(), s.score)).collect(),
        }
    }

    fn reply(&self, text: &str) -> Option<String> {
        let rows: Vec<String> = if text.starts_with(head(prompt::HIGHLIGHT)) {
            listed(text)
                .into_iter()
                .map(|(ep, sid, _)| {
                    let score = self.scores.get(&(ep, sid)).copied().unwrap_or(0);
                    format!(
                        r#"{{"episode":{ep},"scene_id":{sid},"reason":"fixed","score":{score}}}"#
                    )
                })
                .collect()
        } else if text.starts_with(head(prompt::BOUNDARY)) {
            listed(text)
                .into_iter()
                .filter(|(_, _, tags)| tags.contains("<Optional"))
                .map(|(ep, sid, tags)| {
                    format!(
                        r#"{{"episode":{ep},"scene_id":{sid},"thought":"accept","starting":{},"ending":{}}}"#,
                        tags.contains("<Optional Start>"),
                        tags.contains("<Optional End>")
                    )
                })
                .collect()
        } else if text.starts_with(head(prompt::PRUNE)) {
            listed(text)
                .into_iter()
                .map(|(ep, sid, _)| {
                    format!(
                        r#"{{"episode":{ep},"scene_id":{sid},"thought":"keep","delete":false}}"#
                    )
                })
                .collect()
        } else {
            return None;
        };
        Some(format!("<result>[{}]</result>", rows.join(",")))
    }
}

impl ChatProvider for AcceptAllEditor {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.reply(&request.prompt_text())
            .ok_or_else(|| ProviderError::Data("request is not an editing prompt".into()))
    }
}
