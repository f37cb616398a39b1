//! Prompt templates and the small amount of text rendering shared by them.

pub const CORRECT_DIALOGUE: &str = include_str!("../prompts/correct_dialogue.txt");
pub const CAPTION: &str = include_str!("../prompts/caption.txt");
pub const HIGHLIGHT: &str = include_str!("../prompts/highlight.txt");
pub const BOUNDARY: &str = include_str!("../prompts/boundary.txt");
pub const PRUNE: &str = include_str!("../prompts/prune.txt");
pub const END2END_SCENES: &str = include_str!("../prompts/end2end_scenes.txt");
pub const END2END_ASR: &str = include_str!("../prompts/end2end_asr.txt");
pub const SEGMENT_REFINE: &str = include_str!("../prompts/segment_refine.txt");
pub const SPEAKER_ATTRIBUTION: &str = include_str!("../prompts/speaker_attribution.txt");
pub const CHARACTER_EXTRACTION: &str = include_str!("../prompts/character_extraction.txt");

/// Placeholder text for an empty input block.
pub const NONE_BLOCK: &str = "none";

/// Substitutes `{KEY}` placeholders in one pass, so substituted values are
/// never re-scanned. Unknown placeholders are left as they are.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out =
        String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let key_len = after
            .find(|c: char| !(c.is_ascii_uppercase() || c == '_'))
            .unwrap_or(after.len());
        let key = &after[..key_len];
        let closes = after[key_len..].starts_with('}');
        match values.iter().find(|(k, _)| *k == key) {
            Some((_, value)) if closes && !key.is_empty() => {
                out.push_str(value);
                rest = &after[key_len + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Non-empty block text, or the explicit "none" marker.
pub fn block_or_none(text: &str) -> &str {
    if text.trim().is_empty() {
        NONE_BLOCK
    } else {
        text
    }
}

/// `hh:mm:ss.mmm`
pub fn clock(ms: u64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    format!("{h:02}:{m:02}:{:02}.{:03}", rem / 1000, rem % 1000)
}

/// Rough token count used for chunking decisions.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}
