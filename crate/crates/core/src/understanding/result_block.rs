//! Extraction and validation of `<result>[...]</result>` blocks in model
//! replies.
//!
//! Every prompt in the pipeline asks the model to answer with a JSON list
//! wrapped in `<result>` tags. [`parse_result_block`] pulls out the first
//! such block, parses it, and checks each record against a [`RecordSchema`]
//! so callers can deserialize without further checks.

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use thiserror::Error;

const OPEN_TAG: &str = "<result>";
const CLOSE_TAG: &str = "</result>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no <result>...</result> block in model output")]
    NoResultBlock,
    #[error("result block is not a valid JSON array: {0}")]
    Malformed(String),
    #[error("record {index} violates the schema: {detail}")]
    SchemaViolation { index: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Integer {
        min: Option<i64>,
        max: Option<i64>,
    },
    Number {
        min: Option<f64>,
        max: Option<f64>,
    },
    Bool,
    Text,
    /// Text or null.
    OptionalText,
    OneOf(&'static [&'static str]),
    IntegerList {
        min_len: usize,
    },
    TextList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldSpec {
    pub const fn required(name: &'static str, kind: FieldKind) -> Self {
        Self {
            name,
            kind,
            required: true,
        }
    }

    pub const fn optional(name: &'static str, kind: FieldKind) -> Self {
        Self {
            name,
            kind,
            required: false,
        }
    }
}

/// Field requirements for the records of one prompt's reply.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSchema {
    pub name: &'static str,
    pub fields: Vec<FieldSpec>,
}

const POSITIVE: FieldKind = FieldKind::Integer {
    min: Some(1),
    max: None,
};
const NON_NEGATIVE: FieldKind = FieldKind::Integer {
    min: Some(0),
    max: None,
};

impl RecordSchema {
    /// Highlight scoring: `{episode, scene_id, reason, score}`.
    pub fn highlight_scores() -> Self {
        Self {
            name: "highlight_scores",
            fields: vec![
                FieldSpec::required("episode", POSITIVE),
                FieldSpec::required("scene_id", POSITIVE),
                FieldSpec::required("reason", FieldKind::Text),
                FieldSpec::required("score", NON_NEGATIVE),
            ],
        }
    }

    /// Opening/ending selection: `{episode, scene_id, thought, starting, ending}`.
    pub fn boundary_decisions() -> Self {
        Self {
            name: "boundary_decisions",
            fields: vec![
                FieldSpec::required("episode", POSITIVE),
                FieldSpec::required("scene_id", POSITIVE),
                FieldSpec::required("thought", FieldKind::Text),
                FieldSpec::required("starting", FieldKind::Bool),
                FieldSpec::required("ending", FieldKind::Bool),
            ],
        }
    }

    /// Content pruning: `{episode, scene_id, thought, delete}`.
    pub fn prune_decisions() -> Self {
        Self {
            name: "prune_decisions",
            fields: vec![
                FieldSpec::required("episode", POSITIVE),
                FieldSpec::required("scene_id", POSITIVE),
                FieldSpec::required("thought", FieldKind::Text),
                FieldSpec::required("delete", FieldKind::Bool),
            ],
        }
    }

    /// Scene-level single-shot editing: `{episode, scene_id, thought}`.
    pub fn end2end_scenes() -> Self {
        Self {
            name: "end2end_scenes",
            fields: vec![
                FieldSpec::required("episode", POSITIVE),
                FieldSpec::required("scene_id", NON_NEGATIVE),
                FieldSpec::required("thought", FieldKind::Text),
            ],
        }
    }

    /// Transcript-level single-shot editing: `{episode, start_time, end_time, thought}`,
    /// times in seconds.
    pub fn end2end_spans() -> Self {
        let seconds = FieldKind::Number {
            min: Some(0.0),
            max: None,
        };
        Self {
            name: "end2end_spans",
            fields: vec![
                FieldSpec::required("episode", POSITIVE),
                FieldSpec::required("start_time", seconds.clone()),
                FieldSpec::required("end_time", seconds),
                FieldSpec::required("thought", FieldKind::Text),
            ],
        }
    }

    /// Transcript correction: `{index, start_ms, end_ms, speaker, text}`.
    pub fn dialogue_corrections() -> Self {
        Self {
            name: "dialogue_corrections",
            fields: vec![
                FieldSpec::required("index", NON_NEGATIVE),
                FieldSpec::required("start_ms", NON_NEGATIVE),
                FieldSpec::required("end_ms", NON_NEGATIVE),
                FieldSpec::required("speaker", FieldKind::OptionalText),
                FieldSpec::required("text", FieldKind::Text),
            ],
        }
    }

    /// Global scene refinement: `{segments: [a, b, ...], reason}`.
    pub fn segment_merges() -> Self {
        Self {
            name: "segment_merges",
            fields: vec![
                FieldSpec::required("segments", FieldKind::IntegerList { min_len: 2 }),
                FieldSpec::optional("reason", FieldKind::Text),
            ],
        }
    }

    /// Speaker attribution: `{line_id, speaker, confidence}`.
    pub fn speaker_votes() -> Self {
        Self {
            name: "speaker_votes",
            fields: vec![
                FieldSpec::required("line_id", FieldKind::Text),
                FieldSpec::required("speaker", FieldKind::Text),
                FieldSpec::required(
                    "confidence",
                    FieldKind::Number {
                        min: Some(0.0),
                        max: Some(1.0),
                    },
                ),
            ],
        }
    }

    /// Character extraction: `{id, name, face_cluster, descriptors, relationships}`.
    pub fn character_profiles() -> Self {
        Self {
            name: "character_profiles",
            fields: vec![
                FieldSpec::required("id", FieldKind::Text),
                FieldSpec::optional("name", FieldKind::OptionalText),
                FieldSpec::optional("face_cluster", NON_NEGATIVE),
                FieldSpec::optional("descriptors", FieldKind::TextList),
            ],
        }
    }

    fn check(&self, index: usize, value: &Value) -> Result<(), ParseError> {
        let violation = |detail: String| ParseError::SchemaViolation { index, detail };
        let Value::Object(obj) = value else {
            return Err(violation("record is not a JSON object".into()));
        };
        for field in &self.fields {
            match obj.get(field.name) {
                None if field.required => {
                    return Err(violation(format!("missing required key `{}`", field.name)))
                }
                None => {}
                Some(Value::Null) if !field.required => {}
                Some(v) => check_field(field, v)
                    .map_err(|d| violation(format!("`{}`: {d}", field.name)))?,
            }
        }
        Ok(())
    }
}

fn check_field(field: &FieldSpec, value: &Value) -> Result<(), String> {
    match &field.kind {
        FieldKind::Integer { min, max } => {
            let n = value
                .as_i64()
                .ok_or_else(|| format!("expected integer, got {value}"))?;
            if min.is_some_and(|m| n < m) || max.is_some_and(|m| n > m) {
                return Err(format!("{n} out of range"));
            }
        }
        FieldKind::Number { min, max } => {
            let n = value
                .as_f64()
                .ok_or_else(|| format!("expected number, got {value}"))?;
            if min.is_some_and(|m| n < m) || max.is_some_and(|m| n > m) {
                return Err(format!("{n} out of range"));
            }
        }
        FieldKind::Bool => {
            value
                .as_bool()
                .ok_or_else(|| format!("expected boolean, got {value}"))?;
        }
        FieldKind::Text => {
            value
                .as_str()
                .ok_or_else(|| format!("expected string, got {value}"))?;
        }
        FieldKind::OptionalText => {
            if !value.is_null() && !value.is_string() {
                return Err(format!("expected string or null, got {value}"));
            }
        }
        FieldKind::OneOf(options) => {
            let s = value
                .as_str()
                .ok_or_else(|| format!("expected string, got {value}"))?;
            if !options.contains(&s) {
                return Err(format!("`{s}` is not one of {options:?}"));
            }
        }
        FieldKind::IntegerList { min_len } => {
            let items = value
                .as_array()
                .ok_or_else(|| format!("expected list, got {value}"))?;
            if items.len() < *min_len {
                return Err(format!("expected at least {min_len} items"));
            }
            if let Some(bad) = items.iter().find(|v| v.as_i64().is_none_or(|n| n < 1)) {
                return Err(format!("expected positive integers, got {bad}"));
            }
        }
        FieldKind::TextList => {
            let items = value
                .as_array()
                .ok_or_else(|| format!("expected list, got {value}"))?;
            if let Some(bad) = items.iter().find(|v| !v.is_string()) {
                return Err(format!("expected strings, got {bad}"));
            }
        }
    }
    Ok(())
}

/// Records parsed from a `<result>` block, already checked against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBlock {
    pub records: Vec<Map<String, Value>>,
}

impl ResultBlock {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Deserializes every record into `T`.
    pub fn decode<T: DeserializeOwned>(&self) -> Result<Vec<T>, ParseError> {
        self.records
            .iter()
            .enumerate()
            .map(|(index, rec)| {
                serde_json::from_value(Value::Object(rec.clone())).map_err(|e| {
                    ParseError::SchemaViolation {
                        index,
                        detail: e.to_string(),
                    }
                })
            })
            .collect()
    }

    /// Renders the records back into a tagged block.
    pub fn to_tagged(&self) -> String {
        let list = Value::Array(self.records.iter().cloned().map(Value::Object).collect());
        format!("{OPEN_TAG}{list}{CLOSE_TAG}")
    }
}

fn extract_span(output: &str) -> Option<&str> {
    let start = output.find(OPEN_TAG)? + OPEN_TAG.len();
    let len = output[start..].find(CLOSE_TAG)?;
    Some(&output[start..start + len])
}

/// Drops a Markdown code fence wrapped around the list, if any.
fn strip_fence(body: &str) -> &str {
    let trimmed = body.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

/// Inserts the commas models tend to drop between consecutive objects
/// (`} {` or `}\n{`). Braces inside strings are left alone.
fn insert_missing_commas(body: &str) -> Option<String> {
    let mut out = String::with_capacity(body.len() + 8);
    let mut in_string = false;
    let mut escaped = false;
    let mut pending_close = false;
    let mut changed = false;
    for c in body.chars() {
        if in_string {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        if pending_close && !c.is_whitespace() {
            if c == '{' {
                out.push(',');
                changed = true;
            }
            pending_close = false;
        }
        match c {
            '"' => in_string = true,
            '}' => pending_close = true,
            _ => {}
        }
        out.push(c);
    }
    changed.then_some(out)
}

/// Quotes free text written where a value belongs, as in
/// `"thought": Your reason here. }`. The text runs to the closing brace,
/// the end of the line, or a comma followed by the next key.
fn quote_bare_values(body: &str) -> Option<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = String::with_capacity(body.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let mut changed = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        out.push(c);
        i += 1;
        if in_string {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            ':' => {
                while i < chars.len() && chars[i] == ' ' {
                    out.push(chars[i]);
                    i += 1;
                }
                let rest: String = chars[i..chars.len().min(i + 6)].iter().collect();
                let literal = ["true", "false", "null"].iter().any(|w| {
                    rest.starts_with(w)
                        && rest[w.len()..]
                            .chars()
                            .next()
                            .is_none_or(|n| n.is_whitespace() || matches!(n, ',' | '}' | ']'))
                });
                let starts_value = chars
                    .get(i)
                    .is_none_or(|&n| matches!(n, '"' | '{' | '[' | '-' | '0'..='9' | '\n' | '\r'));
                if literal || starts_value {
                    continue;
                }
                let mut end = i;
                while end < chars.len() && !matches!(chars[end], '}' | '\n' | '\r') {
                    if chars[end] == ','
                        && chars[end + 1..].iter().find(|c| !c.is_whitespace()) == Some(&'"')
                    {
                        break;
                    }
                    end += 1;
                }
                let text: String = chars[i..end].iter().collect();
                out.push_str(&Value::String(text.trim_end().to_string()).to_string());
                out.push(' ');
                changed = true;
                i = end;
            }
            _ => {}
        }
    }
    changed.then_some(out)
}

fn parse_lenient(body: &str) -> Result<Value, ParseError> {
    let first = match serde_json::from_str(body) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };
    let quoted = quote_bare_values(body);
    let base = quoted.as_deref().unwrap_or(body);
    if quoted.is_some() {
        if let Ok(v) = serde_json::from_str(base) {
            return Ok(v);
        }
    }
    insert_missing_commas(base)
        .and_then(|repaired| serde_json::from_str(&repaired).ok())
        .ok_or_else(|| ParseError::Malformed(first.to_string()))
}

/// Parses the first `<result>...</result>` span of `output` as a JSON array
/// and validates each record against `schema`.
pub fn parse_result_block(output: &str, schema: &RecordSchema) -> Result<ResultBlock, ParseError> {
    let body = strip_fence(extract_span(output).ok_or(ParseError::NoResultBlock)?);
    let value = parse_lenient(body)?;
    let Value::Array(items) = value else {
        return Err(ParseError::Malformed(
            "top-level value is not a JSON array".into(),
        ));
    };
    let mut records = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        schema.check(index, &item)?;
        if let Value::Object(obj) = item {
            records.push(obj);
        }
    }
    Ok(ResultBlock { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_scoring_reply() {
        let out = r#"<result>[{"episode":1,"scene_id":1,"reason":"x","score":3}]</result>"#;
        let block = parse_result_block(out, &RecordSchema::highlight_scores()).unwrap();
        assert_eq!(block.len(), 1);
        assert_eq!(block.records[0]["score"], 3);
    }

    #[test]
    fn empty_list_is_fine() {
        let block =
            parse_result_block("<result>[]</result>", &RecordSchema::prune_decisions()).unwrap();
        assert!(block.is_empty());
    }

    #[test]
    fn missing_tags() {
        assert_eq!(
            parse_result_block("no tags here", &RecordSchema::prune_decisions()),
            Err(ParseError::NoResultBlock)
        );
        assert_eq!(
            parse_result_block("<result>[]", &RecordSchema::prune_decisions()),
            Err(ParseError::NoResultBlock)
        );
    }

    #[test]
    fn takes_first_block_and_ignores_surrounding_prose() {
        let out = "Thinking...\n<result>\n```json\n[]\n```\n</result> later <result>[1]</result>";
        assert!(parse_result_block(out, &RecordSchema::prune_decisions())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn repairs_missing_commas_between_objects() {
        let out = "<result>[\n{\"episode\":1, \"scene_id\": 2, \"thought\": \"a } {\"}\n{\"episode\":1, \"scene_id\": 3, \"thought\": \"b\"}\n]</result>";
        let block = parse_result_block(out, &RecordSchema::end2end_scenes()).unwrap();
        assert_eq!(block.len(), 2);
        assert_eq!(block.records[0]["thought"], "a } {");
    }

    #[test]
    fn quotes_bare_text_values() {
        let out = "<result>[\n{\"episode\":1, \"scene_id\": 0, \"thought\": Opens on the slap. }\n{\"episode\":1, \"scene_id\": 2, \"thought\": Keeps the reveal, \"x\": true }\n]</result>";
        let block = parse_result_block(out, &RecordSchema::end2end_scenes()).unwrap();
        assert_eq!(block.records[0]["thought"], "Opens on the slap.");
        assert_eq!(block.records[1]["thought"], "Keeps the reveal");
        assert_eq!(block.records[1]["x"], true);
    }

    #[test]
    fn bare_words_do_not_rescue_broken_json() {
        let out = r#"<result>[{"episode": 1, "scene_id": 2, "score": 3</result>"#;
        assert!(matches!(
            parse_result_block(out, &RecordSchema::highlight_scores()),
            Err(ParseError::Malformed(_))
        ));
    }

    #[test]
    fn reports_offending_record() {
        let out = r#"<result>[{"episode":1,"scene_id":1,"reason":"","score":1},{"episode":1,"scene_id":2,"reason":"","score":-1}]</result>"#;
        match parse_result_block(out, &RecordSchema::highlight_scores()) {
            Err(ParseError::SchemaViolation { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn object_instead_of_list_is_malformed() {
        let out = r#"<result>{"episode":1}</result>"#;
        assert!(matches!(
            parse_result_block(out, &RecordSchema::highlight_scores()),
            Err(ParseError::Malformed(_))
        ));
    }

    proptest! {
        #[test]
        fn tagged_round_trip(rows in prop::collection::vec((1i64..50, 1i64..50, "[a-z {}\"\\\\]{0,12}", 0i64..9), 0..8)) {
            let list: Vec<Value> = rows
                .iter()
                .map(|(e, s, r, score)| serde_json::json!({"episode": e, "scene_id": s, "reason": r, "score": score}))
                .collect();
            let text = format!("<result>{}</result>", Value::Array(list));
            let schema = RecordSchema::highlight_scores();
            let block = parse_result_block(&text, &schema).unwrap();
            let again = parse_result_block(&block.to_tagged(), &schema).unwrap();
            prop_assert_eq!(block, again);
        }
    }
}
