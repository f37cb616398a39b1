//! Edit plan documents and viewer annotation logs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_json, parse_jsonl, read_text, to_jsonl, write_atomic, IoError};
use crate::metrics::AnnotationLog;
use crate::model::{EditPlan, Provenance, TimeInterval};

pub const PLAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDocument {
    format_version: u32,
    cuts: Vec<TimeInterval>,
    provenance: Provenance,
    total_duration_ms: u64,
}

/// Pretty JSON with a trailing newline. Same plan, same bytes.
pub fn plan_to_json(plan: &EditPlan) -> String {
    let doc = PlanDocument {
        format_version: PLAN_FORMAT_VERSION,
        cuts: plan.cuts.clone(),
        provenance: plan.provenance.clone(),
        total_duration_ms: plan.total_duration_ms,
    };
    serde_json::to_string_pretty(&doc).expect("plan serializes") + "\n"
}

pub fn parse_plan(path: &Path, text: &str) -> Result<EditPlan, IoError> {
    let doc: PlanDocument = parse_json(path, text)?;
    if doc.format_version != PLAN_FORMAT_VERSION {
        return Err(IoError::schema(
            path,
            "/format_version",
            format!("unsupported version {}", doc.format_version),
        ));
    }
    if doc.cuts.is_empty() {
        return Err(IoError::schema(path, "/cuts", "plan has no cuts"));
    }
    let plan = EditPlan {
        cuts: doc.cuts,
        provenance: doc.provenance,
        total_duration_ms: doc.total_duration_ms,
    };
    plan.validate()
        .map_err(|m| IoError::schema(path, "/cuts", m))?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<EditPlan, IoError> {
    parse_plan(path, &read_text(path)?)
}

pub fn save_plan(path: &Path, plan: &EditPlan) -> Result<(), IoError> {
    plan.validate()
        .map_err(|m| IoError::schema(path, "/cuts", m))?;
    write_atomic(path, plan_to_json(plan).as_bytes())
}

/// One log per line.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationLog>, IoError> {
    let logs: Vec<AnnotationLog> = parse_jsonl(path, &read_text(path)?)?;
    for (n, log) in logs.iter().enumerate() {
        log.validate()
            .map_err(|e| IoError::schema(path, format!("/{n}"), e.to_string()))?;
    }
    Ok(logs)
}

pub fn save_annotations(path: &Path, logs: &[AnnotationLog]) -> Result<(), IoError> {
    write_atomic(path, to_jsonl(logs).as_bytes())
}
