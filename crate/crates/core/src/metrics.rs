//! Evaluation metrics over edit plans and viewer annotation logs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{intersection_duration_ms, interval_iou, union_duration_ms};
use crate::model::{EditPlan, ModelError};

pub const ANNOTATION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("diversity needs at least 2 plans, got {0}")]
    InsufficientPlans(usize),
    #[error("no annotation logs")]
    EmptyLogs,
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("normal play {normal_play_ms} ms exceeds duration {duration_ms} ms")]
    NormalPlayExceedsDuration {
        normal_play_ms: u64,
        duration_ms: u64,
    },
    #[error("plan has no cuts")]
    EmptyPlan,
    #[error("annotation log {index}: {reason}")]
    InvalidLog { index: usize, reason: String },
    #[error(transparent)]
    Interval(#[from] ModelError),
}

/// One viewer watching one plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationLog {
    #[serde(default = "annotation_version")]
    pub format_version: u32,
    pub viewer_id: String,
    pub plan_id: String,
    pub normal_play_ms: u64,
    pub total_duration_ms: u64,
    pub interruption_count: u32,
    pub hooked: bool,
    pub suspense_felt: bool,
}

fn annotation_version() -> u32 {
    ANNOTATION_FORMAT_VERSION
}

impl AnnotationLog {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.format_version != ANNOTATION_FORMAT_VERSION {
            return Err(MetricError::InvalidLog {
                index: 0,
                reason: format!("unsupported format_version {}", self.format_version),
            });
        }
        engagement(self.normal_play_ms, self.total_duration_ms).map(|_| ())
    }
}

/// `1 - mean pairwise IoU` of the plans' source-time footprints.
pub fn diversity(plans: &[EditPlan]) -> Result<f64, MetricError> {
    let n = plans.len();
    if n < 2 {
        return Err(MetricError::InsufficientPlans(n));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += interval_iou(&plans[i].cuts, &plans[j].cuts)?;
        }
    }
    Ok(1.0 - 2.0 / (n as f64 * (n as f64 - 1.0)) * sum)
}

/// Mean uninterrupted viewing time in seconds.
pub fn smoothness(duration_ms: u64, interruptions: u32) -> Result<f64, MetricError> {
    if duration_ms == 0 {
        return Err(MetricError::ZeroDuration);
    }
    Ok(duration_ms as f64 / 1000.0 / (1.0 + f64::from(interruptions)))
}

/// Share of the video watched at normal speed.
pub fn engagement(normal_play_ms: u64, duration_ms: u64) -> Result<f64, MetricError> {
    if duration_ms == 0 {
        return Err(MetricError::ZeroDuration);
    }
    if normal_play_ms > duration_ms {
        return Err(MetricError::NormalPlayExceedsDuration {
            normal_play_ms,
            duration_ms,
        });
    }
    Ok(normal_play_ms as f64 / duration_ms as f64)
}

/// Viewing experience index.
pub fn vei(engagement: f64, smoothness: f64) -> f64 {
    engagement * smoothness
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    Hooked,
    SuspenseFelt,
}

pub fn judgment_rate(logs: &[AnnotationLog], field: Judgment) -> Result<f64, MetricError> {
    if logs.is_empty() {
        return Err(MetricError::EmptyLogs);
    }
    let hits = logs
        .iter()
        .filter(|l| match field {
            Judgment::Hooked => l.hooked,
            Judgment::SuspenseFelt => l.suspense_felt,
        })
        .count();
    Ok(hits as f64 / logs.len() as f64)
}

/// `(precision, recall)` of `plan` against `reference` over source time.
pub fn precision_recall(plan: &EditPlan, reference: &EditPlan) -> Result<(f64, f64), MetricError> {
    let (p, r) = (
        union_duration_ms(&plan.cuts)?,
        union_duration_ms(&reference.cuts)?,
    );
    if p == 0 || r == 0 {
        return Err(MetricError::EmptyPlan);
    }
    let both = intersection_duration_ms(&plan.cuts, &reference.cuts)? as f64;
    Ok((both / p as f64, both / r as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Absent with fewer than two plans.
    pub diversity: Option<f64>,
    pub smoothness_s: f64,
    pub engagement: f64,
    pub vei: f64,
    pub hook_rate: f64,
    pub suspense_rate: f64,
    pub n_plans: usize,
    pub n_viewers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Default)]
struct PlanScores {
    smoothness: Vec<f64>,
    engagement: Vec<f64>,
    vei: Vec<f64>,
    hooked: Vec<f64>,
    suspense: Vec<f64>,
}

/// Builds the report: viewer metrics are averaged per plan, then across
/// plans. VEI is computed per log before averaging. Precision and recall,
/// when a reference is given, are averaged across plans.
pub fn compute_report(
    plans: &[EditPlan],
    logs: &[AnnotationLog],
    reference: Option<&EditPlan>,
) -> Result<MetricReport, MetricError> {
    if logs.is_empty() {
        return Err(MetricError::EmptyLogs);
    }
    let mut per_plan: BTreeMap<&str, PlanScores> = BTreeMap::new();
    for (index, log) in logs.iter().enumerate() {
        log.validate().map_err(|e| MetricError::InvalidLog {
            index,
            reason: e.to_string(),
        })?;
        let s = smoothness(log.total_duration_ms, log.interruption_count)?;
        let e = engagement(log.normal_play_ms, log.total_duration_ms)?;
        let scores = per_plan.entry(&log.plan_id).or_default();
        scores.smoothness.push(s);
        scores.engagement.push(e);
        scores.vei.push(vei(e, s));
        scores.hooked.push(f64::from(u8::from(log.hooked)));
        scores.suspense.push(f64::from(u8::from(log.suspense_felt)));
    }
    let across = |pick: fn(&PlanScores) -> &Vec<f64>| {
        mean(per_plan.values().map(|p| mean(pick(p).iter().copied())))
    };
    let viewers: BTreeSet<&str> = logs.iter().map(|l| l.viewer_id.as_str()).collect();
    let (precision, recall) = match reference {
        Some(r) if !plans.is_empty() => {
            let pairs = plans
                .iter()
                .map(|p| precision_recall(p, r))
                .collect::<Result<Vec<_>, _>>()?;
            (
                Some(mean(pairs.iter().map(|p| p.0))),
                Some(mean(pairs.iter().map(|p| p.1))),
            )
        }
        _ => (None, None),
    };
    Ok(MetricReport {
        diversity: if plans.len() >= 2 {
            Some(diversity(plans)?)
        } else {
            None
        },
        smoothness_s: across(|p| &p.smoothness),
        engagement: across(|p| &p.engagement),
        vei: across(|p| &p.vei),
        hook_rate: across(|p| &p.hooked),
        suspense_rate: across(|p| &p.suspense),
        n_plans: plans.len(),
        n_viewers: viewers.len(),
        precision,
        recall,
    })
}

impl MetricReport {
    /// Plain-text table, one header row and one value row.
    pub fn to_table(&self) -> String {
        let mut cols: Vec<(&str, String)> = vec![
            (
                "Diversity",
                self.diversity.map_or("n/a".into(), |d| format!("{d:.2}")),
            ),
            ("Smoothness(s)", format!("{:.2}", self.smoothness_s)),
            ("Engagement", format!("{:.2}", self.engagement)),
            ("VEI", format!("{:.2}", self.vei)),
            ("HookRate", format!("{:.2}", self.hook_rate)),
            ("SuspenseRate", format!("{:.2}", self.suspense_rate)),
        ];
        if let (Some(p), Some(r)) = (self.precision, self.recall) {
            cols.push(("Precision", format!("{p:.2}")));
            cols.push(("Recall", format!("{r:.2}")));
        }
        cols.push(("Plans", self.n_plans.to_string()));
        cols.push(("Viewers", self.n_viewers.to_string()));
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let row = |cells: Vec<&str>| -> String {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        format!(
            "{}\n{}\n",
            row(cols.iter().map(|(h, _)| *h).collect()),
            row(cols.iter().map(|(_, v)| v.as_str()).collect())
        )
    }
}
