use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use storycut_core::editing::rules::RuleError;
use storycut_core::editing::{
    edit, end2end_edit, Audience, BaselineMode, EditOptions, End2EndInput, HighlightRuleSet,
    PromptSettings,
};
use storycut_core::io::ingest::UnderstandInputs;
use storycut_core::io::plan::plan_to_json;
use storycut_core::io::{
    export_cutlist, load_annotations, load_manifest, load_plan, read_text, save_manifest, to_jsonl,
    write_atomic, CutList, SceneManifest, SourceFile,
};
use storycut_core::metrics::compute_report;
use storycut_core::model::{EditPlan, EpisodeId, SceneSequence};
use storycut_core::understanding::pipeline::{understand_series, PipelineFlag};
use storycut_core::understanding::provider::{
    ChatProvider, FixtureProvider, HistogramFusion, HttpChatProvider, ProviderSuite,
    RecordingProvider, RunLogEntry, TranscriptProvider,
};
use tracing::{info, warn};

use crate::config::{LlmSource, RunConfig};
use crate::error::CliError;

pub struct EditFlags {
    pub k: Option<usize>,
    pub highlight: bool,
    pub boundary: bool,
    pub pruning: bool,
}

pub struct Context {
    config: RunConfig,
    cli_fixtures: Option<PathBuf>,
    seed_log: Option<PathBuf>,
    out: PathBuf,
}

type Recorder = RecordingProvider<Arc<dyn ChatProvider>>;

/// `EPISODE=PATH`
pub fn parse_source(s: &str) -> Result<(u32, PathBuf), String> {
    let (ep, path) = s.split_once('=').ok_or("expected EPISODE=PATH")?;
    let ep: u32 = ep
        .trim()
        .parse()
        .map_err(|_| format!("bad episode number {ep:?}"))?;
    if path.is_empty() {
        return Err("empty path".into());
    }
    Ok((ep, PathBuf::from(path)))
}

pub fn plan_file_name(n: usize) -> String {
    format!("plan-{:04}.json", n + 1)
}

fn shell_word(s: &str) -> String {
    if !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./=:,".contains(c))
    {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Context {
    pub fn new(
        config: Option<&Path>,
        cli_fixtures: Option<&Path>,
        seed_log: Option<PathBuf>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let config = match config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        Ok(Self {
            config,
            cli_fixtures: cli_fixtures.map(Path::to_path_buf),
            seed_log,
            out,
        })
    }

    fn llm(&self) -> Result<Recorder, CliError> {
        let inner: Arc<dyn ChatProvider> =
            match self.config.llm_source(self.cli_fixtures.as_deref())? {
                LlmSource::Fixtures(path) => {
                    let fx = FixtureProvider::from_file(&path)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    info!(replies = fx.len(), path = %path.display(), "replaying fixtures");
                    Arc::new(fx)
                }
                LlmSource::Remote(remote) => Arc::new(
                    HttpChatProvider::from_env(remote.endpoint, &remote.api_key_env)
                        .map_err(|e| CliError::Config(e.to_string()))?,
                ),
            };
        Ok(RecordingProvider::new(inner))
    }

    /// Writes the run log, and merges it into the seed log when asked.
    /// Called whether or not the command succeeded.
    fn save_logs(&self, rec: &Recorder) -> Result<(), CliError> {
        write_atomic(&self.out.join("run_log.jsonl"), rec.to_jsonl().as_bytes())?;
        if let Some(path) = &self.seed_log {
            let mut merged: BTreeMap<String, RunLogEntry> = BTreeMap::new();
            if path.exists() {
                let old: Vec<RunLogEntry> =
                    storycut_core::io::parse_jsonl(path, &read_text(path)?)?;
                merged.extend(old.into_iter().map(|e| (e.request_digest.clone(), e)));
            }
            merged.extend(
                rec.entries()
                    .into_iter()
                    .map(|e| (e.request_digest.clone(), e)),
            );
            let rows: Vec<RunLogEntry> = merged.into_values().collect();
            write_atomic(path, to_jsonl(&rows).as_bytes())?;
        }
        Ok(())
    }

    fn rules(&self, audience: Audience) -> Result<HighlightRuleSet, CliError> {
        let Some(path) = &self.config.rules else {
            return Ok(HighlightRuleSet::builtin(audience));
        };
        let rules = HighlightRuleSet::from_json(&read_text(path)?).map_err(|e| match e {
            RuleError::Json(_) => CliError::Parse(format!("{}: {e}", path.display())),
            other => CliError::Validation(format!("{}: {other}", path.display())),
        })?;
        if rules.audience != audience {
            warn!(rules = %rules.audience, target = %audience, "rule set was written for another audience");
        }
        Ok(rules)
    }

    fn settings(&self, title: &str, audience: Audience) -> PromptSettings {
        let mut s = PromptSettings::new(title, audience, &self.config.model);
        s.chunk_token_budget = self.config.chunk_token_budget;
        s
    }

    /// Removes plan files left by an earlier run so the directory holds
    /// exactly this run's plans.
    fn clear_plans(&self) -> Result<(), CliError> {
        let Ok(entries) = std::fs::read_dir(&self.out) else {
            return Ok(());
        };
        for entry in entries.flatten() {
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if name.starts_with("plan-") && name.ends_with(".json") {
                std::fs::remove_file(entry.path())
                    .map_err(|e| CliError::Config(format!("{}: {e}", entry.path().display())))?;
            }
        }
        Ok(())
    }

    fn write_plan(&self, name: &str, plan: &EditPlan) -> Result<PathBuf, CliError> {
        plan.validate().map_err(CliError::Validation)?;
        let path = self.out.join(name);
        write_atomic(&path, plan_to_json(plan).as_bytes())?;
        Ok(path)
    }

    pub fn understand(&self, inputs_path: &Path) -> Result<(), CliError> {
        let (inputs, loaded) = UnderstandInputs::load(inputs_path)?;
        let rec = Arc::new(self.llm()?);
        let suite = ProviderSuite {
            llm: rec.clone(),
            asr: Arc::new(loaded.transcripts.clone()),
            ocr: Arc::new(loaded.ocr.clone()),
            face_embedder: Arc::new(loaded.faces.clone()),
            diarizer: Arc::new(loaded.turns.clone()),
            shot_detector: Arc::new(loaded.shots.clone()),
            shot_fusion_classifier: Arc::new(HistogramFusion {
                threshold: self.config.shot_fusion_threshold,
            }),
        };
        let result = understand_series(&loaded.episodes, &suite, &self.config.understand_config());
        self.save_logs(&rec)?;
        let out = result?;
        for flag in &out.flags {
            match flag {
                PipelineFlag::CorrectionRejected(r) => warn!(?r, "dialogue correction rejected"),
                PipelineFlag::DirectiveSkipped {
                    episode_id,
                    directive,
                } => {
                    warn!(episode_id, ?directive, "scene merge directive skipped")
                }
                PipelineFlag::CaptionFailed {
                    episode_id,
                    scene_id,
                    error,
                } => warn!(episode_id, scene_id, %error, "caption failed"),
            }
        }
        let seq =
            SceneSequence::new(out.scenes).map_err(|e| CliError::Validation(e.to_string()))?;
        let durations: Vec<(EpisodeId, u64)> = inputs
            .episodes
            .iter()
            .map(|e| (e.episode_id, e.duration_ms))
            .collect();
        let mut manifest =
            SceneManifest::from_sequence(&inputs.title, inputs.audience, &durations, &seq, false);
        for ep in &mut manifest.episodes {
            ep.source = inputs
                .episodes
                .iter()
                .find(|e| e.episode_id == ep.episode_id)
                .and_then(|e| e.video.clone());
        }
        save_manifest(&self.out.join("manifest.json"), &manifest)?;
        write_atomic(
            &self.out.join("dialogue.jsonl"),
            to_jsonl(&out.dialogue).as_bytes(),
        )?;
        let characters =
            serde_json::to_string_pretty(&out.characters).expect("profiles serialize") + "\n";
        write_atomic(&self.out.join("characters.json"), characters.as_bytes())?;
        println!(
            "understood {} episodes: {} scenes, {} characters, {} flags -> {}",
            manifest.episodes.len(),
            seq.len(),
            out.characters.len(),
            out.flags.len(),
            self.out.join("manifest.json").display()
        );
        Ok(())
    }

    pub fn edit(&self, manifest_path: &Path, flags: &EditFlags) -> Result<(), CliError> {
        let manifest = load_manifest(manifest_path)?;
        let audience = self.config.audience.unwrap_or(manifest.audience);
        let rules = self.rules(audience)?;
        let settings = self.settings(&manifest.title, audience);
        let options = EditOptions {
            k: flags.k.unwrap_or(self.config.k),
            highlight: flags.highlight,
            boundary: flags.boundary,
            pruning: flags.pruning,
            max_in_flight: self.config.max_in_flight,
            allow_cross_episode: self.config.allow_cross_episode,
        };
        let rec = self.llm()?;
        let result = edit(&manifest.to_sequence(), &rules, &rec, &settings, &options);
        self.save_logs(&rec)?;
        let outcome = result?;
        for &i in &outcome.defaulted {
            let s = outcome.scored.get(i);
            warn!(
                episode = s.episode_id,
                scene = s.scene_id,
                "no score returned; scored 0"
            );
        }
        self.clear_plans()?;
        for (n, plan) in outcome.plans.iter().enumerate() {
            self.write_plan(&plan_file_name(n), plan)?;
        }
        if flags.highlight {
            let mut scored = SceneManifest::from_sequence(
                &manifest.title,
                manifest.audience,
                &manifest.durations(),
                &outcome.scored,
                true,
            );
            for (ep, src) in scored.episodes.iter_mut().zip(&manifest.episodes) {
                ep.source = src.source.clone();
            }
            save_manifest(&self.out.join("scored_manifest.json"), &scored)?;
        }
        println!(
            "{} clips, {} windows, {} plans -> {}",
            outcome.clips.len(),
            outcome.windows.len(),
            outcome.plans.len(),
            self.out.display()
        );
        Ok(())
    }

    pub fn baseline(
        &self,
        mode: BaselineMode,
        manifest: Option<&Path>,
        inputs: Option<&Path>,
    ) -> Result<(), CliError> {
        let rec = self.llm()?;
        let (result, name) = match mode {
            BaselineMode::Narration => {
                let path = manifest
                    .ok_or_else(|| CliError::Config("narration mode needs --manifest".into()))?;
                let m = load_manifest(path)?;
                let audience = self.config.audience.unwrap_or(m.audience);
                let seq = m.to_sequence();
                let r = end2end_edit(
                    &End2EndInput::Narration(&seq),
                    &self.rules(audience)?,
                    &rec,
                    &self.settings(&m.title, audience),
                );
                (r, "baseline-narration.json")
            }
            BaselineMode::Asr => {
                let path =
                    inputs.ok_or_else(|| CliError::Config("asr mode needs --inputs".into()))?;
                let (inputs, loaded) = UnderstandInputs::load(path)?;
                let audience = self.config.audience.unwrap_or(inputs.audience);
                let mut dialogue = Vec::new();
                for ep in &inputs.episodes {
                    dialogue.extend(
                        loaded
                            .transcripts
                            .transcript(ep.episode_id)
                            .map_err(|e| CliError::Provider(e.to_string()))?,
                    );
                }
                let episodes: Vec<(EpisodeId, u64)> = inputs
                    .episodes
                    .iter()
                    .map(|e| (e.episode_id, e.duration_ms))
                    .collect();
                let r = end2end_edit(
                    &End2EndInput::Asr {
                        dialogue: &dialogue,
                        episodes: &episodes,
                    },
                    &self.rules(audience)?,
                    &rec,
                    &self.settings(&inputs.title, audience),
                );
                (r, "baseline-asr.json")
            }
        };
        self.save_logs(&rec)?;
        let outcome = result?;
        for s in &outcome.skipped {
            warn!(item = %s, "baseline selection skipped");
        }
        let path = self.write_plan(name, &outcome.plan)?;
        println!(
            "{} cuts, {} ms -> {}",
            outcome.plan.cuts.len(),
            outcome.plan.total_duration_ms,
            path.display()
        );
        Ok(())
    }

    pub fn metrics(
        &self,
        plans: &[PathBuf],
        logs: &Path,
        reference: Option<&Path>,
        json: bool,
    ) -> Result<(), CliError> {
        let plans: Vec<EditPlan> = plans
            .iter()
            .map(|p| load_plan(p))
            .collect::<Result<_, _>>()?;
        let logs = load_annotations(logs)?;
        let reference = reference.map(load_plan).transpose()?;
        let report = compute_report(&plans, &logs, reference.as_ref())?;
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
        } else {
            print!("{}", report.to_table());
        }
        Ok(())
    }

    pub fn export(
        &self,
        plan: &Path,
        manifest: Option<&Path>,
        overrides: &[(u32, PathBuf)],
        tool: Option<&str>,
    ) -> Result<(), CliError> {
        let plan = load_plan(plan)?;
        let mut sources: BTreeMap<EpisodeId, SourceFile> = BTreeMap::new();
        let mut title = String::from("edit");
        if let Some(path) = manifest {
            let m = load_manifest(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            title = m.title.clone();
            for ep in &m.episodes {
                if let Some(src) = &ep.source {
                    sources.insert(
                        ep.episode_id,
                        SourceFile {
                            path: resolve(base, src),
                            duration_ms: Some(ep.duration_ms),
                        },
                    );
                }
            }
        }
        for (ep, path) in overrides {
            let duration_ms = sources.get(ep).and_then(|s| s.duration_ms);
            sources.insert(
                *ep,
                SourceFile {
                    path: path.clone(),
                    duration_ms,
                },
            );
        }
        let list = export_cutlist(&plan, &sources)?;
        list.write(&self.out, &title)?;
        let tool_name = tool.unwrap_or("ffmpeg");
        let output = self.out.join("edit.mp4");
        let mut commands: Vec<Vec<String>> = list.trim_args(&self.out);
        commands.push(CutList::concat_args(&self.out.join("concat.txt"), &output));
        let script: String = commands
            .iter()
            .map(|args| {
                std::iter::once(tool_name.to_string())
                    .chain(args.iter().map(|a| shell_word(a)))
                    .collect::<Vec<_>>()
                    .join(" ")
                    + "\n"
            })
            .collect();
        write_atomic(&self.out.join("commands.txt"), script.as_bytes())?;
        if let Some(tool) = tool {
            list.run(tool, &self.out, &output)?;
        }
        println!(
            "{} cuts, {} ms -> {}",
            list.entries.len(),
            list.total_duration_ms(),
            self.out.join("cut.edl").display()
        );
        Ok(())
    }
}
