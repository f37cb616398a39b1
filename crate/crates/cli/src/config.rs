//! Run configuration: one JSON file, secrets from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use storycut_core::editing::edit::{DEFAULT_MAX_IN_FLIGHT, DEFAULT_TOP_K};
use storycut_core::editing::scoring::DEFAULT_CHUNK_TOKEN_BUDGET;
use storycut_core::editing::Audience;
use storycut_core::understanding::pipeline::UnderstandConfig;
use storycut_core::understanding::speakers::DEFAULT_FUSION_THRESHOLD;

use crate::error::CliError;

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_KEY_ENV: &str = "HIVE_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteLlm {
    pub endpoint: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub llm: Option<RemoteLlm>,
    /// Replay file: a digest map or a run log. Relative to the config file.
    pub mock_fixtures: Option<PathBuf>,
    pub model: String,
    /// Speaker-vote models; empty means `model` alone.
    pub voter_models: Vec<String>,
    /// Overrides the manifest's audience.
    pub audience: Option<Audience>,
    /// Custom highlight rules JSON; the built-in set otherwise.
    pub rules: Option<PathBuf>,
    pub k: usize,
    pub fusion_threshold: f64,
    pub face_threshold: f32,
    pub shot_fusion_threshold: f32,
    pub lines_per_call: usize,
    pub chunk_token_budget: usize,
    pub max_in_flight: usize,
    pub allow_cross_episode: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let understand = UnderstandConfig::default();
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            llm: None,
            mock_fixtures: None,
            model: understand.model,
            voter_models: Vec::new(),
            audience: None,
            rules: None,
            k: DEFAULT_TOP_K,
            fusion_threshold: DEFAULT_FUSION_THRESHOLD,
            face_threshold: understand.face_threshold,
            shot_fusion_threshold: 0.9,
            lines_per_call: understand.lines_per_call,
            chunk_token_budget: DEFAULT_CHUNK_TOKEN_BUDGET,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            allow_cross_episode: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Where model replies come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LlmSource {
    Remote(RemoteLlm),
    Fixtures(PathBuf),
}

impl RunConfig {
    /// Reads `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Config(format!("{}: {}: {}", path.display(), e.path(), e.inner()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.mock_fixtures.as_mut().map(rebase);
        config.rules.as_mut().map(rebase);
        rebase(&mut config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.format_version != CONFIG_FORMAT_VERSION {
            return bad("unsupported config format_version");
        }
        if self.llm.is_some() && self.mock_fixtures.is_some() {
            return bad("set either llm or mock_fixtures, not both");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.fusion_threshold > 0.0 && self.fusion_threshold <= 1.0) {
            return bad("fusion_threshold must lie in (0, 1]");
        }
        if self.max_in_flight == 0 || self.chunk_token_budget == 0 || self.lines_per_call == 0 {
            return bad("max_in_flight, chunk_token_budget and lines_per_call must be positive");
        }
        Ok(())
    }

    /// The command-line fixture path wins over the config file.
    pub fn llm_source(&self, cli_fixtures: Option<&Path>) -> Result<LlmSource, CliError> {
        match (cli_fixtures, &self.mock_fixtures, &self.llm) {
            (Some(p), _, _) => Ok(LlmSource::Fixtures(p.to_path_buf())),
            (None, Some(p), _) => Ok(LlmSource::Fixtures(p.clone())),
            (None, None, Some(remote)) => Ok(LlmSource::Remote(remote.clone())),
            (None, None, None) => Err(CliError::Config(
                "no model provider: configure llm or pass --mock-fixtures".into(),
            )),
        }
    }

    pub fn understand_config(&self) -> UnderstandConfig {
        UnderstandConfig {
            model: self.model.clone(),
            voter_models: self.voter_models.clone(),
            fusion_threshold: self.fusion_threshold,
            face_threshold: self.face_threshold,
            lines_per_call: self.lines_per_call,
        }
    }
}
