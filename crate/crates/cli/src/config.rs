//! Run configuration: one JSON file plus command-line overrides.
//!
//! Relative paths inside the file resolve against the file's own directory,
//! so a config can be archived next to its data and results.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use semprox_core::corpus::{filter_gold, parse_gold, parse_instances, parse_judgments, parse_tutorial, split, SplitSizes};
use semprox_core::guidelines::{load_guidelines, normalize_guidelines, render_tutorial, NormalizeOptions, TableMarkers};
use semprox_core::provider::{
    ConstantProvider, Credential, HttpChatProvider, ReplayProvider, RetryPolicy, ScriptedGoldProvider,
    SeededNoiseProvider, API_KEY_ENV, DEFAULT_MAX_TOKENS,
};
use semprox_core::{GoldInstance, Label, ModelConfig, PromptBuilder, Provider, Strategy};

use crate::failure::{invalid, Classify, CmdResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// OpenAI-compatible chat completions endpoint, e.g. `https://api.openai.com/v1`.
    Http {
        endpoint: String,
        /// File holding the API key. Without it the key comes from `ANNOT_API_KEY`.
        #[serde(default)]
        api_key_file: Option<PathBuf>,
    },
    /// Recorded responses keyed by instance id.
    Replay { fixture: PathBuf },
    /// Answers every instance with its gold label.
    ScriptedGold,
    /// Answers every instance with the same label.
    Constant { label: Label },
    /// Gold label with probability `accuracy`, otherwise a different label.
    SeededNoise { seed: u64, accuracy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Dev,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub dev: usize,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
    #[serde(rename = "use")]
    pub part: Part,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerConfig {
    pub open: String,
    pub close: String,
}

fn default_true() -> bool {
    true
}

fn default_max_tokens() -> Option<u32> {
    Some(DEFAULT_MAX_TOKENS)
}

fn default_trials() -> usize {
    5
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub provider: ProviderConfig,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
    pub strategy: Strategy,
    /// Gold TSV to annotate. Mutually exclusive with `instances`/`judgments`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub instances: Option<PathBuf>,
    #[serde(default)]
    pub judgments: Option<PathBuf>,
    /// Optional seeded split applied to the data before annotation.
    #[serde(default)]
    pub split: Option<SplitConfig>,
    #[serde(default)]
    pub guidelines: Option<PathBuf>,
    #[serde(default)]
    pub tutorial: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub remove_cannot_decide: bool,
    #[serde(default = "default_true")]
    pub linearize_tables: bool,
    #[serde(default)]
    pub table_markers: Option<MarkerConfig>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

/// Flag values that replace the corresponding config fields.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Name of the run directory under the output directory.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Number of trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sampling temperature in [0, 2].
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Nucleus sampling top_p in (0, 1].
    #[arg(long)]
    pub top_p: Option<f64>,
    /// Model name sent with every request.
    #[arg(long)]
    pub model: Option<String>,
    /// Directory that receives run directories.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Maximum concurrent requests within a trial.
    #[arg(long)]
    pub concurrency: Option<usize>,
}

impl RunConfig {
    /// Reads the file and rewrites every relative path against its directory.
    pub fn load(path: &Path) -> CmdResult<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display())).invalid()?;
        let mut config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display())).invalid()?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.data, &mut self.instances, &mut self.judgments, &mut self.guidelines, &mut self.tutorial]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
        match &mut self.provider {
            ProviderConfig::Replay { fixture } => fix(fixture),
            ProviderConfig::Http { api_key_file: Some(p), .. } => fix(p),
            _ => {}
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.run_id {
            self.run_id = Some(v.clone());
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
        if let Some(v) = o.temperature {
            self.temperature = v;
        }
        if let Some(v) = o.top_p {
            self.top_p = v;
        }
        if let Some(v) = &o.model {
            self.model = v.clone();
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.concurrency {
            self.concurrency = v;
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            model_name: self.model.clone(),
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
            stop: self.stop.clone(),
        }
    }
}

/// Everything a run needs, checked before any output is written.
pub struct Prepared {
    pub items: Vec<GoldInstance>,
    pub builder: PromptBuilder,
    pub model: ModelConfig,
    pub provider: Box<dyn Provider>,
    pub trials: usize,
    pub concurrency: usize,
    pub output_dir: PathBuf,
    pub run_id: Option<String>,
}

pub fn read(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).invalid()
}

fn load_items(config: &RunConfig) -> CmdResult<Vec<GoldInstance>> {
    let gold = match (&config.data, &config.instances, &config.judgments) {
        (Some(data), None, None) => {
            parse_gold(&read(data)?).with_context(|| data.display().to_string()).invalid()?
        }
        (None, Some(inst), Some(judg)) => {
            let pairs = parse_instances(&read(inst)?).with_context(|| inst.display().to_string()).invalid()?;
            let records = parse_judgments(&read(judg)?).with_context(|| judg.display().to_string()).invalid()?;
            filter_gold(&pairs, &records).invalid()?
        }
        _ => return Err(invalid("config needs either `data`, or both `instances` and `judgments`")),
    };
    let Some(s) = config.split else { return Ok(gold) };
    let parts = split(&gold, SplitSizes { dev: s.dev, train: s.train, test: s.test }, s.seed).invalid()?;
    Ok(match s.part {
        Part::Dev => parts.dev,
        Part::Train => parts.train,
        Part::Test => parts.test,
    })
}

fn load_builder(config: &RunConfig) -> CmdResult<PromptBuilder> {
    let strategy = config.strategy;
    let guidelines = match (&config.guidelines, strategy.needs_guidelines()) {
        (Some(path), true) => {
            let markers = match &config.table_markers {
                Some(m) => TableMarkers { open: &m.open, close: &m.close },
                None => TableMarkers::default(),
            };
            let doc = load_guidelines(&read(path)?, markers).with_context(|| path.display().to_string()).invalid()?;
            let options = NormalizeOptions {
                remove_cannot_decide: config.remove_cannot_decide,
                linearize_tables: config.linearize_tables,
            };
            Some(normalize_guidelines(&doc, options))
        }
        (None, true) => return Err(invalid(format!("strategy {strategy} needs `guidelines`"))),
        (_, false) => None,
    };
    let tutorial = match (&config.tutorial, strategy) {
        (Some(path), Strategy::AutoGuidelinesTutorial) => {
            let examples = parse_tutorial(&read(path)?).with_context(|| path.display().to_string()).invalid()?;
            Some(render_tutorial(&examples))
        }
        (None, Strategy::AutoGuidelinesTutorial) => {
            return Err(invalid("strategy auto_guidelines_tutorial needs `tutorial`"))
        }
        _ => None,
    };
    PromptBuilder::new(strategy, guidelines, tutorial).invalid()
}

fn load_provider(config: &RunConfig, items: &[GoldInstance]) -> CmdResult<Box<dyn Provider>> {
    Ok(match &config.provider {
        ProviderConfig::Http { endpoint, api_key_file } => {
            let credential = match api_key_file {
                Some(p) => Credential::File(p.clone()),
                None => Credential::Env(API_KEY_ENV.into()),
            };
            Box::new(HttpChatProvider::new(endpoint, &credential, config.retry).invalid()?)
        }
        ProviderConfig::Replay { fixture } => {
            let provider = ReplayProvider::from_fixture(&read(fixture)?)
                .with_context(|| fixture.display().to_string())
                .invalid()?;
            provider
                .covers(items.iter().map(GoldInstance::instance_id))
                .with_context(|| fixture.display().to_string())
                .invalid()?;
            Box::new(provider)
        }
        ProviderConfig::ScriptedGold => Box::new(ScriptedGoldProvider::new(items)),
        ProviderConfig::Constant { label } => Box::new(ConstantProvider(*label)),
        ProviderConfig::SeededNoise { seed, accuracy } => {
            Box::new(SeededNoiseProvider::new(*seed, *accuracy, items).invalid()?)
        }
    })
}

/// Validates the whole configuration and loads every input.
pub fn prepare(config: &RunConfig) -> CmdResult<Prepared> {
    let model = config.model_config();
    model.validate().invalid()?;
    if config.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if config.concurrency == 0 {
        return Err(invalid("concurrency must be at least 1"));
    }
    if config.retry.max_attempts == 0 {
        return Err(invalid("retry.max_attempts must be at least 1"));
    }
    if let Some(id) = &config.run_id {
        check_run_id(id)?;
    }
    let items = load_items(config)?;
    if items.is_empty() {
        return Err(invalid("no instances to annotate"));
    }
    let builder = load_builder(config)?;
    let provider = load_provider(config, &items)?;
    Ok(Prepared {
        items,
        builder,
        model,
        provider,
        trials: config.trials,
        concurrency: config.concurrency,
        output_dir: config.output_dir.clone(),
        run_id: config.run_id.clone(),
    })
}

fn check_run_id(id: &str) -> CmdResult<()> {
    let ok = !id.is_empty() && !id.starts_with('.') && !id.contains(['/', '\\']);
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("run id `{id}` must be a plain directory name")))
    }
}
