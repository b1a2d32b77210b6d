use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use wellstate_core::annotate::HttpConfig;
use wellstate_core::corpus::synth::{trait_file_name, SynthConfig, CORPUS_FILE, EMBEDDINGS_FILE, PROTOTYPES_FILE};
use wellstate_core::corpus::DEFAULT_SCORE_RANGE;
use wellstate_core::eval::{default_bands, Band, Grouping, ThresholdConfig};
use wellstate_core::features::Granularity;
use wellstate_core::insight::DEFAULT_HISTOGRAM_BINS;

use crate::{CliError, Overrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Wellbeing,
    Adaptive,
    Maladaptive,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Wellbeing => "wellbeing",
            TaskKind::Adaptive => "adaptive",
            TaskKind::Maladaptive => "maladaptive",
        }
    }

    pub fn granularity(self) -> Granularity {
        match self {
            TaskKind::Wellbeing => Granularity::Post,
            TaskKind::Adaptive | TaskKind::Maladaptive => Granularity::Sentence,
        }
    }

    /// Users for post-level targets, posts for sentence-level ones.
    pub fn default_grouping(self) -> Grouping {
        match self.granularity() {
            Granularity::Post => Grouping::ByUser,
            Granularity::Sentence => Grouping::ByPost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    /// Replay recorded responses from the cache file only.
    Cache,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Default,
    FullScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub granularity: Granularity,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    /// JSON-lines response cache; read for hits and appended to.
    pub cache_file: Option<PathBuf>,
    /// Identity to replay under with `kind = "cache"`; defaults to the
    /// identity of the configured HTTP backend.
    pub identity: Option<String>,
    pub retries: usize,
    pub max_in_flight: usize,
    /// Optional dimension spec file replacing the built-in one.
    pub specs: Option<PathBuf>,
    pub http: HttpConfig,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            kind: BackendKind::Http,
            cache_file: None,
            identity: None,
            retries: 2,
            max_in_flight: 4,
            specs: None,
            http: HttpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub preset: Preset,
    /// Full generator configuration; replaces the preset when given.
    pub config: Option<SynthConfig>,
}

impl SynthSettings {
    pub fn resolve(&self) -> SynthConfig {
        match (&self.config, self.preset) {
            (Some(c), _) => c.clone(),
            (None, Preset::Default) => SynthConfig::default(),
            (None, Preset::FullScale) => SynthConfig::full_scale(),
        }
    }
}

/// Declarative configuration shared by all subcommands. Relative paths in a
/// config file are resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub prototypes: Option<PathBuf>,
    pub sources: Vec<SourceSpec>,
    pub score_range: (f64, f64),
    pub features: String,
    pub task: TaskKind,
    pub k: usize,
    pub grouping: Option<Grouping>,
    pub grid: Vec<f64>,
    pub thresholds: ThresholdConfig,
    pub bands: Vec<Band>,
    pub histogram_bins: usize,
    /// Permute targets before cross-validation (negative control).
    pub shuffle_labels: Option<u64>,
    pub backend: BackendSettings,
    pub synth: SynthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out: PathBuf::from("out"),
            data_dir: None,
            corpus: None,
            embeddings: None,
            prototypes: None,
            sources: Vec::new(),
            score_range: DEFAULT_SCORE_RANGE,
            features: "plt".into(),
            task: TaskKind::Wellbeing,
            k: 5,
            grouping: None,
            grid: vec![10.0, 1.0, 0.1],
            thresholds: ThresholdConfig::default(),
            bands: default_bands(),
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            shuffle_labels: None,
            backend: BackendSettings::default(),
            synth: SynthSettings::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("configuration error: "))))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        rebase(&base, &mut cfg.out);
        for p in [&mut cfg.data_dir, &mut cfg.corpus, &mut cfg.embeddings, &mut cfg.prototypes]
            .into_iter()
            .chain([&mut cfg.backend.cache_file, &mut cfg.backend.specs])
            .flatten()
        {
            rebase(&base, p);
        }
        for s in &mut cfg.sources {
            rebase(&base, &mut s.path);
        }
        Ok(cfg)
    }

    /// Config file (if any) with command-line flags applied on top.
    pub fn from_overrides(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &o.config {
            Some(p) => Self::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = &o.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &o.data_dir {
            cfg.data_dir = Some(v.clone());
        }
        if let Some(v) = &o.corpus {
            cfg.corpus = Some(v.clone());
        }
        if let Some(v) = &o.features {
            cfg.features = v.clone();
        }
        if let Some(v) = o.task {
            cfg.task = v;
        }
        if let Some(v) = o.k {
            cfg.k = v;
        }
        if let Some(v) = &o.grid {
            cfg.grid = v.clone();
        }
        if let Some(v) = o.threshold_adaptive {
            cfg.thresholds.adaptive = v;
        }
        if let Some(v) = o.threshold_maladaptive {
            cfg.thresholds.maladaptive = v;
        }
        if let Some(v) = o.backend {
            cfg.backend.kind = v;
        }
        if let Some(v) = &o.cache_file {
            cfg.backend.cache_file = Some(v.clone());
        }
        Ok(cfg)
    }

    /// Fill unset input paths from `data_dir`, using the file names `synth`
    /// writes. Explicit settings win.
    pub fn resolve_data_dir(&mut self) -> Result<(), CliError> {
        let Some(dir) = self.data_dir.clone() else {
            return Ok(());
        };
        if !dir.is_dir() {
            return Err(CliError::Config(format!("data_dir {} is not a directory", dir.display())));
        }
        let fill = |slot: &mut Option<PathBuf>, name: &str| {
            let p = dir.join(name);
            if slot.is_none() && p.is_file() {
                *slot = Some(p);
            }
        };
        fill(&mut self.corpus, CORPUS_FILE);
        fill(&mut self.embeddings, EMBEDDINGS_FILE);
        fill(&mut self.prototypes, PROTOTYPES_FILE);
        let mut names: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| CliError::Config(format!("cannot list {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
            .collect();
        names.sort();
        for name in names {
            for g in [Granularity::Sentence, Granularity::Post] {
                let Some(source) = name.strip_suffix(&format!(".{}.csv", g.as_str())) else {
                    continue;
                };
                debug_assert_eq!(trait_file_name(source, g), name);
                if !self.sources.iter().any(|s| s.name == source && s.granularity == g) {
                    self.sources.push(SourceSpec { name: source.to_string(), granularity: g, path: dir.join(&name) });
                }
            }
        }
        Ok(())
    }

    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Config("missing key `corpus` (set it in the config, or pass --corpus or --data-dir)".into()))
    }

    /// Checks shared by `run` and `score`.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.k < 2 {
            return Err(CliError::Config(format!("k must be at least 2, got {}", self.k)));
        }
        self.thresholds.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.grid.is_empty() || self.grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(CliError::Config("grid must be a non-empty list of finite, non-negative penalties".into()));
        }
        if self.histogram_bins == 0 {
            return Err(CliError::Config("histogram_bins must be at least 1".into()));
        }
        let (lo, hi) = self.score_range;
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(CliError::Config("score_range must be increasing".into()));
        }
        let mut inputs: Vec<&Path> = [&self.corpus, &self.embeddings, &self.prototypes]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path)
            .collect();
        inputs.extend(self.sources.iter().map(|s| s.path.as_path()));
        for p in inputs {
            if !p.is_file() {
                return Err(CliError::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping.unwrap_or_else(|| self.task.default_grouping())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_and_overrides() {
        let cfg = RunConfig::parse_toml("seed = 7\nfeatures = \"situa+plt\"\n[thresholds]\nadaptive = 0.5\nmaladaptive = 0.3\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.thresholds.adaptive, 0.5);
        let o = Overrides { seed: Some(9), k: Some(3), ..Overrides::default() };
        let mut merged = RunConfig::from_overrides(&o).unwrap();
        merged.features = cfg.features.clone();
        assert_eq!((merged.seed, merged.k), (9, 3));
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = RunConfig::parse_toml("sed = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn default_grouping_by_task() {
        assert_eq!(TaskKind::Wellbeing.default_grouping(), Grouping::ByUser);
        assert_eq!(TaskKind::Adaptive.default_grouping(), Grouping::ByPost);
    }
}
