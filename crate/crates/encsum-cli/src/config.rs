//! Run configuration: one TOML or JSON file drives every subcommand.
//!
//! Relative paths resolve against the config file's directory, so a config
//! can travel with its corpus. Every random seed is explicit; nothing reads
//! the clock. Commands write a `resolved-config.json` copy into the output
//! directory so a run records the exact settings that produced it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use encsum::latent::{EncoderKind, EncoderScope, EncoderSpec};
use encsum::lexfeat::LexicalConfig;
use encsum::ranker::RankerConfig;
use encsum::scorer::{LossCoefficients, ScorerDims, TrainConfig};
use encsum::synth::SynthConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub synth: SynthConfig,
    pub scorer: ScorerSection,
    pub lexical: LexicalSection,
    pub encoder: EncoderSection,
    pub ranker: RankerConfig,
    pub summarize: SummarizeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    /// Scorer train/holdout id lists; defaults to a `splits.json` next to
    /// the manifest when one exists.
    pub splits: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/scorer.ckpt`.
    pub scorer_checkpoint: Option<PathBuf>,
    /// Defaults to `<output_dir>/ranker.ckpt`.
    pub ranker_checkpoint: Option<PathBuf>,
    /// JSONL vectors for the external-import encoder.
    pub external_vectors: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            manifest: PathBuf::from("corpus/manifest.json"),
            embeddings: PathBuf::from("corpus/embeddings.txt"),
            splits: None,
            output_dir: PathBuf::from("run"),
            scorer_checkpoint: None,
            ranker_checkpoint: None,
            external_vectors: None,
        }
    }
}

impl Paths {
    pub fn scorer_checkpoint(&self) -> PathBuf {
        self.scorer_checkpoint.clone().unwrap_or_else(|| self.output_dir.join("scorer.ckpt"))
    }

    pub fn ranker_checkpoint(&self) -> PathBuf {
        self.ranker_checkpoint.clone().unwrap_or_else(|| self.output_dir.join("ranker.ckpt"))
    }

    pub fn splits(&self) -> Option<PathBuf> {
        if let Some(path) = &self.splits {
            return Some(path.clone());
        }
        let sibling = self.manifest.parent()?.join("splits.json");
        sibling.exists().then_some(sibling)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub window: usize,
    pub filters: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub grad_clip_max_norm: f64,
    pub negative_set_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    pub margin: f64,
    /// Loss coefficient set, "i" or "ii".
    pub coefficient_set: String,
}

impl Default for ScorerSection {
    fn default() -> Self {
        let train = TrainConfig::default();
        ScorerSection {
            window: 5,
            filters: 48,
            hidden: 12,
            learning_rate: train.learning_rate,
            grad_clip_max_norm: train.grad_clip_max_norm,
            negative_set_size: train.negative_set_size,
            epochs: train.epochs,
            rng_seed: train.rng_seed,
            margin: 1.0,
            coefficient_set: "i".to_string(),
        }
    }
}

impl ScorerSection {
    pub fn coefficients(&self) -> Result<LossCoefficients, CliError> {
        match self.coefficient_set.as_str() {
            "i" => Ok(LossCoefficients::set_i(self.margin)),
            "ii" => Ok(LossCoefficients::set_ii(self.margin)),
            other => Err(CliError::Config(format!(
                "scorer.coefficient_set must be \"i\" or \"ii\", got {other:?}"
            ))),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        Ok(TrainConfig {
            learning_rate: self.learning_rate,
            grad_clip_max_norm: self.grad_clip_max_norm,
            negative_set_size: self.negative_set_size,
            epochs: self.epochs,
            rng_seed: self.rng_seed,
            coefficients: self.coefficients()?,
        })
    }

    pub fn dims(&self, embed_dim: usize) -> ScorerDims {
        ScorerDims { embed_dim, window: self.window, filters: self.filters, hidden: self.hidden }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexicalSection {
    /// Matching-option bank: 4 (summary/paragraph sides) or 6 (adds lead
    /// and generated-summary candidate sides).
    pub options: usize,
    pub skip_window: Option<usize>,
    pub remove_stopwords: bool,
    pub stem: bool,
}

impl Default for LexicalSection {
    fn default() -> Self {
        LexicalSection { options: 4, skip_window: None, remove_stopwords: false, stem: false }
    }
}

impl LexicalSection {
    pub fn lexical_config(&self) -> Result<LexicalConfig, CliError> {
        let mut cfg = match self.options {
            4 => LexicalConfig::options_2018(),
            6 => LexicalConfig::options_2019(),
            other => {
                return Err(CliError::Config(format!(
                    "lexical.options must be 4 or 6, got {other}"
                )))
            }
        };
        cfg.skip_window = self.skip_window;
        cfg.remove_stopwords = self.remove_stopwords;
        cfg.stem = self.stem;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub kind: EncoderKind,
    pub scope: EncoderScope,
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection { kind: EncoderKind::Encsum, scope: EncoderScope::FullDocument }
    }
}

impl EncoderSection {
    pub fn spec(&self) -> EncoderSpec {
        EncoderSpec { kind: self.kind, scope: self.scope }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeSection {
    /// Length threshold t: the summary keeps the highest-scoring phrases
    /// until their token total exceeds t times the document length.
    pub threshold: f64,
}

impl Default for SummarizeSection {
    fn default() -> Self {
        SummarizeSection { threshold: 0.3 }
    }
}

/// Parses a TOML (default) or JSON (by extension) config and resolves every
/// relative path against the config file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    let mut config: RunConfig = if is_json {
        serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("invalid JSON config: {e}")))?
    } else {
        toml::from_str(&raw).map_err(|e| CliError::Config(format!("invalid TOML config: {e}")))?
    };
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf);
    if let Some(base) = base {
        config.rebase(&base);
    }
    Ok(config)
}

impl RunConfig {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.manifest);
        fix(&mut self.paths.embeddings);
        fix(&mut self.paths.output_dir);
        for opt in [
            &mut self.paths.splits,
            &mut self.paths.scorer_checkpoint,
            &mut self.paths.ranker_checkpoint,
            &mut self.paths.external_vectors,
        ] {
            if let Some(p) = opt {
                fix(p);
            }
        }
    }

    /// Writes the fully resolved configuration into the output directory so
    /// every run records its settings.
    pub fn write_resolved(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.paths.output_dir).map_err(|e| {
            CliError::Data(format!(
                "cannot create output dir {}: {e}",
                self.paths.output_dir.display()
            ))
        })?;
        let rendered =
            serde_json::to_string_pretty(self).expect("config is always serializable");
        let path = self.paths.output_dir.join("resolved-config.json");
        fs::write(&path, rendered + "\n")
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    /// Input paths must exist before a command starts reading; a config
    /// pointing at missing files is a config error, not a data error.
    pub fn require_inputs(&self, needs_embeddings: bool) -> Result<(), CliError> {
        let mut required: Vec<&Path> = vec![&self.paths.manifest];
        if needs_embeddings {
            required.push(&self.paths.embeddings);
        }
        for path in required {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "configured path does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}
