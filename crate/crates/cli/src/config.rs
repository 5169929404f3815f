//! The TOML run configuration shared by `eval`, `sweep` and `embed`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use glyphsearch_core::harness::{default_k_values, ExperimentConfig, InferenceMode};
use glyphsearch_core::ingest::{Summarizer, TitleOptions};
use glyphsearch_core::{EncoderHandle, RenderSpec};
use serde::{Deserialize, Serialize};

pub const CACHE_ENV: &str = "GLYPHSEARCH_CACHE";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Like [`ExperimentConfig`], but encoders default to the reference pair
/// seeded from `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_mode")]
    pub mode: InferenceMode,
    #[serde(default)]
    pub render_spec: RenderSpec,
    #[serde(default)]
    pub image_encoder: Option<EncoderHandle>,
    #[serde(default)]
    pub text_encoder: Option<EncoderHandle>,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_mode() -> InferenceMode {
    InferenceMode::RenderedSum
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            render_spec: RenderSpec::default(),
            image_encoder: None,
            text_encoder: None,
            k_values: default_k_values(),
            seed: 0,
        }
    }
}

impl ExperimentSection {
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            render_spec: Some(self.render_spec.clone()),
            image_encoder: self
                .image_encoder
                .clone()
                .unwrap_or_else(|| EncoderHandle::reference_image(self.seed)),
            text_encoder: self
                .text_encoder
                .clone()
                .unwrap_or_else(|| EncoderHandle::reference_text(self.seed)),
            k_values: self.k_values.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub queries: Option<PathBuf>,
    pub products: Option<PathBuf>,
    pub char_budget: Option<usize>,
    /// URL of an optional title summarization service.
    pub summarizer: Option<String>,
    pub summarizer_timeout_ms: Option<u64>,
}

impl DatasetSection {
    pub fn title_options(&self) -> TitleOptions {
        TitleOptions {
            summarizer: self.summarizer.as_ref().map(|url| {
                Summarizer::new(
                    url.clone(),
                    Duration::from_millis(self.summarizer_timeout_ms.unwrap_or(30_000)),
                )
            }),
            char_budget: self.char_budget,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub cache_root: Option<PathBuf>,
}

/// Config errors that should exit with the usage code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Parses a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.dataset.queries);
        resolve(base, &mut cfg.dataset.products);
        resolve(base, &mut cfg.output.dir);
        resolve(base, &mut cfg.output.cache_root);
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Flag, then environment, then config file.
    pub fn cache_root(&self, flag: Option<&Path>) -> Option<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| self.output.cache_root.clone())
    }
}

pub fn load_grid(path: &Path) -> anyhow::Result<glyphsearch_core::harness::SweepGrid> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading grid {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("grid {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use glyphsearch_core::{Location, Rgb};

    #[test]
    fn parses_documented_example() {
        let cfg: RunConfig = toml::from_str(
            r##"
            [experiment]
            mode = "rendered_image_only"
            seed = 7
            k_values = [1, 3, 5]

            [experiment.render_spec]
            font_size_ratio = 0.75
            color = "#ff8800"
            location = "bottom"

            [experiment.text_encoder]
            kind = "remote"
            model_id = "clip-l14"
            endpoint = "http://127.0.0.1:8080"

            [dataset]
            queries = "data/queries.jsonl"
            products = "data/products.jsonl"
            char_budget = 77

            [output]
            dir = "reports"
            "##,
        )
        .unwrap();
        let exp = cfg.experiment.to_config();
        assert_eq!(exp.mode, InferenceMode::RenderedImageOnly);
        let spec = exp.render_spec.unwrap();
        assert_eq!(spec.color, Rgb([0xff, 0x88, 0x00]));
        assert_eq!(spec.location, Location::Bottom);
        assert_eq!(exp.image_encoder, EncoderHandle::reference_image(7));
        assert_eq!(exp.text_encoder.model_id(), "clip-l14");
        assert_eq!(cfg.dataset.title_options().budget(), 77);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[experiment]\nmodee = \"raw_sum\"").is_err());
        assert!(toml::from_str::<RunConfig>("[bogus]\n").is_err());
    }
}
