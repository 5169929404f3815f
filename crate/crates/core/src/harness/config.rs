use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::EncoderHandle;
use crate::error::{Error, Result};
use crate::fusion::FusionStrategy;
use crate::ingest::sha256_hex;
use crate::typograph::RenderSpec;

/// The six retrieval configurations evaluated per model.
///
/// `Raw*` embed the untouched image; `Rendered*` embed the image with the
/// title drawn on it. `*ImageOnly` uses the image embedding alone, the other
/// modes fuse it with the title's text embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    RawImageOnly,
    RawSum,
    RawConcat,
    RenderedImageOnly,
    RenderedSum,
    RenderedConcat,
}

impl InferenceMode {
    pub const ALL: [InferenceMode; 6] = [
        InferenceMode::RawImageOnly,
        InferenceMode::RawSum,
        InferenceMode::RawConcat,
        InferenceMode::RenderedImageOnly,
        InferenceMode::RenderedSum,
        InferenceMode::RenderedConcat,
    ];

    pub fn rendered(self) -> bool {
        matches!(
            self,
            InferenceMode::RenderedImageOnly
                | InferenceMode::RenderedSum
                | InferenceMode::RenderedConcat
        )
    }

    pub fn fusion(self) -> Option<FusionStrategy> {
        match self {
            InferenceMode::RawSum | InferenceMode::RenderedSum => Some(FusionStrategy::Sum),
            InferenceMode::RawConcat | InferenceMode::RenderedConcat => {
                Some(FusionStrategy::Concat)
            }
            InferenceMode::RawImageOnly | InferenceMode::RenderedImageOnly => None,
        }
    }

    /// Inference pathway label: A (raw image + text), B (rendered image
    /// alone), C (rendered image + text). Raw image-only is the baseline.
    pub fn pathway(self) -> &'static str {
        match (self.rendered(), self.fusion().is_some()) {
            (false, false) => "baseline",
            (false, true) => "A",
            (true, false) => "B",
            (true, true) => "C",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InferenceMode::RawImageOnly => "raw_image_only",
            InferenceMode::RawSum => "raw_sum",
            InferenceMode::RawConcat => "raw_concat",
            InferenceMode::RenderedImageOnly => "rendered_image_only",
            InferenceMode::RenderedSum => "rendered_sum",
            InferenceMode::RenderedConcat => "rendered_concat",
        }
    }
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InferenceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::config(format!("unknown inference mode {s:?}")))
    }
}

pub fn default_k_values() -> Vec<usize> {
    vec![1, 3]
}

fn default_render_spec() -> Option<RenderSpec> {
    Some(RenderSpec::default())
}

/// One experiment: a mode, how to render, which encoders, and which k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: InferenceMode,
    #[serde(default = "default_render_spec")]
    pub render_spec: Option<RenderSpec>,
    pub image_encoder: EncoderHandle,
    pub text_encoder: EncoderHandle,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Reference encoders seeded from `seed`, default render spec, k = [1, 3].
    pub fn reference(mode: InferenceMode, seed: u64) -> Self {
        Self {
            mode,
            render_spec: default_render_spec(),
            image_encoder: EncoderHandle::reference_image(seed),
            text_encoder: EncoderHandle::reference_text(seed),
            k_values: default_k_values(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::config("k_values is empty"));
        }
        if self.k_values.contains(&0) {
            return Err(Error::config("k values must be >= 1"));
        }
        match (&self.render_spec, self.mode.rendered()) {
            (None, true) => {
                return Err(Error::config(format!(
                    "mode {} requires a render_spec",
                    self.mode
                )))
            }
            (Some(spec), _) => spec.validate()?,
            (None, false) => {}
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_values.iter().copied().max().unwrap_or(1)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}
