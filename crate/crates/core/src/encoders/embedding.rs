use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on ‖v‖₂ − 1 for vectors leaving an encoder.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
    Fused,
}

/// A dense embedding with its provenance. Encoders always emit unit-norm
/// vectors; callers that build embeddings by hand may not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub modality: Modality,
    pub model_id: String,
}

impl Embedding {
    pub fn new(vector: Vec<f32>, modality: Modality, model_id: impl Into<String>) -> Self {
        Self {
            vector,
            modality,
            model_id: model_id.into(),
        }
    }

    /// L2-normalizes `raw` (accumulated in f64) into an embedding.
    pub fn normalized(raw: &[f64], modality: Modality, model_id: impl Into<String>) -> Result<Self> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid(format!(
                "cannot normalize vector with norm {norm}"
            )));
        }
        let vector = raw.iter().map(|v| (v / norm) as f32).collect();
        Ok(Self::new(vector, modality, model_id))
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        self.vector
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_unit(&self, tolerance: f64) -> bool {
        (self.norm() - 1.0).abs() <= tolerance
    }

    /// Re-normalizes in place, rejecting empty, zero or non-finite vectors.
    pub fn renormalize(mut self) -> Result<Self> {
        if self.vector.is_empty() {
            return Err(Error::invalid("embedding has no dimensions"));
        }
        let raw: Vec<f64> = self.vector.iter().map(|&v| f64::from(v)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid(format!(
                "cannot normalize vector with norm {norm}"
            )));
        }
        for (dst, v) in self.vector.iter_mut().zip(raw) {
            *dst = (v / norm) as f32;
        }
        Ok(self)
    }
}
