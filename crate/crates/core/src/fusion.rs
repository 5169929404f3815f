//! Cosine scoring and late fusion of image and text embeddings.

use serde::{Deserialize, Serialize};

use crate::encoders::{Embedding, Modality};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionStrategy {
    /// Normalized sum; keeps the dimension.
    Sum,
    /// Concatenation scaled by 1/√2; doubles the dimension.
    Concat,
}

impl std::fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionStrategy::Sum => "sum",
            FusionStrategy::Concat => "concat",
        })
    }
}

/// Below this norm a Sum fusion is treated as antipodal.
pub const DEGENERATE_SUM_NORM: f64 = 1e-9;

pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum()
}

pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::invalid(format!(
            "cosine of embeddings with dims {} and {}",
            u.dim(),
            v.dim()
        )));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine with a zero vector"));
    }
    Ok((dot(&u.vector, &v.vector) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Fuses an image and a text embedding into one unit-norm vector.
pub fn fuse(img: &Embedding, txt: &Embedding, strategy: FusionStrategy) -> Result<Embedding> {
    if img.dim() != txt.dim() {
        return Err(Error::invalid(format!(
            "cannot fuse image dim {} with text dim {}",
            img.dim(),
            txt.dim()
        )));
    }
    let model_id = format!("{}+{}:{}", img.model_id, txt.model_id, strategy);
    match strategy {
        FusionStrategy::Sum => {
            let sum: Vec<f64> = img
                .vector
                .iter()
                .zip(&txt.vector)
                .map(|(&a, &b)| f64::from(a) + f64::from(b))
                .collect();
            let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < DEGENERATE_SUM_NORM {
                return Err(Error::DegenerateFusion { norm });
            }
            Embedding::normalized(&sum, Modality::Fused, model_id)
        }
        FusionStrategy::Concat => {
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            let vector = img
                .vector
                .iter()
                .chain(&txt.vector)
                .map(|&v| (f64::from(v) * scale) as f32)
                .collect();
            Ok(Embedding::new(vector, Modality::Fused, model_id))
        }
    }
}
