use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, InferenceMode};
use crate::harness::listing::{Listing, Query};
use crate::harness::metrics::MetricsReport;
use crate::harness::pipeline::{Encoders, Harness};
use crate::typograph::{Location, RenderSpec, Rgb};

fn default_modes() -> Vec<InferenceMode> {
    vec![InferenceMode::RenderedImageOnly, InferenceMode::RenderedSum]
}

/// Factor values to sweep. The grid is the cartesian product of the lists;
/// an empty list keeps the base config's value for that factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub colors: Vec<Rgb>,
    #[serde(default)]
    pub locations: Vec<Location>,
    /// Inference modes each cell runs under; defaults to rendered image-only
    /// and rendered sum.
    #[serde(default = "default_modes")]
    pub modes: Vec<InferenceMode>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            ratios: Vec::new(),
            colors: Vec::new(),
            locations: Vec::new(),
            modes: default_modes(),
        }
    }
}

/// One grid cell: a mode and the render spec it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub mode: InferenceMode,
    pub render_spec: RenderSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub report: MetricsReport,
}

impl SweepGrid {
    /// Four size ratios, five colors, three locations.
    pub fn typographic() -> Self {
        Self {
            ratios: vec![0.25, 0.5, 0.75, 1.0],
            colors: Rgb::SWEEP.iter().map(|(_, c)| *c).collect(),
            locations: vec![Location::Top, Location::Center, Location::Bottom],
            modes: default_modes(),
        }
    }

    pub fn ratios(ratios: &[f64]) -> Self {
        Self {
            ratios: ratios.to_vec(),
            ..Self::default()
        }
    }

    /// Expands the grid against `base`, validating every cell.
    pub fn cells(&self, base: &RenderSpec) -> Result<Vec<SweepCell>> {
        if self.ratios.is_empty() && self.colors.is_empty() && self.locations.is_empty() {
            return Err(Error::config("sweep grid has no factor values"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("sweep grid has no modes"));
        }
        let ratios = if self.ratios.is_empty() { vec![base.font_size_ratio] } else { self.ratios.clone() };
        let colors = if self.colors.is_empty() { vec![base.color] } else { self.colors.clone() };
        let locations =
            if self.locations.is_empty() { vec![base.location] } else { self.locations.clone() };

        let mut cells = Vec::new();
        for &ratio in &ratios {
            for &color in &colors {
                for &location in &locations {
                    let spec = RenderSpec {
                        font_size_ratio: ratio,
                        color,
                        location,
                        ..base.clone()
                    };
                    spec.validate()
                        .map_err(|e| Error::config(format!("invalid sweep cell: {e}")))?;
                    for &mode in &self.modes {
                        cells.push(SweepCell {
                            mode,
                            render_spec: spec.clone(),
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

impl Harness {
    /// Runs every cell of `grid` against `base`. All cells are validated
    /// before the first one runs; embeddings are shared through the cache.
    pub fn factor_sweep(
        &self,
        base: &ExperimentConfig,
        grid: &SweepGrid,
        queries: &[Query],
        products: &[Listing],
    ) -> Result<Vec<SweepRow>> {
        let base_spec = base.render_spec.clone().unwrap_or_default();
        let cells = grid.cells(&base_spec)?;
        let configs: Vec<ExperimentConfig> = cells
            .iter()
            .map(|c| {
                let cfg = ExperimentConfig {
                    mode: c.mode,
                    render_spec: Some(c.render_spec.clone()),
                    ..base.clone()
                };
                cfg.validate().map(|_| cfg)
            })
            .collect::<Result<_>>()?;
        super::experiment::check_truth_ids(queries, products)?;
        let encoders = Encoders::from_handles(&base.image_encoder, &base.text_encoder)?;
        cells
            .into_iter()
            .zip(configs)
            .map(|(cell, cfg)| {
                log::info!(
                    "sweep cell {} ratio={} color={} location={}",
                    cell.mode,
                    cell.render_spec.font_size_ratio,
                    cell.render_spec.color,
                    cell.render_spec.location
                );
                let report = self.run_with_encoders(&cfg, &encoders, queries, products)?;
                Ok(SweepRow { cell, report })
            })
            .collect()
    }
}

/// Runs a sweep with a fresh in-memory cache.
pub fn factor_sweep(
    base: &ExperimentConfig,
    grid: &SweepGrid,
    queries: &[Query],
    products: &[Listing],
) -> Result<Vec<SweepRow>> {
    Harness::new().factor_sweep(base, grid, queries, products)
}
