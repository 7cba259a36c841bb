//! JSON run configuration: environment block, learner hyperparameters and
//! sweep options in one flat object. Absent fields take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{GridSpec, GridWorld};
use crate::error::{QsdError, Result};
use crate::learner::LearnerConfig;
use crate::metrics::{StatsOptions, TotalDistanceMode};
use crate::scalar::Scalar;
use crate::sweep::{CountReading, SelectionOptions, SweepOptions};

/// Scale sets studied on the two preset layouts.
pub const SCALES_3X3: [f64; 7] = [0.0, 0.04, 0.08, 0.10, 0.15, 0.20, 0.24];
pub const SCALES_4X4: [f64; 6] = [0.0, 0.04, 0.06, 0.08, 0.10, 0.12];

fn default_alpha() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    0.9
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_episodes() -> usize {
    100
}
fn default_runs() -> usize {
    1000
}
fn default_tail_fraction() -> f64 {
    0.25
}
fn default_plateau_band() -> f64 {
    3.0
}
fn default_filter_threshold() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub side: usize,
    #[serde(default)]
    pub object_cells: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub scale: f64,
    /// Filled with three actions per free cell when absent.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default = "default_episodes")]
    pub episodes_per_run: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub home_cell: Option<usize>,
    /// Sweep scale list. Filled from the preset sets for 3×3 and 4×4.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default)]
    pub total_distance_mode: TotalDistanceMode,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "default_plateau_band")]
    pub plateau_band_pp: f64,
    #[serde(default = "default_filter_threshold")]
    pub filter_threshold_pp: f64,
    #[serde(default)]
    pub count_reading: CountReading,
    #[serde(default)]
    pub unpaired_seeds: bool,
}

impl RunConfig {
    /// Defaults around a preset layout.
    pub fn preset(side: usize) -> Result<RunConfig> {
        let spec = GridSpec::preset(side)?;
        Self::from_json(&serde_json::json!({ "side": spec.side, "object_cells": spec.object_cells }).to_string())
    }

    /// Parses, fills defaults and validates.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| QsdError::json("<config>", e))?;
        cfg.fill_defaults()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Resolves the fields whose default depends on the layout.
    pub fn fill_defaults(&mut self) -> Result<()> {
        let world = self.world()?;
        if self.max_iterations.is_none() {
            self.max_iterations = Some(LearnerConfig::<f64>::default_max_iterations(&world));
        }
        if self.scales.is_none() {
            self.scales = match (self.side, self.object_cells.as_slice()) {
                (3, [4]) => Some(SCALES_3X3.to_vec()),
                (4, [5, 6, 9, 10]) => Some(SCALES_4X4.to_vec()),
                _ => Some(vec![0.0, 0.04, 0.08, 0.10]),
            };
        }
        Ok(())
    }

    /// Replaces the environment block with a preset layout.
    pub fn set_grid(&mut self, side: usize) -> Result<()> {
        let spec = GridSpec::preset(side)?;
        if spec.side != self.side || spec.object_cells != self.object_cells {
            self.side = spec.side;
            self.object_cells = spec.object_cells;
            self.max_iterations = None;
            self.scales = None;
            self.home_cell = None;
        }
        self.fill_defaults()
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            side: self.side,
            object_cells: self.object_cells.clone(),
        }
    }

    pub fn world(&self) -> Result<GridWorld> {
        self.grid_spec().build()
    }

    pub fn learner<T: Scalar>(&self) -> Result<LearnerConfig<T>> {
        let world = self.world()?;
        Ok(LearnerConfig {
            alpha: T::lit(self.alpha),
            gamma: T::lit(self.gamma),
            epsilon: self.epsilon,
            scale: T::lit(self.scale),
            max_iterations: self
                .max_iterations
                .unwrap_or_else(|| LearnerConfig::<T>::default_max_iterations(&world)),
            episodes_per_run: self.episodes_per_run,
            runs: self.runs,
            seed: self.seed,
            home_cell: self.home_cell,
        })
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            stats: StatsOptions {
                total_distance_mode: self.total_distance_mode,
                tail_fraction: self.tail_fraction,
                plateau_band_pp: self.plateau_band_pp,
            },
            selection: SelectionOptions {
                filter_threshold_pp: self.filter_threshold_pp,
                count_reading: self.count_reading,
            },
            unpaired_seeds: self.unpaired_seeds,
        }
    }

    pub fn scale_list(&self) -> Vec<f64> {
        self.scales.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let world = self.world()?;
        self.learner::<f64>()?.validate(&world)?;
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(QsdError::InvalidConfig(format!(
                "tail_fraction must lie in (0, 1], got {}",
                self.tail_fraction
            )));
        }
        for (name, v) in [
            ("plateau_band_pp", self.plateau_band_pp),
            ("filter_threshold_pp", self.filter_threshold_pp),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(QsdError::InvalidConfig(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if let Some(scales) = &self.scales {
            if let Some(bad) = scales.iter().find(|s| **s < 0.0 || !s.is_finite()) {
                return Err(QsdError::InvalidConfig(format!(
                    "scaling factors must satisfy s >= 0, got {bad}"
                )));
            }
        }
        Ok(())
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| QsdError::io(path, e))?;
    RunConfig::from_json(&text).map_err(|e| match e {
        QsdError::Json { source, .. } => QsdError::json(path, source),
        other => other,
    })
}
