use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{forest_fit, forest_importances, ForestMode, ForestParams};

/// Which features survive importance-based selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub kept: Vec<usize>,
    pub importances: Vec<f64>,
    pub threshold: f64,
}

impl SelectionMask {
    pub fn identity(dim: usize) -> Self {
        SelectionMask { kept: (0..dim).collect(), importances: vec![1.0 / dim as f64; dim], threshold: 0.0 }
    }

    pub fn input_dim(&self) -> usize {
        self.importances.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(self.kept.iter().map(|&i| x[i]).collect())
    }
}

/// Keeps the features whose importance strictly exceeds the mean
/// importance; keeps all of them when none does.
pub fn mask_from_importances(importances: &[f64]) -> SelectionMask {
    let threshold = importances.iter().sum::<f64>() / importances.len() as f64;
    let mut kept: Vec<usize> = (0..importances.len()).filter(|&i| importances[i] > threshold).collect();
    if kept.is_empty() {
        kept = (0..importances.len()).collect();
    }
    SelectionMask { kept, importances: importances.to_vec(), threshold }
}

/// Trains an extremely-randomized forest and keeps the features with
/// above-mean impurity-decrease importance.
pub fn select_features(x: &[Vec<f64>], y: &[String], seed: u64) -> Result<SelectionMask> {
    if x.len() < 10 {
        return Err(Error::invalid(format!("feature selection needs at least 10 samples, got {}", x.len())));
    }
    let params = ForestParams { mode: ForestMode::ExtremelyRandomized, ..ForestParams::default() };
    let model = forest_fit(x, y, &params, seed)?;
    Ok(mask_from_importances(&forest_importances(&model)))
}
