//! Classifiers used by the attack stages, plus a versioned JSON envelope for
//! persisting any trained model.

mod forest;
mod hmm;
mod knn;

pub use forest::{forest_fit, forest_importances, forest_predict, forest_votes, ForestMode, ForestModel, ForestParams, Node, Tree};
pub use hmm::{default_states, hmm_fit_supervised, hmm_forward, hmm_viterbi, HmmModel, LabeledSequence};
pub use knn::{knn_fit, knn_predict, KnnModel, KnnVote, DEFAULT_K};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, de-duplicated class labels; a label's position is its class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet(pub Vec<String>);

impl LabelSet {
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut v: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        v.sort();
        v.dedup();
        LabelSet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn encode(&self, label: &str) -> Result<usize> {
        self.0.binary_search_by(|x| x.as_str().cmp(label)).map_err(|_| Error::UnknownLabel(label.to_string()))
    }

    pub fn encode_all<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.encode(l.as_ref())).collect()
    }

    pub fn decode(&self, index: usize) -> &str {
        &self.0[index]
    }
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[String]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} samples but {} labels", x.len(), y.len())));
    }
    let dim = x[0].len();
    for row in x {
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("training features must be finite"));
        }
    }
    Ok(dim)
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// Which learner to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Knn { k: usize },
    Forest(ForestParams),
}

impl LearnerSpec {
    pub fn fit(&self, x: &[Vec<f64>], y: &[String], seed: u64) -> Result<Classifier> {
        Ok(match self {
            LearnerSpec::Knn { k } => Classifier::Knn(knn_fit(x, y, *k)?),
            LearnerSpec::Forest(p) => Classifier::Forest(forest_fit(x, y, p, seed)?),
        })
    }
}

/// A trained vector classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Knn(KnnModel),
    Forest(ForestModel),
}

impl Classifier {
    pub fn predict(&self, x: &[f64]) -> Result<String> {
        match self {
            Classifier::Knn(m) => knn_predict(m, x),
            Classifier::Forest(m) => forest_predict(m, x),
        }
    }

    pub fn labels(&self) -> &LabelSet {
        match self {
            Classifier::Knn(m) => &m.labels,
            Classifier::Forest(m) => &m.labels,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Knn(m) => m.dim(),
            Classifier::Forest(m) => m.dim,
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format_version: u32,
    kind: String,
    model: T,
}

/// Serializes a model inside a `{format_version, kind, model}` envelope.
pub fn model_to_json<T: Serialize>(kind: &str, model: &T) -> Result<String> {
    let env = Envelope { format_version: MODEL_FORMAT_VERSION, kind: kind.to_string(), model };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn model_from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| Error::Model(format!("unreadable model document: {e}")))?;
    if env.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            env.format_version
        )));
    }
    if env.kind != kind {
        return Err(Error::Model(format!("expected a `{kind}` model, found `{}`", env.kind)));
    }
    serde_json::from_value(env.model).map_err(|e| Error::Model(format!("malformed `{kind}` model: {e}")))
}

pub fn save_model<T: Serialize>(kind: &str, model: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(kind, model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: DeserializeOwned>(kind: &str, path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(kind, &text)
}
