use serde::{Deserialize, Serialize};

use super::{check_dim, check_xy, LabelSet};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

/// k-nearest-neighbours over z-scored features.
///
/// Features with zero spread in the training data are flagged constant
/// (`std == 0`) and contribute nothing to distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
    pub labels: LabelSet,
}

/// Outcome of one prediction, with the evidence used for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnVote {
    pub label: String,
    pub votes: usize,
    /// Mean distance from the query to the neighbours that voted for `label`.
    pub mean_distance: f64,
}

pub fn knn_fit(x: &[Vec<f64>], y: &[String], k: usize) -> Result<KnnModel> {
    let dim = check_xy(x, y)?;
    if k == 0 || k % 2 == 0 {
        return Err(Error::invalid(format!("k must be an odd integer >= 1, got {k}")));
    }
    if k > x.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the {} training points", x.len())));
    }
    let n = x.len() as f64;
    let means: Vec<f64> = (0..dim).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let stds: Vec<f64> = (0..dim)
        .map(|j| {
            let var = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 1e-12 * means[j].abs().max(1.0) {
                s
            } else {
                0.0
            }
        })
        .collect();
    let labels = LabelSet::from_labels(y);
    let mut model = KnnModel { k, means, stds, points: Vec::new(), targets: labels.encode_all(y)?, labels };
    model.points = x.iter().map(|r| model.standardize(r)).collect();
    Ok(model)
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    /// Indices and distances of the `k` nearest training points, ordered by
    /// distance then training index.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        check_dim(self.dim(), x)?;
        let q = self.standardize(x);
        let mut d: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d.truncate(self.k);
        Ok(d)
    }

    pub fn predict_detail(&self, x: &[f64]) -> Result<KnnVote> {
        let nb = self.neighbours(x)?;
        let mut votes = vec![0usize; self.labels.len()];
        let mut dist = vec![0.0f64; self.labels.len()];
        for &(i, d) in &nb {
            votes[self.targets[i]] += 1;
            dist[self.targets[i]] += d;
        }
        // most votes, then smallest mean distance, then label order
        let mut best = 0usize;
        for c in 1..votes.len() {
            let (vb, vc) = (votes[best], votes[c]);
            if vc > vb || (vc == vb && vc > 0 && dist[c] / (vc as f64) < dist[best] / (vb as f64)) {
                best = c;
            }
        }
        Ok(KnnVote {
            label: self.labels.decode(best).to_string(),
            votes: votes[best],
            mean_distance: dist[best] / votes[best] as f64,
        })
    }
}

pub fn knn_predict(model: &KnnModel, x: &[f64]) -> Result<String> {
    Ok(model.predict_detail(x)?.label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn separated_clusters() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.5, 0.0], vec![10.0, 10.0], vec![10.0, 9.5], vec![9.5, 10.0]];
        let y = labels(&["A", "A", "A", "B", "B", "B"]);
        let m = knn_fit(&x, &y, 3).unwrap();
        assert_eq!(knn_predict(&m, &[1.0, 1.0]).unwrap(), "A");
        assert_eq!(knn_predict(&m, &[9.0, 9.0]).unwrap(), "B");
    }

    #[test]
    fn k1_returns_training_label() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = labels(&["a", "b", "c"]);
        let m = knn_fit(&x, &y, 1).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(&knn_predict(&m, xi).unwrap(), yi);
        }
    }

    #[test]
    fn vote_tie_prefers_closer_label() {
        // k = 3 with three labels, one vote each: the nearest wins
        let x = vec![vec![0.0], vec![2.0], vec![3.0]];
        let y = labels(&["far", "near", "mid"]);
        let m = knn_fit(&x, &y, 3).unwrap();
        assert_eq!(knn_predict(&m, &[2.1]).unwrap(), "near");
    }

    #[test]
    fn errors() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = labels(&["a", "b"]);
        assert!(knn_fit(&x, &y, 3).is_err());
        assert!(knn_fit(&x, &y, 2).is_err());
        let m = knn_fit(&x, &y, 1).unwrap();
        assert!(knn_predict(&m, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn constant_feature_ignored() {
        let x = vec![vec![0.0, 7.0], vec![1.0, 7.0], vec![10.0, 7.0]];
        let y = labels(&["a", "a", "b"]);
        let m = knn_fit(&x, &y, 1).unwrap();
        assert_eq!(m.stds[1], 0.0);
        assert_eq!(knn_predict(&m, &[9.0, -100.0]).unwrap(), "b");
    }
}
