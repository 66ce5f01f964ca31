use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, check_xy, LabelSet};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestMode {
    /// Bootstrap resampling, best midpoint threshold per candidate feature.
    Bagged,
    /// Whole training set per tree, one uniform random threshold per candidate feature.
    ExtremelyRandomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `max(1, floor(sqrt(d)))`.
    pub max_features: Option<usize>,
    pub mode: ForestMode,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 100, max_depth: None, min_samples_leaf: 1, max_features: None, mode: ForestMode::Bagged }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be >= 1"));
        }
        if self.max_features == Some(0) {
            return Err(Error::invalid("max_features must be >= 1"));
        }
        Ok(())
    }

    fn features_per_split(&self, dim: usize) -> usize {
        self.max_features.unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1)).min(dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// One decision tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub labels: LabelSet,
    pub dim: usize,
    pub trees: Vec<Tree>,
    /// Mean-decrease-in-impurity importances, summing to 1 (or all zero when
    /// no tree ever split).
    pub importances: Vec<f64>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl<'a> Builder<'a> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_threshold(&self, idx: &[usize], feature: usize, parent: &[usize]) -> Option<Candidate> {
        let min_leaf = self.params.min_samples_leaf;
        let n = idx.len();
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
        let mut left = vec![0usize; self.classes];
        let mut right = parent.to_vec();
        let parent_gini = gini(parent, n) * n as f64;
        let mut best: Option<Candidate> = None;
        for pos in 1..n {
            let moved = order[pos - 1];
            left[self.y[moved]] += 1;
            right[self.y[moved]] -= 1;
            let (a, b) = (self.x[order[pos - 1]][feature], self.x[order[pos]][feature]);
            if a == b || pos < min_leaf || n - pos < min_leaf {
                continue;
            }
            let decrease = parent_gini - gini(&left, pos) * pos as f64 - gini(&right, n - pos) * (n - pos) as f64;
            if best.as_ref().map_or(true, |c| decrease > c.decrease) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Candidate { feature, threshold, decrease });
            }
        }
        best
    }

    fn random_threshold(&mut self, idx: &[usize], feature: usize, parent: &[usize]) -> Option<Candidate> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx {
            lo = lo.min(self.x[i][feature]);
            hi = hi.max(self.x[i][feature]);
        }
        if lo >= hi {
            return None;
        }
        let mut threshold = self.rng.gen_range(lo..hi);
        if threshold >= hi {
            threshold = lo;
        }
        let mut left = vec![0usize; self.classes];
        let mut nl = 0;
        for &i in idx {
            if self.x[i][feature] <= threshold {
                left[self.y[i]] += 1;
                nl += 1;
            }
        }
        let n = idx.len();
        if nl < self.params.min_samples_leaf || n - nl < self.params.min_samples_leaf {
            return None;
        }
        let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
        let decrease =
            gini(parent, n) * n as f64 - gini(&left, nl) * nl as f64 - gini(&right, n - nl) * (n - nl) as f64;
        Some(Candidate { feature, threshold, decrease })
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure
            || idx.len() < 2 * self.params.min_samples_leaf
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return id;
        }
        let dim = self.x[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<Candidate> = None;
        // keep drawing features past mtry until at least one valid split exists
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            let cand = match self.params.mode {
                ForestMode::Bagged => self.best_threshold(&idx, f, &counts),
                ForestMode::ExtremelyRandomized => self.random_threshold(&idx, f, &counts),
            };
            if let Some(c) = cand {
                if best.as_ref().map_or(true, |b| c.decrease > b.decrease) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        self.importance[split.feature] += split.decrease.max(0.0);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

fn grow_tree(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    params: &ForestParams,
    seed: u64,
    index: usize,
) -> (Tree, Vec<f64>) {
    let mut rng = rng::indexed(seed, "forest/tree", index as u64);
    let n = x.len();
    let idx: Vec<usize> = match params.mode {
        ForestMode::Bagged => (0..n).map(|_| rng.gen_range(0..n)).collect(),
        ForestMode::ExtremelyRandomized => (0..n).collect(),
    };
    let dim = x[0].len();
    let mut b = Builder {
        x,
        y,
        classes,
        params,
        mtry: params.features_per_split(dim),
        rng,
        nodes: Vec::new(),
        importance: vec![0.0; dim],
    };
    b.build(idx, 0);
    let total: f64 = b.importance.iter().sum();
    if total > 0.0 {
        b.importance.iter_mut().for_each(|v| *v /= total);
    }
    (Tree { nodes: b.nodes }, b.importance)
}

pub fn forest_fit(x: &[Vec<f64>], y: &[String], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let dim = check_xy(x, y)?;
    params.validate()?;
    if dim == 0 {
        return Err(Error::invalid("forest needs at least one feature"));
    }
    let labels = LabelSet::from_labels(y);
    if labels.len() < 2 {
        return Err(Error::invalid("forest needs at least two distinct labels"));
    }
    let targets = labels.encode_all(y)?;
    let grown: Vec<(Tree, Vec<f64>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| grow_tree(x, &targets, labels.len(), params, seed, t))
        .collect();
    let mut importances = vec![0.0; dim];
    for (_, imp) in &grown {
        for (a, b) in importances.iter_mut().zip(imp) {
            *a += b;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        params: params.clone(),
        labels,
        dim,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        importances,
    })
}

/// Per-class vote counts; they sum to the number of trees.
pub fn forest_votes(model: &ForestModel, x: &[f64]) -> Result<Vec<usize>> {
    check_dim(model.dim, x)?;
    let mut votes = vec![0usize; model.labels.len()];
    for t in &model.trees {
        votes[t.predict(x)] += 1;
    }
    Ok(votes)
}

pub fn forest_predict(model: &ForestModel, x: &[f64]) -> Result<String> {
    let votes = forest_votes(model, x)?;
    Ok(model.labels.decode(majority(&votes)).to_string())
}

pub fn forest_importances(model: &ForestModel) -> Vec<f64> {
    model.importances.clone()
}
