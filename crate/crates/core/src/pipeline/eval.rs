use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::metrics::{macro_average, overall_accuracy, per_label_reports, MetricReport};
use crate::rng;

/// Scores of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    /// Macro average over labels (over folds, for cross-validation).
    pub report: MetricReport,
    pub per_label: Vec<(String, MetricReport)>,
    pub accuracy: f64,
}

impl EvalOutcome {
    pub fn label(&self, label: &str) -> Option<&MetricReport> {
        self.per_label.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }
}

fn by_class(y: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in y.iter().enumerate() {
        m.entry(l.as_str()).or_default().push(i);
    }
    m
}

fn check_stratifiable(y: &[String]) -> Result<BTreeMap<&str, Vec<usize>>> {
    let classes = by_class(y);
    if let Some((l, _)) = classes.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::invalid(format!("class `{l}` has fewer than 2 samples; stratification impossible")));
    }
    Ok(classes)
}

/// Fold index per sample. Each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped, so folds differ in size by
/// at most one.
pub fn stratified_folds(y: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if y.len() < folds {
        return Err(Error::invalid(format!("{} samples cannot fill {folds} folds", y.len())));
    }
    let classes = check_stratifiable(y)?;
    let mut r = rng::stream(seed, "folds");
    let mut assign = vec![0; y.len()];
    let mut next = 0;
    for (_, mut idx) in classes {
        idx.shuffle(&mut r);
        for i in idx {
            assign[i] = next % folds;
            next += 1;
        }
    }
    Ok(assign)
}

/// Stratified test-set membership with `round(n * fraction)` test samples,
/// allocated to classes by largest remainder while every class keeps at
/// least one training sample.
pub fn stratified_holdout(y: &[String], test_fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let classes = check_stratifiable(y)?;
    let total = (y.len() as f64 * test_fraction).round() as usize;
    let quotas: Vec<f64> = classes.values().map(|v| v.len() as f64 * test_fraction).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..take.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let mut missing = total.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if missing == 0 {
            break;
        }
        let size = classes.values().nth(c).unwrap().len();
        if take[c] + 1 < size {
            take[c] += 1;
            missing -= 1;
        }
    }
    let mut r = rng::stream(seed, "holdout");
    let mut test = vec![false; y.len()];
    for ((_, idx), k) in classes.into_iter().zip(take) {
        let mut idx = idx;
        idx.shuffle(&mut r);
        for &i in idx.iter().take(k) {
            test[i] = true;
        }
    }
    Ok(test)
}

fn score(pred: &[String], truth: &[String]) -> Result<EvalOutcome> {
    let per_label = per_label_reports(pred, truth)?;
    let reps: Vec<MetricReport> = per_label.iter().map(|(_, r)| r.clone()).collect();
    Ok(EvalOutcome { report: macro_average(&reps)?, per_label, accuracy: overall_accuracy(pred, truth)? })
}

fn pick<T: Clone>(v: &[T], keep: impl Fn(usize) -> bool) -> Vec<T> {
    v.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| x.clone()).collect()
}

fn fit_and_predict(
    x: &[Vec<f64>],
    y: &[String],
    is_test: impl Fn(usize) -> bool + Copy,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let xtr = pick(x, |i| !is_test(i));
    let ytr = pick(y, |i| !is_test(i));
    let model = spec.fit(&xtr, &ytr, seed)?;
    let xte = pick(x, is_test);
    let truth = pick(y, is_test);
    let pred = xte.iter().map(|r| model.predict(r)).collect::<Result<_>>()?;
    Ok((pred, truth))
}

/// Stratified k-fold cross-validation. The outcome's report and per-label
/// reports average the per-fold ones; accuracy is over all validated samples.
pub fn cross_validate(x: &[Vec<f64>], y: &[String], folds: usize, spec: &LearnerSpec, seed: u64) -> Result<EvalOutcome> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} samples but {} labels", x.len(), y.len())));
    }
    let assign = stratified_folds(y, folds, seed)?;
    let mut macros = Vec::new();
    let mut labelled: BTreeMap<String, Vec<MetricReport>> = BTreeMap::new();
    let mut all_pred = Vec::new();
    let mut all_truth = Vec::new();
    for f in 0..folds {
        let (pred, truth) = fit_and_predict(x, y, |i| assign[i] == f, spec, rng::derive_seed(seed, &format!("cv-fit/{f}")))?;
        let o = score(&pred, &truth)?;
        macros.push(o.report);
        for (l, r) in o.per_label {
            labelled.entry(l).or_default().push(r);
        }
        all_pred.extend(pred);
        all_truth.extend(truth);
    }
    Ok(EvalOutcome {
        report: macro_average(&macros)?,
        per_label: labelled.into_iter().map(|(l, v)| Ok((l, macro_average(&v)?))).collect::<Result<_>>()?,
        accuracy: overall_accuracy(&all_pred, &all_truth)?,
    })
}

/// Predictions and truth on a stratified hold-out split, for callers that
/// pool several evaluations before scoring.
pub fn holdout_predictions(
    x: &[Vec<f64>],
    y: &[String],
    test_fraction: f64,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} samples but {} labels", x.len(), y.len())));
    }
    let test = stratified_holdout(y, test_fraction, seed)?;
    fit_and_predict(x, y, |i| test[i], spec, rng::derive_seed(seed, "holdout-fit"))
}

/// Stratified hold-out evaluation on `test_fraction` of the samples.
pub fn holdout_eval(x: &[Vec<f64>], y: &[String], test_fraction: f64, spec: &LearnerSpec, seed: u64) -> Result<EvalOutcome> {
    let (pred, truth) = holdout_predictions(x, y, test_fraction, spec, seed)?;
    score(&pred, &truth)
}
