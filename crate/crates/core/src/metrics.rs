//! Confusion counts and the seven derived evaluation metrics.
//!
//! A metric whose denominator is zero is `None` ("undefined"), never a silent 0.
//! F1 is the harmonic mean of precision and recall, computed as
//! `2·TP / (2·TP + FP + FN)`, which is defined whenever that denominator is
//! positive.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// One-vs-rest counts for `positive` over paired predictions and truths.
    pub fn one_vs_rest<S: AsRef<str>>(predicted: &[S], truth: &[S], positive: &str) -> Self {
        let mut c = ConfusionCounts::default();
        for (p, t) in predicted.iter().zip(truth) {
            match (p.as_ref() == positive, t.as_ref() == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

const FIELDS: [&str; 7] = ["tpr", "fnr", "tnr", "fpr", "precision", "accuracy", "f1"];

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(c: ConfusionCounts) -> Result<MetricReport> {
    if c.total() == 0 {
        return Err(Error::invalid("confusion counts are all zero"));
    }
    let ConfusionCounts { tp, fp, tn, fn_ } = c;
    Ok(MetricReport {
        tpr: ratio(tp, tp + fn_),
        fnr: ratio(fn_, tp + fn_),
        tnr: ratio(tn, tn + fp),
        fpr: ratio(fp, tn + fp),
        precision: ratio(tp, tp + fp),
        accuracy: ratio(tp + tn, c.total()),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        support: tp + fn_,
    })
}

/// Unweighted mean of each defined field; support is summed.
pub fn macro_average(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::invalid("cannot average an empty list of reports"));
    }
    let mean = |get: fn(&MetricReport) -> Option<f64>| {
        let vals: Vec<f64> = reports.iter().filter_map(get).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    Ok(MetricReport {
        tpr: mean(|r| r.tpr),
        fnr: mean(|r| r.fnr),
        tnr: mean(|r| r.tnr),
        fpr: mean(|r| r.fpr),
        precision: mean(|r| r.precision),
        accuracy: mean(|r| r.accuracy),
        f1: mean(|r| r.f1),
        support: reports.iter().map(|r| r.support).sum(),
    })
}

/// Per-label one-vs-rest reports, in sorted label order over the union of
/// labels seen in either sequence.
pub fn per_label_reports<S: AsRef<str>>(predicted: &[S], truth: &[S]) -> Result<Vec<(String, MetricReport)>> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    let labels: BTreeSet<&str> = predicted.iter().chain(truth).map(|s| s.as_ref()).collect();
    labels
        .into_iter()
        .map(|l| Ok((l.to_string(), compute_metrics(ConfusionCounts::one_vs_rest(predicted, truth, l))?)))
        .collect()
}

/// Fraction of positions where prediction equals truth.
pub fn overall_accuracy<S: AsRef<str>>(predicted: &[S], truth: &[S]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p.as_ref() == t.as_ref()).count();
    Ok(hits as f64 / truth.len() as f64)
}

impl MetricReport {
    fn fields(&self) -> [(&'static str, Option<f64>); 7] {
        [
            (FIELDS[0], self.tpr),
            (FIELDS[1], self.fnr),
            (FIELDS[2], self.tnr),
            (FIELDS[3], self.fpr),
            (FIELDS[4], self.precision),
            (FIELDS[5], self.accuracy),
            (FIELDS[6], self.f1),
        ]
    }

    pub fn recall(&self) -> Option<f64> {
        self.tpr
    }

    /// `key=value` lines; undefined metrics print as `undefined`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.fields() {
            match v {
                Some(v) => writeln!(out, "{k}={v}").unwrap(),
                None => writeln!(out, "{k}=undefined").unwrap(),
            }
        }
        writeln!(out, "support={}", self.support).unwrap();
        out
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut map = Map::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::invalid(format!("bad metric line `{line}`")))?;
            let value = if v == "undefined" {
                Value::Null
            } else if let Ok(n) = v.parse::<u64>() {
                Value::from(n)
            } else {
                let x: f64 = v.parse().map_err(|_| Error::invalid(format!("bad metric value `{v}`")))?;
                serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
            };
            map.insert(k.to_string(), value);
        }
        Self::from_json_value(&Value::Object(map))
    }

    /// Flat JSON object: each metric as a number or `null`, plus a
    /// `<metric>_defined` flag.
    pub fn to_json_value(&self) -> Value {
        let mut map = Map::new();
        for (k, v) in self.fields() {
            map.insert(k.to_string(), v.and_then(serde_json::Number::from_f64).map(Value::Number).unwrap_or(Value::Null));
            map.insert(format!("{k}_defined"), Value::Bool(v.is_some()));
        }
        map.insert("support".into(), Value::from(self.support));
        Value::Object(map)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::invalid("metric report must be a JSON object"))?;
        let get = |k: &str| obj.get(k).and_then(Value::as_f64);
        Ok(MetricReport {
            tpr: get("tpr"),
            fnr: get("fnr"),
            tnr: get("tnr"),
            fpr: get("fpr"),
            precision: get("precision"),
            accuracy: get("accuracy"),
            f1: get("f1"),
            support: obj.get("support").and_then(Value::as_u64).unwrap_or(0),
        })
    }
}

impl Serialize for MetricReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        MetricReport::from_json_value(&v).map_err(serde::de::Error::custom)
    }
}
