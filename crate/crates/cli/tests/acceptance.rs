//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Criteria run sequentially inside a single test so the printed runtimes are
//! not inflated by other tests competing for cores. Run with
//! `cargo test -p hometrace-cli --test acceptance -- --nocapture` to see the table.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use hometrace::defense::{defense_data, evaluate_defense_on, DefenseConfig, DefenseStage, DegradationCurve};
use hometrace::features::{select_features, ts_features, TS_DIM};
use hometrace::learners::{default_states, knn_fit, knn_predict, ForestParams, HmmModel, LearnerSpec};
use hometrace::pipeline::{
    annotated_segments, cross_validate, holdout_eval, stage1_identify, stage1_train, stage2_dataset, stage2_detect,
    stage2_train, stage4_infer, stage4_train, timeline_counts, SegmentAlign, WindowChoice,
};
use hometrace::simulate::home::{builtin_templates, expand_program, synthesize_snapshots, HomeLayout, SnapshotRun};
use hometrace::simulate::{
    builtin_scenario, generate_device_trace, generate_scenario, state_dataset_traces, Catalog, DeviceEvent,
    STATE_DATASET_DEVICES,
};
use hometrace::traceio::{serialize_capture, split_flows, SplitBy, SpltMatrix, SpltRow};
use hometrace::{compute_metrics, Capture, ConfusionCounts, DeviceIdentity, IntervalKind, Trace};
use hometrace_cli::args::{AttackArgs, LearnerKind, SimulateArgs, StageSel, TrainArgs};
use hometrace_cli::{cmd_attack, cmd_simulate, cmd_train};

/// Tolerances and thresholds pinned by the criteria.
mod pinned {
    pub const METRIC_TOL: f64 = 1e-12;
    pub const EXACT_FEATURE_TOL: f64 = 1e-9;
    pub const SPECTRAL_FEATURE_TOL: f64 = 1e-6;
    pub const HMM_LOG_TOL: f64 = 1e-9;
    pub const BURST_JITTER_S: f64 = 1e-9;
    pub const STAGE1_MIN_ACCURACY: f64 = 0.90;
    pub const STAGE2_MIN_F1: f64 = 0.88;
    pub const STAGE3_MIN_F1: f64 = 0.90;
    pub const STAGE3_MIN_REDUCTION: f64 = 0.40;
    pub const STAGE3_MASKED_SLACK: f64 = 0.02;
    pub const STAGE4_MIN_ACCURACY: f64 = 0.90;
    pub const STAGE4_MIN_F1: f64 = 0.88;
    pub const DEFENSE_MIN_DROP: f64 = 0.40;
    pub const DEFENSE_MAX_CLASSIFICATION_F1: f64 = 0.35;
    pub const DEFENSE_MONOTONE_TOL: f64 = 0.03;
    /// Time-resolved scoring grid for the window-ranking property.
    pub const TIMELINE_RESOLUTION_S: f64 = 0.25;
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn capture(name: &str, seed: u64) -> Capture {
    let s = builtin_scenario(name).unwrap();
    generate_scenario(&expand_program(&s, seed).unwrap(), seed).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------- 1

fn c01_metrics() -> Outcome {
    const U: Option<f64> = None;
    fn s(x: f64) -> Option<f64> {
        Some(x)
    }
    // (tp, fp, tn, fn) -> tpr, fnr, tnr, fpr, precision, accuracy, f1
    #[rustfmt::skip]
    let table: [((u64, u64, u64, u64), [Option<f64>; 7]); 25] = [
        ((5, 0, 5, 0), [s(1.0), s(0.0), s(1.0), s(0.0), s(1.0), s(1.0), s(1.0)]),
        ((0, 0, 10, 0), [U, U, s(1.0), s(0.0), U, s(1.0), U]),
        ((10, 0, 0, 0), [s(1.0), s(0.0), U, U, s(1.0), s(1.0), s(1.0)]),
        ((0, 10, 0, 0), [U, U, s(0.0), s(1.0), s(0.0), s(0.0), s(0.0)]),
        ((0, 0, 0, 10), [s(0.0), s(1.0), U, U, U, s(0.0), s(0.0)]),
        ((3, 1, 4, 2), [s(3.0 / 5.0), s(2.0 / 5.0), s(4.0 / 5.0), s(1.0 / 5.0), s(3.0 / 4.0), s(7.0 / 10.0), s(2.0 / 3.0)]),
        ((1, 1, 1, 1), [s(0.5), s(0.5), s(0.5), s(0.5), s(0.5), s(0.5), s(0.5)]),
        ((0, 5, 5, 0), [U, U, s(0.5), s(0.5), s(0.0), s(0.5), s(0.0)]),
        ((0, 0, 5, 5), [s(0.0), s(1.0), s(1.0), s(0.0), U, s(0.5), s(0.0)]),
        ((7, 3, 0, 0), [s(1.0), s(0.0), s(0.0), s(1.0), s(7.0 / 10.0), s(7.0 / 10.0), s(14.0 / 17.0)]),
        ((2, 0, 0, 3), [s(2.0 / 5.0), s(3.0 / 5.0), U, U, s(1.0), s(2.0 / 5.0), s(4.0 / 7.0)]),
        ((1, 2, 3, 4), [s(1.0 / 5.0), s(4.0 / 5.0), s(3.0 / 5.0), s(2.0 / 5.0), s(1.0 / 3.0), s(2.0 / 5.0), s(1.0 / 4.0)]),
        ((50, 10, 30, 10), [s(5.0 / 6.0), s(1.0 / 6.0), s(3.0 / 4.0), s(1.0 / 4.0), s(5.0 / 6.0), s(4.0 / 5.0), s(5.0 / 6.0)]),
        ((9, 1, 89, 1), [s(9.0 / 10.0), s(1.0 / 10.0), s(89.0 / 90.0), s(1.0 / 90.0), s(9.0 / 10.0), s(49.0 / 50.0), s(9.0 / 10.0)]),
        ((1, 0, 0, 0), [s(1.0), s(0.0), U, U, s(1.0), s(1.0), s(1.0)]),
        ((0, 1, 0, 0), [U, U, s(0.0), s(1.0), s(0.0), s(0.0), s(0.0)]),
        ((0, 0, 1, 0), [U, U, s(1.0), s(0.0), U, s(1.0), U]),
        ((0, 0, 0, 1), [s(0.0), s(1.0), U, U, U, s(0.0), s(0.0)]),
        ((4, 4, 0, 4), [s(0.5), s(0.5), s(0.0), s(1.0), s(0.5), s(1.0 / 3.0), s(0.5)]),
        ((6, 2, 12, 4), [s(3.0 / 5.0), s(2.0 / 5.0), s(6.0 / 7.0), s(1.0 / 7.0), s(3.0 / 4.0), s(3.0 / 4.0), s(2.0 / 3.0)]),
        ((1_000_000, 1, 1, 1), [s(1e6 / 1_000_001.0), s(1.0 / 1_000_001.0), s(0.5), s(0.5), s(1e6 / 1_000_001.0), s(1_000_001.0 / 1_000_003.0), s(1e6 / 1_000_001.0)]),
        ((3, 0, 7, 0), [s(1.0), s(0.0), s(1.0), s(0.0), s(1.0), s(1.0), s(1.0)]),
        ((0, 3, 7, 0), [U, U, s(7.0 / 10.0), s(3.0 / 10.0), s(0.0), s(7.0 / 10.0), s(0.0)]),
        ((0, 0, 7, 3), [s(0.0), s(1.0), s(1.0), s(0.0), U, s(7.0 / 10.0), s(0.0)]),
        ((2, 3, 5, 7), [s(2.0 / 9.0), s(7.0 / 9.0), s(5.0 / 8.0), s(3.0 / 8.0), s(2.0 / 5.0), s(7.0 / 17.0), s(2.0 / 7.0)]),
    ];
    let mut bad = Vec::new();
    for (i, ((tp, fp, tn, fn_), want)) in table.iter().enumerate() {
        let r = compute_metrics(ConfusionCounts::new(*tp, *fp, *tn, *fn_)).unwrap();
        let got = [r.tpr, r.fnr, r.tnr, r.fpr, r.precision, r.accuracy, r.f1];
        let ok = got.iter().zip(want).all(|(g, w)| match (g, w) {
            (None, None) => true,
            (Some(g), Some(w)) => (g - w).abs() <= pinned::METRIC_TOL,
            _ => false,
        }) && r.support == tp + fn_;
        if !ok {
            bad.push(i);
        }
    }
    let zero_rejected = compute_metrics(ConfusionCounts::default()).is_err();
    outcome(bad.is_empty() && zero_rejected, format!("25 matrices, mismatches={bad:?}, all-zero rejected={zero_rejected}"))
}

// ---------------------------------------------------------------- 2

mod feature_oracle {
    use super::*;

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn median(x: &[f64]) -> f64 {
        let mut v = x.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    fn central_moment(x: &[f64], k: i32) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
    }

    /// Bin `b` holds values with `b·(hi-lo) <= 10·(v-lo)`, the top bin closed.
    fn entropy(x: &[f64]) -> f64 {
        let lo = x.iter().cloned().fold(f64::MAX, f64::min);
        let hi = x.iter().cloned().fold(f64::MIN, f64::max);
        if lo == hi {
            return 0.0;
        }
        let mut counts = [0usize; 10];
        for v in x {
            let b = (0..10).rev().find(|&b| b as f64 * (hi - lo) <= 10.0 * (v - lo)).unwrap();
            counts[b] += 1;
        }
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / x.len() as f64;
                -p * p.ln()
            })
            .sum()
    }

    /// Full linear convolution with a freshly sampled Mexican-hat kernel,
    /// then the centred slice of the input's length.
    fn cwt(x: &[f64], width: f64) -> Vec<f64> {
        let mut d = x.to_vec();
        while d.len() < 5 {
            d.push(0.0);
        }
        let m = ((10.0 * width) as usize).min(d.len());
        let a = 2.0 / ((3.0 * width).sqrt() * PI.powf(0.25));
        let kernel: Vec<f64> = (0..m)
            .map(|i| {
                let t = i as f64 - (m - 1) as f64 / 2.0;
                a * (1.0 - (t / width).powi(2)) * (-(t * t) / (2.0 * width * width)).exp()
            })
            .collect();
        let mut full = vec![0.0; d.len() + m - 1];
        for (i, dv) in d.iter().enumerate() {
            for (j, kv) in kernel.iter().enumerate() {
                full[i + j] += dv * kv;
            }
        }
        let start = (m - 1) / 2;
        full[start..start + 5].to_vec()
    }

    fn fft_mags(x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        (0..10).map(|k| buf.get(k).map_or(0.0, |c| c.norm())).collect()
    }

    /// Normal equations for the cubic, solved by Gaussian elimination with
    /// partial pivoting.
    fn cubic(x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        while y.len() < 4 {
            y.push(0.0);
        }
        let n = y.len();
        let mut a = [[0.0f64; 5]; 4];
        for (i, yi) in y.iter().enumerate() {
            let t = i as f64 / (n - 1) as f64;
            let pw = [1.0, t, t * t, t * t * t];
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] += pw[r] * pw[c];
                }
                a[r][4] += pw[r] * yi;
            }
        }
        for col in 0..4 {
            let p = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, p);
            for r in 0..4 {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..5 {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..4).map(|r| a[r][4] / a[r][r]).collect()
    }

    /// Expected 44 values for one channel plus the tolerance of each.
    pub fn channel(x: &[f64]) -> Vec<(f64, f64)> {
        let e = pinned::EXACT_FEATURE_TOL;
        let sp = pinned::SPECTRAL_FEATURE_TOL;
        let m2 = central_moment(x, 2);
        let skew = if m2 == 0.0 { 0.0 } else { central_moment(x, 3) / m2.sqrt().powi(3) };
        let mut out = vec![
            (x.iter().map(|v| v * v).sum(), e),
            (x.len() as f64, e),
            (mean(x), e),
            (median(x), e),
            (skew, e),
            (entropy(x), e),
            (m2.sqrt(), e),
            (m2, e),
            (x.iter().cloned().fold(f64::MAX, f64::min), e),
            (x.iter().cloned().fold(f64::MIN, f64::max), e),
        ];
        for w in [2.0, 5.0, 10.0, 20.0] {
            out.extend(cwt(x, w).into_iter().map(|v| (v, sp)));
        }
        out.extend(fft_mags(x).into_iter().map(|v| (v, sp)));
        out.extend(cubic(x).into_iter().map(|v| (v, sp)));
        out
    }
}

fn random_splt(r: &mut ChaCha8Rng) -> SpltMatrix {
    let n = if r.gen_bool(0.2) { r.gen_range(1..6) } else { r.gen_range(6..80) };
    let mut t = 0.0;
    let rows = (0..n)
        .map(|_| {
            t += r.gen_range(0.0..2.0);
            SpltRow { timestamp: t, direction: r.gen_range(0..2), length: r.gen_range(40..1500) }
        })
        .collect();
    SpltMatrix { flow_id: "x".into(), rows }
}

fn c02_feature_bank() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut worst = (0.0f64, 0usize);
    let mut failures = 0;
    for _ in 0..100 {
        let m = random_splt(&mut r);
        let lens: Vec<f64> = m.rows.iter().map(|row| row.length as f64).collect();
        let mut iat: Vec<f64> = m.rows.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
        if iat.is_empty() {
            iat.push(0.0);
        }
        let mut want = feature_oracle::channel(&lens);
        want.extend(feature_oracle::channel(&iat));
        let got = ts_features(&m).0;
        assert_eq!(got.len(), TS_DIM);
        for (i, (g, (w, tol))) in got.iter().zip(&want).enumerate() {
            let err = (g - w).abs() / w.abs().max(1.0);
            if err > worst.0 {
                worst = (err, i);
            }
            if !close(*g, *w, *tol) {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("100 series x {TS_DIM} values, failures={failures}, worst rel err {:.2e} at {}", worst.0, worst.1))
}

// ---------------------------------------------------------------- 3

/// Exhaustive k-NN: z-score on the training points (constant features
/// dropped), all distances, nearest k by (distance, index), then votes.
fn knn_oracle(train: &[(Vec<f64>, String)], q: &[f64], k: usize) -> String {
    let d = q.len();
    let n = train.len() as f64;
    let mut scale = Vec::new();
    for j in 0..d {
        let mu = train.iter().map(|(x, _)| x[j]).sum::<f64>() / n;
        let sd = (train.iter().map(|(x, _)| (x[j] - mu).powi(2)).sum::<f64>() / n).sqrt();
        scale.push((mu, sd));
    }
    let z = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(&scale).map(|(v, (mu, sd))| if *sd > 0.0 { (v - mu) / sd } else { 0.0 }).collect()
    };
    let zq = z(q);
    let mut dist: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (x, _))| (z(x).iter().zip(&zq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(dd, i) in &dist[..k] {
        let e = tally.entry(train[i].1.as_str()).or_default();
        e.0 += 1;
        e.1 += dd;
    }
    let mut best: Option<(&str, usize, f64)> = None;
    for (l, (v, s)) in tally {
        let md = s / v as f64;
        best = match best {
            Some((bl, bv, bd)) if bv > v || (bv == v && bd <= md) => Some((bl, bv, bd)),
            _ => Some((l, v, md)),
        };
    }
    best.unwrap().0.to_string()
}

fn c03_knn() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    // integer grid coordinates so distance ties actually occur; third feature constant
    let data: Vec<(Vec<f64>, String)> = (0..40)
        .map(|i| {
            let c = i % 3;
            let x = vec![(r.gen_range(0..4) + 2 * c) as f64, r.gen_range(0..5) as f64, 7.0];
            (x, ["a", "b", "c"][c].to_string())
        })
        .collect();
    let mut mismatches = 0;
    for k in [1, 3, 5] {
        for i in 0..data.len() {
            let train: Vec<(Vec<f64>, String)> =
                data.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
            let x: Vec<Vec<f64>> = train.iter().map(|p| p.0.clone()).collect();
            let y: Vec<String> = train.iter().map(|p| p.1.clone()).collect();
            let m = knn_fit(&x, &y, k).unwrap();
            if knn_predict(&m, &data[i].0).unwrap() != knn_oracle(&train, &data[i].0, k) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("40-point leave-one-out, k in {{1,3,5}}, mismatches={mismatches}"))
}

// ---------------------------------------------------------------- 4

fn random_stochastic(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn c04_hmm() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let (mut path_bad, mut logp_bad, mut fwd_bad) = (0, 0, 0);
    for _ in 0..50 {
        let s = r.gen_range(1..=3);
        let width = r.gen_range(1..=3);
        let len = r.gen_range(1..=6);
        let model = HmmModel {
            states: (0..s).map(|i| format!("s{i}")).collect(),
            width,
            alpha: 0.0,
            initial: random_stochastic(&mut r, s),
            transition: (0..s).map(|_| random_stochastic(&mut r, s)).collect(),
            emission: (0..s).map(|_| (0..width).map(|_| r.gen_range(0.05..0.95)).collect()).collect(),
        };
        let obs: Vec<Vec<bool>> = (0..len).map(|_| (0..width).map(|_| r.gen_bool(0.5)).collect()).collect();
        let emit = |k: usize, o: &[bool]| -> f64 {
            model.emission[k].iter().zip(o).map(|(&p, &b)| if b { p } else { 1.0 - p }).product()
        };
        let (mut best_p, mut best_path, mut total) = (-1.0f64, Vec::new(), 0.0);
        for code in 0..s.pow(len as u32) {
            let path: Vec<usize> = (0..len).map(|t| (code / s.pow((len - 1 - t) as u32)) % s).collect();
            let mut p = model.initial[path[0]] * emit(path[0], &obs[0]);
            for t in 1..len {
                p *= model.transition[path[t - 1]][path[t]] * emit(path[t], &obs[t]);
            }
            total += p;
            if p > best_p {
                best_p = p;
                best_path = path;
            }
        }
        let (path, logp) = model.viterbi_indices(&obs).unwrap();
        path_bad += (path != best_path) as usize;
        logp_bad += ((logp - best_p.ln()).abs() > pinned::HMM_LOG_TOL) as usize;
        let fwd = hometrace::learners::hmm_forward(&model, &obs).unwrap();
        fwd_bad += ((fwd - total.ln()).abs() > pinned::HMM_LOG_TOL) as usize;
    }
    outcome(
        path_bad + logp_bad + fwd_bad == 0,
        format!("50 models, path mismatches={path_bad}, viterbi logp={logp_bad}, forward={fwd_bad}"),
    )
}

// ---------------------------------------------------------------- 5

/// Burst packets are found by difference: the same device and seed without
/// events yields only heartbeats and quirk packets.
fn c05_simulator() -> Outcome {
    let a = capture("benchmark", 9);
    let b = capture("benchmark", 9);
    let identical = serialize_capture(&a) == serialize_capture(&b);
    let c = capture("benchmark", 10);
    let differs = serialize_capture(&a) != serialize_capture(&c);

    let catalog = Catalog::builtin();
    let mut outside = 0;
    let mut burst_packets = 0;
    for arch in &catalog.archetypes {
        let actions: Vec<&String> = arch.actions.keys().collect();
        let events: Vec<DeviceEvent> =
            (0..12).map(|i| DeviceEvent::new(20.0 + 30.0 * i as f64, actions[i % actions.len()].clone())).collect();
        let with = generate_device_trace(arch, "f", &events, 400.0, 5).unwrap();
        let without = generate_device_trace(arch, "f", &[], 400.0, 5).unwrap();
        let key = |t: &Trace| -> Vec<(u64, u32, u8)> {
            t.records.iter().map(|r| (r.timestamp.to_bits(), r.length, r.direction.as_bit())).collect()
        };
        let mut background = key(&without);
        background.sort();
        let spans: Vec<(f64, f64)> =
            with.annotations_of(IntervalKind::DeviceActivity).map(|a| (a.start, a.end)).collect();
        for (ts, len, dir) in key(&with) {
            if let Ok(pos) = background.binary_search(&(ts, len, dir)) {
                background.remove(pos);
                continue;
            }
            burst_packets += 1;
            let t = f64::from_bits(ts);
            let tol = pinned::BURST_JITTER_S;
            if !spans.iter().any(|&(s, e)| s - tol <= t && t <= e + tol) {
                outside += 1;
            }
        }
    }
    outcome(
        identical && differs && outside == 0 && burst_packets > 0,
        format!(
            "same seed identical={identical}, other seed differs={differs}, burst packets={burst_packets}, outside annotations={outside}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn c06_stage1() -> Outcome {
    let train = split_flows(&capture("benchmark", 1), SplitBy::FlowId);
    let test = split_flows(&capture("benchmark", 2), SplitBy::FlowId);
    let identities: std::collections::BTreeSet<String> = train
        .iter()
        .filter(|t| !t.meta.is_zigbee_coordinator())
        .filter_map(|t| t.meta.identity().map(|i| i.to_string()))
        .collect();
    let m = stage1_train(&train, 10.0, 5).unwrap();
    let ids = stage1_identify(&test, &m, 10.0).unwrap();
    let mut hits = 0;
    let mut hub_ok = false;
    for t in &test {
        let truth = t.meta.identity().unwrap();
        let ok = ids[&t.meta.flow_id] == truth;
        hits += ok as usize;
        if t.meta.is_zigbee_coordinator() {
            hub_ok = ok && !m.knn.labels.0.contains(&truth.to_string());
        }
    }
    let acc = hits as f64 / test.len() as f64;
    outcome(
        acc >= pinned::STAGE1_MIN_ACCURACY && hub_ok && identities.len() == 8,
        format!("{} archetypes, per-flow accuracy {acc:.3} (>= {}), hub bypass={hub_ok}", identities.len(), pinned::STAGE1_MIN_ACCURACY),
    )
}

// ---------------------------------------------------------------- 7

struct Stage2Score {
    window_f1: f64,
    timeline_f1: f64,
}

fn stage2_score(train: &[Trace], test: &[Trace], spec: &LearnerSpec, window: WindowChoice) -> Stage2Score {
    let model = stage2_train(train, spec, window, 7).unwrap();
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    let mut timeline = ConfusionCounts::default();
    for t in test {
        let Some(id) = t.meta.identity() else { continue };
        let Ok(det) = model.detector(&id) else { continue };
        let (x, y) = stage2_dataset([t], det.window_s).unwrap();
        for (row, label) in x.iter().zip(y) {
            pred.push(det.classifier.predict(row).unwrap());
            truth.push(label);
        }
        let ts = stage2_detect(t, det, det.window_s).unwrap();
        let acts: Vec<_> = t.annotations_of(IntervalKind::DeviceActivity).cloned().collect();
        let c = timeline_counts(&ts, &acts, t.last_timestamp().unwrap(), pinned::TIMELINE_RESOLUTION_S).unwrap();
        timeline = ConfusionCounts::new(timeline.tp + c.tp, timeline.fp + c.fp, timeline.tn + c.tn, timeline.fn_ + c.fn_);
    }
    Stage2Score {
        window_f1: compute_metrics(ConfusionCounts::one_vs_rest(&pred, &truth, "1")).unwrap().f1.unwrap(),
        timeline_f1: compute_metrics(timeline).unwrap().f1.unwrap(),
    }
}

fn c07_stage2() -> Outcome {
    let train = split_flows(&capture("benchmark", 1), SplitBy::FlowId);
    let test = split_flows(&capture("benchmark", 2), SplitBy::FlowId);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec) in [("kNN", LearnerSpec::Knn { k: 5 }), ("RF", LearnerSpec::Forest(ForestParams::default()))] {
        let quarter = stage2_score(&train, &test, &spec, WindowChoice::Recommended);
        let full = stage2_score(&train, &test, &spec, WindowChoice::DurationTimes(1.0));
        pass &= quarter.window_f1 >= pinned::STAGE2_MIN_F1 && quarter.timeline_f1 >= full.timeline_f1;
        parts.push(format!(
            "{name} F1(d/4)={:.3} timeline F1 d/4={:.3} vs d={:.3}",
            quarter.window_f1, quarter.timeline_f1, full.timeline_f1
        ));
    }
    outcome(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 8

fn state_dataset() -> (Vec<Vec<f64>>, Vec<String>) {
    let catalog = Catalog::builtin();
    let archetypes: Vec<_> = STATE_DATASET_DEVICES
        .iter()
        .map(|id| catalog.find(&DeviceIdentity::parse(id).unwrap()).unwrap())
        .collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for t in state_dataset_traces(&archetypes, 84, 45.0, 11).unwrap() {
        for s in annotated_segments(&t, SegmentAlign::Raw).unwrap() {
            x.push(ts_features(&s.packets).0);
            y.push(format!("{}:{}", t.meta.flow_id, s.label.unwrap()));
        }
    }
    (x, y)
}

fn c08_stage3() -> Outcome {
    let (x, y) = state_dataset();
    let spec = LearnerSpec::Forest(ForestParams::default());
    let cv = cross_validate(&x, &y, 5, &spec, 3).unwrap().report.f1.unwrap();
    let ho = holdout_eval(&x, &y, 0.25, &spec, 3).unwrap().report.f1.unwrap();
    let mask = select_features(&x, &y, 5).unwrap();
    let xm: Vec<Vec<f64>> = x.iter().map(|r| mask.apply(r).unwrap()).collect();
    let hm = holdout_eval(&xm, &y, 0.25, &spec, 3).unwrap().report.f1.unwrap();
    let reduction = 1.0 - mask.kept.len() as f64 / TS_DIM as f64;
    outcome(
        cv >= pinned::STAGE3_MIN_F1
            && ho >= pinned::STAGE3_MIN_F1
            && reduction >= pinned::STAGE3_MIN_REDUCTION
            && hm >= ho - pinned::STAGE3_MASKED_SLACK,
        format!(
            "{} segments, CV F1={cv:.3}, hold-out F1={ho:.3}, kept {}/{TS_DIM} ({:.0}% fewer), masked hold-out F1={hm:.3}",
            x.len(),
            mask.kept.len(),
            reduction * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 9

fn decode_run(labels: &[&str], noise: f64) -> (f64, f64) {
    let layout = HomeLayout::walking();
    let templates = builtin_templates();
    let run = |activities, noise| SnapshotRun {
        activities,
        labels: labels.iter().map(|s| s.to_string()).collect(),
        step_len: (3, 6),
        idle_len: (5, 15),
        noise,
        grid_s: 1.0,
    };
    let train = synthesize_snapshots(&layout, &templates, &run(300, noise), 41).unwrap();
    let test = synthesize_snapshots(&layout, &templates, &run(100, noise), 42).unwrap();
    let m = stage4_train(&[train], &default_states(), 0.01, 1.0).unwrap();
    let out = stage4_infer(&test.0, &m.hmm, Some(&test.1)).unwrap();
    (out.accuracy.unwrap(), out.macro_report.unwrap().f1.unwrap())
}

fn c09_stage4() -> Outcome {
    let (acc_ti, f_ti) = decode_run(&["Activity-1", "Activity-2", "Activity-3"], 0.0);
    let (acc_td, f_td) = decode_run(&["Activity-4", "Activity-5", "Activity-6"], 0.05);
    outcome(
        acc_ti == 1.0 && acc_td >= pinned::STAGE4_MIN_ACCURACY && f_td >= pinned::STAGE4_MIN_F1,
        format!("time-independent accuracy={acc_ti:.3} (F={f_ti:.3}); time-dependent at 5% noise accuracy={acc_td:.3} F={f_td:.3}"),
    )
}

// ---------------------------------------------------------------- 10

fn c10_defense() -> Outcome {
    let data = defense_data(&builtin_scenario("defense").unwrap(), 5).unwrap();
    let rates: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let cfg = DefenseConfig::default();
    let det = evaluate_defense_on(&data, DefenseStage::Detection, &rates, 5, &cfg).unwrap();
    let cls = evaluate_defense_on(&data, DefenseStage::Classification, &rates, 5, &cfg).unwrap();
    let f1s = |c: &DegradationCurve| -> Vec<f64> { c.points.iter().map(|p| p.report.f1.unwrap_or(0.0)).collect() };
    let monotone = |f: &[f64]| {
        f.iter().all(|&v| v <= f[0]) && f.windows(2).all(|w| w[1] <= w[0] + pinned::DEFENSE_MONOTONE_TOL)
    };
    let (fd, fc) = (f1s(&det), f1s(&cls));
    let drop = fd[0] - fd[9];
    outcome(
        drop >= pinned::DEFENSE_MIN_DROP
            && fc[9] <= pinned::DEFENSE_MAX_CLASSIFICATION_F1
            && monotone(&fd)
            && monotone(&fc)
            && det.points.len() == 10,
        format!(
            "detection F1 {:.3} -> {:.3} (drop {:.1} pts), classification F1 {:.3} -> {:.3}, monotone det={} cls={}",
            fd[0],
            fd[9],
            drop * 100.0,
            fc[0],
            fc[9],
            monotone(&fd),
            monotone(&fc)
        ),
    )
}

// ---------------------------------------------------------------- 11

fn run_cascade(root: &Path) -> String {
    let (train, test, models, out) = (root.join("train"), root.join("test"), root.join("models"), root.join("attack"));
    cmd_simulate(&SimulateArgs { scenario: "benchmark".into(), seed: 1, out: train.clone() }).unwrap();
    cmd_simulate(&SimulateArgs { scenario: "benchmark".into(), seed: 2, out: test.clone() }).unwrap();
    cmd_train(&TrainArgs {
        capture: train,
        stage: StageSel::All,
        seed: 1,
        interval: 10.0,
        window: None,
        k: 5,
        trees: 100,
        alpha: 0.01,
        learner: LearnerKind::Knn,
        grid: 1.0,
        no_select: false,
        out: models.clone(),
    })
    .unwrap();
    let report = cmd_attack(&AttackArgs { capture: test, models, deployment: None, resume_from: None, out }).unwrap();
    assert!(report.identification_accuracy.is_some());
    assert!(report.detection.as_ref().and_then(|r| r.f1).is_some());
    assert!(report.classification_accuracy.is_some());
    assert!(report.activity_accuracy.is_some());
    assert!(report.cascade_bound.is_some());
    report.to_text()
}

fn snapshot_dir(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn c11_end_to_end() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = run_cascade(a.path());
    run_cascade(b.path());
    let (fa, fb) = (snapshot_dir(a.path()), snapshot_dir(b.path()));
    let same = fa == fb;
    let bound = text.lines().find(|l| l.starts_with("cascade_bound=")).unwrap_or("cascade_bound missing").to_string();
    let stages = text.lines().filter(|l| l.starts_with(['X', 'Y', 'Z', 'T'])).map(str::to_string).collect::<Vec<_>>();
    let populated = stages.len() == 4 && !text.contains("undefined");
    outcome(
        same && populated,
        format!("{} files bit-identical across reruns={same}; {}; {bound}", fa.len(), stages.join("; ")),
    )
}

// ----------------------------------------------------------------

// runs without the libtest harness so the PASS/FAIL table always prints
fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance_criteria: test");
        return;
    }
    type Criterion = (u32, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "metrics oracle", Duration::from_secs(1), c01_metrics),
        (2, "feature-bank oracle", Duration::from_secs(10), c02_feature_bank),
        (3, "kNN brute-force equivalence", Duration::from_secs(1), c03_knn),
        (4, "HMM enumeration oracle", Duration::from_secs(5), c04_hmm),
        (5, "simulator determinism and soundness", Duration::from_secs(5), c05_simulator),
        (6, "stage-1 identification", Duration::from_secs(30), c06_stage1),
        (7, "stage-2 detection", Duration::from_secs(60), c07_stage2),
        (8, "stage-3 state classification", Duration::from_secs(120), c08_stage3),
        (9, "stage-4 activity decoding", Duration::from_secs(30), c09_stage4),
        (10, "defense degradation curves", Duration::from_secs(300), c10_defense),
        (11, "end-to-end cascade", Duration::from_secs(600), c11_end_to_end),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, f) in criteria {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let took = t0.elapsed();
        let o = result.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        println!(
            "{} [{id:>2}] {name}: {} | {:.2}s (budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
