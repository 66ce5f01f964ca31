//! Shared fixtures for the stage benchmarks.

use hometrace::learners::{hmm_fit_supervised, HmmModel};
use hometrace::simulate::{builtin_scenario, generate_scenario};
use hometrace::{Capture, SpltMatrix, Trace};

/// Benchmark capture of `duration_s` seconds.
pub fn capture(duration_s: f64, seed: u64) -> Capture {
    let mut s = builtin_scenario("benchmark").expect("builtin scenario");
    s.duration_s = duration_s;
    generate_scenario(&s, seed).expect("scenario generates")
}

pub fn traces(c: &Capture) -> Vec<Trace> {
    c.traces.values().cloned().collect()
}

/// The busiest flow of `c` as an SPLT matrix.
pub fn busiest_splt(c: &Capture) -> SpltMatrix {
    let t = c.traces.values().max_by_key(|t| t.len()).expect("non-empty capture");
    hometrace::traceio::to_splt(t).expect("non-empty trace")
}

/// Two-class blobs in `dim` dimensions, deterministic.
pub fn blobs(n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let row = (0..dim).map(|j| ((i * 31 + j * 17) % 97) as f64 / 97.0 + 1.5 * c as f64).collect();
        x.push(row);
        y.push(format!("c{c}"));
    }
    (x, y)
}

/// An HMM fitted on a synthetic cycle through four states, plus an
/// observation sequence of length `len`.
pub fn hmm_fixture(width: usize, len: usize) -> (HmmModel, Vec<Vec<bool>>) {
    let states: Vec<String> = (0..4).map(|i| format!("S{i}")).collect();
    let obs: Vec<Vec<bool>> = (0..len).map(|t| (0..width).map(|j| (t / 7 + j) % 3 == 0).collect()).collect();
    let labels: Vec<String> = (0..len).map(|t| states[(t / 7) % 4].clone()).collect();
    let m = hmm_fit_supervised(&[(obs.clone(), labels)], &states, 0.01).expect("hmm fits");
    (m, obs)
}
