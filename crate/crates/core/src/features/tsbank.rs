//! Fixed time-series feature bank for state classification.
//!
//! Each channel (packet lengths, inter-arrival times) yields 44 features in
//! this order:
//!
//! | idx    | feature                                                   |
//! |--------|-----------------------------------------------------------|
//! | 0      | absolute energy `Σx²`                                     |
//! | 1      | series length (before padding)                            |
//! | 2–3    | mean, median                                              |
//! | 4      | skewness `m3 / m2^1.5` (0 for constant series)            |
//! | 5      | entropy of a 10-bin equal-width histogram, natural log    |
//! | 6–7    | population standard deviation, variance                   |
//! | 8–9    | minimum, maximum                                          |
//! | 10–29  | Ricker CWT, widths 2/5/10/20, first 5 coefficients each   |
//! | 30–39  | DFT magnitudes at indices 0..9 (0 beyond the series length) |
//! | 40–43  | least-squares cubic coefficients `c0..c3` over `t ∈ [0,1]` |
//!
//! Padding: the CWT zero-pads series shorter than 5 to length 5 and the cubic
//! fit zero-pads series shorter than 4 to length 4. A segment with a single
//! packet has inter-arrival series `[0]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::window::{mean, median, population_std};
use crate::traceio::SpltMatrix;

pub const CWT_WIDTHS: [usize; 4] = [2, 5, 10, 20];
pub const CWT_COEFFS: usize = 5;
pub const FFT_COEFFS: usize = 10;
pub const POLY_DEGREE: usize = 3;
pub const HIST_BINS: usize = 10;
pub const FEATURES_PER_CHANNEL: usize = 10 + CWT_WIDTHS.len() * CWT_COEFFS + FFT_COEFFS + POLY_DEGREE + 1;
pub const CHANNELS: [&str; 2] = ["len", "iat"];
pub const TS_DIM: usize = FEATURES_PER_CHANNEL * CHANNELS.len();

/// Fixed-width feature vector of one segment; see [`feature_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct TsFeatureVector(pub Vec<f64>);

impl TsFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn channel_feature_names() -> Vec<String> {
    let mut names: Vec<String> =
        ["abs_energy", "length", "mean", "median", "skewness", "entropy", "std", "variance", "minimum", "maximum"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    for w in CWT_WIDTHS {
        for c in 0..CWT_COEFFS {
            names.push(format!("cwt_w{w}_c{c}"));
        }
    }
    for k in 0..FFT_COEFFS {
        names.push(format!("fft_mag_{k}"));
    }
    for c in 0..=POLY_DEGREE {
        names.push(format!("poly_c{c}"));
    }
    names
}

pub fn feature_names() -> Vec<String> {
    let per = channel_feature_names();
    CHANNELS.iter().flat_map(|ch| per.iter().map(move |n| format!("{ch}__{n}"))).collect()
}

pub fn abs_energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return 0.0;
    }
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

pub fn histogram_entropy(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return 0.0;
    }
    let mut counts = [0usize; HIST_BINS];
    for v in x {
        let b = ((v - lo) * HIST_BINS as f64 / (hi - lo)).floor() as usize;
        counts[b.min(HIST_BINS - 1)] += 1;
    }
    let n = x.len() as f64;
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// Ricker (Mexican hat) wavelet sampled at `points` positions centred on 0.
pub fn ricker(points: usize, width: f64) -> Vec<f64> {
    let a = 2.0 / ((3.0 * width).sqrt() * PI.powf(0.25));
    let wsq = width * width;
    (0..points)
        .map(|i| {
            let x = i as f64 - (points as f64 - 1.0) / 2.0;
            let xsq = x * x;
            a * (1.0 - xsq / wsq) * (-xsq / (2.0 * wsq)).exp()
        })
        .collect()
}

/// First `CWT_COEFFS` outputs of the centred ("same"-mode) convolution of the
/// series with a Ricker kernel of `min(10·width, len)` points.
pub fn cwt_head(x: &[f64], width: usize) -> [f64; CWT_COEFFS] {
    let mut data = x.to_vec();
    if data.len() < CWT_COEFFS {
        data.resize(CWT_COEFFS, 0.0);
    }
    let n = (10 * width).min(data.len());
    let kernel = ricker(n, width as f64);
    let offset = (n - 1) / 2;
    let mut out = [0.0; CWT_COEFFS];
    for (i, o) in out.iter_mut().enumerate() {
        let full_idx = i + offset;
        let mut acc = 0.0;
        for (k, kv) in kernel.iter().enumerate() {
            if let Some(j) = full_idx.checked_sub(k) {
                if j < data.len() {
                    acc += data[j] * kv;
                }
            }
        }
        *o = acc;
    }
    out
}

/// DFT magnitudes `|X_k|` for `k < FFT_COEFFS`; zero where `k >= len`.
pub fn dft_magnitudes(x: &[f64]) -> [f64; FFT_COEFFS] {
    let n = x.len();
    let mut out = [0.0; FFT_COEFFS];
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let ang = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        *o = re.hypot(im);
    }
    out
}

/// Least-squares cubic `c0 + c1·t + c2·t² + c3·t³` with `t_i = i / (n-1)`.
pub fn cubic_fit(x: &[f64]) -> [f64; POLY_DEGREE + 1] {
    let mut y = x.to_vec();
    if y.len() < POLY_DEGREE + 1 {
        y.resize(POLY_DEGREE + 1, 0.0);
    }
    let n = y.len();
    let design = DMatrix::from_fn(n, POLY_DEGREE + 1, |i, j| (i as f64 / (n - 1) as f64).powi(j as i32));
    let rhs = DVector::from_vec(y);
    let sol = design.svd(true, true).solve(&rhs, 1e-14).expect("svd with both factors computed");
    [sol[0], sol[1], sol[2], sol[3]]
}

pub fn channel_features(x: &[f64]) -> Vec<f64> {
    debug_assert!(!x.is_empty());
    let mut f = Vec::with_capacity(FEATURES_PER_CHANNEL);
    let std = population_std(x);
    f.push(abs_energy(x));
    f.push(x.len() as f64);
    f.push(mean(x));
    f.push(median(x));
    f.push(skewness(x));
    f.push(histogram_entropy(x));
    f.push(std);
    f.push(std * std);
    f.push(x.iter().copied().fold(f64::INFINITY, f64::min));
    f.push(x.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    for w in CWT_WIDTHS {
        f.extend(cwt_head(x, w));
    }
    f.extend(dft_magnitudes(x));
    f.extend(cubic_fit(x));
    f
}

/// Feature bank over a segment's packet-length and inter-arrival series.
///
/// Panics if `packets` is empty.
pub fn ts_features(packets: &SpltMatrix) -> TsFeatureVector {
    assert!(!packets.is_empty(), "ts_features needs at least one packet");
    let lens = packets.lengths();
    let mut iat = packets.inter_arrivals();
    if iat.is_empty() {
        iat.push(0.0);
    }
    let mut v = channel_features(&lens);
    v.extend(channel_features(&iat));
    TsFeatureVector(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traceio::SpltRow;

    #[test]
    fn dimensions() {
        assert_eq!(FEATURES_PER_CHANNEL, 44);
        assert_eq!(TS_DIM, 88);
        assert_eq!(feature_names().len(), TS_DIM);
        assert_eq!(feature_names()[44], "iat__abs_energy");
    }

    #[test]
    fn simple_series_identities() {
        assert_eq!(abs_energy(&[1.0, 2.0, 3.0]), 14.0);
        assert_eq!(skewness(&[1.0, 2.0, 3.0]), 0.0);
        let c = [5.0; 4];
        let mags = dft_magnitudes(&c);
        assert!((mags[0] - 20.0).abs() < 1e-12);
        assert!(mags[1..].iter().all(|m| m.abs() < 1e-12));
        assert_eq!(population_std(&c).powi(2), 0.0);
        assert_eq!(histogram_entropy(&c), 0.0);
    }

    #[test]
    fn cubic_fit_recovers_exact_polynomial() {
        let n = 30;
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                1.5 - 2.0 * t + 0.25 * t * t + 3.0 * t * t * t
            })
            .collect();
        let c = cubic_fit(&y);
        for (got, want) in c.iter().zip([1.5, -2.0, 0.25, 3.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn single_packet_segment_is_fully_defined() {
        let m = SpltMatrix { flow_id: "x".into(), rows: vec![SpltRow { timestamp: 1.0, direction: 0, length: 60 }] };
        let v = ts_features(&m);
        assert_eq!(v.0.len(), TS_DIM);
        assert!(v.0.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn ricker_is_symmetric_and_peaks_at_centre() {
        let w = ricker(9, 2.0);
        for i in 0..9 {
            assert!((w[i] - w[8 - i]).abs() < 1e-15);
        }
        assert!(w[4] > w[3]);
    }
}
