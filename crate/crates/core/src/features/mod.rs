//! Feature extraction for every attack stage.

mod selection;
mod tsbank;
mod window;

pub use selection::{mask_from_importances, select_features, SelectionMask};
pub use tsbank::{
    abs_energy, channel_feature_names, channel_features, cubic_fit, cwt_head, dft_magnitudes, feature_names,
    histogram_entropy, ricker, skewness, ts_features, TsFeatureVector, CHANNELS, CWT_COEFFS, CWT_WIDTHS,
    FEATURES_PER_CHANNEL, FFT_COEFFS, HIST_BINS, TS_DIM,
};
pub use window::{
    recommend_window, stage1_features, stage2_features, window_count, WindowFeatures, WINDOW_FEATURE_NAMES,
};


use std::fmt::Write as _;

/// Header-bearing CSV: feature names, then a final `label` column.
pub fn feature_csv(names: &[String], rows: &[Vec<f64>], labels: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push_str(",label\n");
    for (row, label) in rows.iter().zip(labels) {
        for v in row {
            write!(out, "{v},").unwrap();
        }
        out.push_str(&csv_field(label));
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
