use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden states used for activity decoding: idle plus six activity classes.
pub fn default_states() -> Vec<String> {
    std::iter::once("Idle".to_string()).chain((1..=6).map(|i| format!("Activity-{i}"))).collect()
}

/// Discrete HMM over binary snapshot vectors. Emissions factorize into one
/// Bernoulli per bit, conditioned on the hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub states: Vec<String>,
    pub width: usize,
    pub alpha: f64,
    pub initial: Vec<f64>,
    /// Row-stochastic, `transition[i][j] = P(j | i)`.
    pub transition: Vec<Vec<f64>>,
    /// `emission[s][b] = P(bit b = 1 | s)`.
    pub emission: Vec<Vec<f64>>,
}

/// One labeled training sequence: observations and their hidden states.
pub type LabeledSequence = (Vec<Vec<bool>>, Vec<String>);

fn normalize(counts: &[f64], alpha: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + alpha * counts.len() as f64;
    if total <= 0.0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|c| (c + alpha) / total).collect()
}

/// Maximum-likelihood fit from labeled sequences with additive smoothing
/// `alpha`. Rows without any data become uniform when `alpha` is zero.
pub fn hmm_fit_supervised(seqs: &[LabeledSequence], states: &[String], alpha: f64) -> Result<HmmModel> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if states.is_empty() {
        return Err(Error::invalid("HMM needs at least one state"));
    }
    let first = seqs.iter().find_map(|(o, _)| o.first()).ok_or_else(|| Error::invalid("no training observations"))?;
    let width = first.len();
    let s = states.len();
    let index = |label: &str| {
        states.iter().position(|x| x == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    };
    let mut init = vec![0.0; s];
    let mut trans = vec![vec![0.0; s]; s];
    let mut ones = vec![vec![0.0; width]; s];
    let mut seen = vec![0.0; s];
    for (obs, labels) in seqs {
        if obs.len() != labels.len() {
            return Err(Error::invalid(format!(
                "sequence has {} observations but {} labels",
                obs.len(),
                labels.len()
            )));
        }
        let mut prev: Option<usize> = None;
        for (o, l) in obs.iter().zip(labels) {
            if o.len() != width {
                return Err(Error::DimensionMismatch { expected: width, got: o.len() });
            }
            let k = index(l)?;
            match prev {
                None => init[k] += 1.0,
                Some(p) => trans[p][k] += 1.0,
            }
            seen[k] += 1.0;
            for (acc, &bit) in ones[k].iter_mut().zip(o) {
                if bit {
                    *acc += 1.0;
                }
            }
            prev = Some(k);
        }
    }
    let emission = ones
        .iter()
        .zip(&seen)
        .map(|(row, &n)| {
            row.iter()
                .map(|&c| if n + 2.0 * alpha > 0.0 { (c + alpha) / (n + 2.0 * alpha) } else { 0.5 })
                .collect()
        })
        .collect();
    Ok(HmmModel {
        states: states.to_vec(),
        width,
        alpha,
        initial: normalize(&init, alpha),
        transition: trans.iter().map(|r| normalize(r, alpha)).collect(),
        emission,
    })
}

impl HmmModel {
    pub fn validate(&self) -> Result<()> {
        let s = self.states.len();
        let stochastic = |row: &[f64]| {
            row.len() == s && row.iter().all(|p| (0.0..=1.0).contains(p)) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
        };
        if !stochastic(&self.initial) || !self.transition.iter().all(|r| stochastic(r)) || self.transition.len() != s {
            return Err(Error::Model("HMM probabilities are not stochastic".into()));
        }
        if self.emission.len() != s
            || self.emission.iter().any(|r| r.len() != self.width || r.iter().any(|p| !(0.0..=1.0).contains(p)))
        {
            return Err(Error::Model("HMM emission table is malformed".into()));
        }
        Ok(())
    }

    pub fn log_emission(&self, state: usize, obs: &[bool]) -> f64 {
        self.emission[state]
            .iter()
            .zip(obs)
            .map(|(&p, &bit)| if bit { p.ln() } else { (1.0 - p).ln() })
            .sum()
    }

    fn check(&self, obs: &[Vec<bool>]) -> Result<()> {
        match obs.iter().find(|o| o.len() != self.width) {
            Some(o) => Err(Error::DimensionMismatch { expected: self.width, got: o.len() }),
            None => Ok(()),
        }
    }

    /// Most likely state indices; ties go to the lower index.
    pub fn viterbi_indices(&self, obs: &[Vec<bool>]) -> Result<(Vec<usize>, f64)> {
        self.check(obs)?;
        if obs.is_empty() {
            return Ok((Vec::new(), 0.0));
        }
        let s = self.states.len();
        let log_a: Vec<Vec<f64>> = self.transition.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
        let mut delta: Vec<f64> = (0..s).map(|k| self.initial[k].ln() + self.log_emission(k, &obs[0])).collect();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(obs.len());
        for o in &obs[1..] {
            let mut next = vec![f64::NEG_INFINITY; s];
            let mut ptr = vec![0usize; s];
            for j in 0..s {
                let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
                for i in 0..s {
                    let v = delta[i] + log_a[i][j];
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                next[j] = best + self.log_emission(j, o);
                ptr[j] = arg;
            }
            back.push(ptr);
            delta = next;
        }
        let (mut last, mut best) = (0, f64::NEG_INFINITY);
        for (k, &v) in delta.iter().enumerate() {
            if v > best {
                best = v;
                last = k;
            }
        }
        let mut path = vec![last; obs.len()];
        for t in (0..back.len()).rev() {
            path[t] = back[t][path[t + 1]];
        }
        Ok((path, best))
    }
}

pub fn hmm_viterbi(model: &HmmModel, obs: &[Vec<bool>]) -> Result<Vec<String>> {
    let (path, _) = model.viterbi_indices(obs)?;
    Ok(path.into_iter().map(|k| model.states[k].clone()).collect())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-likelihood of the observation sequence under the model.
pub fn hmm_forward(model: &HmmModel, obs: &[Vec<bool>]) -> Result<f64> {
    model.check(obs)?;
    if obs.is_empty() {
        return Ok(0.0);
    }
    let s = model.states.len();
    let log_a: Vec<Vec<f64>> = model.transition.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
    let mut alpha: Vec<f64> = (0..s).map(|k| model.initial[k].ln() + model.log_emission(k, &obs[0])).collect();
    let mut terms = vec![0.0; s];
    for o in &obs[1..] {
        let next: Vec<f64> = (0..s)
            .map(|j| {
                for i in 0..s {
                    terms[i] = alpha[i] + log_a[i][j];
                }
                log_sum_exp(&terms) + model.log_emission(j, o)
            })
            .collect();
        alpha = next;
    }
    Ok(log_sum_exp(&alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn counts_with_smoothing() {
        let states = s(&["A", "B"]);
        let seq = (vec![vec![true], vec![true], vec![false]], s(&["A", "A", "B"]));
        let m = hmm_fit_supervised(&[seq], &states, 1.0).unwrap();
        // initial: A=1 -> (1+1)/(1+2)
        assert!((m.initial[0] - 2.0 / 3.0).abs() < 1e-12);
        // A->A once, A->B once
        assert!((m.transition[0][0] - 0.5).abs() < 1e-12);
        // B has no outgoing transitions -> uniform by smoothing
        assert!((m.transition[1][0] - 0.5).abs() < 1e-12);
        // emission A: 2 ones of 2 -> (2+1)/(2+2)
        assert!((m.emission[0][0] - 0.75).abs() < 1e-12);
        m.validate().unwrap();
    }

    #[test]
    fn unseen_state_without_smoothing_is_uniform() {
        let states = s(&["A", "B", "C"]);
        let seq = (vec![vec![true], vec![false]], s(&["A", "B"]));
        let m = hmm_fit_supervised(&[seq], &states, 0.0).unwrap();
        assert_eq!(m.transition[2], vec![1.0 / 3.0; 3]);
        assert_eq!(m.emission[2], vec![0.5]);
        m.validate().unwrap();
    }

    #[test]
    fn decodes_clear_sequence() {
        let states = s(&["Idle", "On"]);
        let obs: Vec<Vec<bool>> = [0, 0, 1, 1, 1, 0, 0, 1, 1, 0].iter().map(|&b| vec![b == 1, false]).collect();
        let labels: Vec<String> = obs.iter().map(|o| if o[0] { "On" } else { "Idle" }.to_string()).collect();
        let m = hmm_fit_supervised(&[(obs.clone(), labels.clone())], &states, 0.1).unwrap();
        assert_eq!(hmm_viterbi(&m, &obs).unwrap(), labels);
        let (_, best) = m.viterbi_indices(&obs).unwrap();
        assert!(best <= hmm_forward(&m, &obs).unwrap() + 1e-12);
    }

    #[test]
    fn rejects_unknown_state_and_width() {
        let states = s(&["A"]);
        let bad = (vec![vec![true]], s(&["Z"]));
        assert!(matches!(hmm_fit_supervised(&[bad], &states, 1.0), Err(Error::UnknownLabel(_))));
        let ok = (vec![vec![true]], s(&["A"]));
        let m = hmm_fit_supervised(&[ok], &states, 1.0).unwrap();
        assert!(hmm_viterbi(&m, &[vec![true, false]]).is_err());
    }

    #[test]
    fn default_state_names() {
        let st = default_states();
        assert_eq!(st.len(), 7);
        assert_eq!(st[0], "Idle");
        assert_eq!(st[6], "Activity-6");
    }
}
