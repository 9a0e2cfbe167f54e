//! Instance-level bias scores.
//!
//! For a base prediction `ŷ = 1{p_y > 0.5}` with confidence `η = |2 p_y - 1|`, component `k`
//! contributes the group function
//!
//! ```text
//! f_k = (2ŷ - 1) * ( p_a[k] / Pr(a_k) - p_b[k] / Pr(b_k) )
//! ```
//!
//! and the bias score `s_k = f_k / η`. Flipping an instance costs `η` in accuracy and moves
//! the signed disparity of component `k` by `-f_k` (both scaled by `1/N`).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::criterion::CriterionSpec;
use crate::dataset::parse_f64;
use crate::error::{Error, Result};
use crate::probs::ProbTable;

pub const DEFAULT_ETA_FLOOR: f64 = 1e-12;

#[inline]
pub fn base_prediction(p_y: f64) -> u8 {
    u8::from(p_y > 0.5)
}

#[inline]
pub fn confidence(p_y: f64, eta_floor: f64) -> f64 {
    (2.0 * p_y - 1.0).abs().max(eta_floor)
}

#[inline]
pub fn group_function(yhat: u8, p_a: f64, p_b: f64, prior_a: f64, prior_b: f64) -> f64 {
    let sign = if yhat == 1 { 1.0 } else { -1.0 };
    sign * (p_a / prior_a - p_b / prior_b)
}

/// Base predictions, confidences, and the `n × K` score and group-function matrices
/// (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct BiasScores {
    yhat: Vec<u8>,
    eta: Vec<f64>,
    s: Vec<f64>,
    f: Vec<f64>,
    k: usize,
}

impl BiasScores {
    /// Assemble from base predictions, confidences and group functions; scores are `f / η`.
    pub fn from_parts(yhat: Vec<u8>, eta: Vec<f64>, f: Vec<f64>, k: usize) -> Result<Self> {
        let n = yhat.len();
        if k == 0 || eta.len() != n || f.len() != n * k {
            return Err(Error::Dimension {
                expected: n * k.max(1),
                got: f.len(),
            });
        }
        if let Some(i) = eta.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Invalid(format!("eta[{i}] = {} must be positive", eta[i])));
        }
        if yhat.iter().any(|&y| y > 1) {
            return Err(Error::Invalid("base predictions must be 0 or 1".into()));
        }
        let s = f
            .chunks_exact(k)
            .zip(&eta)
            .flat_map(|(row, &e)| row.iter().map(move |v| v / e))
            .collect();
        Ok(Self { yhat, eta, s, f, k })
    }

    pub fn len(&self) -> usize {
        self.yhat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yhat.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn yhat(&self) -> &[u8] {
        &self.yhat
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Score vector of instance `i`.
    #[inline]
    pub fn s(&self, i: usize) -> &[f64] {
        &self.s[i * self.k..(i + 1) * self.k]
    }

    /// Group-function vector of instance `i`.
    #[inline]
    pub fn f(&self, i: usize) -> &[f64] {
        &self.f[i * self.k..(i + 1) * self.k]
    }

    pub fn score_column(&self, k: usize) -> Vec<f64> {
        self.s.iter().skip(k).step_by(self.k).copied().collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let rows = |m: &[f64]| {
            indices
                .iter()
                .flat_map(|&i| m[i * self.k..(i + 1) * self.k].iter().copied())
                .collect::<Vec<_>>()
        };
        Self {
            yhat: indices.iter().map(|&i| self.yhat[i]).collect(),
            eta: indices.iter().map(|&i| self.eta[i]).collect(),
            s: rows(&self.s),
            f: rows(&self.f),
            k: self.k,
        }
    }

    /// Columns `yhat, eta, s_1..s_K, f_1..f_K`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["yhat".to_string(), "eta".to_string()];
        header.extend((1..=self.k).map(|k| format!("s_{k}")));
        header.extend((1..=self.k).map(|k| format!("f_{k}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.yhat[i].to_string(), self.eta[i].to_string()];
            rec.extend(self.s(i).iter().map(f64::to_string));
            rec.extend(self.f(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Read a file written by [`BiasScores::write_csv`]. The stored scores are kept as-is.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let k = header.iter().filter(|h| h.starts_with("s_")).count();
        let expected: Vec<String> = ["yhat".to_string(), "eta".to_string()]
            .into_iter()
            .chain((1..=k).map(|j| format!("s_{j}")))
            .chain((1..=k).map(|j| format!("f_{j}")))
            .collect();
        if k == 0 || header != expected {
            return Err(Error::Schema(format!(
                "score file header must be `{}`",
                expected.join(",")
            )));
        }
        let (mut yhat, mut eta, mut s, mut f) = (vec![], vec![], vec![], vec![]);
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = r + 1;
            let vals = rec
                .iter()
                .enumerate()
                .map(|(j, v)| parse_f64(v, row, &header[j]))
                .collect::<Result<Vec<_>>>()?;
            yhat.push(u8::from(vals[0] == 1.0));
            eta.push(vals[1]);
            s.extend_from_slice(&vals[2..2 + k]);
            f.extend_from_slice(&vals[2 + k..2 + 2 * k]);
        }
        if let Some(i) = eta.iter().position(|&e| e <= 0.0) {
            return Err(Error::Invalid(format!("eta on row {} must be positive", i + 1)));
        }
        Ok(Self { yhat, eta, s, f, k })
    }
}

/// Scores for every row of `probs` under `criterion` (whose priors must be set).
pub fn bias_scores(probs: &ProbTable, criterion: &CriterionSpec, eta_floor: f64) -> Result<BiasScores> {
    if probs.k() != criterion.k() {
        return Err(Error::Dimension {
            expected: criterion.k(),
            got: probs.k(),
        });
    }
    if !(eta_floor > 0.0) {
        return Err(Error::Invalid(format!("eta floor must be positive, got {eta_floor}")));
    }
    let priors = criterion.priors()?;
    let k = criterion.k();
    let n = probs.len();
    let yhat: Vec<u8> = probs.p_y().iter().map(|&p| base_prediction(p)).collect();
    let eta: Vec<f64> = probs.p_y().iter().map(|&p| confidence(p, eta_floor)).collect();
    let mut f = vec![0.0; n * k];
    for (c, &(pa, pb)) in priors.iter().enumerate() {
        let (col_a, col_b) = (probs.p_a(c), probs.p_b(c));
        for i in 0..n {
            f[i * k + c] = group_function(yhat[i], col_a[i], col_b[i], pa, pb);
        }
    }
    BiasScores::from_parts(yhat, eta, f, k)
}

/// Add independent `Unif(-α, 2α)` noise to every stored probability, then clip to `[0, 1]`.
pub fn corrupt(probs: &ProbTable, alpha: f64, seed: u64) -> Result<ProbTable> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(probs.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(probs.map_values(|v| v + rng.random_range(-alpha..2.0 * alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn base_prediction_is_strict() {
        assert_eq!(base_prediction(0.5), 0);
        assert_eq!(base_prediction(0.9), 1);
        assert_eq!(base_prediction(0.1), 0);
    }

    #[test]
    fn confidence_values() {
        assert_eq!(confidence(1.0, 1e-12), 1.0);
        assert_eq!(confidence(0.5, 1e-12), 1e-12);
        assert!((confidence(0.9, 1e-12) - 0.8).abs() < 1e-15);
        assert!((confidence(0.1, 1e-12) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn group_function_values() {
        assert_eq!(group_function(1, 0.3, 0.3, 0.5, 0.5), 0.0);
        assert!((group_function(1, 0.6, 0.4, 0.5, 0.5) - 0.4).abs() < 1e-15);
        assert!((group_function(0, 0.6, 0.4, 0.5, 0.5) + 0.4).abs() < 1e-15);
    }

    fn dp(prior: (f64, f64)) -> CriterionSpec {
        CriterionSpec::demographic_parity("a").with_priors(&[prior]).unwrap()
    }

    #[test]
    fn single_instance_score() {
        let t = ProbTable::new(vec![0.9], vec![vec![0.6]], vec![vec![0.4]]).unwrap();
        let s = bias_scores(&t, &dp((0.5, 0.5)), DEFAULT_ETA_FLOOR).unwrap();
        assert_eq!(s.yhat(), &[1]);
        assert!((s.s(0)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_groups_give_zero_scores() {
        let t = ProbTable::new(vec![0.2, 0.7, 0.5], vec![vec![0.3, 0.5, 0.1]], vec![vec![0.3, 0.5, 0.1]])
            .unwrap();
        let s = bias_scores(&t, &dp((0.4, 0.4)), DEFAULT_ETA_FLOOR).unwrap();
        assert!((0..3).all(|i| s.s(i)[0] == 0.0));
    }

    #[test]
    fn arity_mismatch() {
        let t = ProbTable::new(vec![0.2], vec![vec![0.3]], vec![vec![0.3]]).unwrap();
        let eo = CriterionSpec::equalized_odds("a")
            .with_priors(&[(0.2, 0.3), (0.2, 0.3)])
            .unwrap();
        assert!(matches!(
            bias_scores(&t, &eo, DEFAULT_ETA_FLOOR),
            Err(Error::Dimension { .. })
        ));
        assert!(bias_scores(&t, &CriterionSpec::demographic_parity("a"), DEFAULT_ETA_FLOOR).is_err());
    }

    #[test]
    fn corrupt_support_and_determinism() {
        let t = ProbTable::new(vec![0.5; 200], vec![vec![0.5; 200]], vec![vec![0.5; 200]]).unwrap();
        assert_eq!(corrupt(&t, 0.0, 3).unwrap(), t);
        let c = corrupt(&t, 0.1, 3).unwrap();
        assert!(c.p_y().iter().all(|&v| (0.4..=0.7).contains(&v)));
        assert!(c.p_y().iter().any(|&v| v != 0.5));
        assert_eq!(c, corrupt(&t, 0.1, 3).unwrap());
        assert_ne!(c, corrupt(&t, 0.1, 4).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let t = ProbTable::new(vec![0.9, 0.3], vec![vec![0.6, 0.2]], vec![vec![0.4, 0.7]]).unwrap();
        let s = bias_scores(&t, &dp((0.3, 0.7)), DEFAULT_ETA_FLOOR).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        assert_eq!(BiasScores::read_csv(&path).unwrap(), s);
    }

    fn table_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn score_times_eta_is_f((py, pa, pb) in table_strategy(), prior_a in 0.05f64..0.95, prior_b in 0.05f64..0.95) {
            let t = ProbTable::new(py, vec![pa], vec![pb]).unwrap();
            let s = bias_scores(&t, &dp((prior_a, prior_b)), DEFAULT_ETA_FLOOR).unwrap();
            for i in 0..s.len() {
                prop_assert!(s.eta()[i] >= DEFAULT_ETA_FLOOR);
                let f = s.f(i)[0];
                prop_assert!((s.s(i)[0] * s.eta()[i] - f).abs() <= 1e-12 * f.abs().max(1.0));
            }
        }

        #[test]
        fn swapping_groups_negates((py, pa, pb) in table_strategy(), prior_a in 0.05f64..0.95, prior_b in 0.05f64..0.95) {
            let t = ProbTable::new(py.clone(), vec![pa.clone()], vec![pb.clone()]).unwrap();
            let swapped = ProbTable::new(py, vec![pb], vec![pa]).unwrap();
            let s1 = bias_scores(&t, &dp((prior_a, prior_b)), DEFAULT_ETA_FLOOR).unwrap();
            let s2 = bias_scores(&swapped, &dp((prior_b, prior_a)), DEFAULT_ETA_FLOOR).unwrap();
            for i in 0..s1.len() {
                prop_assert_eq!(s1.f(i)[0], -s2.f(i)[0]);
                prop_assert_eq!(s1.s(i)[0], -s2.s(i)[0]);
            }
        }

        #[test]
        fn scaling_group_probabilities((py, pa, pb) in table_strategy(), c in 0.01f64..1.0) {
            let t = ProbTable::new(py.clone(), vec![pa.clone()], vec![pb.clone()]).unwrap();
            let scaled = ProbTable::new(
                py,
                vec![pa.iter().map(|v| v * c).collect()],
                vec![pb.iter().map(|v| v * c).collect()],
            ).unwrap();
            let s1 = bias_scores(&t, &dp((0.3, 0.6)), DEFAULT_ETA_FLOOR).unwrap();
            let s2 = bias_scores(&scaled, &dp((0.3, 0.6)), DEFAULT_ETA_FLOOR).unwrap();
            for i in 0..s1.len() {
                let (a, b) = (s1.f(i)[0] * c, s2.f(i)[0]);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                let (a, b) = (s1.s(i)[0] * c, s2.s(i)[0]);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn zero_corruption_keeps_predictions(py in prop::collection::vec(0.0f64..=1.0, 1..50), seed in any::<u64>()) {
            let n = py.len();
            let t = ProbTable::new(py, vec![vec![0.5; n]], vec![vec![0.5; n]]).unwrap();
            let c = corrupt(&t, 0.0, seed).unwrap();
            let before: Vec<u8> = t.p_y().iter().map(|&p| base_prediction(p)).collect();
            let after: Vec<u8> = c.p_y().iter().map(|&p| base_prediction(p)).collect();
            prop_assert_eq!(before, after);
        }
    }
}
