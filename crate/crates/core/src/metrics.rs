//! Empirical accuracy, signed disparities and the composite criterion.
//!
//! Disparities are conditional frequencies `Pr(Y̌=1 | a_k) - Pr(Y̌=1 | b_k)`, so evaluation
//! never depends on estimated priors.

use serde::{Deserialize, Serialize};

use crate::criterion::{Component, CriterionSpec, Side};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rule::ModificationRule;
use crate::scores::BiasScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Signed disparity of each component.
    pub disparities: Vec<f64>,
    /// `max_k |disparities[k]|`.
    pub cc: f64,
    pub flip_count: usize,
}

impl EvalReport {
    pub fn to_kv(&self) -> String {
        let mut out = format!("accuracy = {}\n", self.accuracy);
        for (k, d) in self.disparities.iter().enumerate() {
            out.push_str(&format!("disparity_{k} = {d}\n"));
        }
        out.push_str(&format!("cc = {}\nflip_count = {}\n", self.cc, self.flip_count));
        out
    }
}

/// Predictions after applying a rule, with the flip mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub predictions: Vec<u8>,
    pub flips: Vec<bool>,
}

impl Applied {
    pub fn flip_count(&self) -> usize {
        self.flips.iter().filter(|f| **f).count()
    }
}

pub fn apply_rule(rule: &ModificationRule, scores: &BiasScores) -> Result<Applied> {
    if rule.k() != scores.k() {
        return Err(Error::Dimension {
            expected: scores.k(),
            got: rule.k(),
        });
    }
    let flips: Vec<bool> = (0..scores.len()).map(|i| rule.flips(scores.s(i))).collect();
    let predictions = scores
        .yhat()
        .iter()
        .zip(&flips)
        .map(|(&y, &f)| if f { 1 - y } else { y })
        .collect();
    Ok(Applied { predictions, flips })
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Invalid("accuracy of an empty sample".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `pos_a / n_a - pos_b / n_b`; the one formula every disparity in the crate goes through.
#[inline]
pub fn disparity_from_counts(pos_a: i64, n_a: usize, pos_b: i64, n_b: usize) -> f64 {
    pos_a as f64 / n_a as f64 - pos_b as f64 / n_b as f64
}

/// Row sides and group sizes of every component on one dataset.
#[derive(Debug, Clone)]
pub struct Membership {
    sides: Vec<Vec<Side>>,
    sizes: Vec<(usize, usize)>,
}

impl Membership {
    pub fn new(ds: &LabeledDataset, criterion: &CriterionSpec) -> Result<Self> {
        let mut sides = Vec::with_capacity(criterion.k());
        let mut sizes = Vec::with_capacity(criterion.k());
        for c in &criterion.components {
            let (col, size) = component_sides(ds, c)?;
            sides.push(col);
            sizes.push(size);
        }
        Ok(Self { sides, sizes })
    }

    pub fn k(&self) -> usize {
        self.sides.len()
    }

    pub fn len(&self) -> usize {
        self.sides.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn side(&self, k: usize, i: usize) -> Side {
        self.sides[k][i]
    }

    pub fn sizes(&self) -> &[(usize, usize)] {
        &self.sizes
    }

    /// Positive-prediction counts `(pos_a, pos_b)` per component.
    pub fn positive_counts(&self, predictions: &[u8]) -> Vec<(i64, i64)> {
        self.sides
            .iter()
            .map(|col| {
                let mut c = (0i64, 0i64);
                for (s, &p) in col.iter().zip(predictions) {
                    match s {
                        Side::A => c.0 += i64::from(p),
                        Side::B => c.1 += i64::from(p),
                        Side::Neither => {}
                    }
                }
                c
            })
            .collect()
    }

    pub fn disparities(&self, counts: &[(i64, i64)]) -> Vec<f64> {
        counts
            .iter()
            .zip(&self.sizes)
            .map(|(&(pa, pb), &(na, nb))| disparity_from_counts(pa, na, pb, nb))
            .collect()
    }

    pub fn cc(&self, counts: &[(i64, i64)]) -> f64 {
        self.disparities(counts).iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

fn component_sides(ds: &LabeledDataset, c: &Component) -> Result<(Vec<Side>, (usize, usize))> {
    let sides = c.sides(ds)?;
    let na = sides.iter().filter(|s| **s == Side::A).count();
    let nb = sides.iter().filter(|s| **s == Side::B).count();
    if na == 0 {
        return Err(Error::EmptyGroup(c.group_a.to_string()));
    }
    if nb == 0 {
        return Err(Error::EmptyGroup(c.group_b.to_string()));
    }
    Ok((sides, (na, nb)))
}

pub fn signed_disparity(predictions: &[u8], ds: &LabeledDataset, component: &Component) -> Result<f64> {
    if predictions.len() != ds.len() {
        return Err(Error::Dimension {
            expected: ds.len(),
            got: predictions.len(),
        });
    }
    let (sides, (na, nb)) = component_sides(ds, component)?;
    let (mut pa, mut pb) = (0i64, 0i64);
    for (s, &p) in sides.iter().zip(predictions) {
        match s {
            Side::A => pa += i64::from(p),
            Side::B => pb += i64::from(p),
            Side::Neither => {}
        }
    }
    Ok(disparity_from_counts(pa, na, pb, nb))
}

/// Accuracy and per-component disparities of `predictions`; `flip_count` is left at zero.
pub fn composite(predictions: &[u8], ds: &LabeledDataset, criterion: &CriterionSpec) -> Result<EvalReport> {
    let accuracy = accuracy(predictions, ds.labels())?;
    let disparities = criterion
        .components
        .iter()
        .map(|c| signed_disparity(predictions, ds, c))
        .collect::<Result<Vec<_>>>()?;
    let cc = disparities.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
    Ok(EvalReport {
        accuracy,
        disparities,
        cc,
        flip_count: 0,
    })
}

/// Apply `rule` to `scores` and evaluate against `ds`.
pub fn evaluate(
    rule: &ModificationRule,
    scores: &BiasScores,
    ds: &LabeledDataset,
    criterion: &CriterionSpec,
) -> Result<EvalReport> {
    let applied = apply_rule(rule, scores)?;
    let mut report = composite(&applied.predictions, ds, criterion)?;
    report.flip_count = applied.flip_count();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criterion::CriterionSpec;
    use crate::rule::Provenance;

    fn ds(labels: &[u8], a: &[u8]) -> LabeledDataset {
        LabeledDataset::new(labels.to_vec(), vec![("a".into(), a.to_vec())]).unwrap()
    }

    fn scores_1d(yhat: &[u8], s: &[f64]) -> BiasScores {
        BiasScores::from_parts(yhat.to_vec(), vec![1.0; s.len()], s.to_vec(), 1).unwrap()
    }

    #[test]
    fn zero_rule_keeps_base_predictions() {
        let sc = scores_1d(&[1, 0, 1], &[5.0, -3.0, 0.2]);
        let a = apply_rule(&ModificationRule::identity(1), &sc).unwrap();
        assert_eq!(a.predictions, vec![1, 0, 1]);
        assert_eq!(a.flip_count(), 0);
    }

    #[test]
    fn strict_rule_boundary() {
        let rule = ModificationRule::new(vec![2.0], Provenance::default()).unwrap();
        let sc = scores_1d(&[1, 1], &[1.0, 0.4]);
        let a = apply_rule(&rule, &sc).unwrap();
        assert_eq!(a.flips, vec![true, false]);
        let rule = ModificationRule::new(vec![1.0], Provenance::default()).unwrap();
        let sc = scores_1d(&[1, 1], &[1.0, 1.0 + 1e-9]);
        assert_eq!(apply_rule(&rule, &sc).unwrap().flips, vec![false, true]);
    }

    #[test]
    fn flipping_everything_complements_accuracy() {
        let labels = [1, 0, 0, 1, 1];
        let yhat = [1, 0, 1, 1, 0];
        let sc = scores_1d(&yhat, &[1e9; 5]);
        let rule = ModificationRule::new(vec![1.0], Provenance::default()).unwrap();
        let a = apply_rule(&rule, &sc).unwrap();
        let base = accuracy(&yhat, &labels).unwrap();
        assert!((accuracy(&a.predictions, &labels).unwrap() - (1.0 - base)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let sc = scores_1d(&[1], &[1.0]);
        assert!(apply_rule(&ModificationRule::identity(2), &sc).is_err());
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 0], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn disparity_cases() {
        let d = ds(&[0; 8], &[0, 0, 0, 0, 1, 1, 1, 1]);
        let c = &CriterionSpec::demographic_parity("a").components[0];
        assert_eq!(signed_disparity(&[1; 8], &d, c).unwrap(), 0.0);
        assert_eq!(signed_disparity(&[1, 1, 1, 1, 0, 0, 0, 0], &d, c).unwrap(), 1.0);
        assert_eq!(signed_disparity(&[1, 1, 0, 0, 1, 0, 0, 0], &d, c).unwrap(), 0.25);
        let lonely = ds(&[0, 0], &[0, 0]);
        assert!(matches!(
            signed_disparity(&[1, 1], &lonely, c),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn composite_takes_max_abs() {
        // y0 component: A=0 rows 0..4, A=1 rows 4..8 (Y=0); y1 component: rows 8..16 (Y=1)
        let mut labels = vec![0u8; 8];
        labels.extend([1u8; 8]);
        let attr: Vec<u8> = (0..16).map(|i| u8::from((i / 4) % 2 == 1)).collect();
        let d = ds(&labels, &attr);
        let eo = CriterionSpec::equalized_odds("a");
        let mut preds = vec![0u8; 16];
        // y0: 1/4 - 0/4 = 0.25 ; y1: 0/4 - 3/4 = -0.75
        preds[0] = 1;
        preds[12] = 1;
        preds[13] = 1;
        preds[14] = 1;
        let r = composite(&preds, &d, &eo).unwrap();
        assert_eq!(r.disparities, vec![0.25, -0.75]);
        assert_eq!(r.cc, 0.75);

        let dp = CriterionSpec::demographic_parity("a");
        assert_eq!(composite(&[0; 16], &d, &dp).unwrap().cc, 0.0);
    }
}
