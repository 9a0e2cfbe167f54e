//! Fitting modification rules on a labeled validation set.
//!
//! Every method enumerates a finite family of linear rules `z · s > 1`, evaluates validation
//! accuracy and the empirical composite criterion of each, and keeps the most accurate rule
//! whose criterion is at most `δ`. Ties go to the smaller criterion value, then to fewer
//! flips, then to the earlier candidate in enumeration order, so parallel evaluation gives
//! the same answer as a serial one. When no candidate is feasible the least-violating one is
//! returned with `provenance.feasible == false`.
//!
//! * [`fit_threshold`]: one score, sorted sweep in both directions with O(1) updates per
//!   candidate.
//! * [`fit_line_pairs`]: two scores, every line through two of `M` subsampled score points.
//! * [`fit_directions`]: any number of scores, a sweep along each of a fixed set of unit
//!   directions.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::criterion::{CriterionSpec, Side};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport, Membership};
use crate::rule::{ModificationRule, Provenance};
use crate::scores::BiasScores;

pub const DEFAULT_M: usize = 1000;
pub const DEFAULT_N_DIRS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Threshold,
    Pairs,
    Directions,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(Self::Threshold),
            "pairs" => Ok(Self::Pairs),
            "directions" => Ok(Self::Directions),
            other => Err(Error::Invalid(format!(
                "unknown method `{other}` (expected threshold, pairs, directions)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Threshold => "threshold",
            Self::Pairs => "pairs",
            Self::Directions => "directions",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    /// Subsample size for [`fit_line_pairs`].
    pub m: usize,
    /// Number of directions for [`fit_directions`].
    pub n_dirs: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            n_dirs: DEFAULT_N_DIRS,
            seed: 0,
        }
    }
}

/// Validation-set bookkeeping shared by every candidate.
struct Context<'a> {
    scores: &'a BiasScores,
    labels: &'a [u8],
    membership: Membership,
    base_correct: usize,
    base_counts: Vec<(i64, i64)>,
}

impl<'a> Context<'a> {
    fn new(scores: &'a BiasScores, val: &'a LabeledDataset, criterion: &CriterionSpec) -> Result<Self> {
        if scores.len() != val.len() {
            return Err(Error::Dimension {
                expected: val.len(),
                got: scores.len(),
            });
        }
        if val.is_empty() {
            return Err(Error::Invalid("validation set is empty".into()));
        }
        let membership = Membership::new(val, criterion)?;
        let yhat = scores.yhat();
        let base_correct = yhat.iter().zip(val.labels()).filter(|(p, y)| p == y).count();
        let base_counts = membership.positive_counts(yhat);
        Ok(Self {
            scores,
            labels: val.labels(),
            membership,
            base_correct,
            base_counts,
        })
    }

    fn n(&self) -> usize {
        self.labels.len()
    }

    /// Flip instance `i` on top of the running `(correct, counts)` state.
    #[inline]
    fn flip(&self, i: usize, correct: &mut usize, counts: &mut [(i64, i64)]) {
        let yhat = self.scores.yhat()[i];
        if yhat == self.labels[i] {
            *correct -= 1;
        } else {
            *correct += 1;
        }
        let delta = 1 - 2 * i64::from(yhat);
        for (k, c) in counts.iter_mut().enumerate() {
            match self.membership.side(k, i) {
                Side::A => c.0 += delta,
                Side::B => c.1 += delta,
                Side::Neither => {}
            }
        }
    }

    /// Evaluate the candidate `weights` from scratch.
    fn candidate(&self, weights: Vec<f64>, order: (usize, usize)) -> Candidate {
        let mut correct = self.base_correct;
        let mut counts = self.base_counts.clone();
        let mut flips = 0;
        for i in 0..self.n() {
            let v: f64 = weights.iter().zip(self.scores.s(i)).map(|(z, s)| z * s).sum();
            if v > 1.0 {
                self.flip(i, &mut correct, &mut counts);
                flips += 1;
            }
        }
        Candidate {
            correct,
            cc: self.membership.cc(&counts),
            flips,
            order,
            weights,
        }
    }

    fn identity(&self) -> Candidate {
        Candidate {
            correct: self.base_correct,
            cc: self.membership.cc(&self.base_counts),
            flips: 0,
            order: (0, 0),
            weights: vec![0.0; self.scores.k()],
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    correct: usize,
    cc: f64,
    flips: usize,
    order: (usize, usize),
    weights: Vec<f64>,
}

impl Candidate {
    /// `Less` means `self` is preferred.
    fn rank(&self, other: &Self, delta: f64) -> Ordering {
        let (fa, fb) = (self.cc <= delta, other.cc <= delta);
        let primary = match (fa, fb) {
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            (true, true) => other
                .correct
                .cmp(&self.correct)
                .then(self.cc.total_cmp(&other.cc)),
            (false, false) => self
                .cc
                .total_cmp(&other.cc)
                .then(other.correct.cmp(&self.correct)),
        };
        primary
            .then(self.flips.cmp(&other.flips))
            .then(self.order.cmp(&other.order))
    }
}

/// Best candidate so far for each δ.
#[derive(Debug, Clone)]
struct Best {
    deltas: Vec<f64>,
    slots: Vec<Option<Candidate>>,
}

impl Best {
    fn new(deltas: &[f64]) -> Self {
        Self {
            deltas: deltas.to_vec(),
            slots: vec![None; deltas.len()],
        }
    }

    fn offer(&mut self, c: &Candidate) {
        for (slot, &d) in self.slots.iter_mut().zip(&self.deltas) {
            let better = match slot {
                None => true,
                Some(cur) => c.rank(cur, d) == Ordering::Less,
            };
            if better {
                *slot = Some(c.clone());
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for c in other.slots.into_iter().flatten() {
            self.offer(&c);
        }
        self
    }
}

/// One state visited by a directional sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStep {
    /// The rule flips exactly `order[..prefix]`.
    pub prefix: usize,
    pub threshold: f64,
    pub weights: Vec<f64>,
    pub correct: usize,
    pub counts: Vec<(i64, i64)>,
    pub cc: f64,
}

/// Instances with positive projection `w · s`, sorted by decreasing projection (ties by index).
fn sweep_order(scores: &BiasScores, w: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let proj: Vec<f64> = (0..scores.len())
        .map(|i| w.iter().zip(scores.s(i)).map(|(a, b)| a * b).sum())
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| proj[i] > 0.0).collect();
    order.sort_by(|&a, &b| proj[b].total_cmp(&proj[a]).then(a.cmp(&b)));
    (order, proj)
}

/// Walk the sorted projections, flipping one tie group at a time and updating accuracy and
/// group counts incrementally. `visit` sees the state after each group.
///
/// A boundary is emitted only if the rule `z = w / t` reproduces it exactly in floating
/// point; projections a few ulps apart are otherwise merged into one group.
fn sweep_with(ctx: &Context<'_>, w: &[f64], mut visit: impl FnMut(SweepStep)) {
    let (order, proj) = sweep_order(ctx.scores, w);
    let value = |z: &[f64], i: usize| -> f64 { z.iter().zip(ctx.scores.s(i)).map(|(a, b)| a * b).sum() };
    let mut correct = ctx.base_correct;
    let mut counts = ctx.base_counts.clone();
    let mut pending = 0;
    let mut j = 0;
    while j < order.len() {
        let top = proj[order[j]];
        while j < order.len() && proj[order[j]] == top {
            ctx.flip(order[j], &mut correct, &mut counts);
            j += 1;
        }
        // Any threshold in [next, top) reproduces the prefix; take the midpoint.
        let next = if j < order.len() { proj[order[j]] } else { 0.0 };
        let threshold = 0.5 * (top + next);
        let weights: Vec<f64> = w.iter().map(|v| v / threshold).collect();
        let inside = order[pending..j].iter().all(|&i| value(&weights, i) > 1.0);
        let outside = order[j..]
            .iter()
            .take_while(|&&i| proj[i] >= next - 1e-9 * next.abs())
            .all(|&i| value(&weights, i) <= 1.0);
        if !(inside && outside) {
            continue;
        }
        pending = j;
        visit(SweepStep {
            prefix: j,
            threshold,
            weights,
            correct,
            counts: counts.clone(),
            cc: ctx.membership.cc(&counts),
        });
    }
}

/// Every state of the sweep along direction `w`, plus the sorted instance order.
///
/// Exposed so the incremental bookkeeping can be checked against recomputation.
pub fn sweep_trace(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    w: &[f64],
) -> Result<(Vec<usize>, Vec<SweepStep>)> {
    let ctx = Context::new(scores, val, criterion)?;
    check_dim(w.len(), scores.k())?;
    let mut steps = Vec::new();
    sweep_with(&ctx, w, |s| steps.push(s));
    Ok((sweep_order(scores, w).0, steps))
}

fn sweep_best(ctx: &Context<'_>, w: &[f64], family: usize, best: &mut Best) {
    let mut pos = 0;
    sweep_with(ctx, w, |step| {
        pos += 1;
        best.offer(&Candidate {
            correct: step.correct,
            cc: step.cc,
            flips: step.prefix,
            order: (family + 1, pos),
            weights: step.weights,
        });
    });
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::Invalid("at least one delta is required".into()));
    }
    match deltas.iter().find(|d| !(**d >= 0.0)) {
        Some(d) => Err(Error::Invalid(format!("delta must be non-negative, got {d}"))),
        None => Ok(()),
    }
}

fn finish(
    ctx: &Context<'_>,
    best: Best,
    algorithm: &str,
    seed: Option<u64>,
    note: Option<String>,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
) -> Result<Vec<ModificationRule>> {
    best.slots
        .into_iter()
        .zip(&best.deltas)
        .map(|(slot, &delta)| {
            let c = slot.unwrap_or_else(|| ctx.identity());
            let mut rule = ModificationRule::new(
                c.weights,
                Provenance {
                    algorithm: algorithm.to_string(),
                    delta: Some(delta),
                    seed,
                    feasible: c.cc <= delta,
                    note: note.clone(),
                    ..Provenance::default()
                },
            )?;
            let report = evaluate(&rule, ctx.scores, val, criterion)?;
            rule.provenance.val_accuracy = Some(report.accuracy);
            rule.provenance.val_cc = Some(report.cc);
            Ok(rule)
        })
        .collect()
}

/// Sweep along each direction in `directions` and keep the best threshold per δ.
pub fn fit_along_many(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    deltas: &[f64],
    directions: &[Vec<f64>],
    algorithm: &str,
) -> Result<Vec<ModificationRule>> {
    check_deltas(deltas)?;
    let ctx = Context::new(scores, val, criterion)?;
    for w in directions {
        check_dim(scores.k(), w.len())?;
    }
    let mut seed_best = Best::new(deltas);
    seed_best.offer(&ctx.identity());
    let best = directions
        .par_iter()
        .enumerate()
        .map(|(j, w)| {
            let mut b = Best::new(deltas);
            sweep_best(&ctx, w, j, &mut b);
            b
        })
        .reduce(|| Best::new(deltas), Best::merge)
        .merge(seed_best);
    finish(&ctx, best, algorithm, None, None, val, criterion)
}

/// Threshold rule on a single score, sweeping both signs of the threshold.
pub fn fit_threshold(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    delta: f64,
) -> Result<ModificationRule> {
    fit_threshold_many(scores, val, criterion, &[delta]).map(|mut v| v.remove(0))
}

pub fn fit_threshold_many(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    deltas: &[f64],
) -> Result<Vec<ModificationRule>> {
    check_dim(1, scores.k())?;
    fit_along_many(scores, val, criterion, deltas, &[vec![1.0], vec![-1.0]], "threshold")
}

/// Unit directions: `±1` for one score, equiangular on the circle for two, seeded
/// Gaussian-normalized samples on the sphere beyond that.
pub fn directions(k: usize, n_dirs: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_dirs < 2 {
        return Err(Error::Invalid(format!("need at least 2 directions, got {n_dirs}")));
    }
    Ok(match k {
        0 => return Err(Error::Invalid("scores have no components".into())),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n_dirs)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / n_dirs as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n_dirs)
                .map(|_| loop {
                    let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        break v.into_iter().map(|x| x / norm).collect();
                    }
                })
                .collect()
        }
    })
}

/// Threshold sweeps along `n_dirs` fixed directions in score space.
pub fn fit_directions(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    delta: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<ModificationRule> {
    fit_directions_many(scores, val, criterion, &[delta], n_dirs, seed).map(|mut v| v.remove(0))
}

pub fn fit_directions_many(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    deltas: &[f64],
    n_dirs: usize,
    seed: u64,
) -> Result<Vec<ModificationRule>> {
    let dirs = directions(scores.k(), n_dirs, seed)?;
    let mut rules = fit_along_many(scores, val, criterion, deltas, &dirs, "directions")?;
    if scores.k() > 2 {
        for r in &mut rules {
            r.provenance.seed = Some(seed);
            r.provenance.note = Some("directions sampled uniformly on the unit sphere".into());
        }
    }
    Ok(rules)
}

/// The rule whose boundary is the line through score points `p` and `q`, flipping the side
/// away from the origin. `None` when the points coincide or the line passes through the origin.
pub fn line_rule(p: &[f64], q: &[f64]) -> Option<Vec<f64>> {
    let normal = [-(q[1] - p[1]), q[0] - p[0]];
    if normal == [0.0, 0.0] {
        return None;
    }
    let c = normal[0] * p[0] + normal[1] * p[1];
    let z = [normal[0] / c, normal[1] / c];
    if c == 0.0 || !z.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(z.to_vec())
}

/// Indices of the `m` seeded subsample points (all points, in order, when `m >= n`).
pub fn subsample(n: usize, m: usize, seed: u64) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Lines through pairs of `m` subsampled score points (two-score criteria only).
pub fn fit_line_pairs(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    delta: f64,
    m: usize,
    seed: u64,
) -> Result<ModificationRule> {
    fit_line_pairs_many(scores, val, criterion, &[delta], m, seed).map(|mut v| v.remove(0))
}

pub fn fit_line_pairs_many(
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    deltas: &[f64],
    m: usize,
    seed: u64,
) -> Result<Vec<ModificationRule>> {
    check_dim(2, scores.k())?;
    check_deltas(deltas)?;
    if m < 2 {
        return Err(Error::Invalid(format!("M must be at least 2, got {m}")));
    }
    let ctx = Context::new(scores, val, criterion)?;
    let points = subsample(scores.len(), m, seed);
    let mut seed_best = Best::new(deltas);
    seed_best.offer(&ctx.identity());
    let best = (0..points.len())
        .into_par_iter()
        .map(|a| {
            let mut b = Best::new(deltas);
            for c in a + 1..points.len() {
                if let Some(z) = line_rule(scores.s(points[a]), scores.s(points[c])) {
                    b.offer(&ctx.candidate(z, (a + 1, c)));
                }
            }
            b
        })
        .reduce(|| Best::new(deltas), Best::merge)
        .merge(seed_best);
    finish(&ctx, best, "pairs", Some(seed), None, val, criterion)
}

/// Dispatch on `method`, one rule per δ, all from the same candidate family.
pub fn fit_many(
    method: Method,
    scores: &BiasScores,
    val: &LabeledDataset,
    criterion: &CriterionSpec,
    deltas: &[f64],
    params: &SearchParams,
) -> Result<Vec<ModificationRule>> {
    match method {
        Method::Threshold => fit_threshold_many(scores, val, criterion, deltas),
        Method::Pairs => fit_line_pairs_many(scores, val, criterion, deltas, params.m, params.seed),
        Method::Directions => {
            fit_directions_many(scores, val, criterion, deltas, params.n_dirs, params.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub delta: f64,
    pub rule: ModificationRule,
    pub val_report: EvalReport,
    pub test_report: Option<EvalReport>,
}

/// Fit one rule per δ on validation and optionally evaluate each on a test set.
pub fn frontier(
    scores: &BiasScores,
    val: &LabeledDataset,
    test: Option<(&BiasScores, &LabeledDataset)>,
    criterion: &CriterionSpec,
    deltas: &[f64],
    method: Method,
    params: &SearchParams,
) -> Result<Vec<FrontierPoint>> {
    let rules = fit_many(method, scores, val, criterion, deltas, params)?;
    rules
        .into_iter()
        .zip(deltas)
        .map(|(rule, &delta)| {
            let val_report = evaluate(&rule, scores, val, criterion)?;
            let test_report = test
                .map(|(s, d)| evaluate(&rule, s, d, criterion))
                .transpose()?;
            Ok(FrontierPoint {
                delta,
                rule,
                val_report,
                test_report,
            })
        })
        .collect()
}
