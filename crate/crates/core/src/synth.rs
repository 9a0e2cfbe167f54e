//! Two-dimensional Gaussian-mixture ground truth and a softmax-regression auxiliary model.
//!
//! Cells are indexed by `(y, a)`; the four-class encoding used throughout is `2y + a`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::criterion::CriterionSpec;
use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::probs::ProbTable;

/// Attribute column written by [`sample`].
pub const ATTRIBUTE: &str = "a";
pub const FEATURE_NAMES: [&str; 2] = ["x0", "x1"];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub y: u8,
    pub a: u8,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub count: usize,
}

impl Cell {
    pub fn class(&self) -> usize {
        2 * self.y as usize + self.a as usize
    }

    fn cholesky(&self) -> Result<[[f64; 2]; 2]> {
        let [[s00, s01], [s10, s11]] = self.cov;
        let finite = self.cov.iter().flatten().chain(&self.mean).all(|v| v.is_finite());
        if !finite || s01 != s10 || s00 <= 0.0 || s00 * s11 - s01 * s10 <= 0.0 {
            return Err(Error::Invalid(format!(
                "covariance of cell (y={}, a={}) is not symmetric positive-definite",
                self.y, self.a
            )));
        }
        let l00 = s00.sqrt();
        let l10 = s10 / l00;
        let l11 = (s11 - l10 * l10).sqrt();
        Ok([[l00, 0.0], [l10, l11]])
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let [[s00, s01], [_, s11]] = self.cov;
        let det = s00 * s11 - s01 * s01;
        let d0 = x[0] - self.mean[0];
        let d1 = x[1] - self.mean[1];
        let q = (s11 * d0 * d0 - 2.0 * s01 * d0 * d1 + s00 * d1 * d1) / det;
        -0.5 * q - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    pub cells: Vec<Cell>,
}

impl Default for GaussianMixtureSpec {
    /// Four cells with shared covariance `[[5, 1], [1, 5]]` and counts 500/100/100/500.
    fn default() -> Self {
        let cov = [[5.0, 1.0], [1.0, 5.0]];
        let cell = |y, a, mean, count| Cell {
            y,
            a,
            mean,
            cov,
            count,
        };
        Self {
            cells: vec![
                cell(1, 0, [2.0, 0.0], 500),
                cell(1, 1, [2.0, 3.0], 100),
                cell(0, 0, [-1.0, -3.0], 100),
                cell(0, 1, [-1.0, 0.0], 500),
            ],
        }
    }
}

impl GaussianMixtureSpec {
    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Invalid("mixture has no cells".into()));
        }
        for c in &self.cells {
            if c.y > 1 || c.a > 1 {
                return Err(Error::Invalid(format!("cell (y={}, a={}) is not binary", c.y, c.a)));
            }
            c.cholesky()?;
        }
        if self.total() == 0 {
            return Err(Error::Invalid("mixture has zero total count".into()));
        }
        Ok(())
    }

    /// Rescale counts to sum to `n`, keeping proportions (largest remainder rounding).
    pub fn with_total(&self, n: usize) -> Self {
        let total = self.total().max(1) as f64;
        let exact: Vec<f64> = self
            .cells
            .iter()
            .map(|c| c.count as f64 * n as f64 / total)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())));
        let short = n.saturating_sub(counts.iter().sum());
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        let mut out = self.clone();
        for (c, n) in out.cells.iter_mut().zip(counts) {
            c.count = n;
        }
        out
    }

    /// Cell priors from counts.
    pub fn priors(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.cells.iter().map(|c| c.count as f64 / total).collect()
    }
}

/// Draw exactly `count` points from every cell, then shuffle rows.
pub fn sample(spec: &GaussianMixtureSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(u8, u8, [f64; 2])> = Vec::with_capacity(spec.total());
    for cell in &spec.cells {
        let l = cell.cholesky()?;
        for _ in 0..cell.count {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let x = [
                cell.mean[0] + l[0][0] * z0,
                cell.mean[1] + l[1][0] * z0 + l[1][1] * z1,
            ];
            rows.push((cell.y, cell.a, x));
        }
    }
    rows.shuffle(&mut rng);
    let labels = rows.iter().map(|r| r.0).collect();
    let attr = rows.iter().map(|r| r.1).collect();
    let data = rows.iter().flat_map(|r| r.2).collect();
    let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    LabeledDataset::new(labels, vec![(ATTRIBUTE.to_string(), attr)])?.with_features(Features::new(names, data)?)
}

/// Exact `p(Y=y, A=a | x)` indexed `2y + a`.
pub fn cell_posterior(spec: &GaussianMixtureSpec, x: &[f64]) -> [f64; 4] {
    let priors = spec.priors();
    let logs: Vec<f64> = spec
        .cells
        .iter()
        .zip(&priors)
        .map(|(c, &p)| if p > 0.0 { p.ln() + c.log_density(x) } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; 4];
    let mut norm = 0.0;
    for (c, l) in spec.cells.iter().zip(&logs) {
        let v = (l - top).exp();
        out[c.class()] += v;
        norm += v;
    }
    for v in &mut out {
        *v /= norm;
    }
    out
}

pub fn cell_posteriors(spec: &GaussianMixtureSpec, x: &Features) -> Result<Vec<[f64; 4]>> {
    check_dim(x)?;
    Ok(x.iter_rows().map(|r| cell_posterior(spec, r)).collect())
}

/// Bayes posteriors of the mixture mapped onto the criterion's components.
pub fn true_posteriors(spec: &GaussianMixtureSpec, x: &Features, criterion: &CriterionSpec) -> Result<ProbTable> {
    spec.validate()?;
    joint_to_table(&cell_posteriors(spec, x)?, criterion)
}

/// `p(Y=1|x)` is the sum of the two `Y=1` cells.
pub fn joint_to_table(joint: &[[f64; 4]], criterion: &CriterionSpec) -> Result<ProbTable> {
    let p_y = joint.iter().map(|r| (r[2] + r[3]).min(1.0)).collect();
    ProbTable::from_joint(p_y, joint, criterion)
}

fn check_dim(x: &Features) -> Result<()> {
    if x.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: x.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftmaxHyper {
    pub learning_rate: f64,
    pub iterations: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SoftmaxHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 5000,
            lambda: 1e-4,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression. Weights are `(d + 1) × C`, row-major, bias row last.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    weights: Vec<f64>,
    dim: usize,
    classes: usize,
    pub hyper: SoftmaxHyper,
}

impl SoftmaxModel {
    pub fn from_weights(weights: Vec<f64>, dim: usize, classes: usize) -> Result<Self> {
        if classes < 2 || weights.len() != (dim + 1) * classes {
            return Err(Error::Dimension {
                expected: (dim + 1) * classes,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("weights must be finite".into()));
        }
        Ok(Self {
            weights,
            dim,
            classes,
            hyper: SoftmaxHyper::default(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Class probabilities for every row.
    pub fn predict_proba(&self, x: &Features) -> Result<Vec<Vec<f64>>> {
        if x.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(x.iter_rows().map(|r| softmax_row(&self.weights, r, self.classes)).collect())
    }

    /// Four-class probabilities (encoding `2y + a`) mapped onto the criterion's components.
    pub fn predict_probs(&self, x: &Features, criterion: &CriterionSpec) -> Result<ProbTable> {
        if self.classes != 4 {
            return Err(Error::Dimension {
                expected: 4,
                got: self.classes,
            });
        }
        let joint: Vec<[f64; 4]> = self
            .predict_proba(x)?
            .into_iter()
            .map(|p| [p[0], p[1], p[2], p[3]])
            .collect();
        joint_to_table(&joint, criterion)
    }

    /// Write `key = value` lines; weights are comma-separated, row-major.
    pub fn to_kv(&self) -> String {
        let w: Vec<String> = self.weights.iter().map(|v| format!("{v:?}")).collect();
        format!(
            "dim = {}\nclasses = {}\nlearning_rate = {:?}\niterations = {}\nlambda = {:?}\nseed = {}\nweights = {}\n",
            self.dim,
            self.classes,
            self.hyper.learning_rate,
            self.hyper.iterations,
            self.hyper.lambda,
            self.hyper.seed,
            w.join(",")
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut get = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("malformed model line `{line}`")))?;
            get.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| {
            get.get(k)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("model file is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            field(k)?
                .parse::<f64>()
                .map_err(|e| Error::Invalid(format!("`{k}`: {e}")))
        };
        let weights = field("weights")?
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Invalid(format!("`weights`: {e}")))?;
        let mut model = Self::from_weights(weights, num("dim")? as usize, num("classes")? as usize)?;
        model.hyper = SoftmaxHyper {
            learning_rate: num("learning_rate")?,
            iterations: num("iterations")? as usize,
            lambda: num("lambda")?,
            seed: num("seed")? as u64,
        };
        Ok(model)
    }
}

fn softmax_row(w: &[f64], x: &[f64], classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; classes];
    softmax_into(w, x, &mut out);
    out
}

fn softmax_into(w: &[f64], x: &[f64], out: &mut [f64]) {
    let (d, classes) = (x.len(), out.len());
    for (c, z) in out.iter_mut().enumerate() {
        *z = w[d * classes + c];
    }
    for (j, xj) in x.iter().enumerate() {
        let row = &w[j * classes..(j + 1) * classes];
        for (z, wc) in out.iter_mut().zip(row) {
            *z += xj * wc;
        }
    }
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut norm = 0.0;
    for v in out.iter_mut() {
        *v = (*v - top).exp();
        norm += *v;
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
}

/// Mean cross-entropy plus `λ‖W‖²` over the non-bias rows, and its gradient.
pub fn loss_and_grad(x: &Features, targets: &[usize], classes: usize, w: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let d = x.dim();
    let n = targets.len() as f64;
    let mut grad = vec![0.0; w.len()];
    let mut p = vec![0.0; classes];
    let mut loss = 0.0;
    for (row, &t) in x.iter_rows().zip(targets) {
        softmax_into(w, row, &mut p);
        loss -= p[t].max(f64::MIN_POSITIVE).ln();
        p[t] -= 1.0;
        for (j, xj) in row.iter().enumerate() {
            for (g, r) in grad[j * classes..(j + 1) * classes].iter_mut().zip(&p) {
                *g += r * xj;
            }
        }
        for (g, r) in grad[d * classes..].iter_mut().zip(&p) {
            *g += r;
        }
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    for i in 0..d * classes {
        loss += lambda * w[i] * w[i];
        grad[i] += 2.0 * lambda * w[i];
    }
    (loss, grad)
}

/// Full-batch gradient descent from a small seeded initialization.
pub fn fit_softmax(x: &Features, targets: &[usize], classes: usize, hyper: SoftmaxHyper) -> Result<SoftmaxModel> {
    if targets.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::Invalid("cannot fit on an empty dataset".into()));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::Invalid(format!("target {t} is outside 0..{classes}")));
    }
    if !(hyper.learning_rate > 0.0) || !(hyper.lambda >= 0.0) {
        return Err(Error::Invalid("learning rate must be positive and lambda non-negative".into()));
    }
    let d = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut w: Vec<f64> = (0..(d + 1) * classes)
        .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    for _ in 0..hyper.iterations {
        let (loss, grad) = loss_and_grad(x, targets, classes, &w, hyper.lambda);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { loss });
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= hyper.learning_rate * gi;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { loss: f64::NAN });
    }
    let mut model = SoftmaxModel::from_weights(w, d, classes)?;
    model.hyper = hyper;
    Ok(model)
}

/// Class index `2y + a` for every row.
pub fn cell_targets(ds: &LabeledDataset, attribute: &str) -> Result<Vec<usize>> {
    let a = ds
        .attribute(attribute)
        .ok_or_else(|| Error::Schema(format!("missing attribute `{attribute}`")))?;
    Ok(ds
        .labels()
        .iter()
        .zip(a)
        .map(|(&y, &a)| 2 * y as usize + a as usize)
        .collect())
}

/// Fit the four-class auxiliary model on a dataset with features.
pub fn fit_cells(ds: &LabeledDataset, attribute: &str, hyper: SoftmaxHyper) -> Result<SoftmaxModel> {
    let x = ds
        .features()
        .ok_or_else(|| Error::Schema("dataset has no feature columns".into()))?;
    fit_softmax(x, &cell_targets(ds, attribute)?, 4, hyper)
}
