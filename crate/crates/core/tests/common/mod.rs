#![allow(dead_code)]

use fairflip_core::synth::{self, GaussianMixtureSpec, SoftmaxHyper, SoftmaxModel, ATTRIBUTE};
use fairflip_core::{bias_scores, estimate_priors, BiasScores, CriterionSpec, LabeledDataset, ProbTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn criterion_for(k: usize) -> CriterionSpec {
    match k {
        1 => CriterionSpec::demographic_parity("a"),
        _ => CriterionSpec::equalized_odds("a"),
    }
}

/// Random labels and groups with every `(y, a)` cell occupied.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> LabeledDataset {
    assert!(n >= 4);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let mut attr: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    for c in 0..4 {
        labels[c] = (c / 2) as u8;
        attr[c] = (c % 2) as u8;
    }
    LabeledDataset::new(labels, vec![("a".into(), attr)]).unwrap()
}

/// Random probabilities; `grid` rounds them to multiples of `1/grid` to force ties.
pub fn random_probs(rng: &mut ChaCha8Rng, n: usize, k: usize, grid: Option<u32>) -> ProbTable {
    let draw = |rng: &mut ChaCha8Rng| {
        let v: f64 = rng.random();
        match grid {
            Some(g) => (v * g as f64).round() / g as f64,
            None => v,
        }
    };
    let p_y = (0..n).map(|_| draw(rng)).collect();
    let mut p_a = Vec::new();
    let mut p_b = Vec::new();
    for _ in 0..k {
        p_a.push((0..n).map(|_| draw(rng) * 0.5).collect());
        p_b.push((0..n).map(|_| draw(rng) * 0.5).collect());
    }
    ProbTable::new(p_y, p_a, p_b).unwrap()
}

pub struct Instance {
    pub val: LabeledDataset,
    pub probs: ProbTable,
    pub scores: BiasScores,
    pub criterion: CriterionSpec,
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize, grid: Option<u32>) -> Instance {
    let val = random_dataset(rng, n);
    let criterion = estimate_priors(&val, &criterion_for(k)).unwrap();
    let probs = random_probs(rng, n, k, grid);
    let scores = bias_scores(&probs, &criterion, 1e-12).unwrap();
    Instance {
        val,
        probs,
        scores,
        criterion,
    }
}

/// Mixture sample, softmax auxiliary trained on a separate draw, priors from training.
pub struct Synthetic {
    pub spec: GaussianMixtureSpec,
    pub train: LabeledDataset,
    pub model: SoftmaxModel,
    pub criterion: CriterionSpec,
}

impl Synthetic {
    pub fn new(criterion: CriterionSpec, n_train: usize, seed: u64) -> Self {
        let spec = GaussianMixtureSpec::default();
        let train = synth::sample(&spec.with_total(n_train), seed).unwrap();
        let model = synth::fit_cells(&train, ATTRIBUTE, SoftmaxHyper { seed, ..Default::default() }).unwrap();
        let criterion = estimate_priors(&train, &criterion).unwrap();
        Self {
            spec,
            train,
            model,
            criterion,
        }
    }

    pub fn draw(&self, n: usize, seed: u64) -> LabeledDataset {
        synth::sample(&self.spec.with_total(n), seed).unwrap()
    }

    pub fn probs(&self, ds: &LabeledDataset) -> ProbTable {
        self.model.predict_probs(ds.features().unwrap(), &self.criterion).unwrap()
    }

    pub fn true_probs(&self, ds: &LabeledDataset) -> ProbTable {
        synth::true_posteriors(&self.spec, ds.features().unwrap(), &self.criterion).unwrap()
    }

    pub fn scores(&self, probs: &ProbTable) -> BiasScores {
        bias_scores(probs, &self.criterion, 1e-12).unwrap()
    }
}
