//! Exact finite-sample optimum of the constrained flipping problem.
//!
//! For instances `i = 1..n` with flip cost `η_i` and group functions `F_i ∈ R^K`, the primal is
//!
//! ```text
//! min  (1/n) Σ η_i κ_i     over κ ∈ [0, 1]^n
//! s.t. (1/n) Σ κ_i F_ik <= C*_k + δ      (row 2k,   "upper")
//!     -(1/n) Σ κ_i F_ik <= δ - C*_k      (row 2k+1, "lower")
//! ```
//!
//! i.e. `|C*_k - (1/n) Σ κ_i F_ik| <= δ`. With dual weights `z >= 0` on the `2K` rows and
//! `w_k = z_lower,k - z_upper,k`, the dual is
//!
//! ```text
//! max_w  -Σ_k (δ |w_k| - C*_k w_k) - (1/n) Σ_i max(0, w·F_i - η_i)
//! ```
//!
//! and an optimal κ flips exactly where `w·F_i > η_i`, i.e. `w · s_i > 1` for `η_i > 0`.

mod dual;
pub(crate) mod simplex;

pub use dual::{solve_dual, DualSolution};

use crate::criterion::{CriterionSpec, Side};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::Membership;
use crate::rule::{ModificationRule, Provenance};
use crate::scores::BiasScores;

pub const FEASIBILITY_TOL: f64 = 1e-9;
/// κ values at or above `1 - KAPPA_TOL` count as flipped when rounding.
pub const KAPPA_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_BRUTE_FORCE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    eta: Vec<f64>,
    /// Row-major `n × K`.
    f: Vec<f64>,
    c_star: Vec<f64>,
    delta: f64,
}

impl LpInstance {
    /// `eta` may contain non-positive entries (see [`LpInstance::empirical`]); converting the
    /// dual into a score rule requires them to be positive.
    pub fn new(eta: Vec<f64>, f: Vec<f64>, c_star: Vec<f64>, delta: f64) -> Result<Self> {
        let k = c_star.len();
        if k == 0 || f.len() != eta.len() * k {
            return Err(Error::Dimension {
                expected: eta.len() * k.max(1),
                got: f.len(),
            });
        }
        if !(delta >= 0.0) {
            return Err(Error::Invalid(format!("delta must be non-negative, got {delta}")));
        }
        if eta.iter().chain(&f).chain(&c_star).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("instance entries must be finite".into()));
        }
        Ok(Self { eta, f, c_star, delta })
    }

    /// Plug-in instance: `η` and `F` from the scores, `C*` the empirical baseline
    /// disparities of `ŷ` on `val`.
    pub fn from_scores(
        scores: &BiasScores,
        val: &LabeledDataset,
        criterion: &CriterionSpec,
        delta: f64,
    ) -> Result<Self> {
        check_len(scores, val)?;
        let membership = Membership::new(val, criterion)?;
        let c_star = membership.disparities(&membership.positive_counts(scores.yhat()));
        let f = (0..scores.len()).flat_map(|i| scores.f(i).iter().copied()).collect();
        Self::new(scores.eta().to_vec(), f, c_star, delta)
    }

    /// Empirical instance: flipping `i` changes the validation accuracy by exactly
    /// `-η_i / n` with `η_i = 2·1{ŷ_i = y_i} - 1`, and disparity `k` by `-F_ik / n` with
    /// `F_ik = (2ŷ_i - 1)(1{i ∈ a_k} / p̂_a - 1{i ∈ b_k} / p̂_b)` built from the observed
    /// groups and their empirical frequencies. Its optimum bounds every flip set on `val`.
    pub fn empirical(
        yhat: &[u8],
        val: &LabeledDataset,
        criterion: &CriterionSpec,
        delta: f64,
    ) -> Result<Self> {
        if yhat.len() != val.len() {
            return Err(Error::Dimension {
                expected: val.len(),
                got: yhat.len(),
            });
        }
        let membership = Membership::new(val, criterion)?;
        let n = val.len() as f64;
        let k = membership.k();
        let eta = yhat
            .iter()
            .zip(val.labels())
            .map(|(p, y)| if p == y { 1.0 } else { -1.0 })
            .collect();
        let mut f = vec![0.0; val.len() * k];
        for (c, &(na, nb)) in membership.sizes().iter().enumerate() {
            let (pa, pb) = (na as f64 / n, nb as f64 / n);
            for (i, &y) in yhat.iter().enumerate() {
                let sign = if y == 1 { 1.0 } else { -1.0 };
                f[i * k + c] = match membership.side(c, i) {
                    Side::A => sign / pa,
                    Side::B => -sign / pb,
                    Side::Neither => 0.0,
                };
            }
        }
        let c_star = membership.disparities(&membership.positive_counts(yhat));
        Self::new(eta, f, c_star, delta)
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn k(&self) -> usize {
        self.c_star.len()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn f(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.f[i * k..(i + 1) * k]
    }

    pub fn c_star(&self) -> &[f64] {
        &self.c_star
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.eta.clone(), self.f.clone(), self.c_star.clone(), delta)
    }

    /// `(1/n) Σ η_i κ_i`.
    pub fn objective(&self, kappa: &[f64]) -> f64 {
        self.eta.iter().zip(kappa).map(|(e, k)| e * k).sum::<f64>() / self.n() as f64
    }

    /// Disparities `C*_k - (1/n) Σ κ_i F_ik` after flipping by `kappa`.
    pub fn disparities(&self, kappa: &[f64]) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.k())
            .map(|c| {
                let moved: f64 = (0..self.n()).map(|i| kappa[i] * self.f(i)[c]).sum();
                self.c_star[c] - moved / n
            })
            .collect()
    }

    /// Largest constraint violation `max_k (|C_k(κ)| - δ)`, or a non-positive slack.
    pub fn violation(&self, kappa: &[f64]) -> f64 {
        self.disparities(kappa)
            .iter()
            .map(|d| d.abs() - self.delta)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Row right-hand sides `b` in `[upper_0, lower_0, upper_1, ...]` order.
    fn rhs(&self) -> Vec<f64> {
        self.c_star
            .iter()
            .flat_map(|&c| [c + self.delta, self.delta - c])
            .collect()
    }
}

fn check_len(scores: &BiasScores, val: &LabeledDataset) -> Result<()> {
    if scores.len() == val.len() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: val.len(),
            got: scores.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub kappa: Vec<f64>,
    pub objective: f64,
    /// Non-negative row duals in `[upper_0, lower_0, upper_1, lower_1, ...]` order.
    pub dual: Vec<f64>,
    /// Sum of complementary-slackness products; zero at an exact optimum.
    pub cs_residual: f64,
}

impl LpSolution {
    fn infeasible(n: usize, k: usize) -> Self {
        Self {
            status: LpStatus::Infeasible,
            kappa: vec![0.0; n],
            objective: f64::INFINITY,
            dual: vec![0.0; 2 * k],
            cs_residual: 0.0,
        }
    }

    /// Deterministic flips: fractional coordinates round toward κ = 0.
    pub fn flip_mask(&self) -> Vec<bool> {
        self.kappa.iter().map(|&k| k >= 1.0 - KAPPA_TOL).collect()
    }

    pub fn fractional_count(&self) -> usize {
        self.kappa
            .iter()
            .filter(|&&k| k > KAPPA_TOL && k < 1.0 - KAPPA_TOL)
            .count()
    }

    /// Total κ mass dropped by [`LpSolution::flip_mask`].
    pub fn fractional_mass(&self) -> f64 {
        self.kappa.iter().filter(|&&k| k < 1.0 - KAPPA_TOL).sum()
    }

    pub fn is_integral(&self) -> bool {
        self.fractional_count() == 0
    }
}

/// Solve the primal LP with the bounded-variable simplex.
pub fn solve_primal(inst: &LpInstance) -> Result<LpSolution> {
    let (n, k) = (inst.n(), inst.k());
    // Work with sums instead of means: rows Σ κ F <= n b, objective Σ η κ.
    let nf = n as f64;
    let a: Vec<Vec<f64>> = (0..k)
        .flat_map(|c| {
            let col: Vec<f64> = (0..n).map(|i| inst.f(i)[c]).collect();
            let neg = col.iter().map(|v| -v).collect();
            [col, neg]
        })
        .collect();
    let b: Vec<f64> = inst.rhs().iter().map(|v| v * nf).collect();
    match simplex::solve(inst.eta(), &a, &b, &vec![1.0; n]) {
        simplex::Outcome::Optimal { x, duals } => {
            // Row duals of a min problem with <= rows are <= 0; z = -y.
            let dual: Vec<f64> = duals.iter().map(|y| (-y).max(0.0)).collect();
            let objective = inst.objective(&x);
            let cs_residual = complementary_slackness(inst, &x, &dual);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                kappa: x,
                objective,
                dual,
                cs_residual,
            })
        }
        simplex::Outcome::Infeasible => Ok(LpSolution::infeasible(n, k)),
        simplex::Outcome::IterationLimit => Err(Error::Invalid(
            "simplex hit its iteration limit (numerically degenerate instance?)".into(),
        )),
    }
}

/// `Σ_r z_r·slack_r + (1/n) Σ_i [κ_i (r_i)_+ + (1 - κ_i)(r_i)_-]` with reduced costs
/// `r_i = η_i - w·F_i`.
pub fn complementary_slackness(inst: &LpInstance, kappa: &[f64], dual: &[f64]) -> f64 {
    let w = signed_weights(dual);
    let b = inst.rhs();
    let disp = inst.disparities(kappa);
    let mut total = 0.0;
    for c in 0..inst.k() {
        let moved = inst.c_star[c] - disp[c];
        total += dual[2 * c] * (b[2 * c] - moved).abs();
        total += dual[2 * c + 1] * (b[2 * c + 1] + moved).abs();
    }
    let mut per_point = 0.0;
    for i in 0..inst.n() {
        let wf: f64 = w.iter().zip(inst.f(i)).map(|(a, b)| a * b).sum();
        let r = inst.eta[i] - wf;
        per_point += kappa[i] * r.max(0.0) + (1.0 - kappa[i]) * (-r).max(0.0);
    }
    total + per_point / inst.n() as f64
}

/// `w_k = z_lower,k - z_upper,k`.
pub fn signed_weights(dual: &[f64]) -> Vec<f64> {
    dual.chunks_exact(2).map(|z| z[1] - z[0]).collect()
}

/// Turn row duals into the score rule `Σ_k w_k s_k > 1`.
pub fn rule_from_dual(dual: &[f64]) -> Result<ModificationRule> {
    if dual.is_empty() || dual.len() % 2 != 0 {
        return Err(Error::Invalid(format!(
            "expected 2K dual weights, got {}",
            dual.len()
        )));
    }
    if let Some(z) = dual.iter().find(|z| !(**z >= 0.0)) {
        return Err(Error::Invalid(format!("dual weight {z} is negative")));
    }
    ModificationRule::new(
        signed_weights(dual),
        Provenance {
            algorithm: "lp-dual".into(),
            feasible: true,
            ..Provenance::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub status: LpStatus,
    pub kappa: Vec<bool>,
    pub objective: f64,
}

/// Exhaustive minimum over all `2^n` deterministic flip vectors.
pub fn brute_force(inst: &LpInstance, max_n: usize) -> Result<BruteForce> {
    let (n, k) = (inst.n(), inst.k());
    if n > max_n || n >= 63 {
        return Err(Error::TooLarge { n, max: max_n });
    }
    let nf = n as f64;
    let mut best: Option<(f64, u64)> = None;
    for mask in 0u64..(1u64 << n) {
        let mut cost = 0.0;
        let mut moved = vec![0.0; k];
        for i in 0..n {
            if mask >> i & 1 == 1 {
                cost += inst.eta[i];
                for (m, f) in moved.iter_mut().zip(inst.f(i)) {
                    *m += f;
                }
            }
        }
        let feasible = (0..k)
            .all(|c| (inst.c_star[c] - moved[c] / nf).abs() <= inst.delta + FEASIBILITY_TOL);
        if feasible && best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, mask));
        }
    }
    Ok(match best {
        Some((cost, mask)) => BruteForce {
            status: LpStatus::Optimal,
            kappa: (0..n).map(|i| mask >> i & 1 == 1).collect(),
            objective: cost / nf,
        },
        None => BruteForce {
            status: LpStatus::Infeasible,
            kappa: vec![false; n],
            objective: f64::INFINITY,
        },
    })
}
