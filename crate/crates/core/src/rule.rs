//! Linear modification rules `κ(x) = 1{ z · s(x) > 1 }` and their key-value file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// How a rule was produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub algorithm: String,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    /// False when no candidate met the constraint and the least-violating one was kept.
    pub feasible: bool,
    pub val_accuracy: Option<f64>,
    pub val_cc: Option<f64>,
    pub note: Option<String>,
}

/// Flip the base prediction wherever `z · s > 1` (strictly).
///
/// A one-score threshold rule `s / t > 1` is `z = [1 / t]`; a negative `t` flips the
/// instances whose score is *below* `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModificationRule {
    weights: Vec<f64>,
    pub provenance: Provenance,
}

impl ModificationRule {
    pub fn new(weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("rule needs at least one weight".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Invalid(format!("rule weight {w} is not finite")));
        }
        Ok(Self {
            weights,
            provenance,
        })
    }

    /// The rule that never flips.
    pub fn identity(k: usize) -> Self {
        Self {
            weights: vec![0.0; k],
            provenance: Provenance {
                algorithm: "identity".into(),
                feasible: true,
                ..Provenance::default()
            },
        }
    }

    /// `κ = 1{ s / t > 1 }`; infinite `t` never flips.
    pub fn from_threshold(t: f64) -> Result<Self> {
        if t == 0.0 || t.is_nan() {
            return Err(Error::Invalid(format!("threshold {t} has no rule form")));
        }
        Self::new(vec![1.0 / t], Provenance::default())
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn value(&self, scores: &[f64]) -> f64 {
        self.weights.iter().zip(scores).map(|(z, s)| z * s).sum()
    }

    #[inline]
    pub fn flips(&self, scores: &[f64]) -> bool {
        self.value(scores) > 1.0
    }

    pub fn to_kv(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        let weights: Vec<String> = self.weights.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "weights = {}", weights.join(","));
        let _ = writeln!(out, "algorithm = {}", p.algorithm);
        if let Some(d) = p.delta {
            let _ = writeln!(out, "delta = {d}");
        }
        if let Some(s) = p.seed {
            let _ = writeln!(out, "seed = {s}");
        }
        let _ = writeln!(out, "feasible = {}", p.feasible);
        if let Some(a) = p.val_accuracy {
            let _ = writeln!(out, "val_accuracy = {a}");
        }
        if let Some(c) = p.val_cc {
            let _ = writeln!(out, "val_cc = {c}");
        }
        if let Some(n) = &p.note {
            let _ = writeln!(out, "note = {}", n.replace('\n', " "));
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut weights = None;
        let mut p = Provenance::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: lineno + 1,
                column: String::new(),
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.parse::<f64>().map_err(|e| Error::Parse {
                    row: lineno + 1,
                    column: key.to_string(),
                    message: e.to_string(),
                })
            };
            match key {
                "weights" => {
                    weights = Some(value.split(',').map(|v| num(v.trim())).collect::<Result<Vec<_>>>()?)
                }
                "algorithm" => p.algorithm = value.to_string(),
                "delta" => p.delta = Some(num(value)?),
                "seed" => {
                    p.seed = Some(value.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                        row: lineno + 1,
                        column: key.into(),
                        message: e.to_string(),
                    })?)
                }
                "feasible" => p.feasible = value == "true",
                "val_accuracy" => p.val_accuracy = Some(num(value)?),
                "val_cc" => p.val_cc = Some(num(value)?),
                "note" => p.note = Some(value.to_string()),
                _ => {}
            }
        }
        let weights = weights.ok_or_else(|| Error::Schema("rule file has no `weights` line".into()))?;
        Self::new(weights, p)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text)
    }
}
