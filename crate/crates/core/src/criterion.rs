//! Composite fairness criteria: K pairs of group events compared on positive rates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// `attribute == value`, optionally intersected with `label == y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEvent {
    pub attribute: String,
    pub value: u8,
    pub label: Option<u8>,
}

impl GroupEvent {
    pub fn attr(attribute: &str, value: u8) -> Self {
        Self {
            attribute: attribute.to_string(),
            value,
            label: None,
        }
    }

    pub fn joint(attribute: &str, value: u8, label: u8) -> Self {
        Self {
            label: Some(label),
            ..Self::attr(attribute, value)
        }
    }

    fn column<'a>(&self, ds: &'a LabeledDataset) -> Result<&'a [u8]> {
        ds.attribute(&self.attribute)
            .ok_or_else(|| Error::Schema(format!("dataset has no attribute `{}`", self.attribute)))
    }

    #[inline]
    fn hit(&self, attr: u8, label: u8) -> bool {
        attr == self.value && self.label.is_none_or(|y| y == label)
    }
}

impl fmt::Display for GroupEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label {
            Some(y) => write!(f, "Y={y},{}={}", self.attribute, self.value),
            None => write!(f, "{}={}", self.attribute, self.value),
        }
    }
}

/// Where a row falls for one criterion component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub group_a: GroupEvent,
    pub group_b: GroupEvent,
    pub prior_a: Option<f64>,
    pub prior_b: Option<f64>,
}

impl Component {
    pub fn new(name: &str, group_a: GroupEvent, group_b: GroupEvent) -> Self {
        Self {
            name: name.to_string(),
            group_a,
            group_b,
            prior_a: None,
            prior_b: None,
        }
    }

    pub fn priors(&self) -> Result<(f64, f64)> {
        match (self.prior_a, self.prior_b) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Ok((a, b)),
            (Some(_), Some(_)) => Err(Error::Invalid(format!(
                "component `{}` has non-positive priors",
                self.name
            ))),
            _ => Err(Error::Invalid(format!(
                "component `{}` has no priors; estimate them first",
                self.name
            ))),
        }
    }

    /// Side of every dataset row for this component.
    pub fn sides(&self, ds: &LabeledDataset) -> Result<Vec<Side>> {
        let ca = self.group_a.column(ds)?;
        let cb = self.group_b.column(ds)?;
        Ok(ds
            .labels()
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if self.group_a.hit(ca[i], y) {
                    Side::A
                } else if self.group_b.hit(cb[i], y) {
                    Side::B
                } else {
                    Side::Neither
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionKind {
    DemographicParity,
    EqualOpportunity,
    EqualizedOdds,
    Custom,
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Ok(Self::DemographicParity),
            "eop" => Ok(Self::EqualOpportunity),
            "eo" => Ok(Self::EqualizedOdds),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Invalid(format!(
                "unknown criterion `{other}` (expected dp, eop, eo)"
            ))),
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DemographicParity => "dp",
            Self::EqualOpportunity => "eop",
            Self::EqualizedOdds => "eo",
            Self::Custom => "custom",
        })
    }
}

/// The composite criterion `max_k |Pr(Ŷ=1 | a_k) - Pr(Ŷ=1 | b_k)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub kind: CriterionKind,
    pub components: Vec<Component>,
}

impl CriterionSpec {
    /// Demographic parity on `attribute`: group a is `A=0`, group b is `A=1`.
    pub fn demographic_parity(attribute: &str) -> Self {
        Self {
            kind: CriterionKind::DemographicParity,
            components: vec![Component::new(
                "dp",
                GroupEvent::attr(attribute, 0),
                GroupEvent::attr(attribute, 1),
            )],
        }
    }

    /// Equal opportunity: the `Y=1` component of equalized odds.
    pub fn equal_opportunity(attribute: &str) -> Self {
        Self {
            kind: CriterionKind::EqualOpportunity,
            components: vec![Self::odds_component(attribute, 1)],
        }
    }

    /// Equalized odds; component `k` compares `(Y=k, A=0)` with `(Y=k, A=1)`.
    pub fn equalized_odds(attribute: &str) -> Self {
        Self {
            kind: CriterionKind::EqualizedOdds,
            components: vec![
                Self::odds_component(attribute, 0),
                Self::odds_component(attribute, 1),
            ],
        }
    }

    pub fn custom(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Invalid("criterion needs at least one component".into()));
        }
        Ok(Self {
            kind: CriterionKind::Custom,
            components,
        })
    }

    pub fn from_kind(kind: CriterionKind, attribute: &str) -> Result<Self> {
        match kind {
            CriterionKind::DemographicParity => Ok(Self::demographic_parity(attribute)),
            CriterionKind::EqualOpportunity => Ok(Self::equal_opportunity(attribute)),
            CriterionKind::EqualizedOdds => Ok(Self::equalized_odds(attribute)),
            CriterionKind::Custom => Err(Error::Invalid(
                "custom criteria must be built from explicit components".into(),
            )),
        }
    }

    fn odds_component(attribute: &str, y: u8) -> Component {
        Component::new(
            &format!("y{y}"),
            GroupEvent::joint(attribute, 0, y),
            GroupEvent::joint(attribute, 1, y),
        )
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Replace the priors; one `(prior_a, prior_b)` pair per component.
    pub fn with_priors(mut self, priors: &[(f64, f64)]) -> Result<Self> {
        if priors.len() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: priors.len(),
            });
        }
        for (c, &(a, b)) in self.components.iter_mut().zip(priors) {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::Invalid(format!(
                    "priors for `{}` must be positive, got ({a}, {b})",
                    c.name
                )));
            }
            c.prior_a = Some(a);
            c.prior_b = Some(b);
        }
        Ok(self)
    }

    pub fn priors(&self) -> Result<Vec<(f64, f64)>> {
        self.components.iter().map(Component::priors).collect()
    }
}

/// Fill component priors with the empirical group frequencies of `ds`.
pub fn estimate_priors(ds: &LabeledDataset, criterion: &CriterionSpec) -> Result<CriterionSpec> {
    if ds.is_empty() {
        return Err(Error::Invalid("cannot estimate priors from an empty dataset".into()));
    }
    let n = ds.len() as f64;
    let mut priors = Vec::with_capacity(criterion.k());
    for c in &criterion.components {
        let sides = c.sides(ds)?;
        let na = sides.iter().filter(|s| **s == Side::A).count();
        let nb = sides.iter().filter(|s| **s == Side::B).count();
        if na == 0 {
            return Err(Error::EmptyGroup(c.group_a.to_string()));
        }
        if nb == 0 {
            return Err(Error::EmptyGroup(c.group_b.to_string()));
        }
        priors.push((na as f64 / n, nb as f64 / n));
    }
    criterion.clone().with_priors(&priors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(labels: &[u8], a: &[u8]) -> LabeledDataset {
        LabeledDataset::new(labels.to_vec(), vec![("a".into(), a.to_vec())]).unwrap()
    }

    #[test]
    fn even_split_gives_half_priors() {
        let d = ds(&[1, 0, 1, 0], &[0, 0, 1, 1]);
        let c = estimate_priors(&d, &CriterionSpec::demographic_parity("a")).unwrap();
        assert_eq!(c.priors().unwrap(), vec![(0.5, 0.5)]);
    }

    #[test]
    fn equalized_odds_cell_priors() {
        // (Y, A) cell counts 500/100/100/500 for (1,0), (1,1), (0,0), (0,1).
        let mut labels = vec![];
        let mut attr = vec![];
        for (y, a, n) in [(1, 0, 500), (1, 1, 100), (0, 0, 100), (0, 1, 500)] {
            labels.extend(std::iter::repeat_n(y, n));
            attr.extend(std::iter::repeat_n(a, n));
        }
        let c = estimate_priors(&ds(&labels, &attr), &CriterionSpec::equalized_odds("a")).unwrap();
        let p = c.priors().unwrap();
        assert_eq!(p[1].0, 500.0 / 1200.0);
        assert_eq!(p[1].1, 100.0 / 1200.0);
        assert_eq!(p[0].0, 100.0 / 1200.0);
        assert_eq!(p[0].1, 500.0 / 1200.0);
        for (a, b) in p {
            assert!(a + b <= 1.0);
        }
    }

    #[test]
    fn empty_group_is_an_error() {
        let d = ds(&[1, 0, 1], &[0, 0, 0]);
        let err = estimate_priors(&d, &CriterionSpec::demographic_parity("a")).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup(_)));
    }

    #[test]
    fn sides_for_joint_events() {
        let d = ds(&[1, 1, 0, 0], &[0, 1, 0, 1]);
        let c = CriterionSpec::equal_opportunity("a");
        assert_eq!(
            c.components[0].sides(&d).unwrap(),
            vec![Side::A, Side::B, Side::Neither, Side::Neither]
        );
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in ["dp", "eop", "eo"] {
            assert_eq!(k.parse::<CriterionKind>().unwrap().to_string(), k);
        }
        assert!("calibration".parse::<CriterionKind>().is_err());
    }
}
