//! Per-instance probabilities from the target model and the auxiliary group model.

use std::path::Path;

use crate::criterion::{CriterionSpec, GroupEvent};
use crate::dataset::parse_f64;
use crate::error::{Error, Result};

/// `p_y[i]` estimates `p(Y=1 | X_i)`; `p_a[k][i]` and `p_b[k][i]` estimate the membership
/// probabilities of component `k`'s two group events.
///
/// The two models need not agree as distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    p_y: Vec<f64>,
    p_a: Vec<Vec<f64>>,
    p_b: Vec<Vec<f64>>,
}

impl ProbTable {
    pub fn new(p_y: Vec<f64>, p_a: Vec<Vec<f64>>, p_b: Vec<Vec<f64>>) -> Result<Self> {
        if p_a.len() != p_b.len() || p_a.is_empty() {
            return Err(Error::Schema(format!(
                "need matching non-empty group columns, got {} and {}",
                p_a.len(),
                p_b.len()
            )));
        }
        check_column("p_y", &p_y, p_y.len())?;
        for (k, (a, b)) in p_a.iter().zip(&p_b).enumerate() {
            check_column(&format!("p_a{k}"), a, p_y.len())?;
            check_column(&format!("p_b{k}"), b, p_y.len())?;
        }
        Ok(Self { p_y, p_a, p_b })
    }

    /// Build from joint cell probabilities `joint[i][2*y + a] = p(Y=y, A=a | X_i)`.
    ///
    /// Each group event picks its cell (or sums over `y` when it has no label constraint).
    pub fn from_joint(p_y: Vec<f64>, joint: &[[f64; 4]], criterion: &CriterionSpec) -> Result<Self> {
        let cell = |ev: &GroupEvent, row: &[f64; 4]| -> f64 {
            let a = ev.value as usize;
            match ev.label {
                Some(y) => row[2 * y as usize + a],
                None => row[a] + row[2 + a],
            }
        };
        let mut p_a = Vec::with_capacity(criterion.k());
        let mut p_b = Vec::with_capacity(criterion.k());
        for c in &criterion.components {
            p_a.push(joint.iter().map(|r| cell(&c.group_a, r).min(1.0)).collect());
            p_b.push(joint.iter().map(|r| cell(&c.group_b, r).min(1.0)).collect());
        }
        Self::new(p_y, p_a, p_b)
    }

    pub fn len(&self) -> usize {
        self.p_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_y.is_empty()
    }

    pub fn k(&self) -> usize {
        self.p_a.len()
    }

    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }

    pub fn p_a(&self, k: usize) -> &[f64] {
        &self.p_a[k]
    }

    pub fn p_b(&self, k: usize) -> &[f64] {
        &self.p_b[k]
    }

    /// Apply `f` to every stored probability, column by column (`p_y` first, then
    /// `p_a0, p_b0, p_a1, ...`), clipping the result into `[0, 1]`.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut col = |c: &[f64]| c.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect::<Vec<_>>();
        let p_y = col(&self.p_y);
        let mut p_a = Vec::with_capacity(self.k());
        let mut p_b = Vec::with_capacity(self.k());
        for k in 0..self.k() {
            p_a.push(col(&self.p_a[k]));
            p_b.push(col(&self.p_b[k]));
        }
        Self { p_y, p_a, p_b }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick = |c: &[f64]| indices.iter().map(|&i| c[i]).collect::<Vec<_>>();
        Self {
            p_y: pick(&self.p_y),
            p_a: self.p_a.iter().map(|c| pick(c)).collect(),
            p_b: self.p_b.iter().map(|c| pick(c)).collect(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["p_y".to_string()];
        for k in 0..self.k() {
            header.push(format!("p_a{k}"));
            header.push(format!("p_b{k}"));
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.p_y[i].to_string()];
            for k in 0..self.k() {
                rec.push(self.p_a[k][i].to_string());
                rec.push(self.p_b[k][i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Write four-cell joint probabilities `p(Y=y, A=a | x)` (index `2y + a`) with
/// `p_y = p_y1a0 + p_y1a1`. [`load_probs`] builds any criterion's components from this file.
pub fn write_joint_csv(path: impl AsRef<Path>, joint: &[[f64; 4]]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["p_y"];
    header.extend(JOINT);
    w.write_record(&header)?;
    for row in joint {
        let mut rec = vec![(row[2] + row[3]).min(1.0).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn check_column(name: &str, col: &[f64], n: usize) -> Result<()> {
    if col.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: col.len(),
        });
    }
    match col.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::Range {
            row: i + 1,
            column: name.to_string(),
            value: col[i],
        }),
        None => Ok(()),
    }
}

/// Load a probability table for `criterion`.
///
/// The header must contain `p_y` and, for each component `k`, either `p_a{k}` and `p_b{k}`,
/// or the four joint cells `p_y0a0, p_y0a1, p_y1a0, p_y1a1` from which the components are built.
pub fn load_probs(path: impl AsRef<Path>, criterion: &CriterionSpec) -> Result<ProbTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_probs(file, criterion)
}

const JOINT: [&str; 4] = ["p_y0a0", "p_y0a1", "p_y1a0", "p_y1a1"];

pub fn read_probs<R: std::io::Read>(reader: R, criterion: &CriterionSpec) -> Result<ProbTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let pos = |name: &str| header.iter().position(|h| h == name);
    let py = pos("p_y").ok_or_else(|| Error::Schema("missing column `p_y`".into()))?;

    let component_cols: Option<Vec<(usize, usize)>> = (0..criterion.k())
        .map(|k| Some((pos(&format!("p_a{k}"))?, pos(&format!("p_b{k}"))?)))
        .collect();
    let joint_cols: Option<Vec<usize>> = JOINT.iter().map(|c| pos(c)).collect();
    if component_cols.is_none() && joint_cols.is_none() {
        let missing = (0..criterion.k())
            .flat_map(|k| [format!("p_a{k}"), format!("p_b{k}")])
            .find(|c| pos(c).is_none())
            .unwrap_or_default();
        return Err(Error::Schema(format!(
            "missing component column `{missing}` (and no joint p_y?a? columns)"
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(header.len());
        for (j, field) in rec.iter().enumerate() {
            let v = parse_f64(field, row, &header[j])?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    row,
                    column: header[j].clone(),
                    value: v,
                });
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    let p_y: Vec<f64> = rows.iter().map(|r| r[py]).collect();
    match component_cols {
        Some(cols) => {
            let p_a = cols.iter().map(|&(a, _)| rows.iter().map(|r| r[a]).collect()).collect();
            let p_b = cols.iter().map(|&(_, b)| rows.iter().map(|r| r[b]).collect()).collect();
            ProbTable::new(p_y, p_a, p_b)
        }
        None => {
            let jc = joint_cols.expect("checked above");
            let joint: Vec<[f64; 4]> = rows
                .iter()
                .map(|r| [r[jc[0]], r[jc[1]], r[jc[2]], r[jc[3]]])
                .collect();
            ProbTable::from_joint(p_y, &joint, criterion)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dp_table() {
        let c = CriterionSpec::demographic_parity("a");
        let t = read_probs("p_y,p_a0,p_b0\n0.9,0.6,0.4\n0.2,0.1,0.9\n".as_bytes(), &c).unwrap();
        assert_eq!(t.k(), 1);
        assert_eq!(t.len(), 2);
        assert_eq!(t.p_a(0), &[0.6, 0.1]);
    }

    #[test]
    fn joint_file_serves_every_criterion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("joint.csv");
        write_joint_csv(&path, &[[0.1, 0.2, 0.3, 0.4]]).unwrap();
        let dp = load_probs(&path, &CriterionSpec::demographic_parity("a")).unwrap();
        assert_eq!(dp.p_y(), &[0.7]);
        assert_eq!((dp.p_a(0)[0], dp.p_b(0)[0]), (0.1 + 0.3, 0.2 + 0.4));
        let eo = load_probs(&path, &CriterionSpec::equalized_odds("a")).unwrap();
        assert_eq!((eo.p_a(1)[0], eo.p_b(1)[0]), (0.3, 0.4));
    }

    #[test]
    fn out_of_range() {
        let c = CriterionSpec::demographic_parity("a");
        let err = read_probs("p_y,p_a0,p_b0\n1.2,0.6,0.4\n".as_bytes(), &c).unwrap_err();
        assert!(matches!(err, Error::Range { row: 1, .. }), "{err:?}");
    }

    #[test]
    fn missing_component() {
        let c = CriterionSpec::equalized_odds("a");
        let err = read_probs("p_y,p_a0,p_b0\n0.5,0.6,0.4\n".as_bytes(), &c).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("p_a1")), "{err:?}");
    }

    #[test]
    fn joint_cells_map_onto_equalized_odds() {
        let c = CriterionSpec::equalized_odds("a");
        let text = "p_y,p_y0a0,p_y0a1,p_y1a0,p_y1a1\n0.7,0.1,0.2,0.3,0.4\n";
        let t = read_probs(text.as_bytes(), &c).unwrap();
        // component 0 is Y=0: (A=0, A=1) = (0.1, 0.2); component 1 is Y=1: (0.3, 0.4)
        assert_eq!((t.p_a(0)[0], t.p_b(0)[0]), (0.1, 0.2));
        assert_eq!((t.p_a(1)[0], t.p_b(1)[0]), (0.3, 0.4));

        let dp = read_probs(text.as_bytes(), &CriterionSpec::demographic_parity("a")).unwrap();
        assert!((dp.p_a(0)[0] - 0.4).abs() < 1e-15);
        assert!((dp.p_b(0)[0] - 0.6).abs() < 1e-15);
    }
}
