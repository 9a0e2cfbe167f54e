//! Labeled validation/training data and its delimited-text encoding.

use std::path::Path;

use crate::error::{Error, Result};

/// Dense row-major feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    names: Vec<String>,
    data: Vec<f64>,
}

impl Features {
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Schema("feature matrix needs at least one column".into()));
        }
        if !data.len().is_multiple_of(names.len()) {
            return Err(Error::Dimension {
                expected: names.len(),
                got: data.len() % names.len(),
            });
        }
        Ok(Self { names, data })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = names.len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(names, data)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }
}

/// Binary labels, binary sensitive attributes and optional features.
///
/// Multi-valued attributes must be pre-encoded as named 0/1 indicator columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    labels: Vec<u8>,
    attributes: Vec<(String, Vec<u8>)>,
    features: Option<Features>,
}

impl LabeledDataset {
    pub fn new(labels: Vec<u8>, attributes: Vec<(String, Vec<u8>)>) -> Result<Self> {
        check_binary("label", &labels)?;
        for (name, column) in &attributes {
            if column.len() != labels.len() {
                return Err(Error::Dimension {
                    expected: labels.len(),
                    got: column.len(),
                });
            }
            check_binary(name, column)?;
        }
        Ok(Self {
            labels,
            attributes,
            features: None,
        })
    }

    pub fn with_features(mut self, features: Features) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: features.rows(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn attribute(&self, name: &str) -> Option<&[u8]> {
        self.attributes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|(n, _)| n.as_str())
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let attributes = self
            .attributes
            .iter()
            .map(|(n, c)| (n.clone(), indices.iter().map(|&i| c[i]).collect()))
            .collect();
        let features = self.features.as_ref().map(|f| {
            let mut data = Vec::with_capacity(indices.len() * f.dim());
            for &i in indices {
                data.extend_from_slice(f.row(i));
            }
            Features {
                names: f.names.clone(),
                data,
            }
        });
        Self {
            labels,
            attributes,
            features,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec![label_column.to_string()];
        header.extend(self.attributes.iter().map(|(n, _)| n.clone()));
        if let Some(f) = &self.features {
            header.extend(f.names.iter().cloned());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.labels[i].to_string()];
            rec.extend(self.attributes.iter().map(|(_, c)| c[i].to_string()));
            if let Some(f) = &self.features {
                rec.extend(f.row(i).iter().map(|v| v.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn check_binary(name: &str, column: &[u8]) -> Result<()> {
    match column.iter().position(|&v| v > 1) {
        Some(row) => Err(Error::Parse {
            row: row + 1,
            column: name.to_string(),
            message: format!("expected 0 or 1, found {}", column[row]),
        }),
        None => Ok(()),
    }
}

/// Which header columns hold the label, the attributes and the features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub label: String,
    pub attributes: Vec<String>,
    pub features: Vec<String>,
}

impl Schema {
    /// Label column `y`, every column named `x<digits>` is a feature, the rest are attributes.
    pub fn infer(header: &[String]) -> Result<Self> {
        Self::infer_with_label(header, "y")
    }

    pub fn infer_with_label(header: &[String], label: &str) -> Result<Self> {
        if !header.iter().any(|h| h == label) {
            return Err(Error::Schema(format!("missing label column `{label}`")));
        }
        let is_feature = |h: &str| {
            h.len() > 1 && h.starts_with('x') && h[1..].chars().all(|c| c.is_ascii_digit())
        };
        let attributes = header
            .iter()
            .filter(|h| *h != label && !is_feature(h))
            .cloned()
            .collect();
        let features = header.iter().filter(|h| is_feature(h)).cloned().collect();
        Ok(Self {
            label: label.to_string(),
            attributes,
            features,
        })
    }
}

/// Parse a comma-delimited file with a header row.
///
/// `schema = None` infers the column roles from the header (see [`Schema::infer`]).
pub fn load_labeled(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled(file, schema)
}

pub fn read_labeled<R: std::io::Read>(reader: R, schema: Option<&Schema>) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let schema = match schema {
        Some(s) => s.clone(),
        None => Schema::infer(&header)?,
    };
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let label_idx = find(&schema.label)?;
    let attr_idx = schema
        .attributes
        .iter()
        .map(|a| find(a))
        .collect::<Result<Vec<_>>>()?;
    let feat_idx = schema
        .features
        .iter()
        .map(|a| find(a))
        .collect::<Result<Vec<_>>>()?;

    let mut labels = Vec::new();
    let mut attrs: Vec<Vec<u8>> = vec![Vec::new(); attr_idx.len()];
    let mut feats = Vec::new();
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
        labels.push(parse_binary(&rec[label_idx], row, &schema.label)?);
        for (k, &j) in attr_idx.iter().enumerate() {
            attrs[k].push(parse_binary(&rec[j], row, &schema.attributes[k])?);
        }
        for (k, &j) in feat_idx.iter().enumerate() {
            feats.push(parse_f64(&rec[j], row, &schema.features[k])?);
        }
    }
    let ds = LabeledDataset::new(labels, schema.attributes.iter().cloned().zip(attrs).collect())?;
    if feat_idx.is_empty() {
        Ok(ds)
    } else {
        ds.with_features(Features::new(schema.features.clone(), feats)?)
    }
}

pub(crate) fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|e| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{field}`: {e}"),
    })
}

fn parse_binary(field: &str, row: usize, column: &str) -> Result<u8> {
    let v = parse_f64(field, row, column)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("expected 0 or 1, found `{field}`"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let ds = read_labeled("y,a\n1,0\n0,1\n1,1\n".as_bytes(), None).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.attribute("a").unwrap(), &[0, 1, 1]);
        assert!(ds.features().is_none());
    }

    #[test]
    fn non_binary_attribute_names_row() {
        let err = read_labeled("y,a\n1,0\n0,2\n".as_bytes(), None).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let schema = Schema {
            label: "y".into(),
            attributes: vec!["gender".into()],
            features: vec![],
        };
        let err = read_labeled("y,a\n1,0\n".as_bytes(), Some(&schema)).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(matches!(
            read_labeled("a,b\n1,0\n".as_bytes(), None).unwrap_err(),
            Error::Schema(_)
        ));
    }

    #[test]
    fn ragged_row() {
        let err = read_labeled("y,a\n1,0\n0\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err:?}");
    }

    #[test]
    fn features_are_inferred() {
        let ds = read_labeled("y,a,x0,x1\n1,0,0.5,-2\n0,1,1e-3,4\n".as_bytes(), None).unwrap();
        let f = ds.features().unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.row(1), &[1e-3, 4.0]);
        let sub = ds.subset(&[1]);
        assert_eq!(sub.labels(), &[0]);
        assert_eq!(sub.features().unwrap().row(0), &[1e-3, 4.0]);
    }
}
