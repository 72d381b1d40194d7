//! Tabular datasets: CSV ingestion and the three two-feature synthetic
//! generators.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_labels: Vec<String>,
    means: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, feature_names: Vec<String>, class_labels: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let m = feature_names.len();
        if m == 0 {
            return Err(Error::InvalidInput("dataset has no features".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: m,
                    found: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {} has a non-finite value", i + 1)));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_labels.len()) {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {} classes",
                class_labels.len()
            )));
        }
        let n = rows.len() as f64;
        let means = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        Ok(Self {
            rows,
            labels,
            feature_names,
            class_labels,
            means,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    /// Per-feature means, the default removal baseline.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Writes the features followed by a `label` column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.class_labels[label].clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Reads a headed CSV. Every column except `label_column` must be numeric;
/// labels are mapped to class indices in order of first appearance.
pub fn read_csv<R: Read>(input: R, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = header.iter().position(|h| h == label_column).ok_or_else(|| {
        Error::InvalidInput(format!("label column '{label_column}' not found in header {header:?}"))
    })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_labels: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row_no = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row_no,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let mut values = Vec::with_capacity(feature_names.len());
        for (j, field) in rec.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            if field.is_empty() {
                return Err(Error::CsvValue {
                    row: row_no,
                    column: header[j].clone(),
                    message: "missing value".into(),
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::CsvValue {
                row: row_no,
                column: header[j].clone(),
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvValue {
                    row: row_no,
                    column: header[j].clone(),
                    message: format!("'{field}' is not finite"),
                });
            }
            values.push(v);
        }
        let label = &rec[label_idx];
        if label.is_empty() {
            return Err(Error::CsvValue {
                row: row_no,
                column: label_column.to_string(),
                message: "missing label".into(),
            });
        }
        let next = class_labels.len();
        let idx = *class_index.entry(label.to_string()).or_insert_with(|| {
            class_labels.push(label.to_string());
            next
        });
        rows.push(values);
        labels.push(idx);
    }
    Dataset::new(rows, labels, feature_names, class_labels)
}

pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f), label_column)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// uniform on `[0, 5]^2`, class 0 inside the unit circle around `(2.5, 2.5)`
    Circle,
    /// Gaussian around `(2.5, 2.5)` with covariance `0.5 I`; classes split at radii 1 and 2
    GaussRings,
    /// four unit-variance Gaussian clusters on the corners of a side-2 square
    Clusters,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::Circle => "circle",
            SyntheticKind::GaussRings => "gauss_rings",
            SyntheticKind::Clusters => "clusters",
        })
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Self::Circle),
            "gauss_rings" => Ok(Self::GaussRings),
            "clusters" => Ok(Self::Clusters),
            other => Err(Error::InvalidInput(format!("unknown dataset '{other}'"))),
        }
    }
}

pub const CENTER: (f64, f64) = (2.5, 2.5);
pub const TRAIN_ROWS: usize = 1000;
pub const TEST_ROWS: usize = 250;
/// Corners of the cluster square, one per class.
pub const CLUSTER_CORNERS: [(f64, f64); 4] = [(1.5, 1.5), (3.5, 1.5), (1.5, 3.5), (3.5, 3.5)];

fn radius(x: f64, y: f64) -> f64 {
    ((x - CENTER.0).powi(2) + (y - CENTER.1).powi(2)).sqrt()
}

pub fn circle_label(x: f64, y: f64) -> usize {
    if radius(x, y) <= 1.0 {
        0
    } else {
        1
    }
}

pub fn rings_label(x: f64, y: f64) -> usize {
    let r = radius(x, y);
    if r <= 1.0 {
        0
    } else if r <= 2.0 {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSplit {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn generate_dataset(kind: SyntheticKind, seed: u64) -> Result<SyntheticSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = TRAIN_ROWS + TEST_ROWS;
    let (rows, labels, classes): (Vec<Vec<f64>>, Vec<usize>, usize) = match kind {
        SyntheticKind::Circle => {
            let rows: Vec<Vec<f64>> = (0..total)
                .map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)])
                .collect();
            let labels = rows.iter().map(|r| circle_label(r[0], r[1])).collect();
            (rows, labels, 2)
        }
        SyntheticKind::GaussRings => {
            let normal = Normal::new(0.0, 0.5f64.sqrt()).expect("valid normal");
            let rows: Vec<Vec<f64>> = (0..total)
                .map(|_| vec![CENTER.0 + normal.sample(&mut rng), CENTER.1 + normal.sample(&mut rng)])
                .collect();
            let labels = rows.iter().map(|r| rings_label(r[0], r[1])).collect();
            (rows, labels, 3)
        }
        SyntheticKind::Clusters => {
            let normal = Normal::new(0.0, 1.0).expect("valid normal");
            let mut labels: Vec<usize> = (0..total).map(|i| i % CLUSTER_CORNERS.len()).collect();
            labels.shuffle(&mut rng);
            let rows = labels
                .iter()
                .map(|&l| {
                    let (cx, cy) = CLUSTER_CORNERS[l];
                    vec![cx + normal.sample(&mut rng), cy + normal.sample(&mut rng)]
                })
                .collect();
            (rows, labels, CLUSTER_CORNERS.len())
        }
    };
    let names = vec!["x".to_string(), "y".to_string()];
    let class_labels: Vec<String> = (0..classes).map(|c| c.to_string()).collect();
    let (train_rows, test_rows) = rows.split_at(TRAIN_ROWS);
    let (train_labels, test_labels) = labels.split_at(TRAIN_ROWS);
    Ok(SyntheticSplit {
        train: Dataset::new(train_rows.to_vec(), train_labels.to_vec(), names.clone(), class_labels.clone())?,
        test: Dataset::new(test_rows.to_vec(), test_labels.to_vec(), names, class_labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_labels() {
        assert_eq!(circle_label(2.5, 2.5), 0);
        assert_eq!(circle_label(0.1, 0.1), 1);
        assert_eq!(rings_label(2.5 + 1.5, 2.5), 1);
        assert_eq!(rings_label(2.5, 2.5), 0);
        assert_eq!(rings_label(0.0, 0.0), 2);
    }

    #[test]
    fn generators_are_deterministic_and_sized() {
        for kind in [SyntheticKind::Circle, SyntheticKind::GaussRings, SyntheticKind::Clusters] {
            let a = generate_dataset(kind, 42).unwrap();
            let b = generate_dataset(kind, 42).unwrap();
            assert_eq!(a.train, b.train);
            assert_eq!(a.test, b.test);
            assert_eq!(a.train.len(), TRAIN_ROWS);
            assert_eq!(a.test.len(), TEST_ROWS);
            assert!(a.train.class_counts().iter().all(|&c| c > 0), "{kind}: {:?}", a.train.class_counts());
        }
    }

    #[test]
    fn labels_follow_geometry() {
        let d = generate_dataset(SyntheticKind::Circle, 1).unwrap();
        for (r, &l) in d.train.rows().iter().zip(d.train.labels()) {
            assert_eq!(l, circle_label(r[0], r[1]));
            assert!(r.iter().all(|v| (0.0..5.0).contains(v)));
        }
        let d = generate_dataset(SyntheticKind::GaussRings, 1).unwrap();
        for (r, &l) in d.train.rows().iter().zip(d.train.labels()) {
            assert_eq!(l, rings_label(r[0], r[1]));
        }
    }

    #[test]
    fn circle_minority_share_is_plausible() {
        // area ratio pi / 25 ~ 0.126
        let d = generate_dataset(SyntheticKind::Circle, 3).unwrap();
        let inside = d.train.class_counts()[0] as f64 / TRAIN_ROWS as f64;
        assert!((inside - 0.126).abs() < 0.04, "{inside}");
    }

    #[test]
    fn clusters_are_balanced() {
        let d = generate_dataset(SyntheticKind::Clusters, 5).unwrap();
        for c in d.train.class_counts() {
            assert!((200..=300).contains(&c));
        }
    }

    #[test]
    fn csv_round_trip() {
        let text = "a,b,label\n1.5,2,x\n-3,0.25,y\n4,5e-1,x\n";
        let d = read_csv(text.as_bytes(), "label").unwrap();
        assert_eq!(d.rows(), &[vec![1.5, 2.0], vec![-3.0, 0.25], vec![4.0, 0.5]]);
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.feature_names(), &["a", "b"]);
        assert!((d.means()[0] - 2.5 / 3.0).abs() < 1e-15);

        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let again = read_csv(buf.as_slice(), "label").unwrap();
        assert_eq!(again.rows(), d.rows());
        assert_eq!(again.labels(), d.labels());
    }

    #[test]
    fn label_column_may_be_anywhere() {
        let d = read_csv("cls,f\nb,1\na,2\nb,3\n".as_bytes(), "cls").unwrap();
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.class_labels(), &["b", "a"]);
    }

    #[test]
    fn csv_errors_name_the_location() {
        match read_csv("a,b,label\n1,2,x\n3,4\n".as_bytes(), "label") {
            Err(Error::RaggedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        match read_csv("a,b,label\n1,,x\n".as_bytes(), "label") {
            Err(Error::CsvValue { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_csv("a,b,label\n1,two,x\n".as_bytes(), "label"),
            Err(Error::CsvValue { .. })
        ));
        assert!(read_csv("a,b\n1,2\n".as_bytes(), "label").is_err());
    }
}
