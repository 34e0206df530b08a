//! Dataset acquisition and normalization: IDX binary parsing, credit CSV
//! loading with age-grouped imputation, min-max scaling to [0,1], stratified
//! splitting, and seeded stream ordering.

use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::RngState;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Per-feature min/max recorded from the training split so the same affine
/// map can be reapplied to unseen data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub mins: Vec<f64>,
    pub maxes: Vec<f64>,
}

/// Normalized feature matrix with integer class labels in 1..=s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub scaling: Option<ScalingRecord>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: usize,
        scaling: Option<ScalingRecord>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "Dataset rows vs labels",
                expected: features.len(),
                actual: labels.len(),
            });
        }
        for row in &features {
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("feature value {v} outside [0,1]")));
                }
            }
        }
        for &l in &labels {
            if l < 1 || l > classes {
                return Err(Error::LabelOutOfRange { label: l, s: classes });
            }
        }
        Ok(Dataset {
            features,
            labels,
            classes,
            scaling,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Per-class sample counts, index c-1 for class c.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// New dataset holding the given rows (scaling record carried over).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            scaling: self.scaling.clone(),
        }
    }

    /// Truncate to the first `n` rows (desk-scale subsampling).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            features: self.features[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
            scaling: self.scaling.clone(),
        }
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Load an MNIST-style IDX image/label file pair. Pixels are scaled by
/// 1/255 into [0,1]; labels are shifted from 0-based to 1..=s.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut img = std::io::BufReader::new(std::fs::File::open(images_path)?);
    let magic = img
        .read_u32::<BigEndian>()
        .map_err(|_| format_err(images_path, "truncated header"))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(images_path, format!("bad magic 0x{magic:08x}")));
    }
    let n = img.read_u32::<BigEndian>().map_err(|_| format_err(images_path, "truncated header"))? as usize;
    let rows = img.read_u32::<BigEndian>().map_err(|_| format_err(images_path, "truncated header"))? as usize;
    let cols = img.read_u32::<BigEndian>().map_err(|_| format_err(images_path, "truncated header"))? as usize;
    let m = rows * cols;
    let mut pixels = vec![0u8; n * m];
    img.read_exact(&mut pixels)
        .map_err(|_| format_err(images_path, format!("truncated pixel data, expected {} bytes", n * m)))?;

    let mut lab = std::io::BufReader::new(std::fs::File::open(labels_path)?);
    let magic = lab
        .read_u32::<BigEndian>()
        .map_err(|_| format_err(labels_path, "truncated header"))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(labels_path, format!("bad magic 0x{magic:08x}")));
    }
    let n_lab = lab.read_u32::<BigEndian>().map_err(|_| format_err(labels_path, "truncated header"))? as usize;
    if n_lab != n {
        return Err(format_err(
            labels_path,
            format!("label count {n_lab} does not match image count {n}"),
        ));
    }
    let mut raw_labels = vec![0u8; n];
    lab.read_exact(&mut raw_labels)
        .map_err(|_| format_err(labels_path, "truncated label data"))?;

    let features: Vec<Vec<f64>> = pixels
        .chunks_exact(m)
        .map(|chunk| chunk.iter().map(|&p| f64::from(p) / 255.0).collect())
        .collect();
    let classes = raw_labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(1);
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize + 1).collect();
    Dataset::new(features, labels, classes, None)
}

/// Write a dataset back out as an IDX pair (values quantized to u8 via
/// round(v * 255)). Used for fixtures and cache export.
pub fn write_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let m = dataset.feature_dim();
    let mut img = std::io::BufWriter::new(std::fs::File::create(images_path)?);
    img.write_u32::<BigEndian>(IDX_IMAGES_MAGIC)?;
    img.write_u32::<BigEndian>(dataset.len() as u32)?;
    img.write_u32::<BigEndian>(1)?;
    img.write_u32::<BigEndian>(m as u32)?;
    for row in &dataset.features {
        for &v in row {
            std::io::Write::write_all(&mut img, &[(v * 255.0).round() as u8])?;
        }
    }
    let mut lab = std::io::BufWriter::new(std::fs::File::create(labels_path)?);
    lab.write_u32::<BigEndian>(IDX_LABELS_MAGIC)?;
    lab.write_u32::<BigEndian>(dataset.len() as u32)?;
    for &l in &dataset.labels {
        std::io::Write::write_all(&mut lab, &[(l - 1) as u8])?;
    }
    Ok(())
}

/// A raw CSV cell: parsed number or an explicit missing marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    Missing,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            Cell::Missing => None,
        }
    }
}

/// Parsed CSV with header names and missing markers retained.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("no column named {name:?}")))
    }

    pub fn column_values(&self, idx: usize) -> impl Iterator<Item = Cell> + '_ {
        self.rows.iter().map(move |r| r[idx])
    }
}

/// Load a CSV with a header row. Empty cells and "NA" are missing markers;
/// everything else must parse as a number.
pub fn load_csv(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for (col_idx, field) in record.iter().enumerate() {
            let cell = if field.is_empty() || field.eq_ignore_ascii_case("na") {
                Cell::Missing
            } else {
                match field.parse::<f64>() {
                    Ok(v) => Cell::Value(v),
                    Err(_) => {
                        return Err(Error::BadCell {
                            row: row_idx + 2, // 1-based, after header
                            column: columns.get(col_idx).cloned().unwrap_or_default(),
                            value: field.to_string(),
                        });
                    }
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }
    Ok(RawTable { columns, rows })
}

/// Names of columns that contain at least one missing cell.
pub fn columns_with_missing(table: &RawTable) -> Vec<String> {
    table
        .columns
        .iter()
        .enumerate()
        .filter(|&(i, _)| table.column_values(i).any(|c| c == Cell::Missing))
        .map(|(_, name)| name.clone())
        .collect()
}

/// Replace each missing cell in `target_columns` with the mean of observed
/// values in the same column among rows whose age falls in the same decade
/// bin ([0,10), [10,20), ...). A bin with no observed values falls back to
/// the global column mean.
pub fn impute_age_grouped(table: &mut RawTable, target_columns: &[String], age_column: &str) -> Result<()> {
    let age_idx = table.column_index(age_column)?;
    for (r, row) in table.rows.iter().enumerate() {
        if row[age_idx] == Cell::Missing {
            return Err(Error::BadCell {
                row: r + 2,
                column: age_column.to_string(),
                value: "missing age".to_string(),
            });
        }
    }
    let bins: Vec<usize> = table
        .rows
        .iter()
        .map(|row| (row[age_idx].value().unwrap().max(0.0) / 10.0).floor() as usize)
        .collect();

    for name in target_columns {
        let col = table.column_index(name)?;
        let mut bin_sum: Vec<f64> = Vec::new();
        let mut bin_count: Vec<usize> = Vec::new();
        let mut global_sum = 0.0;
        let mut global_count = 0usize;
        for (row, &bin) in table.rows.iter().zip(&bins) {
            if let Some(v) = row[col].value() {
                if bin >= bin_sum.len() {
                    bin_sum.resize(bin + 1, 0.0);
                    bin_count.resize(bin + 1, 0);
                }
                bin_sum[bin] += v;
                bin_count[bin] += 1;
                global_sum += v;
                global_count += 1;
            }
        }
        if global_count == 0 {
            return Err(Error::AllMissing { column: name.clone() });
        }
        let global_mean = global_sum / global_count as f64;
        for (row, &bin) in table.rows.iter_mut().zip(&bins) {
            if row[col] == Cell::Missing {
                let fill = if bin < bin_count.len() && bin_count[bin] > 0 {
                    bin_sum[bin] / bin_count[bin] as f64
                } else {
                    global_mean
                };
                row[col] = Cell::Value(fill);
            }
        }
    }
    Ok(())
}

/// Split a complete table into a feature matrix and a raw label column.
/// Errors if any cell is still missing.
pub fn table_to_matrix(table: &RawTable, label_column: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let label_idx = table.column_index(label_column)?;
    let mut features = Vec::with_capacity(table.rows.len());
    let mut labels = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        let mut feat = Vec::with_capacity(row.len() - 1);
        for (c, &cell) in row.iter().enumerate() {
            let v = cell.value().ok_or_else(|| Error::BadCell {
                row: r + 2,
                column: table.columns[c].clone(),
                value: "missing after imputation".to_string(),
            })?;
            if c == label_idx {
                labels.push(v);
            } else {
                feat.push(v);
            }
        }
        features.push(feat);
    }
    Ok((features, labels))
}

/// Map a two-valued raw label column to classes {1, 2} with the minority
/// value as class 1 (the positive class by reporting convention). Ties go
/// to the smaller raw value.
pub fn binary_labels_minority_positive(raw: &[f64]) -> Result<Vec<usize>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in raw {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    if distinct.len() != 2 {
        return Err(Error::Config(format!(
            "expected exactly 2 distinct label values, found {}",
            distinct.len()
        )));
    }
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let count0 = raw.iter().filter(|&&v| v == distinct[0]).count();
    let count1 = raw.len() - count0;
    let positive = if count1 < count0 { distinct[1] } else { distinct[0] };
    Ok(raw.iter().map(|&v| if v == positive { 1 } else { 2 }).collect())
}

/// Min-max scale both splits into [0,1] using training statistics only.
/// Constant features map to 0; test values are clamped.
pub fn normalize_minmax(
    train_features: Vec<Vec<f64>>,
    train_labels: Vec<usize>,
    test_features: Vec<Vec<f64>>,
    test_labels: Vec<usize>,
    classes: usize,
) -> Result<(Dataset, Dataset)> {
    if train_features.is_empty() {
        return Err(Error::EmptyInput("normalize_minmax train split"));
    }
    let m = train_features[0].len();
    let mut mins = vec![f64::INFINITY; m];
    let mut maxes = vec![f64::NEG_INFINITY; m];
    for row in &train_features {
        for (j, &v) in row.iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxes[j] = maxes[j].max(v);
        }
    }
    let scale = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|row| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let range = maxes[j] - mins[j];
                        if range == 0.0 {
                            0.0
                        } else {
                            ((v - mins[j]) / range).clamp(0.0, 1.0)
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let record = ScalingRecord {
        mins: mins.clone(),
        maxes: maxes.clone(),
    };
    let train = Dataset::new(scale(train_features), train_labels, classes, Some(record.clone()))?;
    let test = Dataset::new(scale(test_features), test_labels, classes, Some(record))?;
    Ok((train, test))
}

/// Per-class proportional split indices with a seeded within-class shuffle.
/// Each class contributes at least one sample to each side.
pub fn stratified_split_indices(
    labels: &[usize],
    classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::Config(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut rng = RngState::from_seed(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        per_class[l - 1].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut idxs) in per_class.into_iter().enumerate() {
        if idxs.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: c + 1,
                count: idxs.len(),
            });
        }
        rng.shuffle(&mut idxs);
        let n_train = ((idxs.len() as f64 * train_fraction).round() as usize)
            .clamp(1, idxs.len() - 1);
        train.extend_from_slice(&idxs[..n_train]);
        test.extend_from_slice(&idxs[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split of a normalized dataset.
pub fn stratified_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) =
        stratified_split_indices(&dataset.labels, dataset.classes, train_fraction, seed)?;
    Ok((dataset.subset(&train_idx), dataset.subset(&test_idx)))
}

/// Seeded permutation defining the streaming presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamOrder {
    pub permutation: Vec<usize>,
    pub seed: u64,
}

/// Uniform seeded permutation of 0..N-1 (Fisher-Yates).
pub fn permuted_stream(n: usize, seed: u64) -> StreamOrder {
    let mut rng = RngState::from_seed(seed);
    let mut permutation: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut permutation);
    StreamOrder { permutation, seed }
}
