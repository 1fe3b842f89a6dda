//! Sparse labeled datasets.
//!
//! Storage is feature-major (CSC): both coordinate-descent solvers sweep over
//! features and only need the samples where a feature is nonzero. A row-major
//! copy is built once at construction for prediction.
//!
//! The on-disk format is svmlight/libsvm text:
//!
//! ```text
//! 1.5 1:2.0 3:-1.0
//! -0.25 2:4
//! ```
//!
//! Feature indices are 1-based on disk and 0-based in memory.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: feature indices must be strictly increasing ({prev} then {next})")]
    NonIncreasing { line: usize, prev: usize, next: usize },
    #[error("line {line}: feature index {index} exceeds declared dimension {dim}")]
    IndexOutOfRange { line: usize, index: usize, dim: usize },
    #[error("index {index} out of range for {what} of size {size}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Borrowed sparse vector: strictly increasing `indices` with matching `values`
/// in a space of dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleView<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
    pub dim: usize,
}

impl<'a> SampleView<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at feature `j` (0 when absent).
    pub fn get(&self, j: usize) -> f64 {
        match self.indices.binary_search(&j) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }

    pub fn to_owned(&self) -> Sample {
        Sample {
            indices: self.indices.to_vec(),
            values: self.values.to_vec(),
            dim: self.dim,
        }
    }
}

/// Owned sparse vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl Sample {
    /// Builds a sample from `(index, value)` pairs, dropping explicit zeros.
    pub fn new(pairs: impl IntoIterator<Item = (usize, f64)>, dim: usize) -> Result<Self> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (j, v) in pairs {
            if j >= dim {
                return Err(DataError::OutOfRange {
                    what: "sample dimension",
                    index: j,
                    size: dim,
                });
            }
            if let Some(&last) = indices.last() {
                if j <= last {
                    return Err(DataError::Invalid(format!(
                        "sample indices must be strictly increasing ({last} then {j})"
                    )));
                }
            }
            if v != 0.0 {
                indices.push(j);
                values.push(v);
            }
        }
        Ok(Sample {
            indices,
            values,
            dim,
        })
    }

    pub fn from_dense(x: &[f64]) -> Self {
        let (indices, values) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        Sample {
            indices,
            values,
            dim: x.len(),
        }
    }

    pub fn view(&self) -> SampleView<'_> {
        SampleView {
            indices: &self.indices,
            values: &self.values,
            dim: self.dim,
        }
    }
}

/// Immutable sparse design matrix with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n_samples: usize,
    n_features: usize,
    // CSC
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    // CSR copy
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_vals: Vec<f64>,
    targets: Vec<f64>,
}

impl SparseDataset {
    /// Builds a dataset from per-sample rows. Rows must have strictly
    /// increasing indices below `n_features`; zero values are dropped.
    pub fn from_rows(rows: &[Vec<(usize, f64)>], targets: Vec<f64>, n_features: usize) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut row_cols = Vec::new();
        let mut row_vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                if j >= n_features {
                    return Err(DataError::OutOfRange {
                        what: "feature dimension",
                        index: j,
                        size: n_features,
                    });
                }
                if let Some(p) = prev {
                    if j <= p {
                        return Err(DataError::Invalid(format!(
                            "row indices must be strictly increasing ({p} then {j})"
                        )));
                    }
                }
                prev = Some(j);
                if v != 0.0 {
                    row_cols.push(j);
                    row_vals.push(v);
                }
            }
            row_ptr.push(row_cols.len());
        }
        Ok(Self::from_csr(row_ptr, row_cols, row_vals, targets, n_features))
    }

    /// Dense row-major constructor, mostly for tests and small examples.
    pub fn from_dense(x: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let d = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != d) {
            return Err(DataError::Invalid("ragged dense matrix".into()));
        }
        let rows: Vec<Vec<(usize, f64)>> = x
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(&rows, targets, d)
    }

    fn from_csr(
        row_ptr: Vec<usize>,
        row_cols: Vec<usize>,
        row_vals: Vec<f64>,
        targets: Vec<f64>,
        n_features: usize,
    ) -> Self {
        let n_samples = row_ptr.len() - 1;
        let mut counts = vec![0usize; n_features + 1];
        for &j in &row_cols {
            counts[j + 1] += 1;
        }
        for j in 0..n_features {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts;
        let mut fill = col_ptr.clone();
        let mut col_rows = vec![0; row_cols.len()];
        let mut col_vals = vec![0.0; row_cols.len()];
        // Samples are visited in order, so row indices come out sorted per column.
        for i in 0..n_samples {
            for pos in row_ptr[i]..row_ptr[i + 1] {
                let j = row_cols[pos];
                col_rows[fill[j]] = i;
                col_vals[fill[j]] = row_vals[pos];
                fill[j] += 1;
            }
        }
        SparseDataset {
            n_samples,
            n_features,
            col_ptr,
            col_rows,
            col_vals,
            row_ptr,
            row_cols,
            row_vals,
            targets,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nnz(&self) -> usize {
        self.col_vals.len()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Samples `i` with `x_ji != 0` and the matching values, `i` increasing.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.col_rows[range.clone()], &self.col_vals[range])
    }

    pub fn row(&self, i: usize) -> SampleView<'_> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        SampleView {
            indices: &self.row_cols[range.clone()],
            values: &self.row_vals[range],
            dim: self.n_features,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SampleView<'_>> + '_ {
        (0..self.n_samples).map(move |i| self.row(i))
    }

    /// Copy of the dataset restricted to the given samples, in the given order.
    pub fn subset(&self, samples: &[usize]) -> SparseDataset {
        let mut row_ptr = Vec::with_capacity(samples.len() + 1);
        let mut row_cols = Vec::new();
        let mut row_vals = Vec::new();
        row_ptr.push(0);
        for &i in samples {
            let r = self.row(i);
            row_cols.extend_from_slice(r.indices);
            row_vals.extend_from_slice(r.values);
            row_ptr.push(row_cols.len());
        }
        let targets = samples.iter().map(|&i| self.targets[i]).collect();
        Self::from_csr(row_ptr, row_cols, row_vals, targets, self.n_features)
    }

    /// Same samples, with targets replaced.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<SparseDataset> {
        if targets.len() != self.n_samples {
            return Err(DataError::Invalid(format!(
                "expected {} targets, got {}",
                self.n_samples,
                targets.len()
            )));
        }
        Ok(SparseDataset {
            targets,
            ..self.clone()
        })
    }

    /// Re-declares the feature dimension. Fails if a stored index does not fit.
    pub fn with_n_features(&self, n_features: usize) -> Result<SparseDataset> {
        if let Some(&max) = self.row_cols.iter().max() {
            if max >= n_features {
                return Err(DataError::OutOfRange {
                    what: "feature dimension",
                    index: max,
                    size: n_features,
                });
            }
        }
        Ok(Self::from_csr(
            self.row_ptr.clone(),
            self.row_cols.clone(),
            self.row_vals.clone(),
            self.targets.clone(),
            n_features,
        ))
    }

    /// Multiplies every value of feature `j` by `scale[j]`.
    pub fn scale_features(&self, scale: &[f64]) -> Result<SparseDataset> {
        if scale.len() != self.n_features {
            return Err(DataError::Invalid(format!(
                "scale vector has length {}, expected {}",
                scale.len(),
                self.n_features
            )));
        }
        let row_vals = self
            .row_cols
            .iter()
            .zip(&self.row_vals)
            .map(|(&j, &v)| v * scale[j])
            .collect();
        let rows_cols = self.row_cols.clone();
        let mut out = Self::from_csr(
            self.row_ptr.clone(),
            rows_cols,
            row_vals,
            self.targets.clone(),
            self.n_features,
        );
        out.drop_zeros();
        Ok(out)
    }

    fn drop_zeros(&mut self) {
        if self.row_vals.iter().all(|&v| v != 0.0) {
            return;
        }
        let rows: Vec<Vec<(usize, f64)>> = self.rows().map(|r| r.iter().collect()).collect();
        // from_rows drops zeros
        *self = Self::from_rows(&rows, self.targets.clone(), self.n_features)
            .expect("rows of a valid dataset are valid");
    }

    /// Per-feature factors `1 / max_i |x_ji|` (1 for empty features).
    pub fn max_abs_scale(&self) -> Vec<f64> {
        (0..self.n_features)
            .map(|j| {
                let (_, vals) = self.column(j);
                let m = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// Parses svmlight text. `n_features` overrides the inferred dimension
/// (the largest index seen).
pub fn parse_svmlight<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut max_dim = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(target) = tokens.next() else {
            continue;
        };
        let target: f64 = target.parse().map_err(|_| DataError::Parse {
            line: line_no,
            msg: format!("invalid target {target:?}"),
        })?;
        if !target.is_finite() {
            return Err(DataError::Parse {
                line: line_no,
                msg: "target is not finite".into(),
            });
        }
        let mut row = Vec::new();
        let mut prev: Option<usize> = None;
        for tok in tokens {
            if tok.starts_with("qid:") {
                continue;
            }
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: line_no,
                msg: format!("expected <index>:<value>, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("invalid feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(DataError::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("invalid feature value {val:?}"),
            })?;
            if !val.is_finite() {
                return Err(DataError::Parse {
                    line: line_no,
                    msg: format!("feature {idx} is not finite"),
                });
            }
            if let Some(p) = prev {
                if idx <= p {
                    return Err(DataError::NonIncreasing {
                        line: line_no,
                        prev: p,
                        next: idx,
                    });
                }
            }
            if let Some(d) = n_features {
                if idx > d {
                    return Err(DataError::IndexOutOfRange {
                        line: line_no,
                        index: idx,
                        dim: d,
                    });
                }
            }
            prev = Some(idx);
            max_dim = max_dim.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        targets.push(target);
    }
    SparseDataset::from_rows(&rows, targets, n_features.unwrap_or(max_dim))
}

pub fn load_svmlight(path: impl AsRef<Path>, n_features: Option<usize>) -> Result<SparseDataset> {
    let file = File::open(path)?;
    parse_svmlight(BufReader::new(file), n_features)
}

/// Writes svmlight text. Values use the shortest representation that parses
/// back to the same `f64`.
pub fn write_svmlight<W: Write>(ds: &SparseDataset, mut out: W) -> io::Result<()> {
    for (i, row) in ds.rows().enumerate() {
        write!(out, "{}", ds.targets[i])?;
        for (j, v) in row.iter() {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_svmlight(ds: &SparseDataset, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_svmlight(ds, &mut w)?;
    w.flush()
}

/// Prepends `count` constant-one features to every sample. With one dummy
/// feature a homogeneous degree-m kernel becomes inhomogeneous; with `m - 1` of
/// them an ANOVA kernel of degree m sums all degrees from m down to 1.
pub fn augment(ds: &SparseDataset, count: usize) -> SparseDataset {
    if count == 0 {
        return ds.clone();
    }
    let mut row_ptr = Vec::with_capacity(ds.n_samples + 1);
    let mut row_cols = Vec::with_capacity(ds.nnz() + count * ds.n_samples);
    let mut row_vals = Vec::with_capacity(row_cols.capacity());
    row_ptr.push(0);
    for row in ds.rows() {
        row_cols.extend(0..count);
        row_vals.extend(std::iter::repeat_n(1.0, count));
        row_cols.extend(row.indices.iter().map(|j| j + count));
        row_vals.extend_from_slice(row.values);
        row_ptr.push(row_cols.len());
    }
    SparseDataset::from_csr(
        row_ptr,
        row_cols,
        row_vals,
        ds.targets.clone(),
        ds.n_features + count,
    )
}

/// Single-sample version of [`augment`].
pub fn augment_sample(x: SampleView<'_>, count: usize) -> Sample {
    let mut indices: Vec<usize> = (0..count).collect();
    let mut values = vec![1.0; count];
    indices.extend(x.indices.iter().map(|j| j + count));
    values.extend_from_slice(x.values);
    Sample {
        indices,
        values,
        dim: x.dim + count,
    }
}

/// Concatenated one-hot encoding of a (user, item) pair.
pub fn one_hot_pair(user: usize, item: usize, n_users: usize, n_items: usize) -> Result<Sample> {
    if user >= n_users {
        return Err(DataError::OutOfRange {
            what: "users",
            index: user,
            size: n_users,
        });
    }
    if item >= n_items {
        return Err(DataError::OutOfRange {
            what: "items",
            index: item,
            size: n_items,
        });
    }
    Ok(Sample {
        indices: vec![user, n_users + item],
        values: vec![1.0, 1.0],
        dim: n_users + n_items,
    })
}

/// Seeded random split; `train_fraction` of the samples (rounded) go to the
/// first dataset.
pub fn train_test_split(ds: &SparseDataset, train_fraction: f64, seed: u64) -> Result<(SparseDataset, SparseDataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(DataError::Invalid(format!(
            "train fraction {train_fraction} not in [0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..ds.n_samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * ds.n_samples as f64).round() as usize;
    let (train, test) = order.split_at(n_train);
    Ok((ds.subset(train), ds.subset(test)))
}
