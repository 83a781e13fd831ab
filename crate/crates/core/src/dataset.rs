//! LIBSVM ingestion and the equisized client split.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::rng;
use crate::shuffling::fisher_yates;

/// One sparse feature vector; indices are 0-based and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Binary classification data with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

impl SparseDataset {
    pub fn count(&self) -> usize {
        self.rows.len()
    }

    /// Writes the dataset back out in LIBSVM text form (1-based indices).
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            out.push_str(if label > 0.0 { "+1" } else { "-1" });
            for (&i, &v) in row.indices.iter().zip(&row.values) {
                write!(out, " {}:{}", i + 1, v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LIBSVM text: one `label idx:val idx:val ...` record per line.
///
/// Labels `{0, 1}` are mapped to `{-1, +1}`; `{-1, +1}` pass through. The
/// label `2` is accepted as the positive class of `{1, 2}` files. Blank lines
/// and `#` comments are skipped.
pub fn parse_libsvm(text: &str) -> Result<SparseDataset> {
    let mut raw_labels = Vec::new();
    let mut rows = Vec::new();
    let mut dim = 0usize;
    let mut label_lines = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("non-numeric label {label_tok:?}"),
        })?;

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let i: usize = i.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric index in {tok:?}"),
            })?;
            let v: f64 = v.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric value in {tok:?}"),
            })?;
            if i == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if let Some(&last) = indices.last() {
                if i - 1 <= last {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("index {i} is not strictly increasing"),
                    });
                }
            }
            indices.push(i - 1);
            values.push(v);
            dim = dim.max(i);
        }
        raw_labels.push(label);
        label_lines.push(lineno);
        rows.push(SparseRow { indices, values });
    }

    let labels = normalize_labels(&raw_labels, &label_lines)?;
    Ok(SparseDataset { rows, labels, dim })
}

fn normalize_labels(raw: &[f64], lines: &[usize]) -> Result<Vec<f64>> {
    for (&l, &line) in raw.iter().zip(lines) {
        if ![-1.0, 0.0, 1.0, 2.0].contains(&l) {
            return Err(Error::UnsupportedLabel {
                line,
                label: l.to_string(),
            });
        }
    }
    let has = |v: f64| raw.contains(&v);
    let map: fn(f64) -> f64 = if has(2.0) {
        if has(-1.0) || has(0.0) {
            let line = lines[raw.iter().position(|&l| l == 2.0).unwrap()];
            return Err(Error::UnsupportedLabel {
                line,
                label: "2".into(),
            });
        }
        |l| if l == 2.0 { 1.0 } else { -1.0 }
    } else if has(-1.0) {
        if let Some(p) = raw.iter().position(|&l| l == 0.0) {
            return Err(Error::UnsupportedLabel {
                line: lines[p],
                label: "0".into(),
            });
        }
        |l| l
    } else {
        |l| if l == 0.0 { -1.0 } else { 1.0 }
    };
    Ok(raw.iter().map(|&l| map(l)).collect())
}

/// Raw file bytes, transparently gunzipped when the gzip magic is present.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_libsvm(path: &Path) -> Result<SparseDataset> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::Parse {
            line: 0,
            msg: format!("not UTF-8: {e}"),
        })?;
    parse_libsvm(text)
}

/// Client `m` owns rows `assignment[m]`; every client has exactly `n` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FederatedPartition {
    pub clients: usize,
    pub per_client: usize,
    pub assignment: Vec<Vec<usize>>,
    pub dropped: Vec<usize>,
}

/// Shuffles the row indices with the `partition` stream of `seed` and cuts
/// them into `clients` contiguous blocks of `floor(count / clients)`; the
/// remainder is dropped.
pub fn partition(dataset: &SparseDataset, clients: usize, seed: u64) -> Result<FederatedPartition> {
    partition_count(dataset.count(), clients, seed)
}

pub fn partition_count(count: usize, clients: usize, seed: u64) -> Result<FederatedPartition> {
    if clients == 0 {
        return Err(Error::InvalidArgument("client count must be positive".into()));
    }
    if clients > count {
        return Err(Error::InvalidArgument(format!(
            "{clients} clients for {count} rows"
        )));
    }
    let per_client = count / clients;
    let mut stream = rng::derive_stream(seed, "partition", &[]);
    let order = fisher_yates(count, &mut stream);
    let assignment = order
        .chunks(per_client)
        .take(clients)
        .map(|c| c.to_vec())
        .collect();
    let dropped = order[clients * per_client..].to_vec();
    Ok(FederatedPartition {
        clients,
        per_client,
        assignment,
        dropped,
    })
}

/// One-hot categorical data with planted logistic labels.
///
/// Every row picks one category per group (with group-specific skewed
/// probabilities) and sets that coordinate to 1, so every row has squared
/// norm `groups.len()`. Labels are drawn as `+1` with probability
/// `sigmoid(a . w)` for a hidden Gaussian `w` scaled by `signal`.
pub fn synthetic_categorical(rows: usize, groups: &[usize], signal: f64, seed: u64) -> Result<SparseDataset> {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    if rows == 0 || groups.is_empty() || groups.iter().any(|&g| g < 2) {
        return Err(Error::InvalidArgument("need rows and groups of at least two categories".into()));
    }
    let dim: usize = groups.iter().sum();
    let mut stream = rng::derive_stream(seed, "synthetic_categorical", &[]);
    let w: Vec<f64> = (0..dim).map(|_| {
        let z: f64 = StandardNormal.sample(&mut stream);
        signal * z
    }).collect();
    let weights: Vec<Vec<f64>> = groups
        .iter()
        .map(|&g| {
            let raw: Vec<f64> = (0..g).map(|_| stream.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let mut out_rows = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut indices = Vec::with_capacity(groups.len());
        let mut offset = 0;
        for (g, probs) in groups.iter().zip(&weights) {
            let u: f64 = stream.random();
            let mut acc = 0.0;
            let mut pick = g - 1;
            for (c, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = c;
                    break;
                }
            }
            indices.push(offset + pick);
            offset += g;
        }
        let z: f64 = indices.iter().map(|&i| w[i]).sum();
        let p = 1.0 / (1.0 + (-z).exp());
        labels.push(if stream.random::<f64>() < p { 1.0 } else { -1.0 });
        out_rows.push(SparseRow {
            values: vec![1.0; indices.len()],
            indices,
        });
    }
    Ok(SparseDataset {
        rows: out_rows,
        labels,
        dim,
    })
}

/// Stand-in with the shape of the LIBSVM `phishing` file: 11055 rows and 68
/// binary features from 30 one-hot groups (22 binary, 8 ternary).
pub fn phishing_surrogate(seed: u64) -> SparseDataset {
    let mut groups = vec![2usize; 22];
    groups.extend([3usize; 8]);
    synthetic_categorical(11055, &groups, 0.5, seed).expect("valid surrogate shape")
}
