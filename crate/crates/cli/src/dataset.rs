//! Categorical datasets: CSV ingestion and synthetic generation.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use ldp_longitudinal::{Attribute, DomainSpec};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Users as rows of category indices, plus the exact per-attribute
/// histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    domain: DomainSpec,
    labels: Vec<Vec<String>>,
    /// Row-major `n x d` category indices.
    values: Vec<usize>,
    true_freqs: Vec<Vec<f64>>,
}

impl EncodedDataset {
    /// Builds a dataset from row-major values. `labels[j]` must list the
    /// `k_j` category names of attribute `j`.
    pub fn new(domain: DomainSpec, labels: Vec<Vec<String>>, values: Vec<usize>) -> Result<Self> {
        let d = domain.dimension();
        if d == 0 {
            return Err(HarnessError::Config("dataset has no attributes".into()));
        }
        if !values.len().is_multiple_of(d) || values.is_empty() {
            return Err(HarnessError::Config(format!(
                "{} values do not form rows of {d} attributes",
                values.len()
            )));
        }
        if labels.len() != d
            || labels
                .iter()
                .zip(domain.attributes())
                .any(|(l, a)| l.len() != a.k)
        {
            return Err(HarnessError::Config(
                "labels do not match the domain".into(),
            ));
        }
        let mut counts: Vec<Vec<u64>> = domain.sizes().iter().map(|&k| vec![0; k]).collect();
        for row in values.chunks(d) {
            domain.check_tuple(row)?;
            for (j, &v) in row.iter().enumerate() {
                counts[j][v] += 1;
            }
        }
        let n = (values.len() / d) as f64;
        let true_freqs = counts
            .iter()
            .map(|c| c.iter().map(|&x| x as f64 / n).collect())
            .collect();
        Ok(Self {
            domain,
            labels,
            values,
            true_freqs,
        })
    }

    /// A dataset whose columns have exactly the given category counts.
    /// Each column is shuffled independently with `seed`, so only the
    /// marginals are meaningful.
    pub fn from_marginal_counts(names: &[&str], counts: &[Vec<u64>], seed: u64) -> Result<Self> {
        if names.len() != counts.len() {
            return Err(HarnessError::Config(
                "one name per column is required".into(),
            ));
        }
        let n = counts.first().map_or(0, |c| c.iter().sum::<u64>()) as usize;
        if counts.iter().any(|c| c.iter().sum::<u64>() as usize != n) {
            return Err(HarnessError::Config("columns have different totals".into()));
        }
        let domain = DomainSpec::new(
            names
                .iter()
                .zip(counts)
                .map(|(name, c)| Attribute {
                    name: name.to_string(),
                    k: c.len(),
                })
                .collect(),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<usize>> = counts
            .iter()
            .map(|c| {
                let mut col: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .flat_map(|(v, &m)| std::iter::repeat_n(v, m as usize))
                    .collect();
                col.shuffle(&mut rng);
                col
            })
            .collect();
        let labels = counts
            .iter()
            .map(|c| (0..c.len()).map(|v| v.to_string()).collect())
            .collect();
        Self::new(domain, labels, interleave(&columns, n))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    pub fn true_freqs(&self) -> &[Vec<f64>] {
        &self.true_freqs
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dimension()
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let d = self.dimension();
        &self.values[i * d..(i + 1) * d]
    }
}

fn interleave(columns: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut values = Vec::with_capacity(n * columns.len());
    for i in 0..n {
        values.extend(columns.iter().map(|c| c[i]));
    }
    values
}

/// Reads a CSV file with a header row. Every column is categorical; its
/// categories are numbered in sorted order of their text.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<EncodedDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_dataset(file, path)
}

pub fn parse_dataset<R: Read>(reader: R, path: &Path) -> Result<EncodedDataset> {
    let malformed = |reason: String| HarnessError::MalformedCsv {
        path: path.to_path_buf(),
        reason,
    };
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(malformed("missing header row".into()));
    }
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in csv.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
    }
    if raw[0].is_empty() {
        return Err(malformed("no data rows".into()));
    }
    let n = raw[0].len();

    let mut attributes = Vec::with_capacity(header.len());
    let mut labels = Vec::with_capacity(header.len());
    let mut columns = Vec::with_capacity(header.len());
    for (name, col) in header.iter().zip(&raw) {
        let categories: Vec<String> = col
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if categories.len() < 2 {
            return Err(HarnessError::ConstantColumn(name.clone()));
        }
        columns.push(
            col.iter()
                .map(|v| {
                    categories
                        .binary_search(v)
                        .expect("category collected above")
                })
                .collect::<Vec<_>>(),
        );
        attributes.push(Attribute {
            name: name.clone(),
            k: categories.len(),
        });
        labels.push(categories);
    }
    let domain = DomainSpec::new(attributes).map_err(|e| malformed(e.to_string()))?;
    EncodedDataset::new(domain, labels, interleave(&columns, n))
}

/// `n:k1,k2,...`: `n` users over attributes with the given domain sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub sizes: Vec<usize>,
}

impl FromStr for SyntheticSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            HarnessError::Config(format!(
                "synthetic spec `{s}` is not of the form n:k1,k2,..."
            ))
        };
        let (n, ks) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        let sizes = ks
            .split(',')
            .map(|k| k.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        if n == 0 || sizes.is_empty() {
            return Err(bad());
        }
        Ok(Self { n, sizes })
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ks: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        write!(f, "{}:{}", self.n, ks.join(","))
    }
}

/// Draws one category distribution per attribute (uniform over the simplex),
/// allocates `n` users to categories by largest remainder, and shuffles each
/// column. Deterministic in `seed`.
pub fn synthetic_dataset(spec: &SyntheticSpec, seed: u64) -> Result<EncodedDataset> {
    let domain = DomainSpec::from_sizes(&spec.sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<Vec<u64>> = spec
        .sizes
        .iter()
        .map(|&k| {
            let freqs = Dirichlet::new(&vec![1.0; k])
                .expect("k >= 2 and positive concentration")
                .sample(&mut rng);
            allocate(&freqs, spec.n as u64)
        })
        .collect();
    let names: Vec<String> = domain.attributes().iter().map(|a| a.name.clone()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    EncodedDataset::from_marginal_counts(&names, &counts, rng.next_u64())
}

/// Integer counts summing to `n` that are closest to `n * freqs`.
fn allocate(freqs: &[f64], n: u64) -> Vec<u64> {
    let exact: Vec<f64> = freqs.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let missing = n - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..freqs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(missing as usize) {
        counts[i] += 1;
    }
    counts
}
