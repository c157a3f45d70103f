//! Set partitions of the contexts at one depth, stored as canonical label
//! vectors: block 0 holds the lowest-rank context, block 1 the lowest-rank
//! context not in block 0, and so on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
}

/// Relabels blocks in order of first appearance.
pub fn canonicalize(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|&l| match map.iter().find(|(from, _)| *from == l) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len();
                map.push((l, to));
                to
            }
        })
        .collect()
}

impl Partition {
    /// Builds a partition from arbitrary labels; only equality of labels matters.
    pub fn from_labels(labels: &[usize]) -> Self {
        Self {
            labels: canonicalize(labels),
        }
    }

    /// Parses 1-based labels as written in exported files.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::Parse("stage labels are 1-based".into()));
        }
        Ok(Self::from_labels(labels))
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
        }
    }

    pub fn one_block(n: usize) -> Self {
        Self { labels: vec![0; n] }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn label(&self, item: usize) -> usize {
        self.labels[item]
    }

    pub fn same_block(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }

    /// Members of each block, blocks in label order, members ascending.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks()];
        for (item, &l) in self.labels.iter().enumerate() {
            blocks[l].push(item);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_blocks()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn is_canonical(labels: &[usize]) -> bool {
        canonicalize(labels) == labels
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.one_based()
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Partition::from_one_based(&labels)
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Every set partition of `n` items (Bell(n) of them), as restricted growth
/// strings in lexicographic order.
pub fn enumerate_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(Partition { labels: vec![] });
        return out;
    }
    let mut labels = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        out.push(Partition {
            labels: labels.clone(),
        });
        // find the rightmost position that can be incremented
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            if labels[i] <= maxes[i - 1] {
                break;
            }
            i -= 1;
        }
        labels[i] += 1;
        maxes[i] = maxes[i - 1].max(labels[i]);
        for j in i + 1..n {
            labels[j] = 0;
            maxes[j] = maxes[i];
        }
    }
}

/// Rand index: fraction of item pairs on which the two partitions agree.
pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n_items() != b.n_items() {
        return Err(Error::SizeMismatch(a.n_items(), b.n_items()));
    }
    let n = a.n_items();
    if n < 2 {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if a.same_block(i, j) == b.same_block(i, j) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}
