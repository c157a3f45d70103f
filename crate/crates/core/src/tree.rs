//! Event trees over an ordered set of categorical variables, mixed-radix
//! context indexing, and the per-depth count tables that summarize a dataset.
//!
//! A context at depth `i` is an assignment `(x_0, ..., x_{i-1})` of the first
//! `i` variables; it is the vertex of the event tree whose outgoing edges are
//! the levels of variable `i`. Contexts are indexed by their mixed-radix rank
//! with `x_0` as the most significant digit, so rank order is lexicographic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub levels: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            levels,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }
}

/// The fixed frame of a staged tree: ordered variables, their levels, and the
/// first modeled depth `c` (modeled depths are `c..=p`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTree {
    variables: Vec<Variable>,
    first_modeled: usize,
}

/// One vertex of the event tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Context {
    pub depth: usize,
    pub values: Vec<usize>,
    pub rank: usize,
}

impl EventTree {
    pub fn new(variables: Vec<Variable>, first_modeled: usize) -> Result<Self> {
        if variables.is_empty() || first_modeled >= variables.len() {
            return Err(Error::NonSuffixModeled(format!(
                "first modeled depth {first_modeled} with {} variables",
                variables.len()
            )));
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.levels.len() < 2 {
                return Err(Error::SingleLevel(v.name.clone()));
            }
            for (j, l) in v.levels.iter().enumerate() {
                if v.levels[..j].contains(l) {
                    return Err(Error::DuplicateLevel {
                        variable: v.name.clone(),
                        level: l.clone(),
                    });
                }
            }
        }
        Ok(Self {
            variables,
            first_modeled,
        })
    }

    /// Builds the tree for `ordering` from the columns of `dataset`.
    ///
    /// Levels come from `declared` when a variable is listed there, otherwise
    /// from first appearance in the data. `modeled` must be a contiguous
    /// suffix of `ordering`.
    pub fn build(
        dataset: &Dataset,
        ordering: &[String],
        modeled: &[String],
        declared: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let mut variables = Vec::with_capacity(ordering.len());
        for name in ordering {
            let column = dataset.categorical_column(name)?;
            let levels = match declared.get(name) {
                Some(levels) => levels.clone(),
                None => {
                    let mut levels: Vec<String> = Vec::new();
                    for v in column {
                        if !levels.iter().any(|l| l == v) {
                            levels.push(v.to_string());
                        }
                    }
                    levels
                }
            };
            variables.push(Variable::new(name.clone(), levels));
        }
        let first_modeled = modeled_suffix_start(ordering, modeled)?;
        Self::new(variables, first_modeled)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    /// Index of the last variable.
    pub fn p(&self) -> usize {
        self.variables.len() - 1
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn first_modeled(&self) -> usize {
        self.first_modeled
    }

    pub fn modeled_depths(&self) -> std::ops::RangeInclusive<usize> {
        self.first_modeled..=self.p()
    }

    pub fn is_modeled(&self, depth: usize) -> bool {
        depth >= self.first_modeled && depth <= self.p()
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Number of contexts at `depth`: the product of the first `depth`
    /// cardinalities (1 at the root). `depth` may be `p + 1` (leaves).
    pub fn n_contexts(&self, depth: usize) -> usize {
        self.variables[..depth].iter().map(Variable::cardinality).product()
    }

    pub fn encode_context(&self, values: &[usize]) -> Result<usize> {
        if values.len() > self.variables.len() {
            return Err(Error::DepthMismatch(values.len(), self.variables.len()));
        }
        let mut rank = 0usize;
        for (position, (&digit, var)) in values.iter().zip(&self.variables).enumerate() {
            let cardinality = var.cardinality();
            if digit >= cardinality {
                return Err(Error::DigitOutOfRange {
                    position,
                    digit,
                    cardinality,
                });
            }
            rank = rank * cardinality + digit;
        }
        Ok(rank)
    }

    pub fn decode_context(&self, rank: usize, depth: usize) -> Result<Vec<usize>> {
        if depth > self.variables.len() {
            return Err(Error::DepthMismatch(depth, self.variables.len()));
        }
        let contexts = self.n_contexts(depth);
        if rank >= contexts {
            return Err(Error::RankOutOfRange {
                rank,
                depth,
                contexts,
            });
        }
        let mut values = vec![0; depth];
        let mut rest = rank;
        for j in (0..depth).rev() {
            let card = self.cardinality(j);
            values[j] = rest % card;
            rest /= card;
        }
        Ok(values)
    }

    pub fn context(&self, rank: usize, depth: usize) -> Result<Context> {
        let values = self.decode_context(rank, depth)?;
        Ok(Context {
            depth,
            values,
            rank,
        })
    }

    /// All contexts at `depth`, in rank order.
    pub fn contexts(&self, depth: usize) -> Vec<Vec<usize>> {
        (0..self.n_contexts(depth))
            .map(|r| self.decode_context(r, depth).expect("rank in range"))
            .collect()
    }

    /// Human-readable label for a context, e.g. `N=n, B=y`.
    pub fn context_label(&self, values: &[usize]) -> String {
        if values.is_empty() {
            return "(root)".to_string();
        }
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| format!("{}={}", self.variables[j].name, self.variables[j].levels[v]))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Translates the tree's columns of `dataset` into level indices, one
    /// vector per row in variable order.
    pub fn encode_rows(&self, dataset: &Dataset) -> Result<Vec<Vec<usize>>> {
        let columns: Vec<usize> = self
            .variables
            .iter()
            .map(|v| dataset.column_index(&v.name))
            .collect::<Result<_>>()?;
        dataset
            .rows()
            .iter()
            .enumerate()
            .map(|(r, row)| {
                columns
                    .iter()
                    .zip(&self.variables)
                    .map(|(&c, var)| {
                        var.level_index(&row[c]).ok_or_else(|| Error::UndeclaredLevel {
                            row: r + 1,
                            variable: var.name.clone(),
                            value: row[c].clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Rank of each row's depth-`depth` context.
    pub fn row_contexts(&self, rows: &[Vec<usize>], depth: usize) -> Result<Vec<usize>> {
        rows.iter()
            .map(|row| self.encode_context(&row[..depth]))
            .collect()
    }
}

fn modeled_suffix_start(ordering: &[String], modeled: &[String]) -> Result<usize> {
    if modeled.is_empty() {
        return Err(Error::NonSuffixModeled("no modeled variables".into()));
    }
    let mut positions = Vec::with_capacity(modeled.len());
    for m in modeled {
        let pos = ordering
            .iter()
            .position(|o| o == m)
            .ok_or_else(|| Error::UnknownColumn(m.clone()))?;
        if positions.contains(&pos) {
            return Err(Error::DuplicateVariable(m.clone()));
        }
        positions.push(pos);
    }
    positions.sort_unstable();
    let start = positions[0];
    let expected: Vec<usize> = (start..ordering.len()).collect();
    if positions != expected {
        return Err(Error::NonSuffixModeled(modeled.join(", ")));
    }
    Ok(start)
}

/// Count vectors `N_x` over the levels of variable `depth`, one per context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTable {
    depth: usize,
    cardinality: usize,
    counts: Vec<u64>,
    n_total: u64,
}

impl ContextTable {
    pub fn from_counts(depth: usize, cardinality: usize, counts: Vec<Vec<u64>>) -> Self {
        let n_total = counts.iter().flatten().sum();
        Self {
            depth,
            cardinality,
            counts: counts.into_iter().flatten().collect(),
            n_total,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn n_contexts(&self) -> usize {
        self.counts.len() / self.cardinality
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn counts(&self, rank: usize) -> &[u64] {
        &self.counts[rank * self.cardinality..(rank + 1) * self.cardinality]
    }

    pub fn context_total(&self, rank: usize) -> u64 {
        self.counts(rank).iter().sum()
    }

    /// Aggregated count vector of a set of contexts.
    pub fn aggregate(&self, members: impl IntoIterator<Item = usize>) -> Vec<u64> {
        let mut out = vec![0u64; self.cardinality];
        for m in members {
            for (o, c) in out.iter_mut().zip(self.counts(m)) {
                *o += c;
            }
        }
        out
    }
}

/// Count table for a single depth.
pub fn count_depth(tree: &EventTree, rows: &[Vec<usize>], depth: usize) -> Result<ContextTable> {
    let card = tree.cardinality(depth);
    let mut counts = vec![0u64; tree.n_contexts(depth) * card];
    for row in rows {
        if row.len() != tree.n_variables() {
            return Err(Error::SizeMismatch(row.len(), tree.n_variables()));
        }
        let level = row[depth];
        if level >= card {
            return Err(Error::DigitOutOfRange {
                position: depth,
                digit: level,
                cardinality: card,
            });
        }
        let rank = tree.encode_context(&row[..depth])?;
        counts[rank * card + level] += 1;
    }
    Ok(ContextTable {
        depth,
        cardinality: card,
        counts,
        n_total: rows.len() as u64,
    })
}

/// One count table per modeled depth, in depth order.
pub fn count_contexts(tree: &EventTree, rows: &[Vec<usize>]) -> Result<Vec<ContextTable>> {
    tree.modeled_depths()
        .map(|depth| count_depth(tree, rows, depth))
        .collect()
}
