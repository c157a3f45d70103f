//! Conditional and context-specific independences read off a staging.
//!
//! At depth `i`, `X_i` is independent of `X_J` given `X_K` (with `J` and `K`
//! splitting the earlier variables) when the stage label is constant in
//! `x_J` for every fixed `x_K`; if that holds only for some values `x_K`,
//! each such value yields a context-specific statement.

use std::collections::HashMap;

use serde::Serialize;

use crate::partition::Partition;
use crate::tree::EventTree;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IndependenceStatement {
    pub target: usize,
    pub independent_of: Vec<usize>,
    pub given: Vec<usize>,
    /// Level indices of the `given` variables for a context-specific
    /// statement; `None` when the independence holds for every value.
    pub context: Option<Vec<usize>>,
}

impl IndependenceStatement {
    pub fn is_context_specific(&self) -> bool {
        self.context.is_some()
    }

    pub fn describe(&self, tree: &EventTree) -> String {
        let name = |j: usize| tree.variable(j).name.clone();
        let set = |v: &[usize]| {
            if v.len() == 1 {
                name(v[0])
            } else {
                format!("{{{}}}", v.iter().map(|&j| name(j)).collect::<Vec<_>>().join(", "))
            }
        };
        let mut out = format!("{} ⫫ {}", name(self.target), set(&self.independent_of));
        if !self.given.is_empty() {
            let given = match &self.context {
                Some(values) => self
                    .given
                    .iter()
                    .zip(values)
                    .map(|(&j, &v)| format!("{} = {}", name(j), tree.variable(j).levels[v]))
                    .collect::<Vec<_>>()
                    .join(", "),
                None => self.given.iter().map(|&j| name(j)).collect::<Vec<_>>().join(", "),
            };
            out.push_str(" | ");
            out.push_str(&given);
        }
        out
    }
}

/// Every statement implied by the stagings, sorted. `stagings` pairs each
/// modeled depth with its partition over that depth's contexts.
pub fn structural_independence_report(
    tree: &EventTree,
    stagings: &[(usize, Partition)],
) -> Vec<IndependenceStatement> {
    let mut out = Vec::new();
    for (depth, partition) in stagings {
        out.extend(depth_statements(tree, *depth, partition));
    }
    out.sort();
    out
}

fn depth_statements(tree: &EventTree, depth: usize, partition: &Partition) -> Vec<IndependenceStatement> {
    let mut out = Vec::new();
    if depth == 0 {
        return out;
    }
    let contexts = tree.contexts(depth);
    debug_assert_eq!(contexts.len(), partition.n_items());
    for mask in 1u64..(1u64 << depth) {
        let independent_of: Vec<usize> = (0..depth).filter(|j| mask & (1 << j) != 0).collect();
        let given: Vec<usize> = (0..depth).filter(|j| mask & (1 << j) == 0).collect();
        // projection onto the given coordinates -> (first label seen, still constant)
        let mut groups: HashMap<Vec<usize>, (usize, bool)> = HashMap::new();
        for (rank, ctx) in contexts.iter().enumerate() {
            let key: Vec<usize> = given.iter().map(|&j| ctx[j]).collect();
            let label = partition.label(rank);
            groups
                .entry(key)
                .and_modify(|(first, ok)| *ok &= *first == label)
                .or_insert((label, true));
        }
        if groups.values().all(|(_, ok)| *ok) {
            out.push(IndependenceStatement {
                target: depth,
                independent_of,
                given,
                context: None,
            });
        } else {
            let mut holding: Vec<Vec<usize>> = groups
                .into_iter()
                .filter(|(_, (_, ok))| *ok)
                .map(|(k, _)| k)
                .collect();
            holding.sort();
            for key in holding {
                out.push(IndependenceStatement {
                    target: depth,
                    independent_of: independent_of.clone(),
                    given: given.clone(),
                    context: Some(key),
                });
            }
        }
    }
    out
}
