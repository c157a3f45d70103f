//! Synthetic staged trees with known stagings and stage probabilities,
//! datasets sampled from them, and their exact treatment effects.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::causal::{CausalQuery, StageFactor, StageProbabilities};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::tree::{EventTree, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbScheme {
    /// Normalized Exp(1) draws, i.e. uniform on the simplex.
    #[default]
    ExpNormalized,
    /// Normalized Uniform(0, 1) draws.
    UnifNormalized,
}

impl std::str::FromStr for ProbScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp-normalized" => Ok(ProbScheme::ExpNormalized),
            "unif-normalized" => Ok(ProbScheme::UnifNormalized),
            other => Err(Error::Parse(format!("unknown probability scheme `{other}`"))),
        }
    }
}

/// Staging and stage probabilities at one depth of a generating tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthStaging {
    pub depth: usize,
    pub partition: Partition,
    pub theta: Vec<Vec<f64>>,
}

/// A fully specified staged tree: one staging per depth `0..=p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingTree {
    pub variables: Vec<Variable>,
    pub first_modeled: usize,
    pub stagings: Vec<DepthStaging>,
}

impl GeneratingTree {
    pub fn new(tree: &EventTree, stagings: Vec<DepthStaging>) -> Result<Self> {
        let out = Self {
            variables: tree.variables().to_vec(),
            first_modeled: tree.first_modeled(),
            stagings,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn tree(&self) -> Result<EventTree> {
        EventTree::new(self.variables.clone(), self.first_modeled)
    }

    pub fn validate(&self) -> Result<()> {
        let tree = self.tree()?;
        if self.stagings.len() != tree.n_variables() {
            return Err(Error::InvalidGenerator(format!(
                "{} stagings for {} variables",
                self.stagings.len(),
                tree.n_variables()
            )));
        }
        for (i, s) in self.stagings.iter().enumerate() {
            if s.depth != i {
                return Err(Error::InvalidGenerator(format!("staging {i} is labeled depth {}", s.depth)));
            }
            if s.partition.n_items() != tree.n_contexts(i) {
                return Err(Error::InvalidGenerator(format!(
                    "depth {i}: partition over {} contexts, tree has {}",
                    s.partition.n_items(),
                    tree.n_contexts(i)
                )));
            }
            if s.theta.len() != s.partition.n_blocks() {
                return Err(Error::InvalidGenerator(format!(
                    "depth {i}: {} probability rows for {} stages",
                    s.theta.len(),
                    s.partition.n_blocks()
                )));
            }
            for row in &s.theta {
                let ok = row.len() == tree.cardinality(i)
                    && row.iter().all(|&v| (0.0..=1.0).contains(&v))
                    && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9;
                if !ok {
                    return Err(Error::InvalidGenerator(format!("depth {i}: {row:?} is not on the simplex")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn prob(&self, depth: usize, context: usize, level: usize) -> f64 {
        let s = &self.stagings[depth];
        s.theta[s.partition.label(context)][level]
    }

    /// The true stagings as stage probabilities, for the causal routines.
    pub fn stage_probabilities(&self) -> StageProbabilities {
        StageProbabilities {
            factors: self
                .stagings
                .iter()
                .map(|s| StageFactor {
                    depth: s.depth,
                    partition: s.partition.clone(),
                    theta: s.theta.clone(),
                })
                .collect(),
        }
    }

    /// Probability of each context at `depth` (the product of edge
    /// probabilities along its path).
    pub fn context_probabilities(&self, depth: usize) -> Vec<f64> {
        let mut probs = vec![1.0];
        for i in 0..depth {
            let k = self.variables[i].cardinality();
            let mut next = Vec::with_capacity(probs.len() * k);
            for (c, &p) in probs.iter().enumerate() {
                for x in 0..k {
                    next.push(p * self.prob(i, c, x));
                }
            }
            probs = next;
        }
        probs
    }
}

fn draw_theta<R: Rng + ?Sized>(k: usize, scheme: ProbScheme, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| match scheme {
            ProbScheme::ExpNormalized => rng.sample::<f64, _>(Exp1),
            ProbScheme::UnifNormalized => rng.random::<f64>(),
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Random generating tree: each variable gets a parent set drawn uniformly
/// among subsets of the earlier variables, contexts agreeing on the parents
/// share a stage, and then random pairs of stages are merged for as long as
/// a coin with success probability `q` keeps landing heads.
pub fn random_staged_tree(
    cardinalities: &[usize],
    first_modeled: usize,
    q: f64,
    scheme: ProbScheme,
    seed: u64,
) -> Result<GeneratingTree> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidGenerator(format!("merge probability must be in [0, 1], got {q}")));
    }
    let variables: Vec<Variable> = cardinalities
        .iter()
        .enumerate()
        .map(|(i, &k)| Variable::new(format!("X{i}"), (0..k).map(|l| l.to_string()).collect()))
        .collect();
    let tree = EventTree::new(variables, first_modeled)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stagings = Vec::with_capacity(cardinalities.len());
    for depth in 0..cardinalities.len() {
        let parents: Vec<usize> = (0..depth).filter(|_| rng.random::<bool>()).collect();
        let labels: Vec<usize> = tree
            .contexts(depth)
            .iter()
            .map(|ctx| parents.iter().fold(0, |acc, &j| acc * tree.cardinality(j) + ctx[j]))
            .collect();
        let mut partition = Partition::from_labels(&labels);
        while partition.n_blocks() > 1 && rng.random::<f64>() < q {
            let blocks: Vec<usize> = (0..partition.n_blocks()).collect();
            let pair: Vec<usize> = blocks.choose_multiple(&mut rng, 2).copied().collect();
            let merged: Vec<usize> = partition
                .labels()
                .iter()
                .map(|&l| if l == pair[1] { pair[0] } else { l })
                .collect();
            partition = Partition::from_labels(&merged);
        }
        let theta = (0..partition.n_blocks())
            .map(|_| draw_theta(tree.cardinality(depth), scheme, &mut rng))
            .collect();
        stagings.push(DepthStaging {
            depth,
            partition,
            theta,
        });
    }
    GeneratingTree::new(&tree, stagings)
}

fn draw_level<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, p) in probs.iter().enumerate() {
        u -= p;
        if u < 0.0 {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `n` rows drawn by ancestral sampling along the ordering, as level indices.
pub fn sample_rows(tree: &GeneratingTree, n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut row = Vec::with_capacity(tree.variables.len());
            let mut rank = 0usize;
            for (depth, s) in tree.stagings.iter().enumerate() {
                let x = draw_level(&s.theta[s.partition.label(rank)], &mut rng);
                row.push(x);
                rank = rank * tree.variables[depth].cardinality() + x;
            }
            row
        })
        .collect()
}

/// Like [`sample_rows`], with level labels and variable names as a dataset.
pub fn sample_dataset(tree: &GeneratingTree, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidGenerator("sample size must be at least 1".into()));
    }
    let rows = sample_rows(tree, n, seed)
        .into_iter()
        .map(|r| {
            r.iter()
                .zip(&tree.variables)
                .map(|(&x, v)| v.levels[x].clone())
                .collect()
        })
        .collect();
    Dataset::new(tree.variables.iter().map(|v| v.name.clone()).collect(), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEffects {
    pub ate: f64,
    pub cate: Vec<f64>,
    /// True probability of each pre-treatment profile.
    pub profile_probabilities: Vec<f64>,
}

/// ATE and CATEs implied by the generating tree, with the true profile
/// distribution as the standardizing marginal.
pub fn exact_effects(tree: &GeneratingTree, query: &CausalQuery) -> Result<TrueEffects> {
    if query.outcome >= tree.variables.len() || query.outcome != query.treatment + 1 {
        return Err(Error::InvalidQuery("outcome must follow the treatment".into()));
    }
    let pz = tree.context_probabilities(query.treatment);
    let cate: Vec<f64> = (0..pz.len())
        .map(|z| {
            let y1 = tree.prob(query.outcome, query.outcome_context(z, query.treated_level), query.positive_level);
            let y0 = tree.prob(query.outcome, query.outcome_context(z, query.control_level()), query.positive_level);
            y1 - y0
        })
        .collect();
    let ate = cate.iter().zip(&pz).map(|(c, p)| c * p).sum();
    Ok(TrueEffects {
        ate,
        cate,
        profile_probabilities: pz,
    })
}

/// A real covariate drawn, row by row, from the Gaussian of the true stage of
/// the row's context at `target_depth`.
pub fn covariate_generator(
    tree: &GeneratingTree,
    rows: &[Vec<usize>],
    target_depth: usize,
    stage_means: &[f64],
    sd: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let staging = tree
        .stagings
        .get(target_depth)
        .ok_or_else(|| Error::InvalidGenerator(format!("no depth {target_depth}")))?;
    if stage_means.len() != staging.partition.n_blocks() {
        return Err(Error::InvalidGenerator(format!(
            "{} means for {} stages",
            stage_means.len(),
            staging.partition.n_blocks()
        )));
    }
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::InvalidGenerator(format!("sd must be nonnegative, got {sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.iter()
        .map(|row| {
            let rank = row[..target_depth]
                .iter()
                .zip(&tree.variables)
                .fold(0, |acc, (&x, v)| acc * v.cardinality() + x);
            let mean = stage_means[staging.partition.label(rank)];
            let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidGenerator(e.to_string()))?;
            Ok(rng.sample(normal))
        })
        .collect()
}
