//! Collapsed MCMC over the stage partition of each modeled depth.
//!
//! One iteration is a Polya-urn Gibbs sweep over the contexts (in rank order)
//! followed by one split-merge Metropolis-Hastings proposal. Stage
//! probabilities are integrated out, so the state is just the partition.
//! Depths are independent a posteriori and run as separate chains, each
//! seeded from the master seed and its depth index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{ln_gamma, log_add_ratio, log_marginal_stage, log_merge_gain, DirichletMass};
use crate::partition::{enumerate_partitions, Partition};
use crate::priors::{
    log_eppf_with_penalty, normalize_log_weights, pair_penalty, CovariateDissimilarity, DistanceMatrix,
    PriorSpec, SymmetricMatrix, MAX_ENUMERATION_CONTEXTS,
};
use crate::tree::{ContextTable, EventTree};

/// Everything the chain of one depth needs: per-context counts and the
/// precomputed pair penalty `xi * d + sum_z lambda_z * delta_z`.
#[derive(Debug, Clone)]
pub struct DepthModel {
    depth: usize,
    counts: Vec<Vec<u64>>,
    a: DirichletMass,
    log_kappa: f64,
    penalty: SymmetricMatrix,
}

/// Unnormalized log weights of the full conditional of one context.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalWeights {
    /// `(label in the given state, log weight)` for every block that still has
    /// members once the context is taken out.
    pub existing: Vec<(usize, f64)>,
    pub new_block: f64,
}

impl ConditionalWeights {
    /// Normalized probabilities, existing blocks first, new block last.
    pub fn probabilities(&self) -> Vec<f64> {
        let logs: Vec<f64> = self
            .existing
            .iter()
            .map(|(_, w)| *w)
            .chain(std::iter::once(self.new_block))
            .collect();
        normalize_log_weights(&logs)
    }
}

impl DepthModel {
    pub fn new(
        table: &ContextTable,
        spec: &PriorSpec,
        distances: &DistanceMatrix,
        covariates: Option<&CovariateDissimilarity>,
    ) -> Result<Self> {
        spec.validate()?;
        if distances.n() != table.n_contexts() {
            return Err(Error::SizeMismatch(distances.n(), table.n_contexts()));
        }
        if let Some(cov) = covariates {
            if let Some(m) = cov.matrices.iter().find(|m| m.n() != table.n_contexts()) {
                return Err(Error::SizeMismatch(m.n(), table.n_contexts()));
            }
            if spec.lambda.len() > cov.n_covariates() {
                return Err(Error::InvalidPrior(format!(
                    "{} lambda weights for {} covariates",
                    spec.lambda.len(),
                    cov.n_covariates()
                )));
            }
        }
        Ok(Self {
            depth: table.depth(),
            counts: (0..table.n_contexts()).map(|r| table.counts(r).to_vec()).collect(),
            a: spec.a,
            log_kappa: spec.kappa.ln(),
            penalty: pair_penalty(spec, distances, covariates),
        })
    }

    /// One model per modeled depth of `tree`. `covariates`, when given, holds
    /// one entry per modeled depth in order.
    pub fn for_tree(
        tree: &EventTree,
        tables: &[ContextTable],
        spec: &PriorSpec,
        covariates: Option<&[CovariateDissimilarity]>,
    ) -> Result<Vec<Self>> {
        tables
            .iter()
            .enumerate()
            .map(|(i, table)| {
                let distances = DistanceMatrix::for_depth(tree, table.depth());
                let cov = covariates.map(|c| &c[i]);
                Self::new(table, spec, &distances, cov)
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_contexts(&self) -> usize {
        self.counts.len()
    }

    pub fn context_counts(&self, rank: usize) -> &[u64] {
        &self.counts[rank]
    }

    pub fn penalty(&self) -> &SymmetricMatrix {
        &self.penalty
    }

    pub fn log_prior(&self, partition: &Partition) -> f64 {
        log_eppf_with_penalty(partition, self.log_kappa, &self.penalty)
    }

    pub fn log_likelihood(&self, partition: &Partition) -> f64 {
        partition
            .blocks()
            .iter()
            .map(|b| log_marginal_stage(&self.aggregate(b), self.a))
            .sum()
    }

    /// Unnormalized log posterior of a partition of this depth.
    pub fn log_posterior(&self, partition: &Partition) -> f64 {
        self.log_prior(partition) + self.log_likelihood(partition)
    }

    /// Posterior probability of every partition, by enumeration.
    pub fn exact_posterior(&self) -> Result<Vec<(Partition, f64)>> {
        let n = self.n_contexts();
        if n > MAX_ENUMERATION_CONTEXTS {
            return Err(Error::TooManyContexts(n, MAX_ENUMERATION_CONTEXTS));
        }
        let parts = enumerate_partitions(n);
        let logs: Vec<f64> = parts.iter().map(|p| self.log_posterior(p)).collect();
        Ok(parts.into_iter().zip(normalize_log_weights(&logs)).collect())
    }

    fn aggregate(&self, members: &[usize]) -> Vec<u64> {
        let mut out = vec![0; self.counts.first().map_or(0, Vec::len)];
        for &m in members {
            for (o, c) in out.iter_mut().zip(&self.counts[m]) {
                *o += c;
            }
        }
        out
    }

    fn existing_weight(&self, ctx: usize, size: usize, stage: &[u64], penalty_sum: f64) -> f64 {
        (size as f64).ln() - 2.0 * penalty_sum + log_add_ratio(stage, &self.counts[ctx], self.a)
    }

    fn new_block_weight(&self, ctx: usize) -> f64 {
        self.log_kappa + log_marginal_stage(&self.counts[ctx], self.a)
    }

    /// Full conditional of context `ctx` given the labels of all others in
    /// `state`. Existing block `k` gets
    /// `log n_k - 2 sum_{j in S_k} P(ctx, j) + log m(N_k + N_ctx) - log m(N_k)`
    /// and a new block gets `log kappa + log m(N_ctx)`.
    pub fn full_conditional_weights(&self, ctx: usize, state: &Partition) -> ConditionalWeights {
        let mut existing = Vec::new();
        for (label, block) in state.blocks().into_iter().enumerate() {
            let others: Vec<usize> = block.into_iter().filter(|&j| j != ctx).collect();
            if others.is_empty() {
                continue;
            }
            let pen: f64 = others.iter().map(|&j| self.penalty.get(ctx, j)).sum();
            let w = self.existing_weight(ctx, others.len(), &self.aggregate(&others), pen);
            existing.push((label, w));
        }
        ConditionalWeights {
            existing,
            new_block: self.new_block_weight(ctx),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    #[default]
    Singletons,
    OneBlock,
}

impl InitPolicy {
    fn partition(self, n: usize) -> Partition {
        match self {
            InitPolicy::Singletons => Partition::singletons(n),
            InitPolicy::OneBlock => Partition::one_block(n),
        }
    }
}

/// Which move types make up one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveSet {
    pub gibbs: bool,
    pub split_merge: bool,
}

impl Default for MoveSet {
    fn default() -> Self {
        Self {
            gibbs: true,
            split_merge: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: InitPolicy,
    pub moves: MoveSet,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 11_000,
            burn_in: 1_000,
            thin: 5,
            seed: 1,
            init: InitPolicy::default(),
            moves: MoveSet::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidChain("thinning must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidChain(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.retained() == 0 {
            return Err(Error::InvalidChain("no samples would be retained".into()));
        }
        if !self.moves.gibbs && !self.moves.split_merge {
            return Err(Error::InvalidChain("at least one move type must be enabled".into()));
        }
        Ok(())
    }

    /// Number of retained samples, `floor((iterations - burn_in) / thin)`.
    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin
    }

    fn keeps(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in).is_multiple_of(self.thin)
    }
}

/// The random stream for the chain at `depth`.
pub fn depth_rng(seed: u64, depth: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(depth as u64);
    rng
}

/// Mutable chain state with per-block sizes and aggregated counts.
#[derive(Debug, Clone)]
pub struct ChainState<'m> {
    model: &'m DepthModel,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    counts: Vec<Vec<u64>>,
}

impl<'m> ChainState<'m> {
    pub fn new(model: &'m DepthModel, start: &Partition) -> Result<Self> {
        if start.n_items() != model.n_contexts() {
            return Err(Error::SizeMismatch(start.n_items(), model.n_contexts()));
        }
        let mut state = Self {
            model,
            labels: start.labels().to_vec(),
            sizes: Vec::new(),
            counts: Vec::new(),
        };
        state.rebuild();
        Ok(state)
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.labels)
    }

    pub fn n_blocks(&self) -> usize {
        self.sizes.len()
    }

    fn rebuild(&mut self) {
        self.labels = crate::partition::canonicalize(&self.labels);
        let m = self.labels.iter().max().map_or(0, |l| l + 1);
        let k = self.model.counts.first().map_or(0, Vec::len);
        self.sizes = vec![0; m];
        self.counts = vec![vec![0; k]; m];
        for (ctx, &l) in self.labels.iter().enumerate() {
            self.sizes[l] += 1;
            add_into(&mut self.counts[l], &self.model.counts[ctx]);
        }
    }

    fn detach(&mut self, ctx: usize) {
        let b = self.labels[ctx];
        self.sizes[b] -= 1;
        sub_from(&mut self.counts[b], &self.model.counts[ctx]);
        if self.sizes[b] == 0 {
            self.drop_block(b);
        }
        self.labels[ctx] = usize::MAX;
    }

    fn attach(&mut self, ctx: usize, b: usize) {
        if b == self.sizes.len() {
            self.sizes.push(0);
            self.counts.push(vec![0; self.model.counts[ctx].len()]);
        }
        self.labels[ctx] = b;
        self.sizes[b] += 1;
        add_into(&mut self.counts[b], &self.model.counts[ctx]);
    }

    /// Removes an empty block by moving the last block into its slot.
    fn drop_block(&mut self, b: usize) {
        let last = self.sizes.len() - 1;
        self.sizes.swap_remove(b);
        self.counts.swap_remove(b);
        if b != last {
            for l in self.labels.iter_mut().filter(|l| **l == last) {
                *l = b;
            }
        }
    }

    /// Resamples every context's label in rank order, then relabels
    /// canonically.
    pub fn gibbs_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let model = self.model;
        let n = model.n_contexts();
        let mut pen = Vec::new();
        let mut logs = Vec::new();
        for ctx in 0..n {
            self.detach(ctx);
            let m = self.sizes.len();
            pen.clear();
            pen.resize(m, 0.0);
            for (j, &l) in self.labels.iter().enumerate() {
                if j != ctx {
                    pen[l] += model.penalty.get(ctx, j);
                }
            }
            logs.clear();
            for ((&size, counts), &p) in self.sizes.iter().zip(&self.counts).zip(&pen) {
                logs.push(model.existing_weight(ctx, size, counts, p));
            }
            logs.push(model.new_block_weight(ctx));
            let b = sample_log_weights(&logs, rng)?;
            self.attach(ctx, b);
        }
        self.rebuild();
        Ok(())
    }

    /// One split-merge proposal; returns whether it was accepted.
    pub fn split_merge_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        let model = self.model;
        let n = model.n_contexts();
        if n < 2 {
            return Ok(false);
        }
        let first = rng.random_range(0..n);
        let mut second = rng.random_range(0..n - 1);
        if second >= first {
            second += 1;
        }
        let (b1, b2) = (self.labels[first], self.labels[second]);
        if b1 != b2 {
            let s1: Vec<usize> = self.members(b1);
            let s2: Vec<usize> = self.members(b2);
            let delta = self.merge_log_ratio(&s1, &self.counts[b1], &s2, &self.counts[b2]);
            if !delta.is_finite() && delta != f64::NEG_INFINITY {
                return Err(Error::Numeric(format!("merge acceptance ratio {delta}")));
            }
            let accept = delta >= 0.0 || rng.random::<f64>().ln() < delta;
            if accept {
                for ctx in s2 {
                    self.labels[ctx] = b1;
                }
                self.rebuild();
            }
            return Ok(accept);
        }
        // split: `first` stays, `second` founds the new block
        let block = self.members(b1);
        let mut keep = vec![first];
        let mut moved = vec![second];
        for &ctx in &block {
            if ctx == first || ctx == second {
                continue;
            }
            if rng.random::<bool>() {
                keep.push(ctx);
            } else {
                moved.push(ctx);
            }
        }
        let c1 = model.aggregate(&keep);
        let c2 = model.aggregate(&moved);
        let delta = -self.merge_log_ratio(&keep, &c1, &moved, &c2);
        if !delta.is_finite() && delta != f64::NEG_INFINITY {
            return Err(Error::Numeric(format!("split acceptance ratio {delta}")));
        }
        let accept = delta >= 0.0 || rng.random::<f64>().ln() < delta;
        if accept {
            let fresh = self.sizes.len();
            for ctx in moved {
                self.labels[ctx] = fresh;
            }
            self.rebuild();
        }
        Ok(accept)
    }

    fn members(&self, b: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&c| self.labels[c] == b).collect()
    }

    /// Log Metropolis-Hastings ratio for merging two blocks (its negation is
    /// the ratio for the mirror split).
    fn merge_log_ratio(&self, s1: &[usize], c1: &[u64], s2: &[usize], c2: &[u64]) -> f64 {
        let model = self.model;
        let (n1, n2) = (s1.len() as f64, s2.len() as f64);
        let mut cross = 0.0;
        for &j in s1 {
            for &l in s2 {
                cross += model.penalty.get(j, l);
            }
        }
        let lik = log_merge_gain(c1, c2, model.a);
        let prior = -model.log_kappa + ln_gamma(n1 + n2) - ln_gamma(n1) - ln_gamma(n2) - 2.0 * cross;
        let proposal = (n1 + n2 - 2.0) * 0.5f64.ln();
        lik + prior + proposal
    }
}

fn add_into(acc: &mut [u64], x: &[u64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn sub_from(acc: &mut [u64], x: &[u64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a -= b;
    }
}

/// Draws an index with probability proportional to `exp(logs[i])`.
pub fn sample_log_weights<R: Rng + ?Sized>(logs: &[f64], rng: &mut R) -> Result<usize> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric(format!("full conditional has no finite weight: {logs:?}")));
    }
    let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, l) in logs.iter().enumerate() {
        u -= (l - max).exp();
        if u < 0.0 {
            return Ok(i);
        }
    }
    // rounding left a sliver of mass: take the last positive-weight entry
    Ok(logs.iter().rposition(|l| l.is_finite()).expect("some finite weight"))
}

/// Retained partitions of one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSamples {
    pub depth: usize,
    pub n_contexts: usize,
    pub samples: Vec<Partition>,
    pub split_merge_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSampleSet {
    pub depths: Vec<DepthSamples>,
    pub provenance: Provenance,
}

impl PosteriorSampleSet {
    pub fn depth(&self, depth: usize) -> Option<&DepthSamples> {
        self.depths.iter().find(|d| d.depth == depth)
    }

    pub fn n_samples(&self) -> usize {
        self.depths.first().map_or(0, |d| d.samples.len())
    }

    /// The sampled partitions of every depth for retained draw `r`.
    pub fn draw(&self, r: usize) -> Vec<(usize, &Partition)> {
        self.depths.iter().map(|d| (d.depth, &d.samples[r])).collect()
    }
}

/// Runs the chain of a single depth.
pub fn run_depth_chain(model: &DepthModel, config: &ChainConfig) -> Result<DepthSamples> {
    config.validate()?;
    let mut rng = depth_rng(config.seed, model.depth());
    let n = model.n_contexts();
    let mut state = ChainState::new(model, &config.init.partition(n))?;
    let mut samples = Vec::with_capacity(config.retained());
    let (mut proposed, mut accepted) = (0usize, 0usize);
    for t in 1..=config.iterations {
        if config.moves.gibbs {
            state.gibbs_sweep(&mut rng)?;
        }
        if config.moves.split_merge && n >= 2 {
            proposed += 1;
            accepted += state.split_merge_step(&mut rng)? as usize;
        }
        if config.keeps(t) {
            samples.push(state.partition());
        }
    }
    Ok(DepthSamples {
        depth: model.depth(),
        n_contexts: n,
        samples,
        split_merge_acceptance: if proposed == 0 {
            0.0
        } else {
            accepted as f64 / proposed as f64
        },
    })
}

/// Runs one independent chain per depth model, concurrently. Output does not
/// depend on scheduling.
pub fn run_chain(models: &[DepthModel], config: &ChainConfig) -> Result<PosteriorSampleSet> {
    config.validate()?;
    let depths = models
        .par_iter()
        .map(|m| run_depth_chain(m, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSampleSet {
        depths,
        provenance: Provenance {
            seed: config.seed,
            config_hash: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Variable;
    use std::collections::HashMap;

    fn binary_tree(n: usize) -> EventTree {
        EventTree::new(
            (0..n).map(|i| Variable::new(format!("X{i}"), vec!["0".into(), "1".into()])).collect(),
            n - 1,
        )
        .unwrap()
    }

    fn model(counts: Vec<Vec<u64>>, spec: &PriorSpec) -> DepthModel {
        let depth = (counts.len() as f64).log2() as usize;
        let tree = binary_tree(depth + 1);
        let table = ContextTable::from_counts(depth, 2, counts);
        DepthModel::new(&table, spec, &DistanceMatrix::for_depth(&tree, depth), None).unwrap()
    }

    fn frequencies(samples: &[Partition]) -> HashMap<Partition, f64> {
        let mut out = HashMap::new();
        for s in samples {
            *out.entry(s.clone()).or_insert(0.0) += 1.0 / samples.len() as f64;
        }
        out
    }

    fn total_variation(samples: &[Partition], exact: &[(Partition, f64)]) -> f64 {
        let freq = frequencies(samples);
        0.5 * exact
            .iter()
            .map(|(p, q)| (freq.get(p).copied().unwrap_or(0.0) - q).abs())
            .sum::<f64>()
    }

    #[test]
    fn weights_are_ratios_of_full_state_posteriors() {
        let spec = PriorSpec {
            kappa: 0.7,
            xi: 0.4,
            ..PriorSpec::default()
        };
        let m = model(vec![vec![3, 1], vec![0, 0], vec![2, 5], vec![4, 4]], &spec);
        for state in enumerate_partitions(4) {
            for ctx in 0..4 {
                let w = m.full_conditional_weights(ctx, &state);
                let mut labels = state.labels().to_vec();
                let mut states = Vec::new();
                for &(label, lw) in &w.existing {
                    labels[ctx] = label;
                    states.push((Partition::from_labels(&labels), lw));
                }
                labels[ctx] = 99;
                states.push((Partition::from_labels(&labels), w.new_block));
                let (p0, w0) = &states[0];
                for (p, lw) in &states[1..] {
                    let direct = m.log_posterior(p) - m.log_posterior(p0);
                    assert!((lw - w0 - direct).abs() < 1e-9, "{state} ctx {ctx}");
                }
            }
        }
    }

    #[test]
    fn dp_weights_without_penalties() {
        // textbook collapsed Gibbs for a DP mixture of multinomials:
        // P(k) ∝ n_k * p(N_x | N_k), P(new) ∝ kappa * p(N_x), with predictive
        // probabilities built one observation at a time
        fn predictive(prior: &[u64], add: &[u64], a: f64) -> f64 {
            let k = prior.len() as f64;
            let mut seen = prior.to_vec();
            let mut n: u64 = seen.iter().sum();
            let mut lp = 0.0;
            for (level, &c) in add.iter().enumerate() {
                for _ in 0..c {
                    lp += ((a / k + seen[level] as f64) / (a + n as f64)).ln();
                    seen[level] += 1;
                    n += 1;
                }
            }
            lp
        }
        let spec = PriorSpec {
            kappa: 2.0,
            xi: 0.0,
            ..PriorSpec::default()
        };
        let counts = vec![vec![5, 0], vec![1, 3], vec![4, 1], vec![0, 2]];
        let m = model(counts.clone(), &spec);
        let state = Partition::from_labels(&[0, 1, 0, 1]);
        let w = m.full_conditional_weights(2, &state);
        let oracle_existing = [
            (1.0f64).ln() + predictive(&counts[0], &counts[2], 1.0),
            (2.0f64).ln() + predictive(&[1, 5], &counts[2], 1.0),
        ];
        let oracle_new = 2.0f64.ln() + predictive(&[0, 0], &counts[2], 1.0);
        let offset = w.new_block - oracle_new;
        for ((_, lw), o) in w.existing.iter().zip(oracle_existing) {
            assert!((lw - o - offset).abs() < 1e-10);
        }
        assert!(offset.abs() < 1e-10);
    }

    #[test]
    fn empty_context_weights_are_prior_only() {
        let spec = PriorSpec {
            kappa: 0.5,
            xi: 0.0,
            ..PriorSpec::default()
        };
        let m = model(vec![vec![3, 1], vec![0, 0], vec![2, 5], vec![4, 4]], &spec);
        let w = m.full_conditional_weights(1, &Partition::from_labels(&[0, 1, 0, 2]));
        let logs: Vec<f64> = w.existing.iter().map(|(_, l)| *l).collect();
        assert!((logs[0] - 2.0f64.ln()).abs() < 1e-12);
        assert!(logs[1].abs() < 1e-12);
        assert!((w.new_block - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn merge_of_empty_singletons_is_neutral() {
        let spec = PriorSpec {
            kappa: 1.0,
            xi: 0.0,
            ..PriorSpec::default()
        };
        let m = model(vec![vec![0, 0], vec![0, 0]], &spec);
        let state = ChainState::new(&m, &Partition::singletons(2)).unwrap();
        let r = state.merge_log_ratio(&[0], &[0, 0], &[1], &[0, 0]);
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn single_context_stays_trivial() {
        let tree = binary_tree(1);
        let table = ContextTable::from_counts(0, 2, vec![vec![4, 7]]);
        let m = DepthModel::new(&table, &PriorSpec::default(), &DistanceMatrix::for_depth(&tree, 0), None).unwrap();
        let config = ChainConfig {
            iterations: 50,
            burn_in: 10,
            thin: 1,
            ..ChainConfig::default()
        };
        let out = run_depth_chain(&m, &config).unwrap();
        assert_eq!(out.samples.len(), 40);
        assert!(out.samples.iter().all(|p| *p == Partition::one_block(1)));
    }

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::default();
        assert_eq!(c.retained(), 2000);
        c.thin = 0;
        assert!(c.validate().is_err());
        c = ChainConfig {
            iterations: 10,
            burn_in: 10,
            ..ChainConfig::default()
        };
        assert!(c.validate().is_err());
        c = ChainConfig {
            iterations: 12,
            burn_in: 10,
            thin: 5,
            ..ChainConfig::default()
        };
        assert!(c.validate().is_err());
        c.moves = MoveSet {
            gibbs: false,
            split_merge: false,
        };
        c.thin = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let m = model(vec![vec![3, 1], vec![0, 2], vec![2, 5], vec![4, 4]], &PriorSpec::default());
        let other = model(vec![vec![1, 1], vec![6, 2]], &PriorSpec::default());
        let config = ChainConfig {
            iterations: 300,
            burn_in: 20,
            thin: 2,
            seed: 99,
            ..ChainConfig::default()
        };
        let a = run_chain(&[m.clone(), other.clone()], &config).unwrap();
        let b = run_chain(&[m, other], &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples(), 140);
        for d in &a.depths {
            assert!(d.samples.iter().all(|p| Partition::is_canonical(p.labels())));
        }
    }

    fn stationary_check(moves: MoveSet, seed: u64) {
        let spec = PriorSpec {
            kappa: 1.0,
            xi: 0.25,
            ..PriorSpec::default()
        };
        let tree = EventTree::new(
            vec![
                Variable::new("A", vec!["0".into(), "1".into(), "2".into()]),
                Variable::new("B", vec!["0".into(), "1".into()]),
            ],
            1,
        )
        .unwrap();
        let table = ContextTable::from_counts(1, 2, vec![vec![4, 2], vec![3, 3], vec![0, 5]]);
        let m = DepthModel::new(&table, &spec, &DistanceMatrix::for_depth(&tree, 1), None).unwrap();
        let config = ChainConfig {
            iterations: 40_000,
            burn_in: 500,
            thin: 1,
            seed,
            moves,
            ..ChainConfig::default()
        };
        let exact = m.exact_posterior().unwrap();
        let samples = run_depth_chain(&m, &config).unwrap().samples;
        let freq = frequencies(&samples);
        for (p, q) in &exact {
            let f = freq.get(p).copied().unwrap_or(0.0);
            assert!((f - q).abs() < 0.02, "{moves:?} {p}: {f} vs {q}");
        }
    }

    #[test]
    fn gibbs_only_matches_enumeration() {
        stationary_check(
            MoveSet {
                gibbs: true,
                split_merge: false,
            },
            3,
        );
    }

    #[test]
    fn split_merge_only_matches_enumeration() {
        stationary_check(
            MoveSet {
                gibbs: false,
                split_merge: true,
            },
            4,
        );
    }

    #[test]
    fn combined_moves_match_enumeration() {
        stationary_check(MoveSet::default(), 5);
    }

    #[test]
    fn two_binary_variables_full_depth() {
        // four contexts at depth 2, n = 50
        let spec = PriorSpec::default();
        let m = model(vec![vec![10, 3], vec![9, 4], vec![2, 11], vec![5, 6]], &spec);
        let config = ChainConfig {
            iterations: 50_000,
            burn_in: 1_000,
            thin: 1,
            seed: 11,
            ..ChainConfig::default()
        };
        let exact = m.exact_posterior().unwrap();
        let samples = run_depth_chain(&m, &config).unwrap().samples;
        let freq = frequencies(&samples);
        for (p, q) in &exact {
            let f = freq.get(p).copied().unwrap_or(0.0);
            assert!((f - q).abs() < 0.02, "{p}: {f} vs {q}");
        }
        assert!(total_variation(&samples, &exact) < 0.03);
    }
}
