//! Product-partition priors over the stages of one depth.
//!
//! The unnormalized log prior of a partition `{S_1, ..., S_M}` is
//!
//! ```text
//! sum_j [ log kappa + ln Gamma(#S_j) - sum_{k != l in S_j} P(k, l) ]
//! ```
//!
//! where the pair penalty is `P = xi * d + sum_z lambda_z * delta_z`, `d` is the
//! normalized tree-based Hamming distance and `delta_z` the covariate
//! dissimilarity. Sums over a block run over ordered pairs, so every unordered
//! pair is counted twice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{ln_gamma, DirichletMass};
use crate::partition::{enumerate_partitions, Partition};
use crate::tree::EventTree;

/// Largest context count accepted by [`normalize_prior_by_enumeration`].
pub const MAX_ENUMERATION_CONTEXTS: usize = 12;

/// Normal-Inverse-Gamma hyperparameters for a real-valued covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub m0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for NigParams {
    fn default() -> Self {
        Self {
            m0: 0.0,
            kappa0: 1.0,
            alpha0: 1.0,
            beta0: 1.0,
        }
    }
}

impl NigParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0 && self.alpha0 > 0.0 && self.beta0 > 0.0 && self.m0.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "Normal-Inverse-Gamma needs kappa0, alpha0, beta0 > 0: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Cohesion scale; larger values favour more stages.
    pub kappa: f64,
    /// Weight of the Hamming-distance penalty.
    pub xi: f64,
    /// One weight per continuous covariate.
    pub lambda: Vec<f64>,
    pub a: DirichletMass,
    pub nig: NigParams,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            xi: 0.25,
            lambda: Vec::new(),
            a: DirichletMass::default(),
            nig: NigParams::default(),
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidPrior(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidPrior(format!("xi must be nonnegative, got {}", self.xi)));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidPrior(format!("lambda must be nonnegative, got {l}")));
        }
        self.nig.validate()
    }

    fn lambda(&self, z: usize) -> f64 {
        self.lambda.get(z).copied().unwrap_or(0.0)
    }
}

/// Dense symmetric matrix over the contexts of one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn add_scaled(&mut self, other: &SymmetricMatrix, w: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += w * b;
        }
    }
}

/// `1 - (#agreeing components) / (#components)` for two distinct contexts of
/// the same depth.
pub fn hamming_distance(first: &[usize], second: &[usize]) -> Result<f64> {
    if first.len() != second.len() {
        return Err(Error::DepthMismatch(first.len(), second.len()));
    }
    if first == second {
        return Err(Error::IdenticalContexts);
    }
    let agree = first.iter().zip(second).filter(|(a, b)| a == b).count();
    Ok((first.len() - agree) as f64 / first.len() as f64)
}

/// Pairwise Hamming distances between all contexts of one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub depth: usize,
    pub matrix: SymmetricMatrix,
}

impl DistanceMatrix {
    pub fn for_depth(tree: &EventTree, depth: usize) -> Self {
        Self::from_contexts(depth, &tree.contexts(depth))
    }

    pub fn from_contexts(depth: usize, contexts: &[Vec<usize>]) -> Self {
        let matrix = SymmetricMatrix::from_fn(contexts.len(), |i, j| {
            hamming_distance(&contexts[i], &contexts[j]).expect("distinct same-depth contexts")
        });
        Self { depth, matrix }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// Running sufficient statistics (count, mean, sum of squared deviations).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianStats {
    pub n: usize,
    pub mean: f64,
    pub ssd: f64,
}

impl GaussianStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Self::default();
        for &v in values {
            s.push(v);
        }
        s
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.ssd += delta * (v - self.mean);
    }

    /// Pooled statistics of two disjoint samples.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let ssd = self.ssd + other.ssd + delta * delta * (self.n * other.n) as f64 / n as f64;
        Self { n, mean, ssd }
    }
}

/// Log marginal likelihood of real values under a Normal-Inverse-Gamma prior.
pub fn nig_log_marginal(values: &[f64], nig: &NigParams) -> f64 {
    nig_log_marginal_stats(&GaussianStats::from_values(values), nig)
}

pub fn nig_log_marginal_stats(stats: &GaussianStats, nig: &NigParams) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let n = stats.n as f64;
    let alpha_n = nig.alpha0 + n / 2.0;
    let beta_n = nig.beta0
        + stats.ssd / 2.0
        + nig.kappa0 * n * (stats.mean - nig.m0).powi(2) / (2.0 * (nig.kappa0 + n));
    nig.alpha0 * nig.beta0.ln() + 0.5 * nig.kappa0.ln() - ln_gamma(nig.alpha0)
        - n / 2.0 * (2.0 * std::f64::consts::PI).ln()
        + ln_gamma(alpha_n)
        - 0.5 * (nig.kappa0 + n).ln()
        - alpha_n * beta_n.ln()
}

/// Rescales to mean 0 and unit sample standard deviation.
pub fn standardize(name: &str, values: &[f64]) -> Result<Vec<f64>> {
    let stats = GaussianStats::from_values(values);
    let sd = if stats.n > 1 {
        (stats.ssd / (stats.n - 1) as f64).sqrt()
    } else {
        0.0
    };
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::ConstantCovariate(name.to_string()));
    }
    Ok(values.iter().map(|v| (v - stats.mean) / sd).collect())
}

/// Covariate dissimilarities `delta_z(k, l) = -[log p(z_{k u l}) - log p(z_k) - log p(z_l)]`
/// between the contexts of one depth, one matrix per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateDissimilarity {
    pub depth: usize,
    pub matrices: Vec<SymmetricMatrix>,
}

impl CovariateDissimilarity {
    /// `values[z][row]` are (already standardized) covariates and
    /// `row_context[row]` the depth's context rank of each row.
    pub fn from_grouped(
        depth: usize,
        n_contexts: usize,
        row_context: &[usize],
        values: &[Vec<f64>],
        nig: &NigParams,
    ) -> Self {
        let matrices = values
            .iter()
            .map(|column| {
                let mut stats = vec![GaussianStats::default(); n_contexts];
                for (&ctx, &v) in row_context.iter().zip(column) {
                    stats[ctx].push(v);
                }
                let single: Vec<f64> = stats.iter().map(|s| nig_log_marginal_stats(s, nig)).collect();
                SymmetricMatrix::from_fn(n_contexts, |k, l| {
                    if stats[k].n == 0 || stats[l].n == 0 {
                        return 0.0;
                    }
                    let joined = nig_log_marginal_stats(&stats[k].merge(&stats[l]), nig);
                    -(joined - single[k] - single[l])
                })
            })
            .collect();
        Self { depth, matrices }
    }

    pub fn n_covariates(&self) -> usize {
        self.matrices.len()
    }
}

/// Standardizes each named covariate and computes its dissimilarities at
/// every modeled depth of `tree`.
pub fn covariate_dissimilarity(
    tree: &EventTree,
    rows: &[Vec<usize>],
    covariates: &[(String, Vec<f64>)],
    nig: &NigParams,
) -> Result<Vec<CovariateDissimilarity>> {
    nig.validate()?;
    let standardized: Vec<Vec<f64>> = covariates
        .iter()
        .map(|(name, values)| {
            if values.len() != rows.len() {
                return Err(Error::SizeMismatch(values.len(), rows.len()));
            }
            standardize(name, values)
        })
        .collect::<Result<_>>()?;
    tree.modeled_depths()
        .map(|depth| {
            let row_context = tree.row_contexts(rows, depth)?;
            Ok(CovariateDissimilarity::from_grouped(
                depth,
                tree.n_contexts(depth),
                &row_context,
                &standardized,
                nig,
            ))
        })
        .collect()
}

/// Combined pair penalty `xi * d + sum_z lambda_z * delta_z`.
pub fn pair_penalty(
    spec: &PriorSpec,
    distances: &DistanceMatrix,
    covariates: Option<&CovariateDissimilarity>,
) -> SymmetricMatrix {
    let mut out = SymmetricMatrix::zeros(distances.n());
    out.add_scaled(&distances.matrix, spec.xi);
    if let Some(cov) = covariates {
        for (z, m) in cov.matrices.iter().enumerate() {
            let w = spec.lambda(z);
            if w != 0.0 {
                out.add_scaled(m, w);
            }
        }
    }
    out
}

/// Log cohesion of one block given a precomputed pair penalty.
pub fn block_log_cohesion(members: &[usize], log_kappa: f64, penalty: &SymmetricMatrix) -> f64 {
    let mut pen = 0.0;
    for (idx, &k) in members.iter().enumerate() {
        for &l in &members[idx + 1..] {
            pen += penalty.get(k, l);
        }
    }
    log_kappa + ln_gamma(members.len() as f64) - 2.0 * pen
}

/// Unnormalized log prior of a partition.
pub fn log_eppf(
    partition: &Partition,
    spec: &PriorSpec,
    distances: &DistanceMatrix,
    covariates: Option<&CovariateDissimilarity>,
) -> f64 {
    let penalty = pair_penalty(spec, distances, covariates);
    log_eppf_with_penalty(partition, spec.kappa.ln(), &penalty)
}

pub fn log_eppf_with_penalty(partition: &Partition, log_kappa: f64, penalty: &SymmetricMatrix) -> f64 {
    partition
        .blocks()
        .iter()
        .map(|b| block_log_cohesion(b, log_kappa, penalty))
        .sum()
}

/// Normalized prior probability of every partition of the depth's contexts.
pub fn normalize_prior_by_enumeration(
    spec: &PriorSpec,
    distances: &DistanceMatrix,
    covariates: Option<&CovariateDissimilarity>,
) -> Result<Vec<(Partition, f64)>> {
    spec.validate()?;
    let n = distances.n();
    if n > MAX_ENUMERATION_CONTEXTS {
        return Err(Error::TooManyContexts(n, MAX_ENUMERATION_CONTEXTS));
    }
    let penalty = pair_penalty(spec, distances, covariates);
    let log_kappa = spec.kappa.ln();
    let parts = enumerate_partitions(n);
    let logs: Vec<f64> = parts
        .iter()
        .map(|p| log_eppf_with_penalty(p, log_kappa, &penalty))
        .collect();
    let probs = normalize_log_weights(&logs);
    Ok(parts.into_iter().zip(probs).collect())
}

/// Exponentiates and normalizes log weights with max subtraction.
pub fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}
