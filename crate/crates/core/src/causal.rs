//! Average and conditional treatment effects from sampled stagings.
//!
//! For a binary treatment `T` immediately followed by a binary outcome `Y`,
//! the profiles `z` are the contexts of depth `T` (all pre-treatment
//! variables). Each posterior draw of the outcome-depth partition gives
//! stage probabilities, and
//!
//! ```text
//! CATE_z = P(Y = y1 | T = t1, z) - P(Y = y1 | T = t0, z)
//! ATE    = sum_z CATE_z P(z)
//! ```
//!
//! When `(z, t0)` and `(z, t1)` share an outcome stage the CATE is a
//! structural zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::DirichletMass;
use crate::partition::Partition;
use crate::sampler::PosteriorSampleSet;
use crate::tree::{ContextTable, EventTree};

/// Treatment and outcome as depth indices, with the level indices taken as
/// "treated" and as the outcome event of interest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub treatment: usize,
    pub outcome: usize,
    pub treated_level: usize,
    pub positive_level: usize,
}

impl CausalQuery {
    /// `treated` and `positive` are level labels; each defaults to the
    /// variable's second level.
    pub fn new(
        tree: &EventTree,
        treatment: &str,
        outcome: &str,
        treated: Option<&str>,
        positive: Option<&str>,
    ) -> Result<Self> {
        let t = tree.variable_index(treatment)?;
        let y = tree.variable_index(outcome)?;
        for (name, i) in [(treatment, t), (outcome, y)] {
            if tree.cardinality(i) != 2 {
                return Err(Error::InvalidQuery(format!(
                    "`{name}` must be binary, it has {} levels",
                    tree.cardinality(i)
                )));
            }
            if !tree.is_modeled(i) {
                return Err(Error::InvalidQuery(format!("`{name}` is not a modeled variable")));
            }
        }
        if y != t + 1 {
            return Err(Error::InvalidQuery(format!(
                "the outcome `{outcome}` must come right after the treatment `{treatment}`; variables in between would be post-treatment"
            )));
        }
        let level = |i: usize, label: Option<&str>| -> Result<usize> {
            match label {
                None => Ok(1),
                Some(l) => tree.variable(i).level_index(l).ok_or_else(|| {
                    Error::InvalidQuery(format!("`{l}` is not a level of `{}`", tree.variable(i).name))
                }),
            }
        };
        Ok(Self {
            treatment: t,
            outcome: y,
            treated_level: level(t, treated)?,
            positive_level: level(y, positive)?,
        })
    }

    pub fn control_level(&self) -> usize {
        1 - self.treated_level
    }

    /// Number of pre-treatment profiles.
    pub fn n_profiles(&self, tree: &EventTree) -> usize {
        tree.n_contexts(self.treatment)
    }

    /// Rank of context `(z, t)` at the outcome depth.
    pub fn outcome_context(&self, profile: usize, t: usize) -> usize {
        profile * 2 + t
    }
}

/// Stage labels and per-stage probability vectors at one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFactor {
    pub depth: usize,
    pub partition: Partition,
    pub theta: Vec<Vec<f64>>,
}

impl StageFactor {
    /// `P(X_depth = level | context)`.
    pub fn prob(&self, context: usize, level: usize) -> f64 {
        self.theta[self.partition.label(context)][level]
    }

    pub fn shares_stage(&self, c1: usize, c2: usize) -> bool {
        self.partition.same_block(c1, c2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageProbabilities {
    pub factors: Vec<StageFactor>,
}

impl StageProbabilities {
    pub fn factor(&self, depth: usize) -> Option<&StageFactor> {
        self.factors.iter().find(|f| f.depth == depth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMode {
    /// Posterior mean `(N_S + a/K) / (|N_S| + a)` of each stage.
    #[default]
    PosteriorMean,
    /// One draw from each stage's Dirichlet posterior.
    PosteriorDraw,
}

fn stage_alpha(partition: &Partition, table: &ContextTable, a: DirichletMass) -> Vec<Vec<f64>> {
    let k = table.cardinality();
    partition
        .blocks()
        .into_iter()
        .map(|members| {
            table
                .aggregate(members)
                .iter()
                .map(|&n| n as f64 + a.per_level(k))
                .collect()
        })
        .collect()
}

/// Posterior-mean stage probabilities for one partition of `table`'s depth.
pub fn stage_theta(partition: &Partition, table: &ContextTable, a: DirichletMass) -> StageFactor {
    let theta = stage_alpha(partition, table, a)
        .into_iter()
        .map(|alpha| {
            let total: f64 = alpha.iter().sum();
            alpha.into_iter().map(|x| x / total).collect()
        })
        .collect();
    StageFactor {
        depth: table.depth(),
        partition: partition.clone(),
        theta,
    }
}

/// Stage probabilities drawn from their Dirichlet posteriors.
pub fn stage_theta_draw<R: Rng + ?Sized>(
    partition: &Partition,
    table: &ContextTable,
    a: DirichletMass,
    rng: &mut R,
) -> StageFactor {
    let theta = stage_alpha(partition, table, a)
        .into_iter()
        .map(|alpha| {
            let g: Vec<f64> = alpha
                .iter()
                .map(|&s| rng.sample(Gamma::new(s, 1.0).expect("positive shape")))
                .collect();
            let total: f64 = g.iter().sum();
            g.into_iter().map(|x| x / total).collect()
        })
        .collect();
    StageFactor {
        depth: table.depth(),
        partition: partition.clone(),
        theta,
    }
}

fn table_for(tables: &[ContextTable], depth: usize) -> Result<&ContextTable> {
    tables
        .iter()
        .find(|t| t.depth() == depth)
        .ok_or_else(|| Error::InvalidQuery(format!("no count table for depth {depth}")))
}

/// Posterior-mean stage probabilities for one sampled staging per depth.
pub fn recover_theta(
    draw: &[(usize, &Partition)],
    tables: &[ContextTable],
    a: DirichletMass,
) -> Result<StageProbabilities> {
    let factors = draw
        .iter()
        .map(|&(depth, p)| {
            let table = table_for(tables, depth)?;
            if p.n_items() != table.n_contexts() {
                return Err(Error::SizeMismatch(p.n_items(), table.n_contexts()));
            }
            Ok(stage_theta(p, table, a))
        })
        .collect::<Result<_>>()?;
    Ok(StageProbabilities { factors })
}

/// Replaces the treatment factor with a point mass on level `t0`; every
/// other factor is left as is.
pub fn intervene(theta: &StageProbabilities, query: &CausalQuery, t0: usize) -> StageProbabilities {
    let mut out = theta.clone();
    for f in out.factors.iter_mut().filter(|f| f.depth == query.treatment) {
        let mut point = vec![0.0; 2];
        point[t0] = 1.0;
        f.partition = Partition::one_block(f.partition.n_items());
        f.theta = vec![point];
    }
    out
}

/// `P(Y = y, Z = z | do(T = t0))` for every profile and outcome level,
/// indexed `[z][y]`, using `marginal` for `P(z)`.
pub fn interventional_joint(
    theta: &StageProbabilities,
    query: &CausalQuery,
    marginal: &[f64],
    t0: usize,
) -> Result<Vec<[f64; 2]>> {
    let done = intervene(theta, query, t0);
    let outcome = outcome_factor(&done, query)?;
    let treat = done.factor(query.treatment);
    Ok(marginal
        .iter()
        .enumerate()
        .map(|(z, &pz)| {
            let mut row = [0.0; 2];
            for t in 0..2 {
                let pt = treat.map_or(if t == t0 { 1.0 } else { 0.0 }, |f| f.prob(z, t));
                for (y, cell) in row.iter_mut().enumerate() {
                    *cell += pz * pt * outcome.prob(query.outcome_context(z, t), y);
                }
            }
            row
        })
        .collect())
}

fn outcome_factor<'a>(theta: &'a StageProbabilities, query: &CausalQuery) -> Result<&'a StageFactor> {
    theta
        .factor(query.outcome)
        .ok_or_else(|| Error::InvalidQuery(format!("no stage probabilities for outcome depth {}", query.outcome)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CateDraw {
    pub value: f64,
    pub structural_zero: bool,
}

/// `CATE_z` read off the outcome factor.
pub fn cate_from_factor(outcome: &StageFactor, query: &CausalQuery, z: usize) -> CateDraw {
    let c1 = query.outcome_context(z, query.treated_level);
    let c0 = query.outcome_context(z, query.control_level());
    if outcome.shares_stage(c0, c1) {
        return CateDraw {
            value: 0.0,
            structural_zero: true,
        };
    }
    CateDraw {
        value: outcome.prob(c1, query.positive_level) - outcome.prob(c0, query.positive_level),
        structural_zero: false,
    }
}

pub fn cate_draw(theta: &StageProbabilities, query: &CausalQuery, z: usize) -> Result<CateDraw> {
    Ok(cate_from_factor(outcome_factor(theta, query)?, query, z))
}

/// Standardized ATE; profiles with zero marginal probability contribute 0.
pub fn ate_draw(theta: &StageProbabilities, query: &CausalQuery, marginal: &[f64]) -> Result<f64> {
    let outcome = outcome_factor(theta, query)?;
    Ok(marginal
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(z, &p)| cate_from_factor(outcome, query, z).value * p)
        .sum())
}

/// Empirical relative frequency of each pre-treatment profile.
pub fn covariate_marginal(tables: &[ContextTable], query: &CausalQuery) -> Result<Vec<f64>> {
    let table = table_for(tables, query.treatment)?;
    let n = table.n_total();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((0..table.n_contexts())
        .map(|z| table.context_total(z) as f64 / n as f64)
        .collect())
}

/// Mean, sd, equal-tailed interval and sign probabilities of a set of draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_positive: f64,
    pub p_zero: f64,
    pub p_negative: f64,
}

/// Type-7 sample quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `zero[r]` marks draws that are structural zeros.
pub fn summarize(values: &[f64], zero: &[bool], level: f64) -> EffectSummary {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let (mut pos, mut nul, mut neg) = (0usize, 0usize, 0usize);
    for (&v, &z) in values.iter().zip(zero) {
        if z || v == 0.0 {
            nul += 1;
        } else if v > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    EffectSummary {
        mean,
        sd,
        lower: quantile(&sorted, tail),
        upper: quantile(&sorted, 1.0 - tail),
        p_positive: pos as f64 / r,
        p_zero: nul as f64 / r,
        p_negative: neg as f64 / r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEffect {
    pub profile: Vec<usize>,
    pub label: String,
    /// Empirical probability of the profile.
    pub weight: f64,
    pub draws: Vec<f64>,
    pub structural_zero: Vec<bool>,
    pub summary: EffectSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectPosterior {
    pub treatment: String,
    pub outcome: String,
    pub level: f64,
    pub ate: Vec<f64>,
    pub ate_summary: EffectSummary,
    pub cate: Vec<ProfileEffect>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectConfig {
    pub a: DirichletMass,
    pub mode: ThetaMode,
    /// Credible level of the equal-tailed intervals.
    pub level: f64,
    /// Seed for the Dirichlet draws of [`ThetaMode::PosteriorDraw`].
    pub seed: u64,
}

impl Default for EffectConfig {
    fn default() -> Self {
        Self {
            a: DirichletMass::default(),
            mode: ThetaMode::default(),
            level: 0.95,
            seed: 1,
        }
    }
}

/// Contexts `(z, t)` with no observations among profiles that occur.
pub fn positivity_warnings(tree: &EventTree, tables: &[ContextTable], query: &CausalQuery) -> Result<Vec<String>> {
    let table = table_for(tables, query.outcome)?;
    let marginal = covariate_marginal(tables, query)?;
    let t_var = tree.variable(query.treatment);
    let mut out = Vec::new();
    for (z, &p) in marginal.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for t in 0..2 {
            if table.context_total(query.outcome_context(z, t)) == 0 {
                let profile = tree.decode_context(z, query.treatment)?;
                out.push(format!(
                    "positivity: no observations with {}={} in profile {}",
                    t_var.name,
                    t_var.levels[t],
                    tree.context_label(&profile)
                ));
            }
        }
    }
    Ok(out)
}

/// One ATE and one CATE vector per retained draw.
pub fn effect_posterior(
    tree: &EventTree,
    samples: &PosteriorSampleSet,
    tables: &[ContextTable],
    query: &CausalQuery,
    config: &EffectConfig,
) -> Result<EffectPosterior> {
    let outcome_samples = &samples
        .depth(query.outcome)
        .ok_or_else(|| Error::InvalidQuery(format!("no samples for outcome depth {}", query.outcome)))?
        .samples;
    if outcome_samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let table = table_for(tables, query.outcome)?;
    let marginal = covariate_marginal(tables, query)?;
    let n_profiles = query.n_profiles(tree);
    let r = outcome_samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ate = Vec::with_capacity(r);
    let mut ate_zero = Vec::with_capacity(r);
    let mut cate = vec![Vec::with_capacity(r); n_profiles];
    let mut cate_zero = vec![Vec::with_capacity(r); n_profiles];
    for p in outcome_samples {
        let factor = match config.mode {
            ThetaMode::PosteriorMean => stage_theta(p, table, config.a),
            ThetaMode::PosteriorDraw => stage_theta_draw(p, table, config.a, &mut rng),
        };
        let mut total = 0.0;
        let mut all_zero = true;
        for z in 0..n_profiles {
            let c = cate_from_factor(&factor, query, z);
            cate[z].push(c.value);
            cate_zero[z].push(c.structural_zero);
            if marginal[z] > 0.0 {
                total += c.value * marginal[z];
                all_zero &= c.structural_zero;
            }
        }
        ate.push(total);
        ate_zero.push(all_zero);
    }
    let profiles = (0..n_profiles)
        .map(|z| {
            let profile = tree.decode_context(z, query.treatment)?;
            Ok(ProfileEffect {
                label: tree.context_label(&profile),
                profile,
                weight: marginal[z],
                summary: summarize(&cate[z], &cate_zero[z], config.level),
                draws: std::mem::take(&mut cate[z]),
                structural_zero: std::mem::take(&mut cate_zero[z]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectPosterior {
        treatment: tree.variable(query.treatment).name.clone(),
        outcome: tree.variable(query.outcome).name.clone(),
        level: config.level,
        ate_summary: summarize(&ate, &ate_zero, config.level),
        ate,
        cate: profiles,
        warnings: positivity_warnings(tree, tables, query)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Variable;

    fn binary_tree(n: usize, first_modeled: usize) -> EventTree {
        EventTree::new(
            (0..n).map(|i| Variable::new(format!("X{i}"), vec!["0".into(), "1".into()])).collect(),
            first_modeled,
        )
        .unwrap()
    }

    fn factor(depth: usize, labels: &[usize], theta: Vec<Vec<f64>>) -> StageFactor {
        StageFactor {
            depth,
            partition: Partition::from_labels(labels),
            theta,
        }
    }

    #[test]
    fn theta_examples() {
        let a = DirichletMass::default();
        let t = ContextTable::from_counts(1, 2, vec![vec![0, 0], vec![3, 1]]);
        let f = stage_theta(&Partition::singletons(2), &t, a);
        assert_eq!(f.theta[0], vec![0.5, 0.5]);
        assert!((f.theta[1][0] - 0.7).abs() < 1e-15 && (f.theta[1][1] - 0.3).abs() < 1e-15);
        let t = ContextTable::from_counts(1, 2, vec![vec![2, 0], vec![1, 1]]);
        let merged = stage_theta(&Partition::one_block(2), &t, a);
        assert!((merged.theta[0][0] - 3.5 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn query_validation() {
        let tree = binary_tree(4, 2);
        let q = CausalQuery::new(&tree, "X2", "X3", None, None).unwrap();
        assert_eq!((q.treatment, q.outcome, q.treated_level, q.positive_level), (2, 3, 1, 1));
        assert!(CausalQuery::new(&tree, "X1", "X2", None, None).is_err());
        assert!(CausalQuery::new(&tree, "X2", "X2", None, None).is_err());
        assert!(CausalQuery::new(&tree, "X2", "X3", Some("7"), None).is_err());
        assert!(CausalQuery::new(&tree, "T", "X3", None, None).is_err());
        let wide = EventTree::new(
            vec![
                Variable::new("Z", vec!["a".into(), "b".into()]),
                Variable::new("T", vec!["0".into(), "1".into(), "2".into()]),
                Variable::new("Y", vec!["0".into(), "1".into()]),
            ],
            1,
        )
        .unwrap();
        assert!(CausalQuery::new(&wide, "T", "Y", None, None).is_err());
        let skip = binary_tree(4, 1);
        assert!(CausalQuery::new(&skip, "X1", "X3", None, None).is_err());
    }

    #[test]
    fn cate_examples() {
        let tree = binary_tree(3, 1);
        let q = CausalQuery::new(&tree, "X1", "X2", None, None).unwrap();
        // profile 0: (z,0) -> stage 0, (z,1) -> stage 1; profile 1 shares stage 2
        let f = factor(2, &[0, 1, 2, 2], vec![vec![0.5, 0.5], vec![0.2, 0.8], vec![0.9, 0.1]]);
        let theta = StageProbabilities { factors: vec![f] };
        let c0 = cate_draw(&theta, &q, 0).unwrap();
        assert!((c0.value - 0.3).abs() < 1e-15 && !c0.structural_zero);
        let c1 = cate_draw(&theta, &q, 1).unwrap();
        assert_eq!(c1, CateDraw { value: 0.0, structural_zero: true });
        let ate = ate_draw(&theta, &q, &[0.25, 0.75]).unwrap();
        assert!((ate - 0.075).abs() < 1e-15);
        assert_eq!(ate_draw(&theta, &q, &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn intervention_replaces_only_treatment() {
        let tree = binary_tree(3, 1);
        let q = CausalQuery::new(&tree, "X1", "X2", None, None).unwrap();
        let theta = StageProbabilities {
            factors: vec![
                factor(1, &[0, 1], vec![vec![0.6, 0.4], vec![0.1, 0.9]]),
                factor(2, &[0, 1, 0, 2], vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.4, 0.6]]),
            ],
        };
        let done = intervene(&theta, &q, 1);
        let t = done.factor(1).unwrap();
        assert_eq!((t.prob(0, 1), t.prob(1, 1)), (1.0, 1.0));
        assert_eq!(done.factor(2), theta.factor(2));
        let marginal = [0.3, 0.7];
        let joint = interventional_joint(&theta, &q, &marginal, 1).unwrap();
        for z in 0..2 {
            let expected = marginal[z] * theta.factor(2).unwrap().prob(2 * z + 1, 1);
            assert!((joint[z][1] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[0.0, 0.0, 0.1, -0.2], &[true, true, false, false], 0.95);
        assert_eq!((s.p_zero, s.p_positive, s.p_negative), (0.5, 0.25, 0.25));
        assert!((s.mean + 0.025).abs() < 1e-15);
        let s = summarize(&(0..101).map(|i| i as f64).collect::<Vec<_>>(), &[false; 101], 0.9);
        assert!((s.lower - 5.0).abs() < 1e-12 && (s.upper - 95.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_and_positivity() {
        let tree = binary_tree(3, 1);
        let q = CausalQuery::new(&tree, "X1", "X2", None, None).unwrap();
        let tables = vec![
            ContextTable::from_counts(1, 2, vec![vec![3, 1], vec![0, 0]]),
            ContextTable::from_counts(2, 2, vec![vec![2, 1], vec![1, 0], vec![0, 0], vec![0, 0]]),
        ];
        assert_eq!(covariate_marginal(&tables, &q).unwrap(), vec![1.0, 0.0]);
        assert!(positivity_warnings(&tree, &tables, &q).unwrap().is_empty());
        let gap = vec![
            tables[0].clone(),
            ContextTable::from_counts(2, 2, vec![vec![2, 2], vec![0, 0], vec![0, 0], vec![0, 0]]),
        ];
        assert_eq!(positivity_warnings(&tree, &gap, &q).unwrap().len(), 1);
        let empty = vec![
            ContextTable::from_counts(1, 2, vec![vec![0, 0], vec![0, 0]]),
            tables[1].clone(),
        ];
        assert!(covariate_marginal(&empty, &q).is_err());
    }

    #[test]
    fn dirichlet_draws_average_to_the_mean() {
        let t = ContextTable::from_counts(1, 3, vec![vec![3, 1, 0], vec![2, 2, 2]]);
        let p = Partition::singletons(2);
        let a = DirichletMass::default();
        let mean = stage_theta(&p, &t, a);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut acc = vec![vec![0.0; 3]; 2];
        let n = 20_000;
        for _ in 0..n {
            let d = stage_theta_draw(&p, &t, a, &mut rng);
            for (s, row) in d.theta.iter().enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (k, v) in row.iter().enumerate() {
                    acc[s][k] += v / n as f64;
                }
            }
        }
        for (got, want) in acc.iter().flatten().zip(mean.theta.iter().flatten()) {
            assert!((got - want).abs() < 0.01);
        }
    }
}
