use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stagedtrees::causal::{effect_posterior, CausalQuery, EffectConfig, EffectPosterior, EffectSummary, ThetaMode};
use stagedtrees::export::{
    context_labels, samples_json, staged_tree_dot, to_tagged_json, write_dissimilarity_csv,
    write_effect_draws_csv, write_samples_text, CREDIBLE_BALL_SCHEMA, EFFECTS_SCHEMA, POINT_ESTIMATE_SCHEMA,
};
use stagedtrees::independence::structural_independence_report;
use stagedtrees::priors::covariate_dissimilarity;
use stagedtrees::summaries::{coclustering, credible_ball, point_estimate, CredibleBall, SearchConfig};
use stagedtrees::tree::count_contexts;
use stagedtrees::{sampler, Dataset, DepthModel, EventTree, Loss, Partition, PosteriorSampleSet, Result};

use crate::config::RunConfig;
use crate::{sha256_hex, MANIFEST_SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub variable: String,
    pub contexts: Vec<String>,
    /// 1-based stage of each context.
    pub stages: Partition,
    pub n_stages: usize,
    pub expected_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub loss: Loss,
    pub depths: Vec<DepthPoint>,
    pub independences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBall {
    pub depth: usize,
    pub variable: String,
    pub ball: CredibleBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    pub depths: Vec<DepthBall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateRow {
    pub profile: String,
    /// Empirical share of the profile.
    pub weight: f64,
    #[serde(flatten)]
    pub summary: EffectSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsReport {
    pub treatment: String,
    pub outcome: String,
    pub treated_level: String,
    pub positive_level: String,
    pub theta: ThetaMode,
    pub level: f64,
    pub draws: usize,
    pub ate: EffectSummary,
    pub cate: Vec<CateRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub dataset: String,
    pub dataset_sha256: String,
    /// Seconds since the Unix epoch; the only nondeterministic output.
    pub created_unix: u64,
    pub artifacts: Vec<String>,
}

/// Everything a fit produces, before it is written out.
pub struct FitOutputs {
    pub tree: EventTree,
    pub samples: PosteriorSampleSet,
    pub point: PointReport,
    pub balls: BallReport,
    pub effects: Option<(EffectsReport, EffectPosterior)>,
    pub config_hash: String,
    pub dataset_sha256: String,
}

/// Hash of the effective config with the output directory blanked, so that
/// a rerun into another directory carries the same provenance.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let mut c = config.clone();
    c.output = Default::default();
    Ok(sha256_hex(c.to_toml()?.as_bytes()))
}

pub fn fit(config: &RunConfig) -> Result<FitOutputs> {
    config.validate()?;
    let bytes = fs::read(&config.data.path)?;
    let dataset = Dataset::from_reader(&bytes[..])?;
    let d = &config.data;
    let tree = EventTree::build(&dataset, &d.ordering, &d.modeled, &d.levels)?;
    let query = config
        .causal
        .as_ref()
        .map(|c| CausalQuery::new(&tree, &c.treatment, &c.outcome, c.treated_level.as_deref(), c.positive_level.as_deref()))
        .transpose()?;
    let covariates: Vec<(String, Vec<f64>)> = d
        .covariates
        .iter()
        .map(|name| Ok((name.clone(), dataset.numeric_column(name)?)))
        .collect::<Result<_>>()?;
    let spec = config.prior.spec(covariates.len())?;

    let rows = tree.encode_rows(&dataset)?;
    let tables = count_contexts(&tree, &rows)?;
    let cov = if covariates.is_empty() {
        None
    } else {
        Some(covariate_dissimilarity(&tree, &rows, &covariates, &spec.nig)?)
    };
    let models = DepthModel::for_tree(&tree, &tables, &spec, cov.as_deref())?;
    let hash = config_hash(config)?;
    let mut samples = sampler::run_chain(&models, &config.chain)?;
    samples.provenance.config_hash = Some(hash.clone());

    let s = &config.summary;
    let search = SearchConfig {
        restarts: s.restarts,
        max_sweeps: s.max_sweeps,
        seed: config.chain.seed,
    };
    let mut point_depths = Vec::new();
    let mut ball_depths = Vec::new();
    for ds in &samples.depths {
        let variable = tree.variable(ds.depth).name.clone();
        let est = point_estimate(&ds.samples, s.loss, &search)?;
        let ball = credible_ball(&ds.samples, &est.partition, s.loss, s.level)?;
        point_depths.push(DepthPoint {
            depth: ds.depth,
            variable: variable.clone(),
            contexts: context_labels(&tree, ds.depth),
            n_stages: est.partition.n_blocks(),
            stages: est.partition,
            expected_loss: est.expected_loss,
        });
        ball_depths.push(DepthBall {
            depth: ds.depth,
            variable,
            ball,
        });
    }
    let stagings: Vec<(usize, Partition)> = point_depths.iter().map(|p| (p.depth, p.stages.clone())).collect();
    let independences = structural_independence_report(&tree, &stagings)
        .iter()
        .map(|st| st.describe(&tree))
        .collect();

    let effects = match (&query, &config.causal) {
        (Some(q), Some(c)) => {
            let ec = EffectConfig {
                a: spec.a,
                mode: c.theta,
                level: s.level,
                seed: config.chain.seed,
            };
            let post = effect_posterior(&tree, &samples, &tables, q, &ec)?;
            let report = EffectsReport {
                treatment: post.treatment.clone(),
                outcome: post.outcome.clone(),
                treated_level: tree.variable(q.treatment).levels[q.treated_level].clone(),
                positive_level: tree.variable(q.outcome).levels[q.positive_level].clone(),
                theta: c.theta,
                level: post.level,
                draws: post.ate.len(),
                ate: post.ate_summary.clone(),
                cate: post
                    .cate
                    .iter()
                    .map(|p| CateRow {
                        profile: p.label.clone(),
                        weight: p.weight,
                        summary: p.summary.clone(),
                    })
                    .collect(),
                warnings: post.warnings.clone(),
            };
            Some((report, post))
        }
        _ => None,
    };

    Ok(FitOutputs {
        tree,
        samples,
        point: PointReport {
            loss: s.loss,
            depths: point_depths,
            independences,
        },
        balls: BallReport { depths: ball_depths },
        effects,
        config_hash: hash,
        dataset_sha256: sha256_hex(&bytes),
    })
}

fn write(dir: &Path, name: &str, contents: &[u8], written: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    written.push(name.to_string());
    Ok(())
}

/// Runs the fit and writes every artifact under `config.output`.
pub fn cmd_fit(config: &RunConfig) -> Result<Manifest> {
    let out = fit(config)?;
    let dir = &config.output;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    write(dir, "config.toml", config.to_toml()?.as_bytes(), &mut written)?;
    let mut text = Vec::new();
    write_samples_text(&out.samples, &mut text)?;
    write(dir, "samples.txt", &text, &mut written)?;
    write(dir, "samples.json", samples_json(&out.samples)?.as_bytes(), &mut written)?;
    for ds in &out.samples.depths {
        let mut csv = Vec::new();
        write_dissimilarity_csv(&out.tree, &coclustering(ds.depth, &ds.samples)?, &mut csv)?;
        write(dir, &format!("dissimilarity_depth{}.csv", ds.depth), &csv, &mut written)?;
    }
    let point_json = to_tagged_json(POINT_ESTIMATE_SCHEMA, &out.point)?;
    write(dir, "point_estimate.json", point_json.as_bytes(), &mut written)?;
    let stagings: Vec<(usize, Partition)> = out.point.depths.iter().map(|p| (p.depth, p.stages.clone())).collect();
    write(dir, "staged_tree.dot", staged_tree_dot(&out.tree, &stagings).as_bytes(), &mut written)?;
    let ball_json = to_tagged_json(CREDIBLE_BALL_SCHEMA, &out.balls)?;
    write(dir, "credible_ball.json", ball_json.as_bytes(), &mut written)?;
    if let Some((report, post)) = &out.effects {
        write(dir, "effects.json", to_tagged_json(EFFECTS_SCHEMA, report)?.as_bytes(), &mut written)?;
        if config.summary.draws {
            let mut csv = Vec::new();
            write_effect_draws_csv(post, &mut csv)?;
            write(dir, "effect_draws.csv", &csv, &mut written)?;
        }
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.chain.seed,
        config_hash: out.config_hash,
        dataset: config.data.path.display().to_string(),
        dataset_sha256: out.dataset_sha256,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        artifacts: written,
    };
    fs::write(dir.join("manifest.json"), to_tagged_json(MANIFEST_SCHEMA, &manifest)?)?;
    Ok(manifest)
}
