use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stagedtrees::causal::CausalQuery;
use stagedtrees::export::{context_labels, from_tagged_json, to_tagged_json, GENERATOR_SCHEMA, TRUTH_SCHEMA};
use stagedtrees::simulate::{exact_effects, random_staged_tree, sample_dataset, GeneratingTree};
use stagedtrees::{Error, Result};

use crate::config::SimulateConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCate {
    pub profile: String,
    pub probability: f64,
    pub cate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub treatment: String,
    pub outcome: String,
    pub treated_level: String,
    pub positive_level: String,
    pub ate: f64,
    pub cate: Vec<TruthCate>,
}

/// One simulated dataset of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub path: PathBuf,
}

/// Reads a generating tree with or without its schema tag.
pub fn read_generator(path: &Path) -> Result<GeneratingTree> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let g: GeneratingTree = if value.get("schema").is_some() {
        from_tagged_json(GENERATOR_SCHEMA, &text)?
    } else {
        serde_json::from_value(value)?
    };
    g.validate()?;
    Ok(g)
}

pub fn truth(g: &GeneratingTree, treatment: &str, outcome: &str) -> Result<Truth> {
    let tree = g.tree()?;
    let q = CausalQuery::new(&tree, treatment, outcome, None, None)?;
    let exact = exact_effects(g, &q)?;
    let labels = context_labels(&tree, q.treatment);
    Ok(Truth {
        treatment: treatment.to_string(),
        outcome: outcome.to_string(),
        treated_level: tree.variable(q.treatment).levels[q.treated_level].clone(),
        positive_level: tree.variable(q.outcome).levels[q.positive_level].clone(),
        ate: exact.ate,
        cate: labels
            .into_iter()
            .zip(exact.cate.iter().zip(&exact.profile_probabilities))
            .map(|(profile, (&cate, &probability))| TruthCate {
                profile,
                probability,
                cate,
            })
            .collect(),
    })
}

/// Data seed of replicate `r` at sample size `n`, distinct across the sweep.
pub fn replicate_seed(seed: u64, n: usize, r: usize) -> u64 {
    seed.wrapping_mul(1_000_003)
        .wrapping_add((n as u64).wrapping_mul(1_000))
        .wrapping_add(r as u64 + 1)
}

/// Writes the generating tree, its exact effects and the datasets. A sweep
/// gets one `n{n}_seed{r}` directory per sample size and replicate; a single
/// run writes `data.csv` next to the truth files.
pub fn cmd_simulate(config: &SimulateConfig) -> Result<Vec<Replicate>> {
    config.validate()?;
    let g = match &config.generator {
        Some(path) => read_generator(path)?,
        None => random_staged_tree(
            &config.cardinalities,
            config.first_modeled,
            config.merge_prob,
            config.scheme,
            config.seed,
        )?,
    };
    let names: Vec<&str> = g.variables.iter().map(|v| v.name.as_str()).collect();
    let explicit = config.treatment.is_some() || config.outcome.is_some();
    let p = names.len();
    let treatment = config.treatment.as_deref().unwrap_or(names[p - 2]);
    let outcome = config.outcome.as_deref().unwrap_or(names[p - 1]);
    let truth = match truth(&g, treatment, outcome) {
        Ok(t) => Some(t),
        // the default pair may simply not be binary
        Err(Error::InvalidQuery(_)) if !explicit => None,
        Err(e) => return Err(e),
    };

    let dir = &config.output;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("simulate.toml"), config.to_toml()?)?;
    fs::write(dir.join("generating_tree.json"), to_tagged_json(GENERATOR_SCHEMA, &g)?)?;
    if let Some(t) = &truth {
        fs::write(dir.join("truth.json"), to_tagged_json(TRUTH_SCHEMA, t)?)?;
    }

    let jobs: Vec<Replicate> = config
        .n
        .iter()
        .flat_map(|&n| {
            (0..config.replicates).map(move |r| {
                let path = if config.is_sweep() {
                    dir.join(format!("n{n}_seed{}", r + 1)).join("data.csv")
                } else {
                    dir.join("data.csv")
                };
                Replicate {
                    n,
                    replicate: r + 1,
                    seed: replicate_seed(config.seed, n, r),
                    path,
                }
            })
        })
        .collect();
    jobs.par_iter().try_for_each(|job| -> Result<()> {
        let data = sample_dataset(&g, job.n, job.seed)?;
        if let Some(parent) = job.path.parent() {
            fs::create_dir_all(parent)?;
        }
        data.write_csv(fs::File::create(&job.path)?)
    })?;
    if config.is_sweep() {
        let mut index = String::from("n,replicate,seed,path\n");
        for j in &jobs {
            let rel = j.path.strip_prefix(dir).unwrap_or(&j.path);
            index.push_str(&format!("{},{},{},{}\n", j.n, j.replicate, j.seed, rel.display()));
        }
        fs::write(dir.join("replicates.csv"), index)?;
    }
    Ok(jobs)
}
