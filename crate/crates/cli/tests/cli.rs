use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use stagedtrees::causal::ThetaMode;
use stagedtrees::export::{from_tagged_json, EFFECTS_SCHEMA, POINT_ESTIMATE_SCHEMA, TRUTH_SCHEMA};
use stagedtrees::simulate::{random_staged_tree, sample_dataset, GeneratingTree, ProbScheme};
use stagedtrees::{ChainConfig, Loss};
use stagedtrees_cli::config::{CausalConfig, DataConfig, PriorConfig, SummaryConfig};
use stagedtrees_cli::fit::{EffectsReport, PointReport};
use stagedtrees_cli::simulate::Truth;
use stagedtrees_cli::{cmd_fit, cmd_report, cmd_simulate, RunConfig, SimulateConfig, MANIFEST_SCHEMA};

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Four binary variables; the last two are modeled.
fn write_data(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let g = random_staged_tree(&[2, 2, 2, 2], 2, 0.3, ProbScheme::ExpNormalized, seed).unwrap();
    let path = dir.join("data.csv");
    sample_dataset(&g, n, seed).unwrap().write_csv(fs::File::create(&path).unwrap()).unwrap();
    path
}

fn run_config(data: PathBuf, output: PathBuf) -> RunConfig {
    RunConfig {
        output,
        data: DataConfig {
            path: data,
            ordering: names(&["X0", "X1", "X2", "X3"]),
            modeled: names(&["X2", "X3"]),
            covariates: Vec::new(),
            levels: ["X0", "X1", "X2", "X3"].iter().map(|v| (v.to_string(), names(&["0", "1"]))).collect(),
        },
        causal: Some(CausalConfig {
            treatment: "X2".into(),
            outcome: "X3".into(),
            treated_level: None,
            positive_level: None,
            theta: ThetaMode::PosteriorMean,
        }),
        prior: PriorConfig::default(),
        chain: ChainConfig {
            iterations: 600,
            burn_in: 100,
            thin: 5,
            seed: 11,
            ..ChainConfig::default()
        },
        summary: SummaryConfig::default(),
    }
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stagedtrees"))
}

#[test]
fn run_config_round_trips_through_toml() {
    let mut c = run_config("in.csv".into(), "out".into());
    assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);

    c.causal = None;
    c.data.covariates = names(&["age"]);
    c.data.levels = BTreeMap::from([("X0".into(), names(&["lo", "hi"]))]);
    c.prior.lambda = Some(vec![0.5]);
    c.prior.kappa = 0.125;
    c.summary.loss = Loss::Binder;
    c.summary.level = 0.9;
    assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
}

#[test]
fn partial_config_takes_defaults() {
    let text = r#"
output = "out"
[data]
path = "d.csv"
ordering = ["A", "B"]
modeled = ["B"]
[chain]
seed = 3
"#;
    let c = RunConfig::from_toml(text).unwrap();
    assert_eq!(c.chain.seed, 3);
    assert_eq!(c.chain.iterations, ChainConfig::default().iterations);
    assert_eq!(c.summary, SummaryConfig::default());
    assert!(RunConfig::from_toml(&text.replace("seed = 3", "sed = 3")).is_err());
}

#[test]
fn rerun_from_saved_config_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 400, 5);
    let first = run_config(data, tmp.path().join("a"));
    let m1 = cmd_fit(&first).unwrap();

    let mut again = RunConfig::from_path(&tmp.path().join("a/config.toml")).unwrap();
    again.output = tmp.path().join("b");
    let m2 = cmd_fit(&again).unwrap();

    assert_eq!(m1.config_hash, m2.config_hash);
    assert_eq!(m1.artifacts, m2.artifacts);
    for name in &m1.artifacts {
        if name == "config.toml" {
            continue;
        }
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs between reruns");
    }
    for expected in [
        "samples.txt",
        "samples.json",
        "dissimilarity_depth2.csv",
        "dissimilarity_depth3.csv",
        "point_estimate.json",
        "staged_tree.dot",
        "credible_ball.json",
        "effects.json",
        "effect_draws.csv",
    ] {
        assert!(m1.artifacts.iter().any(|a| a == expected), "missing {expected}");
    }
    let manifest = fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap();
    assert!(manifest.contains(MANIFEST_SCHEMA));
    assert!(manifest.contains(&m1.config_hash));
}

#[test]
fn missing_treatment_column_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 50, 1);
    let mut c = run_config(data, tmp.path().join("out"));
    c.causal.as_mut().unwrap().treatment = "ghost".into();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    let status = binary().args(["fit", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!tmp.path().join("out/manifest.json").exists());
}

#[test]
fn missing_data_file_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let c = run_config(tmp.path().join("absent.csv"), tmp.path().join("out"));
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    let status = binary().args(["fit", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn flags_override_config_values() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 200, 2);
    let c = run_config(data, tmp.path().join("ignored"));
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    let out = tmp.path().join("flagged");
    let status = binary()
        .args(["--threads", "2", "fit", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&out)
        .args(["--seed", "99", "--loss", "binder", "--iterations", "300"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(!tmp.path().join("ignored").exists());
    let saved = RunConfig::from_path(&out.join("config.toml")).unwrap();
    assert_eq!(saved.chain.seed, 99);
    assert_eq!(saved.chain.iterations, 300);
    assert_eq!(saved.summary.loss, Loss::Binder);
}

fn sim_config(output: PathBuf) -> SimulateConfig {
    SimulateConfig {
        output,
        cardinalities: vec![2; 5],
        first_modeled: 3,
        merge_prob: 0.0,
        scheme: ProbScheme::ExpNormalized,
        generator: None,
        n: vec![300],
        replicates: 1,
        seed: 8,
        treatment: None,
        outcome: None,
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// ATE by summing the full joint distribution of the generating tree.
fn brute_force_ate(g: &GeneratingTree) -> f64 {
    let p = g.variables.len();
    let mut joint: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for code in 0..(1usize << p) {
        let x: Vec<usize> = (0..p).map(|i| (code >> (p - 1 - i)) & 1).collect();
        let mut prob = 1.0;
        for i in 0..p {
            let rank = x[..i].iter().fold(0, |acc, &v| acc * 2 + v);
            prob *= g.prob(i, rank, x[i]);
        }
        joint.insert(x, prob);
    }
    let mut ate = 0.0;
    for z in 0..(1usize << (p - 2)) {
        let zv: Vec<usize> = (0..p - 2).map(|i| (z >> (p - 3 - i)) & 1).collect();
        let cell = |t: usize, y: usize| {
            let mut k = zv.clone();
            k.extend([t, y]);
            joint[&k]
        };
        let pz: f64 = (0..2).flat_map(|t| (0..2).map(move |y| (t, y))).map(|(t, y)| cell(t, y)).sum();
        let y_given = |t: usize| cell(t, 1) / (cell(t, 0) + cell(t, 1));
        ate += pz * (y_given(1) - y_given(0));
    }
    ate
}

#[test]
fn simulate_writes_truth_matching_joint_enumeration() {
    let tmp = tempfile::tempdir().unwrap();
    let c = sim_config(tmp.path().join("sim"));
    cmd_simulate(&c).unwrap();
    let dir = tmp.path().join("sim");
    let g = stagedtrees_cli::simulate::read_generator(&dir.join("generating_tree.json")).unwrap();
    let truth: Truth = from_tagged_json(TRUTH_SCHEMA, &fs::read_to_string(dir.join("truth.json")).unwrap()).unwrap();
    assert_eq!((truth.treatment.as_str(), truth.outcome.as_str()), ("X3", "X4"));
    assert!((truth.ate - brute_force_ate(&g)).abs() < 1e-12);
    let text = fs::read_to_string(dir.join("data.csv")).unwrap();
    assert_eq!(text.lines().count(), 301);
    assert_eq!(text.lines().next().unwrap(), "X0,X1,X2,X3,X4");
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sim_config(tmp.path().join("one"));
    c.n = vec![100, 200];
    c.replicates = 2;
    cmd_simulate(&c).unwrap();
    c.output = tmp.path().join("two");
    cmd_simulate(&c).unwrap();
    let one = dir_bytes(&tmp.path().join("one"));
    let two = dir_bytes(&tmp.path().join("two"));
    let differs: Vec<_> = one
        .iter()
        .filter(|(k, v)| two.get(*k) != Some(*v) && !k.ends_with("simulate.toml"))
        .map(|(k, _)| k)
        .collect();
    assert!(differs.is_empty(), "{differs:?}");
    assert_eq!(one.len(), two.len());
}

#[test]
fn sweep_emits_one_directory_per_size_and_replicate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sim_config(tmp.path().join("sweep"));
    c.n = vec![500, 1000, 2500, 5000];
    c.replicates = 3;
    let jobs = cmd_simulate(&c).unwrap();
    assert_eq!(jobs.len(), 12);
    let dir = tmp.path().join("sweep");
    let subdirs: BTreeSet<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    let expected: BTreeSet<String> = [500, 1000, 2500, 5000]
        .iter()
        .flat_map(|n| (1..=3).map(move |r| format!("n{n}_seed{r}")))
        .collect();
    assert_eq!(subdirs, expected);
    for n in [500usize, 5000] {
        let rows = fs::read_to_string(dir.join(format!("n{n}_seed2/data.csv"))).unwrap().lines().count();
        assert_eq!(rows, n + 1);
    }
    assert!(dir.join("truth.json").exists() && dir.join("replicates.csv").exists());
    let seeds: BTreeSet<u64> = jobs.iter().map(|j| j.seed).collect();
    assert_eq!(seeds.len(), 12);
}

#[test]
fn simulate_rejects_bad_merge_probability() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sim_config(tmp.path().join("bad"));
    c.merge_prob = 1.5;
    assert!(cmd_simulate(&c).is_err());
    let cfg = tmp.path().join("sim.toml");
    fs::write(&cfg, c.to_toml().unwrap()).unwrap();
    let status = binary().args(["simulate", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

fn parse_cate_rows(report: &str) -> Vec<Vec<String>> {
    report
        .lines()
        .skip_while(|l| !l.starts_with("profile"))
        .skip(1)
        .take_while(|l| l.contains(" | "))
        .map(|l| l.split(" | ").map(|c| c.trim().to_string()).collect())
        .collect()
}

#[test]
fn report_columns_match_effects_json() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 500, 3);
    let c = run_config(data, tmp.path().join("fit"));
    cmd_fit(&c).unwrap();
    let dir = tmp.path().join("fit");
    let report = cmd_report(&dir).unwrap();
    let effects: EffectsReport =
        from_tagged_json(EFFECTS_SCHEMA, &fs::read_to_string(dir.join("effects.json")).unwrap()).unwrap();
    let point: PointReport =
        from_tagged_json(POINT_ESTIMATE_SCHEMA, &fs::read_to_string(dir.join("point_estimate.json")).unwrap()).unwrap();

    let rows = parse_cate_rows(&report);
    assert_eq!(rows.len(), effects.cate.len());
    assert_eq!(rows.len(), 4);
    for (row, cate) in rows.iter().zip(&effects.cate) {
        let s = &cate.summary;
        let expected: Vec<String> = std::iter::once(cate.profile.clone())
            .chain([s.mean, s.sd, s.p_positive, s.p_zero, s.p_negative].iter().map(|v| format!("{v:.4}")))
            .collect();
        assert_eq!(row, &expected);
    }
    for d in &point.depths {
        assert!(report.contains(&format!("{} (depth {}): {} of", d.variable, d.depth, d.n_stages)));
    }
    for s in &point.independences {
        assert!(report.contains(s.as_str()));
    }
}

#[test]
fn structural_zero_posterior_reports_certain_null_effects() {
    // the outcome ignores every earlier variable and a tiny kappa makes one
    // stage overwhelmingly likely at each depth
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::from("X0,X1,X2,X3\n");
    for r in 0..400usize {
        text.push_str(&format!("{},{},{},{}\n", r % 2, (r / 2) % 2, (r / 4) % 2, usize::from(r % 7 < 3)));
    }
    let data = tmp.path().join("data.csv");
    fs::write(&data, text).unwrap();
    let mut c = run_config(data, tmp.path().join("fit"));
    c.prior.kappa = 1e-8;
    cmd_fit(&c).unwrap();
    let report = cmd_report(&tmp.path().join("fit")).unwrap();
    let rows = parse_cate_rows(&report);
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row[1..], ["0.0000", "0.0000", "0.0000", "1.0000", "0.0000"]);
    }
}

#[test]
fn report_without_fit_fails() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(cmd_report(tmp.path()).is_err());
    let status = binary().arg("report").arg(tmp.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn dot_has_one_color_class_per_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path(), 600, 4);
    let c = run_config(data, tmp.path().join("fit"));
    cmd_fit(&c).unwrap();
    let dir = tmp.path().join("fit");
    let dot = fs::read_to_string(dir.join("staged_tree.dot")).unwrap();
    let point: PointReport =
        from_tagged_json(POINT_ESTIMATE_SCHEMA, &fs::read_to_string(dir.join("point_estimate.json")).unwrap()).unwrap();

    let mut class_color: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut nodes_per_class: BTreeMap<String, usize> = BTreeMap::new();
    for line in dot.lines().filter(|l| l.contains("class=\"stage-")) {
        let attr = |key: &str| line.split(&format!("{key}=\"")).nth(1).unwrap().split('"').next().unwrap().to_string();
        let class = attr("class");
        class_color.entry(class.clone()).or_default().insert(attr("fillcolor"));
        *nodes_per_class.entry(class).or_default() += 1;
    }
    for d in &point.depths {
        let prefix = format!("stage-{}-", d.depth);
        let classes: Vec<&String> = class_color.keys().filter(|k| k.starts_with(&prefix)).collect();
        assert_eq!(classes.len(), d.n_stages, "depth {}", d.depth);
        let colors: BTreeSet<&String> = classes.iter().flat_map(|c| &class_color[*c]).collect();
        assert_eq!(colors.len(), d.n_stages);
        for (s, size) in d.stages.block_sizes().iter().enumerate() {
            assert_eq!(nodes_per_class[&format!("{prefix}{}", s + 1)], *size);
        }
    }
    assert!(class_color.values().all(|c| c.len() == 1));
}
