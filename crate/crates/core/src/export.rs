//! File formats: sample sets (text and JSON), dissimilarity tables (CSV),
//! staged trees (DOT) and schema-tagged JSON reports.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::causal::EffectPosterior;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::sampler::{DepthSamples, PosteriorSampleSet, Provenance};
use crate::summaries::DissimilarityMatrix;
use crate::tree::EventTree;

pub const SAMPLES_SCHEMA: &str = "stagedtrees.samples/v1";
pub const POINT_ESTIMATE_SCHEMA: &str = "stagedtrees.point-estimate/v1";
pub const CREDIBLE_BALL_SCHEMA: &str = "stagedtrees.credible-ball/v1";
pub const EFFECTS_SCHEMA: &str = "stagedtrees.effects/v1";
pub const GENERATOR_SCHEMA: &str = "stagedtrees.generating-tree/v1";
pub const TRUTH_SCHEMA: &str = "stagedtrees.truth/v1";
pub const DISSIMILARITY_SCHEMA: &str = "stagedtrees.dissimilarity/v1";
pub const DOT_SCHEMA: &str = "stagedtrees.dot/v1";

/// A JSON document with a `schema` tag next to the body's fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub schema: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Tagged<T> {
    pub fn new(schema: &str, body: T) -> Self {
        Self {
            schema: schema.to_string(),
            body,
        }
    }
}

pub fn to_tagged_json<T: Serialize>(schema: &str, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Tagged::new(schema, body))?;
    s.push('\n');
    Ok(s)
}

/// Parses a tagged document, checking the schema tag.
pub fn from_tagged_json<T: for<'de> Deserialize<'de>>(schema: &str, text: &str) -> Result<T> {
    let doc: Tagged<T> = serde_json::from_str(text)?;
    if doc.schema != schema {
        return Err(Error::Parse(format!("expected schema `{schema}`, found `{}`", doc.schema)));
    }
    Ok(doc.body)
}

/// Line-oriented sample file: a header, then per depth a `depth` line
/// followed by one line of 1-based stage labels per retained draw.
///
/// ```text
/// # stagedtrees.samples/v1
/// seed 7
/// depth 2 contexts 4 samples 2 acceptance 0.25
/// 1 2 1 3
/// 1 1 1 2
/// ```
pub fn write_samples_text<W: Write>(set: &PosteriorSampleSet, mut w: W) -> Result<()> {
    writeln!(w, "# {SAMPLES_SCHEMA}")?;
    writeln!(w, "seed {}", set.provenance.seed)?;
    if let Some(h) = &set.provenance.config_hash {
        writeln!(w, "config {h}")?;
    }
    for d in &set.depths {
        writeln!(
            w,
            "depth {} contexts {} samples {} acceptance {}",
            d.depth,
            d.n_contexts,
            d.samples.len(),
            d.split_merge_acceptance
        )?;
        for p in &d.samples {
            writeln!(w, "{p}")?;
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("samples line {line}: {msg}"))
}

pub fn read_samples_text<R: BufRead>(r: R) -> Result<PosteriorSampleSet> {
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == format!("# {SAMPLES_SCHEMA}") => {}
        Some((_, Ok(l))) => return Err(parse_err(1, format!("unexpected header `{l}`"))),
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(parse_err(1, "empty file")),
    }
    let mut provenance = Provenance {
        seed: 0,
        config_hash: None,
    };
    let mut depths: Vec<DepthSamples> = Vec::new();
    let mut expected = 0usize;
    for (i, line) in lines {
        let line = line?;
        let no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first().copied() {
            None => continue,
            Some("seed") if fields.len() == 2 => {
                provenance.seed = fields[1].parse().map_err(|e| parse_err(no, e))?;
            }
            Some("config") if fields.len() == 2 => provenance.config_hash = Some(fields[1].to_string()),
            Some("depth") => {
                if let Some(prev) = depths.last() {
                    if prev.samples.len() != expected {
                        return Err(parse_err(no, "previous depth has too few samples"));
                    }
                }
                if fields.len() != 8 || fields[2] != "contexts" || fields[4] != "samples" || fields[6] != "acceptance" {
                    return Err(parse_err(no, format!("malformed depth line `{line}`")));
                }
                let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(no, e));
                expected = num(fields[5])?;
                depths.push(DepthSamples {
                    depth: num(fields[1])?,
                    n_contexts: num(fields[3])?,
                    samples: Vec::with_capacity(expected),
                    split_merge_acceptance: fields[7].parse().map_err(|e| parse_err(no, e))?,
                });
            }
            Some(_) => {
                let d = depths.last_mut().ok_or_else(|| parse_err(no, "labels before any depth line"))?;
                let labels = fields
                    .iter()
                    .map(|f| f.parse::<usize>().map_err(|e| parse_err(no, e)))
                    .collect::<Result<Vec<_>>>()?;
                if labels.len() != d.n_contexts {
                    return Err(parse_err(no, format!("{} labels, expected {}", labels.len(), d.n_contexts)));
                }
                let p = Partition::from_one_based(&labels)?;
                if p.one_based() != labels {
                    return Err(parse_err(no, "labels are not canonical"));
                }
                if d.samples.len() == expected {
                    return Err(parse_err(no, "more samples than declared"));
                }
                d.samples.push(p);
            }
        }
    }
    if let Some(prev) = depths.last() {
        if prev.samples.len() != expected {
            return Err(parse_err(0, "last depth has too few samples"));
        }
    }
    Ok(PosteriorSampleSet { depths, provenance })
}

pub fn samples_json(set: &PosteriorSampleSet) -> Result<String> {
    to_tagged_json(SAMPLES_SCHEMA, set)
}

/// Context labels, one per context of `depth`.
pub fn context_labels(tree: &EventTree, depth: usize) -> Vec<String> {
    tree.contexts(depth).iter().map(|c| tree.context_label(c)).collect()
}

/// Square CSV table with context labels as header and first column.
pub fn write_dissimilarity_csv<W: Write>(tree: &EventTree, m: &DissimilarityMatrix, w: W) -> Result<()> {
    let labels = context_labels(tree, m.depth);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["context".to_string()];
    header.extend(labels.iter().cloned());
    out.write_record(&header)?;
    for (k, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..labels.len()).map(|l| format!("{}", m.matrix.get(k, l))));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// CSV of raw effect draws: one row per retained draw, ATE then one column
/// per profile.
pub fn write_effect_draws_csv<W: Write>(effects: &EffectPosterior, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["draw".to_string(), "ate".to_string()];
    header.extend(effects.cate.iter().map(|c| format!("cate[{}]", c.label)));
    out.write_record(&header)?;
    for (r, ate) in effects.ate.iter().enumerate() {
        let mut row = vec![(r + 1).to_string(), ate.to_string()];
        row.extend(effects.cate.iter().map(|c| c.draws[r].to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `#rrggbb` for a hue in `[0, 1)` at fixed saturation and value.
pub fn hsv_hex(hue: f64, saturation: f64, value: f64) -> String {
    let h = (hue.rem_euclid(1.0)) * 6.0;
    let c = value * saturation;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = value - c;
    let byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Distinct colors for `m` stages, evenly spaced in hue.
pub fn stage_colors(m: usize) -> Vec<String> {
    (0..m).map(|s| hsv_hex(s as f64 / m.max(1) as f64, 0.55, 0.95)).collect()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Staged tree in DOT. Every context of a modeled depth is filled with its
/// stage color and carries `class="stage-<depth>-<stage>"` (1-based stage);
/// other vertices are white. Leaves are small points.
pub fn staged_tree_dot(tree: &EventTree, stagings: &[(usize, Partition)]) -> String {
    let by_depth: BTreeMap<usize, &Partition> = stagings.iter().map(|(d, p)| (*d, p)).collect();
    let mut out = String::new();
    out.push_str(&format!("// {DOT_SCHEMA}\ndigraph staged_tree {{\n"));
    out.push_str("  rankdir=LR;\n  node [shape=circle, style=filled, fillcolor=\"#ffffff\", label=\"\", width=0.3];\n");
    for depth in 0..=tree.n_variables() {
        let n = tree.n_contexts(depth);
        let colors = by_depth.get(&depth).map(|p| (p, stage_colors(p.n_blocks())));
        for rank in 0..n {
            let id = format!("d{depth}_{rank}");
            if depth == tree.n_variables() {
                out.push_str(&format!("  {id} [shape=point, width=0.08];\n"));
                continue;
            }
            let values = tree.decode_context(rank, depth).expect("rank in range");
            let tooltip = dot_escape(&tree.context_label(&values));
            match &colors {
                Some((p, palette)) => {
                    let s = p.label(rank);
                    out.push_str(&format!(
                        "  {id} [fillcolor=\"{}\", class=\"stage-{depth}-{}\", tooltip=\"{tooltip}\"];\n",
                        palette[s],
                        s + 1
                    ));
                }
                None => out.push_str(&format!("  {id} [tooltip=\"{tooltip}\"];\n")),
            }
        }
    }
    for depth in 0..tree.n_variables() {
        let var = tree.variable(depth);
        for rank in 0..tree.n_contexts(depth) {
            for (x, level) in var.levels.iter().enumerate() {
                let child = rank * var.cardinality() + x;
                out.push_str(&format!(
                    "  d{depth}_{rank} -> d{}_{child} [label=\"{}\"];\n",
                    depth + 1,
                    dot_escape(level)
                ));
            }
        }
    }
    out.push_str("}\n");
    out
}
