use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stagedtrees::causal::EffectSummary;
use stagedtrees::export::{from_tagged_json, EFFECTS_SCHEMA, POINT_ESTIMATE_SCHEMA};
use stagedtrees::{Error, Result};

use crate::fit::{EffectsReport, PointReport};

/// Header of the CATE table; rows carry the same fields in this order.
pub const CATE_COLUMNS: [&str; 6] = ["profile", "mean", "sd", "P(>0)", "P(=0)", "P(<0)"];

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Parse(format!("{} is missing; run `fit` first", path.display())),
        _ => Error::Io(e),
    })
}

fn cells(s: &EffectSummary) -> [String; 5] {
    [s.mean, s.sd, s.p_positive, s.p_zero, s.p_negative].map(|v| format!("{v:.4}"))
}

/// Human-readable summary of a fit directory.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let point: PointReport = from_tagged_json(POINT_ESTIMATE_SCHEMA, &read(dir, "point_estimate.json")?)?;
    let effects: Option<EffectsReport> = if dir.join("effects.json").exists() {
        Some(from_tagged_json(EFFECTS_SCHEMA, &read(dir, "effects.json")?)?)
    } else {
        None
    };
    let mut out = String::new();
    // writing to a String cannot fail
    let _ = writeln!(out, "Stages per depth ({} point estimate)", point.loss);
    for d in &point.depths {
        let _ = writeln!(
            out,
            "  {} (depth {}): {} of {} contexts, expected loss {:.4}",
            d.variable,
            d.depth,
            d.n_stages,
            d.contexts.len(),
            d.expected_loss
        );
    }

    if let Some(e) = &effects {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Effect of {}={} on P({}={}), {} draws",
            e.treatment, e.treated_level, e.outcome, e.positive_level, e.draws
        );
        let a = &e.ate;
        let _ = writeln!(
            out,
            "ATE: mean {:.4}, sd {:.4}, {:.0}% interval ({:.4}, {:.4})",
            a.mean,
            a.sd,
            e.level * 100.0,
            a.lower,
            a.upper
        );
        let _ = writeln!(out);
        let rows: Vec<[String; 6]> = e
            .cate
            .iter()
            .map(|c| {
                let [m, s, p, z, n] = cells(&c.summary);
                [c.profile.clone(), m, s, p, z, n]
            })
            .collect();
        let width = rows
            .iter()
            .map(|r| r[0].chars().count())
            .chain([CATE_COLUMNS[0].len()])
            .max()
            .unwrap_or(0);
        let line = |r: &[String; 6]| {
            let mut s = format!("{:<width$}", r[0]);
            for c in &r[1..] {
                s.push_str(&format!(" | {c:>7}"));
            }
            s
        };
        let _ = writeln!(out, "{}", line(&CATE_COLUMNS.map(String::from)));
        for r in &rows {
            let _ = writeln!(out, "{}", line(r));
        }
        for w in &e.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Structural independences");
    if point.independences.is_empty() {
        let _ = writeln!(out, "  (none)");
    }
    for s in &point.independences {
        let _ = writeln!(out, "  {s}");
    }
    Ok(out)
}
