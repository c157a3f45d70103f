//! Posterior summaries of sampled partitions: pairwise dissimilarities,
//! loss-minimizing point estimates and credible balls.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::priors::SymmetricMatrix;

/// Relative tolerance under which two expected losses count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Variation of information, in nats.
    #[default]
    Vi,
    /// Binder loss: share of context pairs on which the partitions disagree.
    Binder,
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Vi => "vi",
            Loss::Binder => "binder",
        })
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vi" => Ok(Loss::Vi),
            "binder" => Ok(Loss::Binder),
            other => Err(Error::Parse(format!("unknown loss `{other}` (expected vi or binder)"))),
        }
    }
}

/// Posterior probability that two contexts are in different stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    pub depth: usize,
    pub matrix: SymmetricMatrix,
}

pub fn coclustering(depth: usize, samples: &[Partition]) -> Result<DissimilarityMatrix> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let n = first.n_items();
    let mut apart = vec![0usize; n * n];
    for s in samples {
        if s.n_items() != n {
            return Err(Error::SizeMismatch(s.n_items(), n));
        }
        for k in 0..n {
            for l in k + 1..n {
                if !s.same_block(k, l) {
                    apart[k * n + l] += 1;
                }
            }
        }
    }
    let r = samples.len() as f64;
    Ok(DissimilarityMatrix {
        depth,
        matrix: SymmetricMatrix::from_fn(n, |k, l| apart[k * n + l] as f64 / r),
    })
}

/// Items counted, block sizes under each labeling, and joint block counts.
type Contingency = (usize, Vec<usize>, Vec<usize>, BTreeMap<(usize, usize), usize>);

/// Joint and marginal block counts of two labelings over the items where
/// both are defined (`None` marks an unallocated item).
fn contingency(a: &[Option<usize>], b: &[usize]) -> Contingency {
    let mut ca: Vec<usize> = Vec::new();
    let mut cb: Vec<usize> = Vec::new();
    let mut joint = BTreeMap::new();
    let mut m = 0;
    for (x, &y) in a.iter().zip(b) {
        let Some(x) = *x else { continue };
        m += 1;
        if ca.len() <= x {
            ca.resize(x + 1, 0);
        }
        if cb.len() <= y {
            cb.resize(y + 1, 0);
        }
        ca[x] += 1;
        cb[y] += 1;
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    (m, ca, cb, joint)
}

fn plogp_sum<'a>(counts: impl Iterator<Item = &'a usize>, m: f64) -> f64 {
    counts
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / m;
            -p * p.ln()
        })
        .sum()
}

fn vi_partial(a: &[Option<usize>], b: &[usize]) -> f64 {
    let (m, ca, cb, joint) = contingency(a, b);
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    let hab = plogp_sum(joint.values(), m);
    (2.0 * hab - plogp_sum(ca.iter(), m) - plogp_sum(cb.iter(), m)).max(0.0)
}

fn binder_partial(a: &[Option<usize>], b: &[usize]) -> f64 {
    let idx: Vec<usize> = (0..a.len()).filter(|&i| a[i].is_some()).collect();
    let m = idx.len();
    if m < 2 {
        return 0.0;
    }
    let mut discordant = 0usize;
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            if (a[i] == a[j]) != (b[i] == b[j]) {
                discordant += 1;
            }
        }
    }
    discordant as f64 / (m * (m - 1) / 2) as f64
}

fn partial_loss(loss: Loss, a: &[Option<usize>], b: &[usize]) -> f64 {
    match loss {
        Loss::Vi => vi_partial(a, b),
        Loss::Binder => binder_partial(a, b),
    }
}

fn check_sizes(p1: &Partition, p2: &Partition) -> Result<()> {
    if p1.n_items() != p2.n_items() {
        return Err(Error::SizeMismatch(p1.n_items(), p2.n_items()));
    }
    Ok(())
}

fn full(p: &Partition) -> Vec<Option<usize>> {
    p.labels().iter().map(|&l| Some(l)).collect()
}

/// Variation of information `H(p1) + H(p2) - 2 I(p1, p2)` in nats.
pub fn vi_distance(p1: &Partition, p2: &Partition) -> Result<f64> {
    check_sizes(p1, p2)?;
    Ok(vi_partial(&full(p1), p2.labels()))
}

/// Fraction of item pairs together in one partition and apart in the other.
pub fn binder_distance(p1: &Partition, p2: &Partition) -> Result<f64> {
    check_sizes(p1, p2)?;
    Ok(binder_partial(&full(p1), p2.labels()))
}

pub fn distance(loss: Loss, p1: &Partition, p2: &Partition) -> Result<f64> {
    match loss {
        Loss::Vi => vi_distance(p1, p2),
        Loss::Binder => binder_distance(p1, p2),
    }
}

/// Distinct sampled partitions with their sample shares, in canonical order.
pub fn weighted_samples(samples: &[Partition]) -> Result<Vec<(Partition, f64)>> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let mut counts: BTreeMap<&Partition, usize> = BTreeMap::new();
    for s in samples {
        check_sizes(first, s)?;
        *counts.entry(s).or_insert(0) += 1;
    }
    let r = samples.len() as f64;
    Ok(counts.into_iter().map(|(p, c)| (p.clone(), c as f64 / r)).collect())
}

fn expected_partial(loss: Loss, candidate: &[Option<usize>], weighted: &[(Partition, f64)]) -> f64 {
    weighted
        .iter()
        .map(|(p, w)| w * partial_loss(loss, candidate, p.labels()))
        .sum()
}

/// Monte Carlo posterior expected loss `(1/R) sum_r L(samples[r], candidate)`.
pub fn expected_loss(loss: Loss, candidate: &Partition, samples: &[Partition]) -> Result<f64> {
    let weighted = weighted_samples(samples)?;
    check_sizes(candidate, &weighted[0].0)?;
    Ok(expected_partial(loss, &full(candidate), &weighted))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Cap on reallocation sweeps per restart.
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_sweeps: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub partition: Partition,
    pub loss: Loss,
    pub expected_loss: f64,
}

fn better(a: (f64, &Partition), b: (f64, &Partition)) -> bool {
    let tol = TIE_TOL * a.0.abs().max(b.0.abs()).max(1.0);
    if (a.0 - b.0).abs() <= tol {
        a.1 < b.1
    } else {
        a.0 < b.0
    }
}

/// One greedy restart: sequential allocation in a random order, then
/// reallocation sweeps until no single move lowers the expected loss.
fn greedy(loss: Loss, weighted: &[(Partition, f64)], n: usize, max_sweeps: usize, rng: &mut ChaCha8Rng) -> Partition {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut n_blocks = 0usize;
    for &item in &order {
        let mut best = (f64::INFINITY, 0usize);
        for b in 0..=n_blocks {
            labels[item] = Some(b);
            let v = expected_partial(loss, &labels, weighted);
            if v < best.0 - TIE_TOL * v.abs().max(1.0) {
                best = (v, b);
            }
        }
        labels[item] = Some(best.1);
        if best.1 == n_blocks {
            n_blocks += 1;
        }
    }
    let mut current = expected_partial(loss, &labels, weighted);
    for _ in 0..max_sweeps {
        let mut improved = false;
        for &item in &order {
            let own = labels[item].expect("allocated");
            let mut best = (current, own);
            for b in 0..=n_blocks {
                if b == own {
                    continue;
                }
                labels[item] = Some(b);
                let v = expected_partial(loss, &labels, weighted);
                if v < best.0 - TIE_TOL * best.0.abs().max(1.0) {
                    best = (v, b);
                }
            }
            labels[item] = Some(best.1);
            if best.1 != own {
                improved = true;
                current = best.0;
                let relabeled = Partition::from_labels(&labels.iter().map(|l| l.expect("allocated")).collect::<Vec<_>>());
                n_blocks = relabeled.n_blocks();
                labels = relabeled.labels().iter().map(|&l| Some(l)).collect();
            }
        }
        if !improved {
            break;
        }
    }
    Partition::from_labels(&labels.iter().map(|l| l.expect("allocated")).collect::<Vec<_>>())
}

/// Partition minimizing the posterior expected loss, searched greedily from
/// several random restarts with every distinct sample also a candidate. Ties
/// go to the lexicographically smallest canonical labeling.
pub fn point_estimate(samples: &[Partition], loss: Loss, config: &SearchConfig) -> Result<PointEstimate> {
    let weighted = weighted_samples(samples)?;
    let n = weighted[0].0.n_items();
    let mut candidates: Vec<Partition> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            greedy(loss, &weighted, n, config.max_sweeps, &mut rng)
        })
        .collect();
    candidates.extend(weighted.iter().map(|(p, _)| p.clone()));
    candidates.sort();
    candidates.dedup();
    let scored: Vec<(f64, Partition)> = candidates
        .into_par_iter()
        .map(|c| (expected_partial(loss, &full(&c), &weighted), c))
        .collect();
    let (expected_loss, partition) = scored
        .into_iter()
        .reduce(|a, b| if better((b.0, &b.1), (a.0, &a.1)) { b } else { a })
        .expect("at least one candidate");
    Ok(PointEstimate {
        partition,
        loss,
        expected_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBall {
    pub center: Partition,
    pub loss: Loss,
    pub level: f64,
    pub radius: f64,
    /// Sample share within the radius.
    pub coverage: f64,
    /// In-ball partitions with the fewest blocks.
    pub vertical_upper: Vec<Partition>,
    /// In-ball partitions with the most blocks.
    pub vertical_lower: Vec<Partition>,
    /// In-ball partitions farthest from the center.
    pub horizontal: Vec<Partition>,
}

/// Smallest ball around `center`, at sample resolution, holding at least
/// `level` of the sampled partitions.
pub fn credible_ball(samples: &[Partition], center: &Partition, loss: Loss, level: f64) -> Result<CredibleBall> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidQuery(format!("credible level must be in (0, 1], got {level}")));
    }
    let weighted = weighted_samples(samples)?;
    check_sizes(center, &weighted[0].0)?;
    let mut by_distance: Vec<(f64, &Partition, f64)> = weighted
        .iter()
        .map(|(p, w)| Ok((distance(loss, center, p)?, p, *w)))
        .collect::<Result<_>>()?;
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    // sample shares are multiples of 1/R; compare counts to dodge rounding
    let r = samples.len() as f64;
    let needed = (level * r - 1e-9).ceil();
    let mut covered = 0.0;
    let mut radius = 0.0;
    for &(d, _, w) in &by_distance {
        covered += (w * r).round();
        radius = d;
        if covered >= needed {
            break;
        }
    }
    let eps = 1e-12 * radius.max(1.0);
    let inside: Vec<(f64, &Partition, f64)> = by_distance.into_iter().filter(|(d, _, _)| *d <= radius + eps).collect();
    let coverage = inside.iter().map(|(_, _, w)| (w * r).round()).sum::<f64>() / r;
    let min_blocks = inside.iter().map(|(_, p, _)| p.n_blocks()).min().expect("nonempty ball");
    let max_blocks = inside.iter().map(|(_, p, _)| p.n_blocks()).max().expect("nonempty ball");
    let max_dist = inside.iter().map(|(d, _, _)| *d).fold(0.0, f64::max);
    let collect = |keep: &dyn Fn(&(f64, &Partition, f64)) -> bool| {
        let mut out: Vec<Partition> = inside.iter().filter(|x| keep(x)).map(|(_, p, _)| (*p).clone()).collect();
        out.sort();
        out.dedup();
        out
    };
    Ok(CredibleBall {
        center: center.clone(),
        loss,
        level,
        radius,
        coverage,
        vertical_upper: collect(&|(_, p, _)| p.n_blocks() == min_blocks),
        vertical_lower: collect(&|(_, p, _)| p.n_blocks() == max_blocks),
        horizontal: collect(&|(d, _, _)| (*d - max_dist).abs() <= eps),
    })
}
