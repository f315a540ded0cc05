//! Diagnostics over scores, selections and embedding similarity.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::Embeddings;
use crate::kernel;
use crate::rng::StageRng;
use crate::scalar::Scalar;
use crate::selectors::SelectionPlan;
use crate::separability::ScoreTable;
use crate::{Error, Result};

const SIMILARITY_STREAM: &str = "report/similarity";

/// Fixed-width histogram over `[lo, hi]`; `hi` itself lands in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_count: usize,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bin_count: usize) -> Result<Self> {
        if bin_count == 0 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidParameter(format!(
                "histogram [{lo}, {hi}] with {bin_count} bins"
            )));
        }
        Ok(Histogram {
            lo,
            hi,
            bin_count,
            counts: vec![0; bin_count],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let t = (x - self.lo) / (self.hi - self.lo) * self.bin_count as f64;
        Some((t as usize).min(self.bin_count - 1))
    }

    pub fn add(&mut self, x: f64) {
        match self.bin_of(x) {
            Some(b) => self.counts[b] += 1,
            None if x < self.lo => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let mut count = 0;
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        (count > 0).then(|| Stats {
            count,
            mean: sum / count as f64,
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub overall: Stats,
    pub per_language: BTreeMap<String, Stats>,
}

impl Breakdown {
    fn of<'a>(records: impl Iterator<Item = &'a crate::ScoreRecord> + Clone) -> Option<Self> {
        let overall = Stats::of(records.clone().map(|r| r.s))?;
        let mut by_lang: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in records {
            by_lang.entry(r.lang.clone()).or_default().push(r.s);
        }
        Some(Breakdown {
            overall,
            per_language: by_lang
                .into_iter()
                .map(|(l, v)| (l, Stats::of(v.into_iter()).expect("non-empty")))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub full: Breakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<Breakdown>,
}

/// Mean/min/max of `s` overall and per language, for the whole table and,
/// when a non-empty plan is given, for its selection.
pub fn score_summary(scores: &ScoreTable, plan: Option<&SelectionPlan>) -> Result<ScoreSummary> {
    let full = Breakdown::of(scores.records.iter())
        .ok_or_else(|| Error::InvalidParameter("empty score table".into()))?;
    let selected = match plan {
        Some(plan) if !plan.is_empty() => {
            let index: HashMap<&str, usize> = scores
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| (r.id.as_str(), i))
                .collect();
            let rows = plan
                .selected
                .iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::UnknownId(id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            Breakdown::of(rows.iter().map(|&i| &scores.records[i]))
        }
        _ => None,
    };
    Ok(ScoreSummary { full, selected })
}

/// Histogram of `s` over [−1, 1].
pub fn score_histogram(scores: &ScoreTable, bins: usize) -> Result<Histogram> {
    let mut h = Histogram::new(-1.0, 1.0, bins)?;
    for r in &scores.records {
        h.add(r.s);
    }
    Ok(h)
}

/// One histogram of `s` per language.
pub fn score_histograms_by_language(
    scores: &ScoreTable,
    bins: usize,
) -> Result<BTreeMap<String, Histogram>> {
    let mut out: BTreeMap<String, Histogram> = BTreeMap::new();
    for r in &scores.records {
        if !out.contains_key(&r.lang) {
            out.insert(r.lang.clone(), Histogram::new(-1.0, 1.0, bins)?);
        }
        out.get_mut(&r.lang).expect("inserted").add(r.s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDistribution {
    pub metric: String,
    pub subset_size: usize,
    pub pairs: u64,
    /// Every unordered pair was used, so the result does not depend on the seed.
    pub exhaustive: bool,
    pub histogram: Histogram,
}

/// Pair `p` of the row-major upper triangle of an `n`×`n` matrix.
fn decode_pairs(n: usize, sorted: &[u64]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sorted.len());
    let (mut i, mut row_start) = (0usize, 0u64);
    for &p in sorted {
        while p >= row_start + (n - 1 - i) as u64 {
            row_start += (n - 1 - i) as u64;
            i += 1;
        }
        out.push((i, i + 1 + (p - row_start) as usize));
    }
    out
}

/// Distinct uniform sample of `m` integers from `0..total` (Floyd), sorted.
fn sample_pair_indices(total: u64, m: u64, rng: &mut StageRng) -> Vec<u64> {
    let mut chosen = HashSet::with_capacity(m as usize);
    for j in total - m..total {
        let t = rng.below(j + 1);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut v: Vec<u64> = chosen.into_iter().collect();
    v.sort_unstable();
    v
}

/// Cosine similarities of `min(max_pairs, C(n, 2))` distinct unordered pairs
/// of `subset`, binned over [−1, 1]. With a budget covering every pair, all
/// pairs are enumerated and no randomness is used.
pub fn similarity_distribution<T: Scalar>(
    matrix: &Embeddings<T>,
    corpus: &Corpus,
    subset: &[usize],
    max_pairs: u64,
    seed: u64,
    bins: usize,
) -> Result<SimilarityDistribution> {
    let n = subset.len();
    if n < 2 {
        return Err(Error::SubsetTooSmall);
    }
    if let Some(&r) = subset.iter().find(|&&r| matrix.sq_norms()[r] == 0.0) {
        return Err(Error::ZeroNorm(corpus.sample(r).id.clone()));
    }
    let mut histogram = Histogram::new(-1.0, 1.0, bins)?;
    let total = n as u64 * (n as u64 - 1) / 2;
    let exhaustive = max_pairs >= total;
    let pairs: Vec<(usize, usize)> = if exhaustive {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = StageRng::new(seed, SIMILARITY_STREAM);
        decode_pairs(n, &sample_pair_indices(total, max_pairs, &mut rng))
    };
    let norms: Vec<f64> = subset
        .iter()
        .map(|&r| matrix.sq_norms()[r].sqrt())
        .collect();
    for &(i, j) in &pairs {
        let dot = kernel::dot(matrix.row(subset[i]), matrix.row(subset[j]));
        histogram.add((dot / (norms[i] * norms[j])).clamp(-1.0, 1.0));
    }
    Ok(SimilarityDistribution {
        metric: "cosine".into(),
        subset_size: n,
        pairs: pairs.len() as u64,
        exhaustive,
        histogram,
    })
}
