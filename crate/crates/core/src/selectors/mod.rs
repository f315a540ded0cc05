//! Pre-selection of the most language-separable samples and the downstream
//! selectors that refine the resulting pool.
//!
//! Selectors treat a pool as a set: they canonicalize its members to
//! ascending row order before drawing or ranking. A pool produced at
//! ρ = 100 therefore yields exactly the plan obtained on the whole corpus.

mod dsir;
mod external;
mod kmeans;
mod mtld;
mod preselect;
mod random;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use dsir::{
    dsir_fit, hashed_ngrams, select_dsir, DsirMode, FeatureModel, DEFAULT_ALPHA, DEFAULT_BUCKETS,
};
pub use external::{read_score_file, select_external};
pub use kmeans::{kmeans, select_kmeans_centroid, KMeansFit, KMeansOptions};
pub use mtld::{mtld_score, select_mtld, tokenize, TTR_THRESHOLD};
pub use preselect::{per_language_count, preselect_topk, round_half_up};
pub use random::select_random;

use crate::corpus::Corpus;
use crate::manifest::RunManifest;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolSource {
    /// Every corpus row.
    Corpus,
    /// Output of [`preselect_topk`].
    Preselect,
}

/// Candidate rows handed to a downstream selector.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub member_rows: Vec<usize>,
    pub rho_percent: f64,
    pub source: PoolSource,
}

impl Pool {
    pub fn full(corpus: &Corpus) -> Self {
        Pool {
            member_rows: (0..corpus.len()).collect(),
            rho_percent: 100.0,
            source: PoolSource::Corpus,
        }
    }

    pub fn len(&self) -> usize {
        self.member_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_rows.is_empty()
    }

    /// Members in ascending row order.
    pub fn canonical_rows(&self) -> Vec<usize> {
        let mut rows = self.member_rows.clone();
        rows.sort_unstable();
        rows
    }

    fn plan_rho(&self) -> Option<f64> {
        (self.source == PoolSource::Preselect).then_some(self.rho_percent)
    }

    pub fn write_jsonl(
        &self,
        corpus: &Corpus,
        manifest: Option<&RunManifest>,
        path: impl AsRef<Path>,
    ) -> Result<()> {
        let mut per_language: BTreeMap<&str, usize> = BTreeMap::new();
        for &r in &self.member_rows {
            *per_language.entry(&corpus.sample(r).lang).or_default() += 1;
        }
        let meta = serde_json::json!({
            "source": self.source,
            "rho_percent": self.rho_percent,
            "pool_size": self.len(),
            "per_language": per_language,
            "manifest": manifest,
        });
        let lines = self
            .member_rows
            .iter()
            .map(|&r| serde_json::json!({ "id": corpus.sample(r).id }));
        write_jsonl(path.as_ref(), &meta, lines)
    }

    pub fn read_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            source: PoolSource,
            rho_percent: f64,
            pool_size: usize,
        }
        #[derive(Deserialize)]
        struct Line {
            id: String,
        }
        let path = path.as_ref();
        let (meta, lines): (Meta, Vec<Line>) = read_jsonl(path)?;
        if lines.len() != meta.pool_size {
            return Err(Error::format(path, "pool_size disagrees with member count"));
        }
        let mut seen = HashSet::with_capacity(lines.len());
        let member_rows = lines
            .into_iter()
            .map(|l| {
                let row = corpus.row_of(&l.id).ok_or(Error::UnknownId(l.id.clone()))?;
                if !seen.insert(row) {
                    return Err(Error::format(path, format!("duplicate pool member {}", l.id)));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Pool {
            member_rows,
            rho_percent: meta.rho_percent,
            source: meta.source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rand,
    Kmc,
    Mtld,
    Dsir,
    External,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Rand,
        Strategy::Kmc,
        Strategy::Mtld,
        Strategy::Dsir,
        Strategy::External,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rand => "rand",
            Strategy::Kmc => "kmc",
            Strategy::Mtld => "mtld",
            Strategy::Dsir => "dsir",
            Strategy::External => "external",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Whether per-language quotas are applied when the caller does not say.
    pub fn stratified_by_default(self) -> bool {
        self == Strategy::Rand
    }
}

/// Requested selection size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSize {
    Fraction(f64),
    Count(usize),
}

impl TargetSize {
    /// Number of samples to select; fractions refer to the full corpus.
    pub fn resolve(self, corpus_len: usize) -> Result<usize> {
        match self {
            TargetSize::Count(0) => Err(Error::InvalidParameter("count must be positive".into())),
            TargetSize::Count(c) => Ok(c),
            TargetSize::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(round_half_up(f * corpus_len as f64).max(1))
            }
            TargetSize::Fraction(f) => Err(Error::InvalidParameter(format!(
                "fraction {f} outside (0, 1]"
            ))),
        }
    }
}

/// Ordered selection with its provenance. Rank is the position in
/// `selected`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPlan {
    pub strategy: Strategy,
    pub rho_percent: Option<f64>,
    pub seed: Option<u64>,
    pub size: TargetSize,
    pub stratified: bool,
    pub pool_size: usize,
    pub selected: Vec<String>,
    pub params: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct PlanMeta {
    strategy: Strategy,
    rho_percent: Option<f64>,
    seed: Option<u64>,
    fraction_or_count: TargetSize,
    stratified: bool,
    pool_size: usize,
    selected_count: usize,
    params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<Value>,
}

#[derive(Serialize, Deserialize)]
struct PlanLine {
    id: String,
    rank: usize,
}

impl SelectionPlan {
    fn new(strategy: Strategy, pool: &Pool, corpus: &Corpus, rows: &[usize]) -> Self {
        SelectionPlan {
            strategy,
            rho_percent: pool.plan_rho(),
            seed: None,
            size: TargetSize::Count(rows.len()),
            stratified: false,
            pool_size: pool.len(),
            selected: rows.iter().map(|&r| corpus.sample(r).id.clone()).collect(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Corpus rows of the selected ids, in rank order.
    pub fn rows(&self, corpus: &Corpus) -> Result<Vec<usize>> {
        self.selected
            .iter()
            .map(|id| corpus.row_of(id).ok_or_else(|| Error::UnknownId(id.clone())))
            .collect()
    }

    pub fn write_jsonl(&self, manifest: Option<&RunManifest>, path: impl AsRef<Path>) -> Result<()> {
        let meta = PlanMeta {
            strategy: self.strategy,
            rho_percent: self.rho_percent,
            seed: self.seed,
            fraction_or_count: self.size,
            stratified: self.stratified,
            pool_size: self.pool_size,
            selected_count: self.selected.len(),
            params: self.params.clone(),
            manifest: manifest.map(|m| serde_json::to_value(m).expect("manifest serializes")),
        };
        let lines = self
            .selected
            .iter()
            .enumerate()
            .map(|(rank, id)| PlanLine { id: id.clone(), rank });
        write_jsonl(path.as_ref(), &meta, lines)
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (meta, lines): (PlanMeta, Vec<PlanLine>) = read_jsonl(path)?;
        if lines.len() != meta.selected_count {
            return Err(Error::format(path, "selected_count disagrees with line count"));
        }
        let mut seen = HashSet::with_capacity(lines.len());
        for (i, l) in lines.iter().enumerate() {
            if l.rank != i {
                return Err(Error::format(path, format!("rank {} at position {i}", l.rank)));
            }
            if !seen.insert(l.id.as_str()) {
                return Err(Error::format(path, format!("duplicate id {}", l.id)));
            }
        }
        Ok(SelectionPlan {
            strategy: meta.strategy,
            rho_percent: meta.rho_percent,
            seed: meta.seed,
            size: meta.fraction_or_count,
            stratified: meta.stratified,
            pool_size: meta.pool_size,
            selected: lines.into_iter().map(|l| l.id).collect(),
            params: meta.params,
        })
    }
}

pub(crate) fn write_jsonl<M, L, I>(path: &Path, meta: &M, lines: I) -> Result<()>
where
    M: Serialize,
    L: Serialize,
    I: IntoIterator<Item = L>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, meta).map_err(|e| Error::format(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for l in lines {
        serde_json::to_writer(&mut w, &l).map_err(|e| Error::format(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_jsonl<M, L>(path: &Path) -> Result<(M, Vec<L>)>
where
    M: serde::de::DeserializeOwned,
    L: serde::de::DeserializeOwned,
{
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |n: usize, e: serde_json::Error| Error::format(path, format!("line {}: {e}", n + 1));
    let (n, first) = lines
        .next()
        .ok_or_else(|| Error::format(path, "missing metadata line"))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let meta = serde_json::from_str(&first).map_err(|e| parse_err(n, e))?;
    let mut out = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(n, e))?);
    }
    Ok((meta, out))
}

/// Descending score, ties to the smaller row.
pub(crate) fn by_score_desc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

pub(crate) fn check_target(target: usize, pool: usize) -> Result<()> {
    if target > pool {
        return Err(Error::TargetExceedsPool {
            requested: target,
            available: pool,
        });
    }
    if target == 0 {
        return Err(Error::InvalidParameter("target size must be positive".into()));
    }
    Ok(())
}

/// Largest-remainder (Hamilton) apportionment of `target` over `counts`,
/// never exceeding a group's count. Remainder ties go to the earlier group.
pub fn stratified_quotas(counts: &[usize], target: usize) -> Result<Vec<usize>> {
    let total: usize = counts.iter().sum();
    if target > total {
        return Err(Error::TargetExceedsPool {
            requested: target,
            available: total,
        });
    }
    if total == 0 {
        return Ok(vec![0; counts.len()]);
    }
    let mut quotas = Vec::with_capacity(counts.len());
    let mut remainders = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        let num = target as u128 * c as u128;
        quotas.push((num / total as u128) as usize);
        remainders.push((num % total as u128, i));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = target - quotas.iter().sum::<usize>();
    // Overflow past a group's count is handed on in remainder order.
    while left > 0 {
        let before = left;
        for &(_, i) in &remainders {
            if left == 0 {
                break;
            }
            if quotas[i] < counts[i] {
                quotas[i] += 1;
                left -= 1;
            }
        }
        debug_assert!(left < before);
    }
    Ok(quotas)
}

/// Pool rows grouped by corpus language, each group ascending.
pub(crate) fn group_by_language(corpus: &Corpus, rows: &[usize]) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); corpus.languages().len()];
    for &r in rows {
        groups[corpus.lang_of_row(r)].push(r);
    }
    groups
}

/// Top `target` rows by score, optionally with per-language quotas; the
/// result is ordered by descending score either way.
pub(crate) fn ranked_selection(
    corpus: &Corpus,
    scored: Vec<(usize, f64)>,
    target: usize,
    stratified: bool,
) -> Result<Vec<usize>> {
    check_target(target, scored.len())?;
    let mut chosen: Vec<(usize, f64)> = if stratified {
        let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); corpus.languages().len()];
        for item in scored {
            groups[corpus.lang_of_row(item.0)].push(item);
        }
        let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
        let quotas = stratified_quotas(&counts, target)?;
        groups
            .into_iter()
            .zip(quotas)
            .flat_map(|(mut g, q)| {
                g.sort_by(by_score_desc);
                g.truncate(q);
                g
            })
            .collect()
    } else {
        scored
    };
    chosen.sort_by(by_score_desc);
    chosen.truncate(target);
    Ok(chosen.into_iter().map(|(r, _)| r).collect())
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::{Corpus, Sample};

    pub fn corpus(langs: &[&str]) -> Corpus {
        corpus_with_text(&langs.iter().map(|l| (*l, "q", "r")).collect::<Vec<_>>())
    }

    pub fn corpus_with_text(items: &[(&str, &str, &str)]) -> Corpus {
        Corpus::from_samples(
            items
                .iter()
                .enumerate()
                .map(|(i, (lang, ins, resp))| Sample {
                    id: format!("s{i}"),
                    lang: lang.to_string(),
                    instruction: ins.to_string(),
                    response: resp.to_string(),
                    row: i,
                })
                .collect(),
        )
        .unwrap()
    }
}
