//! Separability-guided training orders.
//!
//! Rows are split per language into score deciles (`B_1` most separable),
//! then emitted low-to-high ([`order_ascending`]), high-to-low
//! ([`order_descending`]), or interleaved one row per bucket per round
//! ([`order_balanced`]).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::manifest::RunManifest;
use crate::rng::StageRng;
use crate::selectors::write_jsonl;
use crate::separability::ScoreTable;
use crate::{Error, Result};

pub const DEFAULT_BUCKETS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSet {
    /// `buckets[0]` is the most separable run of every language.
    pub buckets: Vec<Vec<usize>>,
    /// Per language, the lowest score in each of its runs (`None` if empty).
    pub boundaries: BTreeMap<String, Vec<Option<f64>>>,
}

impl BucketSet {
    pub fn sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }
}

/// Splits `subset` into `n_buckets` runs per language by descending score.
/// The first `n mod n_buckets` runs of a language are one row longer.
pub fn bucketize(
    scores: &ScoreTable,
    corpus: &Corpus,
    subset: &[usize],
    n_buckets: usize,
) -> Result<BucketSet> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty subset".into()));
    }
    if n_buckets == 0 {
        return Err(Error::InvalidParameter("bucket count must be positive".into()));
    }
    scores.check_against(corpus)?;
    let mut seen = HashSet::with_capacity(subset.len());
    let mut per_lang = vec![Vec::new(); corpus.languages().len()];
    for &r in subset {
        if r >= corpus.len() {
            return Err(Error::InvalidParameter(format!("row {r} outside corpus")));
        }
        if !seen.insert(r) {
            return Err(Error::InvalidParameter(format!(
                "row {r} repeated in subset"
            )));
        }
        per_lang[corpus.lang_of_row(r)].push(r);
    }

    let mut buckets = vec![Vec::new(); n_buckets];
    let mut boundaries = BTreeMap::new();
    for (lang, mut rows) in corpus.languages().iter().zip(per_lang) {
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|&x, &y| scores.s(y).total_cmp(&scores.s(x)).then(x.cmp(&y)));
        let (base, extra) = (rows.len() / n_buckets, rows.len() % n_buckets);
        let mut cuts = Vec::with_capacity(n_buckets);
        let mut start = 0;
        for (i, bucket) in buckets.iter_mut().enumerate() {
            let len = base + usize::from(i < extra);
            let run = &rows[start..start + len];
            cuts.push(run.last().map(|&r| scores.s(r)));
            bucket.extend_from_slice(run);
            start += len;
        }
        boundaries.insert(lang.clone(), cuts);
    }
    Ok(BucketSet {
        buckets,
        boundaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Ascending,
    Descending,
    Balanced,
}

impl Order {
    pub fn name(self) -> &'static str {
        match self {
            Order::Ascending => "ascending",
            Order::Descending => "descending",
            Order::Balanced => "balanced",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Order::Ascending, Order::Descending, Order::Balanced]
            .into_iter()
            .find(|o| o.name() == name)
    }

    fn stream(self) -> String {
        format!("curriculum/{}", self.name())
    }
}

/// A total order over rows with the bucket each row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumSchedule {
    pub strategy: Order,
    pub seed: u64,
    pub order: Vec<usize>,
    /// Zero-based bucket of `order[i]`.
    pub bucket: Vec<usize>,
    pub bucket_sizes: Vec<usize>,
}

impl CurriculumSchedule {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Writes the metadata line then `{id, position, bucket}` per row;
    /// buckets are numbered from 1 in the file.
    pub fn write_jsonl(
        &self,
        corpus: &Corpus,
        manifest: Option<&RunManifest>,
        path: impl AsRef<Path>,
    ) -> Result<()> {
        let meta = serde_json::json!({
            "strategy": self.strategy,
            "seed": self.seed,
            "buckets": self.bucket_sizes,
            "manifest": manifest,
        });
        let lines = self
            .order
            .iter()
            .zip(&self.bucket)
            .enumerate()
            .map(|(position, (&r, &b))| {
                serde_json::json!({
                    "id": corpus.sample(r).id,
                    "position": position,
                    "bucket": b + 1,
                })
            });
        write_jsonl(path.as_ref(), &meta, lines)
    }
}

fn sequential(buckets: &BucketSet, seed: u64, strategy: Order) -> CurriculumSchedule {
    let mut rng = StageRng::new(seed, &strategy.stream());
    let indices: Vec<usize> = match strategy {
        Order::Ascending => (0..buckets.buckets.len()).rev().collect(),
        _ => (0..buckets.buckets.len()).collect(),
    };
    let mut order = Vec::with_capacity(buckets.total());
    let mut bucket = Vec::with_capacity(buckets.total());
    for i in indices {
        let mut rows = buckets.buckets[i].clone();
        rng.shuffle(&mut rows);
        bucket.extend(std::iter::repeat_n(i, rows.len()));
        order.extend(rows);
    }
    CurriculumSchedule {
        strategy,
        seed,
        order,
        bucket,
        bucket_sizes: buckets.sizes(),
    }
}

/// Least separable bucket first; rows shuffled within each bucket.
pub fn order_ascending(buckets: &BucketSet, seed: u64) -> CurriculumSchedule {
    sequential(buckets, seed, Order::Ascending)
}

/// Most separable bucket first; rows shuffled within each bucket.
pub fn order_descending(buckets: &BucketSet, seed: u64) -> CurriculumSchedule {
    sequential(buckets, seed, Order::Descending)
}

/// Rounds of one uniformly drawn row from every non-empty bucket, in bucket
/// order, each round shuffled before it is appended.
pub fn order_balanced(buckets: &BucketSet, seed: u64) -> CurriculumSchedule {
    let mut rng = StageRng::new(seed, &Order::Balanced.stream());
    let mut remaining = buckets.buckets.clone();
    let mut order = Vec::with_capacity(buckets.total());
    let mut bucket = Vec::with_capacity(buckets.total());
    let mut round: Vec<(usize, usize)> = Vec::with_capacity(remaining.len());
    loop {
        round.clear();
        for (i, rows) in remaining.iter_mut().enumerate() {
            if !rows.is_empty() {
                let j = rng.index(rows.len());
                round.push((rows.swap_remove(j), i));
            }
        }
        if round.is_empty() {
            break;
        }
        rng.shuffle(&mut round);
        for &(r, i) in &round {
            order.push(r);
            bucket.push(i);
        }
    }
    CurriculumSchedule {
        strategy: Order::Balanced,
        seed,
        order,
        bucket,
        bucket_sizes: buckets.sizes(),
    }
}

pub fn schedule(buckets: &BucketSet, strategy: Order, seed: u64) -> CurriculumSchedule {
    match strategy {
        Order::Ascending => order_ascending(buckets, seed),
        Order::Descending => order_descending(buckets, seed),
        Order::Balanced => order_balanced(buckets, seed),
    }
}
