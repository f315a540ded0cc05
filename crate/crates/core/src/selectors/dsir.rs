use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mtld::tokenize;
use super::{by_score_desc, check_target, Pool, SelectionPlan, Strategy};
use crate::corpus::Corpus;
use crate::hash::Fnv1a64;
use crate::rng::StageRng;
use crate::{Error, Result};

pub(crate) const STREAM: &str = "select/dsir";
pub const DEFAULT_BUCKETS: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DsirMode {
    /// Rank by log importance weight.
    #[default]
    Topk,
    /// Rank by log importance weight plus seeded Gumbel noise, i.e. sample
    /// without replacement proportionally to the weights.
    Gumbel,
}

/// Hashed unigram+bigram distributions of a target and a raw corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub buckets: usize,
    pub alpha: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// `ln p − ln q` per bucket.
    pub log_ratio: Vec<f64>,
}

/// Sparse hashed n-gram counts of `text`, ascending by bucket.
///
/// Unigrams hash the token's UTF-8 bytes; bigrams hash the two tokens joined
/// by one space. Buckets are FNV-1a-64 modulo `buckets`.
pub fn hashed_ngrams(text: &str, lang: &str, buckets: usize) -> Vec<(usize, u32)> {
    let tokens = tokenize(text, lang);
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    let bucket = |h: u64| (h % buckets as u64) as usize;
    for (i, t) in tokens.iter().enumerate() {
        let mut h = Fnv1a64::new();
        h.update(t.as_bytes());
        *counts.entry(bucket(h.finish())).or_default() += 1;
        if let Some(next) = tokens.get(i + 1) {
            h.update(b" ");
            h.update(next.as_bytes());
            *counts.entry(bucket(h.finish())).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

fn distribution<'a>(
    texts: impl Iterator<Item = (&'a str, &'a str)>,
    buckets: usize,
    alpha: f64,
) -> Vec<f64> {
    let mut counts = vec![0.0f64; buckets];
    for (text, lang) in texts {
        for (b, c) in hashed_ngrams(text, lang, buckets) {
            counts[b] += f64::from(c);
        }
    }
    let total: f64 = counts.iter().sum::<f64>() + alpha * buckets as f64;
    counts.into_iter().map(|c| (c + alpha) / total).collect()
}

/// Fits add-α smoothed bucket distributions. Texts are `(text, lang)`.
pub fn dsir_fit(
    target_texts: &[(&str, &str)],
    raw_texts: &[(&str, &str)],
    buckets: usize,
    alpha: f64,
) -> Result<FeatureModel> {
    if target_texts.is_empty() || raw_texts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if buckets < 2 {
        return Err(Error::InvalidParameter("buckets must be at least 2".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha}")));
    }
    let p = distribution(target_texts.iter().copied(), buckets, alpha);
    let q = distribution(raw_texts.iter().copied(), buckets, alpha);
    let log_ratio = p.iter().zip(&q).map(|(p, q)| p.ln() - q.ln()).collect();
    Ok(FeatureModel {
        buckets,
        alpha,
        p,
        q,
        log_ratio,
    })
}

impl FeatureModel {
    /// `Σ_b f[b]·(ln p[b] − ln q[b])`, summed in ascending bucket order.
    /// Buckets whose ratio is undefined (zero mass without smoothing)
    /// contribute −∞ or +∞ accordingly.
    pub fn log_weight(&self, text: &str, lang: &str) -> f64 {
        hashed_ngrams(text, lang, self.buckets)
            .into_iter()
            .map(|(b, c)| f64::from(c) * self.log_ratio[b])
            .sum()
    }
}

/// Importance-resampling selection of `target_size` pool members.
pub fn select_dsir(
    pool: &Pool,
    corpus: &Corpus,
    model: &FeatureModel,
    target_size: usize,
    seed: Option<u64>,
    mode: DsirMode,
) -> Result<SelectionPlan> {
    check_target(target_size, pool.len())?;
    let mut noise = match (mode, seed) {
        (DsirMode::Gumbel, Some(seed)) => Some(StageRng::new(seed, STREAM)),
        (DsirMode::Gumbel, None) => {
            return Err(Error::InvalidParameter("gumbel mode requires a seed".into()))
        }
        (DsirMode::Topk, _) => None,
    };
    let mut scored: Vec<(usize, f64)> = pool
        .canonical_rows()
        .into_iter()
        .map(|r| {
            let s = corpus.sample(r);
            let mut w = model.log_weight(&s.text(), &s.lang);
            if let Some(rng) = noise.as_mut() {
                w += rng.gumbel();
            }
            (r, w)
        })
        .collect();
    scored.sort_by(by_score_desc);
    let picked: Vec<usize> = scored[..target_size].iter().map(|&(r, _)| r).collect();
    let mut plan = SelectionPlan::new(Strategy::Dsir, pool, corpus, &picked);
    plan.seed = if mode == DsirMode::Gumbel { seed } else { None };
    plan.params.insert("buckets".into(), model.buckets.into());
    plan.params.insert("alpha".into(), model.alpha.into());
    plan.params.insert(
        "mode".into(),
        serde_json::to_value(mode).expect("mode serializes"),
    );
    plan.params.insert("ngrams".into(), "unigram+bigram".into());
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::corpus_with_text;
    use super::*;
    use crate::hash::fnv1a64;

    #[test]
    fn identical_corpora_give_identical_distributions() {
        let texts = [("the cat sat", "en"), ("a dog ran far", "en")];
        let m = dsir_fit(&texts, &texts, 64, 0.5).unwrap();
        for (p, q) in m.p.iter().zip(&m.q) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!((m.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn smoothing_keeps_every_bucket_positive() {
        let m = dsir_fit(&[("x", "en")], &[("y y y", "en")], 1000, 1e-4).unwrap();
        assert!(m.p.iter().chain(&m.q).all(|&v| v > 0.0));
        assert!((m.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_word_vocabulary_hand_counts() {
        // "foo bar foo": unigrams foo×2, bar×1; bigrams "foo bar", "bar foo".
        let buckets = 4;
        let b = |s: &str| (fnv1a64(s.as_bytes()) % buckets as u64) as usize;
        let mut expected = [0.0f64; 4];
        for gram in ["foo", "foo", "bar", "foo bar", "bar foo"] {
            expected[b(gram)] += 1.0;
        }
        let total: f64 = expected.iter().sum();
        let m = dsir_fit(&[("foo bar foo", "en")], &[("bar", "en")], buckets, 0.0).unwrap();
        for (got, want) in m.p.iter().zip(expected) {
            assert!((got - want / total).abs() < 1e-12);
        }
    }

    #[test]
    fn target_like_sample_weighs_more() {
        let target = [("alpha beta gamma", "en"), ("alpha gamma beta", "en")];
        let raw = [
            ("alpha beta gamma", "en"),
            ("delta epsilon zeta", "en"),
            ("delta zeta", "en"),
        ];
        let m = dsir_fit(&target, &raw, 10_000, 1e-4).unwrap();
        assert!(m.log_weight("alpha beta", "en") > m.log_weight("delta epsilon", "en"));
    }

    #[test]
    fn equal_distributions_fall_back_to_row_order() {
        let c = corpus_with_text(&[("en", "a", "b"), ("en", "c", "d"), ("en", "e", "f")]);
        let texts: Vec<String> = c.samples().iter().map(|s| s.text()).collect();
        let pairs: Vec<(&str, &str)> = texts.iter().map(|t| (t.as_str(), "en")).collect();
        let m = dsir_fit(&pairs, &pairs, 128, 1e-4).unwrap();
        let plan = select_dsir(&Pool::full(&c), &c, &m, 2, None, DsirMode::Topk).unwrap();
        assert_eq!(plan.selected, ["s0", "s1"]);
        let again = select_dsir(&Pool::full(&c), &c, &m, 2, None, DsirMode::Topk).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn gumbel_needs_seed_and_is_reproducible() {
        let c = corpus_with_text(&[("en", "a b", "c"), ("en", "c d", "e"), ("en", "x", "y")]);
        let texts: Vec<String> = c.samples().iter().map(|s| s.text()).collect();
        let pairs: Vec<(&str, &str)> = texts.iter().map(|t| (t.as_str(), "en")).collect();
        let m = dsir_fit(&pairs[..1], &pairs, 128, 1e-4).unwrap();
        let pool = Pool::full(&c);
        assert!(select_dsir(&pool, &c, &m, 2, None, DsirMode::Gumbel).is_err());
        let a = select_dsir(&pool, &c, &m, 2, Some(1), DsirMode::Gumbel).unwrap();
        let b = select_dsir(&pool, &c, &m, 2, Some(1), DsirMode::Gumbel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(1));
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(dsir_fit(&[], &[("a", "en")], 8, 1e-4).is_err());
        assert!(dsir_fit(&[("a", "en")], &[("a", "en")], 1, 1e-4).is_err());
    }
}
