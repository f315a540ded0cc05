use std::collections::HashSet;

use super::{ranked_selection, Pool, SelectionPlan, Strategy};
use crate::corpus::Corpus;
use crate::{Error, Result};

/// Type-token ratio at which a factor closes.
pub const TTR_THRESHOLD: f64 = 0.72;

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x00A1 | 0x00A7 | 0x00AB | 0x00B6 | 0x00B7 | 0x00BB | 0x00BF
            | 0x037E | 0x0387
            | 0x055A..=0x055F | 0x0589
            | 0x060C | 0x061B | 0x061F | 0x066A..=0x066D | 0x06D4
            | 0x0964 | 0x0965 | 0x0970
            | 0x0E4F | 0x0E5A | 0x0E5B
            | 0x104A..=0x104F
            | 0x17D4..=0x17DA
            | 0x2010..=0x2027 | 0x2030..=0x205E
            | 0x3001..=0x3003 | 0x3008..=0x3011 | 0x3014..=0x301F | 0x30FB
            | 0xFE10..=0xFE19 | 0xFE30..=0xFE4F | 0xFE50..=0xFE6B
            | 0xFF01..=0xFF0F | 0xFF1A..=0xFF20 | 0xFF3B..=0xFF40 | 0xFF5B..=0xFF65)
}

/// Scripts written without spaces between words: Han, kana, Thai, Lao,
/// Khmer, Myanmar.
fn is_unspaced_script(c: char) -> bool {
    matches!(c as u32,
        0x0E00..=0x0EFF
        | 0x1000..=0x109F
        | 0x1780..=0x17FF
        | 0x3040..=0x30FF | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF
        | 0x20000..=0x3FFFF)
}

/// Lowercased words split on whitespace and punctuation. Characters of
/// unspaced scripts become one token per code point.
///
/// The language code is accepted for future per-language segmenters and
/// currently does not change the result.
pub fn tokenize(text: &str, _lang: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() || is_punctuation(c) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if is_unspaced_script(c) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn one_pass<'a>(tokens: impl Iterator<Item = &'a str>) -> (f64, usize) {
    let mut factors = 0.0;
    let mut types: HashSet<&str> = HashSet::new();
    let mut count = 0usize;
    let mut total = 0usize;
    let mut ttr = 1.0;
    for t in tokens {
        total += 1;
        count += 1;
        types.insert(t);
        ttr = types.len() as f64 / count as f64;
        if ttr <= TTR_THRESHOLD {
            factors += 1.0;
            types.clear();
            count = 0;
            ttr = 1.0;
        }
    }
    if count > 0 {
        factors += (1.0 - ttr) / (1.0 - TTR_THRESHOLD);
    }
    let value = if factors == 0.0 {
        total as f64
    } else {
        total as f64 / factors
    };
    (value, total)
}

/// Bidirectional MTLD: the mean of the forward and reverse pass values.
/// A pass that completes no factor at all scores the token count.
pub fn mtld_score<S: AsRef<str>>(tokens: &[S]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::InvalidParameter("empty token list".into()));
    }
    let (fwd, _) = one_pass(tokens.iter().map(AsRef::as_ref));
    let (rev, _) = one_pass(tokens.iter().rev().map(AsRef::as_ref));
    Ok((fwd + rev) / 2.0)
}

/// Keeps the `target_size` pool members with the highest MTLD over the
/// instruction and response together. Texts without tokens score 0.
pub fn select_mtld(
    corpus: &Corpus,
    pool: &Pool,
    target_size: usize,
    stratified: bool,
) -> Result<SelectionPlan> {
    super::check_target(target_size, pool.len())?;
    let scored: Vec<(usize, f64)> = pool
        .canonical_rows()
        .into_iter()
        .map(|r| {
            let s = corpus.sample(r);
            let tokens = tokenize(&s.text(), &s.lang);
            (r, mtld_score(&tokens).unwrap_or(0.0))
        })
        .collect();
    let picked = ranked_selection(corpus, scored, target_size, stratified)?;
    let mut plan = SelectionPlan::new(Strategy::Mtld, pool, corpus, &picked);
    plan.stratified = stratified;
    plan.params
        .insert("ttr_threshold".into(), TTR_THRESHOLD.into());
    Ok(plan)
}
