use super::{Pool, PoolSource};
use crate::corpus::Corpus;
use crate::separability::ScoreTable;
use crate::{Error, Result};

/// `floor(x + 0.5)` for non-negative `x`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// `max(1, round_half_up(ρ% · n))`, capped at `n`.
pub fn per_language_count(rho_percent: f64, n: usize) -> usize {
    // ρ·n is exact for integral ρ, so the single division decides the rounding.
    round_half_up(rho_percent * n as f64 / 100.0).clamp(1, n.max(1))
}

/// Keeps the top ρ% of every language by silhouette score.
///
/// The pool lists languages in corpus order and, within a language, rows by
/// descending score with ties to the smaller row.
pub fn preselect_topk(scores: &ScoreTable, corpus: &Corpus, rho_percent: f64) -> Result<Pool> {
    if !(rho_percent > 0.0 && rho_percent <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "rho {rho_percent} outside (0, 100]"
        )));
    }
    scores.check_against(corpus)?;
    let mut member_rows = Vec::new();
    for (_, rows) in corpus.clusters() {
        let k = per_language_count(rho_percent, rows.len());
        let mut ranked = rows.to_vec();
        ranked.sort_by(|&x, &y| scores.s(y).total_cmp(&scores.s(x)).then(x.cmp(&y)));
        member_rows.extend_from_slice(&ranked[..k]);
    }
    Ok(Pool {
        member_rows,
        rho_percent,
        source: PoolSource::Preselect,
    })
}
