use super::{check_target, group_by_language, stratified_quotas, Pool, SelectionPlan, Strategy};
use crate::corpus::Corpus;
use crate::rng::StageRng;
use crate::Result;

pub(crate) const STREAM: &str = "select/rand";

/// Uniform sample without replacement. With `stratified`, each language gets
/// a quota proportional to its share of the pool; the combined draw is then
/// shuffled so rank carries no language order.
pub fn select_random(
    pool: &Pool,
    target_size: usize,
    seed: u64,
    stratified: bool,
    corpus: &Corpus,
) -> Result<SelectionPlan> {
    check_target(target_size, pool.len())?;
    let mut rng = StageRng::new(seed, STREAM);
    let rows = pool.canonical_rows();
    let picked = if stratified {
        let groups = group_by_language(corpus, &rows);
        let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
        let quotas = stratified_quotas(&counts, target_size)?;
        let mut picked = Vec::with_capacity(target_size);
        for (mut g, q) in groups.into_iter().zip(quotas) {
            rng.partial_shuffle(&mut g, q);
            picked.extend_from_slice(&g[..q]);
        }
        rng.shuffle(&mut picked);
        picked
    } else {
        let mut rows = rows;
        rng.partial_shuffle(&mut rows, target_size);
        rows.truncate(target_size);
        rows
    };
    let mut plan = SelectionPlan::new(Strategy::Rand, pool, corpus, &picked);
    plan.seed = Some(seed);
    plan.stratified = stratified;
    plan.params
        .insert("generator".into(), "chacha20(seed, \"select/rand\")".into());
    Ok(plan)
}
