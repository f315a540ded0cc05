//! Times `score_corpus` on synthetic data: `score_bench [N] [D] [L] [threads]`.

use std::time::Instant;

use langgps_core::{score_corpus, Corpus, EmbeddingMatrix, Sample, ScoreOptions};
use langgps_core::rng::StageRng;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let n = args.first().copied().unwrap_or(20_000);
    let d = args.get(1).copied().unwrap_or(1024);
    let l = args.get(2).copied().unwrap_or(10);
    let threads = args.get(3).copied().unwrap_or(1);

    let samples = (0..n)
        .map(|i| Sample {
            id: format!("s{i}"),
            lang: format!("l{:02}", i % l),
            instruction: "q".into(),
            response: "r".into(),
            row: i,
        })
        .collect();
    let corpus = Corpus::from_samples(samples).unwrap();
    let mut rng = StageRng::new(1, "bench");
    let data: Vec<f32> = (0..n * d)
        .map(|p| (rng.unit_open() as f32 - 0.5) + ((p / d) % l) as f32 * 0.01)
        .collect();
    let m = EmbeddingMatrix::from_vec(n, d, data, corpus.alignment_hash()).unwrap();

    let t = Instant::now();
    let table = score_corpus(
        &corpus,
        &m,
        ScoreOptions {
            threads,
            ..ScoreOptions::default()
        },
    )
    .unwrap();
    eprintln!(
        "N={n} D={d} L={l} threads={threads}: {:.2}s, mean s {:.6}",
        t.elapsed().as_secs_f64(),
        table.mean_s_overall
    );
}
