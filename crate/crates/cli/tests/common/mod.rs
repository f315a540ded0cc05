//! Synthetic corpora and embeddings shared by the CLI test targets.
#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use langgps_core::corpus::{alignment_hash, Sample};
use langgps_core::rng::StageRng;
use langgps_core::{write_embeddings, Corpus, EmbeddingMatrix};

pub const WORDS: [&str; 16] = [
    "river", "stone", "cloud", "paper", "window", "garden", "silver", "engine", "forest", "music",
    "letter", "bridge", "candle", "market", "planet", "winter",
];

/// Standard normal draw (Box-Muller).
pub fn normal(rng: &mut StageRng) -> f64 {
    let u1 = rng.unit_open();
    let u2 = rng.unit_open();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn lang_name(l: usize) -> String {
    format!("l{l:02}")
}

/// `n` samples over `langs` languages, interleaved, with every language present.
pub fn samples(n: usize, langs: usize, seed: u64) -> Vec<Sample> {
    let mut rng = StageRng::new(seed, "test/corpus");
    (0..n)
        .map(|i| {
            let lang = if i < langs { i } else { rng.index(langs) };
            let len = 3 + rng.index(12);
            let words: Vec<&str> = (0..len).map(|_| WORDS[rng.index(WORDS.len())]).collect();
            Sample {
                id: format!("s{i:06}"),
                lang: lang_name(lang),
                instruction: words[..len / 2].join(" "),
                response: words[len / 2..].join(" "),
                row: i,
            }
        })
        .collect()
}

pub fn corpus(n: usize, langs: usize, seed: u64) -> Corpus {
    Corpus::from_samples(samples(n, langs, seed)).expect("valid corpus")
}

/// Per-language Gaussian clusters with centres `spread` apart (unit noise).
pub fn clustered_rows(corpus: &Corpus, d: usize, spread: f64, seed: u64) -> Vec<f32> {
    let mut rng = StageRng::new(seed, "test/embeddings");
    let centres: Vec<Vec<f64>> = (0..corpus.languages().len())
        .map(|_| (0..d).map(|_| spread * normal(&mut rng)).collect())
        .collect();
    let mut data = Vec::with_capacity(corpus.len() * d);
    for row in 0..corpus.len() {
        let c = &centres[corpus.lang_of_row(row)];
        data.extend(c.iter().map(|&m| (m + normal(&mut rng)) as f32));
    }
    data
}

pub fn matrix(corpus: &Corpus, d: usize, spread: f64, seed: u64) -> EmbeddingMatrix {
    let data = clustered_rows(corpus, d, spread, seed);
    EmbeddingMatrix::from_vec(corpus.len(), d, data, corpus.alignment_hash()).expect("finite")
}

pub fn write_corpus(samples: &[Sample], path: &Path) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for s in samples {
        let line = serde_json::json!({
            "id": s.id,
            "lang": s.lang,
            "instruction": s.instruction,
            "response": s.response,
        });
        writeln!(f, "{line}").unwrap();
    }
    f.flush().unwrap();
}

/// Writes a clustered corpus and its embedding file into `dir`.
pub fn write_fixture(dir: &Path, n: usize, langs: usize, d: usize, seed: u64) {
    let samples = samples(n, langs, seed);
    write_corpus(&samples, &dir.join("corpus.jsonl"));
    let corpus = Corpus::from_samples(samples).unwrap();
    let data = clustered_rows(&corpus, d, 3.0, seed);
    let hash = alignment_hash(corpus.samples().iter().map(|s| s.id.as_str()));
    write_embeddings(&data, n, d, hash, dir.join("embeddings.bin")).unwrap();
}
