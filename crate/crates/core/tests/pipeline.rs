use std::io::Write;

use langgps_core::selectors::{self, Pool};
use langgps_core::{
    load_corpus, load_embeddings, score_corpus, validate_alignment, write_embeddings,
    EmbeddingMatrix64, Error, ScoreOptions, ScoreTable,
};

fn write_corpus(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("corpus.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    let langs = ["en", "fr", "sw"];
    for i in 0..30 {
        writeln!(
            f,
            r#"{{"id":"q{i}","lang":"{}","instruction":"tell me {i}","response":"answer {i}","extra":1}}"#,
            langs[i % 3]
        )
        .unwrap();
    }
    writeln!(f).unwrap();
    path
}

fn rows(n: usize, d: usize) -> Vec<f32> {
    (0..n * d)
        .map(|k| {
            let (r, c) = (k / d, k % d);
            (r % 3) as f32 * 2.0 + ((r * 7 + c * 13) % 11) as f32 / 11.0
        })
        .collect()
}

#[test]
fn files_round_trip_through_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = load_corpus(write_corpus(dir.path())).unwrap();
    assert_eq!(corpus.languages(), ["en", "fr", "sw"]);
    let emb_path = dir.path().join("e.bin");
    write_embeddings(&rows(30, 5), 30, 5, corpus.alignment_hash(), &emb_path).unwrap();
    let m = load_embeddings(&emb_path).unwrap();
    validate_alignment(&corpus, &m).unwrap();

    let table = score_corpus(&corpus, &m, ScoreOptions::default()).unwrap();
    let csv = dir.path().join("scores.csv");
    table.write_csv(&csv).unwrap();
    let back = ScoreTable::read_csv(&csv).unwrap();
    back.check_against(&corpus).unwrap();
    for (x, y) in table.records.iter().zip(&back.records) {
        assert_eq!(x.id, y.id);
        assert!((x.s - y.s).abs() <= 1e-8);
    }
    assert!(table.mean_s_overall > 0.5);

    let pool = selectors::preselect_topk(&back, &corpus, 20.0).unwrap();
    assert_eq!(pool.len(), 6);
    let full = Pool::full(&corpus);
    assert!(selectors::select_random(&full, 3, 1, true, &corpus).is_ok());
}

#[test]
fn scalar_widths_agree() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = load_corpus(write_corpus(dir.path())).unwrap();
    let data = rows(30, 5);
    let m32 = langgps_core::EmbeddingMatrix::from_vec(30, 5, data.clone(), corpus.alignment_hash())
        .unwrap();
    let m64 = EmbeddingMatrix64::from_vec(
        30,
        5,
        data.iter().map(|&v| f64::from(v)).collect(),
        corpus.alignment_hash(),
    )
    .unwrap();
    let a = score_corpus(&corpus, &m32, ScoreOptions::default()).unwrap();
    let b = score_corpus(&corpus, &m64, ScoreOptions::default()).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((x.s - y.s).abs() <= 1e-12, "{} {} {}", x.id, x.s, y.s);
        assert_eq!(x.nearest_lang, y.nearest_lang);
    }
}

#[test]
fn single_language_corpus_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"a\",\"lang\":\"en\",\"instruction\":\"x\",\"response\":\"y\"}\n\
         {\"id\":\"b\",\"lang\":\"en\",\"instruction\":\"x\",\"response\":\"z\"}\n",
    )
    .unwrap();
    let corpus = load_corpus(&path).unwrap();
    let m = langgps_core::EmbeddingMatrix::from_vec(2, 1, vec![0.0, 1.0], corpus.alignment_hash())
        .unwrap();
    assert!(matches!(
        score_corpus(&corpus, &m, ScoreOptions::default()),
        Err(Error::SingleLanguage)
    ));
}
