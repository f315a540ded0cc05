use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{ranked_selection, Pool, SelectionPlan, Strategy};
use crate::corpus::Corpus;
use crate::{Error, Result};

#[derive(Deserialize)]
struct ScoreLine {
    id: String,
    score: String,
}

/// Reads an `id,score` CSV produced by an external scorer. Non-numeric or
/// non-finite scores are kept as NaN and rejected at selection time.
pub fn read_score_file(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers().map_err(|e| Error::format(path, e))?;
    if header != vec!["id", "score"] {
        return Err(Error::format(path, "expected header id,score"));
    }
    let mut scores = HashMap::new();
    for line in rdr.deserialize::<ScoreLine>() {
        let line = line.map_err(|e| Error::format(path, e))?;
        let v = line.score.trim().parse::<f64>().unwrap_or(f64::NAN);
        scores.insert(line.id, v);
    }
    Ok(scores)
}

/// Top `target_size` pool members by an externally computed score.
pub fn select_external(
    pool: &Pool,
    corpus: &Corpus,
    scores: &HashMap<String, f64>,
    target_size: usize,
) -> Result<SelectionPlan> {
    let scored = pool
        .canonical_rows()
        .into_iter()
        .map(|r| {
            let id = &corpus.sample(r).id;
            match scores.get(id) {
                None => Err(Error::MissingScore(id.clone())),
                Some(v) if !v.is_finite() => Err(Error::NonFiniteScore(id.clone())),
                Some(&v) => Ok((r, v)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let picked = ranked_selection(corpus, scored, target_size, false)?;
    Ok(SelectionPlan::new(Strategy::External, pool, corpus, &picked))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::corpus;
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn top_two() {
        let c = corpus(&["en", "en", "fr"]);
        let f = write("id,score\ns0,0.9\ns1,0.1\ns2,0.5\n");
        let scores = read_score_file(f.path()).unwrap();
        let plan = select_external(&Pool::full(&c), &c, &scores, 2).unwrap();
        assert_eq!(plan.selected, ["s0", "s2"]);
    }

    #[test]
    fn missing_id_is_named() {
        let c = corpus(&["en", "en", "fr"]);
        let f = write("id,score\ns0,0.9\ns2,0.5\n");
        let scores = read_score_file(f.path()).unwrap();
        let err = select_external(&Pool::full(&c), &c, &scores, 2).unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
    }

    #[test]
    fn non_finite_rejected() {
        let c = corpus(&["en", "fr"]);
        let f = write("id,score\ns0,NaN\ns1,1\n");
        let scores = read_score_file(f.path()).unwrap();
        assert!(matches!(
            select_external(&Pool::full(&c), &c, &scores, 1),
            Err(Error::NonFiniteScore(_))
        ));
    }

    #[test]
    fn equal_scores_take_first_rows() {
        let c = corpus(&["en", "fr", "de", "sw"]);
        let f = write("id,score\ns3,1\ns2,1\ns1,1\ns0,1\n");
        let scores = read_score_file(f.path()).unwrap();
        let plan = select_external(&Pool::full(&c), &c, &scores, 3).unwrap();
        assert_eq!(plan.selected, ["s0", "s1", "s2"]);
    }

    #[test]
    fn bad_header() {
        let f = write("name,value\ns0,1\n");
        assert!(read_score_file(f.path()).is_err());
    }
}
