//! The multilingual instruction corpus and its language clusters.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::hash::Fnv1a64;
use crate::{Error, Result};

/// One instruction/response pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub lang: String,
    pub instruction: String,
    pub response: String,
    /// Zero-based line index in the corpus file.
    pub row: usize,
}

impl Sample {
    /// Text used by the lexical selectors.
    pub fn text(&self) -> String {
        let mut t = String::with_capacity(self.instruction.len() + self.response.len() + 1);
        t.push_str(&self.instruction);
        t.push(' ');
        t.push_str(&self.response);
        t
    }
}

/// Immutable, validated corpus. Languages are kept in lexicographic order and
/// each cluster lists its rows in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    samples: Vec<Sample>,
    languages: Vec<String>,
    clusters: Vec<Vec<usize>>,
    lang_of_row: Vec<u32>,
    row_by_id: HashMap<String, usize>,
    alignment_hash: u64,
}

#[derive(Deserialize)]
struct RawSample {
    id: Option<String>,
    lang: Option<String>,
    instruction: Option<String>,
    response: Option<String>,
}

/// FNV-1a-64 over the ids joined by `\n`, in row order.
pub fn alignment_hash<'a, I>(ids: I) -> u64
where
    I: IntoIterator<Item = &'a str>,
{
    let mut h = Fnv1a64::new();
    for (i, id) in ids.into_iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(id.as_bytes());
    }
    h.finish()
}

impl Corpus {
    /// Builds a corpus from samples in row order. `row` fields are reassigned
    /// from position.
    pub fn from_samples(mut samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut row_by_id = HashMap::with_capacity(samples.len());
        let mut by_lang: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (row, s) in samples.iter_mut().enumerate() {
            s.row = row;
            for (field, value) in [
                ("id", &s.id),
                ("lang", &s.lang),
                ("instruction", &s.instruction),
                ("response", &s.response),
            ] {
                if value.is_empty() {
                    return Err(Error::MissingField { line: row + 1, field });
                }
            }
            if row_by_id.insert(s.id.clone(), row).is_some() {
                return Err(Error::DuplicateId {
                    line: row + 1,
                    id: s.id.clone(),
                });
            }
            by_lang.entry(s.lang.clone()).or_default().push(row);
        }

        let mut lang_of_row = vec![0u32; samples.len()];
        let mut languages = Vec::with_capacity(by_lang.len());
        let mut clusters = Vec::with_capacity(by_lang.len());
        for (li, (lang, rows)) in by_lang.into_iter().enumerate() {
            for &r in &rows {
                lang_of_row[r] = li as u32;
            }
            languages.push(lang);
            clusters.push(rows);
        }
        let alignment_hash = alignment_hash(samples.iter().map(|s| s.id.as_str()));

        Ok(Corpus {
            samples,
            languages,
            clusters,
            lang_of_row,
            row_by_id,
            alignment_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, row: usize) -> &Sample {
        &self.samples[row]
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    /// Rows of the language at `lang_index`, ascending.
    pub fn cluster(&self, lang_index: usize) -> &[usize] {
        &self.clusters[lang_index]
    }

    pub fn clusters(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.languages
            .iter()
            .map(String::as_str)
            .zip(self.clusters.iter().map(Vec::as_slice))
    }

    pub fn lang_index(&self, lang: &str) -> Option<usize> {
        self.languages.binary_search_by(|l| l.as_str().cmp(lang)).ok()
    }

    /// Language index of each row.
    pub fn lang_of_row(&self, row: usize) -> usize {
        self.lang_of_row[row] as usize
    }

    pub fn row_labels(&self) -> &[u32] {
        &self.lang_of_row
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.row_by_id.get(id).copied()
    }

    pub fn alignment_hash(&self) -> u64 {
        self.alignment_hash
    }

    /// Sample count per language.
    pub fn language_distribution(&self) -> BTreeMap<String, usize> {
        self.clusters()
            .map(|(lang, rows)| (lang.to_owned(), rows.len()))
            .collect()
    }
}

/// Reads a JSONL corpus. Keys other than `id`, `lang`, `instruction` and
/// `response` are ignored.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut pending_blank: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            // Blank lines are only tolerated at the end of the file.
            pending_blank.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = pending_blank {
            return Err(Error::MalformedLine {
                line: blank,
                message: "blank line".into(),
            });
        }
        let raw: RawSample = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let take = |v: Option<String>, field: &'static str| {
            v.filter(|s| !s.is_empty())
                .ok_or(Error::MissingField { line: line_no, field })
        };
        samples.push(Sample {
            id: take(raw.id, "id")?,
            lang: take(raw.lang, "lang")?,
            instruction: take(raw.instruction, "instruction")?,
            response: take(raw.response, "response")?,
            row: samples.len(),
        });
    }
    Corpus::from_samples(samples)
}
