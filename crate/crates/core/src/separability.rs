//! Per-sample language separability: the silhouette of each sample with
//! respect to the language clusters, in Euclidean embedding space.
//!
//! For sample i in language l,
//!
//! * `a` is the mean distance to the other members of l,
//! * `b` is the smallest mean distance to the members of any other language,
//! * `s = (b - a) / max(a, b)`, or 0 when both are zero or l is a singleton.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{validate_alignment, Embeddings};
use crate::kernel::{self, Packed, MR, NR};
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub lang: String,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub nearest_lang: String,
}

/// Scores in corpus row order, with per-language and overall means of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub records: Vec<ScoreRecord>,
    pub mean_s_by_lang: BTreeMap<String, f64>,
    pub mean_s_overall: f64,
}

impl ScoreTable {
    pub fn from_records(records: Vec<ScoreRecord>) -> Self {
        let mut by_lang: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        let mut total = 0.0;
        for r in &records {
            let e = by_lang.entry(r.lang.clone()).or_default();
            e.0 += r.s;
            e.1 += 1;
            total += r.s;
        }
        let mean_s_overall = if records.is_empty() {
            0.0
        } else {
            total / records.len() as f64
        };
        ScoreTable {
            mean_s_by_lang: by_lang
                .into_iter()
                .map(|(l, (sum, n))| (l, sum / n as f64))
                .collect(),
            mean_s_overall,
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn s(&self, row: usize) -> f64 {
        self.records[row].s
    }

    /// Fails unless the table lists exactly the corpus ids, in row order.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        if self.records.len() != corpus.len() {
            return Err(Error::RowCountMismatch {
                corpus: corpus.len(),
                matrix: self.records.len(),
            });
        }
        for (r, s) in self.records.iter().zip(corpus.samples()) {
            if r.id != s.id || r.lang != s.lang {
                return Err(Error::InvalidParameter(format!(
                    "score table row {} is `{}` ({}), corpus has `{}` ({})",
                    s.row, r.id, r.lang, s.id, s.lang
                )));
            }
        }
        Ok(())
    }

    /// Writes `id,lang,a,b,s,nearest_lang` with 9 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        let wrap = |e: csv::Error| Error::format(path, e);
        w.write_record(["id", "lang", "a", "b", "s", "nearest_lang"])
            .map_err(wrap)?;
        for r in &self.records {
            w.write_record([
                r.id.as_str(),
                r.lang.as_str(),
                &format_sig(r.a, 9),
                &format_sig(r.b, 9),
                &format_sig(r.s, 9),
                r.nearest_lang.as_str(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let header = rdr.headers().map_err(|e| Error::format(path, e))?;
        if header != vec!["id", "lang", "a", "b", "s", "nearest_lang"] {
            return Err(Error::format(
                path,
                "expected header id,lang,a,b,s,nearest_lang",
            ));
        }
        let records = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ScoreRecord>, _>>()
            .map_err(|e| Error::format(path, e))?;
        Ok(Self::from_records(records))
    }
}

/// Formats like C's `%.{sig}g`.
pub fn format_sig(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

/// Row block with its cached squared norms.
#[derive(Debug, Clone, Copy)]
pub struct Block<'a, T: Scalar> {
    data: &'a [T],
    sq_norms: &'a [f64],
    d: usize,
}

impl<'a, T: Scalar> Block<'a, T> {
    pub fn new(data: &'a [T], sq_norms: &'a [f64], d: usize) -> Result<Self> {
        if data.len() != sq_norms.len() * d {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: sq_norms.len() * d,
            });
        }
        Ok(Block { data, sq_norms, d })
    }

    /// Rows `range` of a matrix.
    pub fn of(matrix: &'a Embeddings<T>, range: Range<usize>) -> Self {
        let d = matrix.d();
        Block {
            data: &matrix.data()[range.start * d..range.end * d],
            sq_norms: &matrix.sq_norms()[range],
            d,
        }
    }

    pub fn rows(&self) -> usize {
        self.sq_norms.len()
    }
}

/// Squared Euclidean distances between every row of `rows` and every row of
/// `cols`, row-major, via ‖x‖² + ‖y‖² − 2·x·y with negatives clamped to 0.
pub fn blocked_sq_dists<T: Scalar>(rows: Block<'_, T>, cols: Block<'_, T>) -> Result<Vec<f64>> {
    if rows.d != cols.d {
        return Err(Error::DimensionMismatch {
            left: rows.d,
            right: cols.d,
        });
    }
    let (r, c) = (rows.rows(), cols.rows());
    let mut a = Packed::new(MR);
    let mut b = Packed::new(NR);
    a.pack(rows.data, rows.d, 0..r);
    b.pack(cols.data, cols.d, 0..c);
    let mut out = vec![0.0; r * c];
    kernel::gram(&a, &b, &mut out);
    kernel::gram_to_sq_dists(&mut out, rows.sq_norms, cols.sq_norms);
    Ok(out)
}

#[inline]
fn pair_dist<T: Scalar>(m: &Embeddings<T>, i: usize, j: usize) -> f64 {
    let sq = m.sq_norms()[i] + m.sq_norms()[j] - 2.0 * kernel::dot(m.row(i), m.row(j));
    sq.max(0.0).sqrt()
}

/// Mean distance from row `i` to the other rows of its own cluster, or
/// `None` for a singleton cluster.
pub fn intra_mean_dist<T: Scalar>(m: &Embeddings<T>, i: usize, cluster: &[usize]) -> Option<f64> {
    debug_assert!(cluster.contains(&i));
    if cluster.len() <= 1 {
        return None;
    }
    let sum: f64 = cluster
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| pair_dist(m, i, j))
        .sum();
    Some(sum / (cluster.len() - 1) as f64)
}

/// Smallest mean distance from row `i` to another language's cluster, with
/// the language it came from. Ties go to the lexicographically smallest code.
pub fn nearest_other_cluster<T: Scalar>(
    m: &Embeddings<T>,
    i: usize,
    others: &[(&str, &[usize])],
) -> Result<(f64, String)> {
    let mut best: Option<(f64, &str)> = None;
    for &(lang, rows) in others {
        if rows.is_empty() {
            continue;
        }
        let mean = rows.iter().map(|&j| pair_dist(m, i, j)).sum::<f64>() / rows.len() as f64;
        best = match best {
            Some((b, l)) if b < mean || (b == mean && l <= lang) => Some((b, l)),
            _ => Some((mean, lang)),
        };
    }
    best.map(|(b, l)| (b, l.to_owned()))
        .ok_or(Error::SingleLanguage)
}

/// `(b − a) / max(a, b)`, or 0 when both are 0.
pub fn silhouette<F: num_traits::Float>(a: F, b: F) -> F {
    let m = a.max(b);
    if m == F::zero() {
        F::zero()
    } else {
        (b - a) / m
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScoreOptions {
    pub block_size: usize,
    pub threads: usize,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            block_size: DEFAULT_BLOCK_SIZE,
            threads: 1,
        }
    }
}

/// Per-row sums of distances to each language, computed over the upper
/// triangle of row-block tiles.
///
/// Tiles are processed column-block by column-block. At step `J` the tiles
/// `(I, J)` for `I ≤ J` run in parallel; each yields the partial sums of its
/// rows (by column language) and, off the diagonal, of its columns (by row
/// language). Partials are then folded serially: row block `I < J` receives
/// `P(I, J)`, and row block `J` receives `P(J, 0..J)` then `P(J, J)`. Every
/// row therefore sums its column blocks in ascending order regardless of
/// thread count, and inside a block it sums columns in ascending order.
fn language_sums<T: Scalar>(
    m: &Embeddings<T>,
    labels: &[u32],
    n_langs: usize,
    block: usize,
    pool: &rayon::ThreadPool,
) -> Vec<f64> {
    let n = m.n();
    let d = m.d();
    let n_blocks = n.div_ceil(block);
    let range = |b: usize| b * block..((b + 1) * block).min(n);
    let mut sums = vec![0.0f64; n * n_langs];

    struct Partial {
        rows: Vec<f64>,
        cols: Option<Vec<f64>>,
    }

    for jb in 0..n_blocks {
        let cr = range(jb);
        let mut packed_cols = Packed::new(NR);
        packed_cols.pack(m.data(), d, cr.clone());
        let packed_cols = &packed_cols;
        let col_norms = &m.sq_norms()[cr.clone()];
        let col_labels = &labels[cr.clone()];

        let partials: Vec<Partial> = pool.install(|| {
            (0..=jb)
                .into_par_iter()
                .map_init(
                    || (Packed::new(MR), Vec::<f64>::new()),
                    |(packed_rows, tile), ib| {
                        let rr = range(ib);
                        packed_rows.pack(m.data(), d, rr.clone());
                        tile.resize(rr.len() * cr.len(), 0.0);
                        kernel::gram(packed_rows, packed_cols, tile);
                        kernel::gram_to_sq_dists(tile, &m.sq_norms()[rr.clone()], col_norms);
                        let row_labels = &labels[rr.clone()];
                        let width = cr.len();
                        let mut rows = vec![0.0f64; rr.len() * n_langs];
                        let mut cols = (ib != jb).then(|| vec![0.0f64; width * n_langs]);
                        for (i, line) in tile.chunks_exact_mut(width).enumerate() {
                            let acc = &mut rows[i * n_langs..(i + 1) * n_langs];
                            for (v, &lj) in line.iter_mut().zip(col_labels) {
                                *v = v.sqrt();
                                acc[lj as usize] += *v;
                            }
                            if let Some(cols) = cols.as_mut() {
                                let li = row_labels[i] as usize;
                                for (j, v) in line.iter().enumerate() {
                                    cols[j * n_langs + li] += *v;
                                }
                            }
                        }
                        Partial { rows, cols }
                    },
                )
                .collect()
        });

        for (ib, p) in partials.iter().enumerate().take(jb) {
            let rr = range(ib);
            for (dst, src) in sums[rr.start * n_langs..rr.end * n_langs]
                .iter_mut()
                .zip(&p.rows)
            {
                *dst += *src;
            }
        }
        let dst = &mut sums[cr.start * n_langs..cr.end * n_langs];
        for p in &partials[..jb] {
            for (x, y) in dst.iter_mut().zip(p.cols.as_ref().expect("off-diagonal")) {
                *x += *y;
            }
        }
        for (x, y) in dst.iter_mut().zip(&partials[jb].rows) {
            *x += *y;
        }
    }
    sums
}

/// Scores every sample of `corpus`.
pub fn score_corpus<T: Scalar>(
    corpus: &Corpus,
    m: &Embeddings<T>,
    opts: ScoreOptions,
) -> Result<ScoreTable> {
    validate_alignment(corpus, m)?;
    let langs = corpus.languages();
    if langs.len() < 2 {
        return Err(Error::SingleLanguage);
    }
    if opts.block_size == 0 {
        return Err(Error::InvalidParameter("block size must be positive".into()));
    }
    if opts.threads == 0 {
        return Err(Error::InvalidParameter("threads must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let n_langs = langs.len();
    let sizes: Vec<usize> = (0..n_langs).map(|l| corpus.cluster(l).len()).collect();
    let sums = language_sums(m, corpus.row_labels(), n_langs, opts.block_size, &pool);

    let records = corpus
        .samples()
        .iter()
        .zip(sums.chunks_exact(n_langs))
        .map(|(sample, row_sums)| {
            let own = corpus.lang_of_row(sample.row);
            let mut best: Option<(f64, usize)> = None;
            for (l, (&sum, &size)) in row_sums.iter().zip(&sizes).enumerate() {
                if l == own {
                    continue;
                }
                let mean = sum / size as f64;
                // Languages are sorted, so strict `<` keeps the smallest code on ties.
                if best.is_none_or(|(b, _)| mean < b) {
                    best = Some((mean, l));
                }
            }
            let (b, nearest) = best.expect("at least two languages");
            let (a, s) = if sizes[own] > 1 {
                let a = row_sums[own] / (sizes[own] - 1) as f64;
                (a, silhouette(a, b))
            } else {
                (0.0, 0.0)
            };
            ScoreRecord {
                id: sample.id.clone(),
                lang: sample.lang.clone(),
                a,
                b,
                s,
                nearest_lang: langs[nearest].clone(),
            }
        })
        .collect();
    Ok(ScoreTable::from_records(records))
}
