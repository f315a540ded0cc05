//! `langgps`: score, pre-select, select and order multilingual instruction
//! data by language separability.
//!
//! Exit codes: 0 success, 1 input or domain error, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::{json, Value};

use langgps_core::curriculum::{self, Order};
use langgps_core::manifest::RunManifest;
use langgps_core::reporting;
use langgps_core::selectors::{
    self, DsirMode, KMeansOptions, Pool, SelectionPlan, Strategy, TargetSize,
};
use langgps_core::separability::DEFAULT_BLOCK_SIZE;
use langgps_core::{
    load_corpus, load_embeddings, score_corpus, validate_alignment, Corpus, ScoreOptions,
    ScoreTable,
};

#[derive(Parser)]
#[command(name = "langgps", version, about = "Language-separability guided data selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that an embedding file belongs to a corpus.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// Compute per-sample silhouette scores.
    Score(ScoreArgs),
    /// Keep the top ρ% of every language by score.
    Preselect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        rho: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a downstream selector over the corpus or a pre-selected pool.
    Select(SelectArgs),
    /// Emit a separability-guided training order.
    Curriculum(CurriculumArgs),
    /// Write score summaries, histograms and similarity distributions.
    Report(ReportArgs),
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
#[command(group(ArgGroup::new("size").required(true).args(["fraction", "count"])))]
struct SelectArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// rand, kmc, mtld, dsir or external.
    #[arg(long)]
    method: String,
    /// Share of the full corpus to select.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    /// Pool written by `preselect`.
    #[arg(long, conflicts_with = "rho")]
    pool: Option<PathBuf>,
    /// Pre-select inline with this ratio (needs --scores).
    #[arg(long, requires = "scores")]
    rho: Option<f64>,
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Per-language quotas; defaults to true for rand, false otherwise.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    stratified: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Embedding file (kmc).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Target-set JSONL (dsir).
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = selectors::DEFAULT_BUCKETS)]
    hash_buckets: usize,
    #[arg(long, default_value_t = selectors::DEFAULT_ALPHA)]
    alpha: f64,
    /// topk or gumbel (dsir).
    #[arg(long, default_value = "topk")]
    dsir_mode: String,
    /// `id,score` CSV (external).
    #[arg(long)]
    score_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurriculumArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    /// Order only the rows of this selection plan.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// ascending, descending or balanced.
    #[arg(long)]
    order: String,
    #[arg(long, default_value_t = curriculum::DEFAULT_BUCKETS)]
    buckets: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Enables the pairwise cosine-similarity distribution.
    #[arg(long, requires = "seed")]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 100_000)]
    max_pairs: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { corpus, embeddings } => cmd_validate(&corpus, &embeddings),
        Command::Score(args) => cmd_score(&args),
        Command::Preselect {
            corpus,
            scores,
            rho,
            out,
        } => cmd_preselect(&corpus, &scores, rho, &out),
        Command::Select(args) => cmd_select(&args),
        Command::Curriculum(args) => cmd_curriculum(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn cmd_validate(corpus_path: &Path, embeddings_path: &Path) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let matrix = load_embeddings(embeddings_path)?;
    validate_alignment(&corpus, &matrix)?;
    eprintln!(
        "ok: {} samples, {} languages, dimension {}, alignment hash {:#018x}",
        corpus.len(),
        corpus.languages().len(),
        matrix.d(),
        corpus.alignment_hash()
    );
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let matrix = load_embeddings(&args.embeddings)?;
    let start = Instant::now();
    let table = score_corpus(
        &corpus,
        &matrix,
        ScoreOptions {
            block_size: args.block_size,
            threads: args.threads,
        },
    )?;
    let elapsed = start.elapsed();
    table.write_csv(&args.out)?;
    RunManifest::new("score")
        .param("block_size", args.block_size)
        .param("threads", args.threads)
        .param("metric", "euclidean")
        .input(&args.corpus)?
        .input(&args.embeddings)?
        .write_sidecar(&args.out)?;
    eprintln!(
        "scored N={} L={} mean s={:.6} in {:.2}s",
        table.len(),
        corpus.languages().len(),
        table.mean_s_overall,
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn load_scores(path: &Path, corpus: &Corpus) -> Result<ScoreTable> {
    let table = ScoreTable::read_csv(path)?;
    table
        .check_against(corpus)
        .with_context(|| format!("{} does not match the corpus", path.display()))?;
    Ok(table)
}

fn cmd_preselect(corpus_path: &Path, scores_path: &Path, rho: f64, out: &Path) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let scores = load_scores(scores_path, &corpus)?;
    let pool = selectors::preselect_topk(&scores, &corpus, rho)?;
    let manifest = RunManifest::new("preselect")
        .param("rho", rho)
        .input(corpus_path)?
        .input(scores_path)?;
    pool.write_jsonl(&corpus, Some(&manifest), out)?;
    eprintln!("pool: {} of {} samples (rho {rho}%)", pool.len(), corpus.len());
    Ok(())
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("{what} requires --seed"))
}

fn read_target_texts(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line)
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        let field = |k: &str| v.get(k).and_then(Value::as_str);
        let body = match (field("text"), field("instruction"), field("response")) {
            (Some(t), _, _) => t.to_owned(),
            (None, Some(ins), Some(resp)) => format!("{ins} {resp}"),
            _ => bail!(
                "{}: line {} needs `text` or `instruction` and `response`",
                path.display(),
                i + 1
            ),
        };
        out.push((body, field("lang").unwrap_or("und").to_owned()));
    }
    if out.is_empty() {
        bail!("{}: empty target set", path.display());
    }
    Ok(out)
}

fn as_refs(v: &[(String, String)]) -> Vec<(&str, &str)> {
    v.iter().map(|(t, l)| (t.as_str(), l.as_str())).collect()
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let strategy = Strategy::parse(&args.method).ok_or_else(|| {
        let valid: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
        anyhow!(
            "unknown method `{}`; valid methods: {}",
            args.method,
            valid.join(", ")
        )
    })?;
    let corpus = load_corpus(&args.corpus)?;
    let mut manifest = RunManifest::new("select")
        .param("method", strategy.name())
        .input(&args.corpus)?;

    let pool = match (&args.pool, args.rho) {
        (Some(path), _) => {
            manifest = manifest.input(path)?;
            Pool::read_jsonl(&corpus, path)?
        }
        (None, Some(rho)) => {
            let scores_path = args.scores.as_deref().expect("clap requires --scores");
            manifest = manifest.input(scores_path)?.param("rho", rho);
            let scores = load_scores(scores_path, &corpus)?;
            selectors::preselect_topk(&scores, &corpus, rho)?
        }
        (None, None) => Pool::full(&corpus),
    };

    let size = match (args.fraction, args.count) {
        (Some(f), _) => TargetSize::Fraction(f),
        (None, Some(c)) => TargetSize::Count(c),
        (None, None) => unreachable!("clap requires one of --fraction/--count"),
    };
    let target = size.resolve(corpus.len())?;
    let stratified = args
        .stratified
        .unwrap_or_else(|| strategy.stratified_by_default());
    if stratified && !matches!(strategy, Strategy::Rand | Strategy::Mtld) {
        bail!("--stratified is not supported by {}", strategy.name());
    }
    manifest = manifest
        .param("target_size", target)
        .param("stratified", stratified);

    let mut plan: SelectionPlan = match strategy {
        Strategy::Rand => {
            let seed = require_seed(args.seed, "rand")?;
            manifest = manifest.param("seed", seed);
            selectors::select_random(&pool, target, seed, stratified, &corpus)?
        }
        Strategy::Kmc => {
            let seed = require_seed(args.seed, "kmc")?;
            let path = args
                .embeddings
                .as_deref()
                .ok_or_else(|| anyhow!("kmc requires --embeddings"))?;
            let matrix = load_embeddings(path)?;
            manifest = manifest
                .input(path)?
                .param("seed", seed)
                .param("max_iters", args.max_iters)
                .param("tol", args.tol);
            let opts = KMeansOptions {
                k: target,
                seed,
                max_iters: args.max_iters,
                tol: args.tol,
            };
            selectors::select_kmeans_centroid(&matrix, &pool, &corpus, opts)?
        }
        Strategy::Mtld => selectors::select_mtld(&corpus, &pool, target, stratified)?,
        Strategy::Dsir => {
            let mode = match args.dsir_mode.as_str() {
                "topk" => DsirMode::Topk,
                "gumbel" => DsirMode::Gumbel,
                other => bail!("unknown dsir mode `{other}`; valid modes: topk, gumbel"),
            };
            let seed = match mode {
                DsirMode::Gumbel => Some(require_seed(args.seed, "dsir gumbel mode")?),
                DsirMode::Topk => None,
            };
            let target_path = args
                .target
                .as_deref()
                .ok_or_else(|| anyhow!("dsir requires --target"))?;
            manifest = manifest
                .input(target_path)?
                .param("hash_buckets", args.hash_buckets)
                .param("alpha", args.alpha)
                .param("dsir_mode", args.dsir_mode.as_str());
            if let Some(seed) = seed {
                manifest = manifest.param("seed", seed);
            }
            let target_texts = read_target_texts(target_path)?;
            let raw: Vec<(String, String)> = pool
                .canonical_rows()
                .into_iter()
                .map(|r| {
                    let s = corpus.sample(r);
                    (s.text(), s.lang.clone())
                })
                .collect();
            let model = selectors::dsir_fit(
                &as_refs(&target_texts),
                &as_refs(&raw),
                args.hash_buckets,
                args.alpha,
            )?;
            selectors::select_dsir(&pool, &corpus, &model, target, seed, mode)?
        }
        Strategy::External => {
            let path = args
                .score_file
                .as_deref()
                .ok_or_else(|| anyhow!("external requires --score-file"))?;
            manifest = manifest.input(path)?;
            let scores = selectors::read_score_file(path)?;
            selectors::select_external(&pool, &corpus, &scores, target)?
        }
    };
    plan.size = size;
    plan.write_jsonl(Some(&manifest), &args.out)?;
    eprintln!(
        "selected {} of {} pool samples ({})",
        plan.len(),
        pool.len(),
        strategy.name()
    );
    Ok(())
}

fn plan_rows(path: &Path, corpus: &Corpus) -> Result<(SelectionPlan, Vec<usize>)> {
    let plan = SelectionPlan::read_jsonl(path)?;
    let rows = plan
        .rows(corpus)
        .with_context(|| format!("{} does not match the corpus", path.display()))?;
    Ok((plan, rows))
}

fn cmd_curriculum(args: &CurriculumArgs) -> Result<()> {
    let order = Order::parse(&args.order).ok_or_else(|| {
        anyhow!(
            "unknown order `{}`; valid orders: ascending, descending, balanced",
            args.order
        )
    })?;
    let seed = require_seed(args.seed, "curriculum")?;
    let corpus = load_corpus(&args.corpus)?;
    let scores = load_scores(&args.scores, &corpus)?;
    let mut manifest = RunManifest::new("curriculum")
        .param("order", order.name())
        .param("buckets", args.buckets)
        .param("seed", seed)
        .input(&args.corpus)?
        .input(&args.scores)?;
    let subset = match &args.plan {
        Some(path) => {
            manifest = manifest.input(path)?;
            plan_rows(path, &corpus)?.1
        }
        None => (0..corpus.len()).collect(),
    };
    let buckets = curriculum::bucketize(&scores, &corpus, &subset, args.buckets)?;
    let schedule = curriculum::schedule(&buckets, order, seed);
    schedule.write_jsonl(&corpus, Some(&manifest), &args.out)?;
    eprintln!(
        "scheduled {} samples ({}), bucket sizes {:?}",
        schedule.len(),
        order.name(),
        schedule.bucket_sizes
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let scores = load_scores(&args.scores, &corpus)?;
    let mut manifest = RunManifest::new("report")
        .param("bins", args.bins)
        .param("max_pairs", args.max_pairs)
        .input(&args.corpus)?
        .input(&args.scores)?;
    let plan = match &args.plan {
        Some(path) => {
            manifest = manifest.input(path)?;
            Some(plan_rows(path, &corpus)?)
        }
        None => None,
    };
    let summary = reporting::score_summary(&scores, plan.as_ref().map(|(p, _)| p))?;
    let histogram = reporting::score_histogram(&scores, args.bins)?;
    let by_language = reporting::score_histograms_by_language(&scores, args.bins)?;
    let similarity = match &args.embeddings {
        Some(path) => {
            let seed = require_seed(args.seed, "similarity distribution")?;
            manifest = manifest.input(path)?.param("seed", seed);
            let matrix = load_embeddings(path)?;
            validate_alignment(&corpus, &matrix)?;
            let subset = match &plan {
                Some((_, rows)) => rows.clone(),
                None => (0..corpus.len()).collect(),
            };
            Some(reporting::similarity_distribution(
                &matrix,
                &corpus,
                &subset,
                args.max_pairs,
                seed,
                args.bins,
            )?)
        }
        None => None,
    };
    let doc = json!({
        "metadata": manifest,
        "summary": summary,
        "score_histogram": histogram,
        "score_histograms_by_language": by_language,
        "similarity": similarity,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(&args.out, text).with_context(|| args.out.display().to_string())?;
    eprintln!(
        "report: mean s {:.6} over {} samples",
        summary.full.overall.mean, summary.full.overall.count
    );
    Ok(())
}
