mod settings;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use cqa_core::centrality::{central_words, format_centrality_table};
use cqa_core::corpus::{ingest_corpus, read_questions_file};
use cqa_core::eval::{format_eval_report, mean_average_precision, read_qrels_file, read_run_file, split_dev_test};
use cqa_core::pipeline::{expand_query, format_tune_report, run_method, tune, Method, Resources};
use cqa_core::retrieval::{build_translation_table, format_run_lines, Scorer};
use cqa_core::{ContextualIndex, ContextualStore, Corpus, EmbeddingTable, Error, Question, TranslationTable};

use settings::{read_config_file, Settings};

#[derive(Parser, Debug)]
#[command(name = "cqa", version, about = "Question retrieval with query expansion for CQA archives")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus file (one JSON record per line).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Index directory written by `cqa index` (used instead of --corpus).
    #[arg(long, global = true)]
    index: Option<PathBuf>,
    /// Input questions in the corpus record format.
    #[arg(long, global = true)]
    queries: Option<PathBuf>,
    /// Static word embeddings in word2vec text format.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Contextual token vectors, one JSON record per question.
    #[arg(long = "ctx-store", global = true)]
    ctx_store: Option<PathBuf>,
    /// Relevance judgments in TREC qrels format.
    #[arg(long, global = true)]
    qrels: Option<PathBuf>,
    /// Output file or directory; standard output when omitted for file outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Per-query diagnostics (JSON lines).
    #[arg(long, global = true)]
    diag: Option<PathBuf>,
    /// bm25, lmir, trlm, lm-prf, expAL, expKuzi, expELMo or expELMoPRF, optionally with -centrality.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available processors).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run-file depth per query.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Parameter override, e.g. `--set mu=500` or `--set synth.vocab_size=800`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize and index a corpus.
    Index,
    /// Rank the corpus for every input question and write a TREC run.
    Retrieve,
    /// Dump the expanded query model of every input question.
    Expand,
    /// Print per-term centrality and the central-word set of every input question.
    Central,
    /// Score run files against judgments.
    Eval {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Grid-search parameters on the dev half of the input questions.
    Tune {
        /// `name=v1,v2,...`; repeat for a multi-parameter grid.
        #[arg(long, required = true)]
        grid: Vec<String>,
    },
    /// Generate a synthetic lexical-gap collection.
    Synth,
}

fn settings_from(common: &Common) -> Result<Settings, Error> {
    let mut entries: Vec<(String, String)> = match &common.config {
        Some(path) => read_config_file(path)?.into_iter().collect(),
        None => Vec::new(),
    };
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            entries.push((k.to_owned(), v));
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    flag("corpus", path(&common.corpus));
    flag("index", path(&common.index));
    flag("queries", path(&common.queries));
    flag("embeddings", path(&common.embeddings));
    flag("ctx_store", path(&common.ctx_store));
    flag("qrels", path(&common.qrels));
    flag("out", path(&common.out));
    flag("diag", path(&common.diag));
    flag("method", common.method.clone());
    flag("seed", common.seed.map(|s| s.to_string()));
    flag("workers", common.workers.map(|w| w.to_string()));
    flag("depth", common.depth.map(|d| d.to_string()));
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        entries.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Settings::resolve(&entries)
}

fn load_corpus(s: &Settings) -> Result<Corpus> {
    if let Some(dir) = s.path("index") {
        return Ok(Corpus::read_index(dir)?);
    }
    let path = s
        .path("corpus")
        .ok_or_else(|| Error::Config("provide --corpus or --index".into()))?;
    let (corpus, report) = ingest_corpus(path, &s.fields)?;
    if report.skipped_empty > 0 {
        log::warn!("{}: skipped {} questions without tokens", path.display(), report.skipped_empty);
    }
    Ok(corpus)
}

fn load_queries(s: &Settings) -> Result<Vec<Question>> {
    let path = s.require_path("queries")?;
    let (queries, report) = read_questions_file(path, &s.fields)?;
    if report.skipped_empty > 0 {
        log::warn!("{}: skipped {} input questions without tokens", path.display(), report.skipped_empty);
    }
    if queries.is_empty() {
        return Err(Error::Insufficient(format!("{}: no input questions", path.display())).into());
    }
    Ok(queries)
}

/// Auxiliary inputs loaded for a method.
struct Loaded {
    embeddings: Option<EmbeddingTable<f64>>,
    contextual: Option<ContextualStore<f64>>,
    translation: Option<TranslationTable<f64>>,
}

fn load_aux(s: &Settings, method: Method, corpus: &Corpus, queries: &[Question]) -> Result<Loaded> {
    let embeddings = match (method.needs_embeddings(), s.path("embeddings")) {
        (true, Some(p)) => {
            let (table, report) = EmbeddingTable::load(p)?;
            if report.duplicates > 0 {
                log::warn!("{}: {} duplicate rows, kept the last of each", p.display(), report.duplicates);
            }
            Some(table)
        }
        (true, None) => {
            return Err(Error::Config(format!("method {method} needs word embeddings (--embeddings)")).into())
        }
        _ => None,
    };
    let contextual = match (method.needs_contextual(), s.path("ctx_store")) {
        (true, Some(p)) => {
            let lengths: BTreeMap<&str, usize> = corpus
                .questions()
                .iter()
                .chain(queries)
                .map(|q| (q.id.as_str(), q.len()))
                .collect();
            Some(ContextualStore::load(p, |id| lengths.get(id).copied())?)
        }
        (true, None) => {
            return Err(Error::Config(format!("method {method} needs a contextual store (--ctx-store)")).into())
        }
        _ => None,
    };
    let translation = if method.needs_translation() {
        Some(build_translation_table(
            corpus,
            1,
            s.params.scoring.translation_self_prob,
            &s.fields.tokenizer,
        )?)
    } else {
        None
    };
    Ok(Loaded {
        embeddings,
        contextual,
        translation,
    })
}

fn resources<'a>(corpus: &'a Corpus, loaded: &'a Loaded) -> Result<Resources<'a, f64>> {
    let mut res = Resources::new(corpus);
    if let Some(t) = &loaded.embeddings {
        res = res.with_embeddings(t);
    }
    if let Some(store) = &loaded.contextual {
        res = res.with_contextual(ContextualIndex::build(corpus, store)?);
    }
    if let Some(t) = &loaded.translation {
        res = res.with_translation(t);
    }
    Ok(res)
}

fn write_output(s: &Settings, text: &str) -> Result<()> {
    match s.path("out") {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(p, text).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn write_lines(path: &Path, lines: &[serde_json::Value]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn cmd_index(s: &Settings) -> Result<()> {
    let corpus = load_corpus(s)?;
    let out = s.require_path("out")?;
    corpus.write_index(out)?;
    log::info!("indexed {} questions into {}", corpus.len(), out.display());
    Ok(())
}

fn cmd_retrieve(s: &Settings) -> Result<()> {
    let method = s.require_method()?;
    let corpus = load_corpus(s)?;
    let queries = load_queries(s)?;
    let loaded = load_aux(s, method, &corpus, &queries)?;
    let res = resources(&corpus, &loaded)?;
    let outcomes = run_method(method, &queries, &res, &s.params)?;
    let tag = s.params.run_tag(method);
    let mut text = String::new();
    for o in &outcomes {
        text.push_str(&format_run_lines(&o.ranked, &tag));
    }
    write_output(s, &text)?;

    let diag: Vec<serde_json::Value> = outcomes
        .iter()
        .map(|o| {
            let d = &o.expanded.diagnostics;
            serde_json::json!({
                "query_id": o.ranked.query_id,
                "method": method.to_string(),
                "central": o.central.as_ref().map(|c| &c.central),
                "excluded": o.expanded.excluded,
                "degraded": d.degraded,
                "intersection_fallback": d.intersection_fallback,
                "elmo_feedback": d.elmo_feedback,
                "prf_feedback": d.prf_feedback,
            })
        })
        .collect();
    if let Some(p) = s.path("diag") {
        write_lines(p, &diag)?;
    }
    for o in &outcomes {
        if let Some(c) = &o.central {
            log::info!("{}: central words {}", o.ranked.query_id, c.central.set.join(","));
        }
    }
    Ok(())
}

fn sorted(mut queries: Vec<Question>) -> Vec<Question> {
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    queries
}

fn cmd_expand(s: &Settings) -> Result<()> {
    let method = s.require_method()?;
    let corpus = load_corpus(s)?;
    let queries = sorted(load_queries(s)?);
    let loaded = load_aux(s, method, &corpus, &queries)?;
    let res = resources(&corpus, &loaded)?;
    let params_json = s.params.to_json();
    let records = queries
        .par_iter()
        .map(|q| {
            let (e, central) = expand_query(method, q, &res, &s.params)?;
            let mut rec = e.dump(&params_json);
            rec["method"] = serde_json::json!(method.to_string());
            rec["central"] = serde_json::json!(central.map(|c| c.central));
            Ok(rec)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let text: String = records.iter().map(|r| format!("{r}\n")).collect();
    write_output(s, &text)
}

fn cmd_central(s: &Settings) -> Result<()> {
    let corpus = load_corpus(s)?;
    let queries = sorted(load_queries(s)?);
    let reports = queries
        .par_iter()
        .map(|q| central_words(q, &corpus, &s.params.centrality, Scorer::Lmir, &s.params.scoring))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut text = String::from("query\tterm\tcentrality\tidf\tdidf\timportance\n");
    for r in &reports {
        text.push_str(&format_centrality_table(r));
    }
    write_output(s, &text)
}

fn cmd_eval(s: &Settings, runs: &[PathBuf]) -> Result<()> {
    let judgments = read_qrels_file(s.require_path("qrels")?)?;
    let mut named = Vec::new();
    for path in runs {
        let run = read_run_file(path)?;
        let report = mean_average_precision(&run, &judgments)?;
        if !report.unevaluable.is_empty() {
            log::warn!(
                "{}: {} queries have no relevant judgment and were left out: {}",
                path.display(),
                report.unevaluable.len(),
                report.unevaluable.join(" ")
            );
        }
        if !report.missing_from_run.is_empty() {
            log::warn!(
                "{}: {} judged queries are missing from the run (scored 0): {}",
                path.display(),
                report.missing_from_run.len(),
                report.missing_from_run.join(" ")
            );
        }
        named.push((path.display().to_string(), report));
    }
    write_output(s, &format_eval_report(&named)?)
}

fn parse_grid(specs: &[String]) -> Result<Vec<(String, Vec<String>)>, Error> {
    specs
        .iter()
        .map(|g| {
            let (name, values) = g
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--grid expects name=v1,v2,..., got `{g}`")))?;
            let values: Vec<String> = values
                .split(',')
                .map(|v| v.trim().to_owned())
                .filter(|v| !v.is_empty())
                .collect();
            Ok((name.trim().to_owned(), values))
        })
        .collect()
}

fn cmd_tune(s: &Settings, grid: &[String]) -> Result<()> {
    let method = s.require_method()?;
    let grid = parse_grid(grid)?;
    let corpus = load_corpus(s)?;
    let queries = load_queries(s)?;
    let judgments = read_qrels_file(s.require_path("qrels")?)?;
    let ids: Vec<String> = queries.iter().map(|q| q.id.clone()).collect();
    let (dev, test) = split_dev_test(&ids, s.seed)?;
    let dev_judgments = judgments.restrict(dev.iter().map(String::as_str));
    let dev_set: std::collections::BTreeSet<&str> = dev.iter().map(String::as_str).collect();
    let dev_queries: Vec<Question> = queries.iter().filter(|q| dev_set.contains(q.id.as_str())).cloned().collect();
    log::info!("tuning on {} dev queries, {} held out", dev.len(), test.len());
    let loaded = load_aux(s, method, &corpus, &queries)?;
    let res = resources(&corpus, &loaded)?;
    let report = tune(method, &dev_queries, &dev_judgments, &res, &s.params, &grid)?;
    write_output(s, &format_tune_report(&report))
}

fn cmd_synth(s: &Settings) -> Result<()> {
    let out = s.require_path("out")?;
    let collection = cqa_core::generate::<f64>(&s.synth)?;
    collection.write_dir(out)?;
    log::info!(
        "wrote {} corpus questions and {} input questions to {}",
        collection.corpus.len(),
        collection.queries.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let s = settings_from(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.workers)
        .build()
        .context("starting worker pool")?;
    pool.install(|| match &cli.command {
        Command::Index => cmd_index(&s),
        Command::Retrieve => cmd_retrieve(&s),
        Command::Expand => cmd_expand(&s),
        Command::Central => cmd_central(&s),
        Command::Eval { runs } => cmd_eval(&s, runs),
        Command::Tune { grid } => cmd_tune(&s, grid),
        Command::Synth => cmd_synth(&s),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_config() => 1,
        _ => 2,
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
