//! `prf`: index a corpus, produce BM25/BM25+RM3 runs, rerank them with
//! per-topic classifiers, tune parameters by cross-validation, and evaluate.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::{parse_list, resolve, resolve_opt, Config};
use prf_core::classify::PseudoLabelConfig;
use prf_core::cv::{grid_search_cv, tenth_alpha_grid, CvConfig};
use prf_core::eval::{
    delta_analysis, kendall_tau_at_k, mean_ap, paired_t_test, DEFAULT_DELTA_THRESHOLD,
    DEFAULT_TAU_CUTOFFS,
};
use prf_core::rerank::{prf_rerank_run, InterpolationParams, RerankMethod};
use prf_core::report;
use prf_core::retrieval::{bm25_run, rm3_run, Bm25Params, Rm3Params};
use prf_core::runio;
use prf_core::snapshot;
use prf_core::synthetic::{generate_synthetic, SynthSpec};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub struct CliError {
    code: i32,
    msg: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: 1,
            msg: msg.into(),
        }
    }

    fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<prf_core::Error> for CliError {
    fn from(e: prf_core::Error) -> Self {
        match e {
            prf_core::Error::InvalidParam(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "prf", version, about = "Pseudo-relevance feedback via per-topic text classification")]
struct Cli {
    /// Key-value config file mirroring the long flags; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index snapshot from a JSON-lines corpus (`id`, `contents`).
    Index {
        /// Corpus path (JSON lines).
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Snapshot output path.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Produce a BM25 or BM25+RM3 base run over a topic file.
    Search {
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        /// Topic file: `qid<TAB>query text`.
        #[arg(long, value_name = "FILE")]
        topics: Option<PathBuf>,
        /// Run file output path.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[arg(long, value_name = "F")]
        bm25_k1: Option<f64>,
        #[arg(long, value_name = "F")]
        bm25_b: Option<f64>,
        /// Expand queries with RM3 and run a second weighted pass.
        #[arg(long)]
        rm3: bool,
        #[arg(long, value_name = "N")]
        fb_docs: Option<usize>,
        #[arg(long, value_name = "N")]
        fb_terms: Option<usize>,
        #[arg(long, value_name = "F")]
        orig_weight: Option<f64>,
        /// Retrieval depth.
        #[arg(long, value_name = "N")]
        hits: Option<usize>,
        /// Run tag (single token).
        #[arg(long, value_name = "TAG")]
        tag: Option<String>,
    },
    /// Rerank a base run with per-topic pseudo-label classifiers.
    RerankPrf {
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        base_run: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// lr, svm or ensemble.
        #[arg(long, value_name = "KIND")]
        classifier: Option<String>,
        /// Pseudo-positive window size.
        #[arg(long, value_name = "N")]
        r: Option<usize>,
        /// Pseudo-negative window size.
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        /// Interpolation weight on the retrieval score.
        #[arg(long, value_name = "F")]
        alpha: Option<f64>,
        /// Dump trained models (`qid kind bias nnz term:weight ...`).
        #[arg(long, value_name = "FILE")]
        dump_models: Option<PathBuf>,
    },
    /// Cross-validated grid search over (r, n, alpha).
    CvTune {
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        base_run: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        qrels: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[arg(long, value_name = "KIND")]
        classifier: Option<String>,
        #[arg(long, value_name = "N")]
        folds: Option<usize>,
        /// Comma-separated r grid, e.g. 10,20,30.
        #[arg(long, value_name = "LIST")]
        r_grid: Option<String>,
        /// Comma-separated n grid.
        #[arg(long, value_name = "LIST")]
        n_grid: Option<String>,
        /// Comma-separated alpha grid.
        #[arg(long, value_name = "LIST")]
        alpha_grid: Option<String>,
        /// AP evaluation depth.
        #[arg(long, value_name = "N")]
        depth: Option<usize>,
        /// Also write JSON-lines records here.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Score one run against qrels (per-topic AP and MAP).
    Evaluate {
        #[arg(long, value_name = "FILE")]
        run: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        qrels: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        depth: Option<usize>,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Paired two-tailed t-test and delta buckets between two runs.
    Sigtest {
        #[arg(long, value_name = "FILE")]
        base_run: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        run: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        qrels: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        depth: Option<usize>,
        /// |delta AP| needed before a topic counts as helped/hurt.
        #[arg(long, value_name = "F")]
        threshold: Option<f64>,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Kendall tau between two runs over the base run's top-k docids.
    Tau {
        #[arg(long, value_name = "FILE")]
        base_run: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        run: Option<PathBuf>,
        /// Comma-separated rank cutoffs.
        #[arg(long, value_name = "LIST")]
        cutoffs: Option<String>,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic corpus, topics and qrels.
    GenSynthetic {
        /// Directory for corpus.jsonl, topics.tsv and qrels.txt.
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        #[arg(long, value_name = "N")]
        n_topics: Option<usize>,
        #[arg(long, value_name = "N")]
        docs_per_topic: Option<usize>,
        #[arg(long, value_name = "N")]
        background_docs: Option<usize>,
        #[arg(long, value_name = "N")]
        vocab_size: Option<usize>,
        #[arg(long, value_name = "F")]
        relevance_signal: Option<f64>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match execute(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.msg);
            std::process::exit(e.code);
        }
    }
}

fn require<T>(flag: Option<T>, cfg_value: Option<T>, key: &str) -> Result<T, CliError> {
    flag.or(cfg_value).ok_or_else(|| {
        CliError::usage(format!("missing --{key} (also settable as config key `{key}`)"))
    })
}

fn require_path(
    flag: Option<PathBuf>,
    config: &Config,
    key: &str,
) -> Result<PathBuf, CliError> {
    let from_cfg = config.raw(key).map(PathBuf::from);
    require(flag, from_cfg, key)
}

fn load_index(path: &Path) -> Result<prf_core::index::InvertedIndex, CliError> {
    snapshot::load_from_path(path)
        .map_err(|e| CliError::data(format!("loading index {}: {e}", path.display())))
}

fn write_json_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut w = BufWriter::new(
        File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?,
    );
    for line in lines {
        writeln!(w, "{line}").map_err(|e| CliError::data(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::data(e.to_string()))?;
    Ok(())
}

fn classifier_from(raw: &str) -> Result<RerankMethod, CliError> {
    raw.parse::<RerankMethod>().map_err(CliError::from)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Index { input, output } => {
            let input = require_path(input, &config, "input")?;
            let output = require_path(output, &config, "output")?;
            let docs = runio::read_corpus_path(&input)?;
            let index = prf_core::index::build_index(docs)?;
            snapshot::save_to_path(&index, &output)?;
            let stats = index.stats();
            println!(
                "indexed {} documents, {} terms, avgdl {:.2} -> {}",
                stats.n_docs,
                index.n_terms(),
                stats.avgdl,
                output.display()
            );
            Ok(())
        }

        Command::Search {
            index,
            topics,
            output,
            bm25_k1,
            bm25_b,
            rm3,
            fb_docs,
            fb_terms,
            orig_weight,
            hits,
            tag,
        } => {
            let index_path = require_path(index, &config, "index")?;
            let topics_path = require_path(topics, &config, "topics")?;
            let output = require_path(output, &config, "output")?;
            let bm25 = Bm25Params {
                k1: resolve(bm25_k1, &config, "bm25-k1", 0.9)?,
                b: resolve(bm25_b, &config, "bm25-b", 0.4)?,
            };
            bm25.validate()?;
            let use_rm3 = rm3 || config.get::<bool>("rm3")?.unwrap_or(false);
            let depth = resolve(hits, &config, "hits", 1000)?;
            let index = load_index(&index_path)?;
            let topics = runio::read_topics_path(&topics_path)?;
            let run = if use_rm3 {
                let rm3_params = Rm3Params {
                    fb_docs: resolve(fb_docs, &config, "fb-docs", 10)?,
                    fb_terms: resolve(fb_terms, &config, "fb-terms", 10)?,
                    orig_weight: resolve(orig_weight, &config, "orig-weight", 0.5)?,
                };
                rm3_params.validate()?;
                let tag = resolve_tag(
                    tag,
                    &config,
                    format!(
                        "bm25-rm3-k{}-b{}-fd{}-ft{}-ow{}",
                        bm25.k1, bm25.b, rm3_params.fb_docs, rm3_params.fb_terms, rm3_params.orig_weight
                    ),
                )?;
                rm3_run(&index, &topics, &bm25, &rm3_params, depth, &tag)?
            } else {
                let tag = resolve_tag(tag, &config, format!("bm25-k{}-b{}", bm25.k1, bm25.b))?;
                bm25_run(&index, &topics, &bm25, depth, &tag)?
            };
            runio::write_run_path(&run, &output)?;
            println!(
                "searched {} topics at depth {depth} -> {}",
                run.len(),
                output.display()
            );
            Ok(())
        }

        Command::RerankPrf {
            index,
            base_run,
            output,
            classifier,
            r,
            n,
            alpha,
            dump_models,
        } => {
            let index_path = require_path(index, &config, "index")?;
            let base_path = require_path(base_run, &config, "base-run")?;
            let output = require_path(output, &config, "output")?;
            let classifier = require(classifier, config.raw("classifier").map(String::from), "classifier")?;
            let method = classifier_from(&classifier)?;
            let window = PseudoLabelConfig {
                positives: resolve(r, &config, "r", 10)?,
                negatives: resolve(n, &config, "n", 100)?,
            };
            let params = InterpolationParams::new(resolve(alpha, &config, "alpha", 0.6)?)?;
            let dump_path = resolve_opt(dump_models, &config, "dump-models")?;

            let index = load_index(&index_path)?;
            let base = runio::read_run_path(&base_path)?;
            let outcome = prf_rerank_run(&index, &base, &window, method, &params)?;
            runio::write_run_path(&outcome.run, &output)?;
            if let Some(dump_path) = dump_path {
                let mut lines = Vec::with_capacity(outcome.models.len());
                for (qid, model) in &outcome.models {
                    lines.push(model.dump_line(qid, &index));
                }
                write_json_lines(&dump_path, &lines)?; // plain lines, one per model
            }
            println!(
                "reranked {} topics ({} passed through) -> {}",
                outcome.run.len(),
                outcome.passed_through.len(),
                output.display()
            );
            Ok(())
        }

        Command::CvTune {
            index,
            base_run,
            qrels,
            output,
            classifier,
            folds,
            r_grid,
            n_grid,
            alpha_grid,
            depth,
            json,
        } => {
            let index_path = require_path(index, &config, "index")?;
            let base_path = require_path(base_run, &config, "base-run")?;
            let qrels_path = require_path(qrels, &config, "qrels")?;
            let output = require_path(output, &config, "output")?;
            let classifier = require(classifier, config.raw("classifier").map(String::from), "classifier")?;
            let method = classifier_from(&classifier)?;
            let cv = CvConfig {
                folds: resolve(folds, &config, "folds", 5)?,
                positives_grid: match resolve_opt(r_grid, &config, "r-grid")? {
                    Some(raw) => parse_list::<usize>(&raw, "r-grid")?,
                    None => vec![10, 20, 30],
                },
                negatives_grid: match resolve_opt(n_grid, &config, "n-grid")? {
                    Some(raw) => parse_list::<usize>(&raw, "n-grid")?,
                    None => vec![100],
                },
                alpha_grid: match resolve_opt(alpha_grid, &config, "alpha-grid")? {
                    Some(raw) => parse_list::<f64>(&raw, "alpha-grid")?,
                    None => tenth_alpha_grid(),
                },
            };
            let depth = resolve(depth, &config, "depth", 1000)?;
            let json_path = resolve_opt(json, &config, "json")?;

            let index = load_index(&index_path)?;
            let base = runio::read_run_path(&base_path)?;
            let judgments = runio::read_qrels_path(&qrels_path)?;
            let outcome = grid_search_cv(&index, &base, &judgments, &cv, method, depth)?;
            runio::write_run_path(&outcome.run, &output)?;

            print!(
                "{}",
                report::manifest_header(&[
                    ("prf", VERSION.to_string()),
                    ("command", "cv-tune".to_string()),
                    ("classifier", method.to_string()),
                    ("folds", cv.folds.to_string()),
                    ("grid-size", cv.grid_size().to_string()),
                    ("base-run", base_path.display().to_string()),
                    ("qrels", qrels_path.display().to_string()),
                    ("depth", depth.to_string()),
                ])
            );
            println!("{:<6} {:<24} {:>10}  test topics", "fold", "chosen", "train MAP");
            for choice in &outcome.choices {
                println!(
                    "{:<6} {:<24} {:>10.4}  {}",
                    choice.fold_id,
                    choice.point.to_string(),
                    choice.train_map,
                    choice.test_qids.len()
                );
            }
            println!("cross-validated MAP {:.4} -> {}", outcome.map, output.display());

            if let Some(path) = json_path {
                let mut lines = vec![serde_meta("cv-tune")];
                for c in &outcome.choices {
                    lines.push(format!(
                        "{{\"type\":\"fold\",\"fold\":{},\"r\":{},\"n\":{},\"alpha\":{},\"train_map\":{},\"test_topics\":{}}}",
                        c.fold_id,
                        c.point.positives,
                        c.point.negatives,
                        c.point.alpha,
                        c.train_map,
                        c.test_qids.len()
                    ));
                }
                lines.push(format!("{{\"type\":\"map\",\"value\":{}}}", outcome.map));
                write_json_lines(&path, &lines)?;
            }
            Ok(())
        }

        Command::Evaluate {
            run,
            qrels,
            depth,
            json,
        } => {
            let run_path = require_path(run, &config, "run")?;
            let qrels_path = require_path(qrels, &config, "qrels")?;
            let depth = resolve(depth, &config, "depth", 1000)?;
            let json_path = resolve_opt(json, &config, "json")?;

            let run = runio::read_run_path(&run_path)?;
            let judgments = runio::read_qrels_path(&qrels_path)?;
            let (map, per_topic) = mean_ap(&run, &judgments, depth)?;
            print!(
                "{}",
                report::manifest_header(&[
                    ("prf", VERSION.to_string()),
                    ("command", "evaluate".to_string()),
                    ("run", run_path.display().to_string()),
                    ("qrels", qrels_path.display().to_string()),
                    ("depth", depth.to_string()),
                ])
            );
            print!("{}", report::ap_table(&per_topic, map));
            if let Some(path) = json_path {
                let mut lines = vec![serde_meta("evaluate")];
                lines.extend(report::ap_jsonl(&per_topic, map));
                write_json_lines(&path, &lines)?;
            }
            Ok(())
        }

        Command::Sigtest {
            base_run,
            run,
            qrels,
            depth,
            threshold,
            json,
        } => {
            let base_path = require_path(base_run, &config, "base-run")?;
            let run_path = require_path(run, &config, "run")?;
            let qrels_path = require_path(qrels, &config, "qrels")?;
            let depth = resolve(depth, &config, "depth", 1000)?;
            let threshold = resolve(threshold, &config, "threshold", DEFAULT_DELTA_THRESHOLD)?;
            let json_path = resolve_opt(json, &config, "json")?;

            let base = runio::read_run_path(&base_path)?;
            let cand = runio::read_run_path(&run_path)?;
            let judgments = runio::read_qrels_path(&qrels_path)?;
            let (base_map, base_ap) = mean_ap(&base, &judgments, depth)?;
            let (cand_map, cand_ap) = mean_ap(&cand, &judgments, depth)?;
            let t = paired_t_test(&base_ap, &cand_ap)?;
            let delta = delta_analysis(&base_ap, &cand_ap, threshold)?;
            print!(
                "{}",
                report::manifest_header(&[
                    ("prf", VERSION.to_string()),
                    ("command", "sigtest".to_string()),
                    ("base-run", base_path.display().to_string()),
                    ("run", run_path.display().to_string()),
                    ("qrels", qrels_path.display().to_string()),
                    ("depth", depth.to_string()),
                    ("threshold", threshold.to_string()),
                ])
            );
            print!("{}", report::sigtest_table(base_map, cand_map, &t, &delta));
            if let Some(path) = json_path {
                let mut lines = vec![serde_meta("sigtest")];
                lines.extend(report::sigtest_jsonl(base_map, cand_map, &t, &delta));
                write_json_lines(&path, &lines)?;
            }
            Ok(())
        }

        Command::Tau {
            base_run,
            run,
            cutoffs,
            json,
        } => {
            let base_path = require_path(base_run, &config, "base-run")?;
            let run_path = require_path(run, &config, "run")?;
            let cutoffs = match resolve_opt(cutoffs, &config, "cutoffs")? {
                Some(raw) => parse_list::<usize>(&raw, "cutoffs")?,
                None => DEFAULT_TAU_CUTOFFS.to_vec(),
            };
            let json_path = resolve_opt(json, &config, "json")?;

            let base = runio::read_run_path(&base_path)?;
            let cand = runio::read_run_path(&run_path)?;
            let mut tau_at_k: BTreeMap<usize, Vec<(String, f64)>> = BTreeMap::new();
            for &k in &cutoffs {
                let mut taus = Vec::new();
                for (qid, base_list) in &base {
                    let Some(final_list) = cand.get(qid) else {
                        continue;
                    };
                    if base_list.len() < 2 {
                        log::warn!("topic {qid}: fewer than 2 hits, skipping tau");
                        continue;
                    }
                    taus.push((qid.clone(), kendall_tau_at_k(base_list, final_list, k)?));
                }
                tau_at_k.insert(k, taus);
            }
            print!(
                "{}",
                report::manifest_header(&[
                    ("prf", VERSION.to_string()),
                    ("command", "tau".to_string()),
                    ("base-run", base_path.display().to_string()),
                    ("run", run_path.display().to_string()),
                ])
            );
            print!("{}", report::tau_table(&tau_at_k));
            if let Some(path) = json_path {
                let mut lines = vec![serde_meta("tau")];
                lines.extend(report::tau_jsonl(&tau_at_k));
                write_json_lines(&path, &lines)?;
            }
            Ok(())
        }

        Command::GenSynthetic {
            output_dir,
            seed,
            n_topics,
            docs_per_topic,
            background_docs,
            vocab_size,
            relevance_signal,
        } => {
            let dir = require_path(output_dir, &config, "output-dir")?;
            let spec = SynthSpec {
                seed: resolve(seed, &config, "seed", 42)?,
                n_topics: resolve(n_topics, &config, "n-topics", 50)?,
                docs_per_topic: resolve(docs_per_topic, &config, "docs-per-topic", 20)?,
                n_background_docs: resolve(background_docs, &config, "background-docs", 5000)?,
                vocab_size: resolve(vocab_size, &config, "vocab-size", 5000)?,
                relevance_signal: resolve(relevance_signal, &config, "relevance-signal", 0.7)?,
            };
            let coll = generate_synthetic(&spec)?;
            std::fs::create_dir_all(&dir).map_err(|e| CliError::data(e.to_string()))?;

            let corpus_path = dir.join("corpus.jsonl");
            let mut w = BufWriter::new(
                File::create(&corpus_path).map_err(|e| CliError::data(e.to_string()))?,
            );
            runio::write_corpus_jsonl(&coll.documents, &mut w)?;
            w.flush().map_err(|e| CliError::data(e.to_string()))?;

            let topics_path = dir.join("topics.tsv");
            let mut w = BufWriter::new(
                File::create(&topics_path).map_err(|e| CliError::data(e.to_string()))?,
            );
            runio::write_topics(&coll.topics, &mut w)?;
            w.flush().map_err(|e| CliError::data(e.to_string()))?;

            let qrels_path = dir.join("qrels.txt");
            let mut w = BufWriter::new(
                File::create(&qrels_path).map_err(|e| CliError::data(e.to_string()))?,
            );
            runio::write_qrels(&coll.qrels, &mut w)?;
            w.flush().map_err(|e| CliError::data(e.to_string()))?;

            println!(
                "generated {} documents, {} topics, {} judgments (seed {}) -> {}",
                coll.documents.len(),
                coll.topics.len(),
                coll.qrels.len(),
                spec.seed,
                dir.display()
            );
            Ok(())
        }
    }
}

fn resolve_tag(
    flag: Option<String>,
    config: &Config,
    default: String,
) -> Result<String, CliError> {
    let tag = resolve(flag, config, "tag", default)?;
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(CliError::usage(format!(
            "run tag must be a non-empty single token, got `{tag}`"
        )));
    }
    Ok(tag)
}

fn serde_meta(command: &str) -> String {
    format!("{{\"type\":\"meta\",\"tool\":\"prf\",\"version\":\"{VERSION}\",\"command\":\"{command}\"}}")
}
