//! File formats: TREC run files, qrels, topic files, and the JSON-lines
//! corpus.
//!
//! Run lines are `qid Q0 docid rank score tag` with the score printed at six
//! decimal places; writing then reading a canonical file reproduces it byte
//! for byte. Qrels lines are whitespace-separated `qid 0 docid grade`.
//! Topics are `qid<TAB>query text`. Corpus lines are JSON objects with `id`
//! and `contents` fields.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::Document;
use crate::retrieval::{Hit, QueryTopic, RankedList, Run};

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Write a run in TREC format, topics in qid order, ranks 1-based.
pub fn write_run<W: Write>(run: &Run, w: &mut W) -> Result<()> {
    for list in run.values() {
        for (i, hit) in list.hits().iter().enumerate() {
            writeln!(
                w,
                "{} Q0 {} {} {:.6} {}",
                list.qid,
                hit.docid,
                i + 1,
                hit.score,
                list.tag
            )?;
        }
    }
    Ok(())
}

/// Parse a TREC run file. Validates per topic: contiguous lines, ranks
/// 1..=n without gaps, non-increasing scores, unique docids. Errors name the
/// offending line.
pub fn read_run<R: BufRead>(r: R, label: &str) -> Result<Run> {
    let mut run = Run::new();
    let mut current: Option<(String, String, Vec<Hit>)> = None;

    let flush = |current: &mut Option<(String, String, Vec<Hit>)>,
                     run: &mut Run,
                     line_no: usize|
     -> Result<()> {
        if let Some((qid, tag, hits)) = current.take() {
            let list = RankedList::new(&qid, &tag, hits).map_err(|e| {
                parse_err(label, line_no, format!("invalid topic block: {e}"))
            })?;
            if run.insert(qid.clone(), list).is_some() {
                return Err(parse_err(
                    label,
                    line_no,
                    format!("topic `{qid}` appears in more than one block"),
                ));
            }
        }
        Ok(())
    };

    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(
                label,
                line_no,
                format!("expected 6 fields, got {}", fields.len()),
            ));
        }
        let (qid, docid, rank_s, score_s, tag) =
            (fields[0], fields[2], fields[3], fields[4], fields[5]);
        let rank: usize = rank_s
            .parse()
            .map_err(|_| parse_err(label, line_no, format!("bad rank `{rank_s}`")))?;
        let score: f64 = score_s
            .parse()
            .map_err(|_| parse_err(label, line_no, format!("bad score `{score_s}`")))?;
        if !score.is_finite() {
            return Err(parse_err(label, line_no, "non-finite score"));
        }

        let start_new = match &current {
            None => true,
            Some((cur_qid, _, _)) => cur_qid != qid,
        };
        if start_new {
            flush(&mut current, &mut run, line_no)?;
            if rank != 1 {
                return Err(parse_err(
                    label,
                    line_no,
                    format!("topic `{qid}` starts at rank {rank}, expected 1"),
                ));
            }
            current = Some((qid.to_string(), tag.to_string(), Vec::new()));
        }
        let (_, _, hits) = current.as_mut().expect("block exists");
        if rank != hits.len() + 1 {
            return Err(parse_err(
                label,
                line_no,
                format!("rank {rank} out of sequence, expected {}", hits.len() + 1),
            ));
        }
        if let Some(prev) = hits.last() {
            if prev.score < score {
                return Err(parse_err(
                    label,
                    line_no,
                    format!("score {score} increases over previous {}", prev.score),
                ));
            }
        }
        hits.push(Hit {
            docid: docid.to_string(),
            score,
        });
    }
    flush(&mut current, &mut run, 0)?;
    Ok(run)
}

/// Parse qrels: `qid 0 docid grade`. Duplicate (qid, docid) pairs keep the
/// last grade with a warning; a non-integer grade is an error.
pub fn read_qrels<R: BufRead>(r: R, label: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                label,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let grade: i32 = fields[3].parse().map_err(|_| {
            parse_err(label, line_no, format!("bad grade `{}`", fields[3]))
        })?;
        if let Some(old) = qrels.insert(fields[0], fields[2], grade) {
            log::warn!(
                "{label}:{line_no}: duplicate judgment for ({}, {}), {old} replaced by {grade}",
                fields[0],
                fields[2]
            );
        }
    }
    Ok(qrels)
}

pub fn write_qrels<W: Write>(qrels: &Qrels, w: &mut W) -> Result<()> {
    let mut topics: Vec<&str> = qrels.topics().collect();
    topics.sort_unstable();
    for qid in topics {
        let mut rows: Vec<(String, i32)> = Vec::new();
        // Qrels exposes grades per (qid, docid); re-collect sorted by docid.
        for docid in qrels.judged_docids(qid) {
            rows.push((docid.to_string(), qrels.grade(qid, &docid).unwrap()));
        }
        rows.sort();
        for (docid, grade) in rows {
            writeln!(w, "{qid} 0 {docid} {grade}")?;
        }
    }
    Ok(())
}

/// Parse a topic file: `qid<TAB>query text`, one per line. The text is
/// analyzed into query terms.
pub fn read_topics<R: BufRead>(r: R, label: &str) -> Result<Vec<QueryTopic>> {
    let mut topics = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((qid, text)) = line.split_once('\t') else {
            return Err(parse_err(label, line_no, "expected `qid<TAB>query text`"));
        };
        let qid = qid.trim();
        if qid.is_empty() {
            return Err(parse_err(label, line_no, "empty qid"));
        }
        if !seen.insert(qid.to_string()) {
            return Err(parse_err(label, line_no, format!("duplicate qid `{qid}`")));
        }
        topics.push(QueryTopic::from_text(qid, text));
    }
    Ok(topics)
}

pub fn write_topics<W: Write>(topics: &[(String, String)], w: &mut W) -> Result<()> {
    for (qid, text) in topics {
        writeln!(w, "{qid}\t{text}")?;
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct CorpusRecord {
    id: String,
    contents: String,
}

/// Parse a JSON-lines corpus: one object with `id` and `contents` per line.
pub fn read_corpus_jsonl<R: BufRead>(r: R, label: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| parse_err(label, line_no, format!("bad corpus record: {e}")))?;
        docs.push(Document {
            docid: record.id,
            text: record.contents,
        });
    }
    Ok(docs)
}

pub fn write_corpus_jsonl<W: Write>(docs: &[Document], w: &mut W) -> Result<()> {
    for doc in docs {
        let record = serde_json::json!({ "id": doc.docid, "contents": doc.text });
        writeln!(w, "{record}")?;
    }
    Ok(())
}

// Path conveniences used by the CLI.

pub fn read_run_path<P: AsRef<Path>>(path: P) -> Result<Run> {
    let label = path.as_ref().display().to_string();
    read_run(BufReader::new(File::open(path)?), &label)
}

pub fn write_run_path<P: AsRef<Path>>(run: &Run, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_run(run, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_qrels_path<P: AsRef<Path>>(path: P) -> Result<Qrels> {
    let label = path.as_ref().display().to_string();
    read_qrels(BufReader::new(File::open(path)?), &label)
}

pub fn read_topics_path<P: AsRef<Path>>(path: P) -> Result<Vec<QueryTopic>> {
    let label = path.as_ref().display().to_string();
    read_topics(BufReader::new(File::open(path)?), &label)
}

pub fn read_corpus_path<P: AsRef<Path>>(path: P) -> Result<Vec<Document>> {
    let label = path.as_ref().display().to_string();
    read_corpus_jsonl(BufReader::new(File::open(path)?), &label)
}

/// Read a whole file into a string (report inputs etc.).
pub fn read_to_string<P: AsRef<Path>>(path: P) -> Result<String> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}
