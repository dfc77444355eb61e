//! Report rendering: human-readable tables and machine-readable JSON lines
//! (one metric record per line).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;

use crate::eval::{DeltaReport, EvalReport, TTest};

/// One `key value` header line per entry, prefixed with `#`, for
/// reproducibility manifests at the top of reports.
pub fn manifest_header(entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (key, value) in entries {
        writeln!(out, "# {key}: {value}").unwrap();
    }
    out
}

/// Per-topic AP table plus the MAP line.
pub fn ap_table(per_topic: &BTreeMap<String, f64>, map: f64) -> String {
    let mut out = String::new();
    writeln!(out, "{:<12} {:>10}", "topic", "AP").unwrap();
    for (qid, ap) in per_topic {
        writeln!(out, "{qid:<12} {ap:>10.4}").unwrap();
    }
    writeln!(out, "{:<12} {:>10.4}  ({} topics)", "MAP", map, per_topic.len()).unwrap();
    out
}

pub fn ap_jsonl(per_topic: &BTreeMap<String, f64>, map: f64) -> Vec<String> {
    let mut lines: Vec<String> = per_topic
        .iter()
        .map(|(qid, ap)| json!({"type": "ap", "qid": qid, "ap": ap}).to_string())
        .collect();
    lines.push(json!({"type": "map", "value": map, "topics": per_topic.len()}).to_string());
    lines
}

fn format_p(p: f64) -> String {
    if p == 0.0 {
        "0".to_string()
    } else if p >= 1e-3 {
        format!("{p:.7}")
    } else {
        format!("{p:.3e}")
    }
}

/// Significance summary for a base/candidate pair.
pub fn sigtest_table(base_map: f64, cand_map: f64, t: &TTest, delta: &DeltaReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:<18} {:>10.4}", "base MAP", base_map).unwrap();
    writeln!(out, "{:<18} {:>10.4}", "candidate MAP", cand_map).unwrap();
    writeln!(out, "{:<18} {:>10.4}", "t statistic", t.t).unwrap();
    writeln!(out, "{:<18} {:>10}", "df", t.df).unwrap();
    writeln!(out, "{:<18} {:>10}", "p (two-tailed)", format_p(t.p)).unwrap();
    writeln!(
        out,
        "helped {} / hurt {} / unchanged {} (|delta AP| > {})",
        delta.helped, delta.hurt, delta.unchanged, delta.threshold
    )
    .unwrap();
    out
}

pub fn sigtest_jsonl(
    base_map: f64,
    cand_map: f64,
    t: &TTest,
    delta: &DeltaReport,
) -> Vec<String> {
    let mut lines = vec![
        json!({"type": "map", "run": "base", "value": base_map}).to_string(),
        json!({"type": "map", "run": "candidate", "value": cand_map}).to_string(),
        json!({"type": "ttest", "t": t.t, "df": t.df, "p": t.p, "mean_delta": t.mean_delta})
            .to_string(),
        json!({
            "type": "delta",
            "helped": delta.helped,
            "hurt": delta.hurt,
            "unchanged": delta.unchanged,
            "threshold": delta.threshold
        })
        .to_string(),
    ];
    for (qid, base_ap, cand_ap, d) in &delta.per_topic {
        lines.push(
            json!({
                "type": "delta_topic",
                "qid": qid,
                "base_ap": base_ap,
                "cand_ap": cand_ap,
                "delta": d
            })
            .to_string(),
        );
    }
    lines
}

/// Distribution summary of per-topic tau values at each cutoff.
pub fn tau_table(tau_at_k: &BTreeMap<usize, Vec<(String, f64)>>) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>6} {:>7} {:>8} {:>8} {:>8} {:>8}",
        "k", "topics", "mean", "median", "min", "max"
    )
    .unwrap();
    for (k, taus) in tau_at_k {
        if taus.is_empty() {
            writeln!(out, "{k:>6} {:>7} {:>8} {:>8} {:>8} {:>8}", 0, "-", "-", "-", "-").unwrap();
            continue;
        }
        let mut values: Vec<f64> = taus.iter().map(|&(_, t)| t).collect();
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let median = if values.len() % 2 == 1 {
            values[values.len() / 2]
        } else {
            0.5 * (values[values.len() / 2 - 1] + values[values.len() / 2])
        };
        writeln!(
            out,
            "{k:>6} {:>7} {mean:>8.4} {median:>8.4} {:>8.4} {:>8.4}",
            values.len(),
            values[0],
            values[values.len() - 1]
        )
        .unwrap();
    }
    out
}

/// One record per topic per cutoff, ready for external box-plot tooling.
pub fn tau_jsonl(tau_at_k: &BTreeMap<usize, Vec<(String, f64)>>) -> Vec<String> {
    let mut lines = Vec::new();
    for (k, taus) in tau_at_k {
        for (qid, tau) in taus {
            lines.push(json!({"type": "tau", "k": k, "qid": qid, "tau": tau}).to_string());
        }
    }
    lines
}

/// Full comparison report (sigtest plus tau distributions).
pub fn comparison_table(report: &EvalReport) -> String {
    let mut out = sigtest_table(
        report.base_map,
        report.cand_map,
        &report.t_test,
        &report.delta,
    );
    out.push('\n');
    out.push_str(&tau_table(&report.tau_at_k));
    out
}
