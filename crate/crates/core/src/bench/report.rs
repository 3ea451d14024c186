use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::handshake::NODE_ID_LEN;

use super::{BenchError, CircuitBenchmark, FetchBenchmark, FrequencyTable, OnionBenchmark, OverheadReport, Stats};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    V3bw,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::V3bw => "v3bw",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "v3bw" => Ok(ReportFormat::V3bw),
            other => Err(BenchError::UnknownFormat(other.to_string())),
        }
    }
}

/// `<experiment>-<seed>.<ext>`
pub fn report_file_name(experiment: &str, seed: u64, format: ReportFormat) -> String {
    format!("{experiment}-{seed}.{}", format.extension())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandwidthEntry {
    pub nickname: String,
    pub node_id: [u8; NODE_ID_LEN],
    /// Bits per second.
    pub bandwidth_bps: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Report {
    Stats(Stats),
    Circuits(CircuitBenchmark),
    Fetch(FetchBenchmark),
    Onion(OnionBenchmark),
    Overhead(OverheadReport),
    Frequency(FrequencyTable),
    Bandwidth(Vec<BandwidthEntry>),
}

impl Report {
    fn kind(&self) -> &'static str {
        match self {
            Report::Stats(_) => "stats",
            Report::Circuits(_) => "circuits",
            Report::Fetch(_) => "fetch",
            Report::Onion(_) => "onion",
            Report::Overhead(_) => "overhead",
            Report::Frequency(_) => "frequency",
            Report::Bandwidth(_) => "bandwidth",
        }
    }
}

/// Milliseconds and other reals: fixed six decimals.
fn num(x: f64) -> String {
    format!("{x:.6}")
}

const STATS_HEADER: &str = "n,mean,median,min,max,stdev,q1,q3";

fn stats_fields(s: &Stats) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        s.n,
        num(s.mean),
        num(s.median),
        num(s.min),
        num(s.max),
        num(s.stdev),
        num(s.q1),
        num(s.q3)
    )
}

fn stats_md_header(out: &mut String, first: &str) {
    let _ = writeln!(out, "| {first}n | mean | median | min | max | stdev | q1 | q3 |");
    let cols = if first.is_empty() { 8 } else { 9 };
    let _ = writeln!(out, "|{}", "---|".repeat(cols));
}

fn stats_md_row(out: &mut String, label: Option<&str>, s: &Stats) {
    let lead = label.map(|l| format!("{l} | ")).unwrap_or_default();
    let _ = writeln!(out, "| {lead}{} |", stats_fields(s).replace(',', " | "));
}

fn markdown(report: &Report) -> String {
    let mut o = String::new();
    match report {
        Report::Stats(s) => {
            let _ = writeln!(o, "# Summary (ms)\n");
            stats_md_header(&mut o, "");
            stats_md_row(&mut o, None, s);
        }
        Report::Circuits(b) => {
            let _ = writeln!(o, "# Circuit build times: {} (ms)\n", b.suite);
            stats_md_header(&mut o, "");
            stats_md_row(&mut o, None, &b.stats);
            let _ = writeln!(o, "\nfailures: {}", b.failures);
        }
        Report::Fetch(f) => {
            let _ = writeln!(
                o,
                "# Fetch round trips: {} ({} B request, {} B response, ms)\n",
                f.suite, f.request_bytes, f.response_bytes
            );
            stats_md_header(&mut o, "path | ");
            stats_md_row(&mut o, Some("circuit"), &f.circuit);
            stats_md_row(&mut o, Some("direct"), &f.direct);
            let _ = writeln!(o, "\ncircuit overhead: {} ms", num(f.overhead_ms));
            let _ = writeln!(o, "cells per fetch: {} forward, {} backward", f.cells_fwd, f.cells_bwd);
            let _ = writeln!(o, "failures: {}", f.failures);
        }
        Report::Onion(r) => {
            let _ = writeln!(
                o,
                "# Onion service `{}`: {} ({} B request, {} B response, ms)\n",
                r.service, r.suite, r.request_bytes, r.response_bytes
            );
            stats_md_header(&mut o, "phase | ");
            stats_md_row(&mut o, Some("connect"), &r.connect);
            stats_md_row(&mut o, Some("fetch"), &r.fetch);
            let _ = writeln!(o, "\nfailures: {}", r.failures);
        }
        Report::Overhead(r) => overhead_markdown(&mut o, r),
        Report::Frequency(t) => {
            let names: Vec<&str> = t.categories.iter().map(|c| c.name()).collect();
            let _ = writeln!(o, "# Operation counts per node\n");
            let _ = writeln!(o, "| node | role | {} |", names.join(" | "));
            let _ = writeln!(o, "|{}", "---|".repeat(names.len() + 2));
            for n in &t.nodes {
                let counts: Vec<String> = n.counts.iter().map(u64::to_string).collect();
                let _ = writeln!(o, "| {} | {} | {} |", n.nickname, n.role.name(), counts.join(" | "));
            }
            let _ = writeln!(o, "\n# Share of each operation per role\n");
            let _ = writeln!(o, "| role | {} |", names.join(" | "));
            let _ = writeln!(o, "|{}", "---|".repeat(names.len() + 1));
            for (role, shares) in &t.roles {
                let cells: Vec<String> = shares.iter().map(|x| num(*x)).collect();
                let _ = writeln!(o, "| {} | {} |", role.name(), cells.join(" | "));
            }
        }
        Report::Bandwidth(entries) => {
            let _ = writeln!(o, "# Measured relay bandwidth\n");
            let _ = writeln!(o, "| node | node_id | bw (bit/s) |\n|---|---|---|");
            for e in entries {
                let _ = writeln!(
                    o,
                    "| {} | {} | {} |",
                    e.nickname,
                    hex::encode(e.node_id),
                    bw_int(e.bandwidth_bps)
                );
            }
        }
    }
    o
}

fn overhead_markdown(o: &mut String, r: &OverheadReport) {
    let _ = writeln!(o, "# Handshake overhead: {} → {}\n", r.baseline, r.candidate);
    let _ = writeln!(
        o,
        "client device: {}; hop devices: {}\n",
        r.client_device,
        r.hop_devices.join(", ")
    );
    let _ = writeln!(o, "## Crypto delta per hop (ms)\n");
    let _ = writeln!(o, "| device | client | server | per hop |\n|---|---|---|---|");
    for d in &r.per_device {
        let _ = writeln!(
            o,
            "| {} | {} | {} | {} |",
            d.device,
            num(d.client_ms),
            num(d.server_ms),
            num(d.per_hop_ms)
        );
    }
    let _ = writeln!(o, "\n## 3-hop circuit\n");
    let _ = writeln!(o, "| quantity | value |\n|---|---|");
    for (k, v) in overhead_rows(r) {
        let _ = writeln!(o, "| {k} | {v} |");
    }
    let _ = writeln!(o, "\n## Key-exchange time ratios\n");
    let _ = writeln!(o, "| device | ratio | value |\n|---|---|---|");
    for k in &r.ke_ratios {
        let _ = writeln!(
            o,
            "| {} | {} / {} ({} / {} ms) | {:.2}× |",
            k.device,
            k.numerator,
            k.denominator,
            num(k.numerator_ms),
            num(k.denominator_ms),
            k.ratio
        );
    }
}

fn overhead_rows(r: &OverheadReport) -> Vec<(&'static str, String)> {
    vec![
        ("crypto_delta_ms", num(r.crypto_delta_ms)),
        ("onionskin_delta_bytes", r.onionskin_delta_bytes.to_string()),
        ("reply_delta_bytes", r.reply_delta_bytes.to_string()),
        ("handshake_delta_bytes", r.handshake_delta_bytes.to_string()),
        ("cell_delta", r.cell_delta.to_string()),
        ("wire_delta_bytes", r.wire_delta_bytes.to_string()),
        ("transfer_delta_ms", num(r.transfer_delta_ms)),
        ("baseline_analytic_ms", num(r.baseline_analytic_ms)),
        ("candidate_analytic_ms", num(r.candidate_analytic_ms)),
        ("analytic_delta_ms", num(r.analytic_delta_ms)),
        ("baseline_build_mean_ms", num(r.baseline_build.mean)),
        ("candidate_build_mean_ms", num(r.candidate_build.mean)),
        ("measured_build_delta_ms", num(r.measured_build_delta_ms)),
        ("baseline_fetch_ms", num(r.baseline_fetch_ms)),
        ("candidate_fetch_ms", num(r.candidate_fetch_ms)),
        ("measured_fetch_delta_ms", num(r.measured_fetch_delta_ms)),
        ("additive_projection_ms", num(r.additive_projection_ms)),
        ("proportional_projection_ms", num(r.proportional_projection_ms)),
        ("relative_delta", num(r.relative_delta)),
    ]
}

fn csv(report: &Report) -> String {
    let mut o = String::new();
    match report {
        Report::Stats(s) => {
            let _ = writeln!(o, "{STATS_HEADER}\n{}", stats_fields(s));
        }
        Report::Circuits(b) => {
            let _ = writeln!(o, "{STATS_HEADER}\n{}", stats_fields(&b.stats));
        }
        Report::Fetch(f) => {
            let _ = writeln!(o, "path,{STATS_HEADER}");
            let _ = writeln!(o, "circuit,{}", stats_fields(&f.circuit));
            let _ = writeln!(o, "direct,{}", stats_fields(&f.direct));
        }
        Report::Onion(r) => {
            let _ = writeln!(o, "phase,{STATS_HEADER}");
            let _ = writeln!(o, "connect,{}", stats_fields(&r.connect));
            let _ = writeln!(o, "fetch,{}", stats_fields(&r.fetch));
        }
        Report::Overhead(r) => {
            let _ = writeln!(o, "metric,value");
            for d in &r.per_device {
                let _ = writeln!(o, "per_hop_ms[{}],{}", d.device, num(d.per_hop_ms));
            }
            for (k, v) in overhead_rows(r) {
                let _ = writeln!(o, "{k},{v}");
            }
            for k in &r.ke_ratios {
                let _ = writeln!(
                    o,
                    "ratio[{}:{}/{}],{}",
                    k.device,
                    k.numerator,
                    k.denominator,
                    num(k.ratio)
                );
            }
        }
        Report::Frequency(t) => {
            let names: Vec<&str> = t.categories.iter().map(|c| c.name()).collect();
            let _ = writeln!(o, "scope,name,{}", names.join(","));
            for n in &t.nodes {
                let counts: Vec<String> = n.counts.iter().map(u64::to_string).collect();
                let _ = writeln!(o, "node,{},{}", n.nickname, counts.join(","));
            }
            for (role, shares) in &t.roles {
                let cells: Vec<String> = shares.iter().map(|x| num(*x)).collect();
                let _ = writeln!(o, "role,{},{}", role.name(), cells.join(","));
            }
        }
        Report::Bandwidth(entries) => {
            let _ = writeln!(o, "node,node_id,bw");
            for e in entries {
                let _ = writeln!(
                    o,
                    "{},{},{}",
                    e.nickname,
                    hex::encode(e.node_id),
                    bw_int(e.bandwidth_bps)
                );
            }
        }
    }
    o
}

/// Bits per second as an integer; unbounded links saturate.
fn bw_int(bps: f64) -> u64 {
    if bps.is_finite() {
        bps.round() as u64
    } else {
        u64::MAX
    }
}

/// Serializes a report. Output depends only on the report contents.
pub fn emit_report(report: &Report, format: ReportFormat) -> Result<Vec<u8>, BenchError> {
    let text = match (format, report) {
        (ReportFormat::Markdown, r) => markdown(r),
        (ReportFormat::Csv, r) => csv(r),
        (ReportFormat::V3bw, Report::Bandwidth(entries)) => entries
            .iter()
            .map(|e| format!("node_id={} bw={}\n", hex::encode(e.node_id), bw_int(e.bandwidth_bps)))
            .collect(),
        (ReportFormat::V3bw, r) => {
            return Err(BenchError::UnsupportedFormat {
                report: r.kind(),
                format: "v3bw",
            })
        }
    };
    Ok(text.into_bytes())
}
