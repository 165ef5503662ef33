//! CSV outputs, the console results table and the epoch debug dump.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use gral_core::experiment::{ExperimentResult, ExperimentRun};
use gral_core::sim::GroundTruthRecord;
use gral_core::{Epoch, GraphPosition, LocalizedMeasurement, NodeId};
use serde::Serialize;

use crate::formats::PositionRecord;

#[derive(Serialize)]
struct PositionRow {
    node: u32,
    seq: u64,
    t: f64,
    from: u32,
    to: u32,
    offset: f64,
    span: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'static str>,
}

fn position_row(node: NodeId, seq: u64, t: f64, p: &GraphPosition, method: Option<&'static str>) -> PositionRow {
    PositionRow {
        node: node.0,
        seq,
        t,
        from: p.from.0,
        to: p.to.0,
        offset: p.offset,
        span: p.span,
        method,
    }
}

/// Columns: node, seq, t, from, to, offset, span.
pub fn write_ground_truth<W: Write>(w: W, records: &[GroundTruthRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(position_row(r.node, r.seq, r.tick as f64, &r.position, None))?;
    }
    out.flush()?;
    Ok(())
}

/// Ground-truth columns plus `method`.
pub fn write_localized<W: Write>(w: W, measurements: &[LocalizedMeasurement]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if measurements.is_empty() {
        out.write_record(["node", "seq", "t", "from", "to", "offset", "span", "method"])?;
    }
    for m in measurements {
        out.serialize(position_row(m.node, m.seq, m.timestamp, &m.position, Some(m.method.as_str())))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scenario: &'a str,
    method: &'static str,
    instances: usize,
    drmse: Option<f64>,
    mae: Option<f64>,
    nmae_percent: Option<f64>,
    localized: usize,
    unlocalized: usize,
    coverage_percent: f64,
    truncated: usize,
}

pub fn write_summary<W: Write>(w: W, scenario: &str, results: &[ExperimentResult]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in results {
        out.serialize(SummaryRow {
            scenario,
            method: r.method.as_str(),
            instances: r.irmse.len(),
            drmse: r.drmse,
            mae: r.mae,
            nmae_percent: r.nmae,
            localized: r.localized,
            unlocalized: r.unlocalized,
            coverage_percent: r.coverage(),
            truncated: r.truncated,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct InstanceRow {
    method: &'static str,
    seed: u64,
    irmse: Option<f64>,
    localized: usize,
    unlocalized: usize,
}

/// One row per method and instance.
pub fn write_irmse<W: Write>(w: W, run: &ExperimentRun) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (r, evals) in run.results.iter().zip(&run.instances) {
        for e in evals {
            out.serialize(InstanceRow {
                method: r.method.as_str(),
                seed: e.seed,
                irmse: e.irmse(),
                localized: e.samples.len(),
                unlocalized: e.unlocalized,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorRow {
    method: &'static str,
    seed: u64,
    node: u32,
    seq: u64,
    error: f64,
}

/// Every per-package error, for recomputing metrics elsewhere.
pub fn write_errors<W: Write>(w: W, run: &ExperimentRun) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (r, evals) in run.results.iter().zip(&run.instances) {
        for e in evals {
            for s in &e.samples {
                out.serialize(ErrorRow {
                    method: r.method.as_str(),
                    seed: e.seed,
                    node: s.node.0,
                    seq: s.seq,
                    error: s.error,
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

type Column = fn(&ExperimentResult) -> Option<f64>;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
}

/// dRMSE per method in one row, followed by MAE and coverage rows.
pub fn format_table(scenario: &str, results: &[ExperimentResult]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<16}", "scenario");
    for r in results {
        let _ = write!(s, " {:>11}", r.method.as_str());
    }
    s.push('\n');
    let rows: [(&str, Column); 4] = [
        ("dRMSE", |r| r.drmse),
        ("MAE", |r| r.mae),
        ("MAE %", |r| r.nmae),
        ("coverage %", |r| Some(r.coverage())),
    ];
    for (label, f) in rows {
        let head = if label == "dRMSE" {
            format!("{scenario} {label}")
        } else {
            label.to_owned()
        };
        let _ = write!(s, "{head:<16}");
        for r in results {
            let _ = write!(s, " {:>11}", cell(f(r)));
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct EpochRecord {
    index: usize,
    kind: &'static str,
    origin: &'static str,
    gateway: Option<u32>,
    first_seq: Option<u64>,
    last_seq: Option<u64>,
    packages: usize,
    start: Option<PositionRecord>,
    #[serde(rename = "final")]
    final_pos: Option<PositionRecord>,
}

/// Epochs per node as pretty JSON.
pub fn epochs_json(epochs: &BTreeMap<NodeId, Vec<Epoch>>) -> String {
    let dump: BTreeMap<String, Vec<EpochRecord>> = epochs
        .iter()
        .map(|(node, list)| {
            let records = list
                .iter()
                .enumerate()
                .map(|(index, e)| EpochRecord {
                    index,
                    kind: e.kind.as_str(),
                    origin: match e.origin {
                        gral_core::EpochOrigin::Integrated => "integrated",
                        gral_core::EpochOrigin::Coalesced => "coalesced",
                        gral_core::EpochOrigin::Merged => "merged",
                        gral_core::EpochOrigin::Split => "split",
                    },
                    gateway: e.anchor_gateway.map(|g| g.0),
                    first_seq: e.packages.first().map(|p| p.seq),
                    last_seq: e.packages.last().map(|p| p.seq),
                    packages: e.packages.len(),
                    start: e.start_pos.as_ref().map(PositionRecord::from_position),
                    final_pos: e.final_pos.as_ref().map(PositionRecord::from_position),
                })
                .collect();
            (node.to_string(), records)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&dump).expect("epochs serialize");
    s.push('\n');
    s
}
