//! Built-in traffic analyses over the three section tables: flow rate per
//! source interface, per source IP, per protocol, and per node (an IP seen
//! as source or destination).
//!
//! Every analysis exists twice: a direct in-memory form here, and a script
//! form that runs through the full parse/compile/execute stack. Both produce
//! the same report on the same sections.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::data_model::render_float;
use crate::flow_model::{SectionTables, SECTION_FILES};
use crate::mr_engine::{Engine, EngineError};
use crate::planner::{compile, insert_combiners, CompileError};
use crate::script_lang::{infer_schemas, parse_script_text, ScriptError, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    SrcInterface,
    SrcIp,
    Protocol,
    Node,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::SrcInterface => "src-if",
            AnalysisKind::SrcIp => "src-ip",
            AnalysisKind::Protocol => "protocol",
            AnalysisKind::Node => "node",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "src-if" => Some(AnalysisKind::SrcInterface),
            "src-ip" => Some(AnalysisKind::SrcIp),
            "protocol" => Some(AnalysisKind::Protocol),
            "node" => Some(AnalysisKind::Node),
            _ => None,
        }
    }

    pub const ALL: [AnalysisKind; 4] = [
        AnalysisKind::SrcInterface,
        AnalysisKind::SrcIp,
        AnalysisKind::Protocol,
        AnalysisKind::Node,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRow {
    pub entity: String,
    pub flow_per_sec: f64,
    pub record_count: u64,
}

/// Rows sorted by flow rate descending, ties broken by entity ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficReport {
    pub kind: AnalysisKind,
    pub duration_secs: u64,
    pub rows: Vec<TrafficRow>,
}

impl TrafficReport {
    pub fn from_rows(
        kind: AnalysisKind,
        duration_secs: u64,
        mut rows: Vec<TrafficRow>,
    ) -> TrafficReport {
        rows.sort_by(|a, b| {
            b.flow_per_sec
                .partial_cmp(&a.flow_per_sec)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.entity.cmp(&b.entity))
        });
        TrafficReport {
            kind,
            duration_secs,
            rows,
        }
    }

    /// `#analysis,<name>,<duration>` header plus one row per line.
    pub fn render(&self) -> String {
        let mut out = format!("#analysis,{},{}\n", self.kind.name(), self.duration_secs);
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                row.entity,
                render_float(row.flow_per_sec),
                row.record_count
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("section tables disagree on record ids")]
    MismatchedSections,
    #[error("script: {0}")]
    Script(#[from] ScriptError),
    #[error("types: {0}")]
    Types(#[from] TypeError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("report output `{path}`: {message}")]
    BadReport { path: String, message: String },
}

fn validate(sections: &SectionTables) -> Result<(), AnalysisError> {
    let n = sections.protocol_flow.len();
    if sections.source.len() != n || sections.destination.len() != n {
        return Err(AnalysisError::MismatchedSections);
    }
    let mut p: Vec<u64> = sections.protocol_flow.iter().map(|r| r.record_id).collect();
    let mut s: Vec<u64> = sections.source.iter().map(|r| r.record_id).collect();
    let mut d: Vec<u64> = sections.destination.iter().map(|r| r.record_id).collect();
    p.sort_unstable();
    s.sort_unstable();
    d.sort_unstable();
    if p != s || s != d {
        return Err(AnalysisError::MismatchedSections);
    }
    Ok(())
}

fn tally_report(
    kind: AnalysisKind,
    duration_secs: u64,
    counts: BTreeMap<String, u64>,
) -> TrafficReport {
    let rows = counts
        .into_iter()
        .map(|(entity, count)| TrafficRow {
            entity,
            flow_per_sec: count as f64 / duration_secs as f64,
            record_count: count,
        })
        .collect();
    TrafficReport::from_rows(kind, duration_secs, rows)
}

/// Flow rate per ingress interface: records per interface over the window.
pub fn analyze_src_interface(sections: &SectionTables) -> Result<TrafficReport, AnalysisError> {
    validate(sections)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for row in &sections.source {
        *counts.entry(row.src_if.to_string()).or_insert(0) += 1;
    }
    Ok(tally_report(
        AnalysisKind::SrcInterface,
        sections.duration_secs,
        counts,
    ))
}

/// Flow rate per source address.
pub fn analyze_src_ip(sections: &SectionTables) -> Result<TrafficReport, AnalysisError> {
    validate(sections)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for row in &sections.source {
        *counts.entry(row.src_ip.clone()).or_insert(0) += 1;
    }
    Ok(tally_report(
        AnalysisKind::SrcIp,
        sections.duration_secs,
        counts,
    ))
}

/// Flow rate per protocol name.
pub fn analyze_protocol(sections: &SectionTables) -> Result<TrafficReport, AnalysisError> {
    validate(sections)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for row in &sections.protocol_flow {
        *counts.entry(row.protocol.clone()).or_insert(0) += 1;
    }
    Ok(tally_report(
        AnalysisKind::Protocol,
        sections.duration_secs,
        counts,
    ))
}

/// Flow rate per node: every record counts once for each distinct endpoint,
/// so a self-flow (src == dst) contributes once.
pub fn analyze_per_node(sections: &SectionTables) -> Result<TrafficReport, AnalysisError> {
    validate(sections)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for (src, dst) in sections
        .source
        .iter()
        .map(|r| &r.src_ip)
        .zip(sections.destination.iter().map(|r| &r.dst_ip))
    {
        *counts.entry(src.clone()).or_insert(0) += 1;
        if src != dst {
            *counts.entry(dst.clone()).or_insert(0) += 1;
        }
    }
    Ok(tally_report(
        AnalysisKind::Node,
        sections.duration_secs,
        counts,
    ))
}

pub fn analyze(kind: AnalysisKind, sections: &SectionTables) -> Result<TrafficReport, AnalysisError> {
    match kind {
        AnalysisKind::SrcInterface => analyze_src_interface(sections),
        AnalysisKind::SrcIp => analyze_src_ip(sections),
        AnalysisKind::Protocol => analyze_protocol(sections),
        AnalysisKind::Node => analyze_per_node(sections),
    }
}

/// Script text for an analysis over section files in `dir`, writing rows of
/// `(entity, flow_per_sec, n)` to `out_path`. The capture duration is baked
/// in as the rate denominator.
pub fn analysis_script(
    kind: AnalysisKind,
    duration_secs: u64,
    dir: &Path,
    out_path: &Path,
) -> String {
    let d1 = dir.join(SECTION_FILES[0]).display().to_string();
    let d2 = dir.join(SECTION_FILES[1]).display().to_string();
    let d3 = dir.join(SECTION_FILES[2]).display().to_string();
    let out = out_path.display().to_string();
    let dur = format!("{duration_secs}.0");
    match kind {
        AnalysisKind::SrcInterface | AnalysisKind::SrcIp => {
            let key = if kind == AnalysisKind::SrcInterface {
                "src_if"
            } else {
                "src_ip"
            };
            format!(
                "Protocol = LOAD '{d1}' AS (record_id:int, protocol:chararray, flow_per_sec:float);\n\
                 Source = LOAD '{d2}' AS (record_id:int, src_if:int, src_ip:chararray);\n\
                 Joined = JOIN Source BY record_id, Protocol BY record_id;\n\
                 Grouped = GROUP Joined BY {key};\n\
                 Report = FOREACH Grouped GENERATE group AS entity, COUNT(Joined) / {dur} AS flow_per_sec, COUNT(Joined) AS n;\n\
                 STORE Report INTO '{out}';\n"
            )
        }
        AnalysisKind::Protocol => format!(
            "Protocol = LOAD '{d1}' AS (record_id:int, protocol:chararray, flow_per_sec:float);\n\
             Grouped = GROUP Protocol BY protocol;\n\
             Report = FOREACH Grouped GENERATE group AS entity, COUNT(Protocol) / {dur} AS flow_per_sec, COUNT(Protocol) AS n;\n\
             STORE Report INTO '{out}';\n"
        ),
        AnalysisKind::Node => format!(
            "Source = LOAD '{d2}' AS (record_id:int, src_if:int, src_ip:chararray);\n\
             Destination = LOAD '{d3}' AS (record_id:int, dst_if:int, dst_ip:chararray);\n\
             Joined = JOIN Source BY record_id, Destination BY record_id;\n\
             Pairs = FOREACH Joined GENERATE FLATTEN(TOKENIZE(src_ip + ' ' + dst_ip)) AS node, Source::record_id AS rid;\n\
             PerRecord = GROUP Pairs BY node, rid;\n\
             Nodes = FOREACH PerRecord GENERATE MAX(Pairs) AS node;\n\
             Grouped = GROUP Nodes BY node;\n\
             Report = FOREACH Grouped GENERATE group AS entity, COUNT(Nodes) / {dur} AS flow_per_sec, COUNT(Nodes) AS n;\n\
             STORE Report INTO '{out}';\n"
        ),
    }
}

/// Run the script form of an analysis through the whole stack and read the
/// report back. Section files must already exist under `dir`.
pub fn run_analysis_script(
    kind: AnalysisKind,
    duration_secs: u64,
    dir: &Path,
    engine: &Engine,
) -> Result<TrafficReport, AnalysisError> {
    let out_path = engine.cfg.work_dir.join(format!("report-{}.tsv", kind.name()));
    let script = analysis_script(kind, duration_secs, dir, &out_path);
    let plan = infer_schemas(parse_script_text(&script)?)?;
    let graph = insert_combiners(compile(&plan)?);
    engine.run_graph(&graph)?;
    let body = fs::read_to_string(&out_path).map_err(|e| AnalysisError::BadReport {
        path: out_path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for line in body.lines() {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 3 {
            return Err(AnalysisError::BadReport {
                path: out_path.display().to_string(),
                message: format!("expected 3 columns, got {}", cells.len()),
            });
        }
        let parse = |what: &str, cell: &str| -> Result<f64, AnalysisError> {
            cell.parse::<f64>().map_err(|e| AnalysisError::BadReport {
                path: out_path.display().to_string(),
                message: format!("bad {what} `{cell}`: {e}"),
            })
        };
        rows.push(TrafficRow {
            entity: cells[0].to_string(),
            flow_per_sec: parse("flow_per_sec", cells[1])?,
            record_count: parse("record_count", cells[2])? as u64,
        });
    }
    Ok(TrafficReport::from_rows(kind, duration_secs, rows))
}
