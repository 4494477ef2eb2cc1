//! Shared test support: an independent tree-walking interpreter for logical
//! plans (the semantics oracle the compiled engine is checked against),
//! seeded generators for plans and captures, and brute-force analysis
//! oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::net::Ipv4Addr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowlatin::data_model::{compare, OrdValue, Schema, Value};
use flowlatin::flow_model::{CaptureSet, FlowRecord, SectionTables};
use flowlatin::mr_engine::render_cells;
use flowlatin::netflow_analyses::{AnalysisKind, TrafficReport, TrafficRow};
use flowlatin::script_lang::{BinOp, Builtin, Expr, GenItem, LogicalPlan, PlanOp};

// ---------------------------------------------------------------------------
// Reference interpreter: direct tree-walking evaluation of a logical plan,
// written independently of the planner/engine path it is used to check.
// ---------------------------------------------------------------------------

pub mod interp {
    use super::*;

    fn as_f64(v: &Value) -> f64 {
        match v {
            Value::Int(i) => *i as f64,
            Value::Float(f) => *f,
            other => panic!("not numeric: {other:?}"),
        }
    }

    fn truth(v: &Value) -> bool {
        match v {
            Value::Int(i) => *i != 0,
            other => panic!("predicate must be int, got {other:?}"),
        }
    }

    fn ibinary(op: BinOp, a: Value, b: Value) -> Value {
        use std::cmp::Ordering;
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                if op == BinOp::Add {
                    if let (Value::CharArray(x), Value::CharArray(y)) = (&a, &b) {
                        return Value::CharArray(format!("{x}{y}"));
                    }
                }
                match (&a, &b) {
                    (Value::Int(x), Value::Int(y)) => Value::Int(match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        BinOp::Mul => x * y,
                        BinOp::Div => x / y,
                        _ => unreachable!(),
                    }),
                    _ => {
                        let (x, y) = (as_f64(&a), as_f64(&b));
                        Value::Float(match op {
                            BinOp::Add => x + y,
                            BinOp::Sub => x - y,
                            BinOp::Mul => x * y,
                            BinOp::Div => x / y,
                            _ => unreachable!(),
                        })
                    }
                }
            }
            BinOp::And => Value::Int((truth(&a) && truth(&b)) as i64),
            BinOp::Or => Value::Int((truth(&a) || truth(&b)) as i64),
            _ => {
                let ord = compare(&a, &b);
                let hit = match op {
                    BinOp::Eq => ord == Ordering::Equal,
                    BinOp::Ne => ord != Ordering::Equal,
                    BinOp::Lt => ord == Ordering::Less,
                    BinOp::Le => ord != Ordering::Greater,
                    BinOp::Gt => ord == Ordering::Greater,
                    BinOp::Ge => ord != Ordering::Less,
                    _ => unreachable!(),
                };
                Value::Int(hit as i64)
            }
        }
    }

    fn leading(bag: &Value) -> Vec<Value> {
        match bag {
            Value::Bag(tuples) => tuples
                .iter()
                .map(|t| match t {
                    Value::Tuple(cells) => cells[0].clone(),
                    other => panic!("bag of non-tuples: {other:?}"),
                })
                .collect(),
            other => panic!("aggregate over non-bag: {other:?}"),
        }
    }

    fn iagg(func: Builtin, bag: &Value) -> Value {
        match func {
            Builtin::Count => match bag {
                Value::Bag(t) => Value::Int(t.len() as i64),
                other => panic!("COUNT over {other:?}"),
            },
            Builtin::Sum => {
                let vals = leading(bag);
                if vals.iter().all(|v| matches!(v, Value::Int(_))) {
                    Value::Int(vals.iter().map(|v| match v {
                        Value::Int(i) => *i,
                        _ => unreachable!(),
                    }).sum())
                } else {
                    Value::Float(vals.iter().map(as_f64).sum())
                }
            }
            Builtin::Min | Builtin::Max => {
                let mut vals = leading(bag);
                assert!(!vals.is_empty(), "empty bag aggregate");
                let mut best = vals.remove(0);
                for v in vals {
                    let ord = compare(&v, &best);
                    let take = if func == Builtin::Min {
                        ord == std::cmp::Ordering::Less
                    } else {
                        ord == std::cmp::Ordering::Greater
                    };
                    if take {
                        best = v;
                    }
                }
                best
            }
            Builtin::Avg => {
                let vals = leading(bag);
                assert!(!vals.is_empty(), "empty bag aggregate");
                let sum: f64 = if vals.iter().all(|v| matches!(v, Value::Int(_))) {
                    vals.iter()
                        .map(|v| match v {
                            Value::Int(i) => *i,
                            _ => unreachable!(),
                        })
                        .sum::<i64>() as f64
                } else {
                    vals.iter().map(as_f64).sum()
                };
                Value::Float(sum / vals.len() as f64)
            }
            _ => unreachable!("not an aggregate"),
        }
    }

    fn ieval(expr: &Expr, row: &[Value], schema: &Schema) -> Value {
        match expr {
            Expr::FieldRef(name) => {
                let pos = schema
                    .position(name)
                    .unwrap_or_else(|| panic!("unknown field {name} in {schema}"));
                row[pos].clone()
            }
            Expr::ConstInt(i) => Value::Int(*i),
            Expr::ConstFloat(x) => Value::Float(*x),
            Expr::ConstText(s) => Value::CharArray(s.clone()),
            Expr::Binary(op, l, r) => {
                ibinary(*op, ieval(l, row, schema), ieval(r, row, schema))
            }
            Expr::Call(Builtin::Tokenize, args) => {
                match ieval(&args[0], row, schema) {
                    Value::CharArray(s) => Value::Bag(
                        s.split_whitespace()
                            .map(|t| Value::Tuple(vec![Value::CharArray(t.to_string())]))
                            .collect(),
                    ),
                    other => panic!("TOKENIZE over {other:?}"),
                }
            }
            Expr::Call(Builtin::Flatten, _) => panic!("FLATTEN outside generate"),
            Expr::Call(func, args) => iagg(*func, &ieval(&args[0], row, schema)),
        }
    }

    fn igenerate(gens: &[GenItem], row: &[Value], schema: &Schema) -> Vec<Vec<Value>> {
        let mut out: Vec<Vec<Value>> = vec![Vec::new()];
        for gen in gens {
            if let Expr::Call(Builtin::Flatten, args) = &gen.expr {
                let elems = match ieval(&args[0], row, schema) {
                    Value::Bag(tuples) => tuples
                        .into_iter()
                        .map(|t| match t {
                            Value::Tuple(cells) => cells,
                            other => panic!("bag of non-tuples: {other:?}"),
                        })
                        .collect::<Vec<_>>(),
                    other => panic!("FLATTEN over {other:?}"),
                };
                let mut next = Vec::new();
                for prefix in &out {
                    for cells in &elems {
                        let mut r = prefix.clone();
                        r.extend(cells.iter().cloned());
                        next.push(r);
                    }
                }
                out = next;
            } else {
                let v = ieval(&gen.expr, row, schema);
                for r in &mut out {
                    r.push(v.clone());
                }
            }
        }
        out
    }

    /// Execute an inferred plan over in-memory inputs keyed by load path.
    /// Returns the rows each STORE path receives.
    pub fn interpret(
        plan: &LogicalPlan,
        inputs: &HashMap<String, Vec<Vec<Value>>>,
    ) -> HashMap<String, Vec<Vec<Value>>> {
        let mut node_rows: Vec<Option<Vec<Vec<Value>>>> = vec![None; plan.nodes.len()];
        let mut stores = HashMap::new();
        for node in &plan.nodes {
            let rows: Vec<Vec<Value>> = match &node.op {
                PlanOp::Load { path, .. } => inputs
                    .get(path)
                    .unwrap_or_else(|| panic!("no input rows for {path}"))
                    .clone(),
                PlanOp::Filter { input, predicate } => {
                    let schema = plan.schema_of(*input);
                    node_rows[*input]
                        .as_ref()
                        .unwrap()
                        .iter()
                        .filter(|row| truth(&ieval(predicate, row, schema)))
                        .cloned()
                        .collect()
                }
                PlanOp::Foreach { input, gens } => {
                    let schema = plan.schema_of(*input);
                    node_rows[*input]
                        .as_ref()
                        .unwrap()
                        .iter()
                        .flat_map(|row| igenerate(gens, row, schema))
                        .collect()
                }
                PlanOp::Group { input, keys } => {
                    let schema = plan.schema_of(*input);
                    let positions: Vec<usize> =
                        keys.iter().map(|k| schema.position(k).unwrap()).collect();
                    let mut grouped: BTreeMap<OrdValue, Vec<Value>> = BTreeMap::new();
                    for row in node_rows[*input].as_ref().unwrap() {
                        let key = if positions.len() == 1 {
                            row[positions[0]].clone()
                        } else {
                            Value::Tuple(positions.iter().map(|&p| row[p].clone()).collect())
                        };
                        grouped
                            .entry(OrdValue(key))
                            .or_default()
                            .push(Value::Tuple(row.clone()));
                    }
                    grouped
                        .into_iter()
                        .map(|(key, rows)| vec![key.0, Value::Bag(rows)])
                        .collect()
                }
                PlanOp::Join {
                    left,
                    left_keys,
                    right,
                    right_keys,
                } => {
                    let ls = plan.schema_of(*left);
                    let rs = plan.schema_of(*right);
                    let lp: Vec<usize> =
                        left_keys.iter().map(|k| ls.position(k).unwrap()).collect();
                    let rp: Vec<usize> =
                        right_keys.iter().map(|k| rs.position(k).unwrap()).collect();
                    let mut out = Vec::new();
                    for lrow in node_rows[*left].as_ref().unwrap() {
                        for rrow in node_rows[*right].as_ref().unwrap() {
                            let matches = lp.iter().zip(&rp).all(|(&lk, &rk)| {
                                compare(&lrow[lk], &rrow[rk]) == std::cmp::Ordering::Equal
                            });
                            if matches {
                                let mut row = lrow.clone();
                                row.extend(rrow.iter().cloned());
                                out.push(row);
                            }
                        }
                    }
                    out
                }
                PlanOp::Order {
                    input,
                    keys,
                    descending,
                } => {
                    let schema = plan.schema_of(*input);
                    let positions: Vec<usize> =
                        keys.iter().map(|k| schema.position(k).unwrap()).collect();
                    let mut rows = node_rows[*input].as_ref().unwrap().clone();
                    rows.sort_by(|a, b| {
                        let mut ord = std::cmp::Ordering::Equal;
                        for &p in &positions {
                            ord = compare(&a[p], &b[p]);
                            if ord != std::cmp::Ordering::Equal {
                                break;
                            }
                        }
                        if *descending {
                            ord.reverse()
                        } else {
                            ord
                        }
                    });
                    rows
                }
                PlanOp::Store { input, path } => {
                    stores.insert(path.clone(), node_rows[*input].as_ref().unwrap().clone());
                    continue;
                }
            };
            node_rows[node.id] = Some(rows);
        }
        stores
    }
}

/// Canonical multiset form: rendered lines, sorted.
pub fn rendered_multiset(rows: &[Vec<Value>]) -> Vec<String> {
    let mut lines: Vec<String> = rows.iter().map(|r| render_cells(r)).collect();
    lines.sort();
    lines
}

pub fn file_multiset(path: &Path) -> Vec<String> {
    let body = std::fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = body.lines().map(str::to_string).collect();
    lines.sort();
    lines
}

// ---------------------------------------------------------------------------
// Random plan + dataset generator for compiler soundness checks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
pub enum Kind {
    Int,
    Float,
    Char,
}

pub struct GeneratedCase {
    pub script: String,
    /// Load path -> (file content, typed rows)
    pub inputs: Vec<(String, String, Vec<Vec<Value>>)>,
    pub store_path: String,
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 7] = ["ash", "birch", "cedar", "fir", "oak", "pine", "ash oak"];
    WORDS[rng.gen_range(0..WORDS.len())].to_string()
}

/// Random rows for the primary table (a:int, b:float, s:chararray).
/// Floats are quarters so sums stay exact in both execution paths.
fn random_rows(rng: &mut ChaCha8Rng, max_rows: usize) -> Vec<Vec<Value>> {
    let n = rng.gen_range(0..=max_rows);
    (0..n)
        .map(|_| {
            vec![
                Value::Int(rng.gen_range(-20..20)),
                Value::Float(rng.gen_range(-400..400) as f64 / 4.0),
                Value::CharArray(random_word(rng)),
            ]
        })
        .collect()
}

pub fn generate_case(seed: u64, dir: &Path) -> GeneratedCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let main_path = dir.join(format!("case{seed}-a.tsv")).display().to_string();
    let second_path = dir.join(format!("case{seed}-b.tsv")).display().to_string();
    let store_path = dir.join(format!("case{seed}-out.tsv")).display().to_string();

    let main_rows = random_rows(&mut rng, 400);
    let mut stmts = vec![format!("A = LOAD '{main_path}' AS (a:int, b:float, s:chararray);")];
    let mut fields: Vec<(String, Kind)> = vec![
        ("a".to_string(), Kind::Int),
        ("b".to_string(), Kind::Float),
        ("s".to_string(), Kind::Char),
    ];
    let mut cur = "A".to_string();
    let next_alias = |n: &mut i32| {
        *n += 1;
        format!("T{n}")
    };
    let mut n = 0i32;

    let op_count = rng.gen_range(1..=3);
    let use_join = rng.gen_bool(0.3);
    for _ in 0..op_count {
        match rng.gen_range(0..4) {
            0 => {
                // FILTER on a random field
                let (name, kind) = fields[rng.gen_range(0..fields.len())].clone();
                let cmp = ["<", "<=", ">", ">=", "==", "!="][rng.gen_range(0..6)];
                let rhs = match kind {
                    Kind::Int => rng.gen_range(-20..20).to_string(),
                    Kind::Float => format!("{:?}", rng.gen_range(-400..400) as f64 / 4.0),
                    Kind::Char => format!("'{}'", random_word(&mut rng)),
                };
                let alias = next_alias(&mut n);
                stmts.push(format!("{alias} = FILTER {cur} BY {name} {cmp} {rhs};"));
                cur = alias;
            }
            1 => {
                // FOREACH projection with arithmetic; sometimes a flatten
                let alias = next_alias(&mut n);
                let use_flatten = fields.iter().any(|(_, k)| *k == Kind::Char) && rng.gen_bool(0.4);
                if use_flatten {
                    let (sname, _) = fields
                        .iter().find(|(_, k)| *k == Kind::Char)
                        .unwrap()
                        .clone();
                    let keep: Vec<(String, Kind)> = fields
                        .iter()
                        .filter(|(_, k)| *k != Kind::Char)
                        .cloned()
                        .collect();
                    let mut items = vec![format!("FLATTEN(TOKENIZE({sname})) AS tok")];
                    let mut new_fields = vec![("tok".to_string(), Kind::Char)];
                    for (i, (fname, kind)) in keep.iter().enumerate() {
                        items.push(format!("{fname} AS c{i}"));
                        new_fields.push((format!("c{i}"), *kind));
                    }
                    stmts.push(format!(
                        "{alias} = FOREACH {cur} GENERATE {};",
                        items.join(", ")
                    ));
                    fields = new_fields;
                } else {
                    let mut items = Vec::new();
                    let mut new_fields = Vec::new();
                    for (i, (fname, kind)) in fields.iter().enumerate() {
                        let expr = match kind {
                            Kind::Int if rng.gen_bool(0.5) => {
                                format!("({fname} + {})", rng.gen_range(-5..5))
                            }
                            Kind::Float if rng.gen_bool(0.5) => format!("({fname} * 2.0)"),
                            _ => fname.clone(),
                        };
                        items.push(format!("{expr} AS p{i}"));
                        new_fields.push((format!("p{i}"), *kind));
                    }
                    stmts.push(format!(
                        "{alias} = FOREACH {cur} GENERATE {};",
                        items.join(", ")
                    ));
                    fields = new_fields;
                }
                cur = alias;
            }
            2 => {
                // GROUP BY a scalar field, then aggregate or store the bags
                let (key, key_kind) = fields[rng.gen_range(0..fields.len())].clone();
                let galias = next_alias(&mut n);
                stmts.push(format!("{galias} = GROUP {cur} BY {key};"));
                let lead_kind = fields[0].1;
                if rng.gen_bool(0.8) {
                    let falias = next_alias(&mut n);
                    let mut items = vec![
                        "group AS g".to_string(),
                        format!("COUNT({cur}) AS c"),
                    ];
                    let mut new_fields =
                        vec![("g".to_string(), key_kind), ("c".to_string(), Kind::Int)];
                    if lead_kind != Kind::Char && rng.gen_bool(0.6) {
                        let agg = ["SUM", "AVG"][rng.gen_range(0..2)];
                        items.push(format!("{agg}({cur}) AS m"));
                        new_fields.push((
                            "m".to_string(),
                            if agg == "AVG" { Kind::Float } else { lead_kind },
                        ));
                    } else if rng.gen_bool(0.5) {
                        items.push(format!("MAX({cur}) AS m"));
                        new_fields.push(("m".to_string(), lead_kind));
                    }
                    stmts.push(format!(
                        "{falias} = FOREACH {galias} GENERATE {};",
                        items.join(", ")
                    ));
                    cur = falias;
                    fields = new_fields;
                } else {
                    // leave the grouped bags as the result
                    cur = galias;
                    fields = vec![("group".to_string(), key_kind)];
                    break; // bag column: stop generating scalar ops over it
                }
            }
            _ => {
                // ORDER BY a scalar field
                let (key, _) = fields[rng.gen_range(0..fields.len())].clone();
                let alias = next_alias(&mut n);
                let desc = if rng.gen_bool(0.5) { " DESC" } else { "" };
                stmts.push(format!("{alias} = ORDER {cur} BY {key}{desc};"));
                cur = alias;
            }
        }
    }

    let mut inputs = vec![(
        main_path.clone(),
        render_rows(&main_rows),
        main_rows.clone(),
    )];
    if use_join && fields.iter().any(|(_, k)| *k == Kind::Int) {
        let second_rows: Vec<Vec<Value>> = (0..rng.gen_range(1..60))
            .map(|_| {
                vec![
                    Value::Int(rng.gen_range(-20..20)),
                    Value::CharArray(random_word(&mut rng)),
                ]
            })
            .collect();
        stmts.insert(
            1,
            format!("B = LOAD '{second_path}' AS (k:int, t:chararray);"),
        );
        let (int_field, _) = fields
            .iter()
            .find(|(_, k)| *k == Kind::Int)
            .unwrap()
            .clone();
        let alias = format!("JX{seed}");
        stmts.push(format!("{alias} = JOIN {cur} BY {int_field}, B BY k;"));
        cur = alias;
        inputs.push((second_path, render_rows(&second_rows), second_rows));
    }
    stmts.push(format!("STORE {cur} INTO '{store_path}';"));

    GeneratedCase {
        script: stmts.join("\n") + "\n",
        inputs,
        store_path,
    }
}

pub fn render_rows(rows: &[Vec<Value>]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&render_cells(row));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Random captures and brute-force analysis oracles
// ---------------------------------------------------------------------------

/// Durations whose reciprocals terminate within six decimals, so rates
/// survive the six-decimal dataset rendering exactly.
pub const FRIENDLY_DURATIONS: [u64; 12] = [1, 2, 4, 5, 8, 10, 16, 20, 25, 32, 50, 64];

pub fn random_capture(seed: u64, records: usize) -> CaptureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = FRIENDLY_DURATIONS[rng.gen_range(0..FRIENDLY_DURATIONS.len())];
    let start = rng.gen_range(1_000_000..2_000_000u64);
    let records = (0..records)
        .map(|_| {
            let first = rng.gen_range(0..100_000u64);
            let proto = [1u8, 6, 6, 6, 17, 17, 47, 50][rng.gen_range(0..8)];
            FlowRecord {
                src_ip: Ipv4Addr::new(10, 0, 0, rng.gen_range(0..26)),
                dst_ip: Ipv4Addr::new(10, 0, 0, rng.gen_range(0..26)),
                next_hop: Ipv4Addr::new(192, 168, 0, 1),
                ingress_if: rng.gen_range(1..6),
                egress_if: rng.gen_range(1..6),
                packets: rng.gen_range(1..10_000),
                octets: rng.gen_range(40..1_000_000),
                first,
                last: first + rng.gen_range(0..30_000),
                src_port: if proto == 6 || proto == 17 { rng.gen() } else { 0 },
                dst_port: rng.gen(),
                tcp_flags: if proto == 6 { rng.gen() } else { 0 },
                protocol: proto,
                tos: rng.gen(),
                src_as: rng.gen(),
                dst_as: rng.gen(),
            }
        })
        .collect();
    CaptureSet {
        capture_start: start,
        capture_end: start + duration,
        records,
    }
}

fn report_from_counts(
    kind: AnalysisKind,
    duration: u64,
    counts: BTreeMap<String, u64>,
) -> TrafficReport {
    TrafficReport::from_rows(
        kind,
        duration,
        counts
            .into_iter()
            .map(|(entity, count)| TrafficRow {
                entity,
                flow_per_sec: count as f64 / duration as f64,
                record_count: count,
            })
            .collect(),
    )
}

/// O(n^2) nested-loop join of source (or protocol) rows against the
/// protocol section by record id, then a tally — deliberately naive.
pub fn oracle_report(kind: AnalysisKind, sections: &SectionTables) -> TrafficReport {
    let duration = sections.duration_secs;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    match kind {
        AnalysisKind::SrcInterface | AnalysisKind::SrcIp => {
            for src in &sections.source {
                for pf in &sections.protocol_flow {
                    if pf.record_id == src.record_id {
                        let entity = if kind == AnalysisKind::SrcInterface {
                            src.src_if.to_string()
                        } else {
                            src.src_ip.clone()
                        };
                        *counts.entry(entity).or_insert(0) += 1;
                    }
                }
            }
        }
        AnalysisKind::Protocol => {
            for pf in &sections.protocol_flow {
                *counts.entry(pf.protocol.clone()).or_insert(0) += 1;
            }
        }
        AnalysisKind::Node => {
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
        }
    }
    report_from_counts(kind, duration, counts)
}

pub fn assert_reports_close(got: &TrafficReport, want: &TrafficReport, tol: f64) {
    assert_eq!(got.rows.len(), want.rows.len(), "row count");
    for (g, w) in got.rows.iter().zip(&want.rows) {
        assert_eq!(g.entity, w.entity);
        assert_eq!(g.record_count, w.record_count, "count for {}", g.entity);
        let rel = if w.flow_per_sec == 0.0 {
            (g.flow_per_sec - w.flow_per_sec).abs()
        } else {
            ((g.flow_per_sec - w.flow_per_sec) / w.flow_per_sec).abs()
        };
        assert!(
            rel <= tol,
            "flow for {}: {} vs {} (rel {rel})",
            g.entity,
            g.flow_per_sec,
            w.flow_per_sec
        );
    }
}

/// Sequential hash-count word-count oracle.
pub fn wordcount_oracle(text: &str) -> String {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for token in text.split_whitespace() {
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut entries: Vec<(&str, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    let mut out = String::new();
    for (word, n) in entries {
        out.push_str(&format!("{word}\t{n}\n"));
    }
    out
}

/// The canonical two-join section analysis used in determinism checks:
/// join all three sections on record id and project (src_if, flow_per_sec).
pub fn two_join_script(dir: &Path, out: &Path) -> String {
    format!(
        "Protocol = LOAD '{}' AS (record_id:int, protocol:chararray, flow_per_sec:float);\n\
         Source = LOAD '{}' AS (record_id:int, src_if:int, src_ip:chararray);\n\
         Destination = LOAD '{}' AS (record_id:int, dst_if:int, dst_ip:chararray);\n\
         Joined = JOIN Source BY record_id, Protocol BY record_id;\n\
         Full = JOIN Joined BY Source::record_id, Destination BY record_id;\n\
         Pairs = FOREACH Full GENERATE src_if AS src_if, flow_per_sec AS flow_per_sec;\n\
         STORE Pairs INTO '{}';\n",
        dir.join("NetFlow-Data1").display(),
        dir.join("NetFlow-Data2").display(),
        dir.join("NetFlow-Data3").display(),
        out.display()
    )
}
