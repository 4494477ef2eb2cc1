//! Deterministic local parallel map-reduce runtime.
//!
//! A job reads its input datasets as line files, splits them on record
//! boundaries, maps splits on a fixed worker pool, sorts each mapper's
//! output (spilling above a memory budget), k-way merges the runs into key
//! groups, and reduces groups in parallel over contiguous key ranges.
//! Outputs are a pure function of (job, input bytes): independent of worker
//! count, split size and thread scheduling.

pub(crate) mod raw;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::data_model::{compare, parse_row, render_value, Schema, Value};
use crate::eval::{
    eval_expr, eval_generate, eval_generate_with_finals, truthy,
};
use crate::planner::{DatasetId, DatasetOrigin, JobGraph, JobSpec, MapOp, ReduceOp};
use crate::script_lang::Builtin;

pub use raw::{split_input, split_ranges, Split};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("bag values cannot be shuffle keys")]
    BagKey,
    #[error("job {job_id}: split {split}, record {record}: {message}")]
    Job {
        job_id: usize,
        split: usize,
        record: usize,
        message: String,
    },
    #[error("job {job_id}: reduce on key `{key}`: {message}")]
    Reduce {
        job_id: usize,
        key: String,
        message: String,
    },
    #[error("job {job_id}: counters disagree (emitted {emitted}, consumed {consumed}, grouped {grouped})")]
    CounterMismatch {
        job_id: usize,
        emitted: u64,
        consumed: u64,
        grouped: u64,
    },
    #[error("dataset `{0}` has no materialized path")]
    MissingDataset(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Standalone shuffle
// ---------------------------------------------------------------------------

/// A key/value pair for the standalone shuffle operation.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyValue {
    pub key: Value,
    pub value: Value,
}

/// Group pairs by key: output keys strictly ascending, each key's values in
/// input order, every pair accounted for exactly once.
pub fn shuffle(pairs: Vec<KeyValue>) -> Result<Vec<(Value, Vec<Value>)>, EngineError> {
    if pairs.iter().any(|p| p.key.is_bag()) {
        return Err(EngineError::BagKey);
    }
    let mut indexed: Vec<(usize, KeyValue)> = pairs.into_iter().enumerate().collect();
    indexed.sort_by(|(ia, a), (ib, b)| compare(&a.key, &b.key).then(ia.cmp(ib)));
    let mut out: Vec<(Value, Vec<Value>)> = Vec::new();
    for (_, pair) in indexed {
        match out.last_mut() {
            Some((key, values)) if compare(key, &pair.key) == std::cmp::Ordering::Equal => {
                values.push(pair.value);
            }
            _ => out.push((pair.key, vec![pair.value])),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub workers: usize,
    pub split_bytes: u64,
    pub work_dir: PathBuf,
    /// Above this many in-flight bytes a mapper sorts and spills its buffer.
    pub memory_budget_bytes: u64,
}

impl EngineConfig {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        EngineConfig {
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            split_bytes: 64 * 1024,
            work_dir: work_dir.into(),
            memory_budget_bytes: 64 * 1024 * 1024,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_split_bytes(mut self, split_bytes: u64) -> Self {
        self.split_bytes = split_bytes.max(1);
        self
    }
}

/// Per-job counters, one JSON line per job in `<work_dir>/job_log.jsonl`.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct JobCounters {
    pub job_id: usize,
    pub maps: usize,
    pub records_in: u64,
    pub records_out: u64,
    pub wall_ms: u64,
}

pub struct Engine {
    pub cfg: EngineConfig,
}

type PairMapFn<'a> =
    &'a (dyn Fn(usize, &str, &mut dyn FnMut(Value, Value) -> Result<(), String>) -> Result<(), String>
          + Sync);
type LineMapFn<'a> =
    &'a (dyn Fn(usize, &str, &mut dyn FnMut(String)) -> Result<(), String> + Sync);
type CombineFn<'a> = &'a (dyn Fn(&Value, Vec<Value>) -> Result<Value, String> + Sync);
/// Raw mapper: one record line in, key/value pairs out.
pub type RawMapFn<'a> =
    &'a (dyn Fn(&str, &mut dyn FnMut(Value, Value) -> Result<(), String>) -> Result<(), String>
          + Sync);
/// Raw reducer: one key group in, output lines out.
pub type RawReduceFn<'a> =
    &'a (dyn Fn(&Value, Vec<Value>, &mut dyn FnMut(String)) -> Result<(), String> + Sync);
type ReduceFn<'a> =
    &'a (dyn Fn(&Value, Vec<(u8, Value)>) -> Result<Vec<String>, String> + Sync);

struct MapTask {
    input_index: usize,
    split_ordinal: usize,
    global_split: usize,
    start: usize,
    end: usize,
}

fn build_tasks(inputs: &[Arc<Vec<u8>>], split_bytes: u64) -> Vec<MapTask> {
    let mut tasks = Vec::new();
    for (input_index, data) in inputs.iter().enumerate() {
        for (split_ordinal, (start, end)) in split_ranges(data, split_bytes).into_iter().enumerate()
        {
            tasks.push(MapTask {
                input_index,
                split_ordinal,
                global_split: tasks.len(),
                start,
                end,
            });
        }
    }
    tasks
}

/// Run `f` over tasks on a fixed pool, collecting results by task index so
/// the outcome is independent of scheduling.
fn pooled<T: Send>(
    workers: usize,
    tasks: usize,
    f: impl Fn(usize) -> Result<T, EngineError> + Sync,
) -> Result<Vec<T>, EngineError> {
    let results: Mutex<Vec<Option<Result<T, EngineError>>>> =
        Mutex::new((0..tasks).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(tasks.max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, AtomicOrdering::Relaxed);
                if idx >= tasks {
                    break;
                }
                let out = f(idx);
                results.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    let collected = results.into_inner().unwrap();
    let mut out = Vec::with_capacity(tasks);
    for item in collected {
        out.push(item.expect("worker pool completed every task")?);
    }
    Ok(out)
}

fn split_lines(data: &[u8], job_id: usize, split: usize) -> Result<Vec<&str>, EngineError> {
    let text = std::str::from_utf8(data).map_err(|e| EngineError::Job {
        job_id,
        split,
        record: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    Ok(text
        .split('\n')
        .filter(|l| !l.is_empty())
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect())
}

struct ShuffleMapOut {
    runs: Vec<raw::Run>,
    records_in: u64,
    emitted: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Engine, EngineError> {
        fs::create_dir_all(&cfg.work_dir).map_err(io_err(&cfg.work_dir))?;
        Ok(Engine { cfg })
    }

    fn log_counters(&self, counters: &JobCounters) -> Result<(), EngineError> {
        let path = self.cfg.work_dir.join("job_log.jsonl");
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let line = serde_json::to_string(counters).expect("counters serialize");
        writeln!(file, "{line}").map_err(io_err(&path))?;
        Ok(())
    }

    fn write_output(&self, path: &Path, lines: &[String]) -> Result<(), EngineError> {
        let mut body = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
        for line in lines {
            body.push_str(line);
            body.push('\n');
        }
        fs::write(path, body).map_err(io_err(path))?;
        Ok(())
    }

    /// Map-only execution: per-record line transform, split order preserved.
    fn execute_map_only(
        &self,
        job_id: usize,
        inputs: &[Arc<Vec<u8>>],
        map: LineMapFn,
        output: &Path,
    ) -> Result<JobCounters, EngineError> {
        let started = Instant::now();
        let tasks = build_tasks(inputs, self.cfg.split_bytes);
        let outs = pooled(self.cfg.workers, tasks.len(), |idx| {
            let task = &tasks[idx];
            let data = &inputs[task.input_index][task.start..task.end];
            let lines = split_lines(data, job_id, task.global_split)?;
            let mut out = Vec::new();
            let mut records = 0u64;
            for (rec_idx, line) in lines.iter().enumerate() {
                records += 1;
                map(task.input_index, line, &mut |l| out.push(l)).map_err(|message| {
                    EngineError::Job {
                        job_id,
                        split: task.global_split,
                        record: rec_idx,
                        message,
                    }
                })?;
            }
            Ok((out, records))
        })?;
        let records_in: u64 = outs.iter().map(|(_, r)| r).sum();
        let lines: Vec<String> = outs.into_iter().flat_map(|(l, _)| l).collect();
        let counters = JobCounters {
            job_id,
            maps: tasks.len(),
            records_in,
            records_out: lines.len() as u64,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        self.write_output(output, &lines)?;
        self.log_counters(&counters)?;
        Ok(counters)
    }

    /// Full map/shuffle/reduce execution.
    #[allow(clippy::too_many_arguments)]
    fn execute_shuffle(
        &self,
        job_id: usize,
        inputs: &[Arc<Vec<u8>>],
        tags: &[u8],
        map: PairMapFn,
        combine: Option<CombineFn>,
        reduce: ReduceFn,
        descending: bool,
        output: &Path,
    ) -> Result<JobCounters, EngineError> {
        let started = Instant::now();
        let tasks = build_tasks(inputs, self.cfg.split_bytes);
        let budget = (self.cfg.memory_budget_bytes / self.cfg.workers.max(1) as u64) as usize;
        let spill_dir = self.cfg.work_dir.join(format!("spill-job{job_id}"));

        let map_outs: Vec<ShuffleMapOut> = pooled(self.cfg.workers, tasks.len(), |idx| {
            let task = &tasks[idx];
            let data = &inputs[task.input_index][task.start..task.end];
            let lines = split_lines(data, job_id, task.global_split)?;
            let tag = tags[task.input_index];
            let mut buffer: Vec<raw::PairRec> = Vec::new();
            let mut runs: Vec<raw::Run> = Vec::new();
            let mut weight = 0usize;
            let mut emit_idx = 0u64;
            let mut records_in = 0u64;
            let mut emitted = 0u64;

            let finish_buffer = |buffer: &mut Vec<raw::PairRec>,
                                 runs: &mut Vec<raw::Run>,
                                 emitted: &mut u64,
                                 spill: bool|
             -> Result<(), EngineError> {
                if buffer.is_empty() {
                    return Ok(());
                }
                buffer.sort_by(|a, b| raw::pair_cmp(a, b, descending));
                let run_pairs = if let Some(combine) = combine {
                    combine_sorted(job_id, task.global_split, buffer, combine)?
                } else {
                    std::mem::take(buffer)
                };
                *emitted += run_pairs.len() as u64;
                if spill {
                    fs::create_dir_all(&spill_dir).map_err(io_err(&spill_dir))?;
                    let path = spill_dir.join(format!(
                        "split{}-run{}.jsonl",
                        task.global_split,
                        runs.len()
                    ));
                    runs.push(
                        raw::spill_run(&run_pairs, path.clone()).map_err(io_err(&path))?,
                    );
                } else {
                    runs.push(raw::Run::Memory(run_pairs));
                }
                Ok(())
            };

            for (rec_idx, line) in lines.iter().enumerate() {
                records_in += 1;
                let mut emit = |key: Value, value: Value| -> Result<(), String> {
                    if key.is_bag() {
                        return Err("bag values cannot be shuffle keys".to_string());
                    }
                    weight += raw::value_weight(&key) + raw::value_weight(&value) + 32;
                    buffer.push(raw::PairRec {
                        key,
                        value,
                        tag,
                        seq: raw::make_seq(task.input_index, task.split_ordinal, emit_idx),
                    });
                    emit_idx += 1;
                    Ok(())
                };
                map(task.input_index, line, &mut emit).map_err(|message| EngineError::Job {
                    job_id,
                    split: task.global_split,
                    record: rec_idx,
                    message,
                })?;
                if weight > budget {
                    finish_buffer(&mut buffer, &mut runs, &mut emitted, true)?;
                    weight = 0;
                }
            }
            finish_buffer(&mut buffer, &mut runs, &mut emitted, false)?;
            Ok(ShuffleMapOut {
                runs,
                records_in,
                emitted,
            })
        })?;

        let records_in: u64 = map_outs.iter().map(|o| o.records_in).sum();
        let emitted: u64 = map_outs.iter().map(|o| o.emitted).sum();
        let runs: Vec<raw::Run> = map_outs.into_iter().flat_map(|o| o.runs).collect();
        let maps = tasks.len();

        let (groups, consumed) = raw::merge_runs(runs, descending)
            .map_err(io_err(&spill_dir))?;
        let grouped: u64 = groups.iter().map(|(_, v)| v.len() as u64).sum();
        if emitted != consumed || consumed != grouped {
            return Err(EngineError::CounterMismatch {
                job_id,
                emitted,
                consumed,
                grouped,
            });
        }

        // parallel reduce over contiguous key ranges, concatenated in order
        let workers = self.cfg.workers.max(1);
        let chunk_size = groups.len().div_ceil(workers).max(1);
        let chunks: Vec<&[raw::KeyGroup]> = groups.chunks(chunk_size).collect();
        let reduced: Vec<Vec<String>> = pooled(workers, chunks.len(), |idx| {
            let mut lines = Vec::new();
            for (key, values) in chunks[idx].iter() {
                let out =
                    reduce(key, values.clone()).map_err(|message| EngineError::Reduce {
                        job_id,
                        key: render_value(key),
                        message,
                    })?;
                lines.extend(out);
            }
            Ok(lines)
        })?;
        let lines: Vec<String> = reduced.into_iter().flatten().collect();

        if spill_dir.exists() {
            let _ = fs::remove_dir_all(&spill_dir);
        }
        let counters = JobCounters {
            job_id,
            maps,
            records_in,
            records_out: lines.len() as u64,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        self.write_output(output, &lines)?;
        self.log_counters(&counters)?;
        Ok(counters)
    }

    // -- raw job API --------------------------------------------------------

    /// Map-only job over raw lines, no decoding. Output lines keep input
    /// order (within-split order, splits concatenated by ordinal).
    pub fn run_raw_map_job(
        &self,
        job_id: usize,
        inputs: &[PathBuf],
        map: LineMapFn,
        output: &Path,
    ) -> Result<JobCounters, EngineError> {
        let data = read_inputs(inputs)?;
        self.execute_map_only(job_id, &data, map, output)
    }

    /// Map/shuffle/reduce job built from raw callables, bypassing scripts
    /// and the compiler entirely.
    pub fn run_raw_job(
        &self,
        job_id: usize,
        inputs: &[PathBuf],
        map: RawMapFn,
        combine: Option<CombineFn>,
        reduce: RawReduceFn,
        output: &Path,
    ) -> Result<JobCounters, EngineError> {
        let data = read_inputs(inputs)?;
        let tags = vec![0u8; data.len()];
        let map_adapter = move |_input: usize,
                                line: &str,
                                emit: &mut dyn FnMut(Value, Value) -> Result<(), String>|
              -> Result<(), String> { map(line, emit) };
        let reduce_adapter = move |key: &Value,
                                   values: Vec<(u8, Value)>|
              -> Result<Vec<String>, String> {
            let mut out = Vec::new();
            let plain: Vec<Value> = values.into_iter().map(|(_, v)| v).collect();
            reduce(key, plain, &mut |line| out.push(line))?;
            Ok(out)
        };
        self.execute_shuffle(
            job_id,
            &data,
            &tags,
            &map_adapter,
            combine,
            &reduce_adapter,
            false,
            output,
        )
    }

    // -- compiled job execution ---------------------------------------------

    /// Run one compiled job. `paths` maps every input dataset to a file.
    /// Returns the output file path (under the work directory).
    pub fn run_job(
        &self,
        spec: &JobSpec,
        paths: &BTreeMap<DatasetId, PathBuf>,
    ) -> Result<PathBuf, EngineError> {
        let mut inputs = Vec::with_capacity(spec.inputs.len());
        for input in &spec.inputs {
            let path = paths
                .get(&input.dataset)
                .ok_or_else(|| EngineError::MissingDataset(input.dataset.clone()))?;
            let bytes = fs::read(path).map_err(io_err(path))?;
            inputs.push(Arc::new(bytes));
        }
        let output = self.cfg.work_dir.join(format!("{}.tsv", spec.output));

        if spec.is_map_only() {
            let input_spec = &spec.inputs[0];
            let map = |_input: usize, line: &str, emit: &mut dyn FnMut(String)| {
                let rows = apply_pipeline(&input_spec.ops, line)?;
                for row in rows {
                    emit(render_cells(&row));
                }
                Ok(())
            };
            self.execute_map_only(spec.job_id, &inputs, &map, &output)?;
            return Ok(output);
        }

        let tags: Vec<u8> = spec
            .inputs
            .iter()
            .map(|i| i.tag.unwrap_or(0) as u8)
            .collect();
        let map = |input: usize, line: &str, emit: &mut dyn FnMut(Value, Value) -> Result<(), String>| {
            let input_spec = &spec.inputs[input];
            let rows = apply_pipeline(&input_spec.ops, line)?;
            for row in rows {
                let key = extract_key(&input_spec.key_positions, &row);
                emit(key, Value::Tuple(row))?;
            }
            Ok(())
        };
        let combine_adapter;
        let combine: Option<CombineFn> = match (&spec.combiner, &spec.reduce) {
            (Some(funcs), ReduceOp::Aggregate { .. }) => {
                let funcs = funcs.clone();
                combine_adapter = move |_key: &Value, values: Vec<Value>| -> Result<Value, String> {
                    make_partials(&funcs, &values)
                };
                Some(&combine_adapter)
            }
            _ => None,
        };
        let descending = matches!(
            spec.reduce,
            ReduceOp::OrderEmit { descending: true }
        );
        let reduce = |key: &Value, values: Vec<(u8, Value)>| -> Result<Vec<String>, String> {
            let rows = reduce_rows(&spec.reduce, key, values)?;
            let mut lines = Vec::with_capacity(rows.len());
            for row in rows {
                for out_row in apply_row_ops(&spec.post_ops, vec![row])? {
                    lines.push(render_cells(&out_row));
                }
            }
            Ok(lines)
        };
        self.execute_shuffle(
            spec.job_id,
            &inputs,
            &tags,
            &map,
            combine,
            &reduce,
            descending,
            &output,
        )?;
        Ok(output)
    }

    /// Run a whole graph in order. Intermediates live under the work
    /// directory; STORE-bound datasets are copied to their declared paths.
    /// On failure, store outputs written so far are removed.
    pub fn run_graph(
        &self,
        graph: &JobGraph,
    ) -> Result<BTreeMap<DatasetId, PathBuf>, EngineError> {
        let mut paths: BTreeMap<DatasetId, PathBuf> = BTreeMap::new();
        for (id, info) in &graph.datasets {
            if let DatasetOrigin::Source { path } = &info.origin {
                paths.insert(id.clone(), PathBuf::from(path));
            }
        }
        let mut written: Vec<PathBuf> = Vec::new();
        let fail = |written: &[PathBuf], err: EngineError| -> EngineError {
            for path in written {
                let _ = fs::remove_file(path);
            }
            err
        };
        for job in &graph.jobs {
            match self.run_job(job, &paths) {
                Ok(path) => {
                    paths.insert(job.output.clone(), path);
                }
                Err(e) => return Err(fail(&written, e)),
            }
        }
        for (dataset, store_path) in &graph.stores {
            let src = match paths.get(dataset) {
                Some(p) => p.clone(),
                None => {
                    return Err(fail(
                        &written,
                        EngineError::MissingDataset(dataset.clone()),
                    ))
                }
            };
            let dst = PathBuf::from(store_path);
            if let Some(parent) = dst.parent() {
                if !parent.as_os_str().is_empty() {
                    if let Err(e) = fs::create_dir_all(parent) {
                        return Err(fail(&written, io_err(parent)(e)));
                    }
                }
            }
            if let Err(e) = fs::copy(&src, &dst) {
                return Err(fail(&written, io_err(&dst)(e)));
            }
            written.push(dst.clone());
            paths.insert(dataset.clone(), dst);
        }
        Ok(paths)
    }
}

/// Fold runs of equal keys in a sorted buffer through the combiner; the
/// combined pair keeps the first contributing sequence stamp.
fn combine_sorted(
    job_id: usize,
    split: usize,
    buffer: &mut Vec<raw::PairRec>,
    combine: CombineFn,
) -> Result<Vec<raw::PairRec>, EngineError> {
    let pairs = std::mem::take(buffer);
    let mut out: Vec<raw::PairRec> = Vec::new();
    let mut iter = pairs.into_iter().peekable();
    while let Some(first) = iter.next() {
        let (key, tag, seq) = (first.key, first.tag, first.seq);
        let mut values = vec![first.value];
        while let Some(next) = iter.peek() {
            if compare(&next.key, &key) == std::cmp::Ordering::Equal {
                values.push(iter.next().expect("peeked").value);
            } else {
                break;
            }
        }
        let value = combine(&key, values).map_err(|message| EngineError::Job {
            job_id,
            split,
            record: 0,
            message,
        })?;
        out.push(raw::PairRec {
            key,
            value,
            tag,
            seq,
        });
    }
    Ok(out)
}

fn read_inputs(inputs: &[PathBuf]) -> Result<Vec<Arc<Vec<u8>>>, EngineError> {
    inputs
        .iter()
        .map(|p| Ok(Arc::new(fs::read(p).map_err(io_err(p))?)))
        .collect()
}

/// Render a row as one tab-separated line.
pub fn render_cells(cells: &[Value]) -> String {
    let rendered: Vec<String> = cells.iter().map(render_value).collect();
    rendered.join("\t")
}

fn extract_key(positions: &[usize], row: &[Value]) -> Value {
    if positions.len() == 1 {
        row[positions[0]].clone()
    } else {
        Value::Tuple(positions.iter().map(|&p| row[p].clone()).collect())
    }
}

/// Apply a fused map pipeline (leading Decode) to one input line.
fn apply_pipeline(ops: &[MapOp], line: &str) -> Result<Vec<Vec<Value>>, String> {
    let (first, rest) = ops.split_first().expect("pipeline has a decode");
    let schema = match first {
        MapOp::Decode { schema } => schema,
        other => panic!("pipeline must start with decode, found {other:?}"),
    };
    let decoded = match parse_row(line, schema).map_err(|e| e.to_string())? {
        Value::Tuple(cells) => cells,
        _ => unreachable!(),
    };
    apply_row_ops(rest, vec![decoded])
}

/// Apply Filter/Generate ops to already-typed rows.
fn apply_row_ops(ops: &[MapOp], mut rows: Vec<Vec<Value>>) -> Result<Vec<Vec<Value>>, String> {
    for op in ops {
        match op {
            MapOp::Decode { .. } => panic!("decode only leads a pipeline"),
            MapOp::Filter { predicate, schema } => {
                let mut kept = Vec::with_capacity(rows.len());
                for row in rows {
                    let keep = truthy(&eval_expr(predicate, &row, schema).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?;
                    if keep {
                        kept.push(row);
                    }
                }
                rows = kept;
            }
            MapOp::Generate {
                gens, in_schema, ..
            } => {
                let mut next = Vec::with_capacity(rows.len());
                for row in rows {
                    next.extend(
                        eval_generate(gens, &row, in_schema).map_err(|e| e.to_string())?,
                    );
                }
                rows = next;
            }
        }
    }
    Ok(rows)
}

/// Map-side partial aggregation: one tuple holding a slot per aggregate.
/// AVG partials carry (sum, count).
fn make_partials(funcs: &[Builtin], values: &[Value]) -> Result<Value, String> {
    let rows: Vec<Value> = values.to_vec();
    let bag = Value::Bag(rows);
    let mut slots = Vec::with_capacity(funcs.len());
    for func in funcs {
        let partial = match func {
            Builtin::Avg => {
                let sum = crate::eval::eval_aggregate(Builtin::Sum, &bag)
                    .map_err(|e| e.to_string())?;
                let count = crate::eval::eval_aggregate(Builtin::Count, &bag)
                    .map_err(|e| e.to_string())?;
                Value::Tuple(vec![sum, count])
            }
            other => crate::eval::eval_aggregate(*other, &bag).map_err(|e| e.to_string())?,
        };
        slots.push(partial);
    }
    Ok(Value::Tuple(slots))
}

/// Merge partial tuples into final aggregate values, one per function.
fn merge_partials(funcs: &[Builtin], partials: &[Value]) -> Result<Vec<Value>, String> {
    let mut finals = Vec::with_capacity(funcs.len());
    for (slot, func) in funcs.iter().enumerate() {
        let column: Vec<&Value> = partials
            .iter()
            .map(|p| match p {
                Value::Tuple(cells) => Ok(&cells[slot]),
                other => Err(format!("partial is not a tuple: {other:?}")),
            })
            .collect::<Result<_, String>>()?;
        let merged = match func {
            Builtin::Count => {
                let mut total: i64 = 0;
                for v in &column {
                    match v {
                        Value::Int(i) => {
                            total = total.checked_add(*i).ok_or("COUNT overflow")?
                        }
                        other => return Err(format!("bad COUNT partial {other:?}")),
                    }
                }
                Value::Int(total)
            }
            Builtin::Sum => merge_sums(&column)?,
            Builtin::Min | Builtin::Max => {
                let mut best: Option<Value> = None;
                for v in column {
                    best = Some(match best {
                        None => v.clone(),
                        Some(b) => {
                            let ord = compare(v, &b);
                            let keep_new = if *func == Builtin::Min {
                                ord == std::cmp::Ordering::Less
                            } else {
                                ord == std::cmp::Ordering::Greater
                            };
                            if keep_new {
                                v.clone()
                            } else {
                                b
                            }
                        }
                    });
                }
                best.ok_or("aggregate over no partials")?
            }
            Builtin::Avg => {
                let mut sums = Vec::new();
                let mut count: i64 = 0;
                for v in &column {
                    match v {
                        Value::Tuple(pair) if pair.len() == 2 => {
                            sums.push(&pair[0]);
                            match &pair[1] {
                                Value::Int(c) => {
                                    count = count.checked_add(*c).ok_or("AVG count overflow")?
                                }
                                other => return Err(format!("bad AVG partial count {other:?}")),
                            }
                        }
                        other => return Err(format!("bad AVG partial {other:?}")),
                    }
                }
                if count == 0 {
                    return Err("AVG over zero rows".to_string());
                }
                let total = match merge_sums(&sums)? {
                    Value::Int(i) => i as f64,
                    Value::Float(f) => f,
                    _ => unreachable!(),
                };
                Value::Float(total / count as f64)
            }
            _ => return Err(format!("{func:?} is not an aggregate")),
        };
        finals.push(merged);
    }
    Ok(finals)
}

fn merge_sums(values: &[&Value]) -> Result<Value, String> {
    let all_int = values.iter().all(|v| matches!(v, Value::Int(_)));
    if all_int {
        let mut acc: i64 = 0;
        for v in values {
            if let Value::Int(i) = v {
                acc = acc.checked_add(*i).ok_or("SUM overflow")?;
            }
        }
        Ok(Value::Int(acc))
    } else {
        let mut acc = 0.0f64;
        for v in values {
            match v {
                Value::Int(i) => acc += *i as f64,
                Value::Float(f) => acc += *f,
                other => return Err(format!("bad SUM partial {other:?}")),
            }
        }
        Ok(Value::Float(acc))
    }
}

/// Turn one key group into reduce output rows.
fn reduce_rows(
    reduce: &ReduceOp,
    key: &Value,
    values: Vec<(u8, Value)>,
) -> Result<Vec<Vec<Value>>, String> {
    match reduce {
        ReduceOp::None => unreachable!("map-only jobs bypass reduce"),
        ReduceOp::GroupEmit { .. } => {
            let bag = Value::Bag(values.into_iter().map(|(_, v)| v).collect());
            Ok(vec![vec![key.clone(), bag]])
        }
        ReduceOp::Aggregate {
            group_schema,
            gens,
            aggs,
            combined,
        } => {
            if *combined {
                let partials: Vec<Value> = values.into_iter().map(|(_, v)| v).collect();
                let finals = merge_partials(aggs, &partials)?;
                let pairs: Vec<(Builtin, Value)> =
                    aggs.iter().copied().zip(finals).collect();
                let key_schema = group_only_schema(group_schema);
                eval_generate_with_finals(gens, std::slice::from_ref(key), &key_schema, &pairs)
                    .map_err(|e| e.to_string())
            } else {
                let bag = Value::Bag(values.into_iter().map(|(_, v)| v).collect());
                let row = vec![key.clone(), bag];
                eval_generate(gens, &row, group_schema).map_err(|e| e.to_string())
            }
        }
        ReduceOp::JoinMerge => {
            let mut lefts: Vec<Vec<Value>> = Vec::new();
            let mut rights: Vec<Vec<Value>> = Vec::new();
            for (tag, value) in values {
                let cells = match value {
                    Value::Tuple(cells) => cells,
                    other => return Err(format!("join value is not a tuple: {other:?}")),
                };
                if tag == 0 {
                    lefts.push(cells);
                } else {
                    rights.push(cells);
                }
            }
            let mut out = Vec::with_capacity(lefts.len() * rights.len());
            for l in &lefts {
                for r in &rights {
                    let mut row = l.clone();
                    row.extend(r.iter().cloned());
                    out.push(row);
                }
            }
            Ok(out)
        }
        ReduceOp::OrderEmit { .. } => Ok(values
            .into_iter()
            .map(|(_, v)| match v {
                Value::Tuple(cells) => Ok(cells),
                other => Err(format!("order value is not a tuple: {other:?}")),
            })
            .collect::<Result<Vec<_>, String>>()?),
    }
}

/// Schema holding just the group key, for evaluating combined aggregates.
fn group_only_schema(group_schema: &Schema) -> Schema {
    Schema::new(vec![group_schema.fields()[0].clone()]).expect("group field")
}
