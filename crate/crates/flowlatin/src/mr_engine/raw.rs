//! Engine internals: input splitting, the shuffle pair record, sorted runs
//! with spill-to-disk, and k-way merging.
//!
//! Determinism rests on one invariant: every emitted pair carries a sequence
//! stamp (input ordinal, split ordinal, emit index). Splits are contiguous,
//! so ordering by stamp equals ordering by position in the original input,
//! independent of split size, worker count and scheduling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data_model::{compare, Value};

/// One contiguous piece of a dataset, aligned to record (line) boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub dataset: String,
    pub ordinal: usize,
    pub start: usize,
    pub end: usize,
}

/// Cut a dataset into record-aligned splits of roughly
/// `target_split_bytes`. Splits are disjoint, contiguous and cover the data
/// exactly; a dataset smaller than one split yields a single split, an
/// empty one none.
pub fn split_input(dataset: &str, data: &[u8], target_split_bytes: u64) -> Vec<Split> {
    split_ranges(data, target_split_bytes)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| Split {
            dataset: dataset.to_string(),
            ordinal,
            start,
            end,
        })
        .collect()
}

/// Cut `data` into ranges of roughly `target_split_bytes`, each ending on a
/// newline (or at end of input). Ranges are disjoint, contiguous, and cover
/// the data exactly; an empty input yields no splits.
pub fn split_ranges(data: &[u8], target_split_bytes: u64) -> Vec<(usize, usize)> {
    let target = target_split_bytes.max(1) as usize;
    let mut out = Vec::new();
    let mut start = 0usize;
    while start < data.len() {
        let tentative = (start + target).min(data.len());
        if tentative == data.len() {
            out.push((start, data.len()));
            break;
        }
        // extend to the end of the record containing byte tentative-1
        let search_from = tentative - 1;
        let end = match data[search_from..].iter().position(|&b| b == b'\n') {
            Some(off) => search_from + off + 1,
            None => data.len(),
        };
        out.push((start, end));
        start = end;
    }
    out
}

/// Sequence stamp: input ordinal (8 bits), split ordinal (24), emit index (32).
pub type Seq = u64;

pub fn make_seq(input: usize, split: usize, emit: u64) -> Seq {
    debug_assert!(input < 256 && split < (1 << 24) && emit < (1 << 32));
    ((input as u64) << 56) | ((split as u64) << 32) | emit
}

/// One shuffle record: key, value, join-side tag, sequence stamp.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRec {
    pub key: Value,
    pub value: Value,
    pub tag: u8,
    pub seq: Seq,
}

/// Key comparison; `descending` flips key order but never the seq order.
pub fn pair_cmp(a: &PairRec, b: &PairRec, descending: bool) -> Ordering {
    let key_ord = compare(&a.key, &b.key);
    let key_ord = if descending { key_ord.reverse() } else { key_ord };
    key_ord.then(a.seq.cmp(&b.seq)).then(a.tag.cmp(&b.tag))
}

/// Rough in-memory footprint, for the spill budget.
pub fn value_weight(v: &Value) -> usize {
    match v {
        Value::Int(_) | Value::Float(_) => 16,
        Value::CharArray(s) => 32 + s.len(),
        Value::Tuple(vs) | Value::Bag(vs) => 32 + vs.iter().map(value_weight).sum::<usize>(),
    }
}

/// A sorted run of pairs: the in-memory result of one map task, or a spill
/// file when the task ran over its memory budget.
pub enum Run {
    Memory(Vec<PairRec>),
    Spilled { path: PathBuf },
}

pub fn spill_run(pairs: &[PairRec], path: PathBuf) -> std::io::Result<Run> {
    let file = fs::File::create(&path)?;
    let mut w = BufWriter::new(file);
    for rec in pairs {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(Run::Spilled { path })
}

enum RunIter {
    Memory(std::vec::IntoIter<PairRec>),
    Spilled(std::io::Lines<BufReader<fs::File>>),
}

impl RunIter {
    fn next(&mut self) -> std::io::Result<Option<PairRec>> {
        match self {
            RunIter::Memory(it) => Ok(it.next()),
            RunIter::Spilled(lines) => match lines.next() {
                None => Ok(None),
                Some(line) => {
                    let rec: PairRec = serde_json::from_str(&line?)
                        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                    Ok(Some(rec))
                }
            },
        }
    }
}

struct HeapEntry {
    rec: PairRec,
    run: usize,
    descending: bool,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for ascending merge order
        pair_cmp(&self.rec, &other.rec, self.descending)
            .then(self.run.cmp(&other.run))
            .reverse()
    }
}

/// One merged key group: the key and its `(tag, value)` list in
/// sequence-stamp order.
pub type KeyGroup = (Value, Vec<(u8, Value)>);

/// K-way merge of sorted runs into key groups.
///
/// Each group keeps its values in sequence-stamp order, i.e. original input
/// order. Returns `(groups, total_pairs_consumed)`.
pub fn merge_runs(runs: Vec<Run>, descending: bool) -> std::io::Result<(Vec<KeyGroup>, u64)> {
    let mut iters: Vec<RunIter> = runs
        .into_iter()
        .map(|r| match r {
            Run::Memory(v) => Ok(RunIter::Memory(v.into_iter())),
            Run::Spilled { path } => {
                Ok(RunIter::Spilled(BufReader::new(fs::File::open(path)?).lines()))
            }
        })
        .collect::<std::io::Result<Vec<_>>>()?;
    let mut heap = BinaryHeap::new();
    for (idx, it) in iters.iter_mut().enumerate() {
        if let Some(rec) = it.next()? {
            heap.push(HeapEntry {
                rec,
                run: idx,
                descending,
            });
        }
    }
    let mut groups: Vec<KeyGroup> = Vec::new();
    let mut consumed = 0u64;
    while let Some(entry) = heap.pop() {
        let HeapEntry { rec, run, .. } = entry;
        if let Some(next) = iters[run].next()? {
            heap.push(HeapEntry {
                rec: next,
                run,
                descending,
            });
        }
        consumed += 1;
        match groups.last_mut() {
            Some((key, values)) if compare(key, &rec.key) == Ordering::Equal => {
                values.push((rec.tag, rec.value));
            }
            _ => groups.push((rec.key, vec![(rec.tag, rec.value)])),
        }
    }
    Ok((groups, consumed))
}
