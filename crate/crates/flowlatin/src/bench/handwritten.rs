//! Hand-written word count against the engine's raw job API.
//!
//! This is the long way around on purpose: explicit mapper, combiner and
//! reducer types, hand-rolled tokenization and output formatting, and a
//! driver that wires the stages together. No script layer, no compiler.
//! The benchmark counts the non-blank, non-comment lines of this file as
//! the hand-written implementation's size.

use std::path::{Path, PathBuf};

use crate::data_model::Value;
use crate::mr_engine::{Engine, EngineError, JobCounters};

/// Splits each input line into maximal runs of non-whitespace characters
/// and emits `(token, 1)` for every run, case-sensitively.
pub struct TokenizingMapper;

impl TokenizingMapper {
    pub fn new() -> TokenizingMapper {
        TokenizingMapper
    }

    pub fn map(
        &self,
        line: &str,
        emit: &mut dyn FnMut(Value, Value) -> Result<(), String>,
    ) -> Result<(), String> {
        let mut token = String::new();
        for ch in line.chars() {
            if ch.is_whitespace() {
                if !token.is_empty() {
                    emit(Value::CharArray(std::mem::take(&mut token)), Value::Int(1))?;
                }
            } else {
                token.push(ch);
            }
        }
        if !token.is_empty() {
            emit(Value::CharArray(token), Value::Int(1))?;
        }
        Ok(())
    }
}

impl Default for TokenizingMapper {
    fn default() -> Self {
        TokenizingMapper::new()
    }
}

/// Map-side pre-aggregation: collapses a run of counts for one token into
/// a single partial count before anything hits the shuffle.
pub struct CountCombiner;

impl CountCombiner {
    pub fn combine(&self, _token: &Value, counts: Vec<Value>) -> Result<Value, String> {
        let mut partial: i64 = 0;
        for value in counts {
            match value {
                Value::Int(n) => {
                    partial = partial
                        .checked_add(n)
                        .ok_or_else(|| "count overflow in combiner".to_string())?;
                }
                other => return Err(format!("combiner expected a count, got {other:?}")),
            }
        }
        Ok(Value::Int(partial))
    }
}

/// Sums the (possibly pre-combined) counts for one token and formats the
/// final `word<TAB>count` line.
pub struct SummingReducer;

impl SummingReducer {
    pub fn reduce(
        &self,
        token: &Value,
        counts: Vec<Value>,
        emit: &mut dyn FnMut(String),
    ) -> Result<(), String> {
        let word = match token {
            Value::CharArray(w) => w.clone(),
            other => return Err(format!("reducer expected a token key, got {other:?}")),
        };
        let mut total: i64 = 0;
        for value in counts {
            match value {
                Value::Int(n) => {
                    total = total
                        .checked_add(n)
                        .ok_or_else(|| "count overflow in reducer".to_string())?;
                }
                other => return Err(format!("reducer expected a count, got {other:?}")),
            }
        }
        emit(format!("{word}\t{total}"));
        Ok(())
    }
}

/// Driver: read the input, run map, shuffle and reduce, and leave the
/// sorted `word<TAB>count` dataset at `output`.
pub fn wordcount_handwritten(
    input: &Path,
    output: &Path,
    engine: &Engine,
) -> Result<JobCounters, EngineError> {
    let mapper = TokenizingMapper::new();
    let combiner = CountCombiner;
    let reducer = SummingReducer;
    let inputs: Vec<PathBuf> = vec![input.to_path_buf()];
    let map_stage = |line: &str,
                     emit: &mut dyn FnMut(Value, Value) -> Result<(), String>|
     -> Result<(), String> { mapper.map(line, emit) };
    let combine_stage =
        |token: &Value, counts: Vec<Value>| -> Result<Value, String> {
            combiner.combine(token, counts)
        };
    let reduce_stage = |token: &Value,
                        counts: Vec<Value>,
                        emit: &mut dyn FnMut(String)|
     -> Result<(), String> { reducer.reduce(token, counts, emit) };
    engine.run_raw_job(
        0,
        &inputs,
        &map_stage,
        Some(&combine_stage),
        &reduce_stage,
        output,
    )
}

/// Non-blank, non-comment physical lines of this file: the LOC metric for
/// the hand-written pipeline.
pub fn handwritten_loc() -> usize {
    include_str!("handwritten.rs")
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with("//"))
        .count()
}
