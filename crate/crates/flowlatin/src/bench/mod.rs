//! Benchmark harness: the same word count through the hand-written raw-API
//! pipeline and through a five-statement script, over sized corpora, with an
//! integrity gate that discards timings unless both outputs are identical.

mod corpus;
mod handwritten;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::mr_engine::{Engine, EngineConfig, EngineError};
use crate::planner::{compile, insert_combiners, CompileError};
use crate::script_lang::{infer_schemas, parse_script_text, ScriptError, TypeError};

pub use corpus::{generate_corpus, lexicon};
pub use handwritten::{handwritten_loc, wordcount_handwritten};

/// The script side of the comparison: five statements.
pub const WORD_COUNT_SCRIPT: &str = "\
lines = LOAD '{input}' AS (line:chararray);
words = FOREACH lines GENERATE FLATTEN(TOKENIZE(line)) AS word;
grouped = GROUP words BY word;
counts = FOREACH grouped GENERATE group AS word, COUNT(words) AS n;
STORE counts INTO '{output}';
";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("sizes must be non-empty and strictly ascending")]
    BadSizes,
    #[error("integrity gate failed on the {input_kb} KB corpus: implementations disagree")]
    Integrity { input_kb: u64 },
    #[error("script: {0}")]
    Script(#[from] ScriptError),
    #[error("types: {0}")]
    Types(#[from] TypeError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Word count via the script language, same contract as the hand-written
/// pipeline: `word<TAB>count` lines sorted by word.
pub fn wordcount_script(input: &Path, output: &Path, engine: &Engine) -> Result<(), BenchError> {
    let script = WORD_COUNT_SCRIPT
        .replace("{input}", &input.display().to_string())
        .replace("{output}", &output.display().to_string());
    let plan = infer_schemas(parse_script_text(&script)?)?;
    let graph = insert_combiners(compile(&plan)?);
    engine.run_graph(&graph)?;
    Ok(())
}

/// Statement count of the bundled script (the script-side LOC metric).
pub fn script_statement_count() -> usize {
    let script = WORD_COUNT_SCRIPT
        .replace("{input}", "in")
        .replace("{output}", "out");
    parse_script_text(&script)
        .expect("bundled script parses")
        .nodes
        .len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub turn: usize,
    pub operation: String,
    pub input_kb: u64,
    pub loc_handwritten: usize,
    pub loc_script: usize,
    pub t_handwritten_ms: u64,
    pub t_script_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub environment: String,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "turn,operation,input_kb,loc_handwritten,loc_script,t_handwritten_ms,t_script_ms\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.turn,
                r.operation,
                r.input_kb,
                r.loc_handwritten,
                r.loc_script,
                r.t_handwritten_ms,
                r.t_script_ms
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let (loc_hw, loc_script) = self
            .rows
            .first()
            .map(|r| (r.loc_handwritten, r.loc_script))
            .unwrap_or((0, 0));
        let mut out = String::new();
        out.push_str(&format!(
            "| Turn | Operation | Input File Size (KB) | Time, hand-written map-reduce (LOC: {loc_hw}) | Time, script (LOC: {loc_script}) |\n"
        ));
        out.push_str("|---|---|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} ms | {} ms |\n",
                r.turn, r.operation, r.input_kb, r.t_handwritten_ms, r.t_script_ms
            ));
        }
        out.push_str(&format!("\nEnvironment: {}\n", self.environment));
        out
    }

    /// (input_kb, time_ms) series for one implementation.
    pub fn series_csv(&self, script_side: bool) -> String {
        let mut out = String::from("input_kb,time_ms\n");
        for r in &self.rows {
            let t = if script_side {
                r.t_script_ms
            } else {
                r.t_handwritten_ms
            };
            out.push_str(&format!("{},{}\n", r.input_kb, t));
        }
        out
    }

    /// Write bench.csv, bench.md, fig4.csv (hand-written series) and
    /// fig5.csv (script series) under `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = [
            ("bench.csv", self.to_csv()),
            ("bench.md", self.to_markdown()),
            ("fig4.csv", self.series_csv(false)),
            ("fig5.csv", self.series_csv(true)),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub sizes_kb: Vec<u64>,
    pub repetitions: usize,
    pub seed: u64,
    pub workers: usize,
    pub split_bytes: u64,
    pub work_dir: PathBuf,
}

pub fn median_ms(mut samples: Vec<u64>) -> u64 {
    assert!(!samples.is_empty());
    samples.sort_unstable();
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2
    }
}

type ImplFn<'a> = &'a dyn Fn(&Path, &Path, &Engine) -> Result<(), BenchError>;

/// Sweep driver with injectable implementations (tests corrupt one side to
/// exercise the integrity gate).
pub fn run_sweep_with(
    cfg: &SweepConfig,
    handwritten_impl: ImplFn,
    script_impl: ImplFn,
) -> Result<BenchReport, BenchError> {
    if cfg.sizes_kb.is_empty() || cfg.sizes_kb.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::BadSizes);
    }
    let repetitions = cfg.repetitions.max(1);
    let engine = Engine::new(
        EngineConfig::new(&cfg.work_dir)
            .with_workers(cfg.workers)
            .with_split_bytes(cfg.split_bytes),
    )?;
    let loc_handwritten = handwritten_loc();
    let loc_script = script_statement_count();
    let mut rows = Vec::with_capacity(cfg.sizes_kb.len());
    for (turn, &size_kb) in cfg.sizes_kb.iter().enumerate() {
        let corpus_path = cfg.work_dir.join(format!("corpus-{size_kb}kb.txt"));
        fs::write(&corpus_path, generate_corpus(size_kb, cfg.seed))
            .map_err(io_err(&corpus_path))?;
        let hw_out = cfg.work_dir.join(format!("wc-handwritten-{size_kb}kb.tsv"));
        let script_out = cfg.work_dir.join(format!("wc-script-{size_kb}kb.tsv"));

        // integrity gate: both paths must agree byte for byte before any
        // timing is recorded
        handwritten_impl(&corpus_path, &hw_out, &engine)?;
        script_impl(&corpus_path, &script_out, &engine)?;
        let hw_bytes = fs::read(&hw_out).map_err(io_err(&hw_out))?;
        let script_bytes = fs::read(&script_out).map_err(io_err(&script_out))?;
        if hw_bytes != script_bytes {
            return Err(BenchError::Integrity { input_kb: size_kb });
        }

        let mut hw_times = Vec::with_capacity(repetitions);
        let mut script_times = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let started = Instant::now();
            handwritten_impl(&corpus_path, &hw_out, &engine)?;
            hw_times.push(started.elapsed().as_millis() as u64);
            let started = Instant::now();
            script_impl(&corpus_path, &script_out, &engine)?;
            script_times.push(started.elapsed().as_millis() as u64);
        }
        rows.push(BenchRow {
            turn: turn + 1,
            operation: "Word-Count".to_string(),
            input_kb: size_kb,
            loc_handwritten,
            loc_script,
            t_handwritten_ms: median_ms(hw_times),
            t_script_ms: median_ms(script_times),
        });
    }
    Ok(BenchReport {
        rows,
        environment: format!(
            "workers={} split_bytes={} host={}/{} repetitions={} seed={}",
            cfg.workers,
            cfg.split_bytes,
            std::env::consts::OS,
            std::env::consts::ARCH,
            repetitions,
            cfg.seed
        ),
    })
}

/// Run the benchmark protocol: per size, verify both implementations agree
/// on the same corpus, then record median wall times over `repetitions`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<BenchReport, BenchError> {
    run_sweep_with(
        cfg,
        &|input, output, engine| {
            wordcount_handwritten(input, output, engine)?;
            Ok(())
        },
        &|input, output, engine| wordcount_script(input, output, engine),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn sweep_cfg(dir: &Path, sizes: Vec<u64>) -> SweepConfig {
        SweepConfig {
            sizes_kb: sizes,
            repetitions: 1,
            seed: 7,
            workers: 2,
            split_bytes: 16 * 1024,
            work_dir: dir.join("work"),
        }
    }

    fn engine(dir: &Path) -> Engine {
        Engine::new(EngineConfig::new(dir.join("engine-work"))).unwrap()
    }

    /// Sequential hash-count oracle: the ground truth both engine paths
    /// must match.
    pub(crate) fn wordcount_oracle(text: &str) -> String {
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

    #[test]
    fn tiny_fixture_counts_match_both_paths() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "a b a\n").unwrap();
        let eng = engine(dir.path());
        let hw = dir.path().join("hw.tsv");
        let sc = dir.path().join("sc.tsv");
        wordcount_handwritten(&input, &hw, &eng).unwrap();
        wordcount_script(&input, &sc, &eng).unwrap();
        assert_eq!(fs::read_to_string(&hw).unwrap(), "a\t2\nb\t1\n");
        assert_eq!(fs::read_to_string(&sc).unwrap(), "a\t2\nb\t1\n");
    }

    #[test]
    fn empty_input_gives_empty_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "").unwrap();
        let eng = engine(dir.path());
        let hw = dir.path().join("hw.tsv");
        let sc = dir.path().join("sc.tsv");
        wordcount_handwritten(&input, &hw, &eng).unwrap();
        wordcount_script(&input, &sc, &eng).unwrap();
        assert_eq!(fs::read(&hw).unwrap(), b"");
        assert_eq!(fs::read(&sc).unwrap(), b"");
    }

    #[test]
    fn handwritten_matches_sequential_oracle_on_13kb() {
        let dir = tempfile::tempdir().unwrap();
        let text = generate_corpus(13, 41);
        let input = dir.path().join("in.txt");
        fs::write(&input, &text).unwrap();
        let eng = engine(dir.path());
        let out = dir.path().join("out.tsv");
        wordcount_handwritten(&input, &out, &eng).unwrap();
        assert_eq!(fs::read_to_string(&out).unwrap(), wordcount_oracle(&text));
    }

    #[test]
    fn median_is_textbook() {
        assert_eq!(median_ms(vec![5, 1, 9]), 5);
        assert_eq!(median_ms(vec![4, 2]), 3);
        assert_eq!(median_ms(vec![7]), 7);
    }

    #[test]
    fn loc_metrics_hold_the_claimed_gap() {
        assert!(script_statement_count() <= 5, "{}", script_statement_count());
        assert!(
            handwritten_loc() >= 10 * script_statement_count(),
            "handwritten {} vs script {}",
            handwritten_loc(),
            script_statement_count()
        );
    }

    #[test]
    fn sweep_produces_monotone_rows_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sweep_cfg(dir.path(), vec![2, 4]);
        let report = run_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].input_kb < report.rows[1].input_kb);
        assert_eq!(report.rows[0].loc_script, report.rows[1].loc_script);
        assert_eq!(report.rows[0].loc_handwritten, report.rows[1].loc_handwritten);
        report.write_files(dir.path()).unwrap();
        for name in ["bench.csv", "bench.md", "fig4.csv", "fig5.csv"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
        assert!(csv.starts_with(
            "turn,operation,input_kb,loc_handwritten,loc_script,t_handwritten_ms,t_script_ms\n"
        ));
    }

    #[test]
    fn bad_sizes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for sizes in [vec![], vec![4, 2], vec![4, 4]] {
            let cfg = sweep_cfg(dir.path(), sizes);
            assert!(matches!(run_sweep(&cfg), Err(BenchError::BadSizes)));
        }
    }

    #[test]
    fn corrupted_implementation_trips_the_integrity_gate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sweep_cfg(dir.path(), vec![2]);
        let err = run_sweep_with(
            &cfg,
            &|input, output, engine| {
                wordcount_handwritten(input, output, engine)?;
                Ok(())
            },
            &|input, output, engine| {
                wordcount_script(input, output, engine)?;
                // fault injection: tamper with the script output
                let mut bytes = fs::read(output).unwrap();
                if let Some(b) = bytes.last_mut() {
                    *b = b'9';
                }
                fs::write(output, bytes).unwrap();
                Ok(())
            },
        )
        .unwrap_err();
        assert!(matches!(err, BenchError::Integrity { input_kb: 2 }));
    }
}
