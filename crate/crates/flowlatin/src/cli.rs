//! Command-line front end: ingest captures, run scripts, run the built-in
//! analyses, benchmark, and an interactive console.
//!
//! Exit codes: 0 success, 1 usage error, 2 execution error.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::bench::{run_sweep, SweepConfig};
use crate::data_model::{parse_row, render_value, Schema};
use crate::flow_model::{parse_capture_text, sectionize, write_sections};
use crate::mr_engine::{Engine, EngineConfig};
use crate::netflow_analyses::{analyze, AnalysisKind};
use crate::planner::{compile, explain, insert_combiners};
use crate::script_lang::{
    infer_schemas, parse_script_text, parse_script_with_env, NodeId, PlanNode, PlanOp,
};

pub const WORKERS_ENV: &str = "FLOWLATIN_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "flowlatin",
    about = "NetFlow capture analysis with a dataflow script engine",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct RunOpts {
    /// Worker threads (default: FLOWLATIN_WORKERS or the CPU count)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Input split size in bytes (min 256)
    #[arg(long, default_value_t = 64 * 1024, value_parser = clap::value_parser!(u64).range(256..))]
    split_bytes: u64,
    /// Scratch directory for intermediate datasets
    #[arg(long, default_value = ".flowwork")]
    work_dir: PathBuf,
    /// Keep the scratch directory after a successful run
    #[arg(long)]
    keep: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a capture file and write NetFlow-Data1/2/3 section datasets
    Ingest {
        capture: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Execute a script (or just print its compiled job graph)
    Run {
        script: PathBuf,
        /// Print the job graph instead of executing
        #[arg(long)]
        explain: bool,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Run a built-in traffic analysis over a capture
    Analyze {
        capture: PathBuf,
        /// One of: src-if, src-ip, protocol, node
        #[arg(long)]
        kind: String,
    },
    /// Benchmark hand-written map-reduce vs the five-statement script
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "13,26,52,104,208")]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Interactive console: one statement at a time, `dump <alias>` to print
    Repl {
        #[command(flatten)]
        run: RunOpts,
    },
}

fn resolve_workers(flag: Option<u64>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w as usize);
    }
    if let Ok(env) = std::env::var(WORKERS_ENV) {
        let w: usize = env
            .parse()
            .with_context(|| format!("bad {WORKERS_ENV} value `{env}`"))?;
        if w == 0 {
            bail!("{WORKERS_ENV} must be at least 1");
        }
        return Ok(w);
    }
    Ok(std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1))
}

struct RunDirs {
    run_dir: PathBuf,
    keep: bool,
}

impl RunDirs {
    fn create(opts: &RunOpts) -> Result<(RunDirs, EngineConfig)> {
        let workers = resolve_workers(opts.workers)?;
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let run_dir = opts
            .work_dir
            .join(format!("run-{}-{nanos}", std::process::id()));
        let cfg = EngineConfig::new(&run_dir)
            .with_workers(workers)
            .with_split_bytes(opts.split_bytes);
        Ok((
            RunDirs {
                run_dir,
                keep: opts.keep,
            },
            cfg,
        ))
    }

    fn finish(self) {
        if !self.keep {
            let _ = fs::remove_dir_all(&self.run_dir);
        }
    }
}

/// Parse argv and run one command, writing to the supplied streams.
pub fn dispatch(
    argv: &[String],
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version as "errors" with success status
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 1;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match execute(cli.command, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            2
        }
    }
}

fn execute(command: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { capture, out_dir } => {
            let text = fs::read_to_string(&capture)
                .with_context(|| format!("cannot read {}", capture.display()))?;
            let cap = parse_capture_text(&text)?;
            let sections = sectionize(&cap);
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))?;
            let paths = write_sections(&sections, &out_dir)?;
            for path in paths {
                writeln!(stdout, "wrote {}", path.display())?;
            }
            Ok(())
        }
        Command::Run {
            script,
            explain: explain_only,
            run,
        } => {
            let text = fs::read_to_string(&script)
                .with_context(|| format!("cannot read {}", script.display()))?;
            let plan = infer_schemas(parse_script_text(&text)?)?;
            let graph = insert_combiners(compile(&plan)?);
            if explain_only {
                write!(stdout, "{}", explain(&graph))?;
                return Ok(());
            }
            let (dirs, cfg) = RunDirs::create(&run)?;
            let engine = Engine::new(cfg)?;
            let outcome = engine.run_graph(&graph);
            match outcome {
                Ok(_) => {
                    for (_, path) in &graph.stores {
                        writeln!(stdout, "wrote {path}")?;
                    }
                    dirs.finish();
                    Ok(())
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Analyze { capture, kind } => {
            let kind = AnalysisKind::from_name(&kind)
                .ok_or_else(|| anyhow!("unknown analysis kind `{kind}` (expected src-if, src-ip, protocol or node)"))?;
            let text = fs::read_to_string(&capture)
                .with_context(|| format!("cannot read {}", capture.display()))?;
            let cap = parse_capture_text(&text)?;
            let sections = sectionize(&cap);
            let report = analyze(kind, &sections)?;
            write!(stdout, "{}", report.render())?;
            Ok(())
        }
        Command::Bench {
            sizes,
            reps,
            seed,
            out_dir,
            run,
        } => {
            let (dirs, cfg) = RunDirs::create(&run)?;
            let sweep = SweepConfig {
                sizes_kb: sizes,
                repetitions: reps as usize,
                seed,
                workers: cfg.workers,
                split_bytes: cfg.split_bytes,
                work_dir: cfg.work_dir.clone(),
            };
            let report = run_sweep(&sweep)?;
            report.write_files(&out_dir)?;
            write!(stdout, "{}", report.to_markdown())?;
            writeln!(stdout, "wrote {}", out_dir.join("bench.csv").display())?;
            dirs.finish();
            Ok(())
        }
        Command::Repl { run } => {
            let (dirs, cfg) = RunDirs::create(&run)?;
            let engine = Engine::new(cfg)?;
            repl(stdin, stdout, &engine)?;
            dirs.finish();
            Ok(())
        }
    }
}

struct ReplState<'e> {
    engine: &'e Engine,
    /// alias -> (materialized dataset path, schema)
    env: HashMap<String, (PathBuf, Schema)>,
    next_id: usize,
}

impl<'e> ReplState<'e> {
    fn env_bindings(&self) -> Vec<(String, String, Schema)> {
        let mut bindings: Vec<(String, String, Schema)> = self
            .env
            .iter()
            .map(|(alias, (path, schema))| {
                (alias.clone(), path.display().to_string(), schema.clone())
            })
            .collect();
        bindings.sort_by(|a, b| a.0.cmp(&b.0));
        bindings
    }

    /// Execute one `alias = ...` or `STORE ...` statement eagerly, with
    /// every prior alias available as a materialized load.
    fn statement(&mut self, line: &str) -> Result<Option<String>> {
        let text = if line.trim_end().ends_with(';') {
            line.to_string()
        } else {
            format!("{line};")
        };
        let mut plan = parse_script_with_env(&text, &self.env_bindings())?;
        let seeded = self.env.len();
        if plan.nodes.len() == seeded {
            return Ok(None); // nothing but whitespace
        }
        // every alias the line defines gets an implicit store, so all of
        // them materialize eagerly and join the environment
        let mut materialized: Vec<(NodeId, String, PathBuf)> = Vec::new();
        for id in seeded..plan.nodes.len() {
            let Some(alias) = plan.nodes[id].alias.clone() else {
                continue; // explicit STORE statement
            };
            let path = self
                .engine
                .cfg
                .work_dir
                .join(format!("repl-{}-{alias}.tsv", self.next_id));
            self.next_id += 1;
            materialized.push((id, alias, path));
        }
        for (input, _, path) in &materialized {
            plan.nodes.push(PlanNode {
                id: plan.nodes.len(),
                alias: None,
                op: PlanOp::Store {
                    input: *input,
                    path: path.display().to_string(),
                },
                schema: None,
            });
        }
        let plan = infer_schemas(plan)?;
        let graph = insert_combiners(compile(&plan)?);
        self.engine.run_graph(&graph)?;
        let mut last = None;
        for (id, alias, path) in materialized {
            let schema = plan.nodes[id].schema.clone().expect("inferred");
            self.env.insert(alias.clone(), (path, schema));
            last = Some(alias);
        }
        Ok(last)
    }

    fn dump(&self, alias: &str, stdout: &mut dyn Write) -> Result<()> {
        let (path, schema) = self
            .env
            .get(alias)
            .ok_or_else(|| anyhow!("undefined alias `{alias}`"))?;
        let body = fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        for line in body.lines() {
            let row = parse_row(line, schema)
                .map_err(|e| anyhow!("corrupt materialized row: {e}"))?;
            writeln!(stdout, "{}", render_value(&row))?;
        }
        Ok(())
    }
}

fn repl(stdin: &mut dyn BufRead, stdout: &mut dyn Write, engine: &Engine) -> Result<()> {
    let mut state = ReplState {
        engine,
        env: HashMap::new(),
        next_id: 0,
    };
    loop {
        write!(stdout, "grunt> ")?;
        stdout.flush()?;
        let mut line = String::new();
        if stdin.read_line(&mut line)? == 0 {
            writeln!(stdout)?;
            return Ok(()); // EOF
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if lower == "quit" || lower == "exit" || lower == "quit;" || lower == "exit;" {
            return Ok(());
        }
        if lower.starts_with("dump ") {
            let alias = trimmed[5..].trim().trim_end_matches(';');
            if let Err(e) = state.dump(alias, stdout) {
                writeln!(stdout, "error: {e:#}")?;
            }
            continue;
        }
        match state.statement(trimmed) {
            Ok(_) => {}
            Err(e) => writeln!(stdout, "error: {e:#}")?,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn run(args: &[&str], stdin_text: &str) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("flowlatin")
            .chain(args.iter().copied())
            .map(String::from)
            .collect();
        let mut stdin = Cursor::new(stdin_text.as_bytes().to_vec());
        let mut stdout = Vec::new();
        let mut stderr = Vec::new();
        let code = dispatch(&argv, &mut stdin, &mut stdout, &mut stderr);
        (
            code,
            String::from_utf8(stdout).unwrap(),
            String::from_utf8(stderr).unwrap(),
        )
    }

    const FIXTURE: &str = "\
#capture,1000,1002
10.0.0.1,10.0.0.2,0.0.0.0,1,2,10,4000,0,500,4242,80,27,6,0,0,0
10.0.0.1,10.0.0.3,0.0.0.0,1,2,20,9000,100,900,4243,443,24,6,0,0,0
10.0.0.2,10.0.0.1,0.0.0.0,2,1,5,600,200,300,5353,53,0,17,0,0,0
";

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run(&["frobnicate"], "");
        assert_eq!(code, 1);
        assert!(!err.is_empty());
    }

    #[test]
    fn analyze_protocol_prints_report() {
        let dir = tempfile::tempdir().unwrap();
        let cap = dir.path().join("sample.cap");
        fs::write(&cap, FIXTURE).unwrap();
        let (code, out, err) = run(
            &["analyze", cap.to_str().unwrap(), "--kind", "protocol"],
            "",
        );
        assert_eq!(code, 0, "{err}");
        assert_eq!(out, "#analysis,protocol,2\nTCP\t1\t2\nUDP\t0.5\t1\n");
    }

    #[test]
    fn analyze_rejects_unknown_kind() {
        let dir = tempfile::tempdir().unwrap();
        let cap = dir.path().join("sample.cap");
        fs::write(&cap, FIXTURE).unwrap();
        let (code, _, err) = run(&["analyze", cap.to_str().unwrap(), "--kind", "bogus"], "");
        assert_eq!(code, 2);
        assert!(err.contains("unknown analysis kind"));
    }

    #[test]
    fn ingest_writes_three_sections() {
        let dir = tempfile::tempdir().unwrap();
        let cap = dir.path().join("sample.cap");
        fs::write(&cap, FIXTURE).unwrap();
        let out_dir = dir.path().join("sections");
        let (code, out, err) = run(
            &[
                "ingest",
                cap.to_str().unwrap(),
                "--out-dir",
                out_dir.to_str().unwrap(),
            ],
            "",
        );
        assert_eq!(code, 0, "{err}");
        assert_eq!(out.lines().count(), 3);
        for name in ["NetFlow-Data1", "NetFlow-Data2", "NetFlow-Data3"] {
            assert!(out_dir.join(name).exists(), "{name}");
        }
    }

    #[test]
    fn run_explain_prints_graph_without_writing() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("wc.fl");
        fs::write(
            &script,
            "lines = LOAD 'in.txt' AS (line:chararray);\n\
             words = FOREACH lines GENERATE FLATTEN(TOKENIZE(line)) AS word;\n\
             grouped = GROUP words BY word;\n\
             counts = FOREACH grouped GENERATE group AS word, COUNT(words) AS n;\n\
             STORE counts INTO 'out.tsv';\n",
        )
        .unwrap();
        let work = dir.path().join("flowwork");
        let (code, out, err) = run(
            &[
                "run",
                script.to_str().unwrap(),
                "--explain",
                "--work-dir",
                work.to_str().unwrap(),
            ],
            "",
        );
        assert_eq!(code, 0, "{err}");
        assert!(out.starts_with("job 0: shuffle(group)"), "{out}");
        assert!(out.contains("store: tmp0 -> 'out.tsv'"));
        assert!(!work.exists(), "--explain must not create the work dir");
    }

    #[test]
    fn run_executes_script_and_cleans_work_dir() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "a b a\n").unwrap();
        let output = dir.path().join("out.tsv");
        let script = dir.path().join("wc.fl");
        fs::write(
            &script,
            format!(
                "lines = LOAD '{}' AS (line:chararray);\n\
                 words = FOREACH lines GENERATE FLATTEN(TOKENIZE(line)) AS word;\n\
                 grouped = GROUP words BY word;\n\
                 counts = FOREACH grouped GENERATE group AS word, COUNT(words) AS n;\n\
                 STORE counts INTO '{}';\n",
                input.display(),
                output.display()
            ),
        )
        .unwrap();
        let work = dir.path().join("flowwork");
        let (code, out, err) = run(
            &[
                "run",
                script.to_str().unwrap(),
                "--work-dir",
                work.to_str().unwrap(),
                "--workers",
                "2",
            ],
            "",
        );
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("wrote"));
        assert_eq!(fs::read_to_string(&output).unwrap(), "a\t2\nb\t1\n");
        // scratch cleaned up on success (run subdir removed)
        let leftover = fs::read_dir(&work).map(|d| d.count()).unwrap_or(0);
        assert_eq!(leftover, 0);
    }

    #[test]
    fn bench_single_size_writes_one_row_csv() {
        let dir = tempfile::tempdir().unwrap();
        let out_dir = dir.path().join("bench-out");
        let work = dir.path().join("flowwork");
        let (code, _, err) = run(
            &[
                "bench",
                "--sizes",
                "13",
                "--reps",
                "1",
                "--seed",
                "7",
                "--out-dir",
                out_dir.to_str().unwrap(),
                "--work-dir",
                work.to_str().unwrap(),
            ],
            "",
        );
        assert_eq!(code, 0, "{err}");
        let csv = fs::read_to_string(out_dir.join("bench.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2); // header + one row
        assert!(lines[1].starts_with("1,Word-Count,13,"));
    }

    #[test]
    fn repl_loads_filters_and_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("rows.tsv");
        fs::write(&input, "TCP\t3\nUDP\t1\nTCP\t9\n").unwrap();
        let work = dir.path().join("flowwork");
        let session = format!(
            "flows = LOAD '{}' AS (proto:chararray, n:int);\n\
             big = FILTER flows BY n > 2;\n\
             dump big\n\
             quit\n",
            input.display()
        );
        let (code, out, err) = run(
            &["repl", "--work-dir", work.to_str().unwrap()],
            &session,
        );
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("(TCP,3)"), "{out}");
        assert!(out.contains("(TCP,9)"), "{out}");
        assert!(!out.contains("(UDP,1)"), "{out}");
    }

    #[test]
    fn workers_env_var_overrides_the_default() {
        // worker count only changes scheduling, never results, so mutating
        // the process env here is safe for concurrently running tests
        std::env::set_var(WORKERS_ENV, "3");
        assert_eq!(resolve_workers(None).unwrap(), 3);
        assert_eq!(resolve_workers(Some(2)).unwrap(), 2); // flag wins
        std::env::set_var(WORKERS_ENV, "zero");
        assert!(resolve_workers(None).is_err());
        std::env::remove_var(WORKERS_ENV);
    }

    #[test]
    fn out_of_range_split_bytes_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("s.fl");
        fs::write(&script, "A = LOAD 'x' AS (a:int);\nSTORE A INTO 'o';\n").unwrap();
        let (code, _, err) = run(
            &["run", script.to_str().unwrap(), "--split-bytes", "64"],
            "",
        );
        assert_eq!(code, 1, "{err}");
        assert!(err.contains("64"), "{err}");
    }

    #[test]
    fn repl_groups_and_dumps_bags() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("rows.tsv");
        fs::write(&input, "TCP\t3\nUDP\t1\nTCP\t9\n").unwrap();
        let work = dir.path().join("flowwork");
        let session = format!(
            "flows = LOAD '{}' AS (proto:chararray, n:int);\n\
             g = GROUP flows BY proto;\n\
             dump g\n\
             counts = FOREACH g GENERATE group AS proto, COUNT(flows) AS n;\n\
             dump counts\n\
             quit\n",
            input.display()
        );
        let (code, out, err) = run(
            &["repl", "--work-dir", work.to_str().unwrap()],
            &session,
        );
        assert_eq!(code, 0, "{err}");
        // grouped relation materializes, rereads and prints its bags
        assert!(out.contains("(TCP,{(TCP,3),(TCP,9)})"), "{out}");
        assert!(out.contains("(UDP,{(UDP,1)})"), "{out}");
        // and a later statement can aggregate over the materialized bags
        assert!(out.contains("(TCP,2)"), "{out}");
        assert!(out.contains("(UDP,1)"), "{out}");
    }

    #[test]
    fn repl_multi_statement_line_binds_every_alias() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("rows.tsv");
        fs::write(&input, "TCP\t3\nUDP\t1\n").unwrap();
        let work = dir.path().join("flowwork");
        let session = format!(
            "flows = LOAD '{}' AS (proto:chararray, n:int); big = FILTER flows BY n > 2;\n\
             dump flows\n\
             dump big\n\
             quit\n",
            input.display()
        );
        let (code, out, err) = run(&["repl", "--work-dir", work.to_str().unwrap()], &session);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("(UDP,1)"), "{out}");
        assert!(out.contains("(TCP,3)"), "{out}");
    }

    #[test]
    fn repl_reports_errors_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let work = dir.path().join("flowwork");
        let session = "oops = FILTER nothing BY x > 1;\nquit\n";
        let (code, out, _) = run(&["repl", "--work-dir", work.to_str().unwrap()], session);
        assert_eq!(code, 0);
        assert!(out.contains("error:"), "{out}");
        assert!(out.contains("undefined alias"), "{out}");
    }
}
