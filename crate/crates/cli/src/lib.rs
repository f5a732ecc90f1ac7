//! Front end for the cohpath engine: configuration, task orchestration and
//! result emission. The binary in `main.rs` is a thin wrapper over [`run`].

pub mod config;
pub mod emit;
pub mod failure;
pub mod tasks;
pub mod verify;

use config::{RunConfig, Task, VerifyConfig};
use emit::{Format, Record};
use failure::{CliResult, Failure, EXIT_NUMERICAL};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything the command line supplies besides the task.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

/// `COHPATH_LOG=quiet` silences progress output on stderr.
pub fn quiet() -> bool {
    std::env::var("COHPATH_LOG").map(|v| v == "quiet").unwrap_or(false)
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::schema(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn format_for(path: Option<&Path>, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => Format::JsonLines,
        _ => Format::Csv,
    })
}

/// Computes the rows of a task without writing anything.
pub fn compute(task: Task, cfg: &RunConfig) -> CliResult<Vec<Record>> {
    if let Some(t) = cfg.task {
        if t != task {
            return Err(Failure::schema(format!("config declares task {} but {} was requested", t.name(), task.name())));
        }
    }
    match task {
        Task::Verify => Ok(verify::run(&cfg.verify)?.iter().map(|s| s.record()).collect()),
        Task::Partition => tasks::partition(cfg),
        Task::Correlator => tasks::correlator(cfg),
        Task::Current => tasks::current(cfg),
        Task::Green => tasks::green(cfg),
    }
}

fn run_inner(task: Task, inv: &Invocation) -> CliResult<()> {
    let cfg = match &inv.config {
        Some(p) => Some(load_config(p)?),
        None if task == Task::Verify => None,
        None => return Err(Failure::schema(format!("{} needs --config", task.name()))),
    };
    let out = inv.out.clone().or_else(|| cfg.as_ref().and_then(|c| c.output.as_ref().map(PathBuf::from)));
    let format = format_for(out.as_deref(), inv.format);
    if task == Task::Verify {
        if let Some(c) = &cfg {
            if let Some(t) = c.task.filter(|t| *t != Task::Verify) {
                return Err(Failure::schema(format!("config declares task {} but verify was requested", t.name())));
            }
        }
        let vc = cfg.as_ref().map(|c| c.verify.clone()).unwrap_or_else(VerifyConfig::default);
        let results = verify::run(&vc)?;
        print!("{}", verify::table(&results));
        if out.is_some() {
            let rows: Vec<Record> = results.iter().map(|s| s.record()).collect();
            emit::emit(&rows, format, out.as_deref())?;
        }
        if let Some(bad) = results.iter().find(|r| !r.passed()) {
            return Err(Failure::new(EXIT_NUMERICAL, "verify", format!("suite {} failed: error {:e} >= {:e}", bad.name, bad.max_error, bad.tolerance)));
        }
        return Ok(());
    }
    let rows = compute(task, cfg.as_ref().unwrap())?;
    emit::emit(&rows, format, out.as_deref())
}

/// Runs a task and returns the process exit code. Failures print one JSON
/// record on stderr; wall time goes to stderr only, so result files stay
/// byte-identical across reruns.
pub fn run(task: Task, inv: &Invocation) -> i32 {
    let start = Instant::now();
    let result = match inv.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run_inner(task, inv)),
            Err(e) => Err(Failure::new(failure::EXIT_RESOURCE, "cli", format!("cannot start {n} threads: {e}"))),
        },
        None => run_inner(task, inv),
    };
    let code = match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code
        }
    };
    if !quiet() {
        eprintln!("{}: wall time {:.3} s", task.name(), start.elapsed().as_secs_f64());
    }
    code
}
