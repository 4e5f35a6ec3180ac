//! `abo run`: executes every (method, seed) pair of a config and writes the
//! history files plus `manifest.json`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::history::write_history;
use crate::optimizer::{run, Method, RunHistory};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SEED_OFFSET_VAR: &str = "ABO_SEED_OFFSET";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub method: Method,
    /// Seed after applying the offset; also used in the file name.
    pub seed: u64,
    pub file: String,
    pub sha256: String,
    pub evaluations: usize,
    pub final_best: Option<f64>,
    /// Set when the run stopped early; the history file holds the partial run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed_offset: u64,
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestEntry>,
    /// False if any run aborted.
    pub complete: bool,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub seed_offset: u64,
}

#[derive(Debug)]
pub enum ExperimentError {
    /// Outputs already exist and `force` was not set.
    Refused(Vec<PathBuf>),
    Io(String),
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentError::Refused(paths) => {
                write!(f, "refusing to overwrite existing outputs (use --force):")?;
                for p in paths {
                    write!(f, " {}", p.display())?;
                }
                Ok(())
            }
            ExperimentError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

/// Reads `ABO_SEED_OFFSET` (default 0).
pub fn seed_offset_from_env() -> Result<u64, String> {
    match std::env::var(SEED_OFFSET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| format!("{SEED_OFFSET_VAR}={v:?} is not a non-negative integer: {e}")),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(format!("{SEED_OFFSET_VAR}: {e}")),
    }
}

pub fn history_file_name(label: &str, seed: u64) -> String {
    format!("{label}_{seed}.jsonl")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Job<'a> {
    method: &'a super::config::MethodConfig,
    seed: u64,
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest, ExperimentError> {
    let dir = &config.output_dir;
    let jobs: Vec<Job> = config
        .methods
        .iter()
        .flat_map(|m| {
            config.seeds.iter().map(move |s| Job {
                method: m,
                seed: s.wrapping_add(opts.seed_offset),
            })
        })
        .collect();

    let mut targets: Vec<PathBuf> = jobs
        .iter()
        .map(|j| dir.join(history_file_name(&j.method.label, j.seed)))
        .collect();
    targets.push(dir.join(MANIFEST_FILE));
    if !opts.force {
        let existing: Vec<PathBuf> = targets.into_iter().filter(|p| p.exists()).collect();
        if !existing.is_empty() {
            return Err(ExperimentError::Refused(existing));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;

    let execute = || -> Vec<Result<ManifestEntry, ExperimentError>> {
        jobs.par_iter().map(|job| execute_job(job, dir, opts.seed_offset)).collect()
    };
    let results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::Io(e.to_string()))?
            .install(execute),
        None => execute(),
    };
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest {
        experiment: config.name.clone(),
        seed_offset: opts.seed_offset,
        config: config.clone(),
        complete: runs.iter().all(|r| r.aborted.is_none()),
        runs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

fn execute_job(job: &Job, dir: &Path, seed_offset: u64) -> Result<ManifestEntry, ExperimentError> {
    let m = job.method;
    let (history, failure) = match m
        .optimizer_config(job.seed)
        .and_then(|cfg| Ok((cfg, m.objective.build(seed_offset)?)))
    {
        Ok((cfg, mut objective)) => match run(&mut objective, &cfg) {
            Ok(h) => {
                let failure = h.aborted().map(|a| format!("{} at {:?}", a.message, a.point));
                (h, failure)
            }
            Err(e) => (RunHistory::default(), Some(e.to_string())),
        },
        Err(e) => (RunHistory::default(), Some(e.to_string())),
    };
    if let Some(f) = &failure {
        log::error!("{} seed {}: {f}", m.label, job.seed);
    }
    let file = history_file_name(&m.label, job.seed);
    let path = dir.join(&file);
    let bytes = write_history(&path, &history).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    log::info!("{}: {} evaluations", path.display(), history.evaluations());
    Ok(ManifestEntry {
        label: m.label.clone(),
        method: m.method,
        seed: job.seed,
        file,
        sha256: sha256_hex(&bytes),
        evaluations: history.evaluations(),
        final_best: history.best_so_far(),
        aborted: failure,
    })
}
