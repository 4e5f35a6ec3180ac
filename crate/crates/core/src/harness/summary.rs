//! `abo summarize`: tables and best-so-far curves computed from the files in
//! an output directory.

use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{sha256_hex, Manifest};
use super::history::from_jsonl;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CURVES_FILE: &str = "curves.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub final_best: Option<f64>,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub method: String,
    pub round: usize,
    pub median_best: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub median_final: f64,
    pub q25_final: f64,
    pub q75_final: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    pub runs: Vec<RunSummary>,
    pub curves: Vec<CurvePoint>,
    pub methods: Vec<MethodSummary>,
    /// Missing or corrupt history files that were skipped.
    pub problems: Vec<String>,
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quartiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75))
}

/// Builds the summary from `manifest.json` and the history files it lists.
/// Errors only if the manifest itself cannot be read.
pub fn summarize(dir: &Path) -> Result<SummaryTable, String> {
    let manifest = Manifest::load(dir)?;
    let mut table = SummaryTable::default();
    // per method label: per-run best-so-far indexed by round
    let mut per_method: Vec<(String, Vec<Vec<Option<f64>>>)> = Vec::new();
    for entry in &manifest.runs {
        let path = dir.join(&entry.file);
        let history = std::fs::read(&path)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|bytes| {
                if sha256_hex(&bytes) != entry.sha256 {
                    return Err(format!("{}: checksum mismatch", path.display()));
                }
                from_jsonl(bytes.as_slice()).map_err(|e| format!("{}: {e}", path.display()))
            });
        let history = match history {
            Ok(h) => h,
            Err(e) => {
                log::error!("skipping {e}");
                table.problems.push(e);
                continue;
            }
        };
        table.runs.push(RunSummary {
            method: entry.label.clone(),
            seed: entry.seed,
            final_best: history.best_so_far(),
            evals: history.evaluations(),
        });
        let rounds = history.records.iter().map(|r| r.round + 1).max().unwrap_or(0);
        let mut curve = vec![None; rounds];
        for r in &history.records {
            curve[r.round] = r.best_so_far;
        }
        match per_method.iter_mut().find(|(l, _)| *l == entry.label) {
            Some((_, runs)) => runs.push(curve),
            None => per_method.push((entry.label.clone(), vec![curve])),
        }
    }

    for (label, runs) in &per_method {
        let finals: Vec<f64> = runs.iter().filter_map(|c| c.last().copied().flatten()).collect();
        if !finals.is_empty() {
            let (q25, med, q75) = quartiles(finals.clone());
            table.methods.push(MethodSummary {
                method: label.clone(),
                runs: finals.len(),
                median_final: med,
                q25_final: q25,
                q75_final: q75,
            });
        }
        let max_rounds = runs.iter().map(Vec::len).max().unwrap_or(0);
        for round in 0..max_rounds {
            // runs that ended early contribute their last best
            let at: Vec<f64> = runs
                .iter()
                .filter_map(|c| c.get(round.min(c.len().saturating_sub(1))).copied().flatten())
                .collect();
            if at.is_empty() {
                continue;
            }
            let (q25, med, q75) = quartiles(at);
            table.curves.push(CurvePoint {
                method: label.clone(),
                round,
                median_best: med,
                q25,
                q75,
            });
        }
    }
    Ok(table)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(table: &SummaryTable) -> String {
    let mut s = String::from("method,seed,final_best,evals\n");
    for r in &table.runs {
        let _ = writeln!(s, "{},{},{},{}", r.method, r.seed, opt(r.final_best), r.evals);
    }
    s
}

pub fn curves_csv(table: &SummaryTable) -> String {
    let mut s = String::from("method,round,median_best,q25,q75\n");
    for c in &table.curves {
        let _ = writeln!(s, "{},{},{},{},{}", c.method, c.round, c.median_best, c.q25, c.q75);
    }
    s
}

pub fn write_csvs(dir: &Path, table: &SummaryTable) -> std::io::Result<()> {
    std::fs::write(dir.join(SUMMARY_FILE), summary_csv(table))?;
    std::fs::write(dir.join(CURVES_FILE), curves_csv(table))
}

/// Human-readable per-method table.
pub fn method_table(table: &SummaryTable) -> String {
    let mut s = format!("{:<24} {:>5} {:>14} {:>14} {:>14}\n", "method", "runs", "median", "q25", "q75");
    for m in &table.methods {
        let _ = writeln!(
            s,
            "{:<24} {:>5} {:>14.6} {:>14.6} {:>14.6}",
            m.method, m.runs, m.median_final, m.q25_final, m.q75_final
        );
    }
    s
}
