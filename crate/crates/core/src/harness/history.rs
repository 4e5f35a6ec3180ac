//! Line-delimited JSON history files, one record per round.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::optimizer::{IterationRecord, RunHistory};

pub fn to_jsonl(history: &RunHistory) -> String {
    let mut out = String::new();
    for r in &history.records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl<R: BufRead>(reader: R) -> Result<RunHistory, String> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: IterationRecord = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        records.push(rec);
    }
    Ok(RunHistory { records })
}

pub fn write_history(path: &Path, history: &RunHistory) -> std::io::Result<Vec<u8>> {
    let bytes = to_jsonl(history).into_bytes();
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(bytes)
}

pub fn read_history(path: &Path) -> Result<RunHistory, String> {
    let f = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    from_jsonl(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Abort;
    use proptest::prelude::*;

    fn record() -> impl Strategy<Value = IterationRecord> {
        (
            0usize..50,
            prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 2), -1e9f64..1e9), 0..4),
            prop::option::of(-1e9f64..1e9),
            0usize..20,
            any::<u32>(),
            prop::option::of("[a-z ]{0,12}"),
        )
            .prop_map(|(round, pv, best, eq_count, wall, abort)| IterationRecord {
                round,
                points: pv.iter().map(|(p, _)| p.clone()).collect(),
                values: pv.iter().map(|(_, v)| *v).collect(),
                best_so_far: best,
                eq_count,
                wall_ms: wall as u64,
                abort: abort.map(|message| Abort {
                    point: vec![0.5, f64::MIN_POSITIVE],
                    message,
                }),
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trips(records in prop::collection::vec(record(), 0..6)) {
            let h = RunHistory { records };
            let text = to_jsonl(&h);
            prop_assert_eq!(from_jsonl(text.as_bytes()).unwrap(), h);
        }
    }

    #[test]
    fn corrupt_line_reports_position() {
        let err = from_jsonl("{\"round\": 0}\n".as_bytes()).unwrap_err();
        assert!(err.starts_with("line 1"));
    }
}
