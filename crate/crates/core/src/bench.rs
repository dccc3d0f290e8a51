//! Wall-clock measurement of the walk stage per start-point density.
//!
//! Each cell of the grid (image x k-spec x mu x rule) times `run_batch`
//! alone: start selection, image loading and feature post-processing stay
//! outside the clock. One warm-up run per cell is discarded and the
//! remaining repetitions are recorded individually; aggregation reports the
//! median, which shrugs off scheduler noise. The walk stage runs on one
//! thread unless a worker count is requested, so measured speedups reflect
//! work reduction rather than scheduling.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::image::GrayImage;
use crate::sampling::{select_starts, KSpec};
use crate::walk::{run_batch, run_batch_parallel, Rule, WalkConfig};
use crate::{Error, Result};

/// One timed repetition of one grid cell.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    pub image: String,
    pub k_spec: String,
    /// Percentage of pixels kept as start points on this image.
    pub kept_pct: f64,
    pub mu: usize,
    pub rule: Rule,
    /// Repetition index, 1-based.
    pub rep: usize,
    pub wall_time_ms: f64,
    /// Start points walked; equals the selection size.
    pub walks: usize,
}

/// All records of a grid run plus the conditions they were measured under.
#[derive(Clone, Debug, Serialize)]
pub struct BenchSuite {
    pub records: Vec<BenchRecord>,
    pub repetitions: usize,
    pub environment: String,
}

/// Median wall time of one `(k_spec, mu)` group across images, rules and
/// repetitions.
#[derive(Clone, Debug, Serialize)]
pub struct AggregateRow {
    pub k_spec: String,
    pub kept_pct: f64,
    pub mu: usize,
    pub median_ms: f64,
}

impl BenchSuite {
    /// Groups records by `(k_spec, mu)` in grid order; one row per group.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut keys: Vec<(String, usize)> = Vec::new();
        for r in &self.records {
            let key = (r.k_spec.clone(), r.mu);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.iter()
            .map(|(spec, mu)| {
                let group: Vec<&BenchRecord> = self
                    .records
                    .iter()
                    .filter(|r| &r.k_spec == spec && r.mu == *mu)
                    .collect();
                let times: Vec<f64> = group.iter().map(|r| r.wall_time_ms).collect();
                let kept = group.iter().map(|r| r.kept_pct).sum::<f64>() / group.len() as f64;
                AggregateRow {
                    k_spec: spec.clone(),
                    kept_pct: kept,
                    mu: *mu,
                    median_ms: median(times),
                }
            })
            .collect()
    }
}

pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn environment_note(threads: usize, repetitions: usize) -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|text| {
            text.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_string())
        })
        .unwrap_or_else(|| format!("{}/{}", std::env::consts::OS, std::env::consts::ARCH));
    format!("cpu={cpu}; walk_threads={threads}; repetitions={repetitions}; warmup=1")
}

/// Times `run_batch` for every (image, spec, mu, rule) cell.
///
/// `threads <= 1` keeps the timed region single-threaded; larger values run
/// the walk stage on a dedicated pool of that size and record it in the
/// environment note.
pub fn run_bench(
    images: &[(String, GrayImage)],
    specs: &[KSpec],
    mu_list: &[usize],
    rules: &[Rule],
    repetitions: usize,
    threads: usize,
) -> Result<BenchSuite> {
    if images.is_empty() || specs.is_empty() || mu_list.is_empty() || rules.is_empty() {
        return Err(Error::Invalid(
            "benchmark needs at least one image, spec, mu and rule".into(),
        ));
    }
    if repetitions < 3 {
        return Err(Error::Invalid(format!(
            "benchmark repetitions must be >= 3, got {repetitions}"
        )));
    }
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut records = Vec::new();
    for (name, image) in images {
        for spec in specs {
            let starts = select_starts(image, spec);
            let kept_pct = 100.0 * starts.len() as f64 / starts.image_pixels() as f64;
            for &mu in mu_list {
                for &rule in rules {
                    let config = WalkConfig::new(mu, rule);
                    let timed_run = || -> Result<f64> {
                        let begin = Instant::now();
                        match &pool {
                            Some(p) => {
                                p.install(|| run_batch_parallel(image, &starts, &config))?
                            }
                            None => run_batch(image, &starts, &config)?,
                        };
                        Ok(begin.elapsed().as_secs_f64() * 1000.0)
                    };
                    timed_run()?; // warm-up, discarded
                    for rep in 1..=repetitions {
                        let wall_time_ms = timed_run()?;
                        records.push(BenchRecord {
                            image: name.clone(),
                            k_spec: spec.to_string(),
                            kept_pct,
                            mu,
                            rule,
                            rep,
                            wall_time_ms,
                            walks: starts.len(),
                        });
                    }
                }
            }
        }
    }
    Ok(BenchSuite {
        records,
        repetitions,
        environment: environment_note(threads.max(1), repetitions),
    })
}

const RECORD_HEADER: &str = "image,k_spec,kept_pct,mu,rule,rep,wall_time_ms,walks";

/// Writes the per-repetition CSV and the `(k_spec, mu)` aggregate CSV.
/// Numeric fields use the shortest round-trip float form, so parsing the
/// file recovers the exact values.
pub fn emit_report(suite: &BenchSuite, records_path: &Path, aggregate_path: &Path) -> Result<()> {
    let mut buf = String::from(RECORD_HEADER);
    buf.push('\n');
    for r in &suite.records {
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.image, r.k_spec, r.kept_pct, r.mu, r.rule, r.rep, r.wall_time_ms, r.walks
        ));
    }
    std::fs::write(records_path, buf).map_err(|e| Error::io(records_path, e))?;

    let mut buf = String::from("k_spec,kept_pct,mu,median_ms\n");
    for row in suite.aggregate() {
        buf.push_str(&format!(
            "{},{},{},{}\n",
            row.k_spec, row.kept_pct, row.mu, row.median_ms
        ));
    }
    std::fs::write(aggregate_path, buf).map_err(|e| Error::io(aggregate_path, e))
}

/// Same content as the CSVs, as one JSON document.
pub fn emit_json(suite: &BenchSuite, path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Payload<'a> {
        #[serde(flatten)]
        suite: &'a BenchSuite,
        aggregate: Vec<AggregateRow>,
    }
    let payload = Payload {
        suite,
        aggregate: suite.aggregate(),
    };
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, &payload)
        .map_err(|e| Error::Internal(format!("serialize bench json: {e}")))?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Parses a per-repetition CSV written by [`emit_report`].
pub fn parse_report(path: &Path) -> Result<Vec<BenchRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |line: usize, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RECORD_HEADER => {}
        _ => return Err(csv_err(1, format!("expected header '{RECORD_HEADER}'"))),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        // k_spec itself may contain commas ("2,3"): field count tells us how
        // many it swallowed.
        if f.len() < 8 {
            return Err(csv_err(lineno, format!("expected 8 fields, found {}", f.len())));
        }
        let spec_extra = f.len() - 8;
        let k_spec = f[1..=1 + spec_extra].join(",");
        let rest = &f[1 + spec_extra + 1..];
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| csv_err(lineno, format!("bad number '{s}'")))
        };
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| csv_err(lineno, format!("bad integer '{s}'")))
        };
        records.push(BenchRecord {
            image: f[0].to_string(),
            k_spec,
            kept_pct: parse_f64(rest[0])?,
            mu: parse_usize(rest[1])?,
            rule: rest[2].parse()?,
            rep: parse_usize(rest[3])?,
            wall_time_ms: parse_f64(rest[4])?,
            walks: parse_usize(rest[5])?,
        });
    }
    Ok(records)
}
