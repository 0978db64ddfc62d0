use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{EpisodeConfig, Method};
use super::episode::{BlockRecord, Episode, Phase};
use crate::error::{Error, Result};
use crate::nn::{read_checkpoint, write_checkpoint};

const CHECKPOINT_KIND: &str = "episode";
const TRAIN_WINDOW: usize = 50;
const FINAL_WINDOW: usize = 100;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the configured method list.
    pub methods: Option<Vec<Method>>,
    /// Writes a checkpoint after every N completed blocks (0 disables).
    pub checkpoint_every: usize,
    /// Continues from a checkpoint instead of starting fresh.
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub infer_angle: f64,
    pub infer_dist: f64,
    pub final_angle: f64,
    pub final_dist: f64,
    pub train_angle: f64,
    pub train_dist: f64,
    pub infer_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub blocks: usize,
    pub truth_audit: u64,
    pub methods: Vec<MethodSummary>,
}

impl EpisodeSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn from_records(seed: u64, records: &[BlockRecord], methods: &[Method], truth_audit: u64) -> Self {
        let mean = |rows: &[(f64, f64)]| -> (f64, f64) {
            if rows.is_empty() {
                return (f64::NAN, f64::NAN);
            }
            let n = rows.len() as f64;
            (rows.iter().map(|r| r.0).sum::<f64>() / n, rows.iter().map(|r| r.1).sum::<f64>() / n)
        };
        let summaries = methods
            .iter()
            .map(|&m| {
                let rows = |phase: Phase| -> Vec<(f64, f64)> {
                    records
                        .iter()
                        .filter(|r| r.phase == phase)
                        .filter_map(|r| r.method(m).map(|x| (x.angle_rsse, x.dist_rsse)))
                        .collect()
                };
                let infer = rows(Phase::Infer);
                let train = rows(Phase::Train);
                let (infer_angle, infer_dist) = mean(&infer);
                let (final_angle, final_dist) = mean(&infer[infer.len().saturating_sub(FINAL_WINDOW)..]);
                let (train_angle, train_dist) = mean(&train[..train.len().min(TRAIN_WINDOW)]);
                MethodSummary {
                    method: m,
                    infer_angle,
                    infer_dist,
                    final_angle,
                    final_dist,
                    train_angle,
                    train_dist,
                    infer_blocks: infer.len(),
                }
            })
            .collect();
        Self {
            seed,
            blocks: records.len(),
            truth_audit,
            methods: summaries,
        }
    }
}

/// Text outputs, rewritten on resume so rows from blocks after the
/// checkpoint are dropped before new rows are appended.
struct Outputs {
    metrics: BufWriter<fs::File>,
    estimates: BufWriter<fs::File>,
    blocks: BufWriter<fs::File>,
}

const METRICS_HEADER: &str = "block,phase,method,angle_rsse,dist_rsse";
const ESTIMATES_HEADER: &str = "block,method,q,theta_hat,d_hat";

fn leading_block(line: &str) -> Option<usize> {
    line.split(',').next()?.parse().ok()
}

fn keep_rows(path: &Path, header: &str, next_block: usize) -> Result<String> {
    let mut out = format!("{header}\n");
    if let Ok(text) = fs::read_to_string(path) {
        for line in text.lines().skip(1) {
            if leading_block(line).is_some_and(|b| b < next_block) {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

impl Outputs {
    fn open(dir: &Path, next_block: usize) -> Result<(Self, Vec<BlockRecord>)> {
        let metrics = keep_rows(&dir.join("metrics.csv"), METRICS_HEADER, next_block)?;
        let estimates = keep_rows(&dir.join("estimates.csv"), ESTIMATES_HEADER, next_block)?;
        let mut kept = Vec::new();
        let mut blocks = String::new();
        if next_block > 1 {
            if let Ok(text) = fs::read_to_string(dir.join("blocks.jsonl")) {
                for line in text.lines() {
                    let rec: BlockRecord = serde_json::from_str(line)?;
                    if rec.block < next_block {
                        blocks.push_str(line);
                        blocks.push('\n');
                        kept.push(rec);
                    }
                }
            }
        }
        let start = |name: &str, content: &str| -> Result<BufWriter<fs::File>> {
            let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
            w.write_all(content.as_bytes())?;
            Ok(w)
        };
        Ok((
            Self {
                metrics: start("metrics.csv", &metrics)?,
                estimates: start("estimates.csv", &estimates)?,
                blocks: start("blocks.jsonl", &blocks)?,
            },
            kept,
        ))
    }

    fn write(&mut self, rec: &BlockRecord) -> Result<()> {
        for m in &rec.methods {
            writeln!(
                self.metrics,
                "{},{},{},{},{}",
                rec.block,
                rec.phase.name(),
                m.method,
                m.angle_rsse,
                m.dist_rsse
            )?;
            for (q, (t, d)) in m.estimates.iter().enumerate() {
                writeln!(self.estimates, "{},{},{},{},{}", rec.block, m.method, q, t, d)?;
            }
        }
        serde_json::to_writer(&mut self.blocks, rec)?;
        self.blocks.write_all(b"\n")?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.metrics.flush()?;
        self.estimates.flush()?;
        self.blocks.flush()?;
        Ok(())
    }
}

pub fn checkpoint_path(out_dir: &Path, block: usize) -> PathBuf {
    out_dir.join("checkpoints").join(format!("block_{block:05}.ckpt"))
}

/// Runs a full episode, writing metrics, block records, estimates and a
/// manifest to `out_dir`. On failure the manifest records the error and
/// the summary of the blocks that did complete.
pub fn run_episode(config: EpisodeConfig, seed: u64, out_dir: &Path, opts: &RunOptions) -> Result<EpisodeSummary> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut config = config;
    if let Some(m) = &opts.methods {
        config.methods = m.clone();
    }
    config.validate()?;
    let mut episode = match &opts.resume {
        Some(path) => {
            let ep: Episode = read_checkpoint(path, CHECKPOINT_KIND)?;
            if ep.seed != seed || serde_json::to_value(&ep.config)? != serde_json::to_value(&config)? {
                return Err(Error::Checkpoint("checkpoint was written for a different config or seed".into()));
            }
            ep
        }
        None => Episode::new(config.clone(), seed)?,
    };
    let (mut outputs, mut records) = Outputs::open(out_dir, episode.block)?;

    let mut failure = None;
    while !episode.finished() {
        match episode.step() {
            Ok(rec) => {
                outputs.write(&rec)?;
                records.push(rec);
                let done = episode.block - 1;
                if opts.checkpoint_every > 0 && done % opts.checkpoint_every == 0 {
                    outputs.flush()?;
                    write_checkpoint(&checkpoint_path(out_dir, done), CHECKPOINT_KIND, &episode)?;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    outputs.flush()?;

    let summary = EpisodeSummary::from_records(seed, &records, &config.methods, episode.truth_audit);
    let noise = episode.kalman_noise();
    let manifest = json!({
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
        "status": if failure.is_some() { "error" } else { "ok" },
        "error": failure.as_ref().map(|e| e.to_string()),
        "blocks_completed": records.len(),
        "resumed_from": opts.resume.as_ref().map(|p| p.display().to_string()),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "truth_audit": episode.truth_audit,
        "kf_process_noise": { "angle": noise.angle, "range": noise.range },
        "summary": summary,
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}
