use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::episode::{run_episode, EpisodeReport};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub repeats: usize,
    /// Every repeat reuses the root seed instead of deriving its own.
    pub share_seed: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { repeats: 3, share_seed: false }
    }
}

/// Mean and sample standard deviation; std is 0 for fewer than two values.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One summary row per prompt, in the shape of the per-shape results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub prompt: String,
    pub episodes: usize,
    pub failed: usize,
    pub improved: usize,
    pub chamfer_initial_mean: f64,
    pub chamfer_final_mean: f64,
    pub chamfer_final_std: f64,
    pub emd_mean: f64,
    pub emd_std: f64,
    pub hd_mean: f64,
    pub hd_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    pub prompt: String,
    pub repeat: usize,
    pub seed: u64,
    pub dir: String,
    /// Error kind when the episode failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
    pub episodes: Vec<EpisodeEntry>,
}

fn slug(prompt: &str) -> String {
    prompt.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

fn summarize(prompt: &str, reports: &[Option<EpisodeReport>]) -> SuiteRow {
    let ok: Vec<&EpisodeReport> = reports.iter().flatten().collect();
    let col = |f: &dyn Fn(&EpisodeReport) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let (ci, _) = mean_std(&col(&|r| r.chamfer_initial));
    let (cf, cf_s) = mean_std(&col(&|r| r.chamfer_final));
    let (em, em_s) = mean_std(&col(&|r| r.final_distance.map(|d| d.emd)));
    let (hd, hd_s) = mean_std(&col(&|r| r.final_distance.map(|d| d.hd)));
    SuiteRow {
        prompt: prompt.to_string(),
        episodes: reports.len(),
        failed: reports.len() - ok.len(),
        improved: ok.iter().filter(|r| r.improved() == Some(true)).count(),
        chamfer_initial_mean: ci,
        chamfer_final_mean: cf,
        chamfer_final_std: cf_s,
        emd_mean: em,
        emd_std: em_s,
        hd_mean: hd,
        hd_std: hd_s,
    }
}

/// Runs `repeats` episodes per prompt under `out`, one directory each, and
/// writes `summary.csv` and `summary.json`. Failed episodes are counted, not
/// fatal.
pub fn run_suite(prompts: &[String], opts: SuiteOptions, base: &RunConfig, out: &Path) -> Result<SuiteSummary> {
    if prompts.is_empty() || opts.repeats == 0 {
        return Err(Error::Config("suite needs at least one prompt and one repeat".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let jobs: Vec<(usize, usize)> = (0..prompts.len()).flat_map(|p| (0..opts.repeats).map(move |r| (p, r))).collect();
    let results: Vec<(EpisodeEntry, Option<EpisodeReport>)> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let prompt = &prompts[p];
            let seed_ = if opts.share_seed {
                base.seed
            } else {
                seed::derive_indexed(base.seed, &format!("suite/{prompt}"), r as u64)
            };
            let dir = format!("{}/rep_{r:02}", slug(prompt));
            let cfg = RunConfig { prompt: prompt.clone(), seed: seed_, output_dir: out.join(&dir), ..base.clone() };
            let res = run_episode(&cfg);
            if let Err(e) = &res {
                log::warn!("episode {dir} failed: {e}");
            }
            let entry = EpisodeEntry {
                prompt: prompt.clone(),
                repeat: r,
                seed: seed_,
                dir,
                error: res.as_ref().err().map(|e| e.kind().to_string()),
            };
            (entry, res.ok())
        })
        .collect();

    let rows: Vec<SuiteRow> = prompts
        .iter()
        .enumerate()
        .map(|(p, prompt)| {
            let reports: Vec<Option<EpisodeReport>> =
                results.iter().zip(&jobs).filter(|(_, j)| j.0 == p).map(|(r, _)| r.1.clone()).collect();
            summarize(prompt, &reports)
        })
        .collect();
    let summary = SuiteSummary { rows, episodes: results.into_iter().map(|r| r.0).collect() };

    let csv_path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::Format { what: "csv", detail: e.to_string() })?;
    for row in &summary.rows {
        w.serialize(row).map_err(|e| Error::Format { what: "csv", detail: e.to_string() })?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = out.join("summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&json_path, e))?;
    Ok(summary)
}
