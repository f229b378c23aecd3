//! Monte-Carlo localization benchmark on simulated forests.
//!
//! Each site is a random vehicle pose in the stand. The vehicle drives a
//! short straight path, the first `frames` scans are aggregated into a local
//! map and the local map is localized against the full ground-truth forest.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::angle_diff;
use crate::graph::DTGraph;
use crate::matching::{localize, MapIndex};
use crate::pipeline::PipelineParams;
use crate::sim::{
    aggregate_scans_with_jitter, generate_forest, random_site_pose, simulate_scan, straight_path, Forest, ForestSpec, PoseJitter, ScannerSpec,
    SimulatedScan,
};
use crate::trunk::extract_trunk_map;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    /// Ascending frame counts to aggregate per site.
    pub frames_list: Vec<usize>,
    pub sites: usize,
    pub forest: ForestSpec,
    pub scanner: ScannerSpec,
    /// Distance driven between consecutive frames, metres.
    pub frame_spacing: f64,
    /// Sites keep at least this distance from the stand border.
    pub site_margin: f64,
    pub jitter: PoseJitter,
    pub params: PipelineParams,
    pub max_translation_error: f64,
    pub max_rotation_error_deg: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            frames_list: vec![1, 3, 5, 10],
            sites: 100,
            forest: ForestSpec {
                area: (200.0, 200.0),
                ..ForestSpec::default()
            },
            scanner: ScannerSpec::default(),
            frame_spacing: 1.0,
            site_margin: 40.0,
            jitter: PoseJitter::default(),
            params: PipelineParams::default(),
            max_translation_error: 0.5,
            max_rotation_error_deg: 2.23,
            seed: 0,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_list.is_empty() || self.frames_list.contains(&0) {
            return Err(Error::InvalidParams("frames list must be non-empty and positive".into()));
        }
        if self.frames_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("frames list must be strictly ascending".into()));
        }
        if self.sites == 0 {
            return Err(Error::InvalidParams("at least one site is required".into()));
        }
        if 2.0 * self.site_margin >= self.forest.area.0.min(self.forest.area.1) {
            return Err(Error::InvalidParams("site margin leaves no room for sites".into()));
        }
        self.forest.validate()?;
        self.scanner.validate()?;
        self.params.extraction.validate()?;
        self.params.matching.validate()
    }
}

/// One site evaluated with one frame count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteOutcome {
    pub frames: usize,
    pub site_id: usize,
    pub trunks: usize,
    pub matched_triangles: usize,
    pub success: bool,
    pub translation_error: Option<f64>,
    pub rotation_error_deg: Option<f64>,
    /// `ok` or the failure message.
    pub status: String,
    #[serde(skip)]
    pub t_localmap: f64,
    #[serde(skip)]
    pub t_match: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub frames: usize,
    pub sites: usize,
    pub avg_trunks: f64,
    pub avg_matched_triangles: f64,
    pub success_rate: f64,
    /// Error statistics over successful sites.
    pub trans_err_mean: f64,
    pub trans_err_std: f64,
    pub rot_err_mean: f64,
    pub rot_err_max: f64,
    #[serde(skip)]
    pub t_localmap: f64,
    #[serde(skip)]
    pub t_match: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    /// Ordered by frame count, then site.
    pub details: Vec<SiteOutcome>,
}

fn site_scans(forest: &Forest, config: &BenchmarkConfig, site: usize, frames: usize) -> Result<Vec<SimulatedScan>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x5173_u64 << 32) ^ site as u64);
    let start = random_site_pose(forest, config.site_margin, frames, config.frame_spacing, &mut rng)?;
    straight_path(&start, frames, config.frame_spacing)
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let seed = config.seed.wrapping_mul(1_000_003).wrapping_add((site * 64 + k) as u64);
            simulate_scan(forest, p, &config.scanner, seed)
        })
        .collect()
}

fn evaluate(forest: &Forest, map: &MapIndex, config: &BenchmarkConfig, site: usize) -> Result<Vec<SiteOutcome>> {
    let max_frames = *config.frames_list.last().expect("validated");
    let scans = site_scans(forest, config, site, max_frames)?;
    let truth = scans[0].true_pose;
    let mut out = Vec::with_capacity(config.frames_list.len());
    for &frames in &config.frames_list {
        let clock = Instant::now();
        let cloud = aggregate_scans_with_jitter(&scans[..frames], config.jitter, config.seed ^ site as u64)?;
        let trunks = extract_trunk_map(&cloud, &config.params.extraction);
        let trunk_count = trunks.as_ref().map_or(0, |t| t.len());
        let graph = trunks.and_then(|t| DTGraph::triangulate(&t));
        let t_localmap = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let result = graph.and_then(|g| localize(&g, map, &config.params.matching, None));
        let t_match = clock.elapsed().as_secs_f64();

        let mut o = SiteOutcome {
            frames,
            site_id: site,
            trunks: trunk_count,
            matched_triangles: 0,
            success: false,
            translation_error: None,
            rotation_error_deg: None,
            status: "ok".into(),
            t_localmap,
            t_match,
        };
        match result {
            Ok(r) => {
                let te = r.pose.t.distance(&truth.t);
                let re = angle_diff(r.pose.theta, truth.theta).abs().to_degrees();
                o.matched_triangles = r.match_count();
                o.translation_error = Some(te);
                o.rotation_error_deg = Some(re);
                o.success = te < config.max_translation_error && re < config.max_rotation_error_deg;
                if !o.success {
                    o.status = "wrong pose".into();
                }
            }
            Err(e) => o.status = e.to_string(),
        }
        out.push(o);
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn summarize(frames: usize, outcomes: &[&SiteOutcome]) -> BenchmarkRow {
    let n = outcomes.len();
    let ok: Vec<&&SiteOutcome> = outcomes.iter().filter(|o| o.success).collect();
    let te: Vec<f64> = ok.iter().filter_map(|o| o.translation_error).collect();
    let re: Vec<f64> = ok.iter().filter_map(|o| o.rotation_error_deg).collect();
    let te_mean = mean(&te);
    let te_std = if te.len() > 1 {
        (te.iter().map(|e| (e - te_mean).powi(2)).sum::<f64>() / (te.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    BenchmarkRow {
        frames,
        sites: n,
        avg_trunks: mean(&outcomes.iter().map(|o| o.trunks as f64).collect::<Vec<_>>()),
        avg_matched_triangles: mean(&outcomes.iter().map(|o| o.matched_triangles as f64).collect::<Vec<_>>()),
        success_rate: ok.len() as f64 / n.max(1) as f64,
        trans_err_mean: te_mean,
        trans_err_std: te_std,
        rot_err_mean: mean(&re),
        rot_err_max: re.iter().copied().fold(0.0, f64::max),
        t_localmap: mean(&outcomes.iter().map(|o| o.t_localmap).collect::<Vec<_>>()),
        t_match: mean(&outcomes.iter().map(|o| o.t_match).collect::<Vec<_>>()),
    }
}

/// Runs every site for every frame count. Sites run in parallel; results
/// do not depend on scheduling.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let forest = generate_forest(&config.forest)?;
    let map = MapIndex::new(DTGraph::triangulate(&forest.trunks)?);

    // Warm-up run, excluded from the timings.
    evaluate(&forest, &map, config, 0)?;

    let per_site: Vec<Vec<SiteOutcome>> = (0..config.sites)
        .into_par_iter()
        .map(|site| evaluate(&forest, &map, config, site))
        .collect::<Result<_>>()?;

    let mut details = Vec::with_capacity(config.sites * config.frames_list.len());
    for (fi, _) in config.frames_list.iter().enumerate() {
        details.extend(per_site.iter().map(|s| s[fi].clone()));
    }
    let rows = config
        .frames_list
        .iter()
        .map(|&f| {
            let group: Vec<&SiteOutcome> = details.iter().filter(|o| o.frames == f).collect();
            summarize(f, &group)
        })
        .collect();
    Ok(BenchmarkReport { rows, details })
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Summary rows without timings; identical across runs with equal config.
pub fn write_results<W: Write>(writer: W, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "frames",
        "sites",
        "avg_trunks",
        "avg_matched_triangles",
        "success_rate",
        "trans_err_mean",
        "trans_err_std",
        "rot_err_mean",
        "rot_err_max",
    ])?;
    for r in rows {
        w.write_record([
            r.frames.to_string(),
            r.sites.to_string(),
            fmt(r.avg_trunks),
            fmt(r.avg_matched_triangles),
            fmt(r.success_rate),
            fmt(r.trans_err_mean),
            fmt(r.trans_err_std),
            fmt(r.rot_err_mean),
            fmt(r.rot_err_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings<W: Write>(writer: W, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["frames", "t_localmap", "t_match"])?;
    for r in rows {
        w.write_record([r.frames.to_string(), fmt(r.t_localmap), fmt(r.t_match)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_details<W: Write>(writer: W, details: &[SiteOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "frames",
        "site_id",
        "trunks",
        "matched_triangles",
        "success",
        "trans_err",
        "rot_err_deg",
        "status",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for d in details {
        w.write_record([
            d.frames.to_string(),
            d.site_id.to_string(),
            d.trunks.to_string(),
            d.matched_triangles.to_string(),
            d.success.to_string(),
            opt(d.translation_error),
            opt(d.rotation_error_deg),
            d.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `detail.csv` and `timings.csv` into `dir`.
pub fn write_report(dir: &Path, report: &BenchmarkReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_results(std::fs::File::create(dir.join("results.csv"))?, &report.rows)?;
    write_details(std::fs::File::create(dir.join("detail.csv"))?, &report.details)?;
    write_timings(std::fs::File::create(dir.join("timings.csv"))?, &report.rows)?;
    Ok(())
}
