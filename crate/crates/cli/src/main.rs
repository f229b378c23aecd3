use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use forestloc::bench::{run_benchmark, write_report, BenchmarkConfig};
use forestloc::io;
use forestloc::matching::ResidualNorm;
use forestloc::sim::{aggregate_scans, generate_forest, random_site_pose, simulate_scan, straight_path, ForestSpec, ScannerSpec};
use forestloc::{extract_trunk_map, localize, DTGraph, Error, MapIndex, MatchParams, Point2, RigidTransform2D, TrunkExtractionParams, TrunkMap};

#[derive(Parser)]
#[command(name = "forestloc", version, about = "Tree-trunk based global localization")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress non-error output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract trunk landmarks from an `.xyz` point cloud.
    Extract {
        input: PathBuf,
        #[arg(short, long, default_value = "trunks.csv")]
        out: PathBuf,
        #[command(flatten)]
        extraction: ExtractionArgs,
    },
    /// Delaunay-triangulate a trunk CSV into a graph JSON.
    Triangulate {
        input: PathBuf,
        #[arg(short, long, default_value = "graph.json")]
        out: PathBuf,
    },
    /// Localize a local map (cloud, trunks or graph) in a global map.
    Localize {
        #[arg(long)]
        local: PathBuf,
        #[arg(long)]
        map: PathBuf,
        /// Pose hint `x,y,theta_deg`; only changes candidate order.
        #[arg(long, value_parser = parse_pose)]
        initial: Option<RigidTransform2D>,
        #[command(flatten)]
        extraction: ExtractionArgs,
        #[command(flatten)]
        matching: MatchArgs,
    },
    /// Generate a forest and simulated, aggregated scans per site.
    Simulate {
        #[command(flatten)]
        forest: ForestArgs,
        /// Site start poses (`site_id,x,y,theta_deg`); random when absent.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        sites: usize,
        #[arg(long, default_value_t = 10)]
        frames_per_site: usize,
        #[arg(long, default_value_t = 1.0)]
        frame_spacing: f64,
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
        #[arg(short, long, default_value = "sim")]
        out: PathBuf,
    },
    /// Monte-Carlo localization benchmark over frame counts.
    Benchmark {
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long, default_value_t = 100)]
        sites: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        frames: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        frame_spacing: f64,
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
        /// Success threshold on translation error, metres.
        #[arg(long, default_value_t = 0.5)]
        max_translation_error: f64,
        /// Success threshold on rotation error, degrees.
        #[arg(long, default_value_t = 2.23)]
        max_rotation_error: f64,
        #[arg(short, long, default_value = "bench")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExtractionArgs {
    #[arg(long, default_value_t = 2.0)]
    probe_height: f64,
    #[arg(long, default_value_t = 0.2)]
    probe_radius: f64,
    #[arg(long, default_value_t = 0.5)]
    cluster_tolerance: f64,
    #[arg(long, default_value_t = 30)]
    min_cluster_size: usize,
}

impl ExtractionArgs {
    fn params(&self) -> TrunkExtractionParams {
        TrunkExtractionParams {
            probe_height: self.probe_height,
            probe_radius: self.probe_radius,
            cluster_tolerance: self.cluster_tolerance,
            min_cluster_size: self.min_cluster_size,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Euclidean,
    Squared,
}

#[derive(Args)]
struct MatchArgs {
    /// Relative feature tolerance.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    #[arg(long, default_value_t = 1)]
    min_matches: usize,
    #[arg(long, value_enum, default_value_t = Norm::Euclidean)]
    norm: Norm,
}

impl MatchArgs {
    fn params(&self) -> MatchParams {
        MatchParams {
            feature_tolerance: self.tolerance,
            min_matches: self.min_matches,
            residual_norm: match self.norm {
                Norm::Euclidean => ResidualNorm::Euclidean,
                Norm::Squared => ResidualNorm::Squared,
            },
            ..MatchParams::default()
        }
    }
}

#[derive(Args)]
struct ForestArgs {
    /// Stand size `WIDTHxHEIGHT` in metres.
    #[arg(long, default_value = "200x200", value_parser = parse_area)]
    area: (f64, f64),
    /// Trees per hectare.
    #[arg(long, default_value_t = 500.0)]
    density: f64,
    #[arg(long, default_value_t = 2.5)]
    min_spacing: f64,
}

impl ForestArgs {
    fn spec(&self, seed: u64) -> ForestSpec {
        ForestSpec {
            area: self.area,
            density: self.density,
            min_spacing: self.min_spacing,
            seed,
            ..ForestSpec::default()
        }
    }
}

fn parse_area(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: f64 = w.trim().parse().map_err(|e| format!("{e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((w, h))
}

fn parse_pose(s: &str) -> Result<RigidTransform2D, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, th] => Ok(RigidTransform2D::new(th.to_radians(), Point2::new(x, y))),
        _ => Err("expected x,y,theta_deg".into()),
    }
}

struct Output {
    json: bool,
    quiet: bool,
}

impl Output {
    fn report(&self, text: impl FnOnce() -> String, value: serde_json::Value) {
        if self.json {
            println!("{value}");
        } else if !self.quiet {
            println!("{}", text());
        }
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Trunks from a cloud or trunk CSV, or a graph from JSON.
fn load_graph_like(path: &Path, extraction: &TrunkExtractionParams) -> anyhow::Result<DTGraph> {
    let graph = match extension(path).as_str() {
        "json" => io::load_graph(path)?,
        "csv" => DTGraph::triangulate(&io::load_trunks(path)?)?,
        "xyz" | "txt" => {
            let cloud = io::load_xyz(path)?;
            let trunks: TrunkMap = extract_trunk_map(&cloud, extraction)?;
            DTGraph::triangulate(&trunks)?
        }
        other => bail!("unsupported input type {other:?} for {}", path.display()),
    };
    Ok(graph)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out = Output {
        json: cli.json,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Extract { input, out: path, extraction } => {
            let cloud = io::load_xyz(&input).with_context(|| format!("reading {}", input.display()))?;
            let trunks = extract_trunk_map(&cloud, &extraction.params())?;
            io::save_trunks(&path, &trunks)?;
            out.report(
                || format!("{} trunks from {} points -> {}", trunks.len(), cloud.len(), path.display()),
                json!({"trunks": trunks.len(), "points": cloud.len(), "output": path}),
            );
        }
        Command::Triangulate { input, out: path } => {
            let trunks = io::load_trunks(&input).with_context(|| format!("reading {}", input.display()))?;
            let graph = DTGraph::triangulate(&trunks)?;
            io::save_graph(&path, &graph)?;
            out.report(
                || format!("{} vertices, {} triangles -> {}", graph.num_vertices(), graph.num_triangles(), path.display()),
                json!({"vertices": graph.num_vertices(), "triangles": graph.num_triangles(), "output": path}),
            );
        }
        Command::Localize {
            local,
            map,
            initial,
            extraction,
            matching,
        } => {
            let local = load_graph_like(&local, &extraction.params())?;
            let map = MapIndex::new(load_graph_like(&map, &extraction.params())?);
            let r = localize(&local, &map, &matching.params(), initial.as_ref())?;
            out.report(
                || {
                    format!(
                        "x {:.4} y {:.4} theta {:.4} deg  residual {:.6}  matches {}",
                        r.pose.t.x,
                        r.pose.t.y,
                        r.pose.heading_deg(),
                        r.residual,
                        r.match_count()
                    )
                },
                json!({
                    "x": r.pose.t.x,
                    "y": r.pose.t.y,
                    "theta_deg": r.pose.heading_deg(),
                    "residual": r.residual,
                    "matches": r.match_count(),
                    "rejected": r.rejected,
                    "candidates": r.candidate_count,
                }),
            );
        }
        Command::Simulate {
            forest,
            path,
            sites,
            frames_per_site,
            frame_spacing,
            noise,
            out: dir,
        } => {
            let forest = generate_forest(&forest.spec(cli.seed))?;
            let scanner = ScannerSpec {
                range_noise_sigma: noise,
                ..ScannerSpec::default()
            };
            let starts = match path {
                Some(p) => io::load_poses(&p)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    (0..sites)
                        .map(|s| Ok((s, random_site_pose(&forest, 30.0, frames_per_site, frame_spacing, &mut rng)?)))
                        .collect::<Result<_, Error>>()?
                }
            };
            std::fs::create_dir_all(&dir)?;
            io::save_trunks(&dir.join("trunks.csv"), &forest.trunks)?;
            for (site, start) in &starts {
                let scans = straight_path(start, frames_per_site, frame_spacing)
                    .iter()
                    .enumerate()
                    .map(|(k, p)| simulate_scan(&forest, p, &scanner, cli.seed ^ ((*site as u64) << 16) ^ k as u64))
                    .collect::<Result<Vec<_>, _>>()?;
                io::save_xyz(&dir.join(format!("site_{site:03}.xyz")), &aggregate_scans(&scans)?)?;
            }
            io::save_poses(&dir.join("poses.csv"), &starts)?;
            out.report(
                || format!("{} trees, {} sites -> {}", forest.len(), starts.len(), dir.display()),
                json!({"trees": forest.len(), "sites": starts.len(), "output": dir}),
            );
        }
        Command::Benchmark {
            forest,
            sites,
            frames,
            frame_spacing,
            noise,
            max_translation_error,
            max_rotation_error,
            out: dir,
        } => {
            let config = BenchmarkConfig {
                frames_list: frames,
                sites,
                forest: forest.spec(cli.seed),
                scanner: ScannerSpec {
                    range_noise_sigma: noise,
                    ..ScannerSpec::default()
                },
                frame_spacing,
                max_translation_error,
                max_rotation_error_deg: max_rotation_error,
                seed: cli.seed,
                ..BenchmarkConfig::default()
            };
            let report = run_benchmark(&config)?;
            write_report(&dir, &report)?;
            let rows: Vec<serde_json::Value> = report
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "frames": r.frames,
                        "avg_trunks": r.avg_trunks,
                        "avg_matched_triangles": r.avg_matched_triangles,
                        "success_rate": r.success_rate,
                        "trans_err_mean": r.trans_err_mean,
                        "rot_err_max": r.rot_err_max,
                    })
                })
                .collect();
            out.report(
                || {
                    let mut s = String::from("frames  trunks  matched  success");
                    for r in &report.rows {
                        s.push_str(&format!(
                            "\n{:>6}  {:>6.1}  {:>7.2}  {:>6.1}%",
                            r.frames,
                            r.avg_trunks,
                            r.avg_matched_triangles,
                            100.0 * r.success_rate
                        ));
                    }
                    s
                },
                json!({"rows": rows, "output": dir}),
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::root) {
        Some(Error::InsufficientMatches { .. }) => 2,
        Some(Error::NoOverlap) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if json {
                println!("{}", json!({"error": format!("{err:#}")}));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
