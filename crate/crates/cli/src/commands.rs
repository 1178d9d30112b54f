use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use mqfb::bench::{approximation_rows, default_arms, loglog_slope, max_relative_error, run_arm, BENCH_CSV_HEADER};
use mqfb::cloud::{synthetic_cloud, PointCloud};
use mqfb::io::write_vector_bin;
use mqfb::multires::{
    append_approximation_csv, decompose, linear_approximation_against, load_tree, reconstruct, save_tree, Arm,
    DecomposeOptions, DecompositionTree,
};
use mqfb::ply::{load_ply, save_ply, PlyFormat};
use mqfb::verify::{run_battery, BatteryOptions};
use serde::Serialize;

use crate::config::{BaselineArg, CommonArgs, RunConfig};
use crate::Failure;

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Random graphs in the battery.
    #[arg(long, default_value_t = 100)]
    pub graphs: usize,
    #[arg(long, default_value_t = 10)]
    pub n_min: usize,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    /// Random signals per graph for the round-trip and energy checks.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Pair the normalized Laplacian with Q = I on non-bipartite graphs.
    #[arg(long)]
    pub misuse: bool,
    /// Skip the bipartite special-case battery.
    #[arg(long)]
    pub no_bipartite: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Use a synthetic cloud with this many points instead of --input.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Scale by the null vector of the operator so constants give zero detail.
    #[arg(long)]
    pub zero_dc: bool,
    /// K for the bipartite arm; defaults to --k.
    #[arg(long)]
    pub baseline_k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fraction of coefficients kept, a power of two.
    #[arg(long, default_value_t = 1.0)]
    pub keep: f64,
    /// Original cloud; enables PSNR against it and a PLY output.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Synthetic cloud sizes, used when no --input is given.
    #[arg(long, num_args = 1.., default_values_t = [10_000usize])]
    pub synthetic: Vec<usize>,
    /// Synthetic frames per size.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    config: &'a RunConfig,
    result: T,
}

fn write_report<T: Serialize>(path: &Path, config: &RunConfig, result: T) -> Result<(), Failure> {
    let report = Report {
        version: mqfb::VERSION,
        config,
        result,
    };
    let text = serde_json::to_string_pretty(&report).map_err(mqfb::Error::from)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(mqfb::Error::from)?;
    }
    std::fs::write(path, text).map_err(mqfb::Error::from)?;
    Ok(())
}

fn require_out(common: &CommonArgs) -> Result<&Path, Failure> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Failure::Usage("--out is required".into()))
}

pub fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let c = &args.common;
    let spec = c.spec()?;
    let mut options = BatteryOptions::new(spec.clone(), args.graphs, c.seed);
    options.n_min = args.n_min;
    options.n_max = args.n_max;
    options.operator = c.operator.into();
    options.tolerance = c.tol;
    options.trials = args.trials;
    options.bipartite = !args.no_bipartite;
    options.misuse = args.misuse;
    if options.n_min < 2 || options.n_min > options.n_max {
        return Err(Failure::Usage("need 2 <= --n-min <= --n-max".into()));
    }
    let config = c
        .run_config("verify", &spec)
        .with("graphs", args.graphs)
        .with("n_min", args.n_min)
        .with("n_max", args.n_max)
        .with("trials", args.trials)
        .with("misuse", args.misuse)
        .with("bipartite", options.bipartite);

    let report = run_battery(&options)?;
    for r in &report.invariants {
        eprintln!(
            "{} {} ({} cases, worst {:e}, tolerance {:e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.worst,
            r.tolerance
        );
    }
    match &c.out {
        Some(path) => write_report(path, &config, &report)?,
        None => {
            let text = serde_json::to_string_pretty(&Report {
                version: mqfb::VERSION,
                config: &config,
                result: &report,
            })
            .map_err(mqfb::Error::from)?;
            println!("{text}");
        }
    }
    if report.passed {
        Ok(())
    } else {
        let names: Vec<_> = report.failing().map(|r| r.name.clone()).collect();
        Err(Failure::Validation(format!("failing invariants: {}", names.join(", "))))
    }
}

struct Frame {
    name: String,
    cloud: PointCloud,
}

fn load_frames(inputs: &[PathBuf]) -> Result<Vec<Frame>, Failure> {
    inputs
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map_or_else(|| "frame".into(), |s| s.to_string_lossy().into_owned());
            Ok(Frame {
                name,
                cloud: load_ply(p)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct ArmSummary {
    frame: String,
    arm: Arm,
    k: usize,
    n: usize,
    levels_completed: usize,
    early_stop: Option<String>,
    coefficients: usize,
    max_relative_error: f64,
    tree: PathBuf,
    seconds: f64,
}

fn family_label(args: &CommonArgs) -> String {
    if args.spec_file.is_some() {
        "custom".into()
    } else {
        serde_json::to_value(args.family)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    }
}

pub fn decompose_cmd(args: &DecomposeArgs) -> Result<(), Failure> {
    let c = &args.common;
    let out = require_out(c)?;
    let spec = c.spec()?;
    let frames = match (args.synthetic, c.input.is_empty()) {
        (Some(n), true) => vec![Frame {
            name: format!("synthetic-{n}"),
            cloud: synthetic_cloud(n, c.seed)?,
        }],
        (None, false) => load_frames(&c.input)?,
        _ => return Err(Failure::Usage("give either --input or --synthetic".into())),
    };
    let config = c
        .run_config("decompose", &spec)
        .with("synthetic", args.synthetic)
        .with("zero_dc", args.zero_dc)
        .with("baseline_k", args.baseline_k);
    let tolerance = config.tolerance;

    let mut base = DecomposeOptions::new(spec, c.k, c.levels, c.seed);
    base.operator = c.operator.into();
    base.zero_dc = args.zero_dc;
    let mut arms = vec![(Arm::Proposed, c.k, "approximation.csv")];
    if c.baseline == BaselineArg::Bipartite {
        arms.push((Arm::Bipartite, args.baseline_k.unwrap_or(c.k), "approximation_bipartite.csv"));
    }
    std::fs::create_dir_all(out).map_err(mqfb::Error::from)?;
    let family = family_label(c);

    let mut summaries = Vec::new();
    let mut worst = 0.0f64;
    for frame in &frames {
        for &(arm, k, csv) in &arms {
            let options = DecomposeOptions { arm, k, ..base.clone() };
            let t = Instant::now();
            let tree = decompose(&frame.cloud, &options)?;
            let back = reconstruct(&tree)?;
            let seconds = t.elapsed().as_secs_f64();
            let err = max_relative_error(&frame.cloud.attributes, &back);
            worst = worst.max(err / tree.levels.len().max(1) as f64);

            let dir = out.join(&frame.name).join(match arm {
                Arm::Proposed => "tree",
                Arm::Bipartite => "tree_bipartite",
            });
            save_tree(&tree, &dir)?;
            let rows = approximation_rows(&frame.name, &tree, &frame.cloud.attributes, &family)?;
            append_approximation_csv(out.join(csv), &rows)?;
            summaries.push(summary(&frame.name, &tree, err, dir, seconds));
        }
    }
    write_report(&out.join("report.json"), &config, &summaries)?;
    if worst > tolerance {
        return Err(Failure::Validation(format!(
            "reconstruction error {worst:e} per level exceeds tolerance {tolerance:e}"
        )));
    }
    Ok(())
}

fn summary(frame: &str, tree: &DecompositionTree, err: f64, dir: PathBuf, seconds: f64) -> ArmSummary {
    ArmSummary {
        frame: frame.into(),
        arm: tree.meta.arm,
        k: tree.meta.k,
        n: tree.meta.n,
        levels_completed: tree.meta.levels_completed,
        early_stop: tree.meta.early_stop.clone(),
        coefficients: tree.coefficient_count(),
        max_relative_error: err,
        tree: dir,
        seconds,
    }
}

#[derive(Serialize)]
struct ReconstructSummary {
    n: usize,
    channels: usize,
    keep: f64,
    m_over_n: f64,
    psnr: Vec<f64>,
    attributes: PathBuf,
    ply: Option<PathBuf>,
}

pub fn reconstruct_cmd(args: &ReconstructArgs) -> Result<(), Failure> {
    let c = &args.common;
    let out = require_out(c)?;
    let [tree_dir] = c.input.as_slice() else {
        return Err(Failure::Usage("reconstruct takes exactly one --input tree directory".into()));
    };
    let tree = load_tree(tree_dir)?;
    let reference = args.reference.as_deref().map(load_ply).transpose()?;
    if let Some(r) = &reference {
        if r.len() != tree.meta.n || r.channels() != tree.meta.channels {
            return Err(Failure::Usage(format!(
                "reference has {} points x {} channels, tree has {} x {}",
                r.len(),
                r.channels(),
                tree.meta.n,
                tree.meta.channels
            )));
        }
    }
    let full;
    let reference_attributes = match &reference {
        Some(r) => &r.attributes,
        None => {
            full = reconstruct(&tree)?;
            &full
        }
    };
    let approx = linear_approximation_against(&tree, args.keep, reference_attributes)?;

    std::fs::create_dir_all(out).map_err(mqfb::Error::from)?;
    let flat: Vec<f64> = approx.attributes.iter().flatten().copied().collect();
    let attributes = out.join("attributes.bin");
    write_vector_bin(&attributes, &flat)?;
    let ply = match reference {
        Some(r) => {
            let path = out.join("reconstructed.ply");
            let cloud = PointCloud::new(r.positions, approx.attributes.clone())?;
            save_ply(&path, &cloud, PlyFormat::BinaryLittleEndian)?;
            Some(path)
        }
        None => None,
    };
    let spec = tree.meta.spec.clone();
    let config = c
        .run_config("reconstruct", &spec)
        .with("keep", args.keep)
        .with("reference", &args.reference);
    let result = ReconstructSummary {
        n: tree.meta.n,
        channels: tree.meta.channels,
        keep: args.keep,
        m_over_n: approx.m_over_n,
        psnr: approx.psnr,
        attributes,
        ply,
    };
    write_report(&out.join("report.json"), &config, result)
}

#[derive(Serialize)]
struct BenchSummary {
    rows: Vec<mqfb::bench::BenchRow>,
    /// Fit of proposed-arm filtering seconds against total edges, when
    /// more than one frame size was run.
    filtering_edge_slope: Option<f64>,
    /// Largest `|stage sum − total| / total` over rows.
    max_accounting_gap: f64,
}

pub fn bench_cmd(args: &BenchArgs) -> Result<(), Failure> {
    let c = &args.common;
    let out = require_out(c)?;
    let spec = c.spec()?;
    let frames = if c.input.is_empty() {
        let mut frames = Vec::new();
        for &n in &args.synthetic {
            for i in 0..args.count {
                let seed = c.seed.wrapping_add(i as u64);
                frames.push(Frame {
                    name: format!("synthetic-{n}-{i}"),
                    cloud: synthetic_cloud(n, seed)?,
                });
            }
        }
        frames
    } else {
        load_frames(&c.input)?
    };
    let config = c
        .run_config("bench", &spec)
        .with("synthetic", &args.synthetic)
        .with("count", args.count)
        .with("arms", default_arms());
    let family = family_label(c);
    let mut base = DecomposeOptions::new(spec, c.k, c.levels, c.seed);
    base.operator = c.operator.into();

    std::fs::create_dir_all(out).map_err(mqfb::Error::from)?;
    let bench_csv = out.join("bench.csv");
    let mut csv = format!("{BENCH_CSV_HEADER}\n");
    let mut rows = Vec::new();
    let approx_csv = out.join("approximation.csv");
    let _ = std::fs::remove_file(&approx_csv);
    for frame in &frames {
        for arm in default_arms() {
            let run = run_arm(&frame.name, &frame.cloud, arm, &base)?;
            let label = format!("{family}:{}", arm.name());
            let approx = approximation_rows(&frame.name, &run.tree, &frame.cloud.attributes, &label)?;
            append_approximation_csv(&approx_csv, &approx)?;
            csv.push_str(&run.row.to_csv());
            csv.push('\n');
            rows.push(run.row);
        }
    }
    std::fs::write(&bench_csv, csv).map_err(mqfb::Error::from)?;

    let proposed: Vec<_> = rows.iter().filter(|r| r.arm == default_arms()[0].name()).collect();
    let mut sizes: Vec<usize> = proposed.iter().map(|r| r.n).collect();
    sizes.dedup();
    let filtering_edge_slope = if sizes.len() > 1 {
        let x: Vec<f64> = proposed.iter().map(|r| r.edges as f64).collect();
        let y: Vec<f64> = proposed.iter().map(|r| r.timings.filtering).collect();
        loglog_slope(&x, &y).ok()
    } else {
        None
    };
    let max_accounting_gap = rows
        .iter()
        .map(|r| (r.timings.total() - r.total).abs() / r.total)
        .fold(0.0, f64::max);
    for r in &rows {
        eprintln!("{} {} n={} total={:.3}s", r.frame, r.arm, r.n, r.total);
    }
    write_report(
        &out.join("report.json"),
        &config,
        BenchSummary {
            rows,
            filtering_edge_slope,
            max_accounting_gap,
        },
    )
}
