//! Per-stage timing of the proposed and bipartite pipelines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::filterbank::FilterBankSpec;
use crate::multires::{
    decompose_with_timings, keep_fractions, linear_approximation_against, reconstruct, ApproximationRow, Arm,
    DecomposeOptions, DecompositionTree, StageTimings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchArm {
    pub arm: Arm,
    pub k: usize,
}

impl BenchArm {
    pub fn name(&self) -> String {
        match self.arm {
            Arm::Proposed => format!("proposed-k{}", self.k),
            Arm::Bipartite => format!("bipartite-k{}", self.k),
        }
    }
}

/// Proposed K=5 against bipartite K=10 and K=20.
pub fn default_arms() -> Vec<BenchArm> {
    vec![
        BenchArm { arm: Arm::Proposed, k: 5 },
        BenchArm { arm: Arm::Bipartite, k: 10 },
        BenchArm { arm: Arm::Bipartite, k: 20 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub frame: String,
    pub arm: String,
    pub k: usize,
    pub levels: usize,
    pub n: usize,
    /// Edges summed over the graphs of all levels.
    pub edges: usize,
    pub timings: StageTimings,
    /// Wall time of the whole decomposition.
    pub total: f64,
    pub reconstruct: f64,
    pub max_relative_error: f64,
}

pub const BENCH_CSV_HEADER: &str =
    "frame,arm,K,L,n,edges,knn,laplacian,partition,filtering,solve,stage_sum,total,reconstruct,max_relative_error";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let t = &self.timings;
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:e}",
            self.frame,
            self.arm,
            self.k,
            self.levels,
            self.n,
            self.edges,
            t.knn,
            t.laplacian,
            t.partition,
            t.filtering,
            t.solve,
            t.total(),
            self.total,
            self.reconstruct,
            self.max_relative_error
        )
    }
}

/// Output of one arm on one frame.
pub struct ArmRun {
    pub row: BenchRow,
    pub tree: DecompositionTree,
}

pub fn run_arm(frame: &str, pc: &PointCloud, arm: BenchArm, base: &DecomposeOptions) -> Result<ArmRun> {
    let options = DecomposeOptions {
        k: arm.k,
        arm: arm.arm,
        ..base.clone()
    };
    let t = Instant::now();
    let (tree, timings) = decompose_with_timings(pc, &options)?;
    let total = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let back = reconstruct(&tree)?;
    let reconstruct_seconds = t.elapsed().as_secs_f64();
    Ok(ArmRun {
        row: BenchRow {
            frame: frame.into(),
            arm: arm.name(),
            k: arm.k,
            levels: tree.levels.len(),
            n: pc.len(),
            edges: tree.levels.iter().map(|l| l.graph.edge_count()).sum(),
            timings,
            total,
            reconstruct: reconstruct_seconds,
            max_relative_error: max_relative_error(&pc.attributes, &back),
        },
        tree,
    })
}

pub fn bench_cloud(
    frame: &str,
    pc: &PointCloud,
    arms: &[BenchArm],
    spec: &FilterBankSpec,
    levels: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let base = DecomposeOptions::new(spec.clone(), 5, levels, seed);
    arms.iter().map(|&a| run_arm(frame, pc, a, &base).map(|r| r.row)).collect()
}

/// One approximation row per keep fraction `1, 1/2, …, 2^{-L}`.
pub fn approximation_rows(
    frame: &str,
    tree: &DecompositionTree,
    reference: &[Vec<f64>],
    family: &str,
) -> Result<Vec<ApproximationRow>> {
    keep_fractions(tree.levels.len())
        .into_iter()
        .map(|keep| {
            let t = Instant::now();
            let r = linear_approximation_against(tree, keep, reference)?;
            Ok(ApproximationRow {
                frame: frame.into(),
                k: tree.meta.k,
                levels: tree.meta.levels_completed,
                family: family.into(),
                m_over_n: r.m_over_n,
                psnr: r.psnr,
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// `max |x − y| / max |x|` over all channels.
pub fn max_relative_error(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let scale = x.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let err = x
        .iter()
        .flatten()
        .zip(y.iter().flatten())
        .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("slope needs two or more paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}
