//! Iterated decomposition of point-cloud attributes.
//!
//! Each level builds a KNN graph on the current points, splits them at
//! random into A and B, runs the analysis bank on every attribute channel
//! and recurses on the A-side points with the approximation coefficients.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::filterbank::{
    analyze_channels, synthesize_channels, zero_dc_wrap, ChannelCoefficients, FilterBankSpec,
    FilterContext, FilterMode, ZeroDcFilterBank,
};
use crate::gft::{mq_eigendecompose_with_cap, FundamentalOperator, GftBasis, DEFAULT_DENSE_CAP};
use crate::graph::{
    bipartize, combinatorial_laplacian, normalized_laplacian, normalized_laplacian_allow_isolated,
    random_partition_per_component, Graph, Partition,
};
use crate::io::{decode_f64_le, read_matrix_market, write_matrix_market};
use crate::knn::{knn_graph_with, KnnSearch};
use crate::rng;
use crate::sparse::{build_block_diag_q, SolverOptions, SparseSym};

/// Levels with fewer points than this are not split.
pub const MIN_LEVEL_POINTS: usize = 4;

/// PSNR reported when the two signals are identical.
pub const PSNR_SENTINEL: f64 = 999.0;

pub const DEFAULT_PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    #[default]
    Combinatorial,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// Block-diagonal inner product on the full KNN graph.
    #[default]
    Proposed,
    /// Keep only A–B edges and use the normalized Laplacian with `Q = I`.
    Bipartite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub k: usize,
    pub levels: usize,
    pub seed: u64,
    pub spec: FilterBankSpec,
    pub operator: OperatorKind,
    pub arm: Arm,
    pub zero_dc: bool,
    pub solver: SolverOptions,
    pub search: KnnSearch,
    pub dense_cap: usize,
}

impl DecomposeOptions {
    pub fn new(spec: FilterBankSpec, k: usize, levels: usize, seed: u64) -> Self {
        Self {
            k,
            levels,
            seed,
            spec,
            operator: OperatorKind::Combinatorial,
            arm: Arm::Proposed,
            zero_dc: false,
            solver: SolverOptions::default(),
            search: KnnSearch::Auto,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn bipartite(mut self) -> Self {
        self.arm = Arm::Bipartite;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMeta {
    pub n: usize,
    pub channels: usize,
    pub levels_requested: usize,
    pub levels_completed: usize,
    pub k: usize,
    pub seed: u64,
    pub spec: FilterBankSpec,
    pub operator: OperatorKind,
    pub arm: Arm,
    pub zero_dc: bool,
    pub solver: SolverOptions,
    pub dense_cap: usize,
    pub min_level_points: usize,
    /// Why decomposition stopped before `levels_requested`, if it did.
    pub early_stop: Option<String>,
}

/// One split: the KNN graph of the points entering the level, the
/// partition, and the detail coefficients (B side) per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub partition: Partition,
    pub graph: Graph,
    pub details: Vec<Vec<f64>>,
}

/// Filters for one level, rebuilt from the stored graph and partition.
pub struct LevelOperator {
    m: SparseSym,
    backend: Backend,
    wrap: Option<ZeroDcFilterBank>,
}

enum Backend {
    Polynomial(FundamentalOperator),
    Spectral(GftBasis),
}

/// `M`, `Q` and the null vector of `M` used by the zero-DC wrap.
struct Assembled {
    m: SparseSym,
    q: SparseSym,
    null_vector: Vec<f64>,
}

fn assemble(graph: &Graph, p: &Partition, meta: &TreeMeta) -> Result<Assembled> {
    match meta.arm {
        Arm::Proposed => {
            let (m, null_vector) = match meta.operator {
                OperatorKind::Combinatorial => (combinatorial_laplacian(graph), vec![1.0; graph.n()]),
                OperatorKind::Normalized => (
                    normalized_laplacian(graph)?,
                    graph.degrees().iter().map(|d| d.sqrt()).collect(),
                ),
            };
            let q = build_block_diag_q(&m, p)?;
            Ok(Assembled { m, q, null_vector })
        }
        Arm::Bipartite => {
            let bip = bipartize(graph, p)?;
            let m = normalized_laplacian_allow_isolated(&bip);
            // Isolated vertices carry an identity row; give them unit scale.
            let null_vector = bip
                .degrees()
                .iter()
                .map(|&d| if d > 0.0 { d.sqrt() } else { 1.0 })
                .collect();
            Ok(Assembled {
                m,
                q: SparseSym::identity(graph.n()),
                null_vector,
            })
        }
    }
}

impl LevelOperator {
    pub fn build(graph: &Graph, p: &Partition, meta: &TreeMeta) -> Result<Self> {
        Self::from_assembled(assemble(graph, p, meta)?, meta)
    }

    fn from_assembled(parts: Assembled, meta: &TreeMeta) -> Result<Self> {
        let Assembled { m, q, null_vector } = parts;
        let wrap = if meta.zero_dc {
            // The wrap takes squared scales.
            let d: Vec<f64> = null_vector.iter().map(|s| s * s).collect();
            Some(zero_dc_wrap(meta.spec.clone(), &d)?)
        } else {
            None
        };
        let backend = match meta.spec.mode {
            FilterMode::Polynomial => Backend::Polynomial(FundamentalOperator::new(m.clone(), q, meta.solver)?),
            FilterMode::Dense => Backend::Spectral(mq_eigendecompose_with_cap(&m, &q, meta.dense_cap)?),
        };
        Ok(Self { m, backend, wrap })
    }

    pub fn m(&self) -> &SparseSym {
        &self.m
    }

    pub fn q(&self) -> &SparseSym {
        self.context().q()
    }

    pub fn context(&self) -> FilterContext<'_> {
        match &self.backend {
            Backend::Polynomial(z) => FilterContext::Polynomial(z),
            Backend::Spectral(b) => FilterContext::Spectral(b),
        }
    }

    pub fn analyze(
        &self,
        spec: &FilterBankSpec,
        p: &Partition,
        channels: &[Vec<f64>],
    ) -> Result<Vec<ChannelCoefficients>> {
        use rayon::prelude::*;
        match &self.wrap {
            Some(w) => channels.par_iter().map(|x| w.analyze(self.context(), p, x)).collect(),
            None => analyze_channels(spec, self.context(), p, channels),
        }
    }

    pub fn synthesize(
        &self,
        spec: &FilterBankSpec,
        p: &Partition,
        coefficients: &[ChannelCoefficients],
    ) -> Result<Vec<Vec<f64>>> {
        use rayon::prelude::*;
        match &self.wrap {
            Some(w) => coefficients.par_iter().map(|c| w.synthesize(self.context(), p, c)).collect(),
            None => synthesize_channels(spec, self.context(), p, coefficients),
        }
    }
}

pub struct DecompositionTree {
    pub meta: TreeMeta,
    pub levels: Vec<Level>,
    /// Approximation coefficients per channel after the last level.
    pub root: Vec<Vec<f64>>,
    operators: Vec<Option<Arc<LevelOperator>>>,
}

impl std::fmt::Debug for DecompositionTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecompositionTree")
            .field("meta", &self.meta)
            .field("levels", &self.levels.len())
            .field("root", &self.root.iter().map(Vec::len).collect::<Vec<_>>())
            .finish()
    }
}

impl PartialEq for DecompositionTree {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta && self.levels == other.levels && self.root == other.root
    }
}

impl Clone for DecompositionTree {
    fn clone(&self) -> Self {
        Self {
            meta: self.meta.clone(),
            levels: self.levels.clone(),
            root: self.root.clone(),
            operators: self.operators.clone(),
        }
    }
}

impl DecompositionTree {
    pub fn new(meta: TreeMeta, levels: Vec<Level>, root: Vec<Vec<f64>>) -> Self {
        let operators = vec![None; levels.len()];
        Self {
            meta,
            levels,
            root,
            operators,
        }
    }

    /// Detail count per level followed by the root count, summed over
    /// channels.
    pub fn coefficient_count(&self) -> usize {
        let details: usize = self.levels.iter().flat_map(|l| &l.details).map(Vec::len).sum();
        details + self.root.iter().map(Vec::len).sum::<usize>()
    }

    /// Number of points entering level `l` (1-based); `l = levels + 1` is
    /// the root size.
    pub fn points_at(&self, l: usize) -> usize {
        match l {
            0 => self.meta.n,
            l if l <= self.levels.len() => self.levels[l - 1].partition.n(),
            _ => self.root.first().map_or(self.meta.n, Vec::len),
        }
    }

    /// Operator of level `l` (1-based), reused from decomposition when cached.
    pub fn level_operator(&self, l: usize) -> Result<Arc<LevelOperator>> {
        let level = self
            .levels
            .get(l.wrapping_sub(1))
            .ok_or_else(|| Error::MissingLevel(format!("level {l} not in tree")))?;
        if let Some(Some(op)) = self.operators.get(l - 1) {
            return Ok(op.clone());
        }
        LevelOperator::build(&level.graph, &level.partition, &self.meta)
            .map(Arc::new)
            .map_err(|e| e.at_level(l))
    }

    pub fn drop_cache(&mut self) {
        self.operators.iter_mut().for_each(|o| *o = None);
    }
}

/// Wall-clock seconds per pipeline stage, summed over levels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub knn: f64,
    pub laplacian: f64,
    pub partition: f64,
    /// Factorization of `Q` or the dense eigendecomposition.
    pub solve: f64,
    pub filtering: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.knn + self.laplacian + self.partition + self.solve + self.filtering
    }
}

pub fn decompose(pc: &PointCloud, options: &DecomposeOptions) -> Result<DecompositionTree> {
    decompose_with_timings(pc, options).map(|(t, _)| t)
}

pub fn decompose_with_timings(
    pc: &PointCloud,
    options: &DecomposeOptions,
) -> Result<(DecompositionTree, StageTimings)> {
    let n = pc.len();
    let l_max = options.levels;
    if l_max == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    if l_max >= usize::BITS as usize || n >> l_max == 0 {
        return Err(Error::InvalidArgument(format!("{n} points cannot support {l_max} levels")));
    }
    if options.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let min_points = MIN_LEVEL_POINTS.max(options.k + 1);
    let mut meta = TreeMeta {
        n,
        channels: pc.channels(),
        levels_requested: l_max,
        levels_completed: 0,
        k: options.k,
        seed: options.seed,
        spec: options.spec.clone(),
        operator: options.operator,
        arm: options.arm,
        zero_dc: options.zero_dc,
        solver: options.solver,
        dense_cap: options.dense_cap,
        min_level_points: min_points,
        early_stop: None,
    };

    let mut timings = StageTimings::default();
    let mut positions = pc.positions.clone();
    let mut signal = pc.attributes.clone();
    let mut levels = Vec::with_capacity(l_max);
    let mut operators = Vec::with_capacity(l_max);

    for l in 1..=l_max {
        if positions.len() < min_points {
            meta.early_stop = Some(format!(
                "level {l} has {} points, fewer than {min_points}",
                positions.len()
            ));
            break;
        }
        let at = |e: Error| e.at_level(l);

        let t = Instant::now();
        let graph = knn_graph_with(&positions, options.k, options.search).map_err(at)?;
        timings.knn += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let partition =
            random_partition_per_component(&graph, rng::derive_seed(options.seed, "level", l as u64)).map_err(at)?;
        timings.partition += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let parts = assemble(&graph, &partition, &meta).map_err(at)?;
        timings.laplacian += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let op = LevelOperator::from_assembled(parts, &meta).map_err(at)?;
        timings.solve += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let coefficients = op.analyze(&options.spec, &partition, &signal).map_err(at)?;
        timings.filtering += t.elapsed().as_secs_f64();

        let a_indices = partition.a_indices();
        positions = a_indices.iter().map(|&i| positions[i]).collect();
        let (approx, details): (Vec<_>, Vec<_>) = coefficients.into_iter().map(|c| (c.a, c.d)).unzip();
        signal = approx;
        levels.push(Level {
            partition,
            graph,
            details,
        });
        operators.push(Some(Arc::new(op)));
        meta.levels_completed = l;
    }

    Ok((
        DecompositionTree {
            meta,
            levels,
            root: signal,
            operators,
        },
        timings,
    ))
}

/// Synthesizes from the root up through every level.
pub fn reconstruct(tree: &DecompositionTree) -> Result<Vec<Vec<f64>>> {
    reconstruct_with(tree, |_| false)
}

/// Reconstruction with the details of each level for which `drop(l)` holds
/// replaced by zeros.
fn reconstruct_with(tree: &DecompositionTree, drop: impl Fn(usize) -> bool) -> Result<Vec<Vec<f64>>> {
    let channels = tree.meta.channels;
    if tree.root.len() != channels {
        return Err(Error::MissingLevel(format!(
            "root has {} channels, expected {channels}",
            tree.root.len()
        )));
    }
    let mut signal = tree.root.clone();
    for (idx, level) in tree.levels.iter().enumerate().rev() {
        let l = idx + 1;
        let p = &level.partition;
        if level.details.len() != channels {
            return Err(Error::MissingLevel(format!(
                "level {l} has {} detail channels, expected {channels}",
                level.details.len()
            )));
        }
        let coefficients: Vec<ChannelCoefficients> = signal
            .into_iter()
            .zip(&level.details)
            .map(|(a, d)| {
                if a.len() != p.a_len() || d.len() != p.b_len() {
                    return Err(Error::MissingLevel(format!(
                        "level {l} expects {}+{} coefficients, found {}+{}",
                        p.a_len(),
                        p.b_len(),
                        a.len(),
                        d.len()
                    )));
                }
                let d = if drop(l) { vec![0.0; d.len()] } else { d.clone() };
                Ok(ChannelCoefficients { a, d })
            })
            .collect::<Result<_>>()?;
        let op = tree.level_operator(l)?;
        signal = op
            .synthesize(&tree.meta.spec, p, &coefficients)
            .map_err(|e| e.at_level(l))?;
    }
    Ok(signal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationResult {
    /// Nominal fraction requested.
    pub keep: f64,
    /// Low-pass coefficient count over `n`, from the realized partitions.
    pub m_over_n: f64,
    pub attributes: Vec<Vec<f64>>,
    pub psnr: Vec<f64>,
}

/// Keeps the coefficients of the coarsest `keep · n` (nominal) low-pass
/// channel, zeroing every finer detail level, and compares against the
/// full reconstruction.
pub fn linear_approximation(tree: &DecompositionTree, keep: f64) -> Result<ApproximationResult> {
    let reference = reconstruct(tree)?;
    linear_approximation_against(tree, keep, &reference)
}

/// As [`linear_approximation`], measured against `reference`.
pub fn linear_approximation_against(
    tree: &DecompositionTree,
    keep: f64,
    reference: &[Vec<f64>],
) -> Result<ApproximationResult> {
    let cut = keep_to_levels(keep, tree.levels.len())?;
    let attributes = reconstruct_with(tree, |l| l <= cut)?;
    let psnr = psnr(reference, &attributes, DEFAULT_PEAK)?;
    Ok(ApproximationResult {
        keep,
        m_over_n: tree.points_at(cut + 1) as f64 / tree.meta.n as f64,
        attributes,
        psnr,
    })
}

/// `keep = 2^{-j}` → `j`, for `0 ≤ j ≤ levels`.
pub fn keep_to_levels(keep: f64, levels: usize) -> Result<usize> {
    (0..=levels)
        .find(|&j| (keep - 0.5f64.powi(j as i32)).abs() <= 1e-12 * keep.abs().max(1.0))
        .ok_or_else(|| {
            Error::InvalidArgument(format!("keep must be 2^-j with 0 <= j <= {levels}, got {keep}"))
        })
}

/// Keep fractions `1, 1/2, …, 2^{-levels}`.
pub fn keep_fractions(levels: usize) -> Vec<f64> {
    (0..=levels).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// `10 log10(peak² / MSE)` per channel; identical channels give
/// [`PSNR_SENTINEL`].
pub fn psnr(x: &[Vec<f64>], y: &[Vec<f64>], peak: f64) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: b.len(),
                });
            }
            let mse = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / a.len().max(1) as f64;
            Ok(if mse == 0.0 {
                PSNR_SENTINEL
            } else {
                (10.0 * (peak * peak / mse).log10()).min(PSNR_SENTINEL)
            })
        })
        .collect()
}

/// Writes `meta.json`, `root.bin` and `level_<l>/{partition.txt, graph.mtx,
/// detail.bin}`. Binary blocks are little-endian f64, channel-major.
pub fn save_tree(tree: &DecompositionTree, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&tree.meta)?)?;
    std::fs::write(dir.join("root.bin"), channel_bytes(&tree.root))?;
    for (idx, level) in tree.levels.iter().enumerate() {
        let ldir = dir.join(format!("level_{}", idx + 1));
        std::fs::create_dir_all(&ldir)?;
        let mut partition = String::with_capacity(3 * level.partition.n());
        for f in level.partition.indicator() {
            let _ = writeln!(partition, "{f}");
        }
        std::fs::write(ldir.join("partition.txt"), partition)?;
        write_matrix_market(ldir.join("graph.mtx"), level.graph.adjacency())?;
        std::fs::write(ldir.join("detail.bin"), channel_bytes(&level.details))?;
    }
    Ok(())
}

pub fn load_tree(dir: impl AsRef<Path>) -> Result<DecompositionTree> {
    let dir = dir.as_ref();
    let meta: TreeMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
    let c = meta.channels;
    let mut levels = Vec::with_capacity(meta.levels_completed);
    for l in 1..=meta.levels_completed {
        let ldir = dir.join(format!("level_{l}"));
        if !ldir.is_dir() {
            return Err(Error::MissingLevel(format!("{} not found", ldir.display())));
        }
        let indicator: Vec<i8> = std::fs::read_to_string(ldir.join("partition.txt"))?
            .lines()
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidPartition(format!("bad indicator `{s}`")))
            })
            .collect::<Result<_>>()?;
        let partition = Partition::from_indicator(&indicator)?;
        let graph = Graph::new(read_matrix_market(ldir.join("graph.mtx"))?)?;
        if graph.n() != partition.n() {
            return Err(Error::DimensionMismatch {
                expected: partition.n(),
                got: graph.n(),
            });
        }
        let details = split_channels(&std::fs::read(ldir.join("detail.bin"))?, c, partition.b_len())
            .map_err(|e| e.at_level(l))?;
        levels.push(Level {
            partition,
            graph,
            details,
        });
    }
    let root_len = levels.last().map_or(meta.n, |l: &Level| l.partition.a_len());
    let root = split_channels(&std::fs::read(dir.join("root.bin"))?, c, root_len)?;
    Ok(DecompositionTree::new(meta, levels, root))
}

fn channel_bytes(channels: &[Vec<f64>]) -> Vec<u8> {
    channels.iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
}

fn split_channels(bytes: &[u8], channels: usize, len: usize) -> Result<Vec<Vec<f64>>> {
    let values = decode_f64_le(bytes)?;
    if values.len() != channels * len {
        return Err(Error::MissingLevel(format!(
            "expected {channels}x{len} coefficients, found {}",
            values.len()
        )));
    }
    Ok(if len == 0 {
        vec![Vec::new(); channels]
    } else {
        values.chunks(len).map(<[f64]>::to_vec).collect()
    })
}

/// One row of the approximation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationRow {
    pub frame: String,
    pub k: usize,
    pub levels: usize,
    pub family: String,
    pub m_over_n: f64,
    pub psnr: Vec<f64>,
    pub seconds: f64,
}

/// `frame,K,L,family,m_over_n,psnr_r,psnr_g,psnr_b,seconds`; other channel
/// counts get `psnr_0, psnr_1, …`.
pub fn approximation_csv_header(channels: usize) -> String {
    let psnr: Vec<String> = if channels == 3 {
        ["psnr_r", "psnr_g", "psnr_b"].map(String::from).to_vec()
    } else {
        (0..channels).map(|i| format!("psnr_{i}")).collect()
    };
    format!("frame,K,L,family,m_over_n,{},seconds", psnr.join(","))
}

impl ApproximationRow {
    pub fn to_csv(&self) -> String {
        let psnr: Vec<String> = self.psnr.iter().map(|v| format!("{v:.6}")).collect();
        format!(
            "{},{},{},{},{:.8},{},{:.6}",
            self.frame,
            self.k,
            self.levels,
            self.family,
            self.m_over_n,
            psnr.join(","),
            self.seconds
        )
    }
}

/// Appends rows, writing the header when the file is new or empty.
pub fn append_approximation_csv(path: impl AsRef<Path>, rows: &[ApproximationRow]) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        let channels = rows.first().map_or(3, |r| r.psnr.len());
        writeln!(f, "{}", approximation_csv_header(channels))?;
    }
    for r in rows {
        writeln!(f, "{}", r.to_csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::synthetic_cloud;
    use crate::filterbank::lazy_spec;

    #[test]
    fn psnr_examples() {
        let x = vec![vec![10.0, 20.0, 30.0]];
        assert_eq!(psnr(&x, &x, 255.0).unwrap(), vec![PSNR_SENTINEL]);
        let y = vec![vec![15.0, 25.0, 25.0]];
        let v = psnr(&x, &y, 255.0).unwrap()[0];
        assert!((v - 10.0 * (255.0f64 * 255.0 / 25.0).log10()).abs() < 1e-12);
        assert!((v - 34.151).abs() < 1e-3);
        let z = vec![vec![10.0 + 255.0, 20.0 - 255.0, 30.0 + 255.0]];
        assert!(psnr(&x, &z, 255.0).unwrap()[0].abs() < 1e-12);
        assert!(psnr(&x, &[vec![1.0]], 255.0).is_err());
    }

    #[test]
    fn keep_parsing() {
        assert_eq!(keep_to_levels(1.0, 3).unwrap(), 0);
        assert_eq!(keep_to_levels(0.125, 3).unwrap(), 3);
        assert!(keep_to_levels(0.0625, 3).is_err());
        assert!(keep_to_levels(0.3, 3).is_err());
        assert_eq!(keep_fractions(2), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn single_level_round_trip() {
        let pc = synthetic_cloud(300, 4).unwrap();
        let tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 1, 9)).unwrap();
        assert_eq!(tree.levels.len(), 1);
        assert_eq!(tree.coefficient_count(), 300 * 3);
        let back = reconstruct(&tree).unwrap();
        for (u, v) in back.iter().flatten().zip(pc.attributes.iter().flatten()) {
            assert!((u - v).abs() <= 1e-9 * 255.0);
        }
    }

    #[test]
    fn early_stop_is_recorded() {
        let pc = synthetic_cloud(40, 1).unwrap();
        let tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 5, 2)).unwrap();
        assert!(tree.meta.levels_completed < 5);
        assert!(tree.meta.early_stop.is_some());
        assert_eq!(tree.coefficient_count(), 40 * 3);
        assert!(decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 6, 2)).is_err());
    }

    #[test]
    fn zeroed_tree_reconstructs_zero() {
        let pc = synthetic_cloud(200, 3).unwrap();
        let mut tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 3, 1)).unwrap();
        tree.root.iter_mut().flatten().for_each(|v| *v = 0.0);
        tree.levels.iter_mut().flat_map(|l| &mut l.details).flatten().for_each(|v| *v = 0.0);
        assert!(reconstruct(&tree).unwrap().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn csv_header() {
        assert_eq!(
            approximation_csv_header(3),
            "frame,K,L,family,m_over_n,psnr_r,psnr_g,psnr_b,seconds"
        );
    }
}
