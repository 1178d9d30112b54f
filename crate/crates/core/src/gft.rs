//! The (M,Q) graph Fourier transform.
//!
//! Basis vectors solve `M u = λ Q u` and are Q-orthonormal (`UᵀQU = I`).
//! With `Q` the block diagonal of `M` on a vertex bipartition, the spectrum
//! folds: `J u` is an eigenvector for `2 − λ` whenever `u` is one for `λ`.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{components_of, Partition};
use crate::kernel::FilterKernel;
use crate::sparse::{build_block_diag_q, norm2, spmv, SolverOptions, SparseSym, SpdSolver};

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Eigenvalues closer than this are treated as one eigenspace.
pub const DEGENERACY_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GftBasis {
    m: SparseSym,
    q: SparseSym,
    eigenvalues: Vec<f64>,
    vectors: Mat<f64>,
}

pub fn mq_eigendecompose(m: &SparseSym, q: &SparseSym) -> Result<GftBasis> {
    mq_eigendecompose_with_cap(m, q, DEFAULT_DENSE_CAP)
}

/// Dense generalized eigendecomposition through `Q = R Rᵀ`: the symmetric
/// matrix `R⁻¹ M R⁻ᵀ` is diagonalized and its eigenvectors mapped back by
/// `R⁻ᵀ`.
pub fn mq_eigendecompose_with_cap(m: &SparseSym, q: &SparseSym, cap: usize) -> Result<GftBasis> {
    let n = m.n();
    if q.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.n(),
        });
    }
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let q_dense = q.to_dense();
    let llt = q_dense.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
    let r = llt.L();

    // C = R⁻¹ M R⁻ᵀ = R⁻¹ (R⁻¹ M)ᵀ
    let mut x = m.to_dense();
    solve_lower_triangular_in_place(r, x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(r, c.as_mut(), Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));

    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let eigenvalues: Vec<f64> = (0..n).map(|k| evd.S()[k]).collect();
    let mut vectors = evd.U().to_owned();
    solve_upper_triangular_in_place(r.transpose(), vectors.as_mut(), Par::Seq);

    for k in 0..n {
        let col_max = (0..n).fold(0.0f64, |acc, i| acc.max(vectors[(i, k)].abs()));
        let lead = (0..n)
            .map(|i| vectors[(i, k)])
            .find(|v| v.abs() > 1e-10 * col_max)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for i in 0..n {
                vectors[(i, k)] = -vectors[(i, k)];
            }
        }
    }

    Ok(GftBasis {
        m: m.clone(),
        q: q.clone(),
        eigenvalues,
        vectors,
    })
}

impl GftBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Nondecreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn vectors(&self) -> faer::MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn m(&self) -> &SparseSym {
        &self.m
    }

    pub fn q(&self) -> &SparseSym {
        &self.q
    }

    /// Residual normalization: the largest absolute entry of `M`.
    pub fn scale(&self) -> f64 {
        let s = self.m.max_abs();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// `‖UᵀQU − I‖_max`.
    pub fn q_orthonormality_error(&self) -> f64 {
        let n = self.n();
        let qu: Vec<Vec<f64>> = (0..n)
            .map(|k| spmv(&self.q, &self.eigenvector(k)).expect("square"))
            .collect();
        let mut worst = 0.0f64;
        for j in 0..n {
            for (k, quk) in qu.iter().enumerate() {
                let g: f64 = (0..n).map(|i| self.vectors[(i, j)] * quk[i]).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `max_k ‖M u_k − λ_k Q u_k‖₂ / scale`.
    pub fn max_residual(&self) -> f64 {
        (0..self.n())
            .map(|k| {
                let u = self.eigenvector(k);
                eigen_residual(&self.m, &self.q, &u, self.eigenvalues[k]) / self.scale()
            })
            .fold(0.0, f64::max)
    }

    /// `max_k |λ_k − (2 − λ_{n−1−k})|`, the distance between the spectrum
    /// and its reflection about 1.
    pub fn reflection_error(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|k| (self.eigenvalues[k] - (2.0 - self.eigenvalues[n - 1 - k])).abs())
            .fold(0.0, f64::max)
    }

    /// Index ranges of eigenvalue clusters with consecutive gaps at most
    /// [`DEGENERACY_GAP`].
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.n() {
            if k == self.n() || self.eigenvalues[k] - self.eigenvalues[k - 1] > DEGENERACY_GAP {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    fn q_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let qx = spmv(&self.q, x).expect("square");
        qx.iter().zip(y).map(|(a, b)| a * b).sum()
    }
}

fn eigen_residual(m: &SparseSym, q: &SparseSym, u: &[f64], lambda: f64) -> f64 {
    let mu = spmv(m, u).expect("square");
    let qu = spmv(q, u).expect("square");
    norm2(&mu.iter().zip(&qu).map(|(a, b)| a - lambda * b).collect::<Vec<_>>())
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `x̂ = UᵀQx`.
pub fn gft_forward(b: &GftBasis, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(b.n(), x.len())?;
    let qx = spmv(&b.q, x)?;
    Ok((0..b.n())
        .map(|k| (0..b.n()).map(|i| b.vectors[(i, k)] * qx[i]).sum())
        .collect())
}

/// `x = U x̂`.
pub fn gft_inverse(b: &GftBasis, xhat: &[f64]) -> Result<Vec<f64>> {
    check_dim(b.n(), xhat.len())?;
    let n = b.n();
    let mut x = vec![0.0; n];
    for (k, &c) in xhat.iter().enumerate() {
        if c != 0.0 {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += b.vectors[(i, k)] * c;
            }
        }
    }
    Ok(x)
}

/// `U h(Λ) UᵀQ x`.
pub fn dense_spectral_filter(b: &GftBasis, kernel: &FilterKernel, x: &[f64]) -> Result<Vec<f64>> {
    let mut xhat = gft_forward(b, x)?;
    for (c, &lambda) in xhat.iter_mut().zip(&b.eigenvalues) {
        *c *= kernel.eval(lambda);
    }
    gft_inverse(b, &xhat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldingReport {
    pub n: usize,
    /// `max_k ‖M J u_k − (2 − λ_k) Q J u_k‖₂ / scale`.
    pub max_residual: f64,
    /// `max_k ‖J u_k − P J u_k‖_Q`, with `P` the Q-orthogonal projector onto
    /// the computed eigenspace nearest `2 − λ_k`.
    pub max_subspace_residual: f64,
    pub degenerate_clusters: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks the folding of every eigenpair. The basis must have been built
/// with `Q = build_block_diag_q(M, p)`.
pub fn verify_spectral_folding(b: &GftBasis, p: &Partition, tol: f64) -> Result<FoldingReport> {
    check_dim(b.n(), p.n())?;
    if build_block_diag_q(&b.m, p)? != b.q {
        return Err(Error::WrongInnerProduct);
    }
    folding_residuals(b, p, tol)
}

/// The folding measurement without the inner-product check, for probing
/// operator/inner-product pairs that are not expected to fold.
pub fn folding_residuals(b: &GftBasis, p: &Partition, tol: f64) -> Result<FoldingReport> {
    check_dim(b.n(), p.n())?;
    let n = b.n();
    let clusters = b.clusters();
    let scale = b.scale();
    let mut max_residual = 0.0f64;
    let mut max_subspace = 0.0f64;
    for k in 0..n {
        let u = b.eigenvector(k);
        let ju = p.apply_j(&u);
        let folded = 2.0 - b.eigenvalues[k];
        max_residual = max_residual.max(eigen_residual(&b.m, &b.q, &ju, folded) / scale);

        let nearest = nearest_index(&b.eigenvalues, folded);
        let residual = match clusters.iter().find(|c| c.contains(&nearest)) {
            Some(cluster) if (b.eigenvalues[nearest] - folded).abs() <= DEGENERACY_GAP => {
                let mut rest = ju.clone();
                for j in cluster.clone() {
                    let uj = b.eigenvector(j);
                    let coef = b.q_inner(&ju, &uj);
                    for (r, v) in rest.iter_mut().zip(&uj) {
                        *r -= coef * v;
                    }
                }
                b.q_inner(&rest, &rest).max(0.0).sqrt()
            }
            _ => 1.0,
        };
        max_subspace = max_subspace.max(residual);
    }
    Ok(FoldingReport {
        n,
        max_residual,
        max_subspace_residual: max_subspace,
        degenerate_clusters: clusters.iter().filter(|c| c.len() > 1).count(),
        tolerance: tol,
        passed: max_residual <= tol && max_subspace <= tol,
    })
}

fn nearest_index(sorted: &[f64], target: f64) -> usize {
    let pos = sorted.partition_point(|&v| v < target);
    match (pos.checked_sub(1), sorted.get(pos)) {
        (Some(lo), Some(&hi)) if (target - sorted[lo]).abs() <= (hi - target).abs() => lo,
        (Some(lo), None) => lo,
        _ => pos,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    /// `min ≥ −1e−10` and `max ≤ 2 + 1e−10`.
    pub in_range: bool,
    /// Eigenvalues within `1e−6` of 1.
    pub count_near_one: usize,
    /// `||A| − |B||`, the guaranteed lower bound on `count_near_one`.
    pub forced_near_one: usize,
    /// Eigenvalues within `1e−8` of the smallest one.
    pub smallest_multiplicity: usize,
    /// Connected components of M's sparsity pattern, reported when every
    /// off-diagonal entry of M is nonpositive (a generalized Laplacian).
    pub components: Option<usize>,
    pub reflection_error: f64,
}

pub fn spectrum_properties(b: &GftBasis, p: &Partition) -> Result<SpectrumReport> {
    check_dim(b.n(), p.n())?;
    let ev = &b.eigenvalues;
    let min = ev.first().copied().unwrap_or(0.0);
    let max = ev.last().copied().unwrap_or(0.0);
    let generalized_laplacian = b.m.entries().all(|(i, j, v)| i == j || v <= 0.0);
    Ok(SpectrumReport {
        n: b.n(),
        min,
        max,
        in_range: min >= -1e-10 && max <= 2.0 + 1e-10,
        count_near_one: ev.iter().filter(|&&l| (l - 1.0).abs() <= 1e-6).count(),
        forced_near_one: p.a_len().abs_diff(p.b_len()),
        smallest_multiplicity: ev.iter().filter(|&&l| l - min <= 1e-8).count(),
        components: generalized_laplacian.then(|| components_of(&b.m).1),
        reflection_error: b.reflection_error(),
    })
}

/// `Z = Q⁻¹M`, applied as one sparse product and one SPD solve.
#[derive(Debug)]
pub struct FundamentalOperator {
    m: SparseSym,
    solver: SpdSolver,
}

impl FundamentalOperator {
    pub fn new(m: SparseSym, q: SparseSym, options: SolverOptions) -> Result<Self> {
        if m.n() != q.n() {
            return Err(Error::DimensionMismatch {
                expected: m.n(),
                got: q.n(),
            });
        }
        Ok(Self {
            m,
            solver: SpdSolver::new(q, options)?,
        })
    }

    /// `Z` for the block-diagonal inner product of partition `p`.
    pub fn for_partition(m: SparseSym, p: &Partition, options: SolverOptions) -> Result<Self> {
        let q = build_block_diag_q(&m, p)?;
        Self::new(m, q, options)
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn m(&self) -> &SparseSym {
        &self.m
    }

    pub fn q(&self) -> &SparseSym {
        self.solver.matrix()
    }

    pub fn solver(&self) -> &SpdSolver {
        &self.solver
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve(&spmv(&self.m, x)?)
    }
}

pub fn apply_fundamental(z: &FundamentalOperator, x: &[f64]) -> Result<Vec<f64>> {
    z.apply(x)
}
