//! Symmetric sparse matrices and SPD solves.
//!
//! [`SparseSym`] stores the full symmetric pattern in compressed rows with
//! ascending column indices. Every constructor mirrors off-diagonal entries,
//! so `(i, j)` and `(j, i)` always hold the same value.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky};
use faer::linalg::solvers::LltError;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Partition;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal indices are in range")
    }

    /// Builds a symmetric matrix from `(i, j, v)` triplets.
    ///
    /// An off-diagonal triplet contributes `v` to both `(i, j)` and `(j, i)`;
    /// repeated positions are summed. Entries that sum to exactly zero are
    /// dropped.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            for index in [i, j] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, v));
            }
        }
        // Stable, so both mirrored copies of a position sum in input order.
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (i, j, mut v) = entries[k];
            k += 1;
            while k < entries.len() && entries[k].0 == i && entries[k].1 == j {
                v += entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Dense row-major input; only the lower triangle is read.
    pub fn from_dense_lower(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate().take(i + 1) {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, counting both mirrored halves.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Lower-triangle entries (`col <= row`), each off-diagonal pair once.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries().filter(|&(i, j, _)| j <= i)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries().all(|(i, j, _)| i == j)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut out = Mat::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            out[(i, j)] = v;
        }
        out
    }

    /// Entrywise `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SparseSym) -> Result<SparseSym> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Self::from_triplets(
            self.n,
            self.lower_entries()
                .chain(other.lower_entries().map(|(i, j, v)| (i, j, alpha * v))),
        )
    }

    /// `diag(s) * self * diag(s)`.
    pub fn scale_symmetric(&self, s: &[f64]) -> Result<SparseSym> {
        check_dim(self.n, s.len())?;
        Self::from_triplets(self.n, self.lower_entries().map(|(i, j, v)| (i, j, s[i] * v * s[j])))
    }

    fn to_faer_lower(&self) -> SparseColMat<usize, f64> {
        let triplets: Vec<_> = self
            .lower_entries()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .expect("indices validated at construction")
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Exact sparse matrix-vector product.
pub fn spmv(m: &SparseSym, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(m.n, x.len())?;
    Ok((0..m.n)
        .map(|i| m.row(i).map(|(j, v)| v * x[j]).sum())
        .collect())
}

/// Principal submatrix on `subset`, rows and columns in ascending vertex order.
pub fn extract_principal_block(m: &SparseSym, subset: &[usize]) -> Result<SparseSym> {
    if subset.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut local = vec![usize::MAX; m.n];
    for (k, &v) in sorted.iter().enumerate() {
        if v >= m.n {
            return Err(Error::IndexOutOfRange { index: v, n: m.n });
        }
        local[v] = k;
    }
    let triplets = sorted.iter().enumerate().flat_map(|(k, &v)| {
        let local = &local;
        m.row(v)
            .filter(move |&(j, _)| j <= v && local[j] != usize::MAX)
            .map(move |(j, val)| (k, local[j], val))
    });
    SparseSym::from_triplets(sorted.len(), triplets.collect::<Vec<_>>())
}

/// Keeps the within-A and within-B entries of `m` and zeroes the cross blocks.
pub fn build_block_diag_q(m: &SparseSym, p: &Partition) -> Result<SparseSym> {
    check_dim(m.n, p.n())?;
    SparseSym::from_triplets(
        m.n,
        m.lower_entries()
            .filter(|&(i, j, _)| p.in_a(i) == p.in_a(j))
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    /// Sparse Cholesky unless the factor would exceed the memory budget,
    /// in which case conjugate gradients take over.
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Relative residual bound `‖A z − y‖ ≤ tolerance · ‖y‖`.
    pub tolerance: f64,
    /// Budget for the numeric Cholesky factor, in bytes.
    pub memory_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: SolverMode::Direct,
            tolerance: 1e-10,
            memory_budget: 2 << 30,
        }
    }
}

impl SolverOptions {
    pub fn iterative(tolerance: f64) -> Self {
        Self {
            mode: SolverMode::Iterative,
            tolerance,
            ..Self::default()
        }
    }
}

enum Backend {
    Diagonal(Vec<f64>),
    Cholesky {
        symbolic: SymbolicCholesky<usize>,
        numeric: Vec<f64>,
    },
    ConjugateGradient {
        inv_diag: Vec<f64>,
        max_iterations: usize,
    },
}

/// Factorized (or preconditioned) symmetric positive definite operator.
///
/// Immutable once built; `solve` takes `&self` and may be called from
/// several threads at once.
pub struct SpdSolver {
    matrix: SparseSym,
    backend: Backend,
    tolerance: f64,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver")
            .field("n", &self.matrix.n)
            .field("backend", &self.backend_name())
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

const REFINEMENT_STEPS: usize = 3;

impl SpdSolver {
    /// Factorizes `matrix`. Positive definiteness is established here: a
    /// failed Cholesky pivot (or a nonpositive diagonal) yields
    /// [`Error::NotPositiveDefinite`].
    pub fn new(matrix: SparseSym, options: SolverOptions) -> Result<Self> {
        let diag = matrix.diagonal();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let backend = if matrix.is_diagonal() {
            Backend::Diagonal(diag)
        } else {
            match options.mode {
                SolverMode::Direct => {
                    let lower = matrix.to_faer_lower();
                    let symbolic = factorize_symbolic_cholesky(
                        lower.symbolic(),
                        Side::Lower,
                        Default::default(),
                        Default::default(),
                    )
                    .map_err(|e| Error::InvalidArgument(format!("symbolic factorization: {e:?}")))?;
                    let bytes = symbolic.len_val().saturating_mul(std::mem::size_of::<f64>());
                    if bytes <= options.memory_budget {
                        let numeric = factorize_numeric(&symbolic, &lower)?;
                        Backend::Cholesky { symbolic, numeric }
                    } else {
                        cg_backend(&diag)
                    }
                }
                SolverMode::Iterative => cg_backend(&diag),
            }
        };
        Ok(Self {
            matrix,
            backend,
            tolerance: options.tolerance,
        })
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn backend_name(&self) -> &'static str {
        match self.backend {
            Backend::Diagonal(_) => "diagonal",
            Backend::Cholesky { .. } => "cholesky",
            Backend::ConjugateGradient { .. } => "conjugate-gradient",
        }
    }

    pub fn is_direct(&self) -> bool {
        !matches!(self.backend, Backend::ConjugateGradient { .. })
    }

    /// Solves `matrix · z = y` to the configured relative residual.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.matrix.n, y.len())?;
        let y_norm = norm2(y);
        if y_norm == 0.0 {
            return Ok(vec![0.0; y.len()]);
        }
        match &self.backend {
            Backend::ConjugateGradient {
                inv_diag,
                max_iterations,
            } => conjugate_gradient(&self.matrix, inv_diag, y, self.tolerance, *max_iterations),
            _ => {
                let mut z = self.direct_solve(y);
                let mut residual = residual_vec(&self.matrix, &z, y);
                let mut rel = norm2(&residual) / y_norm;
                let mut steps = 0;
                while rel > self.tolerance && steps < REFINEMENT_STEPS {
                    let correction = self.direct_solve(&residual);
                    for (zi, ci) in z.iter_mut().zip(&correction) {
                        *zi += ci;
                    }
                    residual = residual_vec(&self.matrix, &z, y);
                    rel = norm2(&residual) / y_norm;
                    steps += 1;
                }
                if rel > self.tolerance {
                    return Err(Error::NotConverged {
                        residual: rel,
                        tolerance: self.tolerance,
                    });
                }
                Ok(z)
            }
        }
    }

    fn direct_solve(&self, y: &[f64]) -> Vec<f64> {
        match &self.backend {
            Backend::Diagonal(d) => y.iter().zip(d).map(|(a, b)| a / b).collect(),
            Backend::Cholesky { symbolic, numeric } => {
                let mut rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
                let par = Par::Seq;
                let mut buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, par));
                LltRef::<'_, usize, f64>::new(symbolic, numeric).solve_in_place_with_conj(
                    Conj::No,
                    rhs.as_mut(),
                    par,
                    MemStack::new(&mut buf),
                );
                (0..y.len()).map(|i| rhs[(i, 0)]).collect()
            }
            Backend::ConjugateGradient { .. } => unreachable!("direct_solve on iterative backend"),
        }
    }
}

fn cg_backend(diag: &[f64]) -> Backend {
    Backend::ConjugateGradient {
        inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        max_iterations: (10 * diag.len()).max(100),
    }
}

fn factorize_numeric(
    symbolic: &SymbolicCholesky<usize>,
    lower: &SparseColMat<usize, f64>,
) -> Result<Vec<f64>> {
    let par = Par::Seq;
    let mut numeric = vec![0.0f64; symbolic.len_val()];
    let mut buf = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(par, Default::default()));
    symbolic
        .factorize_numeric_llt::<f64>(
            &mut numeric,
            lower.as_ref(),
            Side::Lower,
            Default::default(),
            par,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|_: LltError| Error::NotPositiveDefinite)?;
    Ok(numeric)
}

/// Convenience wrapper matching the one-shot solve interface.
pub fn spd_solve(solver: &SpdSolver, y: &[f64]) -> Result<Vec<f64>> {
    solver.solve(y)
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual_vec(m: &SparseSym, z: &[f64], y: &[f64]) -> Vec<f64> {
    (0..m.n)
        .map(|i| y[i] - m.row(i).map(|(j, v)| v * z[j]).sum::<f64>())
        .collect()
}

/// Jacobi-preconditioned conjugate gradients.
fn conjugate_gradient(
    m: &SparseSym,
    inv_diag: &[f64],
    y: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let n = y.len();
    let y_norm = norm2(y);
    let mut z = vec![0.0; n];
    let mut r = y.to_vec();
    let mut s: Vec<f64> = r.iter().zip(inv_diag).map(|(a, b)| a * b).collect();
    let mut p = s.clone();
    let mut rs = dot(&r, &s);
    let mut rel = 1.0;
    for _ in 0..max_iterations {
        let mp = spmv(m, &p)?;
        let curvature = dot(&p, &mp);
        if !(curvature > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rs / curvature;
        for i in 0..n {
            z[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        rel = norm2(&r) / y_norm;
        if rel <= tolerance {
            // Guard against drift in the recursively updated residual.
            let true_rel = norm2(&residual_vec(m, &z, y)) / y_norm;
            if true_rel <= tolerance {
                return Ok(z);
            }
            r = residual_vec(m, &z, y);
        }
        for i in 0..n {
            s[i] = r[i] * inv_diag[i];
        }
        let rs_next = dot(&r, &s);
        let beta = rs_next / rs;
        rs = rs_next;
        for i in 0..n {
            p[i] = s[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        residual: rel,
        tolerance,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_laplacian() -> SparseSym {
        SparseSym::from_dense_lower(&[
            vec![2.0, -1.0, -1.0],
            vec![-1.0, 2.0, -1.0],
            vec![-1.0, -1.0, 2.0],
        ])
        .unwrap()
    }

    fn path2() -> SparseSym {
        SparseSym::from_dense_lower(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
    }

    #[test]
    fn triplets_are_mirrored_and_summed() {
        let m = SparseSym::from_triplets(3, [(0, 1, 1.5), (1, 0, 0.5), (2, 2, 3.0), (2, 0, 0.0)]).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(2, 2), 3.0);
        assert_eq!(m.nnz(), 3);
        assert!(matches!(
            SparseSym::from_triplets(2, [(0, 2, 1.0)]),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn principal_block_examples() {
        let l = triangle_laplacian();
        let b = extract_principal_block(&l, &[1, 2]).unwrap();
        assert_eq!(b.to_dense(), faer::mat![[2.0, -1.0], [-1.0, 2.0]]);
        assert_eq!(extract_principal_block(&l, &[0, 1, 2]).unwrap(), l);
        assert_eq!(extract_principal_block(&path2(), &[0]).unwrap().to_dense(), faer::mat![[1.0]]);
        assert!(matches!(extract_principal_block(&l, &[]), Err(Error::EmptyBlock)));
        assert!(matches!(
            extract_principal_block(&l, &[3]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn block_diag_q_examples() {
        let l = triangle_laplacian();
        let p = Partition::from_a_set(3, &[0]).unwrap();
        let q = build_block_diag_q(&l, &p).unwrap();
        assert_eq!(
            q.to_dense(),
            faer::mat![[2.0, 0.0, 0.0], [0.0, 2.0, -1.0], [0.0, -1.0, 2.0]]
        );
        let p2 = Partition::from_a_set(2, &[0]).unwrap();
        assert_eq!(build_block_diag_q(&path2(), &p2).unwrap(), SparseSym::identity(2));
    }

    #[test]
    fn spmv_examples() {
        let l = triangle_laplacian();
        assert_eq!(spmv(&l, &[1.0, -1.0, -1.0]).unwrap(), vec![4.0, -2.0, -2.0]);
        assert_eq!(spmv(&SparseSym::zeros(3), &[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(spmv(&SparseSym::identity(2), &[5.0, -1.0]).unwrap(), vec![5.0, -1.0]);
        assert!(matches!(spmv(&l, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn solve_small_systems() {
        let id = SpdSolver::new(SparseSym::identity(3), SolverOptions::default()).unwrap();
        assert_eq!(id.solve(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let a = SparseSym::from_dense_lower(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        for options in [SolverOptions::default(), SolverOptions::iterative(1e-12)] {
            let s = SpdSolver::new(a.clone(), options).unwrap();
            let z = s.solve(&[1.0, 1.0]).unwrap();
            assert!((z[0] - 1.0).abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_laplacian_is_rejected() {
        let err = SpdSolver::new(triangle_laplacian(), SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
        let mut zero_diag = SparseSym::from_triplets(2, [(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            SpdSolver::new(zero_diag.clone(), SolverOptions::default()),
            Err(Error::NotPositiveDefinite)
        ));
        zero_diag = SparseSym::from_dense_lower(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            SpdSolver::new(zero_diag.clone(), SolverOptions::iterative(1e-10))
                .unwrap()
                .solve(&[1.0, -1.0]),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn tiny_budget_falls_back_to_cg() {
        let a = SparseSym::from_dense_lower(&[vec![4.0, -1.0, 0.0], vec![-1.0, 4.0, -1.0], vec![0.0, -1.0, 4.0]])
            .unwrap();
        let s = SpdSolver::new(
            a.clone(),
            SolverOptions {
                memory_budget: 0,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        assert_eq!(s.backend_name(), "conjugate-gradient");
        let y = [1.0, 2.0, 3.0];
        let z = s.solve(&y).unwrap();
        let r = residual_vec(&a, &z, &y);
        assert!(norm2(&r) <= 1e-10 * norm2(&y));
    }
}
