//! Seeded verification battery over random graphs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filterbank::{
    analyze, check_pr, check_q_orthogonality, frame_bounds, lazy_spec, CheckOptions, FilterBankSpec,
    FilterContext, FilterMode,
};
use crate::generate::{erdos_renyi_connected, knn_connected, random_bipartite};
use crate::gft::{folding_residuals, mq_eigendecompose, spectrum_properties, verify_spectral_folding, FundamentalOperator};
use crate::graph::{combinatorial_laplacian, normalized_laplacian, random_partition, Graph, Partition};
use crate::multires::OperatorKind;
use crate::rng;
use crate::sparse::{build_block_diag_q, SolverOptions, SparseSym};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryOptions {
    pub graphs: usize,
    pub seed: u64,
    pub n_min: usize,
    pub n_max: usize,
    pub spec: FilterBankSpec,
    pub operator: OperatorKind,
    /// Overrides the spec's default tolerance for PR and orthogonality.
    pub tolerance: Option<f64>,
    pub trials: usize,
    /// Also run the bipartite special case.
    pub bipartite: bool,
    /// Replace the operator pair by the normalized Laplacian with `Q = I`,
    /// which does not fold on non-bipartite graphs.
    pub misuse: bool,
}

impl BatteryOptions {
    pub fn new(spec: FilterBankSpec, graphs: usize, seed: u64) -> Self {
        Self {
            graphs,
            seed,
            n_min: 10,
            n_max: 200,
            spec,
            operator: OperatorKind::Combinatorial,
            tolerance: None,
            trials: 10,
            bipartite: true,
            misuse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest measured violation (or, for count checks, the worst shortfall).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// First failing case, if any.
    pub first_failure: Option<String>,
}

impl InvariantResult {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
            passed: true,
            first_failure: None,
        }
    }

    fn record(&mut self, value: f64, ok: bool, case: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.max(value);
        if !ok {
            self.failures += 1;
            self.passed = false;
            self.first_failure.get_or_insert_with(case);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub invariants: Vec<InvariantResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failing(&self) -> impl Iterator<Item = &InvariantResult> {
        self.invariants.iter().filter(|r| !r.passed)
    }
}

/// Graph `i` of the battery: Erdős–Rényi (`p = 0.1`) for even `i`, 4-NN
/// for odd `i`, with `n` uniform in `[n_min, n_max]`.
pub fn battery_graph(i: usize, options: &BatteryOptions) -> Result<Graph> {
    let mut r = rng::stream(options.seed, "battery-size", i as u64);
    let n = r.random_range(options.n_min..=options.n_max.max(options.n_min));
    let seed = rng::derive_seed(options.seed, "battery-graph", i as u64);
    if i % 2 == 0 {
        erdos_renyi_connected(n, 0.1, seed)
    } else {
        knn_connected(n, 4, seed)
    }
}

fn operator(g: &Graph, kind: OperatorKind) -> Result<SparseSym> {
    match kind {
        OperatorKind::Combinatorial => Ok(combinatorial_laplacian(g)),
        OperatorKind::Normalized => normalized_laplacian(g),
    }
}

/// `true` when `gᵢ = hᵢ` and `h₀² + h₁² = 2` on the frame grid.
fn is_orthogonal(spec: &FilterBankSpec) -> bool {
    let fb = frame_bounds(spec);
    spec.g0 == spec.h0 && spec.g1 == spec.h1 && (fb.alpha - 1.0).abs() < 1e-9 && (fb.beta - 1.0).abs() < 1e-9
}

const FOLDING_TOL: f64 = 1e-8;
const RANGE_TOL: f64 = 1e-10;
const FRAME_SLACK: f64 = 1e-6;
const ZERO_DC_TOL: f64 = 1e-10;

pub fn run_battery(options: &BatteryOptions) -> Result<VerifyReport> {
    let tol = options.tolerance.unwrap_or_else(|| options.spec.default_tolerance());
    let orthogonal = is_orthogonal(&options.spec);
    let fb = frame_bounds(&options.spec);

    let mut folding = InvariantResult::new("spectral-folding", FOLDING_TOL);
    let mut range = InvariantResult::new("spectrum-range", RANGE_TOL);
    let mut symmetry = InvariantResult::new("spectrum-symmetry", FOLDING_TOL);
    let mut multiplicity = InvariantResult::new("lambda-one-multiplicity", 0.0);
    let mut pr = InvariantResult::new("perfect-reconstruction", tol);
    let mut energy = if orthogonal {
        InvariantResult::new("q-orthogonality", tol)
    } else {
        InvariantResult::new("frame-bounds", FRAME_SLACK)
    };

    for i in 0..options.graphs {
        let g = battery_graph(i, options)?;
        let p = random_partition(g.n(), rng::derive_seed(options.seed, "battery-partition", i as u64))?;
        let (m, q) = if options.misuse {
            (normalized_laplacian(&g)?, SparseSym::identity(g.n()))
        } else {
            let m = operator(&g, options.operator)?;
            let q = build_block_diag_q(&m, &p)?;
            (m, q)
        };
        let basis = mq_eigendecompose(&m, &q)?;
        let case = || format!("graph {i} (n = {})", g.n());

        let f = if options.misuse {
            folding_residuals(&basis, &p, FOLDING_TOL)?
        } else {
            verify_spectral_folding(&basis, &p, FOLDING_TOL)?
        };
        folding.record(f.max_subspace_residual, f.passed, case);
        let s = spectrum_properties(&basis, &p)?;
        let outside = (-s.min).max(s.max - 2.0).max(0.0);
        range.record(outside, s.in_range, case);
        symmetry.record(s.reflection_error, s.reflection_error <= FOLDING_TOL, case);
        let shortfall = s.forced_near_one.saturating_sub(s.count_near_one) as f64;
        multiplicity.record(shortfall, shortfall == 0.0, case);

        let z;
        let ctx = match options.spec.mode {
            FilterMode::Dense => FilterContext::Spectral(&basis),
            FilterMode::Polynomial => {
                z = FundamentalOperator::new(m.clone(), q.clone(), SolverOptions::default())?;
                FilterContext::Polynomial(&z)
            }
        };
        let check = CheckOptions::new(options.trials, rng::derive_seed(options.seed, "battery-check", i as u64), tol);
        let r = check_pr(&options.spec, ctx, &p, check)?;
        pr.record(r.max_round_trip_error.max(r.max_distortion).max(r.max_alias), r.passed, case);

        let o = check_q_orthogonality(&options.spec, ctx, &p, check)?;
        if orthogonal {
            let worst = o.max_inner_product_deviation.max(o.max_adjoint_deviation);
            energy.record(worst, o.passed, case);
        } else {
            let excess = (fb.alpha - o.norm_ratio_min).max(o.norm_ratio_max - fb.beta).max(0.0);
            energy.record(excess, excess <= FRAME_SLACK, case);
        }
    }

    let mut invariants = vec![folding, range, symmetry, multiplicity, pr, energy];
    if options.bipartite {
        invariants.extend(bipartite_battery(options)?);
    }
    let passed = invariants.iter().all(|r| r.passed);
    Ok(VerifyReport { invariants, passed })
}

/// On bipartite graphs `𝓛` gives `Q = I` and folds; `L` gives `Q = D` and
/// the lazy bank sends constants to zero detail.
pub fn bipartite_battery(options: &BatteryOptions) -> Result<Vec<InvariantResult>> {
    let mut identity = InvariantResult::new("bipartite-q-identity", 0.0);
    let mut folding = InvariantResult::new("bipartite-folding", FOLDING_TOL);
    let mut degree = InvariantResult::new("bipartite-q-degree", 0.0);
    let mut zero_dc = InvariantResult::new("bipartite-zero-dc", ZERO_DC_TOL);
    let cases = options.graphs.clamp(1, 20);
    for i in 0..cases {
        let mut r = rng::stream(options.seed, "bipartite-size", i as u64);
        let n_a = r.random_range(3..=40);
        let n_b = r.random_range(3..=40);
        let (g, p) = random_bipartite(n_a, n_b, 0.15, rng::derive_seed(options.seed, "bipartite-graph", i as u64))?;
        let case = || format!("bipartite graph {i} ({n_a} + {n_b})");

        let nl = normalized_laplacian(&g)?;
        let q = build_block_diag_q(&nl, &p)?;
        let dev = q.add_scaled(-1.0, &SparseSym::identity(g.n()))?.max_abs();
        identity.record(dev, dev == 0.0, case);
        let basis = mq_eigendecompose(&nl, &q)?;
        let f = folding_residuals(&basis, &p, FOLDING_TOL)?;
        folding.record(f.max_subspace_residual, f.passed, case);

        let l = combinatorial_laplacian(&g);
        let q = build_block_diag_q(&l, &p)?;
        let dev = q.add_scaled(-1.0, &SparseSym::from_diagonal(&g.degrees()))?.max_abs();
        degree.record(dev, dev == 0.0, case);
        let z = FundamentalOperator::new(l, q, SolverOptions::default())?;
        let c = analyze(&lazy_spec(), FilterContext::Polynomial(&z), &p, &vec![1.0; g.n()])?;
        let worst = c.d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        zero_dc.record(worst, worst <= ZERO_DC_TOL, case);
    }
    Ok(vec![identity, folding, degree, zero_dc])
}

/// `n` standard-normal draws from a labelled stream.
pub fn random_signal(seed: u64, label: &str, index: u64, n: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, label, index);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// Partition with `|A| = n_a`, chosen uniformly.
pub fn partition_with_sizes(n: usize, n_a: usize, seed: u64) -> Result<Partition> {
    use rand::seq::SliceRandom;
    let mut in_a: Vec<bool> = (0..n).map(|i| i < n_a).collect();
    in_a.shuffle(&mut rng::stream(seed, "sized-partition", 0));
    Partition::new(in_a)
}
