//! Two-channel analysis and synthesis on a vertex bipartition.
//!
//! Analysis keeps `H₀x` on A and `H₁x` on B; synthesis upsamples each
//! channel and sums `G₀` and `G₁` of them. Filters are spectral in the
//! (M,Q)-GFT, applied either through a dense basis or as polynomials in
//! `Z = Q⁻¹M`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gft::{dense_spectral_filter, FundamentalOperator, GftBasis};
use crate::graph::Partition;
use crate::kernel::FilterKernel;
use crate::rng;
use crate::sparse::{dot, spmv, SparseSym};

/// Points used to approximate inf/sup over `[0, 2]`.
pub const FRAME_GRID_POINTS: usize = 10_000;

pub const DENSE_TOLERANCE: f64 = 1e-8;
pub const POLYNOMIAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// `U h(Λ) UᵀQ` from a full eigendecomposition.
    Dense,
    /// Horner evaluation in `Z`; needs polynomial kernels.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Lazy,
    OrthoCosine,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankSpec {
    pub h0: FilterKernel,
    pub h1: FilterKernel,
    pub g0: FilterKernel,
    pub g1: FilterKernel,
    pub mode: FilterMode,
    pub family: Family,
}

impl FilterBankSpec {
    pub fn new(
        [h0, h1, g0, g1]: [FilterKernel; 4],
        mode: FilterMode,
        family: Family,
    ) -> Result<Self> {
        Self {
            h0,
            h1,
            g0,
            g1,
            mode: FilterMode::Dense,
            family,
        }
        .with_mode(mode)
    }

    /// Custom bank from ascending polynomial coefficients.
    pub fn polynomial(coefficients: [Vec<f64>; 4], mode: FilterMode) -> Result<Self> {
        Self::new(coefficients.map(FilterKernel::polynomial), mode, Family::Custom)
    }

    pub fn with_mode(mut self, mode: FilterMode) -> Result<Self> {
        if mode == FilterMode::Polynomial {
            if let Some(k) = self.kernels().into_iter().find(|k| !k.is_polynomial()) {
                return Err(Error::NotPolynomial(k.name()));
            }
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn kernels(&self) -> [&FilterKernel; 4] {
        [&self.h0, &self.h1, &self.g0, &self.g1]
    }

    pub fn default_tolerance(&self) -> f64 {
        match self.mode {
            FilterMode::Dense => DENSE_TOLERANCE,
            FilterMode::Polynomial => POLYNOMIAL_TOLERANCE,
        }
    }
}

/// `H₀ = I, H₁ = Z, G₀ = 2I − Z, G₁ = I`.
pub fn lazy_spec() -> FilterBankSpec {
    FilterBankSpec {
        h0: FilterKernel::polynomial([1.0]),
        h1: FilterKernel::polynomial([0.0, 1.0]),
        g0: FilterKernel::polynomial([2.0, -1.0]),
        g1: FilterKernel::polynomial([1.0]),
        mode: FilterMode::Polynomial,
        family: Family::Lazy,
    }
}

/// `h₀ = √2 cos(πλ/4)`, `h₁ = h₀(2 − λ)`, `gᵢ = hᵢ`. Dense mode only.
pub fn orthogonal_cosine_spec() -> FilterBankSpec {
    FilterBankSpec {
        h0: FilterKernel::Cosine,
        h1: FilterKernel::Sine,
        g0: FilterKernel::Cosine,
        g1: FilterKernel::Sine,
        mode: FilterMode::Dense,
        family: Family::OrthoCosine,
    }
}

/// What a filter needs to be applied: a dense basis or the fundamental
/// operator.
#[derive(Clone, Copy)]
pub enum FilterContext<'a> {
    Spectral(&'a GftBasis),
    Polynomial(&'a FundamentalOperator),
}

impl<'a> FilterContext<'a> {
    pub fn n(&self) -> usize {
        match self {
            FilterContext::Spectral(b) => b.n(),
            FilterContext::Polynomial(z) => z.n(),
        }
    }

    pub fn q(&self) -> &'a SparseSym {
        match self {
            FilterContext::Spectral(b) => b.q(),
            FilterContext::Polynomial(z) => z.q(),
        }
    }

    pub fn mode(&self) -> FilterMode {
        match self {
            FilterContext::Spectral(_) => FilterMode::Dense,
            FilterContext::Polynomial(_) => FilterMode::Polynomial,
        }
    }

    /// Eigenvalues when a basis is available.
    pub fn spectrum(&self) -> Option<&'a [f64]> {
        match self {
            FilterContext::Spectral(b) => Some(b.eigenvalues()),
            FilterContext::Polynomial(_) => None,
        }
    }
}

/// Horner's scheme in `Z`.
fn polynomial_filter(coefficients: &[f64], z: &FundamentalOperator, x: &[f64]) -> Result<Vec<f64>> {
    let Some((&top, rest)) = coefficients.split_last() else {
        return Ok(vec![0.0; x.len()]);
    };
    let mut y: Vec<f64> = x.iter().map(|v| top * v).collect();
    for &c in rest.iter().rev() {
        y = z.apply(&y)?;
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += c * xi;
        }
    }
    Ok(y)
}

/// `h(Z) x` in the context's representation.
pub fn apply_filter(kernel: &FilterKernel, ctx: FilterContext<'_>, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != ctx.n() {
        return Err(Error::DimensionMismatch {
            expected: ctx.n(),
            got: x.len(),
        });
    }
    match ctx {
        FilterContext::Spectral(b) => dense_spectral_filter(b, kernel, x),
        FilterContext::Polynomial(z) => {
            let coefficients = kernel
                .coefficients()
                .ok_or_else(|| Error::NotPolynomial(kernel.name()))?;
            polynomial_filter(coefficients, z, x)
        }
    }
}

/// Approximation coefficients on A and detail coefficients on B, each in
/// ascending vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoefficients {
    pub a: Vec<f64>,
    pub d: Vec<f64>,
}

impl ChannelCoefficients {
    pub fn len(&self) -> usize {
        self.a.len() + self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients placed back on their vertices (A entries then B entries
    /// interleaved by vertex id).
    pub fn to_vertex_order(&self, p: &Partition) -> Result<Vec<f64>> {
        p.merge(&self.a, &self.d)
    }

    pub fn from_vertex_order(p: &Partition, v: &[f64]) -> Self {
        let (a, d) = p.split(v);
        Self { a, d }
    }

    /// `‖a‖²_{Q_AA} + ‖d‖²_{Q_BB}` generalised to two coefficient sets.
    pub fn q_inner(&self, other: &Self, q: &SparseSym, p: &Partition) -> Result<f64> {
        let x = self.to_vertex_order(p)?;
        let y = other.to_vertex_order(p)?;
        q_inner(q, &x, &y)
    }
}

fn check_mode(spec: &FilterBankSpec, ctx: FilterContext<'_>) -> Result<()> {
    match (spec.mode, ctx.mode()) {
        (FilterMode::Dense, FilterMode::Dense) | (FilterMode::Polynomial, FilterMode::Polynomial) => Ok(()),
        (FilterMode::Dense, _) => Err(Error::ModeMismatch("dense spec needs a spectral basis")),
        (FilterMode::Polynomial, _) => Err(Error::ModeMismatch("polynomial spec needs a fundamental operator")),
    }
}

fn check_partition(ctx: FilterContext<'_>, p: &Partition) -> Result<()> {
    if p.n() != ctx.n() {
        return Err(Error::DimensionMismatch {
            expected: ctx.n(),
            got: p.n(),
        });
    }
    Ok(())
}

/// `T_a x = [S_A H₀ x; S_B H₁ x]`.
pub fn analyze(
    spec: &FilterBankSpec,
    ctx: FilterContext<'_>,
    p: &Partition,
    x: &[f64],
) -> Result<ChannelCoefficients> {
    check_mode(spec, ctx)?;
    check_partition(ctx, p)?;
    let low = apply_filter(&spec.h0, ctx, x)?;
    let high = apply_filter(&spec.h1, ctx, x)?;
    Ok(ChannelCoefficients {
        a: p.split(&low).0,
        d: p.split(&high).1,
    })
}

/// `T_s c = G₀ S_Aᵀ a + G₁ S_Bᵀ d`.
pub fn synthesize(
    spec: &FilterBankSpec,
    ctx: FilterContext<'_>,
    p: &Partition,
    c: &ChannelCoefficients,
) -> Result<Vec<f64>> {
    check_mode(spec, ctx)?;
    check_partition(ctx, p)?;
    let up_a = p.merge(&c.a, &vec![0.0; p.b_len()])?;
    let up_d = p.merge(&vec![0.0; p.a_len()], &c.d)?;
    let low = apply_filter(&spec.g0, ctx, &up_a)?;
    let high = apply_filter(&spec.g1, ctx, &up_d)?;
    Ok(low.iter().zip(&high).map(|(a, b)| a + b).collect())
}

/// [`analyze`] over several channels in parallel.
pub fn analyze_channels(
    spec: &FilterBankSpec,
    ctx: FilterContext<'_>,
    p: &Partition,
    channels: &[Vec<f64>],
) -> Result<Vec<ChannelCoefficients>> {
    channels.par_iter().map(|x| analyze(spec, ctx, p, x)).collect()
}

/// [`synthesize`] over several channels in parallel.
pub fn synthesize_channels(
    spec: &FilterBankSpec,
    ctx: FilterContext<'_>,
    p: &Partition,
    coefficients: &[ChannelCoefficients],
) -> Result<Vec<Vec<f64>>> {
    coefficients.par_iter().map(|c| synthesize(spec, ctx, p, c)).collect()
}

fn q_inner(q: &SparseSym, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(dot(&spmv(q, x)?, y))
}

fn q_norm(q: &SparseSym, x: &[f64]) -> Result<f64> {
    Ok(q_inner(q, x, x)?.max(0.0).sqrt())
}

fn gaussian_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl CheckOptions {
    pub fn new(trials: usize, seed: u64, tolerance: f64) -> Self {
        Self {
            trials,
            seed,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    /// `"spectrum"` when a basis supplied the eigenvalues, else `"grid"`.
    pub evaluated_on: String,
    pub points: usize,
    /// `max |h₀g₀ + h₁g₁ − 2|`.
    pub max_distortion: f64,
    /// `max |h₀(λ)g₀(2−λ) − h₁(λ)g₁(2−λ)|`.
    pub max_alias: f64,
    /// `max ‖T_s T_a x − x‖₂ / ‖x‖₂` over random signals.
    pub max_round_trip_error: f64,
    pub trials: usize,
    pub tolerance: f64,
    pub analytic_passed: bool,
    pub round_trip_passed: bool,
    pub passed: bool,
}

fn lambda_grid() -> Vec<f64> {
    (0..FRAME_GRID_POINTS)
        .map(|i| 2.0 * i as f64 / (FRAME_GRID_POINTS - 1) as f64)
        .collect()
}

/// Distortion and alias terms at each `λ`.
pub fn spectral_pr_violations(spec: &FilterBankSpec, lambdas: &[f64]) -> (f64, f64) {
    lambdas.iter().fold((0.0f64, 0.0f64), |(dist, alias), &l| {
        let d = spec.h0.eval(l) * spec.g0.eval(l) + spec.h1.eval(l) * spec.g1.eval(l) - 2.0;
        let a = spec.h0.eval(l) * spec.g0.eval(2.0 - l) - spec.h1.eval(l) * spec.g1.eval(2.0 - l);
        (dist.max(d.abs()), alias.max(a.abs()))
    })
}

/// Evaluates the spectral PR conditions on the spectrum (or, without a
/// basis, on a grid of `[0, 2]`) and measures random round trips.
pub fn check_pr(
    spec: &FilterBankSpec,
    ctx: FilterContext<'_>,
    p: &Partition,
    options: CheckOptions,
) -> Result<PrReport> {
    let (evaluated_on, lambdas) = match ctx.spectrum() {
        Some(s) => ("spectrum", s.to_vec()),
        None => ("grid", lambda_grid()),
    };
    let (max_distortion, max_alias) = spectral_pr_violations(spec, &lambdas);

    let mut rng = rng::stream(options.seed, "check-pr", 0);
    let mut max_round_trip_error = 0.0f64;
    for _ in 0..options.trials {
        let x = gaussian_vector(&mut rng, ctx.n());
        let c = analyze(spec, ctx, p, &x)?;
        let y = synthesize(spec, ctx, p, &c)?;
        let err = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            / x.iter().map(|v| v * v).sum::<f64>().sqrt();
        max_round_trip_error = max_round_trip_error.max(err);
    }
    let analytic_passed = max_distortion <= options.tolerance && max_alias <= options.tolerance;
    let round_trip_passed = max_round_trip_error <= options.tolerance;
    Ok(PrReport {
        evaluated_on: evaluated_on.into(),
        points: lambdas.len(),
        max_distortion,
        max_alias,
        max_round_trip_error,
        trials: options.trials,
        tolerance: options.tolerance,
        analytic_passed,
        round_trip_passed,
        passed: analytic_passed && round_trip_passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    /// `max |⟨T_a x, T_a y⟩_Q − ⟨x, y⟩_Q| / (‖x‖_Q ‖y‖_Q)`.
    pub max_inner_product_deviation: f64,
    /// `max |⟨T_s c, x⟩_Q − ⟨c, T_a x⟩_Q| / (‖c‖_Q ‖x‖_Q)`: how far `T_s`
    /// is from `Q⁻¹T_aᵀQ`.
    pub max_adjoint_deviation: f64,
    /// Range of `‖T_a x‖_Q / ‖x‖_Q` over the sampled signals.
    pub norm_ratio_min: f64,
    pub norm_ratio_max: f64,
    pub frame_bounds: FrameBounds,
    pub trials: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Random-pair test of Q-orthogonality of `T_a` and of the adjoint relation
/// between synthesis and analysis. Channel coefficients are measured with
/// `Q` permuted to (A, B) block order.
pub fn check_q_orthogonality(
    spec: &FilterBankSpec,
    ctx: FilterContext<'_>,
    p: &Partition,
    options: CheckOptions,
) -> Result<OrthogonalityReport> {
    let q = ctx.q();
    let n = ctx.n();
    let mut rng = rng::stream(options.seed, "check-orthogonality", 0);
    let mut max_ip = 0.0f64;
    let mut max_adj = 0.0f64;
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    for _ in 0..options.trials {
        let x = gaussian_vector(&mut rng, n);
        let y = gaussian_vector(&mut rng, n);
        let tx = analyze(spec, ctx, p, &x)?;
        let ty = analyze(spec, ctx, p, &y)?;
        let (nx, ny) = (q_norm(q, &x)?, q_norm(q, &y)?);
        let lhs = tx.q_inner(&ty, q, p)?;
        max_ip = max_ip.max((lhs - q_inner(q, &x, &y)?).abs() / (nx * ny));

        let ratio = tx.q_inner(&tx, q, p)?.max(0.0).sqrt() / nx;
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);

        let c = ChannelCoefficients::from_vertex_order(p, &gaussian_vector(&mut rng, n));
        let tsc = synthesize(spec, ctx, p, &c)?;
        let nc = c.q_inner(&c, q, p)?.max(0.0).sqrt();
        let adj = (q_inner(q, &tsc, &x)? - c.q_inner(&tx, q, p)?).abs() / (nc * nx);
        max_adj = max_adj.max(adj);
    }
    Ok(OrthogonalityReport {
        max_inner_product_deviation: max_ip,
        max_adjoint_deviation: max_adj,
        norm_ratio_min: ratio_min,
        norm_ratio_max: ratio_max,
        frame_bounds: frame_bounds(spec),
        trials: options.trials,
        tolerance: options.tolerance,
        passed: max_ip <= options.tolerance && max_adj <= options.tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub alpha: f64,
    pub beta: f64,
}

/// `α² = ½ inf (h₀² + h₁²)`, `β² = ½ sup (h₀² + h₁²)` over an evenly spaced
/// grid of [`FRAME_GRID_POINTS`] points on `[0, 2]`, endpoints included.
pub fn frame_bounds(spec: &FilterBankSpec) -> FrameBounds {
    let (lo, hi) = lambda_grid()
        .into_iter()
        .map(|l| 0.5 * (spec.h0.eval(l).powi(2) + spec.h1.eval(l).powi(2)))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    FrameBounds {
        alpha: lo.sqrt(),
        beta: hi.sqrt(),
    }
}

/// A filter-bank conjugated by `D^{1/2}`: every filter `H` acts as
/// `D^{-1/2} H D^{1/2}`, with the scaling applied on the vertices where
/// each coefficient lives.
///
/// On a normalized-Laplacian bank, `D^{-1/2} h(𝓛) D^{1/2} = h(D⁻¹L)`, so a
/// constant input lands in the null space of `H₁` and the detail channel
/// vanishes, while a constant stays constant through `H₀ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDcFilterBank {
    spec: FilterBankSpec,
    sqrt_degrees: Vec<f64>,
}

pub fn zero_dc_wrap(spec: FilterBankSpec, degrees: &[f64]) -> Result<ZeroDcFilterBank> {
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroDegree(i));
    }
    Ok(ZeroDcFilterBank {
        spec,
        sqrt_degrees: degrees.iter().map(|d| d.sqrt()).collect(),
    })
}

impl ZeroDcFilterBank {
    pub fn spec(&self) -> &FilterBankSpec {
        &self.spec
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.sqrt_degrees.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sqrt_degrees.len(),
                got: n,
            });
        }
        Ok(())
    }

    pub fn analyze(&self, ctx: FilterContext<'_>, p: &Partition, x: &[f64]) -> Result<ChannelCoefficients> {
        self.check_len(x.len())?;
        let scaled: Vec<f64> = x.iter().zip(&self.sqrt_degrees).map(|(v, s)| v * s).collect();
        let c = analyze(&self.spec, ctx, p, &scaled)?;
        let v = c.to_vertex_order(p)?;
        let unscaled: Vec<f64> = v.iter().zip(&self.sqrt_degrees).map(|(v, s)| v / s).collect();
        Ok(ChannelCoefficients::from_vertex_order(p, &unscaled))
    }

    pub fn synthesize(&self, ctx: FilterContext<'_>, p: &Partition, c: &ChannelCoefficients) -> Result<Vec<f64>> {
        self.check_len(p.n())?;
        let v = c.to_vertex_order(p)?;
        let scaled: Vec<f64> = v.iter().zip(&self.sqrt_degrees).map(|(v, s)| v * s).collect();
        let y = synthesize(&self.spec, ctx, p, &ChannelCoefficients::from_vertex_order(p, &scaled))?;
        Ok(y.iter().zip(&self.sqrt_degrees).map(|(v, s)| v / s).collect())
    }
}
