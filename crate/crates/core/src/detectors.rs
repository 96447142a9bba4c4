//! Test statistics: the GFSS (eigenbasis and projection-plus-solver paths),
//! the energy, max and aggregate baselines, the per-cluster likelihood ratio,
//! the exhaustive GLR oracle and the spectral scan statistic.

use std::cmp::Ordering;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::spectrum::{gfss_weights, spectral_sum_s1, Spectrum};

/// Default vertex limit for [`glr_scan`].
pub const GLR_DEFAULT_LIMIT: usize = 18;

/// One real observation per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(invalid("signal", format!("entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    /// Checks the signal length against a graph's vertex count.
    pub fn for_graph(values: Vec<f64>, p: usize) -> Result<Self> {
        if values.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Signal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome of running one detector on one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub method: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zscore: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_perm: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DetectionResult {
    pub fn new(method: impl Into<String>, statistic: f64) -> Self {
        Self {
            method: method.into(),
            statistic,
            threshold: None,
            p_value: None,
            reject: None,
            rho: None,
            zscore: None,
            alpha: None,
            sigma: None,
            n_perm: None,
            seed: None,
        }
    }

    /// Sets the threshold and the decision `statistic > threshold`.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self.reject = Some(self.statistic > threshold);
        self
    }
}

fn check_len(spec: &Spectrum, y: &[f64]) -> Result<()> {
    if y.len() != spec.p() {
        return Err(Error::DimensionMismatch {
            expected: spec.p(),
            got: y.len(),
        });
    }
    Ok(())
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// Graph Fourier transform `Uᵀy`.
pub fn graph_fourier(spec: &Spectrum, y: &[f64]) -> Result<Vec<f64>> {
    spec.transform(y)
}

/// GFSS `Σ_{i≥2} min{1, ρ/λ_i}((u_iᵀy)² − 1)` from precomputed Fourier
/// coefficients.
pub fn gfss_from_coefficients(spec: &Spectrum, coeffs: &[f64], rho: f64) -> Result<f64> {
    let w = gfss_weights(spec, rho)?;
    Ok(w.iter()
        .zip(&coeffs[1..])
        .map(|(w, b)| w * (b * b - 1.0))
        .sum())
}

/// Graph Fourier scan statistic.
pub fn gfss(spec: &Spectrum, y: &[f64], rho: f64) -> Result<f64> {
    check_len(spec, y)?;
    gfss_from_coefficients(spec, &spec.transform(y)?, rho)
}

/// Applies the Laplacian pseudoinverse on the complement of the constant
/// vector via a factorization of `Δ + 11ᵀ/p`.
pub struct LaplacianSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl LaplacianSolver {
    pub fn new(g: &Graph) -> Result<Self> {
        g.require_connected()?;
        let p = g.p();
        let grounded = g.laplacian() + DMatrix::from_element(p, p, 1.0 / p as f64);
        let chol = grounded.cholesky().ok_or_else(|| {
            Error::EigenFailure("grounded Laplacian not positive definite".into())
        })?;
        Ok(Self { chol })
    }

    /// `Δ†v` for `v` orthogonal to the constant vector.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.chol
            .solve(&DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }
}

/// GFSS through the top-`j` projection and a Laplacian solve:
/// `yᵀP_j y + ρ·yᵀ(I−P_j)Δ†(I−P_j)y − Σ min{1, ρ/λ_i}` with
/// `j = max{i : λ_i < ρ}`.
pub fn gfss_via_projection(g: &Graph, spec: &Spectrum, y: &[f64], rho: f64) -> Result<f64> {
    gfss_via_projection_with(&LaplacianSolver::new(g)?, spec, y, rho)
}

/// As [`gfss_via_projection`] with a reusable solver.
pub fn gfss_via_projection_with(
    solver: &LaplacianSolver,
    spec: &Spectrum,
    y: &[f64],
    rho: f64,
) -> Result<f64> {
    check_len(spec, y)?;
    let offset = spectral_sum_s1(spec, rho)?;
    // number of eigenvalues strictly below ρ, counting λ₁ = 0
    let j = spec.eigenvalues().partition_point(|&l| l < rho).max(1);

    let ybar = mean(y);
    let mut residual: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let mut projected = 0.0;
    let u = spec.eigenvectors();
    for i in 1..j {
        let col = u.column(i);
        let c: f64 = col.iter().zip(y).map(|(a, b)| a * b).sum();
        projected += c * c;
        for (r, a) in residual.iter_mut().zip(col.iter()) {
            *r -= c * a;
        }
    }
    let solved = solver.solve(&residual);
    let tail: f64 = residual.iter().zip(&solved).map(|(a, b)| a * b).sum();
    Ok(projected + rho * tail - offset)
}

/// Centered energy `‖y − ȳ1‖²`.
pub fn energy_stat(y: &[f64]) -> f64 {
    let m = mean(y);
    y.iter().map(|v| (v - m).powi(2)).sum()
}

/// `max_i |y_i − ȳ|`.
pub fn max_stat(y: &[f64]) -> f64 {
    let m = mean(y);
    y.iter().map(|v| (v - m).abs()).fold(0.0, f64::max)
}

/// `1ᵀy`.
pub fn aggregate_stat(y: &[f64]) -> f64 {
    y.iter().sum()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be positive (got {sigma})")))
    }
}

/// `2 log Λ_C = p(Σ_{v∈C} ỹ_v)² / (σ²|C||C̄|)`.
pub fn lr_stat(y: &[f64], c: &VertexSet, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if c.p() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: c.p(),
        });
    }
    let m = mean(y);
    let s: f64 = c.members().iter().map(|&v| y[v] - m).sum();
    let p = y.len() as f64;
    Ok(p * s * s / (sigma * sigma * c.len() as f64 * c.complement_len() as f64))
}

/// Result of the exhaustive GLR scan.
#[derive(Debug, Clone, PartialEq)]
pub struct GlrResult {
    /// `max_{C ∈ 𝒞(ρ)} 2σ² log Λ_C`.
    pub value: f64,
    pub set: VertexSet,
}

/// Exhaustive GLR over every bipartition with cut sparsity at most `ρ`,
/// limited to [`GLR_DEFAULT_LIMIT`] vertices.
pub fn glr_scan(g: &Graph, y: &[f64], rho: f64, sigma: f64) -> Result<GlrResult> {
    glr_scan_with_limit(g, y, rho, sigma, GLR_DEFAULT_LIMIT)
}

#[derive(Clone, Copy)]
struct Candidate {
    value: f64,
    mask: u64,
}

/// Lexicographic order of the sorted member lists encoded by two masks.
fn lex_cmp(a: u64, b: u64) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let low = (a ^ b).trailing_zeros();
    let (holder, other) = if a >> low & 1 == 1 { (a, b) } else { (b, a) };
    // `holder` lists the lowest differing vertex; it precedes `other` unless
    // `other` ends there.
    let holder_first = other >> low != 0;
    match (holder == a, holder_first) {
        (true, true) | (false, false) => Ordering::Less,
        _ => Ordering::Greater,
    }
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => match x.value.total_cmp(&y.value) {
            Ordering::Greater => Some(x),
            Ordering::Less => Some(y),
            Ordering::Equal => Some(if lex_cmp(x.mask, y.mask) == Ordering::Less {
                x
            } else {
                y
            }),
        },
    }
}

pub fn glr_scan_with_limit(
    g: &Graph,
    y: &[f64],
    rho: f64,
    sigma: f64,
    limit: usize,
) -> Result<GlrResult> {
    check_sigma(sigma)?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(invalid("rho", format!("must be positive (got {rho})")));
    }
    let p = g.p();
    if y.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: y.len(),
        });
    }
    if p > limit.min(63) {
        return Err(Error::TooLarge { p, limit });
    }
    if p < 2 {
        return Err(invalid("graph", "need at least 2 vertices"));
    }
    g.require_connected()?;

    let m = mean(y);
    let centered: Vec<f64> = y.iter().map(|v| v - m).collect();
    let edges: Vec<(u64, u64, f64)> = g
        .edges()
        .iter()
        .map(|e| (1u64 << e.u, 1u64 << e.v, e.w))
        .collect();
    let pf = p as f64;
    let full = (1u64 << p) - 1;

    // Sets containing vertex 0 cover every bipartition once; both the LR and
    // the sparsity are symmetric under complement, and the member list
    // containing 0 is the lexicographically smaller of the pair.
    let best = (0..1u64 << (p - 1))
        .into_par_iter()
        .map(|half| (half << 1) | 1)
        .filter(|&mask| mask != full)
        .map(|mask| {
            let size = mask.count_ones() as f64;
            let denom = size * (pf - size);
            let cut: f64 = edges
                .iter()
                .filter(|(a, b, _)| (mask & a == 0) != (mask & b == 0))
                .map(|e| e.2)
                .sum();
            if pf * cut / denom > rho {
                return None;
            }
            let s: f64 = (0..p)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| centered[i])
                .sum();
            Some(Candidate {
                value: pf * s * s / denom,
                mask,
            })
        })
        .reduce(|| None, better);

    let best = best.ok_or(Error::EmptyClass { rho })?;
    Ok(GlrResult {
        value: best.value,
        set: VertexSet::from_mask(p, best.mask)?,
    })
}

const SSS_MAX_ITERS: usize = 400;
const SSS_GAP_TOL: f64 = 1e-9;

/// Spectral scan statistic `ŝ = sup (xᵀy)²` over `‖x‖ ≤ 1`, `xᵀΔx ≤ ρ`,
/// `xᵀ1 = 0`.
///
/// In the eigenbasis this is `max bᵀz` over the intersection of the unit
/// ball and the ellipsoid `zᵀΛz ≤ ρ`, with `b_i = u_iᵀy`. Lagrangian duality
/// turns it into the convex scalar problem
/// `min_{θ∈[0,1]} Σ b_i² / (θ + (1−θ)λ_i/ρ)`, solved by bisection on the
/// sign of the derivative. The primal point `z_i ∝ b_i / (θ + (1−θ)λ_i/ρ)`
/// rescaled to feasibility certifies the value.
pub fn sss(spec: &Spectrum, y: &[f64], rho: f64) -> Result<f64> {
    check_len(spec, y)?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(invalid("rho", format!("must be positive (got {rho})")));
    }
    spec.require_connected()?;
    let coeffs = spec.transform(y)?;
    let b2: Vec<f64> = coeffs[1..].iter().map(|b| b * b).collect();
    let ratio: Vec<f64> = spec.eigenvalues()[1..].iter().map(|l| l / rho).collect();
    let energy: f64 = b2.iter().sum();
    if energy == 0.0 {
        return Ok(0.0);
    }

    let denom = |theta: f64, r: f64| theta + (1.0 - theta) * r;
    let dual = |theta: f64| -> f64 {
        b2.iter()
            .zip(&ratio)
            .map(|(b, r)| b / denom(theta, *r))
            .sum()
    };
    let slope = |theta: f64| -> f64 {
        b2.iter()
            .zip(&ratio)
            .map(|(b, r)| b * (r - 1.0) / denom(theta, *r).powi(2))
            .sum()
    };

    let theta = if slope(1.0) <= 0.0 {
        1.0
    } else if slope(0.0) >= 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut iters = 0;
        while hi - lo > f64::EPSILON * hi.max(1e-300) && iters < SSS_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        if dual(lo) < dual(hi) {
            lo
        } else {
            hi
        }
    };
    let upper = dual(theta);

    // primal certificate
    let z: Vec<f64> = coeffs[1..]
        .iter()
        .zip(&ratio)
        .map(|(b, r)| b / denom(theta, *r))
        .collect();
    let norm2: f64 = z.iter().map(|v| v * v).sum();
    let ell: f64 = z.iter().zip(&ratio).map(|(v, r)| v * v * r).sum();
    let scale = norm2.max(ell).sqrt();
    let lower = (coeffs[1..].iter().zip(&z).map(|(b, v)| b * v).sum::<f64>() / scale).powi(2);
    let gap = (upper - lower) / upper;
    if gap.is_nan() || gap > SSS_GAP_TOL {
        return Err(Error::NoConvergence(format!(
            "duality gap {gap:e} at theta = {theta} (dual {upper}, primal {lower}, |z|^2 = {norm2}, z'Lz/rho = {ell})"
        )));
    }
    Ok(upper)
}
