//! Adaptive GFSS: reject when the statistic curve `t̂(ρ)` rises above the
//! threshold curve `τ(ρ)` for any `ρ > 0`.
//!
//! `t̂(ρ)` is piecewise linear with knots at the eigenvalues and `τ(ρ)` is of
//! the form `√(ρ²A + B) + D` between consecutive knots, so `τ − t̂` is convex
//! on every segment `[λ_j, λ_{j+1}]`. Checking the minimizer of each segment
//! decides the test exactly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectrum::{spectral_sum_s2, Spectrum};

/// `A − E²` at or below this (relative to `max(1, A)`) counts as `E² ≥ A`.
const DEGENERACY_TOL: f64 = 1e-14;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(
            "alpha",
            format!("must lie in (0, 1) (got {alpha})"),
        ))
    }
}

/// `log((p−1)/α)`, the union-bound log factor.
fn log_factor(spec: &Spectrum, alpha: f64) -> f64 {
    ((spec.p() - 1) as f64 / alpha).ln()
}

/// Threshold curve `τ(ρ) = 2(√(s₂(ρ)·L) + L)` with `L = log((p−1)/α)`.
pub fn tau(spec: &Spectrum, rho: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let s2 = spectral_sum_s2(spec, rho)?;
    let l = log_factor(spec, alpha);
    Ok(2.0 * ((s2 * l).sqrt() + l))
}

/// `t̂(ρ)` as a piecewise-linear function of `ρ`.
///
/// Segment `j` (1-based, `j = 1..p`) covers `λ_j ≤ ρ < λ_{j+1}` with
/// `λ₁ = 0` and `λ_{p+1} = ∞`; on it `t̂(ρ) = ρ·slope_j + intercept_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TstatCurve {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl TstatCurve {
    /// Knots `λ₂, …, λ_p`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[1..]
    }

    pub fn slope(&self, j: usize) -> f64 {
        self.slopes[j - 1]
    }

    pub fn intercept(&self, j: usize) -> f64 {
        self.intercepts[j - 1]
    }

    /// Segment index `max{i : λ_i ≤ ρ}`.
    pub fn segment(&self, rho: f64) -> usize {
        self.knots.partition_point(|&l| l <= rho).max(1)
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let j = self.segment(rho);
        rho * self.slope(j) + self.intercept(j)
    }
}

/// Builds the piecewise-linear statistic curve from the Fourier coefficients.
pub fn tstat_curve(spec: &Spectrum, y: &[f64]) -> Result<TstatCurve> {
    spec.require_connected()?;
    let coeffs = spec.transform(y)?;
    Ok(curve_from_coefficients(spec, &coeffs))
}

fn curve_from_coefficients(spec: &Spectrum, coeffs: &[f64]) -> TstatCurve {
    let lam = spec.eigenvalues();
    let p = lam.len();
    let excess: Vec<f64> = coeffs.iter().map(|b| b * b - 1.0).collect();
    let mut slopes = vec![0.0; p];
    let mut intercepts = vec![0.0; p];
    // slope_j = Σ_{i>j} excess_i/λ_i ; intercept_j = Σ_{i=2}^j excess_i
    let mut tail = 0.0;
    for j in (1..=p).rev() {
        slopes[j - 1] = tail;
        if j >= 2 {
            tail += excess[j - 1] / lam[j - 1];
        }
    }
    let mut head = 0.0;
    for j in 1..=p {
        if j >= 2 {
            head += excess[j - 1];
        }
        intercepts[j - 1] = head;
    }
    let mut knots = lam.to_vec();
    knots[0] = 0.0;
    TstatCurve {
        knots,
        slopes,
        intercepts,
    }
}

/// Per-segment quantities and the segment's minimizer of `τ − t̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotQuantities {
    pub j: usize,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub rho_j: f64,
}

impl KnotQuantities {
    pub fn tau(&self, rho: f64) -> f64 {
        (rho * rho * self.a + self.b).sqrt() + self.d
    }

    pub fn tstat(&self, rho: f64) -> f64 {
        rho * self.e + self.f
    }

    /// `t̂(ρ_j) − τ(ρ_j)`; positive means rejection.
    pub fn margin(&self) -> f64 {
        self.tstat(self.rho_j) - self.tau(self.rho_j)
    }
}

/// Minimizer of `√(ρ²A + B) − ρE` over `[lo, hi]`.
///
/// The derivative is `ρA/√(ρ²A + B) − E`, which increases from `−E` towards
/// `√A − E`. With `E ≤ 0` it is never negative, so the left end wins; with
/// `E ≥ √A` it is never positive, so the right end wins; otherwise the
/// stationary point `√(E²B / (A² − E²A))` is clamped into the interval.
fn segment_minimizer(a: f64, b: f64, e: f64, lo: f64, hi: f64) -> f64 {
    if e <= 0.0 {
        return lo;
    }
    if a - e * e <= DEGENERACY_TOL * a.max(1.0) {
        return hi;
    }
    let interior = (e * e * b / (a * a - e * e * a)).sqrt();
    if interior <= lo {
        lo
    } else if interior >= hi {
        hi
    } else {
        interior
    }
}

/// One candidate `ρ_j` per segment `j = 2..p`.
pub fn candidate_rhos(spec: &Spectrum, y: &[f64], alpha: f64) -> Result<Vec<KnotQuantities>> {
    check_alpha(alpha)?;
    let curve = tstat_curve(spec, y)?;
    Ok(knots_from_curve(spec, &curve, alpha))
}

fn knots_from_curve(spec: &Spectrum, curve: &TstatCurve, alpha: f64) -> Vec<KnotQuantities> {
    let lam = spec.eigenvalues();
    let p = lam.len();
    let l = log_factor(spec, alpha);
    let mut inv_sq_tail = vec![0.0; p + 1];
    for i in (1..p).rev() {
        inv_sq_tail[i] = inv_sq_tail[i + 1] + lam[i].powi(-2);
    }
    (2..=p)
        .map(|j| {
            // inv_sq_tail[j] = Σ_{i>j} λ_i⁻² in 1-based terms
            let a = 4.0 * l * inv_sq_tail[j];
            let b = 4.0 * (j - 1) as f64 * l;
            let d = 2.0 * l;
            let e = curve.slope(j);
            let f = curve.intercept(j);
            let lo = lam[j - 1];
            let hi = if j < p { lam[j] } else { lam[p - 1] };
            KnotQuantities {
                j,
                a,
                b,
                d,
                e,
                f,
                rho_j: segment_minimizer(a, b, e, lo, hi),
            }
        })
        .collect()
}

/// The knot at which the adaptive test rejects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub j: usize,
    pub rho_j: f64,
    pub tstat: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveResult {
    pub reject: bool,
    pub witness: Option<Witness>,
    /// `max_j t̂(ρ_j) − τ(ρ_j)`; the test rejects iff this is positive.
    pub score: f64,
    /// Every candidate row, for plotting both curves.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rows: Vec<Witness>,
}

/// Adaptive GFSS at level `α`. Rejects iff `τ(ρ_j) < t̂(ρ_j)` for some
/// `j`; the witness is the smallest such `j`.
pub fn adaptive_test(spec: &Spectrum, y: &[f64], alpha: f64) -> Result<AdaptiveResult> {
    adaptive_test_verbose(spec, y, alpha, false)
}

pub fn adaptive_test_verbose(
    spec: &Spectrum,
    y: &[f64],
    alpha: f64,
    verbose: bool,
) -> Result<AdaptiveResult> {
    let knots = candidate_rhos(spec, y, alpha)?;
    let row = |k: &KnotQuantities| Witness {
        j: k.j,
        rho_j: k.rho_j,
        tstat: k.tstat(k.rho_j),
        tau: k.tau(k.rho_j),
    };
    let witness = knots
        .iter()
        .find(|k| k.tau(k.rho_j) < k.tstat(k.rho_j))
        .map(row);
    let score = knots
        .iter()
        .map(KnotQuantities::margin)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AdaptiveResult {
        reject: witness.is_some(),
        witness,
        score,
        rows: if verbose {
            knots.iter().map(row).collect()
        } else {
            Vec::new()
        },
    })
}

/// `max_j t̂(ρ_j) − τ(ρ_j)` from precomputed Fourier coefficients; a scalar
/// statistic whose positivity is the adaptive decision.
pub fn adaptive_score_from_coefficients(
    spec: &Spectrum,
    coeffs: &[f64],
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    spec.require_connected()?;
    let curve = curve_from_coefficients(spec, coeffs);
    Ok(knots_from_curve(spec, &curve, alpha)
        .iter()
        .map(KnotQuantities::margin)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Power diagnostic for the adaptive test: the right-hand side of the type-2
/// error condition minus `τ(ρ*)`. A positive value means the condition
/// guaranteeing power `1 − γ` holds at `ρ*`. Never used for decisions.
pub fn power_margin(
    spec: &Spectrum,
    rho_star: f64,
    alpha: f64,
    mu: f64,
    sigma: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", "must lie in (0, 1)"));
    }
    let snr = mu / sigma;
    let lg = (2.0 / gamma).ln();
    let s2 = spectral_sum_s2(spec, rho_star)?;
    let rhs = snr * snr / 2.0 - 2.0 * snr * (2.0 * lg).sqrt() - 2.0 * (s2 * lg).sqrt();
    Ok(rhs - tau(spec, rho_star, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{energy_stat, gfss};
    use crate::graph::{path, random_connected};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn setup(seed: u64, p: usize) -> (Spectrum, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(p, 0.15, &mut rng).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let bump = rng.random_range(0.0..3.0);
        let y = (0..p)
            .map(|i| rng.sample::<f64, _>(StandardNormal) + if i < p / 4 { bump } else { 0.0 })
            .collect();
        (s, y)
    }

    #[test]
    fn tau_examples() {
        let s = Spectrum::of_graph(&path(3).unwrap()).unwrap();
        let l = (2.0f64 / 0.05).ln();
        let expected = 2.0 * ((10.0 / 9.0 * 40f64.ln()).sqrt() + 40f64.ln());
        assert!((tau(&s, 1.0, 0.05).unwrap() - expected).abs() < 1e-12);
        let sat = 2.0 * ((2.0 * l).sqrt() + l);
        assert!((tau(&s, 10.0, 0.05).unwrap() - sat).abs() < 1e-12);
        assert!((tau(&s, 1e-9, 0.05).unwrap() - 2.0 * l).abs() < 1e-6);
        assert!(tau(&s, 1.0, 1.0).is_err());
        assert!(tau(&s, 1.0, 0.0).is_err());
    }

    #[test]
    fn curve_agrees_with_gfss() {
        let (s, y) = setup(1, 30);
        let curve = tstat_curve(&s, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let rho = rng.random_range(1e-4..1.5 * s.lambda_max());
            let a = curve.eval(rho);
            let b = gfss(&s, &y, rho).unwrap();
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
        for &knot in curve.breakpoints() {
            assert!((curve.eval(knot) - gfss(&s, &y, knot).unwrap()).abs() < 1e-8);
        }
        let p = s.p();
        assert_eq!(curve.slope(p), 0.0);
        let last = curve.eval(s.lambda_max() * 2.0);
        assert!((last - (energy_stat(&y) - (p - 1) as f64)).abs() < 1e-8);
        // first segment passes through the origin
        assert_eq!(curve.intercept(1), 0.0);
        assert!(
            (curve.eval(1e-6 * s.lambda2()) - 1e-6 * s.lambda2() * curve.slope(1)).abs() < 1e-12
        );
    }

    #[test]
    fn knot_taus_match_threshold_curve() {
        let (s, y) = setup(3, 25);
        for k in candidate_rhos(&s, &y, 0.05).unwrap() {
            let direct = tau(&s, k.rho_j, 0.05).unwrap();
            assert!((k.tau(k.rho_j) - direct).abs() < 1e-10, "j = {}", k.j);
            assert!((k.tstat(k.rho_j) - gfss(&s, &y, k.rho_j).unwrap()).abs() < 1e-8);
            assert!(k.a >= 0.0 && k.b > 0.0 && k.d > 0.0);
            let lam = s.eigenvalues();
            let hi = if k.j < s.p() { lam[k.j] } else { lam[k.j - 1] };
            assert!(k.rho_j >= lam[k.j - 1] && k.rho_j <= hi);
        }
    }

    #[test]
    fn candidates_minimize_each_segment() {
        for seed in 0..20 {
            let (s, y) = setup(100 + seed, 20);
            let lam = s.eigenvalues();
            for k in candidate_rhos(&s, &y, 0.1).unwrap() {
                if k.j == s.p() {
                    continue;
                }
                let (lo, hi) = (lam[k.j - 1], lam[k.j]);
                let best = k.tau(k.rho_j) - k.tstat(k.rho_j);
                let gap = |r: f64| k.tau(r) - k.tstat(r);
                for g in 0..=100 {
                    let r = lo + (hi - lo) * g as f64 / 100.0;
                    assert!(best <= gap(r) + 1e-10, "seed {seed} j {}", k.j);
                }
                // convexity: second differences on a fine grid
                let h = (hi - lo) / 200.0;
                for g in 1..200 {
                    let r = lo + h * g as f64;
                    let second = gap(r - h) - 2.0 * gap(r) + gap(r + h);
                    assert!(second >= -1e-9 * gap(r).abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn constant_signal_never_rejects() {
        let (s, _) = setup(7, 15);
        let y = vec![2.0; 15];
        let knots = candidate_rhos(&s, &y, 0.05).unwrap();
        for k in &knots {
            assert!(k.e <= 0.0);
            assert_eq!(k.rho_j, s.eigenvalues()[k.j - 1]);
        }
        let last = knots.last().unwrap();
        assert_eq!(last.j, 15);
        assert_eq!(last.a, 0.0);
        assert_eq!(last.rho_j, s.lambda_max());
        let res = adaptive_test(&s, &y, 0.05).unwrap();
        assert!(!res.reject && res.witness.is_none() && res.score < 0.0);
    }

    #[test]
    fn strong_signal_rejects_with_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_connected(40, 0.1, &mut rng).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let y: Vec<f64> = (0..40).map(|i| if i < 10 { 6.0 } else { 0.0 }).collect();
        let res = adaptive_test_verbose(&s, &y, 0.05, true).unwrap();
        assert!(res.reject);
        let w = res.witness.unwrap();
        assert!(w.tau < w.tstat);
        assert_eq!(res.rows.len(), 39);
        assert!(res
            .rows
            .iter()
            .take_while(|r| r.j < w.j)
            .all(|r| r.tau >= r.tstat));
        let coeffs = s.transform(&y).unwrap();
        assert_eq!(
            adaptive_score_from_coefficients(&s, &coeffs, 0.05).unwrap(),
            res.score
        );
    }

    #[test]
    fn power_margin_grows_with_snr() {
        let s = Spectrum::of_graph(&path(20).unwrap()).unwrap();
        let weak = power_margin(&s, 0.1, 0.05, 1.0, 1.0, 0.1).unwrap();
        let strong = power_margin(&s, 0.1, 0.05, 50.0, 1.0, 0.1).unwrap();
        assert!(weak < 0.0 && strong > 0.0);
    }
}
