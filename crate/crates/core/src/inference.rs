//! Thresholds and p-values for the GFSS.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::detectors::gfss_from_coefficients;
use crate::error::{invalid, Error, Result};
use crate::spectrum::{gfss_weights, spectral_sum_s2, Spectrum};
use crate::substream;

/// Nonnegative weights of a centered weighted chi-square sum
/// `Z = Σ a_i (χ²₁ − 1)`, with cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSqWeights {
    a: Vec<f64>,
    l2: f64,
    linf: f64,
}

impl ChiSqWeights {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        let l2 = a.iter().map(|w| w * w).sum::<f64>().sqrt();
        let linf = a.iter().copied().fold(0.0, f64::max);
        Ok(Self { a, l2, linf })
    }

    /// Weights of the GFSS under the null: `a_i = min{1, ρ/λ_i}`, so that
    /// `‖a‖₂² = s₂(ρ)` and `‖a‖∞ ≤ 1`.
    pub fn gfss(spec: &Spectrum, rho: f64) -> Result<Self> {
        Self::new(gfss_weights(spec, rho)?)
    }

    pub fn weights(&self) -> &[f64] {
        &self.a
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn linf(&self) -> f64 {
        self.linf
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid("x", format!("must be nonnegative (got {x})")))
    }
}

/// Deviation `2‖a‖₂√x + 2‖a‖∞x` exceeded by `Z` with probability at most `e^{−x}`.
pub fn chisq_upper_tail(weights: &ChiSqWeights, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(2.0 * weights.l2 * x.sqrt() + 2.0 * weights.linf * x)
}

/// Deviation `−2‖a‖₂√x` undershot by `Z` with probability at most `e^{−x}`.
pub fn chisq_lower_tail(weights: &ChiSqWeights, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(-2.0 * weights.l2 * x.sqrt())
}

/// Level-`α` GFSS threshold `2(√(s₂(ρ)·L) + L)`, `L = log(1/α)`.
pub fn null_threshold(spec: &Spectrum, rho: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(
            "alpha",
            format!("must lie in (0, 1] (got {alpha})"),
        ));
    }
    let s2 = spectral_sum_s2(spec, rho)?;
    let l = (1.0 / alpha).ln();
    Ok(2.0 * ((s2 * l).sqrt() + l))
}

/// Lower confidence bound for `t̂` under the alternative, holding with
/// probability `1 − γ`:
/// `μ²/(2σ²) − (2μ/σ)√log(2/γ) − 2√(s₂(ρ)·log(2/γ))`.
pub fn alt_lower_bound(spec: &Spectrum, rho: f64, mu: f64, sigma: f64, gamma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(invalid("sigma", "must be positive"));
    }
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(invalid(
            "gamma",
            format!("must lie in (0, 2] (got {gamma})"),
        ));
    }
    let s2 = spectral_sum_s2(spec, rho)?;
    let lg = (2.0 / gamma).ln();
    let snr = mu / sigma;
    Ok(snr * snr / 2.0 - 2.0 * snr * lg.sqrt() - 2.0 * (s2 * lg).sqrt())
}

/// Smallest `μ/σ` at which the alternative lower bound reaches the level-`α`
/// threshold, i.e. the SNR guaranteeing power `1 − γ`.
pub fn critical_snr(spec: &Spectrum, rho: f64, alpha: f64, gamma: f64) -> Result<f64> {
    let threshold = null_threshold(spec, rho, alpha)?;
    let s2 = spectral_sum_s2(spec, rho)?;
    let lg = (2.0 / gamma).ln();
    // snr²/2 − 2√lg·snr − (threshold + 2√(s₂·lg)) = 0, larger root
    let c = threshold + 2.0 * (s2 * lg).sqrt();
    Ok(2.0 * lg.sqrt() + (4.0 * lg + 2.0 * c).sqrt())
}

/// `Ẑ = t̂ / √(2·s₂(ρ))`, standardized under Gaussian noise with `σ = 1`.
pub fn zscore(spec: &Spectrum, y: &[f64], rho: f64) -> Result<f64> {
    let t = crate::detectors::gfss(spec, y, rho)?;
    Ok(t / (2.0 * spectral_sum_s2(spec, rho)?).sqrt())
}

/// One-sided normal p-value `1 − Φ(Ẑ)`.
pub fn zscore_pvalue(z: f64) -> f64 {
    let n = Normal::standard();
    n.sf(z)
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(
            "alpha",
            format!("must lie in (0, 1) (got {alpha})"),
        ))
    }
}

/// Upper `α` quantile of `χ²_{p−1}`, the exact level-`α` cutoff for the
/// energy statistic of `y/σ`.
pub fn energy_threshold(p: usize, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    if p < 2 {
        return Err(invalid("p", "need at least two vertices"));
    }
    Ok(ChiSquared::new((p - 1) as f64)
        .map_err(|e| invalid("p", e.to_string()))?
        .inverse_cdf(1.0 - alpha))
}

/// Bonferroni cutoff `Φ⁻¹(1 − α/(2p))` for the max statistic of `y/σ`.
pub fn max_threshold(p: usize, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    Ok(Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * p as f64)))
}

/// One-sided cutoff `√p·Φ⁻¹(1 − α)` for the aggregate statistic of `y/σ`.
pub fn aggregate_threshold(p: usize, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    Ok((p as f64).sqrt() * Normal::standard().inverse_cdf(1.0 - alpha))
}

/// Permutation p-value of the GFSS: coordinates of `y` are shuffled while
/// the graph is held fixed, and
/// `p = (1 + #{permuted t̂ ≥ observed t̂}) / (1 + n_perm)`.
///
/// Replicate `r` draws from its own substream of `seed`, so the result does
/// not depend on scheduling.
pub fn permutation_pvalue(
    spec: &Spectrum,
    y: &[f64],
    rho: f64,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    if y.len() != spec.p() {
        return Err(Error::DimensionMismatch {
            expected: spec.p(),
            got: y.len(),
        });
    }
    // parameters are validated here, so the per-permutation calls cannot fail
    gfss_weights(spec, rho)?;
    let stat = |v: &[f64]| -> f64 {
        let c = spec.transform(v).expect("length checked");
        gfss_from_coefficients(spec, &c, rho).expect("rho checked")
    };
    permutation_pvalue_with(y, n_perm, seed, stat)
}

/// Permutation p-value for an arbitrary statistic.
pub fn permutation_pvalue_with<F>(y: &[f64], n_perm: usize, seed: u64, stat: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_perm < 1 {
        return Err(invalid("n_perm", "need at least one permutation"));
    }
    let observed = stat(y);
    let exceed: usize = (0..n_perm as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut perm = y.to_vec();
            perm.shuffle(&mut rng);
            usize::from(stat(&perm) >= observed)
        })
        .sum();
    Ok((1 + exceed) as f64 / (1 + n_perm) as f64)
}

/// Binarize at `cutoff` (strictly greater is 1), then center and scale by
/// the binomial standard deviation `√(p̂(1 − p̂))` of the activation rate.
pub fn standardize_indicator(values: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    let ind: Vec<f64> = values
        .iter()
        .map(|&v| if v > cutoff { 1.0 } else { 0.0 })
        .collect();
    let rate = ind.iter().sum::<f64>() / ind.len() as f64;
    let sd = (rate * (1.0 - rate)).sqrt();
    if sd == 0.0 {
        return Err(invalid(
            "values",
            "all observations fall on one side of the cutoff",
        ));
    }
    Ok(ind.iter().map(|v| (v - rate) / sd).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::gfss;
    use crate::graph::{path, torus};
    use crate::spectrum::spectral_sum_s1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn tail_bound_values() {
        let w = ChiSqWeights::new(vec![1.0; 9]).unwrap();
        let x = (1.0f64 / 0.05).ln();
        let expected = 2.0 * (9.0 * x).sqrt() + 2.0 * x;
        assert!((chisq_upper_tail(&w, x).unwrap() - expected).abs() < 1e-12);
        assert_eq!(chisq_upper_tail(&w, 0.0).unwrap(), 0.0);
        assert_eq!(chisq_lower_tail(&w, 0.0).unwrap(), 0.0);
        assert!((chisq_lower_tail(&w, 4.0).unwrap() + 12.0).abs() < 1e-12);
        assert!(ChiSqWeights::new(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn baseline_thresholds() {
        // χ²₂ upper 5% point is 2·ln 20
        assert!((energy_threshold(3, 0.05).unwrap() - 2.0 * 20f64.ln()).abs() < 1e-9);
        assert!((aggregate_threshold(4, 0.05).unwrap() - 2.0 * 1.6448536269514722).abs() < 1e-8);
        assert!((max_threshold(5, 0.5).unwrap() - 1.6448536269514722).abs() < 1e-8);
        assert!(energy_threshold(3, 1.0).is_err());
        assert!(max_threshold(3, 0.0).is_err());
    }

    #[test]
    fn threshold_values() {
        let s = Spectrum::of_graph(&path(3).unwrap()).unwrap();
        assert_eq!(null_threshold(&s, 1.0, 1.0).unwrap(), 0.0);
        let t = null_threshold(&s, 1.0, (-1.0f64).exp()).unwrap();
        assert!((t - 2.0 * ((10.0f64 / 9.0).sqrt() + 1.0)).abs() < 1e-12);
        assert!(null_threshold(&s, 1.0, 0.0).is_err());

        let s2 = spectral_sum_s2(&s, 0.7).unwrap();
        let l = 20f64.ln();
        assert_eq!(
            null_threshold(&s, 0.7, 0.05).unwrap(),
            2.0 * ((s2 * l).sqrt() + l)
        );
    }

    #[test]
    fn alternative_bound_values() {
        let s = Spectrum::of_graph(&path(5).unwrap()).unwrap();
        assert!((alt_lower_bound(&s, 1.0, 3.0, 1.5, 2.0).unwrap() - 2.0).abs() < 1e-12);
        let s2 = spectral_sum_s2(&s, 1.0).unwrap();
        let lg = (2.0f64 / 0.1).ln();
        assert!(
            (alt_lower_bound(&s, 1.0, 0.0, 1.0, 0.1).unwrap() + 2.0 * (s2 * lg).sqrt()).abs()
                < 1e-12
        );

        let snr = critical_snr(&s, 1.0, 0.05, 0.1).unwrap();
        let at = alt_lower_bound(&s, 1.0, snr, 1.0, 0.1).unwrap();
        assert!((at - null_threshold(&s, 1.0, 0.05).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn critical_snr_tracks_quarter_power_of_s2() {
        // μ/σ ∝ s₂^{1/4} up to log factors: the ratio stays within a band
        // while s₂ sweeps several orders of magnitude.
        let s = Spectrum::of_graph(&torus(20).unwrap()).unwrap();
        let mut prev = 0.0;
        let mut ratios = Vec::new();
        for k in 0..12 {
            let rho = s.lambda2() * 2f64.powi(k);
            let snr = critical_snr(&s, rho, 0.05, 0.1).unwrap();
            assert!(snr >= prev);
            prev = snr;
            ratios.push(snr / spectral_sum_s2(&s, rho).unwrap().powf(0.25));
        }
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        assert!(hi / lo < 4.0, "{ratios:?}");
    }

    #[test]
    fn zscore_examples() {
        let s = Spectrum::of_graph(&path(6).unwrap()).unwrap();
        let z = zscore(&s, &[1.0; 6], 0.5).unwrap();
        let expected =
            -spectral_sum_s1(&s, 0.5).unwrap() / (2.0 * spectral_sum_s2(&s, 0.5).unwrap()).sqrt();
        assert!((z - expected).abs() < 1e-12);
        let y = [0.3, 1.9, -0.4, 2.2, 0.0, -1.0];
        let scaled: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
        assert!((zscore(&s, &y, 0.5).unwrap() - zscore(&s, &scaled, 0.5).unwrap()).abs() > 1e-3);
        assert!((zscore_pvalue(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn permutation_examples() {
        let s = Spectrum::of_graph(&path(8).unwrap()).unwrap();
        assert_eq!(permutation_pvalue(&s, &[2.0; 8], 0.5, 50, 1).unwrap(), 1.0);
        assert!(permutation_pvalue(&s, &[2.0; 8], 0.5, 0, 1).is_err());
    }

    #[test]
    fn permutation_one_draw_below_observed() {
        // statistic that is maximal only at the observed ordering, with a
        // seed whose single shuffle moves something
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        let stat = |v: &[f64]| -> f64 { v.windows(2).filter(|w| w[0] < w[1]).count() as f64 };
        assert_eq!(permutation_pvalue_with(&y, 1, 3, stat).unwrap(), 0.5);
    }

    #[test]
    fn permutation_detects_smooth_signal() {
        let g = torus(6).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..36)
            .map(|i| {
                rng.sample::<f64, _>(StandardNormal)
                    + if i % 6 < 3 && i / 6 < 3 { 2.5 } else { 0.0 }
            })
            .collect();
        let p1 = permutation_pvalue(&s, &y, 1.0, 199, 11).unwrap();
        let p2 = permutation_pvalue(&s, &y, 1.0, 199, 11).unwrap();
        assert_eq!(p1.to_bits(), p2.to_bits());
        assert!(p1 <= 0.05, "{p1}");
        assert!(gfss(&s, &y, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn indicator_standardization() {
        let z = standardize_indicator(&[5.0, 12.0, 20.0, 1.0], 10.0).unwrap();
        // rate 1/2, sd 1/2
        assert_eq!(z, vec![-1.0, 1.0, 1.0, -1.0]);
        assert!(standardize_indicator(&[1.0, 2.0], 10.0).is_err());
    }
}
