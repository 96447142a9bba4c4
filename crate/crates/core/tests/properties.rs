use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use gfss::adaptive::{candidate_rhos, tau, tstat_curve};
use gfss::detectors::{
    aggregate_stat, energy_stat, gfss, gfss_via_projection, lr_stat, max_stat, sss,
};
use gfss::graph::{
    balanced_binary_tree, cut_sparsity, cut_weight, knn_graph, kronecker_graph, path,
    random_connected, torus,
};
use gfss::inference::{null_threshold, permutation_pvalue, zscore};
use gfss::spectrum::{spectral_sum_s1, spectral_sum_s2};
use gfss::{Graph, Spectrum, VertexSet};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn random_graph(p: usize, seed: u64) -> Graph {
    random_connected(p, 0.3, &mut rng(seed)).unwrap()
}

fn random_set(p: usize, r: &mut ChaCha8Rng) -> VertexSet {
    let k = r.random_range(1..p);
    let mut v: Vec<usize> = (0..p).collect();
    v.shuffle(r);
    VertexSet::new(p, v[..k].to_vec()).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn generator_laplacians_are_symmetric_with_zero_row_sums() {
    let mut graphs = vec![
        balanced_binary_tree(5).unwrap(),
        torus(7).unwrap(),
        path(9).unwrap(),
        kronecker_graph(&torus(3).unwrap(), 2).unwrap(),
        random_graph(30, 1),
    ];
    graphs.push(knn_graph(&[vec![0.0], vec![0.5], vec![2.0], vec![2.2]], 1).unwrap());
    for g in &graphs {
        let l = g.laplacian();
        assert_eq!(l, l.transpose());
        for row in l.row_iter() {
            assert!(row.sum().abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cut_sparsity_symmetry_and_sandwich(p in 3usize..25, seed in any::<u64>()) {
        let g = random_graph(p, seed);
        let mut r = rng(seed ^ 1);
        let c = random_set(p, &mut r);
        let s = cut_sparsity(&g, &c).unwrap();
        prop_assert!(rel_close(s, cut_sparsity(&g, &c.complement()).unwrap(), 1e-12));
        let expansion = cut_weight(&g, &c).unwrap() / c.len().min(c.complement_len()) as f64;
        prop_assert!(expansion <= s * (1.0 + 1e-12));
        prop_assert!(s <= 2.0 * expansion * (1.0 + 1e-12));
    }

    #[test]
    fn knn_is_permutation_invariant(n in 4usize..30, k in 1usize..4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| normals(&mut r, 2)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        // new position i holds old point perm[i]
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let a = knn_graph(&pts, k).unwrap();
        let b = knn_graph(&shuffled, k).unwrap();
        let edges_a: BTreeSet<(usize, usize)> = a.edges().iter().map(|e| (e.u, e.v)).collect();
        let edges_b: BTreeSet<(usize, usize)> = b
            .edges()
            .iter()
            .map(|e| {
                let (u, v) = (perm[e.u], perm[e.v]);
                (u.min(v), u.max(v))
            })
            .collect();
        prop_assert_eq!(edges_a, edges_b);
    }

    #[test]
    fn statistics_are_translation_invariant(p in 4usize..14, seed in any::<u64>(), shift in -50.0f64..50.0) {
        let g = random_graph(p, seed);
        let spec = Spectrum::of_graph(&g).unwrap();
        let mut r = rng(seed ^ 2);
        let y = normals(&mut r, p);
        let z: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let rho = r.random_range(0.05..2.0) * spec.lambda_max();
        let c = random_set(p, &mut r);
        let scale = 1.0 + shift.abs();
        for (a, b) in [
            (gfss(&spec, &y, rho).unwrap(), gfss(&spec, &z, rho).unwrap()),
            (energy_stat(&y), energy_stat(&z)),
            (max_stat(&y), max_stat(&z)),
            (lr_stat(&y, &c, 1.0).unwrap(), lr_stat(&z, &c, 1.0).unwrap()),
            (sss(&spec, &y, rho).unwrap(), sss(&spec, &z, rho).unwrap()),
        ] {
            prop_assert!((a - b).abs() <= 1e-8 * scale * scale * a.abs().max(1.0), "{} vs {}", a, b);
        }
        let agg = aggregate_stat(&z) - aggregate_stat(&y);
        prop_assert!((agg - p as f64 * shift).abs() <= 1e-10 * scale * p as f64);
    }

    #[test]
    fn shifted_gfss_is_monotone_in_rho(p in 3usize..40, seed in any::<u64>()) {
        let g = random_graph(p, seed);
        let spec = Spectrum::of_graph(&g).unwrap();
        let y = normals(&mut rng(seed ^ 3), p);
        let grid: Vec<f64> = (0..60).map(|i| spec.lambda2() * 1e-2 * 1.15f64.powi(i)).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&rho| gfss(&spec, &y, rho).unwrap() + spectral_sum_s1(&spec, rho).unwrap())
            .collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn projection_path_agrees(p in 5usize..60, seed in any::<u64>()) {
        let g = random_graph(p, seed);
        let spec = Spectrum::of_graph(&g).unwrap();
        let mut r = rng(seed ^ 4);
        let y = normals(&mut r, p);
        let rho = r.random_range(0.0..1.2) * spec.lambda_max() + 1e-6;
        let a = gfss(&spec, &y, rho).unwrap();
        let b = gfss_via_projection(&g, &spec, &y, rho).unwrap();
        prop_assert!(rel_close(a, b, 1e-8), "{} vs {}", a, b);
    }

    #[test]
    fn curve_matches_gfss_and_segments_are_convex(p in 3usize..30, seed in any::<u64>()) {
        let g = random_graph(p, seed);
        let spec = Spectrum::of_graph(&g).unwrap();
        let mut r = rng(seed ^ 5);
        let y = normals(&mut r, p);
        let curve = tstat_curve(&spec, &y).unwrap();
        for _ in 0..20 {
            let rho = r.random_range(0.0..1.5) * spec.lambda_max() + 1e-9;
            let t = gfss(&spec, &y, rho).unwrap();
            prop_assert!(rel_close(curve.eval(rho), t, 1e-8));
        }
        let lam = spec.eigenvalues();
        for j in 2..p {
            let (lo, hi) = (lam[j - 1], lam[j]);
            if hi - lo < 1e-9 {
                continue;
            }
            let f = |rho: f64| tau(&spec, rho, 0.05).unwrap() - curve.eval(rho);
            let h = (hi - lo) / 101.0;
            for i in 1..100 {
                let x = lo + h * i as f64;
                let second = f(x - h) - 2.0 * f(x) + f(x + h);
                prop_assert!(second >= -1e-9 * f(x).abs().max(1.0));
            }
        }
    }

    #[test]
    fn knot_invariants(p in 3usize..30, seed in any::<u64>()) {
        let g = random_graph(p, seed);
        let spec = Spectrum::of_graph(&g).unwrap();
        let y = normals(&mut rng(seed ^ 6), p);
        let lam = spec.eigenvalues();
        let knots = candidate_rhos(&spec, &y, 0.05).unwrap();
        prop_assert_eq!(knots.len(), p - 1);
        for k in &knots {
            prop_assert!(k.a >= 0.0 && k.b > 0.0 && k.d > 0.0);
            let hi = if k.j < p { lam[k.j] } else { lam[p - 1] };
            prop_assert!(k.rho_j >= lam[k.j - 1] && k.rho_j <= hi);
        }
    }
}

/// Random orthogonal mixing within every repeated eigenvalue leaves the
/// GFSS unchanged.
#[test]
fn gfss_is_eigenbasis_invariant() {
    let mut r = rng(7);
    for depth in [3, 4, 5] {
        let g = balanced_binary_tree(depth).unwrap();
        let spec = Spectrum::of_graph(&g).unwrap();
        let lam = spec.eigenvalues().to_vec();
        let p = lam.len();
        let mut u = spec.eigenvectors().clone();
        let mut start = 0;
        let mut mixed_any = false;
        while start < p {
            let mut end = start + 1;
            while end < p && lam[end] - lam[start] < 1e-8 * lam[p - 1] {
                end += 1;
            }
            let m = end - start;
            if m > 1 {
                let gauss = DMatrix::from_fn(m, m, |_, _| r.sample::<f64, _>(StandardNormal));
                let q = gauss.qr().q();
                let block = u.columns(start, m) * q;
                u.columns_mut(start, m).copy_from(&block);
                mixed_any = true;
            }
            start = end;
        }
        assert!(mixed_any);
        let remixed = Spectrum::from_parts(lam, u).unwrap();
        for _ in 0..20 {
            let y = normals(&mut r, p);
            let rho = r.random_range(0.01..1.0) * spec.lambda_max();
            let a = gfss(&spec, &y, rho).unwrap();
            let b = gfss(&remixed, &y, rho).unwrap();
            assert!(rel_close(a, b, 1e-8), "{a} vs {b}");
        }
    }
}

#[test]
fn spectral_identities() {
    for g in [
        balanced_binary_tree(4).unwrap(),
        torus(5).unwrap(),
        random_graph(40, 9),
    ] {
        let spec = Spectrum::of_graph(&g).unwrap();
        let trace: f64 = spec.eigenvalues().iter().sum();
        let degrees: f64 = g.degrees().iter().sum();
        assert!(rel_close(trace, degrees, 1e-8));
        let grid: Vec<f64> = (0..200).map(|i| 1e-3 * 1.05f64.powi(i)).collect();
        for w in grid.windows(2) {
            let (a1, b1) = (
                spectral_sum_s1(&spec, w[0]).unwrap(),
                spectral_sum_s1(&spec, w[1]).unwrap(),
            );
            let (a2, b2) = (
                spectral_sum_s2(&spec, w[0]).unwrap(),
                spectral_sum_s2(&spec, w[1]).unwrap(),
            );
            assert!(b1 >= a1 && b2 >= a2);
            // Lipschitz in ρ on a geometric grid
            assert!(b1 - a1 <= (p_minus_one(&spec)) * (w[1] / w[0] - 1.0) + 1e-12);
        }
    }
}

fn p_minus_one(spec: &Spectrum) -> f64 {
    (spec.p() - 1) as f64
}

#[test]
fn null_threshold_recomputes_from_s2() {
    let spec = Spectrum::of_graph(&torus(6).unwrap()).unwrap();
    for &(rho, alpha) in &[(0.1, 0.05), (1.0, 0.01), (3.0, 0.2)] {
        let l = (1.0f64 / alpha).ln();
        let s2 = spectral_sum_s2(&spec, rho).unwrap();
        let expected = 2.0 * ((s2 * l).sqrt() + l);
        assert!((null_threshold(&spec, rho, alpha).unwrap() - expected).abs() <= 1e-12 * expected);
    }
}

#[test]
fn permutation_pvalue_is_reproducible() {
    let g = balanced_binary_tree(4).unwrap();
    let spec = Spectrum::of_graph(&g).unwrap();
    let y = normals(&mut rng(3), g.p());
    let a = permutation_pvalue(&spec, &y, 0.3, 199, 42).unwrap();
    let b = permutation_pvalue(&spec, &y, 0.3, 199, 42).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

/// The Z-score denominator is the exact null standard deviation of the GFSS
/// scaled by one.
#[test]
fn zscore_denominator_matches_null_sd() {
    let g = torus(6).unwrap();
    let spec = Spectrum::of_graph(&g).unwrap();
    let rho = 1.0;
    let mut r = rng(11);
    let n = 40_000;
    let ts: Vec<f64> = (0..n)
        .map(|_| gfss(&spec, &normals(&mut r, g.p()), rho).unwrap())
        .collect();
    let mean = ts.iter().sum::<f64>() / n as f64;
    let sd = (ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let exact = (2.0 * spectral_sum_s2(&spec, rho).unwrap()).sqrt();
    assert!((sd / exact - 1.0).abs() < 0.02, "{sd} vs {exact}");

    // not scale invariant: σ must be standardized first
    let y = normals(&mut r, g.p());
    let y3: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
    assert!((zscore(&spec, &y, rho).unwrap() - zscore(&spec, &y3, rho).unwrap()).abs() > 1e-6);
}

#[test]
fn adaptive_level_at_three_alphas() {
    use gfss::sim::{null_scores, Detector};
    let g = balanced_binary_tree(4).unwrap();
    let spec = Spectrum::of_graph(&g).unwrap();
    let n = 10_000;
    let alphas = [0.01, 0.05, 0.1];
    let dets: Vec<Detector> = alphas
        .iter()
        .map(|&alpha| Detector::Adaptive { alpha })
        .collect();
    let scores = null_scores(&spec, &dets, 1.0, n, 99).unwrap();
    for (alpha, s) in alphas.iter().zip(&scores) {
        let rate = s.iter().filter(|&&v| v > 0.0).count() as f64 / n as f64;
        assert!(
            rate <= alpha + 3.0 * (alpha * (1.0 - alpha) / n as f64).sqrt(),
            "{alpha}: {rate}"
        );
    }
}
