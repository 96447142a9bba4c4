//! Signal models, Monte Carlo ROC estimation and SNR scaling sweeps.
//!
//! Every replicate `r` draws from `substream(seed, r)`, and all detectors see
//! the same noise (common random numbers), so outputs are bit-identical for a
//! given seed regardless of thread count.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::adaptive_score_from_coefficients;
use crate::detectors::{aggregate_stat, energy_stat, gfss_from_coefficients, max_stat, Signal};
use crate::error::{invalid, Error, Result};
use crate::graph::{self, cut_sparsity, Graph, VertexSet};
use crate::spectrum::Spectrum;
use crate::substream;

/// Replicates transformed together in one matrix product.
const BLOCK: usize = 256;

/// Membership tolerance for the signal classes.
const CLASS_TOL: f64 = 1e-10;

fn centered_norm(x: &[f64]) -> f64 {
    energy_stat(x).sqrt()
}

/// `x = offset·1 + δ·1_C` with `δ = μ√(p/(|C||C̄|))`, so `‖x − x̄‖ = μ`.
pub fn make_pc_signal(g: &Graph, c: &VertexSet, mu: f64, offset: f64) -> Result<Signal> {
    check_cluster(g, c)?;
    let delta = pc_jump(c, mu);
    let mut x = vec![offset; g.p()];
    for &v in c.members() {
        x[v] += delta;
    }
    Signal::new(x)
}

fn pc_jump(c: &VertexSet, mu: f64) -> f64 {
    let p = c.p() as f64;
    mu * (p / (c.len() as f64 * c.complement_len() as f64)).sqrt()
}

fn check_cluster(g: &Graph, c: &VertexSet) -> Result<()> {
    if c.p() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: c.p(),
        });
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(invalid("q", format!("must lie in (0, 1] (got {q})")))
    }
}

/// Keeps each member of `c` independently with probability `q`, redrawing
/// until the result is non-empty.
pub fn subsample_cluster<R: Rng + ?Sized>(c: &VertexSet, q: f64, rng: &mut R) -> Result<VertexSet> {
    check_q(q)?;
    loop {
        let kept: Vec<usize> = c
            .members()
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < q)
            .collect();
        if !kept.is_empty() {
            return VertexSet::new(c.p(), kept);
        }
    }
}

/// Subsampled cluster signal `δ′·1_{C′}` with the boost `δ′ = δ|C|/|C′|`
/// that keeps the mean gap between `C` and `C̄` at exactly `μ`.
pub fn make_subsampled_signal<R: Rng + ?Sized>(
    g: &Graph,
    c: &VertexSet,
    mu: f64,
    q: f64,
    rng: &mut R,
) -> Result<(Signal, VertexSet)> {
    check_cluster(g, c)?;
    let sub = subsample_cluster(c, q, rng)?;
    let boost = pc_jump(c, mu) * c.len() as f64 / sub.len() as f64;
    let mut x = vec![0.0; g.p()];
    for &v in sub.members() {
        x[v] = boost;
    }
    Ok((Signal::new(x)?, sub))
}

/// `|mean_C(x) − mean_C̄(x)|·√(|C||C̄|/p)`, the quantity bounded below by `μ`
/// in the graph-structured class.
pub fn mean_gap(x: &[f64], c: &VertexSet) -> f64 {
    let ind = c.indicator();
    let (mut inside, mut outside) = (0.0, 0.0);
    for (v, &xv) in x.iter().enumerate() {
        if ind[v] {
            inside += xv;
        } else {
            outside += xv;
        }
    }
    let (k, kc) = (c.len() as f64, c.complement_len() as f64);
    (inside / k - outside / kc).abs() * (k * kc / c.p() as f64).sqrt()
}

/// Membership in the graph-structured class for cluster `c` at strength `μ`.
pub fn membership_xs(g: &Graph, x: &[f64], mu: f64, c: &VertexSet) -> Result<bool> {
    check_cluster(g, c)?;
    if x.len() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: x.len(),
        });
    }
    Ok(mean_gap(x, c) >= mu - CLASS_TOL)
}

/// Membership in the piecewise-constant class: `x` takes two values, the
/// level set `C` has cut sparsity at most `ρ`, and `‖x − x̄‖ ≥ μ`.
pub fn membership_xpc(g: &Graph, x: &[f64], mu: f64, rho: f64) -> Result<bool> {
    if x.len() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: x.len(),
        });
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = hi.abs().max(lo.abs()).max(1.0);
    if hi - lo <= CLASS_TOL * scale {
        return Ok(false);
    }
    let near = |a: f64, b: f64| (a - b).abs() <= CLASS_TOL * scale;
    if !x.iter().all(|&v| near(v, lo) || near(v, hi)) {
        return Ok(false);
    }
    let c = VertexSet::new(g.p(), (0..g.p()).filter(|&i| near(x[i], hi)))?;
    Ok(cut_sparsity(g, &c)? <= rho * (1.0 + CLASS_TOL) && centered_norm(x) >= mu - CLASS_TOL)
}

/// Alternative signal family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    PiecewiseConstant,
    Subsampled { q: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    pub kind: SignalKind,
    pub cluster: VertexSet,
    pub mu: f64,
    pub offset: f64,
}

impl SignalModel {
    pub fn piecewise_constant(cluster: VertexSet, mu: f64) -> Self {
        Self {
            kind: SignalKind::PiecewiseConstant,
            cluster,
            mu,
            offset: 0.0,
        }
    }

    fn draw(&self, g: &Graph, rng: &mut ChaCha8Rng) -> Result<Signal> {
        match self.kind {
            SignalKind::PiecewiseConstant => make_pc_signal(g, &self.cluster, self.mu, self.offset),
            SignalKind::Subsampled { q } => {
                let (mut x, _) = make_subsampled_signal(g, &self.cluster, self.mu, q, rng)?;
                if self.offset != 0.0 {
                    x = Signal::new(x.iter().map(|v| v + self.offset).collect())?;
                }
                Ok(x)
            }
        }
    }
}

/// Scalar detectors compared in simulations. Larger values are more
/// anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Detector {
    Gfss {
        rho: f64,
    },
    /// `max_j t̂(ρ_j) − τ(ρ_j)`; the level-α adaptive test rejects iff > 0.
    Adaptive {
        alpha: f64,
    },
    Max,
    Aggregate,
    Energy,
}

impl Detector {
    pub fn label(&self) -> &'static str {
        match self {
            Detector::Gfss { .. } => "gfss",
            Detector::Adaptive { .. } => "adaptive",
            Detector::Max => "max",
            Detector::Aggregate => "aggregate",
            Detector::Energy => "energy",
        }
    }

    /// Evaluates on `y` given its Fourier coefficients.
    pub fn statistic(&self, spec: &Spectrum, y: &[f64], coeffs: &[f64]) -> Result<f64> {
        match *self {
            Detector::Gfss { rho } => gfss_from_coefficients(spec, coeffs, rho),
            Detector::Adaptive { alpha } => adaptive_score_from_coefficients(spec, coeffs, alpha),
            Detector::Max => Ok(max_stat(y)),
            Detector::Aggregate => Ok(aggregate_stat(y)),
            Detector::Energy => Ok(energy_stat(y)),
        }
    }

    fn needs_spectrum(&self) -> bool {
        matches!(self, Detector::Gfss { .. } | Detector::Adaptive { .. })
    }
}

/// Null and alternative statistics of one detector over all replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub detector: Detector,
    pub null: Vec<f64>,
    pub alt: Vec<f64>,
}

/// Empirical ROC staircase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub detector: String,
    pub n_reps: usize,
    /// `(false_alarm_rate, detection_rate)` sorted by false-alarm rate.
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Sweeps a threshold down through the pooled statistics; tied values
    /// move together.
    pub fn from_scores(detector: impl Into<String>, null: &[f64], alt: &[f64]) -> Self {
        let n = null.len();
        let m = alt.len();
        let mut pooled: Vec<(f64, bool)> = null
            .iter()
            .map(|&s| (s, false))
            .chain(alt.iter().map(|&s| (s, true)))
            .collect();
        pooled.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut points = vec![(0.0, 0.0)];
        let (mut fp, mut tp) = (0usize, 0usize);
        let mut i = 0;
        while i < pooled.len() {
            let v = pooled[i].0;
            while i < pooled.len() && pooled[i].0 == v {
                if pooled[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            points.push((fp as f64 / n as f64, tp as f64 / m as f64));
        }
        Self {
            detector: detector.into(),
            n_reps: n,
            points,
        }
    }

    /// Trapezoidal area under the staircase (ties get half credit).
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }

    /// Largest detection rate among operating points with false-alarm rate
    /// at most `fa`.
    pub fn detection_at(&self, fa: f64) -> f64 {
        self.points
            .iter()
            .filter(|(f, _)| *f <= fa + 1e-12)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    }
}

fn gaussian_block(
    p: usize,
    reps: std::ops::Range<usize>,
    seed: u64,
    sigma: f64,
) -> (DMatrix<f64>, Vec<ChaCha8Rng>) {
    let mut m = DMatrix::zeros(p, reps.len());
    let mut rngs = Vec::with_capacity(reps.len());
    for (col, r) in reps.enumerate() {
        let mut rng = substream(seed, r as u64);
        for v in m.column_mut(col).iter_mut() {
            *v = sigma * rng.sample::<f64, _>(StandardNormal);
        }
        rngs.push(rng);
    }
    (m, rngs)
}

/// Statistics of every detector on `n_reps` pure-noise signals `σε`,
/// standardized by `σ`. Column `r` uses `substream(seed, r)`.
pub fn null_scores(
    spec: &Spectrum,
    detectors: &[Detector],
    sigma: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let blocks = run_blocks(spec, detectors, sigma, n_reps, seed, None)?;
    Ok(collect(detectors.len(), blocks, |b| b.0))
}

type BlockOut = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn collect(
    n_det: usize,
    blocks: Vec<BlockOut>,
    pick: impl Fn(BlockOut) -> Vec<Vec<f64>>,
) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); n_det];
    for block in blocks {
        for (d, v) in pick(block).into_iter().enumerate() {
            out[d].extend(v);
        }
    }
    out
}

fn evaluate_block(
    spec: &Spectrum,
    detectors: &[Detector],
    ys: &DMatrix<f64>,
) -> Result<Vec<Vec<f64>>> {
    let coeffs = if detectors.iter().any(Detector::needs_spectrum) {
        Some(spec.eigenvectors().tr_mul(ys))
    } else {
        None
    };
    detectors
        .iter()
        .map(|d| {
            (0..ys.ncols())
                .map(|c| {
                    let y = ys.column(c);
                    let cf = coeffs.as_ref().map(|m| m.column(c));
                    d.statistic(
                        spec,
                        y.as_slice(),
                        cf.as_ref().map_or(&[][..], |v| v.as_slice()),
                    )
                })
                .collect()
        })
        .collect()
}

fn run_blocks(
    spec: &Spectrum,
    detectors: &[Detector],
    sigma: f64,
    n_reps: usize,
    seed: u64,
    alt: Option<(&Graph, &SignalModel)>,
) -> Result<Vec<BlockOut>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", "must be positive"));
    }
    let p = spec.p();
    let starts: Vec<usize> = (0..n_reps).step_by(BLOCK).collect();
    starts
        .par_iter()
        .map(|&start| {
            let reps = start..(start + BLOCK).min(n_reps);
            let (mut null, mut rngs) = gaussian_block(p, reps.clone(), seed, sigma);
            let mut alt_out = Vec::new();
            if let Some((g, model)) = alt {
                // second noise draw plus the signal, from the same substreams
                let mut ys = DMatrix::zeros(p, reps.len());
                for (col, rng) in rngs.iter_mut().enumerate() {
                    let x = model.draw(g, rng)?;
                    for (i, v) in ys.column_mut(col).iter_mut().enumerate() {
                        *v = (x[i] + sigma * rng.sample::<f64, _>(StandardNormal)) / sigma;
                    }
                }
                alt_out = evaluate_block(spec, detectors, &ys)?;
            }
            null /= sigma;
            Ok((evaluate_block(spec, detectors, &null)?, alt_out))
        })
        .collect()
}

/// Monte Carlo scores for every detector under the null `y = σε` and the
/// alternative `y = x + σε′`, with statistics computed on `y/σ`.
pub fn simulate_scores(
    g: &Graph,
    spec: &Spectrum,
    detectors: &[Detector],
    model: &SignalModel,
    sigma: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<Scores>> {
    if n_reps < 10 {
        return Err(invalid("n_reps", "need at least 10 replicates"));
    }
    if spec.p() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: spec.p(),
        });
    }
    let blocks = run_blocks(spec, detectors, sigma, n_reps, seed, Some((g, model)))?;
    let (null, alt): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
    let null = collect(
        detectors.len(),
        null.into_iter().map(|b| (b, Vec::new())).collect(),
        |b| b.0,
    );
    let alt = collect(
        detectors.len(),
        alt.into_iter().map(|b| (b, Vec::new())).collect(),
        |b| b.0,
    );
    Ok(detectors
        .iter()
        .zip(null.into_iter().zip(alt))
        .map(|(d, (null, alt))| Scores {
            detector: *d,
            null,
            alt,
        })
        .collect())
}

/// ROC curves of every detector from common random numbers.
pub fn simulate_roc(
    g: &Graph,
    spec: &Spectrum,
    detectors: &[Detector],
    model: &SignalModel,
    sigma: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<RocCurve>> {
    Ok(
        simulate_scores(g, spec, detectors, model, sigma, n_reps, seed)?
            .iter()
            .map(|s| RocCurve::from_scores(s.detector.label(), &s.null, &s.alt))
            .collect(),
    )
}

/// How the cluster is placed within its family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Lexicographically first valid cluster.
    #[default]
    First,
    /// Uniformly random valid cluster, driven by the experiment seed.
    Random,
}

/// Base graph of a Kronecker family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KroneckerBase {
    #[default]
    Cycle,
    Path,
    Complete,
}

impl KroneckerBase {
    pub fn build(&self, p0: usize) -> Result<Graph> {
        match self {
            KroneckerBase::Path => graph::path(p0),
            KroneckerBase::Cycle if p0 >= 3 => {
                Graph::new(p0, (0..p0).map(|i| (i, (i + 1) % p0, 1.0)))
            }
            KroneckerBase::Cycle => graph::path(p0),
            KroneckerBase::Complete => Graph::new(
                p0,
                (0..p0).flat_map(|i| (i + 1..p0).map(move |j| (i, j, 1.0))),
            ),
        }
    }
}

/// Graph family with its cluster-size parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Balanced binary tree; the cluster is the smallest complete subtree
    /// with at least `c·p^alpha_size` vertices.
    Bbt {
        #[serde(default = "default_alpha_size")]
        alpha_size: f64,
        #[serde(default = "default_c")]
        c: f64,
    },
    /// `ℓ × ℓ` torus; the cluster is a `k × k` square with `k² ≈ c·p^{1−β}`.
    Torus {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_c")]
        c: f64,
    },
    /// Multi-scale Kronecker power of a `p0`-vertex base; the cluster fixes
    /// the `k` coarsest coordinates.
    Kronecker {
        p0: usize,
        k: usize,
        #[serde(default)]
        base: KroneckerBase,
    },
}

fn default_alpha_size() -> f64 {
    0.5
}
fn default_c() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    0.5
}

/// A graph, its spectrum, and the planted cluster with its cut sparsity.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub spectrum: Spectrum,
    pub cluster: VertexSet,
    pub rho: f64,
}

impl Family {
    /// Builds the family member at `size` (tree depth, torus side, or
    /// Kronecker levels).
    pub fn instance(&self, size: usize, placement: Placement, seed: u64) -> Result<Instance> {
        let mut rng = substream(seed, u64::MAX);
        let (graph, cluster) = match *self {
            Family::Bbt { alpha_size, c } => {
                let g = graph::balanced_binary_tree(size)?;
                let p = g.p();
                let target = c * (p as f64).powf(alpha_size);
                // subtree rooted at depth d has 2^{size−d+1} − 1 vertices
                let depth = (1..=size)
                    .rev()
                    .find(|&d| ((1usize << (size - d + 1)) - 1) as f64 >= target)
                    .ok_or_else(|| invalid("alpha_size", "cluster would be the whole tree"))?;
                let first = (1usize << depth) - 1;
                let root = match placement {
                    Placement::First => first,
                    Placement::Random => rng.random_range(first..2 * first + 1),
                };
                let members = graph::bbt_subtree(p, root);
                (g, VertexSet::new(p, members)?)
            }
            Family::Torus { beta, c } => {
                let g = graph::torus(size)?;
                let p = g.p() as f64;
                let k = ((c * p.powf(1.0 - beta)).sqrt().round() as usize).clamp(1, size - 1);
                let (r0, c0) = match placement {
                    Placement::First => (0, 0),
                    Placement::Random => (rng.random_range(0..size), rng.random_range(0..size)),
                };
                let members = (0..k)
                    .flat_map(|r| (0..k).map(move |s| ((r0 + r) % size) * size + (c0 + s) % size));
                (g, VertexSet::new(size * size, members)?)
            }
            Family::Kronecker { p0, k, base } => {
                if k == 0 || k > size {
                    return Err(invalid("k", format!("need 1 <= k <= levels ({size})")));
                }
                let g = graph::kronecker_graph(&base.build(p0)?, size)?;
                let block = p0.pow((size - k) as u32);
                let prefix = match placement {
                    Placement::First => 0,
                    Placement::Random => rng.random_range(0..p0.pow(k as u32)),
                };
                let members = prefix * block..(prefix + 1) * block;
                let p = g.p();
                (g, VertexSet::new(p, members)?)
            }
        };
        let rho = cut_sparsity(&graph, &cluster)?;
        let spectrum = Spectrum::of_graph(&graph)?;
        Ok(Instance {
            graph,
            spectrum,
            cluster,
            rho,
        })
    }

    /// SNR rate at which the adaptive GFSS is guaranteed to succeed, with
    /// the exponent on `p` optionally overridden.
    ///
    /// Tree and torus clusters only approximate their nominal size, so the
    /// size exponent is taken from the planted cluster: `|C| = p^α` for the
    /// tree and `|C| = p^{1−β}` for the torus.
    pub fn snr_rate(&self, inst: &Instance, exponent: Option<f64>) -> f64 {
        let p = inst.graph.p() as f64;
        let lp = p.ln();
        let size_exp = (inst.cluster.len() as f64).ln() / lp;
        match *self {
            Family::Bbt { .. } => p.powf(exponent.unwrap_or((1.0 - size_exp) / 4.0)) * lp.sqrt(),
            Family::Torus { .. } => {
                p.powf(exponent.unwrap_or(3.0 / 20.0 + (1.0 - size_exp) / 10.0)) * lp.powf(0.25)
            }
            Family::Kronecker { p0, k, base } => {
                let levels = (p.ln() / (p0 as f64).ln()).round();
                let diam = base.build(p0).ok().and_then(|h| h.diameter()).unwrap_or(1) as f64;
                p.powf(exponent.unwrap_or(k as f64 / (2.0 * levels))) * (diam * lp).powf(0.25)
            }
        }
    }
}

/// One row of an SNR sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub p: usize,
    pub snr: f64,
    pub det_rate: f64,
}

/// For each size sets `μ/σ = constant × rate(p)` and records the detection
/// rate at false-alarm `fa`.
#[allow(clippy::too_many_arguments)]
pub fn snr_sweep(
    family: &Family,
    detector: DetectorKind,
    constant: f64,
    exponent: Option<f64>,
    sizes: &[usize],
    n_reps: usize,
    fa: f64,
    placement: Placement,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&size| {
            let inst = family.instance(size, placement, seed)?;
            let snr = constant * family.snr_rate(&inst, exponent);
            let det = detector.resolve(inst.rho);
            let model = SignalModel::piecewise_constant(inst.cluster.clone(), snr);
            let roc = simulate_roc(
                &inst.graph,
                &inst.spectrum,
                &[det],
                &model,
                1.0,
                n_reps,
                seed,
            )?;
            Ok(SweepRow {
                size,
                p: inst.graph.p(),
                snr,
                det_rate: roc[0].detection_at(fa),
            })
        })
        .collect()
}

/// Detector named without its instance-dependent parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// GFSS at the planted cluster's cut sparsity.
    Gfss,
    Adaptive,
    Max,
    Aggregate,
    Energy,
}

impl DetectorKind {
    pub fn resolve(&self, rho: f64) -> Detector {
        self.resolve_with(rho, 0.05)
    }

    pub fn resolve_with(&self, rho: f64, alpha: f64) -> Detector {
        match self {
            DetectorKind::Gfss => Detector::Gfss { rho },
            DetectorKind::Adaptive => Detector::Adaptive { alpha },
            DetectorKind::Max => Detector::Max,
            DetectorKind::Aggregate => Detector::Aggregate,
            DetectorKind::Energy => Detector::Energy,
        }
    }
}

/// A JSON experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Roc {
        family: Family,
        size: usize,
        /// `μ/σ`.
        snr: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        q: Option<f64>,
        #[serde(default = "default_detectors")]
        detectors: Vec<DetectorKind>,
        n_reps: usize,
        seed: u64,
        #[serde(default)]
        placement: Placement,
    },
    Sweep {
        family: Family,
        sizes: Vec<usize>,
        /// Multiplier on the SNR rate.
        constant: f64,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default = "default_sweep_detector")]
        detector: DetectorKind,
        #[serde(default = "default_fa")]
        fa: f64,
        n_reps: usize,
        seed: u64,
        #[serde(default)]
        placement: Placement,
    },
}

fn default_sigma() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_fa() -> f64 {
    0.05
}
fn default_detectors() -> Vec<DetectorKind> {
    vec![
        DetectorKind::Gfss,
        DetectorKind::Adaptive,
        DetectorKind::Max,
        DetectorKind::Aggregate,
    ]
}
fn default_sweep_detector() -> DetectorKind {
    DetectorKind::Adaptive
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Roc(Vec<RocCurve>),
    Sweep(Vec<SweepRow>),
}

impl ExperimentConfig {
    pub fn run(&self) -> Result<ExperimentOutput> {
        match self {
            ExperimentConfig::Roc {
                family,
                size,
                snr,
                sigma,
                alpha,
                q,
                detectors,
                n_reps,
                seed,
                placement,
            } => {
                let inst = family.instance(*size, *placement, *seed)?;
                let kind = match q {
                    Some(q) => {
                        check_q(*q)?;
                        SignalKind::Subsampled { q: *q }
                    }
                    None => SignalKind::PiecewiseConstant,
                };
                let model = SignalModel {
                    kind,
                    cluster: inst.cluster.clone(),
                    mu: snr * sigma,
                    offset: 0.0,
                };
                let dets: Vec<Detector> = detectors
                    .iter()
                    .map(|d| d.resolve_with(inst.rho, *alpha))
                    .collect();
                Ok(ExperimentOutput::Roc(simulate_roc(
                    &inst.graph,
                    &inst.spectrum,
                    &dets,
                    &model,
                    *sigma,
                    *n_reps,
                    *seed,
                )?))
            }
            ExperimentConfig::Sweep {
                family,
                sizes,
                constant,
                exponent,
                detector,
                fa,
                n_reps,
                seed,
                placement,
            } => Ok(ExperimentOutput::Sweep(snr_sweep(
                family, *detector, *constant, *exponent, sizes, *n_reps, *fa, *placement, *seed,
            )?)),
        }
    }
}
