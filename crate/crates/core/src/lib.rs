//! Graph Fourier scan statistics.
//!
//! Detection of anomalous, well-connected clusters of activation in a signal
//! observed on the vertices of a weighted graph. The central statistic is the
//! GFSS, a low-pass filtered energy of the graph Fourier coefficients with
//! filter `min{1, ρ/λ}`; its adaptive variant scans every `ρ` at once.
//!
//! Modules:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | graph model, tree/torus/Kronecker generators, kNN graphs, cut sparsity |
//! | [`spectrum`] | Laplacian eigendecomposition and closed-form spectra |
//! | [`detectors`] | GFSS, energy/max/aggregate, LR, exhaustive GLR, SSS |
//! | [`adaptive`] | adaptive GFSS over all `ρ` |
//! | [`inference`] | thresholds, chi-square tail bounds, Z-scores, permutation p-values |
//! | [`sim`] | signal models and Monte Carlo ROC / scaling experiments |
//! | [`io`] | file formats |

pub mod adaptive;
pub mod detectors;
pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod sim;
pub mod spectrum;

pub use detectors::{DetectionResult, Signal};
pub use error::{Error, Result};
pub use graph::{Graph, VertexSet};
pub use spectrum::Spectrum;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream `index` derived from `seed`. Every parallel
/// replicate draws from its own stream so results are schedule-independent.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
