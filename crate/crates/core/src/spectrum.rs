//! Laplacian eigendecomposition, closed-form spectra of the torus and
//! Kronecker families, and the spectral sums behind every threshold.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;

const SYMMETRY_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-9;
const MAX_QR_ITERS: usize = 10_000;

/// Magic header of the binary eigenvector sidecar.
pub const EVEC_MAGIC: &[u8; 9] = b"GFSSEVEC1";

/// Ascending eigenvalues and orthonormal eigenvectors (columns) of a
/// Laplacian.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Wraps precomputed parts. Eigenvalues must be ascending and the
    /// eigenvector matrix square of the same order.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let p = eigenvalues.len();
        if eigenvectors.nrows() != p || eigenvectors.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: eigenvectors.ncols(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("eigenvalues", "must be ascending"));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn of_graph(g: &Graph) -> Result<Self> {
        g.require_connected()?;
        eigendecompose(&g.laplacian())
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    /// Algebraic connectivity λ₂ (0 for a single vertex).
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn is_connected(&self) -> bool {
        self.p() >= 2 && self.lambda2() > 1e-8 * self.lambda_max().max(1.0)
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    /// Graph Fourier coefficients `Uᵀy`.
    pub fn transform(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: y.len(),
            });
        }
        let y = DVector::from_column_slice(y);
        Ok(self.eigenvectors.tr_mul(&y).as_slice().to_vec())
    }

    /// Inverse transform `U·c`.
    pub fn inverse_transform(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: coeffs.len(),
            });
        }
        let c = DVector::from_column_slice(coeffs);
        Ok((&self.eigenvectors * c).as_slice().to_vec())
    }

    /// Largest deviations from the decomposition invariants against the
    /// source matrix: `(max |UᵀU − I|, max_i ‖Δu_i − λ_i u_i‖∞)`.
    pub fn residuals(&self, laplacian: &DMatrix<f64>) -> (f64, f64) {
        let u = &self.eigenvectors;
        let p = self.p();
        let gram = u.tr_mul(u) - DMatrix::identity(p, p);
        let lu = laplacian * u;
        let mut resid = 0.0f64;
        for i in 0..p {
            let r = lu.column(i) - u.column(i) * self.eigenvalues[i];
            resid = resid.max(r.amax());
        }
        (gram.amax(), resid)
    }

    /// Writes the `{"eigenvalues": [...], "p": int}` summary.
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(
            w,
            &SpectrumJson {
                eigenvalues: self.eigenvalues.clone(),
                p: self.p(),
            },
        )?;
        Ok(())
    }

    /// Binary sidecar: the 9-byte magic `GFSSEVEC1`, `p` as little-endian
    /// u64, then the `p × p` eigenvector matrix as little-endian f64 in
    /// column-major order.
    pub fn write_eigenvectors<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(EVEC_MAGIC)?;
        w.write_all(&(self.p() as u64).to_le_bytes())?;
        for x in self.eigenvectors.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a sidecar written by [`Spectrum::write_eigenvectors`].
    pub fn read_eigenvectors<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
        let mut magic = [0u8; 9];
        r.read_exact(&mut magic)?;
        if &magic != EVEC_MAGIC {
            return Err(Error::Parse("bad eigenvector sidecar header".into()));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let p = u64::from_le_bytes(buf) as usize;
        let mut data = Vec::with_capacity(p * p);
        for _ in 0..p * p {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok(DMatrix::from_vec(p, p, data))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub eigenvalues: Vec<f64>,
    pub p: usize,
}

/// Dense symmetric eigendecomposition with ascending eigenvalues, λ₁ clamped
/// to zero when it is numerically zero, and each eigenvector signed so its
/// first entry above `1e-9` in magnitude is positive.
pub fn eigendecompose(laplacian: &DMatrix<f64>) -> Result<Spectrum> {
    let p = laplacian.nrows();
    if laplacian.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: laplacian.ncols(),
        });
    }
    if p == 0 {
        return Err(invalid("matrix", "empty"));
    }
    for i in 0..p {
        for j in i + 1..p {
            let gap = (laplacian[(i, j)] - laplacian[(j, i)]).abs();
            if gap.is_nan() || gap > SYMMETRY_TOL {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }
    if laplacian.iter().any(|x| !x.is_finite()) {
        return Err(invalid("matrix", "entries must be finite"));
    }

    let eig = SymmetricEigen::try_new(laplacian.clone(), f64::EPSILON, MAX_QR_ITERS).ok_or_else(
        || Error::EigenFailure(format!("QR iteration exceeded {MAX_QR_ITERS} sweeps")),
    )?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvalues = Vec::with_capacity(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).clone_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > SIGN_TOL) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }

    let scale = eigenvalues[p - 1].abs().max(1.0);
    if eigenvalues[0].abs() <= 1e-8 * scale {
        eigenvalues[0] = 0.0;
    }
    Spectrum::from_parts(eigenvalues, vectors)
}

/// Closed-form torus spectrum `2(2 − cos(2πi₁/ℓ) − cos(2πi₂/ℓ))`, ascending.
pub fn torus_spectrum(side: usize) -> Result<Vec<f64>> {
    if side < 3 {
        return Err(invalid("side", "torus needs side >= 3"));
    }
    let l = side as f64;
    let mut out = Vec::with_capacity(side * side);
    for a in 0..side {
        for b in 0..side {
            let v = 2.0 * (2.0 - (2.0 * PI * a as f64 / l).cos() - (2.0 * PI * b as f64 / l).cos());
            out.push(if a == 0 && b == 0 { 0.0 } else { v });
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Spectrum of the `levels`-fold multi-scale Kronecker power: all sums
/// `Σ_j p₀^{j−ℓ} ν_{i_j}` over index tuples, ascending.
pub fn kronecker_spectrum(base_eigs: &[f64], levels: usize) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(invalid("levels", "must be at least 1"));
    }
    let p0 = base_eigs.len();
    if p0 < 2 {
        return Err(invalid("base_eigs", "need at least 2 eigenvalues"));
    }
    let mut sums = vec![0.0];
    for j in 1..=levels {
        let scale = (p0 as f64).powi(j as i32 - levels as i32);
        sums = sums
            .iter()
            .flat_map(|s| base_eigs.iter().map(move |nu| s + scale * nu))
            .collect();
    }
    sums.sort_by(f64::total_cmp);
    Ok(sums)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "rho",
            format!("must be positive and finite (got {rho})"),
        ))
    }
}

/// Filter weights `min{1, ρ/λ_i}` for `i = 2..p` (index 0 of the result is λ₂).
pub fn gfss_weights(spec: &Spectrum, rho: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    spec.require_connected()?;
    Ok(spec.eigenvalues()[1..]
        .iter()
        .map(|&l| (rho / l).min(1.0))
        .collect())
}

/// `Σ_{i≥2} min{1, ρ/λ_i}`.
pub fn spectral_sum_s1(spec: &Spectrum, rho: f64) -> Result<f64> {
    Ok(gfss_weights(spec, rho)?.iter().sum())
}

/// `Σ_{i≥2} min{1, ρ²/λ_i²}`.
pub fn spectral_sum_s2(spec: &Spectrum, rho: f64) -> Result<f64> {
    Ok(gfss_weights(spec, rho)?.iter().map(|w| w * w).sum())
}
