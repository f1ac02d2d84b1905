//! Reconstruction-kernel normalization.
//!
//! A CT volume is split into six frequency bands with Gaussian filters at the
//! scale ladder sigma = (0, 1, 2, 4, 8, 16) voxels:
//!
//! ```text
//! band i = L(sigma[i-1]) - L(sigma[i])   for i = 1..5
//! band 6 = L(sigma[5])
//! ```
//!
//! so the bands telescope back to the input exactly. Normalization rescales
//! bands 1-5 by lambda_i = r_i / e_i, where r_i is the reference band SD and
//! e_i the current band SD inside a region mask, and iterates until every
//! lambda_i lies in [0.95, 1.05]:
//!
//! ```text
//! normalized = band6 + sum_i lambda_i * band_i
//! ```
//!
//! Band statistics come from the mask; the reconstruction is applied to the
//! whole volume. Sigmas are in voxel units on the (pre-resampled) grid, so a
//! reference and the inputs it normalizes must share a grid resolution.

use crate::dataio::{Mask, Volume};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scale ladder shared by decomposition and references.
pub const SIGMAS: [f64; 6] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Half-width of the lambda convergence window around 1.
pub const LAMBDA_TOLERANCE: f64 = 0.05;

/// The six frequency bands of a volume, on the input grid.
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    /// bands[0..5] are band-pass, bands[5] is the low-pass residual.
    pub bands: Vec<Vec<f64>>,
    pub sigmas: [f64; 6],
}

/// Standard deviations of bands 1-5 inside a region mask of the reference
/// image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RknReference {
    pub band_sds: [f64; 5],
}

impl RknReference {
    pub fn new(band_sds: [f64; 5]) -> Result<Self> {
        if band_sds.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::NonFinite("reference band SDs"));
        }
        Ok(Self { band_sds })
    }

    /// Reference statistics from a template volume and its region mask.
    pub fn from_volume(volume: &Volume, mask: &Mask) -> Result<Self> {
        band_sds(&decompose(volume), mask)
    }
}

/// Result of iterative normalization.
#[derive(Debug, Clone)]
pub struct RknResult {
    pub volume: Volume,
    pub iterations: usize,
    pub lambda: [f64; 5],
    pub converged: bool,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    let mut sum = 0.0;
    for k in -radius..=radius {
        let w = (-(k as f64) * (k as f64) * inv_two_sigma2).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

fn smooth_axis(src: &[f64], dst: &mut [f64], dims: [usize; 3], axis: usize, kernel: &[f64]) {
    let radius = (kernel.len() / 2) as i64;
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);
    let len = [nx, ny, nz][axis] as i64;
    let stride = match axis {
        0 => 1,
        1 => nx,
        _ => nx * ny,
    };
    // Iterate over all lines along `axis`; border handled by edge replication.
    let (outer_a, outer_b) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    for b in 0..outer_b {
        for a in 0..outer_a {
            let base = match axis {
                0 => nx * (a + ny * b),
                1 => a + nx * ny * b,
                _ => a + nx * b,
            };
            for i in 0..len {
                let mut acc = 0.0;
                for (ki, &w) in kernel.iter().enumerate() {
                    let j = (i + ki as i64 - radius).clamp(0, len - 1) as usize;
                    acc += w * src[base + j * stride];
                }
                dst[base + i as usize * stride] = acc;
            }
        }
    }
}

/// Separable 3-axis Gaussian smoothing with a normalized discrete kernel
/// truncated at radius ceil(4*sigma). sigma = 0 returns the input unchanged.
pub fn gaussian_smooth(volume: &Volume, sigma: f64) -> Volume {
    if sigma == 0.0 {
        return volume.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let mut a = volume.voxels.clone();
    let mut b = vec![0.0; a.len()];
    smooth_axis(&a, &mut b, volume.dims, 0, &kernel);
    smooth_axis(&b, &mut a, volume.dims, 1, &kernel);
    smooth_axis(&a, &mut b, volume.dims, 2, &kernel);
    Volume {
        dims: volume.dims,
        spacing_mm: volume.spacing_mm,
        voxels: b,
        dtype: volume.dtype,
    }
}

/// Split a volume into six frequency bands along the sigma ladder.
pub fn decompose(volume: &Volume) -> BandDecomposition {
    let n = volume.n_voxels();
    let mut bands = Vec::with_capacity(6);
    // L(sigma[0]) = input since sigma[0] = 0.
    let mut prev = volume.voxels.clone();
    for &sigma in SIGMAS.iter().skip(1) {
        let smoothed = gaussian_smooth(volume, sigma).voxels;
        let mut band = vec![0.0; n];
        for i in 0..n {
            band[i] = prev[i] - smoothed[i];
        }
        bands.push(band);
        prev = smoothed;
    }
    bands.push(prev); // low-pass residual at the coarsest scale
    BandDecomposition {
        dims: volume.dims,
        spacing_mm: volume.spacing_mm,
        bands,
        sigmas: SIGMAS,
    }
}

/// Population SD of bands 1-5 restricted to mask voxels.
pub fn band_sds(decomp: &BandDecomposition, mask: &Mask) -> Result<RknReference> {
    if mask.dims != decomp.dims {
        return Err(Error::GridMismatch(format!(
            "decomposition {:?} vs mask {:?}",
            decomp.dims, mask.dims
        )));
    }
    let n_set = mask.n_set();
    if n_set == 0 {
        return Err(Error::EmptyMask);
    }
    let mut sds = [0.0; 5];
    for (bi, band) in decomp.bands.iter().take(5).enumerate() {
        // Welford's online update over masked voxels.
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut count = 0.0;
        for (i, &inside) in mask.voxels.iter().enumerate() {
            if inside {
                count += 1.0;
                let delta = band[i] - mean;
                mean += delta / count;
                m2 += delta * (band[i] - mean);
            }
        }
        sds[bi] = (m2 / count).sqrt();
    }
    RknReference::new(sds)
}

fn reconstruct(decomp: &BandDecomposition, lambda: &[f64; 5]) -> Vec<f64> {
    let n = decomp.bands[5].len();
    let mut out = decomp.bands[5].clone();
    for (bi, band) in decomp.bands.iter().take(5).enumerate() {
        let l = lambda[bi];
        for i in 0..n {
            out[i] += l * band[i];
        }
    }
    out
}

/// Iteratively match the volume's band energies to the reference.
///
/// Each iteration decomposes the current volume, computes
/// lambda_i = r_i / e_i from mask-restricted band SDs (lambda_i = 1 when
/// e_i = 0), and reconstructs. Stops once every lambda_i lies in
/// [0.95, 1.05]; otherwise runs `max_iters` iterations and reports
/// non-convergence, returning the last reconstruction either way.
pub fn rkn_normalize(
    volume: &Volume,
    reference: &RknReference,
    mask: &Mask,
    max_iters: usize,
) -> Result<RknResult> {
    mask.check_compatible(volume)?;
    if mask.n_set() == 0 {
        return Err(Error::EmptyMask);
    }
    let max_iters = max_iters.max(1);

    let mut current = volume.clone();
    let mut lambda = [1.0; 5];
    for iteration in 1..=max_iters {
        let decomp = decompose(&current);
        let energies = band_sds(&decomp, mask)?;
        for i in 0..5 {
            let e = energies.band_sds[i];
            lambda[i] = if e == 0.0 { 1.0 } else { reference.band_sds[i] / e };
        }
        current = Volume {
            dims: volume.dims,
            spacing_mm: volume.spacing_mm,
            voxels: reconstruct(&decomp, &lambda),
            dtype: volume.dtype,
        };
        let converged = lambda
            .iter()
            .all(|&l| (l - 1.0).abs() <= LAMBDA_TOLERANCE);
        if converged {
            return Ok(RknResult {
                volume: current,
                iterations: iteration,
                lambda,
                converged: true,
            });
        }
    }
    Ok(RknResult {
        volume: current,
        iterations: max_iters,
        lambda,
        converged: false,
    })
}
