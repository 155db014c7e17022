//! Spectral embeddings: eigenfunction, diffusion, and global point
//! signature coordinates, plus a local bi-Lipschitz distortion report.
//!
//! All three maps use eigenpairs 1..=m (the constant mode is excluded) and
//! differ only by a positive diagonal column scaling, so they are injective
//! or non-injective together.

use nalgebra::DMatrix;

use crate::distance::{scan_pairs, DistanceField, PairScan, DEFAULT_SEED};
use crate::eigen::Spectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Eigenmap,
    Diffusion,
    Gps,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Eigenmap => "eigenmap",
            MapKind::Diffusion => "diffusion",
            MapKind::Gps => "gps",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingCoords {
    /// One row per point, one column per eigenpair 1..=m.
    pub coords: DMatrix<f64>,
    pub kind: MapKind,
    /// Diffusion time; set only for [`MapKind::Diffusion`].
    pub t: Option<f64>,
    /// [`Spectrum::fingerprint`] of the source spectrum.
    pub spectrum_tag: u64,
}

impl EmbeddingCoords {
    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    pub fn image_distance(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.coords.ncols() {
            let d = self.coords[(i, c)] - self.coords[(j, c)];
            acc += d * d;
        }
        acc.sqrt()
    }
}

fn column_scaled(
    spec: &Spectrum,
    m: usize,
    kind: MapKind,
    t: Option<f64>,
    scale: impl Fn(f64) -> f64,
) -> Result<EmbeddingCoords> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "embedding dimension must be at least 1".into(),
        ));
    }
    if m > spec.count() {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {m} exceeds the {} computed pairs",
            spec.count()
        )));
    }
    let n = spec.n_points();
    let mut coords = DMatrix::zeros(n, m);
    for j in 0..m {
        let s = scale(spec.eigenvalues[j + 1]);
        for i in 0..n {
            coords[(i, j)] = spec.eigenvectors[(i, j + 1)] * s;
        }
    }
    Ok(EmbeddingCoords {
        coords,
        kind,
        t,
        spectrum_tag: spec.fingerprint(),
    })
}

/// Coordinates `phi_1(x), ..., phi_m(x)`.
pub fn eigenmap(spec: &Spectrum, m: usize) -> Result<EmbeddingCoords> {
    column_scaled(spec, m, MapKind::Eigenmap, None, |_| 1.0)
}

/// Default diffusion time `1 / lambda_1`.
pub fn diffusion_time_default(spec: &Spectrum) -> Result<f64> {
    match spec.eigenvalues.get(1) {
        Some(&l1) if l1 > 0.0 => Ok(1.0 / l1),
        _ => Err(Error::InvalidParameter(
            "diffusion time default needs a positive first eigenvalue".into(),
        )),
    }
}

/// Eigenmap with column `j` damped by `exp(-lambda_j t / 2)`.
pub fn diffusion_map(spec: &Spectrum, m: usize, t: Option<f64>) -> Result<EmbeddingCoords> {
    let t = match t {
        Some(t) => t,
        None => diffusion_time_default(spec)?,
    };
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusion time must be positive, got {t}"
        )));
    }
    column_scaled(spec, m, MapKind::Diffusion, Some(t), |l| {
        (-l * t / 2.0).exp()
    })
}

/// Eigenmap with column `j` scaled by `lambda_j^{-1/2}`.
pub fn gps_map(spec: &Spectrum, m: usize) -> Result<EmbeddingCoords> {
    if spec.eigenvalues.len() > 1 && spec.eigenvalues[1] <= 0.0 {
        return Err(Error::InvalidParameter(
            "signature map needs positive non-constant eigenvalues".into(),
        ));
    }
    column_scaled(spec, m, MapKind::Gps, None, |l| 1.0 / l.sqrt())
}

/// Extremal ratios of image distance to graph distance over covered pairs
/// within `radius`, returned as `(lower, upper)`.
pub fn local_distortion(
    coords: &EmbeddingCoords,
    gd: &dyn DistanceField,
    radius: f64,
) -> Result<(f64, f64)> {
    if coords.n_points() != gd.n_points() {
        return Err(Error::InvalidParameter(
            "coordinate and distance point counts disagree".into(),
        ));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distortion radius must be positive, got {radius}"
        )));
    }
    let mut lower = f64::INFINITY;
    let mut upper = 0.0f64;
    let mut hits = 0usize;
    scan_pairs(gd, PairScan::Auto, DEFAULT_SEED, &mut |i, j, d| {
        if d > 0.0 && d <= radius {
            let ratio = coords.image_distance(i, j) / d;
            lower = lower.min(ratio);
            upper = upper.max(ratio);
            hits += 1;
        }
    });
    if hits == 0 {
        return Err(Error::InvalidParameter(format!(
            "no covered pairs within radius {radius}"
        )));
    }
    Ok((lower, upper))
}
