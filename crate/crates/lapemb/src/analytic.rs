//! Closed-form spectra of the round sphere and the flat stretched torus.
//!
//! The torus is the rectangle `[0,a]^{n-1} x [0,b]` with opposite faces
//! glued, `0 < a < b`. Its eigenfunctions are products of `cos(2 pi m x/p)`
//! and `sin(2 pi m x/p)` over the axes, with eigenvalue
//! `(2 pi)^2 (sum m_i^2/a^2 + m_n^2/b^2)`. Within an eigenvalue tie, modes
//! with frequency on a lower axis come first and cosine precedes sine; this
//! ordering makes the first modes exactly the basis used to establish the
//! embedding dimension `d = 2(ceil(b/a) + n - 2)`, including the integer
//! `b/a` case where the pure `x^n` pair sharing the eigenvalue
//! `(2 pi/a)^2` sorts after the coordinates that enter the embedding.

use std::cmp::Reverse;

use nalgebra::DMatrix;

use crate::distance::DistanceField;
use crate::geometry::PointCloud;
use crate::maps::{EmbeddingCoords, MapKind};
use crate::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Relative tolerance for deciding that `b/a` is an integer.
pub const RATIO_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone)]
pub struct TorusMode {
    /// Nonnegative frequency per axis; axis `n-1` is the long (`b`) axis.
    pub freqs: Vec<u32>,
    /// One selector per axis; zero-frequency axes always use [`Trig::Cos`]
    /// (a constant factor 1).
    pub trig: Vec<Trig>,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct TorusSpec {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    /// Non-constant modes, eigenvalue-ascending with the tie rule above.
    pub modes: Vec<TorusMode>,
}

fn validate_torus(a: f64, b: f64, n: usize) -> Result<()> {
    if !(a > 0.0 && b > a && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "torus sides must satisfy 0 < a < b, got a = {a}, b = {b}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "torus dimension must be at least 2, got {n}"
        )));
    }
    Ok(())
}

fn torus_lambda(a: f64, b: f64, freqs: &[u32]) -> f64 {
    let n = freqs.len();
    let short: f64 = freqs[..n - 1].iter().map(|&m| (m as f64).powi(2)).sum();
    let long = (freqs[n - 1] as f64).powi(2);
    TWO_PI * TWO_PI * (short / (a * a) + long / (b * b))
}

/// True when `b/a` is an integer up to [`RATIO_SNAP_TOL`].
pub fn is_integer_ratio(a: f64, b: f64) -> bool {
    let r = b / a;
    (r - r.round()).abs() <= RATIO_SNAP_TOL * r
}

/// `2 (ceil(b/a) + n - 2)`, with near-integer ratios snapped before the
/// ceiling.
pub fn torus_embedding_dimension(a: f64, b: f64, n: usize) -> Result<usize> {
    validate_torus(a, b, n)?;
    let r = b / a;
    let p = if is_integer_ratio(a, b) {
        r.round() as usize
    } else {
        r.ceil() as usize
    };
    Ok(2 * (p + n - 2))
}

/// The `count` smallest non-constant modes (eigenvalues listed with
/// multiplicity).
pub fn torus_spectrum(a: f64, b: f64, n: usize, count: usize) -> Result<TorusSpec> {
    validate_torus(a, b, n)?;
    let mut bound = torus_lambda(a, b, &freq_vec(n, n - 1, 1)) * 4.0;
    loop {
        let mut modes = enumerate_modes(a, b, n, bound);
        if modes.len() >= count {
            sort_modes(&mut modes);
            modes.truncate(count);
            return Ok(TorusSpec { a, b, n, modes });
        }
        bound *= 2.0;
    }
}

fn freq_vec(n: usize, axis: usize, m: u32) -> Vec<u32> {
    let mut f = vec![0u32; n];
    f[axis] = m;
    f
}

fn enumerate_modes(a: f64, b: f64, n: usize, bound: f64) -> Vec<TorusMode> {
    let mut modes = Vec::new();
    let mut freqs = vec![0u32; n];
    fill_axis(a, b, n, 0, bound, &mut freqs, &mut modes);
    modes
}

fn fill_axis(
    a: f64,
    b: f64,
    n: usize,
    axis: usize,
    bound: f64,
    freqs: &mut Vec<u32>,
    out: &mut Vec<TorusMode>,
) {
    if axis == n {
        if freqs.iter().all(|&m| m == 0) {
            return;
        }
        let eigenvalue = torus_lambda(a, b, freqs);
        let mut combo = vec![Trig::Cos; n];
        push_trig_combos(freqs, 0, &mut combo, eigenvalue, out);
        return;
    }
    let mut m = 0u32;
    loop {
        freqs[axis] = m;
        if torus_lambda(a, b, freqs) > bound {
            freqs[axis] = 0;
            return;
        }
        fill_axis(a, b, n, axis + 1, bound, freqs, out);
        m += 1;
    }
}

fn push_trig_combos(
    freqs: &[u32],
    axis: usize,
    combo: &mut Vec<Trig>,
    eigenvalue: f64,
    out: &mut Vec<TorusMode>,
) {
    if axis == freqs.len() {
        out.push(TorusMode {
            freqs: freqs.to_vec(),
            trig: combo.clone(),
            eigenvalue,
        });
        return;
    }
    combo[axis] = Trig::Cos;
    push_trig_combos(freqs, axis + 1, combo, eigenvalue, out);
    if freqs[axis] > 0 {
        combo[axis] = Trig::Sin;
        push_trig_combos(freqs, axis + 1, combo, eigenvalue, out);
        combo[axis] = Trig::Cos;
    }
}

fn sort_modes(modes: &mut [TorusMode]) {
    modes.sort_by(|x, y| {
        x.eigenvalue
            .total_cmp(&y.eigenvalue)
            .then_with(|| Reverse(&x.freqs).cmp(&Reverse(&y.freqs)))
            .then_with(|| x.trig.cmp(&y.trig))
    });
    // Equal eigenvalues can land on distinct floats when computed from
    // different frequency vectors; re-sort inside near-tie runs so the tie
    // rule, not rounding noise, decides the order.
    let mut start = 0;
    for i in 1..=modes.len() {
        let split = i == modes.len()
            || modes[i].eigenvalue - modes[start].eigenvalue
                > 1e-12 * modes[i].eigenvalue.abs();
        if split {
            modes[start..i].sort_by(|x, y| {
                Reverse(&x.freqs)
                    .cmp(&Reverse(&y.freqs))
                    .then_with(|| x.trig.cmp(&y.trig))
            });
            start = i;
        }
    }
}

/// Evaluates mode `mode` of `spec` at a point of the fundamental rectangle;
/// coordinates outside are wrapped by periodicity.
pub fn torus_eigenfunction(spec: &TorusSpec, mode: usize, point: &[f64]) -> Result<f64> {
    let m = spec
        .modes
        .get(mode)
        .ok_or_else(|| Error::InvalidParameter(format!("mode index {mode} out of range")))?;
    if point.len() != spec.n {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, torus has {}",
            point.len(),
            spec.n
        )));
    }
    let mut value = 1.0;
    for axis in 0..spec.n {
        if m.freqs[axis] == 0 {
            continue;
        }
        let period = if axis + 1 == spec.n { spec.b } else { spec.a };
        let arg = TWO_PI * m.freqs[axis] as f64 * point[axis] / period;
        value *= match m.trig[axis] {
            Trig::Cos => arg.cos(),
            Trig::Sin => arg.sin(),
        };
    }
    Ok(value)
}

/// Uniform sample lattice on the torus with points offset half a step from
/// the origin on every axis.
///
/// The half-step phase puts the reflection partner of every lattice point
/// (`x -> period - x`, the symmetry that collapses a cosine/sine pair down
/// to its cosine) back on the lattice whenever the axis count is even, and
/// keeps any point from being its own partner, so the collisions predicted
/// for a truncated basis appear as exact coordinate duplicates.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    /// Points per axis; axis `n-1` is the `b` axis.
    pub dims: Vec<usize>,
}

impl TorusGrid {
    pub fn new(a: f64, b: f64, n: usize, dims: &[usize]) -> Result<Self> {
        validate_torus(a, b, n)?;
        if dims.len() != n || dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidParameter(format!(
                "grid needs {n} axis sizes of at least 2"
            )));
        }
        Ok(Self {
            a,
            b,
            n,
            dims: dims.to_vec(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn period(&self, axis: usize) -> f64 {
        if axis + 1 == self.n {
            self.b
        } else {
            self.a
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.period(axis) / self.dims[axis] as f64
    }

    pub fn mean_spacing(&self) -> f64 {
        (0..self.n).map(|j| self.spacing(j)).sum::<f64>() / self.n as f64
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut rest = idx;
        let mut out = vec![0usize; self.n];
        for axis in (0..self.n).rev() {
            out[axis] = rest % self.dims[axis];
            rest /= self.dims[axis];
        }
        out
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(axis, &i)| (i as f64 + 0.5) * self.spacing(axis))
            .collect()
    }

    pub fn metric(&self) -> TorusMetric {
        TorusMetric {
            spacings: (0..self.n).map(|j| self.spacing(j)).collect(),
            dims: self.dims.clone(),
        }
    }
}

/// Exact flat-torus distance between lattice points.
#[derive(Debug, Clone)]
pub struct TorusMetric {
    spacings: Vec<f64>,
    dims: Vec<usize>,
}

impl TorusMetric {
    fn distance(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        let (mut ri, mut rj) = (i, j);
        for axis in (0..self.dims.len()).rev() {
            let d = self.dims[axis];
            let (ai, aj) = (ri % d, rj % d);
            ri /= d;
            rj /= d;
            let steps = ai.abs_diff(aj).min(d - ai.abs_diff(aj));
            let delta = steps as f64 * self.spacings[axis];
            acc += delta * delta;
        }
        acc.sqrt()
    }
}

impl DistanceField for TorusMetric {
    fn n_points(&self) -> usize {
        self.dims.iter().product()
    }

    fn covered_pairs(&self) -> u64 {
        let n = self.n_points() as u64;
        n * (n - 1) / 2
    }

    fn for_each_pair(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        let n = self.n_points();
        for i in 0..n {
            for j in (i + 1)..n {
                f(i, j, self.distance(i, j));
            }
        }
    }

    fn pair_distance(&self, i: usize, j: usize) -> Option<f64> {
        Some(self.distance(i, j))
    }
}

/// `cos` or `sin` of `2 pi num/den` with the argument folded by the exact
/// integer symmetries `num -> num mod den` and `num -> den - num`, so inputs
/// related by those symmetries produce bit-identical magnitudes.
fn trig_exact(kind: Trig, num: u64, den: u64) -> f64 {
    let t = num % den;
    let folded = t.min(den - t);
    let theta = TWO_PI * folded as f64 / den as f64;
    match kind {
        Trig::Cos => theta.cos(),
        Trig::Sin => {
            if t > den - t {
                -theta.sin()
            } else {
                theta.sin()
            }
        }
    }
}

/// Analytic eigenfunctions on the lattice, columns ordered by the embedding
/// proof. Valid for `m` up to two past the closed-form embedding dimension.
pub fn torus_proof_basis_coords(grid: &TorusGrid, m: usize) -> Result<EmbeddingCoords> {
    let d = torus_embedding_dimension(grid.a, grid.b, grid.n)?;
    if m == 0 || m > d + 2 {
        return Err(Error::InvalidParameter(format!(
            "coordinate count {m} outside 1..={} (embedding dimension {d} plus two)",
            d + 2
        )));
    }
    let spec = torus_spectrum(grid.a, grid.b, grid.n, m)?;
    let npts = grid.n_points();
    let mut coords = DMatrix::zeros(npts, m);

    // Per-axis tables: value of each mode's factor at every lattice index.
    for (c, mode) in spec.modes.iter().enumerate() {
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(grid.n);
        for axis in 0..grid.n {
            let dim = grid.dims[axis] as u64;
            let freq = mode.freqs[axis] as u64;
            let table: Vec<f64> = (0..grid.dims[axis])
                .map(|i| {
                    if freq == 0 {
                        1.0
                    } else {
                        // x = (i + 1/2) * period/dim, so the angle fraction
                        // is freq*(2i+1) / (2*dim).
                        trig_exact(mode.trig[axis], freq * (2 * i as u64 + 1), 2 * dim)
                    }
                })
                .collect();
            tables.push(table);
        }
        for idx in 0..npts {
            let mi = grid.multi_index(idx);
            let mut v = 1.0;
            for axis in 0..grid.n {
                v *= tables[axis][mi[axis]];
            }
            coords[(idx, c)] = v;
        }
    }

    let mut tag = 0xcbf2_9ce4_8422_2325u64;
    for mode in &spec.modes {
        tag ^= mode.eigenvalue.to_bits();
        tag = tag.wrapping_mul(0x1_0000_0000_01b3);
    }
    Ok(EmbeddingCoords {
        coords,
        kind: MapKind::Eigenmap,
        t: None,
        spectrum_tag: tag,
    })
}

/// The lattice embedded isometrically in `R^{2n}` as a product of circles,
/// for driving the point-cloud pipeline with a known spectrum.
pub fn flat_torus_grid_cloud(grid: &TorusGrid) -> Result<PointCloud> {
    let npts = grid.n_points();
    let mut points = Vec::with_capacity(npts);
    for idx in 0..npts {
        let mi = grid.multi_index(idx);
        let mut p = Vec::with_capacity(2 * grid.n);
        for axis in 0..grid.n {
            let r = grid.period(axis) / TWO_PI;
            let theta = TWO_PI * (mi[axis] as f64 + 0.5) / grid.dims[axis] as f64;
            p.push(r * theta.cos());
            p.push(r * theta.sin());
        }
        points.push(p);
    }
    PointCloud::new(points)
}

#[derive(Debug, Clone, Copy)]
pub struct SphereDegree {
    pub k: u32,
    pub eigenvalue: f64,
    pub multiplicity: u64,
}

#[derive(Debug, Clone)]
pub struct SphereSpec {
    pub n: usize,
    pub degrees: Vec<SphereDegree>,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Eigenvalue `k(n+k-1)` and multiplicity `C(n+k,k) - C(n+k-2,k-2)` for
/// every degree `k <= degree_max` on the unit `n`-sphere.
pub fn sphere_spectrum(n: usize, degree_max: u32) -> Result<SphereSpec> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!(
            "sphere dimension must be at least 1, got {n}"
        )));
    }
    let nn = n as u64;
    let degrees = (0..=degree_max)
        .map(|k| {
            let kk = k as u64;
            let multiplicity = if k < 2 {
                binomial(nn + kk, kk)
            } else {
                binomial(nn + kk, kk) - binomial(nn + kk - 2, kk - 2)
            };
            SphereDegree {
                k,
                eigenvalue: (kk * (nn + kk - 1)) as f64,
                multiplicity,
            }
        })
        .collect();
    Ok(SphereSpec { n, degrees })
}

/// The degree-1 eigenmap of `S^n`: ambient coordinates scaled by
/// `sqrt(n+1)` so each has unit norm in `L^2` of the uniform probability
/// measure. Points must lie on the unit sphere.
pub fn sphere_coordinate_eigenmap(n: usize, points: &[Vec<f64>]) -> Result<EmbeddingCoords> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!(
            "sphere dimension must be at least 1, got {n}"
        )));
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter("no sample points given".into()));
    }
    let scale = ((n + 1) as f64).sqrt();
    let mut coords = DMatrix::zeros(points.len(), n + 1);
    for (i, p) in points.iter().enumerate() {
        if p.len() != n + 1 {
            return Err(Error::InvalidParameter(format!(
                "point {i} has {} coordinates, expected {}",
                p.len(),
                n + 1
            )));
        }
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "point {i} has norm {norm}, not on the unit sphere"
            )));
        }
        for (j, &x) in p.iter().enumerate() {
            coords[(i, j)] = scale * x;
        }
    }
    Ok(EmbeddingCoords {
        coords,
        kind: MapKind::Eigenmap,
        t: None,
        spectrum_tag: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_PI_SQ: f64 = TWO_PI * TWO_PI;

    #[test]
    fn stretched_torus_mode_list() {
        let spec = torus_spectrum(1.0, 2.5, 2, 6).unwrap();
        let got: Vec<f64> = spec.modes.iter().map(|m| m.eigenvalue).collect();
        let want = [
            FOUR_PI_SQ / 6.25,
            FOUR_PI_SQ / 6.25,
            FOUR_PI_SQ * 4.0 / 6.25,
            FOUR_PI_SQ * 4.0 / 6.25,
            FOUR_PI_SQ,
            FOUR_PI_SQ,
        ];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-10 * w, "{g} vs {w}");
        }
        assert_eq!(spec.modes[0].freqs, vec![0, 1]);
        assert_eq!(spec.modes[0].trig, vec![Trig::Cos, Trig::Cos]);
        assert_eq!(spec.modes[1].trig, vec![Trig::Cos, Trig::Sin]);
        assert_eq!(spec.modes[4].freqs, vec![1, 0]);
    }

    #[test]
    fn integer_ratio_group_puts_short_axis_first() {
        let spec = torus_spectrum(1.0, 2.0, 2, 8).unwrap();
        // lambda(1,2) pair, then the tie at (2 pi)^2 holding the x^1 pair
        // before the (0,2) pair.
        assert_eq!(spec.modes[0].freqs, vec![0, 1]);
        assert_eq!(spec.modes[1].freqs, vec![0, 1]);
        assert_eq!(spec.modes[2].freqs, vec![1, 0]);
        assert_eq!(spec.modes[3].freqs, vec![1, 0]);
        assert_eq!(spec.modes[4].freqs, vec![0, 2]);
        assert_eq!(spec.modes[5].freqs, vec![0, 2]);
        let tie = spec.modes[2].eigenvalue;
        assert!((spec.modes[4].eigenvalue - tie).abs() < 1e-12 * tie);
    }

    #[test]
    fn smallest_mode_is_long_axis() {
        let spec = torus_spectrum(1.0, 3.3, 3, 1).unwrap();
        assert_eq!(spec.modes.len(), 1);
        assert_eq!(spec.modes[0].freqs, vec![0, 0, 1]);
        assert!((spec.modes[0].eigenvalue - FOUR_PI_SQ / (3.3 * 3.3)).abs() < 1e-10);
    }

    #[test]
    fn embedding_dimension_formula() {
        assert_eq!(torus_embedding_dimension(1.0, 2.5, 2).unwrap(), 6);
        assert_eq!(torus_embedding_dimension(1.0, 2.0, 2).unwrap(), 4);
        assert_eq!(torus_embedding_dimension(1.0, 1.01, 3).unwrap(), 6);
        assert!(torus_embedding_dimension(2.0, 1.0, 2).is_err());
        assert!(torus_embedding_dimension(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn near_integer_ratio_snaps() {
        let b = 2.0 * (1.0 + 1e-12);
        assert_eq!(torus_embedding_dimension(1.0, b, 2).unwrap(), 4);
        assert_eq!(torus_embedding_dimension(1.0, 2.0 + 1e-6, 2).unwrap(), 6);
    }

    #[test]
    fn eigenfunction_values_at_reference_points() {
        let spec = torus_spectrum(1.0, 2.5, 2, 6).unwrap();
        // cos mode of the long axis at x^n = 0, sin mode at x^n = b/4.
        assert_eq!(
            torus_eigenfunction(&spec, 0, &[0.3, 0.0]).unwrap(),
            1.0
        );
        assert!(
            (torus_eigenfunction(&spec, 1, &[0.3, 2.5 / 4.0]).unwrap() - 1.0).abs() < 1e-15
        );
        // Periodic wrap.
        let inside = torus_eigenfunction(&spec, 4, &[0.2, 1.0]).unwrap();
        let outside = torus_eigenfunction(&spec, 4, &[1.2, 1.0]).unwrap();
        assert!((inside - outside).abs() < 1e-12);
    }

    #[test]
    fn modes_are_l2_orthogonal_under_grid_quadrature() {
        let spec = torus_spectrum(1.0, 2.5, 2, 8).unwrap();
        let g = 256usize;
        let (ha, hb) = (1.0 / g as f64, 2.5 / g as f64);
        for p in 0..8 {
            for q in (p + 1)..8 {
                let mut acc = 0.0;
                for i in 0..g {
                    for j in 0..g {
                        let x = [(i as f64 + 0.5) * ha, (j as f64 + 0.5) * hb];
                        acc += torus_eigenfunction(&spec, p, &x).unwrap()
                            * torus_eigenfunction(&spec, q, &x).unwrap();
                    }
                }
                acc *= ha * hb;
                assert!(acc.abs() < 1e-8, "modes {p},{q}: {acc}");
            }
        }
    }

    #[test]
    fn second_differences_converge_at_second_order() {
        let spec = torus_spectrum(1.0, 2.5, 2, 6).unwrap();
        let x = [0.3137, 1.7211];
        for mode in 0..6 {
            let lambda = spec.modes[mode].eigenvalue;
            let f = |p: &[f64]| torus_eigenfunction(&spec, mode, p).unwrap();
            let residual = |h: f64| {
                let mut lap = 0.0;
                for axis in 0..2 {
                    let mut plus = x;
                    let mut minus = x;
                    plus[axis] += h;
                    minus[axis] -= h;
                    lap += (f(&plus) - 2.0 * f(&x) + f(&minus)) / (h * h);
                }
                (-lap - lambda * f(&x)).abs()
            };
            let r1 = residual(1e-3);
            let r2 = residual(5e-4);
            if r1 > 1e-6 {
                let rate = r1 / r2;
                assert!((2.5..6.0).contains(&rate), "mode {mode}: rate {rate}");
            }
        }
    }

    #[test]
    fn reflected_lattice_points_share_cosine_bits() {
        let grid = TorusGrid::new(1.0, 2.5, 2, &[16, 40]).unwrap();
        let coords = torus_proof_basis_coords(&grid, 6).unwrap();
        // Partner in the short axis: i -> dims[0]-1-i, same long index.
        let (i, j) = (3usize, 11usize);
        let p = i * 40 + j;
        let q = (16 - 1 - i) * 40 + j;
        for c in 0..5 {
            assert_eq!(coords.coords[(p, c)].to_bits(), coords.coords[(q, c)].to_bits());
        }
        let s_p = coords.coords[(p, 5)];
        let s_q = coords.coords[(q, 5)];
        assert_eq!(s_p.to_bits(), (-s_q).to_bits());
        assert!(s_p != 0.0);
    }

    #[test]
    fn proof_basis_collides_only_below_dimension() {
        let grid = TorusGrid::new(1.0, 2.5, 2, &[16, 40]).unwrap();
        let full = torus_proof_basis_coords(&grid, 6).unwrap();
        let cut = torus_proof_basis_coords(&grid, 5).unwrap();
        let n = grid.n_points();
        let (mut full_coll, mut cut_coll) = (0usize, 0usize);
        for p in 0..n {
            for q in (p + 1)..n {
                if (0..6).all(|c| full.coords[(p, c)] == full.coords[(q, c)]) {
                    full_coll += 1;
                }
                if (0..5).all(|c| cut.coords[(p, c)] == cut.coords[(q, c)]) {
                    cut_coll += 1;
                }
            }
        }
        assert_eq!(full_coll, 0);
        assert_eq!(cut_coll, 16 / 2 * 40);
    }

    #[test]
    fn grid_metric_wraps() {
        let grid = TorusGrid::new(1.0, 2.5, 2, &[4, 10]).unwrap();
        let metric = grid.metric();
        // Neighbors across the seam of the short axis: indices 0 and 3.
        let d = metric.pair_distance(5, 3 * 10 + 5).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
        let far = metric.pair_distance(5, 2 * 10 + 5).unwrap();
        assert!((far - 0.5).abs() < 1e-12);
    }

    #[test]
    fn circle_product_cloud_has_grid_spacing() {
        let grid = TorusGrid::new(1.0, 2.5, 2, &[8, 20]).unwrap();
        let cloud = flat_torus_grid_cloud(&grid).unwrap();
        assert_eq!(cloud.n_points(), 160);
        assert_eq!(cloud.dim(), 4);
        // Chord between adjacent short-axis points is just under the arc:
        // sin(pi/8)/(pi/8) of it on an 8-point circle.
        let arc = 1.0 / 8.0;
        let chord = crate::geometry::dist_nd(cloud.point(0), cloud.point(20));
        assert!(chord < arc && chord > 0.97 * arc);
    }

    #[test]
    fn sphere_table_matches_formulas() {
        let spec = sphere_spectrum(2, 3).unwrap();
        let rows: Vec<(u32, f64, u64)> = spec
            .degrees
            .iter()
            .map(|d| (d.k, d.eigenvalue, d.multiplicity))
            .collect();
        assert_eq!(rows, vec![
            (0, 0.0, 1),
            (1, 2.0, 3),
            (2, 6.0, 5),
            (3, 12.0, 7),
        ]);
        let s3 = sphere_spectrum(3, 1).unwrap();
        assert_eq!(s3.degrees[1].eigenvalue, 3.0);
        assert_eq!(s3.degrees[1].multiplicity, 4);
    }

    #[test]
    fn multiplicities_telescope() {
        for n in 1..=4usize {
            for kmax in 1..=6u32 {
                let spec = sphere_spectrum(n, kmax).unwrap();
                let total: u64 = spec.degrees.iter().map(|d| d.multiplicity).sum();
                let nn = n as u64;
                let kk = kmax as u64;
                assert_eq!(total, binomial(nn + kk, kk) + binomial(nn + kk - 1, kk - 1));
            }
        }
    }

    #[test]
    fn coordinate_eigenmap_is_scaled_identity() {
        let pts = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.6, 0.8, 0.0],
        ];
        let coords = sphere_coordinate_eigenmap(2, &pts).unwrap();
        let c = 3f64.sqrt();
        assert_eq!(coords.coords[(0, 2)], c);
        assert_eq!(coords.coords[(0, 0)], 0.0);
        assert!((coords.coords[(2, 0)] - 0.6 * c).abs() < 1e-15);
        assert!(sphere_coordinate_eigenmap(2, &[vec![0.5, 0.5, 0.5]]).is_err());
    }

    #[test]
    fn remark_lower_bound_holds_for_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::DEFAULT_SEED);
        for _ in 0..200 {
            let a = rng.random_range(0.05..2.0);
            let b = a * rng.random_range(1.0001..8.0);
            let n = rng.random_range(2..6usize);
            let d = torus_embedding_dimension(a, b, n).unwrap();
            // 2^{1-n} V / inj^n with V = a^{n-1} b and inj = a/2 reduces to
            // 2 b / a.
            assert!(
                d as f64 * a >= 2.0 * b,
                "d = {d} below bound for a = {a}, b = {b}, n = {n}"
            );
        }
    }
}
