//! Smallest generalized eigenpairs of `(L, M)` with `M` diagonal.
//!
//! The problem is symmetrized to `B = M^{-1/2} L M^{-1/2}` and solved by
//! Rayleigh-Ritz over a growing Krylov basis kept orthonormal through full
//! reorthogonalization, until the requested pairs have small explicit
//! residuals. The start vector is the normalized all-ones vector plus a
//! fixed-seed perturbation; whenever a pair converges, one fresh seeded
//! direction joins the basis so that further copies of a degenerate
//! eigenvalue are picked up by a new chain instead of depending on rounding
//! noise. Runs on identical input are bit-identical.
//!
//! [`dense_oracle`] solves the same problem through a dense symmetric
//! eigendecomposition and is the reference the iterative path is tested
//! against.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::DEFAULT_SEED;
use crate::laplacian::LaplacianPair;
use crate::{Error, Result};

/// Relative gap under which two consecutive eigenvalues are treated as one
/// degenerate group.
pub const DEGENERACY_TOL: f64 = 1e-3;

/// Largest problem the dense path accepts.
pub const DENSE_CAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending; `eigenvalues[0]` is the near-zero constant mode.
    pub eigenvalues: Vec<f64>,
    /// Columns are M-orthonormal eigenvectors, one per eigenvalue. The entry
    /// of largest magnitude in each column is positive.
    pub eigenvectors: DMatrix<f64>,
    /// Explicit residuals `|| L x - lambda M x ||_2`.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn n_points(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Number of non-constant pairs (total columns minus the constant mode).
    pub fn count(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j).iter().copied().collect()
    }

    /// Order-sensitive hash of the eigenvalue bits, for tagging artifacts
    /// derived from this spectrum.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x1_0000_0000_01b3);
        };
        mix(self.n_points() as u64);
        mix(self.eigenvalues.len() as u64);
        for &l in &self.eigenvalues {
            mix(l.to_bits());
        }
        h
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Convergence requires `|| L x - lambda M x || <= tol * max(1, lambda)`.
    pub tol: f64,
    pub seed: u64,
    /// Hard cap on the Krylov basis size; 0 picks one from the request size.
    pub max_subspace: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            seed: DEFAULT_SEED,
            max_subspace: 0,
        }
    }
}

/// The constant mode plus the `count` smallest non-constant eigenpairs.
pub fn smallest_eigenpairs(lap: &LaplacianPair, count: usize) -> Result<Spectrum> {
    smallest_eigenpairs_opts(lap, count, SolverOptions::default())
}

pub fn smallest_eigenpairs_opts(
    lap: &LaplacianPair,
    count: usize,
    opts: SolverOptions,
) -> Result<Spectrum> {
    let n = lap.n();
    let want = count + 1;
    validate_request(lap, want)?;

    let minv_sqrt: Vec<f64> = lap.mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let apply = |x: &[f64], scratch: &mut [f64], y: &mut [f64]| {
        for i in 0..n {
            scratch[i] = x[i] * minv_sqrt[i];
        }
        lap.stiffness.matvec_into(scratch, y);
        for i in 0..n {
            y[i] *= minv_sqrt[i];
        }
    };

    let cap = if opts.max_subspace == 0 {
        n.min((24 * want + 240).max(600))
    } else {
        opts.max_subspace.min(n)
    };
    if cap < want {
        return Err(Error::InvalidParameter(format!(
            "subspace cap {cap} cannot hold {want} pairs"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap);

    let base = 1.0 / (n as f64).sqrt();
    let mut v0: Vec<f64> = (0..n)
        .map(|_| base * (1.0 + 1e-3 * (rng.random::<f64>() * 2.0 - 1.0)))
        .collect();
    normalize(&mut v0);
    basis.push(v0);

    // Projections of the operator onto the basis, filled column by column as
    // basis vectors are processed; always symmetric.
    let mut t = DMatrix::<f64>::zeros(cap, cap);
    let mut t_abs_max = 0.0f64;
    let mut scratch = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut processed = 0usize;
    // Evenly spaced extraction checkpoints: injected chains need the checks
    // to come steadily, or a late chain runs out of room to converge.
    let check_step = (4 * want).max(48);
    let mut next_check = cap.min(check_step);
    let mut best_worst_residual = f64::INFINITY;
    let mut injected = 0usize;

    loop {
        while processed < basis.len() && processed < next_check {
            let j = processed;
            apply(&basis[j], &mut scratch, &mut w);
            // Two projection passes, both folded into the recorded
            // coefficients; one pass loses orthogonality over long runs.
            for pass in 0..2 {
                for i in 0..basis.len() {
                    let h = dot(&w, &basis[i]);
                    for (wx, bx) in w.iter_mut().zip(&basis[i]) {
                        *wx -= h * bx;
                    }
                    let total = if pass == 0 { h } else { t[(i, j)] + h };
                    t[(i, j)] = total;
                    t[(j, i)] = total;
                    t_abs_max = t_abs_max.max(total.abs());
                }
            }
            processed += 1;

            if basis.len() < cap {
                let beta = norm(&w);
                if beta <= 1e-13 * t_abs_max.max(1.0) {
                    // This column's Krylov direction is exhausted; continue
                    // from a fresh seeded direction (zero coupling).
                    if let Some(v) = fresh_direction(n, &basis, &mut rng) {
                        basis.push(v);
                    }
                } else {
                    for x in &mut w {
                        *x /= beta;
                    }
                    t[(basis.len(), j)] = beta;
                    t[(j, basis.len())] = beta;
                    basis.push(w.clone());
                }
            }
        }

        let spectrum = extract(lap, &minv_sqrt, &basis, &t, processed, want)?;
        let worst = spectrum
            .residuals
            .iter()
            .zip(&spectrum.eigenvalues)
            .map(|(&r, &l)| r / l.abs().max(1.0))
            .fold(0.0, f64::max);
        best_worst_residual = best_worst_residual.min(worst);
        let converged = spectrum
            .residuals
            .iter()
            .zip(&spectrum.eigenvalues)
            .filter(|&(&r, &l)| r <= opts.tol * l.abs().max(1.0))
            .count();
        let complete = spectrum.eigenvalues.len() == want;
        let closed = processed == basis.len();
        // Closure below the cap means no new direction exists: the basis
        // spans an invariant subspace and the Ritz pairs are exact. Closure
        // at the cap is starvation and falls through to the error below.
        let invariant = closed && (basis.len() < cap || basis.len() == n);
        if complete && (worst <= opts.tol || invariant) {
            return Ok(spectrum);
        }
        if processed >= cap || closed {
            return Err(Error::NoConvergence {
                requested: want,
                converged,
                tol: opts.tol,
                worst_residual: best_worst_residual,
            });
        }
        // One fresh seeded direction per converged pair: a single Krylov
        // chain cannot see further copies of a degenerate eigenvalue, so
        // every convergence gets a new chain overlapping whatever remains.
        while injected < converged && basis.len() < cap {
            match fresh_direction(n, &basis, &mut rng) {
                Some(v) => basis.push(v),
                None => break,
            }
            injected += 1;
        }
        next_check = cap.min(next_check + check_step);
    }
}

/// Dense reference solver for the same eigenproblem (`n <=` [`DENSE_CAP`]).
pub fn dense_oracle(lap: &LaplacianPair, count: usize) -> Result<Spectrum> {
    let n = lap.n();
    let want = count + 1;
    validate_request(lap, want)?;
    if n > DENSE_CAP {
        return Err(Error::InvalidParameter(format!(
            "dense solver limited to {DENSE_CAP} points, got {n}"
        )));
    }

    let minv_sqrt: Vec<f64> = lap.mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let mut b = lap.stiffness.to_dense();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= minv_sqrt[i] * minv_sqrt[j];
        }
    }
    let scale = b.abs().max();
    let eig = nalgebra::SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));

    let mut vectors = DMatrix::zeros(n, want);
    let mut values = Vec::with_capacity(want);
    for (out, &idx) in order.iter().take(want).enumerate() {
        values.push(clamp_near_zero(eig.eigenvalues[idx], scale)?);
        for i in 0..n {
            vectors[(i, out)] = eig.eigenvectors[(i, idx)] * minv_sqrt[i];
        }
    }
    finalize(lap, values, vectors)
}

fn validate_request(lap: &LaplacianPair, want: usize) -> Result<()> {
    let n = lap.n();
    if lap.stiffness.n() != n {
        return Err(Error::InvalidParameter(
            "stiffness and mass dimensions disagree".into(),
        ));
    }
    if !lap.mass.iter().all(|&m| m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(
            "mass entries must be positive and finite".into(),
        ));
    }
    if want > n {
        return Err(Error::InvalidParameter(format!(
            "requested {want} pairs from a {n}-point operator"
        )));
    }
    Ok(())
}

/// Ritz extraction from the processed block of the projected operator.
fn extract(
    lap: &LaplacianPair,
    minv_sqrt: &[f64],
    basis: &[Vec<f64>],
    t: &DMatrix<f64>,
    k: usize,
    want: usize,
) -> Result<Spectrum> {
    let n = lap.n();
    let block = t.view((0, 0), (k, k)).into_owned();
    let scale = block.abs().max();
    let eig = nalgebra::SymmetricEigen::new(block);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));

    let take = want.min(k);
    let mut vectors = DMatrix::zeros(n, take);
    let mut values = Vec::with_capacity(take);
    for (out, &idx) in order.iter().take(take).enumerate() {
        values.push(clamp_near_zero(eig.eigenvalues[idx], scale)?);
        for (j, basis_vec) in basis.iter().take(k).enumerate() {
            let s = eig.eigenvectors[(j, idx)];
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                vectors[(i, out)] += s * basis_vec[i];
            }
        }
        for i in 0..n {
            vectors[(i, out)] *= minv_sqrt[i];
        }
    }
    finalize(lap, values, vectors)
}

/// Shared tail: sign normalization and explicit residuals.
fn finalize(lap: &LaplacianPair, mut values: Vec<f64>, mut vectors: DMatrix<f64>) -> Result<Spectrum> {
    let n = lap.n();
    for j in 0..vectors.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..n {
            let a = vectors[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if vectors[(best, j)] < 0.0 {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }

    // With unit total mass the M-normalized constant eigenvector is the
    // all-ones vector; snap to it so downstream identities hold exactly.
    let total_mass: f64 = lap.mass.iter().sum();
    let lambda_scale = values.last().map_or(1.0, |l| l.abs()).max(1.0);
    if !values.is_empty()
        && values[0].abs() <= 1e-9 * lambda_scale
        && (total_mass - 1.0).abs() <= 1e-12
        && (0..n).all(|i| (vectors[(i, 0)] - 1.0).abs() <= 1e-6)
    {
        values[0] = 0.0;
        for i in 0..n {
            vectors[(i, 0)] = 1.0;
        }
    }

    let mut residuals = Vec::with_capacity(values.len());
    let mut lx = vec![0.0; n];
    for (j, &lambda) in values.iter().enumerate() {
        let x: Vec<f64> = (0..n).map(|i| vectors[(i, j)]).collect();
        lap.stiffness.matvec_into(&x, &mut lx);
        let mut r2 = 0.0;
        for i in 0..n {
            let r = lx[i] - lambda * lap.mass[i] * x[i];
            r2 += r * r;
        }
        residuals.push(r2.sqrt());
    }

    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
    })
}

/// Maps a tiny negative Ritz value to zero; anything more negative than the
/// PSD allowance is an input error.
fn clamp_near_zero(lambda: f64, scale: f64) -> Result<f64> {
    if lambda >= 0.0 {
        return Ok(lambda);
    }
    if lambda >= -1e-9 * scale.max(1.0) {
        return Ok(0.0);
    }
    Err(Error::NotPositiveSemidefinite {
        ritz: lambda,
        scale,
    })
}

fn fresh_direction(n: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if basis.len() >= n {
        return None;
    }
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        orthogonalize(&mut v, basis);
        orthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            for x in &mut v {
                *x /= nv;
            }
            return Some(v);
        }
    }
    None
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for v in basis {
        let c = dot(w, v);
        if c != 0.0 {
            for i in 0..w.len() {
                w[i] -= c * v[i];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    for x in a {
        *x /= n;
    }
}

/// Maximal gap-free runs of eigenvalues under a relative threshold:
/// consecutive values belong together when their gap is at most
/// `tol * max(|later value|, |first positive value|)`.
pub fn degenerate_groups(eigenvalues: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let floor = eigenvalues
        .iter()
        .copied()
        .find(|&l| l > 0.0)
        .unwrap_or(f64::MIN_POSITIVE);
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=eigenvalues.len() {
        let split = i == eigenvalues.len() || {
            let gap = eigenvalues[i] - eigenvalues[i - 1];
            gap > tol * eigenvalues[i].abs().max(floor)
        };
        if split {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

/// Largest principal angle (radians) between the column spans of `a` and
/// `b`, both with M-orthonormal columns.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, mass: &[f64]) -> f64 {
    assert_eq!(a.ncols(), b.ncols());
    let g = a.ncols();
    let mut c = DMatrix::zeros(g, g);
    for p in 0..g {
        for q in 0..g {
            let mut acc = 0.0;
            for i in 0..a.nrows() {
                acc += a[(i, p)] * mass[i] * b[(i, q)];
            }
            c[(p, q)] = acc;
        }
    }
    let svd = c.svd(false, false);
    let sigma_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    sigma_min.clamp(-1.0, 1.0).acos()
}

/// Largest deviation of `Phi^T M Phi` from the identity.
pub fn gram_error(spec: &Spectrum, mass: &[f64]) -> f64 {
    let cols = spec.eigenvalues.len();
    let mut worst = 0.0f64;
    for p in 0..cols {
        for q in p..cols {
            let mut acc = 0.0;
            for i in 0..spec.n_points() {
                acc += spec.eigenvectors[(i, p)] * mass[i] * spec.eigenvectors[(i, q)];
            }
            let target = if p == q { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{icosphere, PointCloud};
    use crate::laplacian::{
        cotangent_laplacian, gaussian_graph_laplacian, Bandwidth, GraphLaplacianParams,
        LaplacianKind,
    };
    use crate::sparse::SparseSym;

    fn pair_from_dense(stiffness: Vec<(u32, u32, f64)>, mass: Vec<f64>) -> LaplacianPair {
        let n = mass.len();
        LaplacianPair {
            stiffness: SparseSym::from_upper_triplets(n, &stiffness).unwrap(),
            mass,
            kind: LaplacianKind::GaussianGraph,
            bandwidth: None,
        }
    }

    fn cycle_graph(n: usize) -> LaplacianPair {
        let mut triplets = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            let (lo, hi) = (i.min(j) as u32, i.max(j) as u32);
            triplets.push((lo, hi, -1.0));
            triplets.push((lo, lo, 1.0));
            triplets.push((hi, hi, 1.0));
        }
        pair_from_dense(triplets, vec![1.0 / n as f64; n])
    }

    #[test]
    fn two_point_eigenvalues() {
        let lap = pair_from_dense(
            vec![(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0)],
            vec![0.5, 0.5],
        );
        for spec in [
            dense_oracle(&lap, 1).unwrap(),
            smallest_eigenpairs(&lap, 1).unwrap(),
        ] {
            assert!(spec.eigenvalues[0].abs() < 1e-12);
            assert!((spec.eigenvalues[1] - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_graph_identity_mass() {
        let lap = pair_from_dense(
            vec![
                (0, 0, 1.0),
                (0, 1, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 2, 1.0),
            ],
            vec![1.0, 1.0, 1.0],
        );
        let spec = dense_oracle(&lap, 2).unwrap();
        let expected = [0.0, 1.0, 3.0];
        for (l, e) in spec.eigenvalues.iter().zip(expected) {
            assert!((l - e).abs() < 1e-12, "{l} vs {e}");
        }
    }

    #[test]
    fn cycle_eigenvalues_come_in_pairs() {
        let lap = cycle_graph(8);
        let dense = dense_oracle(&lap, 7).unwrap();
        let lanczos = smallest_eigenpairs(&lap, 7).unwrap();
        // Uniform mass 1/8 scales the standard cycle spectrum by 8.
        let closed: Vec<f64> = (0..8)
            .map(|k| 8.0 * (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos()))
            .collect();
        let mut sorted = closed.clone();
        sorted.sort_by(f64::total_cmp);
        for j in 0..8 {
            assert!((dense.eigenvalues[j] - sorted[j]).abs() < 1e-10);
            assert!((lanczos.eigenvalues[j] - dense.eigenvalues[j]).abs() < 1e-8);
        }
        // Interior eigenvalues are doubled.
        assert!((dense.eigenvalues[1] - dense.eigenvalues[2]).abs() < 1e-10);
        assert!((dense.eigenvalues[3] - dense.eigenvalues[4]).abs() < 1e-10);
    }

    #[test]
    fn constant_mode_only() {
        let lap = cotangent_laplacian(&icosphere(1)).unwrap();
        let spec = smallest_eigenpairs(&lap, 0).unwrap();
        assert_eq!(spec.eigenvalues.len(), 1);
        assert!(spec.eigenvalues[0].abs() < 1e-10);
        // Total mass 1 makes the normalized constant eigenvector the all-ones
        // vector.
        for i in 0..spec.n_points() {
            assert!((spec.eigenvectors[(i, 0)] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn icosphere_lanczos_matches_dense() {
        let lap = cotangent_laplacian(&icosphere(2)).unwrap();
        let dense = dense_oracle(&lap, 12).unwrap();
        let lanczos = smallest_eigenpairs(&lap, 12).unwrap();
        for j in 0..=12 {
            assert!(
                (dense.eigenvalues[j] - lanczos.eigenvalues[j]).abs() <= 1e-8,
                "j = {j}: {} vs {}",
                dense.eigenvalues[j],
                lanczos.eigenvalues[j]
            );
        }
        assert!(gram_error(&lanczos, &lap.mass) < 1e-10);
        assert!(gram_error(&dense, &lap.mass) < 1e-10);
        assert!(lanczos.eigenvalues[0] >= 0.0);
        assert!(lanczos.eigenvalues[0] <= 1e-8 * lanczos.eigenvalues[1]);

        // The first sphere multiplet is exactly degenerate on a symmetric
        // mesh; compare its subspaces across the two solvers.
        let groups = degenerate_groups(&dense.eigenvalues[1..], DEGENERACY_TOL);
        assert_eq!(groups[0], 0..3);
        let a = dense.eigenvectors.columns(1, 3).into_owned();
        let b = lanczos.eigenvectors.columns(1, 3).into_owned();
        assert!(max_principal_angle(&a, &b, &lap.mass) < 1e-6);
    }

    #[test]
    fn runs_are_bit_identical() {
        let lap = cotangent_laplacian(&icosphere(1)).unwrap();
        let a = smallest_eigenpairs(&lap, 6).unwrap();
        let b = smallest_eigenpairs(&lap, 6).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn start_vector_does_not_move_degenerate_subspaces() {
        let lap = cotangent_laplacian(&icosphere(1)).unwrap();
        let a = smallest_eigenpairs(&lap, 8).unwrap();
        let b = smallest_eigenpairs_opts(
            &lap,
            8,
            SolverOptions {
                seed: 1234,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-8);
        }
        for g in degenerate_groups(&a.eigenvalues, DEGENERACY_TOL) {
            let va = a.eigenvectors.columns(g.start, g.len()).into_owned();
            let vb = b.eigenvectors.columns(g.start, g.len()).into_owned();
            assert!(max_principal_angle(&va, &vb, &lap.mass) < 1e-6);
        }
    }

    #[test]
    fn oversized_request_is_rejected() {
        let lap = cycle_graph(8);
        assert!(matches!(
            smallest_eigenpairs(&lap, 8),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn starved_subspace_reports_no_convergence() {
        let lap = cotangent_laplacian(&icosphere(2)).unwrap();
        let err = smallest_eigenpairs_opts(
            &lap,
            12,
            SolverOptions {
                max_subspace: 14,
                ..SolverOptions::default()
            },
        )
        .unwrap_err();
        match err {
            Error::NoConvergence { requested, .. } => assert_eq!(requested, 13),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn circle_cloud_eigenvalue_ratios() {
        let n = 400;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let lap = gaussian_graph_laplacian(
            &cloud,
            GraphLaplacianParams {
                k: 2,
                bandwidth: Bandwidth::Auto,
            },
        )
        .unwrap();
        let spec = smallest_eigenpairs(&lap, 6).unwrap();
        let expected = [1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
        for (j, e) in expected.iter().enumerate() {
            let ratio = spec.eigenvalues[j + 1] / spec.eigenvalues[1];
            assert!((ratio - e).abs() / e < 0.05, "mode {j}: ratio {ratio}");
        }
    }

    #[test]
    fn grouping_splits_on_relative_gaps() {
        let ev = [0.0, 2.0, 2.0005, 2.001, 6.0, 6.0001, 11.0];
        let groups = degenerate_groups(&ev, 1e-3);
        assert_eq!(groups, vec![0..1, 1..4, 4..6, 6..7]);
    }
}
