//! Registration of two shapes through their Laplacian eigenfunctions.
//!
//! Each eigenfunction is only determined up to sign, and within a repeated
//! eigenvalue only up to an orthogonal change of basis, so two spectra of
//! the same shape land in coordinates that disagree by exactly those
//! transforms. [`sign_search`] resolves the signs, [`align_degenerate_groups`]
//! fits one orthogonal block per degenerate group, [`register`] composes the
//! two, and [`match_closest`] turns aligned coordinates into a vertex map.
//! [`stability_probe`] measures how the matched image moves under small
//! perturbations of the geometry.

use std::ops::Range;
use std::thread;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance::DEFAULT_SEED;
use crate::eigen::{degenerate_groups, smallest_eigenpairs, Spectrum, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::laplacian::cotangent_laplacian;
use crate::maps::eigenmap;

/// Hill climbs launched from random sign vectors after the all-positive start.
pub const GREEDY_RESTARTS: usize = 8;

/// Exhaustive search enumerates at most `2^14` sign vectors.
pub const EXHAUSTIVE_MAX_COLUMNS: usize = 14;

/// Grouping tolerance when comparing a shape against a perturbed copy of
/// itself: degenerate eigenvalues split in proportion to the perturbation,
/// so the strict solver tolerance would tear groups apart.
pub const STABILITY_GROUP_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Greedy,
}

/// Vertex-to-vertex assignment between two embedded shapes.
#[derive(Debug, Clone)]
pub struct Correspondence {
    /// For each source vertex, the closest target vertex.
    pub map: Vec<usize>,
    /// Sum of squared image distances over all source vertices.
    pub cost: f64,
    /// Sign applied to each target column before matching.
    pub signs: Vec<i8>,
    /// Orthogonal blocks applied to the target columns before matching.
    pub alignment: GroupAlignment,
}

impl Correspondence {
    pub fn identity_fraction(&self) -> f64 {
        if self.map.is_empty() {
            return 1.0;
        }
        let hits = self.map.iter().enumerate().filter(|&(i, &j)| i == j).count();
        hits as f64 / self.map.len() as f64
    }

    /// Target coordinates after the blocks and sign flips used here.
    pub fn transformed_target(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.alignment.apply(b);
        for (j, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                for i in 0..out.nrows() {
                    out[(i, j)] = -out[(i, j)];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SignSearchOutcome {
    /// Winning sign per map column.
    pub signs: Vec<i8>,
    pub correspondence: Correspondence,
    /// Cost evaluations performed by the search.
    pub candidates_evaluated: usize,
}

/// Per-group orthogonal transforms of map columns; identity for groups of
/// size one.
#[derive(Debug, Clone)]
pub struct GroupAlignment {
    /// Column ranges sharing an eigenvalue, in ascending order.
    pub groups: Vec<Range<usize>>,
    pub blocks: Vec<DMatrix<f64>>,
}

impl GroupAlignment {
    pub fn empty() -> Self {
        Self {
            groups: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn apply(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = coords.clone();
        for (g, block) in self.groups.iter().zip(&self.blocks) {
            if g.len() > 1 {
                let sub = coords.columns(g.start, g.len()) * block;
                out.columns_mut(g.start, g.len()).copy_from(&sub);
            }
        }
        out
    }
}

/// Exact nearest-neighbor assignment of each row of `a` to a row of `b`,
/// ties going to the lowest target index.
pub fn match_closest(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Correspondence> {
    if a.ncols() != b.ncols() {
        return Err(Error::InvalidParameter(format!(
            "coordinate dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    if b.nrows() == 0 {
        return Err(Error::InvalidParameter("no target points to match".into()));
    }
    let tree = KdTree::new(b);
    let mut map = Vec::with_capacity(a.nrows());
    let mut cost = 0.0;
    let mut q = vec![0.0; a.ncols()];
    for i in 0..a.nrows() {
        for c in 0..a.ncols() {
            q[c] = a[(i, c)];
        }
        let (j, d2) = tree.nearest(&q);
        map.push(j);
        cost += d2;
    }
    Ok(Correspondence {
        map,
        cost,
        signs: vec![1; a.ncols()],
        alignment: GroupAlignment::empty(),
    })
}

/// Search over sign flips of the target's map columns, returning the
/// lowest-cost correspondence found.
pub fn sign_search(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
    mode: SearchMode,
) -> Result<SignSearchOutcome> {
    let a = eigenmap(spec_a, m)?.coords;
    let b = eigenmap(spec_b, m)?.coords;
    let free: Vec<usize> = (0..m).collect();
    search_over(&a, &b, &free, GroupAlignment::empty(), mode)
}

/// Compare the degenerate-group structure of both spectra over the first `m`
/// map columns and fit one orthogonal block per group, seeded by a coarse
/// vertex pre-match on heat signatures.
pub fn align_degenerate_groups(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
) -> Result<GroupAlignment> {
    align_degenerate_groups_tol(spec_a, spec_b, m, DEGENERACY_TOL)
}

pub fn align_degenerate_groups_tol(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
    tol: f64,
) -> Result<GroupAlignment> {
    let groups = matched_groups(spec_a, spec_b, m, tol)?;
    if groups.iter().all(|g| g.len() <= 1) {
        return Ok(identity_alignment(groups));
    }
    let pre = heat_prematch(spec_a, spec_b)?;
    align_groups_seeded(spec_a, spec_b, m, tol, &pre)
}

/// Same as [`align_degenerate_groups`] but with an explicit pre-match giving,
/// for each source vertex, a target vertex believed to correspond. Useful
/// when the correspondence is known by construction, as when comparing a
/// shape against a perturbation of itself.
pub fn align_groups_seeded(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
    tol: f64,
    prematch: &[usize],
) -> Result<GroupAlignment> {
    let groups = matched_groups(spec_a, spec_b, m, tol)?;
    if prematch.len() != spec_a.n_points() {
        return Err(Error::InvalidParameter(format!(
            "pre-match covers {} of {} source vertices",
            prematch.len(),
            spec_a.n_points()
        )));
    }
    if let Some(&bad) = prematch.iter().find(|&&j| j >= spec_b.n_points()) {
        return Err(Error::InvalidParameter(format!(
            "pre-match target {bad} out of range"
        )));
    }
    let a = eigenmap(spec_a, m)?.coords;
    let b = eigenmap(spec_b, m)?.coords;
    let blocks = groups
        .iter()
        .map(|g| {
            if g.len() <= 1 {
                DMatrix::identity(g.len(), g.len())
            } else {
                procrustes_block(&a, &b, g.clone(), prematch)
            }
        })
        .collect();
    Ok(GroupAlignment { groups, blocks })
}

/// Full pipeline: group alignment composed with a sign search over the
/// remaining simple columns, then closest-point matching.
pub fn register(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
    mode: SearchMode,
) -> Result<SignSearchOutcome> {
    register_tol(spec_a, spec_b, m, mode, DEGENERACY_TOL)
}

pub fn register_tol(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
    mode: SearchMode,
    tol: f64,
) -> Result<SignSearchOutcome> {
    let groups = matched_groups(spec_a, spec_b, m, tol)?;
    let a = eigenmap(spec_a, m)?.coords;
    let b = eigenmap(spec_b, m)?.coords;
    let free: Vec<usize> = groups
        .iter()
        .filter(|g| g.len() == 1)
        .map(|g| g.start)
        .collect();
    if free.len() == m {
        return search_over(&a, &b, &free, identity_alignment(groups), mode);
    }

    // The Procrustes fit is only as good as its pre-match seed, so try the
    // available seeds and keep whichever final correspondence is cheapest:
    // heat signatures work on shapes with distinguishable points, the
    // identity works whenever the two inputs share a vertex labeling.
    let mut seeds = vec![heat_prematch(spec_a, spec_b)?];
    if spec_a.n_points() == spec_b.n_points() {
        seeds.push((0..spec_a.n_points()).collect());
    }
    let mut best: Option<SignSearchOutcome> = None;
    let mut evaluated = 0;
    for pre in &seeds {
        let alignment = align_groups_seeded(spec_a, spec_b, m, tol, pre)?;
        let aligned_b = alignment.apply(&b);
        let out = search_over(&a, &aligned_b, &free, alignment, mode)?;
        evaluated += out.candidates_evaluated;
        if best
            .as_ref()
            .is_none_or(|cur| out.correspondence.cost < cur.correspondence.cost)
        {
            best = Some(out);
        }
    }
    let mut best = best.expect("at least one seed");
    best.candidates_evaluated = evaluated;
    Ok(best)
}

/// Heat-kernel diagonal at four log-spaced times, one row per vertex. The
/// values are invariant under sign flips and under orthogonal basis changes
/// inside complete degenerate groups, which makes them usable for matching
/// before any alignment exists.
pub fn heat_signatures(spec: &Spectrum) -> Result<DMatrix<f64>> {
    let l1 = *spec.eigenvalues.get(1).ok_or_else(|| {
        Error::InvalidParameter("signatures need at least one non-constant mode".into())
    })?;
    if !(l1 > 0.0) {
        return Err(Error::InvalidParameter(
            "signatures need a positive first eigenvalue".into(),
        ));
    }
    let llast = *spec.eigenvalues.last().unwrap();
    let (lo, hi) = ((1.0 / (10.0 * llast)).ln(), (10.0 / l1).ln());
    let n = spec.n_points();
    let mut sig = DMatrix::zeros(n, 4);
    for col in 0..4 {
        let t = (lo + (hi - lo) * col as f64 / 3.0).exp();
        for x in 0..n {
            let mut acc = 0.0;
            for (j, &lambda) in spec.eigenvalues.iter().enumerate() {
                let phi = spec.eigenvectors[(x, j)];
                acc += (-lambda * t).exp() * phi * phi;
            }
            sig[(x, col)] = acc;
        }
    }
    Ok(sig)
}

fn heat_prematch(spec_a: &Spectrum, spec_b: &Spectrum) -> Result<Vec<usize>> {
    let sa = heat_signatures(spec_a)?;
    let sb = heat_signatures(spec_b)?;
    Ok(match_closest(&sa, &sb)?.map)
}

fn matched_groups(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    m: usize,
    tol: f64,
) -> Result<Vec<Range<usize>>> {
    for (label, spec) in [("first", spec_a), ("second", spec_b)] {
        if spec.count() < m + 1 {
            return Err(Error::InvalidParameter(format!(
                "m = {m} needs {} modes, the {label} spectrum has {}",
                m + 1,
                spec.count()
            )));
        }
    }
    let ga = degenerate_groups(&spec_a.eigenvalues[1..=m], tol);
    let gb = degenerate_groups(&spec_b.eigenvalues[1..=m], tol);
    for index in 0..ga.len().max(gb.len()) {
        let size_a = ga.get(index).map_or(0, |r| r.len());
        let size_b = gb.get(index).map_or(0, |r| r.len());
        if size_a != size_b {
            return Err(Error::GroupMismatch {
                index,
                size_a,
                size_b,
            });
        }
    }
    Ok(ga)
}

fn identity_alignment(groups: Vec<Range<usize>>) -> GroupAlignment {
    let blocks = groups
        .iter()
        .map(|g| DMatrix::identity(g.len(), g.len()))
        .collect();
    GroupAlignment { groups, blocks }
}

/// Orthogonal `R` minimizing `|| B[pre(x), cols] R - A[x, cols] ||_F`.
fn procrustes_block(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    cols: Range<usize>,
    prematch: &[usize],
) -> DMatrix<f64> {
    let g = cols.len();
    let mut c = DMatrix::<f64>::zeros(g, g);
    for (x, &bx) in prematch.iter().enumerate() {
        for i in 0..g {
            for j in 0..g {
                c[(i, j)] += b[(bx, cols.start + i)] * a[(x, cols.start + j)];
            }
        }
    }
    let svd = c.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Measure how far the matched spectral image moves when the mesh is
/// perturbed by a smooth random displacement field of sup-norm
/// `epsilon * mean edge length`, for each requested epsilon.
pub fn stability_probe(
    mesh: &TriangleMesh,
    epsilons: &[f64],
    m: usize,
    seed: u64,
) -> Result<StabilityReport> {
    for &eps in epsilons {
        if !(0.0..=0.3).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {eps} outside [0, 0.3]"
            )));
        }
    }
    let spec_a = smallest_eigenpairs(&cotangent_laplacian(mesh)?, m + 1)?;
    let a = eigenmap(&spec_a, m)?.coords;
    let h = mesh.mean_edge_length();
    let field = smooth_field(mesh.positions(), seed);

    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let perturbed = if eps == 0.0 {
            mesh.clone()
        } else {
            mesh.with_positions(|i, p| {
                [
                    p[0] + eps * h * field[i][0],
                    p[1] + eps * h * field[i][1],
                    p[2] + eps * h * field[i][2],
                ]
            })?
        };
        let spec_b = smallest_eigenpairs(&cotangent_laplacian(&perturbed)?, m + 1)?;
        match register_tol(&spec_a, &spec_b, m, SearchMode::Exhaustive, STABILITY_GROUP_TOL) {
            Ok(out) => {
                let b = eigenmap(&spec_b, m)?.coords;
                let bt = out.correspondence.transformed_target(&b);
                let mut sup = 0.0f64;
                for (x, &y) in out.correspondence.map.iter().enumerate() {
                    let mut d2 = 0.0;
                    for c in 0..m {
                        let d = bt[(y, c)] - a[(x, c)];
                        d2 += d * d;
                    }
                    sup = sup.max(d2.sqrt());
                }
                points.push(StabilityPoint {
                    epsilon: eps,
                    sup_displacement: sup,
                    identity_fraction: out.correspondence.identity_fraction(),
                    aligned: true,
                });
            }
            Err(Error::GroupMismatch { .. }) => points.push(StabilityPoint {
                epsilon: eps,
                sup_displacement: f64::NAN,
                identity_fraction: 0.0,
                aligned: false,
            }),
            Err(e) => return Err(e),
        }
    }
    let trend_ok = displacement_trend_ok(&points);
    Ok(StabilityReport { points, trend_ok })
}

#[derive(Debug, Clone)]
pub struct StabilityPoint {
    pub epsilon: f64,
    /// Largest distance between a source image and its matched, aligned
    /// target image; NaN when alignment failed.
    pub sup_displacement: f64,
    pub identity_fraction: f64,
    pub aligned: bool,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub points: Vec<StabilityPoint>,
    /// Displacement nonincreasing as epsilon shrinks, allowing one inversion
    /// of at most 10% among the points that aligned.
    pub trend_ok: bool,
}

fn displacement_trend_ok(points: &[StabilityPoint]) -> bool {
    let mut sups: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.aligned)
        .map(|p| (p.epsilon, p.sup_displacement))
        .collect();
    sups.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut inversions = 0;
    for w in sups.windows(2) {
        if w[1].1 > w[0].1 {
            inversions += 1;
            if inversions > 1 || w[1].1 > 1.10 * w[0].1 {
                return false;
            }
        }
    }
    true
}

/// Sum of a few random plane waves per component, normalized to sup-norm 1
/// over the given points. Wavelengths are on the order of the shape size,
/// so nearby vertices move together and triangles survive.
fn smooth_field(positions: &[[f64; 3]], seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves = Vec::with_capacity(18);
    for c in 0..3 {
        for _ in 0..6 {
            let k = [
                rng.random::<f64>() * 3.0 - 1.5,
                rng.random::<f64>() * 3.0 - 1.5,
                rng.random::<f64>() * 3.0 - 1.5,
            ];
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let amp = rng.random::<f64>() * 2.0 - 1.0;
            waves.push((c, amp, k, phase));
        }
    }
    let mut field = vec![[0.0; 3]; positions.len()];
    for (f, p) in field.iter_mut().zip(positions) {
        for &(c, amp, k, phase) in &waves {
            f[c] += amp * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).sin();
        }
    }
    let sup = field
        .iter()
        .map(|f| (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt())
        .fold(0.0, f64::max);
    if sup > 0.0 {
        for f in &mut field {
            for c in f {
                *c /= sup;
            }
        }
    }
    field
}

struct SignProblem<'a> {
    a: &'a DMatrix<f64>,
    tree: &'a KdTree<'a>,
    free: &'a [usize],
}

impl SignProblem<'_> {
    /// Cost of flipping the free columns whose bit is set. Flipping the
    /// target's columns changes every pairwise distance exactly as flipping
    /// the source's, so queries flip and the tree is built once.
    fn cost(&self, bits: u64) -> f64 {
        let m = self.a.ncols();
        let mut s = vec![1.0; m];
        for (k, &col) in self.free.iter().enumerate() {
            if bits >> k & 1 == 1 {
                s[col] = -1.0;
            }
        }
        let mut q = vec![0.0; m];
        let mut total = 0.0;
        for i in 0..self.a.nrows() {
            for c in 0..m {
                q[c] = s[c] * self.a[(i, c)];
            }
            total += self.tree.nearest(&q).1;
        }
        total
    }

    fn matched(&self, bits: u64) -> (Vec<usize>, f64) {
        let m = self.a.ncols();
        let mut s = vec![1.0; m];
        for (k, &col) in self.free.iter().enumerate() {
            if bits >> k & 1 == 1 {
                s[col] = -1.0;
            }
        }
        let mut q = vec![0.0; m];
        let mut map = Vec::with_capacity(self.a.nrows());
        let mut cost = 0.0;
        for i in 0..self.a.nrows() {
            for c in 0..m {
                q[c] = s[c] * self.a[(i, c)];
            }
            let (j, d2) = self.tree.nearest(&q);
            map.push(j);
            cost += d2;
        }
        (map, cost)
    }
}

fn search_over(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    free: &[usize],
    alignment: GroupAlignment,
    mode: SearchMode,
) -> Result<SignSearchOutcome> {
    if free.len() > 63 {
        return Err(Error::InvalidParameter(format!(
            "{} sign columns cannot be encoded in a 64-bit mask",
            free.len()
        )));
    }
    if mode == SearchMode::Exhaustive && free.len() > EXHAUSTIVE_MAX_COLUMNS {
        return Err(Error::InvalidParameter(format!(
            "exhaustive sign search supports at most {EXHAUSTIVE_MAX_COLUMNS} columns, got {}",
            free.len()
        )));
    }
    if b.nrows() == 0 {
        return Err(Error::InvalidParameter("no target points to match".into()));
    }
    let tree = KdTree::new(b);
    let problem = SignProblem {
        a,
        tree: &tree,
        free,
    };
    let (bits, evaluated) = match mode {
        SearchMode::Exhaustive => exhaustive_search(&problem),
        SearchMode::Greedy => greedy_search(&problem),
    };
    let mut signs = vec![1i8; a.ncols()];
    for (k, &col) in free.iter().enumerate() {
        if bits >> k & 1 == 1 {
            signs[col] = -1;
        }
    }
    let (map, cost) = problem.matched(bits);
    Ok(SignSearchOutcome {
        signs: signs.clone(),
        correspondence: Correspondence {
            map,
            cost,
            signs,
            alignment,
        },
        candidates_evaluated: evaluated,
    })
}

fn worker_count(tasks: usize) -> usize {
    let configured = std::env::var("LAPEMB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1);
    configured
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |p| p.get()))
        .min(tasks)
        .max(1)
}

/// All `2^free` sign vectors, split over worker threads. The reduction is
/// by (cost, bits), so the result does not depend on thread interleaving.
fn exhaustive_search(problem: &SignProblem) -> (u64, usize) {
    let total = 1u64 << problem.free.len();
    let workers = worker_count(total as usize);
    let chunk = total.div_ceil(workers as u64);
    let mut per_worker = Vec::with_capacity(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = w as u64 * chunk;
                let hi = (lo + chunk).min(total);
                scope.spawn(move || {
                    let mut best = (f64::INFINITY, u64::MAX);
                    for bits in lo..hi {
                        let c = problem.cost(bits);
                        if c < best.0 {
                            best = (c, bits);
                        }
                    }
                    best
                })
            })
            .collect();
        for h in handles {
            per_worker.push(h.join().expect("search worker"));
        }
    });
    let mut best = (f64::INFINITY, u64::MAX);
    for (c, bits) in per_worker {
        if c < best.0 || (c == best.0 && bits < best.1) {
            best = (c, bits);
        }
    }
    (best.1, total as usize)
}

fn greedy_search(problem: &SignProblem) -> (u64, usize) {
    let mask = (1u64 << problem.free.len()) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut starts = vec![0u64];
    for _ in 0..GREEDY_RESTARTS {
        starts.push(rng.random::<u64>() & mask);
    }
    let workers = worker_count(starts.len());
    let chunk = starts.len().div_ceil(workers);
    let mut runs = Vec::with_capacity(starts.len());
    thread::scope(|scope| {
        let handles: Vec<_> = starts
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&start| hill_climb(problem, start))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            runs.extend(h.join().expect("search worker"));
        }
    });
    let mut best = (f64::INFINITY, u64::MAX);
    let mut evaluated = 0;
    for (cost, bits, evals) in runs {
        evaluated += evals;
        if cost < best.0 || (cost == best.0 && bits < best.1) {
            best = (cost, bits);
        }
    }
    (best.1, evaluated)
}

/// Single-flip descent to a local optimum; first improving tie wins.
fn hill_climb(problem: &SignProblem, start: u64) -> (f64, u64, usize) {
    let mut cur = start;
    let mut cur_cost = problem.cost(cur);
    let mut evals = 1;
    loop {
        let mut step = None;
        for k in 0..problem.free.len() {
            let cand = cur ^ (1u64 << k);
            let c = problem.cost(cand);
            evals += 1;
            if c < step.map_or(cur_cost, |(sc, _)| sc) {
                step = Some((c, cand));
            }
        }
        match step {
            Some((c, cand)) => {
                cur = cand;
                cur_cost = c;
            }
            None => return (cur_cost, cur, evals),
        }
    }
}

/// Static k-d tree over the rows of a matrix. Nodes are stored implicitly:
/// each segment's midpoint is its root, halves are subtrees.
struct KdTree<'a> {
    points: &'a DMatrix<f64>,
    order: Vec<u32>,
}

impl<'a> KdTree<'a> {
    fn new(points: &'a DMatrix<f64>) -> Self {
        let mut order: Vec<u32> = (0..points.nrows() as u32).collect();
        if points.ncols() > 0 {
            build(points, &mut order, 0);
        }
        Self { points, order }
    }

    /// Exact nearest row to `q` as `(row, squared distance)`; among equally
    /// close rows the lowest index wins.
    fn nearest(&self, q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.descend(&self.order, 0, q, &mut best);
        (best.0, best.1)
    }

    fn descend(&self, seg: &[u32], depth: usize, q: &[f64], best: &mut (usize, f64)) {
        if seg.is_empty() {
            return;
        }
        let mid = seg.len() / 2;
        let idx = seg[mid] as usize;
        let mut d2 = 0.0;
        for (c, &qc) in q.iter().enumerate() {
            let d = self.points[(idx, c)] - qc;
            d2 += d * d;
        }
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        if seg.len() == 1 {
            return;
        }
        let axis = depth % q.len().max(1);
        let gap = q[axis] - self.points[(idx, axis)];
        let (near, far) = if gap < 0.0 {
            (&seg[..mid], &seg[mid + 1..])
        } else {
            (&seg[mid + 1..], &seg[..mid])
        };
        self.descend(near, depth + 1, q, best);
        // An equally distant, lower-index row may sit on the far side.
        if gap * gap <= best.1 {
            self.descend(far, depth + 1, q, best);
        }
    }
}

fn build(points: &DMatrix<f64>, seg: &mut [u32], depth: usize) {
    if seg.len() <= 1 {
        return;
    }
    let axis = depth % points.ncols();
    let mid = seg.len() / 2;
    seg.select_nth_unstable_by(mid, |&x, &y| {
        points[(x as usize, axis)]
            .total_cmp(&points[(y as usize, axis)])
            .then(x.cmp(&y))
    });
    let (lo, rest) = seg.split_at_mut(mid);
    build(points, lo, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bumpy_sphere, icosphere};
    use rand::seq::SliceRandom;

    fn spectrum_of(mesh: &TriangleMesh, want: usize) -> Spectrum {
        smallest_eigenpairs(&cotangent_laplacian(mesh).unwrap(), want).unwrap()
    }

    fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        perm
    }

    #[test]
    fn deformed_sphere_spectrum_is_simple() {
        let spec = spectrum_of(&bumpy_sphere(2), 8);
        let groups = degenerate_groups(&spec.eigenvalues[1..], DEGENERACY_TOL);
        assert!(
            groups.iter().all(|g| g.len() == 1),
            "eigenvalues {:?} grouped as {groups:?}",
            spec.eigenvalues
        );
    }

    #[test]
    fn matching_a_shape_to_itself_is_free() {
        let spec = spectrum_of(&bumpy_sphere(1), 5);
        let coords = eigenmap(&spec, 4).unwrap().coords;
        let c = match_closest(&coords, &coords).unwrap();
        assert_eq!(c.cost, 0.0);
        assert!(c.map.iter().enumerate().all(|(i, &j)| i == j));
    }

    #[test]
    fn permuted_rows_match_back() {
        let spec = spectrum_of(&bumpy_sphere(1), 5);
        let coords = eigenmap(&spec, 4).unwrap().coords;
        let perm = seeded_permutation(coords.nrows(), 7);
        let mut permuted = coords.clone();
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..coords.ncols() {
                permuted[(p, c)] = coords[(i, c)];
            }
        }
        let c = match_closest(&coords, &permuted).unwrap();
        assert_eq!(c.cost, 0.0);
        assert_eq!(c.map, perm);
    }

    #[test]
    fn global_flip_is_expensive_without_alignment() {
        let spec = spectrum_of(&bumpy_sphere(2), 5);
        let coords = eigenmap(&spec, 4).unwrap().coords;
        let flipped = -coords.clone();
        let c = match_closest(&coords, &flipped).unwrap();
        assert!(c.cost > 1.0, "cost {}", c.cost);
    }

    #[test]
    fn cost_is_invariant_under_simultaneous_flips() {
        let spec = spectrum_of(&bumpy_sphere(1), 5);
        let coords = eigenmap(&spec, 4).unwrap().coords;
        let perm = seeded_permutation(coords.nrows(), 3);
        let mut target = coords.clone();
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..coords.ncols() {
                target[(p, c)] = coords[(i, c)] + 0.01 * ((i * c) as f64).sin();
            }
        }
        let plain = match_closest(&coords, &target).unwrap();
        let mut a2 = coords.clone();
        let mut b2 = target.clone();
        for col in [1, 3] {
            for i in 0..a2.nrows() {
                a2[(i, col)] = -a2[(i, col)];
                b2[(i, col)] = -b2[(i, col)];
            }
        }
        let both = match_closest(&a2, &b2).unwrap();
        assert_eq!(plain.cost, both.cost);
        assert_eq!(plain.map, both.map);
    }

    #[test]
    fn constructed_sign_flip_is_recovered() {
        let spec = spectrum_of(&bumpy_sphere(1), 5);
        let mut spec_b = spec.clone();
        for i in 0..spec_b.eigenvectors.nrows() {
            spec_b.eigenvectors[(i, 2)] = -spec_b.eigenvectors[(i, 2)];
        }
        for mode in [SearchMode::Exhaustive, SearchMode::Greedy] {
            let out = sign_search(&spec, &spec_b, 4, mode).unwrap();
            assert_eq!(out.signs, vec![1, -1, 1, 1]);
            assert_eq!(out.correspondence.cost, 0.0);
            assert!(out.correspondence.map.iter().enumerate().all(|(i, &j)| i == j));
        }
    }

    #[test]
    fn exhaustive_candidate_count_is_two_to_the_m() {
        let spec = spectrum_of(&bumpy_sphere(1), 5);
        let out = sign_search(&spec, &spec, 4, SearchMode::Exhaustive).unwrap();
        assert_eq!(out.candidates_evaluated, 16);
    }

    #[test]
    fn exhaustive_rejects_large_m() {
        let spec = spectrum_of(&bumpy_sphere(1), 16);
        let err = sign_search(&spec, &spec, 15, SearchMode::Exhaustive).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn exhaustive_never_loses_to_greedy() {
        let spec = spectrum_of(&bumpy_sphere(1), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let mut spec_b = spec.clone();
            for col in 1..=5 {
                if rng.random::<bool>() {
                    for i in 0..spec_b.eigenvectors.nrows() {
                        spec_b.eigenvectors[(i, col)] = -spec_b.eigenvectors[(i, col)];
                    }
                }
            }
            let ex = sign_search(&spec, &spec_b, 5, SearchMode::Exhaustive).unwrap();
            let gr = sign_search(&spec, &spec_b, 5, SearchMode::Greedy).unwrap();
            assert!(ex.correspondence.cost <= gr.correspondence.cost);
        }
    }

    #[test]
    fn identical_spectra_align_to_identity_blocks() {
        let spec = spectrum_of(&icosphere(2), 4);
        let alignment = align_degenerate_groups(&spec, &spec, 3).unwrap();
        assert_eq!(alignment.groups, vec![0..3]);
        let block = &alignment.blocks[0];
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((block[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    /// Rotation by `angle` around the axis bisecting x and z.
    fn test_rotation(angle: f64) -> DMatrix<f64> {
        let axis = nalgebra::Vector3::new(1.0, 0.2, 1.0).normalize();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        DMatrix::from_fn(3, 3, |i, j| rot.matrix()[(i, j)])
    }

    fn synthetic_mixed_copy(
        spec: &Spectrum,
        cols: Range<usize>,
        w: &DMatrix<f64>,
        perm: &[usize],
    ) -> Spectrum {
        let mut vecs = spec.eigenvectors.clone();
        let mixed = spec.eigenvectors.columns(cols.start, cols.len()) * w;
        vecs.columns_mut(cols.start, cols.len()).copy_from(&mixed);
        let mut permuted = vecs.clone();
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..vecs.ncols() {
                permuted[(p, c)] = vecs[(i, c)];
            }
        }
        Spectrum {
            eigenvalues: spec.eigenvalues.clone(),
            eigenvectors: permuted,
            residuals: spec.residuals.clone(),
        }
    }

    #[test]
    fn known_group_mixing_is_recovered() {
        let spec = spectrum_of(&icosphere(2), 4);
        let w = test_rotation(0.9);
        let perm = seeded_permutation(spec.n_points(), 5);
        let spec_b = synthetic_mixed_copy(&spec, 1..4, &w, &perm);
        let alignment = align_groups_seeded(&spec, &spec_b, 3, DEGENERACY_TOL, &perm).unwrap();
        let r = &alignment.blocks[0];
        let wt = w.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (r[(i, j)] - wt[(i, j)]).abs() < 1e-9,
                    "block {r} vs {wt}"
                );
            }
        }
    }

    #[test]
    fn signed_group_permutation_costs_nothing() {
        let spec = spectrum_of(&icosphere(2), 4);
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 2)] = -1.0;
        w[(2, 0)] = 1.0;
        let perm = seeded_permutation(spec.n_points(), 9);
        let spec_b = synthetic_mixed_copy(&spec, 1..4, &w, &perm);
        let alignment = align_groups_seeded(&spec, &spec_b, 3, DEGENERACY_TOL, &perm).unwrap();
        let a = eigenmap(&spec, 3).unwrap().coords;
        let b = alignment.apply(&eigenmap(&spec_b, 3).unwrap().coords);
        let c = match_closest(&a, &b).unwrap();
        assert!(c.cost < 1e-18, "cost {}", c.cost);
        assert_eq!(c.map, perm);
    }

    #[test]
    fn incompatible_group_sizes_error() {
        let spec = spectrum_of(&icosphere(1), 4);
        let mut spec_b = spec.clone();
        spec_b.eigenvalues[3] *= 1.25;
        let err = align_degenerate_groups(&spec, &spec_b, 3).unwrap_err();
        match err {
            Error::GroupMismatch {
                index,
                size_a,
                size_b,
            } => {
                assert_eq!(index, 0);
                assert_eq!((size_a, size_b), (3, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rotated_mesh_registers_at_group_resolution() {
        let mesh = icosphere(2);
        let rot = test_rotation(0.7);
        let rotated = mesh
            .with_positions(|_, p| {
                let v = nalgebra::Vector3::new(p[0], p[1], p[2]);
                let q = &rot * v;
                [q[0], q[1], q[2]]
            })
            .unwrap();
        let spec_a = spectrum_of(&mesh, 4);
        let spec_b = spectrum_of(&rotated, 4);
        let out = register(&spec_a, &spec_b, 3, SearchMode::Exhaustive).unwrap();
        assert!(
            out.correspondence.identity_fraction() >= 0.99,
            "identity fraction {}",
            out.correspondence.identity_fraction()
        );
        let block = &out.correspondence.alignment.blocks[0];
        let gram = block.transpose() * block;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn relabeled_copy_is_recovered_exactly() {
        let mesh = bumpy_sphere(2);
        let rot = test_rotation(1.1);
        let perm = seeded_permutation(mesh.positions().len(), 13);
        let moved = mesh
            .with_positions(|_, p| {
                let v = nalgebra::Vector3::new(p[0], p[1], p[2]);
                let q = &rot * v;
                [q[0], q[1], q[2]]
            })
            .unwrap()
            .relabeled(&perm)
            .unwrap();
        let spec_a = spectrum_of(&mesh, 7);
        let spec_b = spectrum_of(&moved, 7);
        let out = register(&spec_a, &spec_b, 6, SearchMode::Exhaustive).unwrap();
        let agree = out
            .correspondence
            .map
            .iter()
            .zip(&perm)
            .filter(|(a, b)| a == b)
            .count();
        assert!(
            agree as f64 >= 0.99 * perm.len() as f64,
            "{agree} of {} ground-truth labels",
            perm.len()
        );
    }

    #[test]
    fn unperturbed_probe_reports_zero() {
        let report = stability_probe(&icosphere(2), &[0.0], 3, DEFAULT_SEED).unwrap();
        let p = &report.points[0];
        assert!(p.aligned);
        assert!(p.sup_displacement <= 1e-9, "sup {}", p.sup_displacement);
        assert_eq!(p.identity_fraction, 1.0);
        assert!(report.trend_ok);
    }

    #[test]
    fn displacement_shrinks_with_epsilon() {
        let report = stability_probe(&icosphere(2), &[0.2, 0.05], 3, DEFAULT_SEED).unwrap();
        assert!(report.points.iter().all(|p| p.aligned));
        assert!(
            report.points[0].sup_displacement > report.points[1].sup_displacement,
            "{:?}",
            report.points
        );
        assert!(report.trend_ok);
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        let err = stability_probe(&icosphere(1), &[0.4], 3, DEFAULT_SEED).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn greedy_search_is_deterministic() {
        let spec = spectrum_of(&bumpy_sphere(1), 6);
        let mut spec_b = spec.clone();
        for i in 0..spec_b.eigenvectors.nrows() {
            spec_b.eigenvectors[(i, 3)] = -spec_b.eigenvectors[(i, 3)];
        }
        let first = sign_search(&spec, &spec_b, 5, SearchMode::Greedy).unwrap();
        let second = sign_search(&spec, &spec_b, 5, SearchMode::Greedy).unwrap();
        assert_eq!(first.signs, second.signs);
        assert_eq!(first.correspondence.cost, second.correspondence.cost);
        assert_eq!(first.candidates_evaluated, second.candidates_evaluated);
    }
}
