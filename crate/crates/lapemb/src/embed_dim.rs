//! Empirical embedding dimension: the smallest m for which the first m
//! eigenfunction coordinates are injective at sample resolution and of full
//! differential rank at every vertex, with an exact face self-intersection
//! scan for 3-coordinate mesh images.

use nalgebra::DMatrix;

use crate::distance::{scan_pairs, DistanceField, PairScan, DEFAULT_SEED};
use crate::eigen::Spectrum;
use crate::geometry::{Geometry, TriangleMesh, DEFAULT_CLOUD_K};
use crate::maps::{eigenmap, EmbeddingCoords};
use crate::{Error, Result};

/// Fraction of the near-pair image scale below which a far pair counts as
/// an image collision when no explicit `tau` is given.
pub const IMAGE_COLLISION_FACTOR: f64 = 0.25;

#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    /// Pairs at graph distance below this do not need to separate;
    /// `None` selects 3x the mean point spacing.
    pub delta: Option<f64>,
    /// Far pairs must exceed this image distance. `None` derives a floor
    /// from the map itself: [`IMAGE_COLLISION_FACTOR`] times the median
    /// image distance of near pairs. A non-injective continuum map sampled
    /// at vertices produces tiny but nonzero far-pair distances, so an
    /// exact-zero threshold would wave it through.
    pub tau: Option<f64>,
    /// Smallest acceptable ratio of n-th to 1st singular value of the local
    /// differential.
    pub rank_tol: f64,
    /// Intrinsic dimension of the shape.
    pub intrinsic_dim: usize,
    pub scan: PairScan,
    pub seed: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta: None,
            tau: None,
            rank_tol: 1e-3,
            intrinsic_dim: 2,
            scan: PairScan::Auto,
            seed: DEFAULT_SEED,
        }
    }
}

/// Image-distance floor for resolution-aware collision detection: a
/// fraction of the median image distance over pairs closer than `delta`.
/// Zero when the scan covers no near pairs.
pub fn near_pair_image_floor(
    coords: &EmbeddingCoords,
    gd: &dyn DistanceField,
    delta: f64,
    scan: PairScan,
    seed: u64,
) -> f64 {
    let mut near = Vec::new();
    scan_pairs(gd, scan, seed, &mut |i, j, d| {
        if d > 0.0 && d <= delta {
            near.push(coords.image_distance(i, j));
        }
    });
    if near.is_empty() {
        return 0.0;
    }
    near.sort_by(f64::total_cmp);
    IMAGE_COLLISION_FACTOR * near[near.len() / 2]
}

#[derive(Debug, Clone, Copy)]
pub struct InjectivityScan {
    pub pass: bool,
    /// Smallest image distance among tested far pairs; infinite when none.
    pub min_image_distance: f64,
    /// No tested pair reached the separation threshold.
    pub vacuous: bool,
    pub pairs_tested: u64,
}

/// Checks that every covered pair at graph distance >= `delta` is separated
/// by more than `tau` in the image.
pub fn injectivity_scan(
    coords: &EmbeddingCoords,
    gd: &dyn DistanceField,
    delta: f64,
    tau: f64,
) -> Result<InjectivityScan> {
    injectivity_scan_opts(coords, gd, delta, tau, PairScan::Auto, DEFAULT_SEED)
}

pub fn injectivity_scan_opts(
    coords: &EmbeddingCoords,
    gd: &dyn DistanceField,
    delta: f64,
    tau: f64,
    scan: PairScan,
    seed: u64,
) -> Result<InjectivityScan> {
    if !(delta > 0.0) || tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need delta > 0 and tau >= 0, got delta = {delta}, tau = {tau}"
        )));
    }
    if coords.n_points() != gd.n_points() {
        return Err(Error::InvalidParameter(
            "coordinate and distance point counts disagree".into(),
        ));
    }
    let mut min_dist = f64::INFINITY;
    let mut tested = 0u64;
    let mut separated = true;
    scan_pairs(gd, scan, seed, &mut |i, j, d| {
        if d >= delta {
            tested += 1;
            let img = coords.image_distance(i, j);
            min_dist = min_dist.min(img);
            if img <= tau {
                separated = false;
            }
        }
    });
    let vacuous = tested == 0;
    Ok(InjectivityScan {
        pass: vacuous || separated,
        min_image_distance: min_dist,
        vacuous,
        pairs_tested: tested,
    })
}

#[derive(Debug, Clone)]
pub struct ImmersionCheck {
    pub pass: bool,
    /// Smallest singular-value ratio over vertices; zero for flagged ones.
    pub min_rank_ratio: f64,
    /// Vertices whose neighbor star was too small to determine the rank.
    pub flagged: Vec<usize>,
}

/// Rank check of the map differential at every vertex: regresses image
/// differences over the neighbor star on a tangent frame from the top
/// principal directions of the star in the original geometry, then requires
/// the n-th singular value to be at least `rank_tol` times the largest.
pub fn immersion_rank(
    coords: &EmbeddingCoords,
    geometry: &Geometry,
    n: usize,
    rank_tol: f64,
) -> Result<ImmersionCheck> {
    let npts = geometry.n_points();
    if coords.n_points() != npts {
        return Err(Error::InvalidParameter(
            "coordinate and geometry point counts disagree".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("intrinsic dimension must be positive".into()));
    }
    if n > coords.dim() {
        // Fewer image coordinates than the intrinsic dimension can never
        // reach full rank.
        return Ok(ImmersionCheck {
            pass: false,
            min_rank_ratio: 0.0,
            flagged: Vec::new(),
        });
    }
    let neighbors = geometry.neighbor_lists(DEFAULT_CLOUD_K)?;
    let m = coords.dim();
    let mut min_ratio = f64::INFINITY;
    let mut flagged = Vec::new();

    for v in 0..npts {
        let star = &neighbors[v];
        if star.len() < n + 1 {
            flagged.push(v);
            min_ratio = 0.0;
            continue;
        }
        let center = geometry.point(v);
        let ambient = center.len();
        // Principal directions of the star offsets.
        let mut cov = DMatrix::<f64>::zeros(ambient, ambient);
        let offsets: Vec<Vec<f64>> = star
            .iter()
            .map(|&u| {
                let p = geometry.point(u);
                (0..ambient).map(|c| p[c] - center[c]).collect()
            })
            .collect();
        for d in &offsets {
            for r in 0..ambient {
                for c in 0..ambient {
                    cov[(r, c)] += d[r] * d[c];
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..ambient).collect();
        order.sort_by(|&a, &b| {
            let (x, y): (f64, f64) = (eig.eigenvalues[a], eig.eigenvalues[b]);
            y.total_cmp(&x)
        });
        let frame: Vec<usize> = order.into_iter().take(n).collect();

        // Least-squares differential: X d = Y over the star.
        let rows = star.len();
        let mut x = DMatrix::zeros(rows, n);
        let mut y = DMatrix::zeros(rows, m);
        for (r, (&u, d)) in star.iter().zip(&offsets).enumerate() {
            for (c, &axis) in frame.iter().enumerate() {
                x[(r, c)] = (0..ambient).map(|k| d[k] * eig.eigenvectors[(k, axis)]).sum();
            }
            for c in 0..m {
                y[(r, c)] = coords.coords[(u, c)] - coords.coords[(v, c)];
            }
        }
        let svd_x = x.svd(true, true);
        let diff = match svd_x.solve(&y, 1e-12) {
            Ok(d) => d,
            Err(_) => {
                flagged.push(v);
                min_ratio = 0.0;
                continue;
            }
        };
        let sv = diff.svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let ratio = if s[0] > 0.0 { s[n - 1] / s[0] } else { 0.0 };
        min_ratio = min_ratio.min(ratio);
    }

    Ok(ImmersionCheck {
        pass: flagged.is_empty() && min_ratio >= rank_tol,
        min_rank_ratio: min_ratio,
        flagged,
    })
}

fn face_vertex(coords: &EmbeddingCoords, v: usize) -> [f64; 3] {
    [
        coords.coords[(v, 0)],
        coords.coords[(v, 1)],
        coords.coords[(v, 2)],
    ]
}

fn validate_coords3(mesh: &TriangleMesh, coords: &EmbeddingCoords) -> Result<()> {
    if coords.dim() != 3 {
        return Err(Error::InvalidParameter(format!(
            "face intersection scan needs 3 coordinates, got {}",
            coords.dim()
        )));
    }
    if coords.n_points() != mesh.n_vertices() {
        return Err(Error::InvalidParameter(
            "coordinate and mesh vertex counts disagree".into(),
        ));
    }
    Ok(())
}

fn faces_share_vertex(a: &[usize; 3], b: &[usize; 3]) -> bool {
    a.iter().any(|v| b.contains(v))
}

/// Pairs of non-adjacent faces whose image triangles intersect, found
/// through a bounding-box hierarchy. Pairs are `(low, high)` face indices.
pub fn self_intersection_check(
    mesh: &TriangleMesh,
    coords: &EmbeddingCoords,
) -> Result<Vec<(usize, usize)>> {
    validate_coords3(mesh, coords)?;
    let faces = mesh.faces();
    let tris: Vec<[[f64; 3]; 3]> = faces
        .iter()
        .map(|f| [0, 1, 2].map(|k| face_vertex(coords, f[k])))
        .collect();
    let bvh = Bvh::build(&tris);
    let mut out = Vec::new();
    bvh.for_each_overlap(&mut |f, g| {
        let (f, g) = (f.min(g), f.max(g));
        if !faces_share_vertex(&faces[f], &faces[g]) && tri_tri_intersect(&tris[f], &tris[g]) {
            out.push((f, g));
        }
    });
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Reference implementation testing every face pair.
pub fn self_intersection_brute(
    mesh: &TriangleMesh,
    coords: &EmbeddingCoords,
) -> Result<Vec<(usize, usize)>> {
    validate_coords3(mesh, coords)?;
    let faces = mesh.faces();
    let tris: Vec<[[f64; 3]; 3]> = faces
        .iter()
        .map(|f| [0, 1, 2].map(|k| face_vertex(coords, f[k])))
        .collect();
    let mut out = Vec::new();
    for f in 0..faces.len() {
        for g in (f + 1)..faces.len() {
            if !faces_share_vertex(&faces[f], &faces[g]) && tri_tri_intersect(&tris[f], &tris[g]) {
                out.push((f, g));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    fn of_triangle(t: &[[f64; 3]; 3]) -> Self {
        let mut lo = t[0];
        let mut hi = t[0];
        for v in &t[1..] {
            for c in 0..3 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        Self { lo, hi }
    }

    fn merge(&self, other: &Self) -> Self {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for c in 0..3 {
            lo[c] = lo[c].min(other.lo[c]);
            hi[c] = hi[c].max(other.hi[c]);
        }
        Self { lo, hi }
    }

    fn overlaps(&self, other: &Self) -> bool {
        (0..3).all(|c| self.lo[c] <= other.hi[c] && other.lo[c] <= self.hi[c])
    }
}

struct BvhNode {
    bbox: Aabb,
    /// Children node indices, or the face range for leaves.
    children: Option<(usize, usize)>,
    start: usize,
    count: usize,
}

struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

const BVH_LEAF: usize = 4;

impl Bvh {
    fn build(tris: &[[[f64; 3]; 3]]) -> Self {
        let boxes: Vec<Aabb> = tris.iter().map(Aabb::of_triangle).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            Self::split(&boxes, &mut order, 0, tris.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    fn split(
        boxes: &[Aabb],
        order: &mut [usize],
        start: usize,
        count: usize,
        nodes: &mut Vec<BvhNode>,
    ) -> usize {
        let slice = &order[start..start + count];
        let bbox = slice
            .iter()
            .skip(1)
            .fold(boxes[slice[0]], |acc, &f| acc.merge(&boxes[f]));
        let idx = nodes.len();
        nodes.push(BvhNode {
            bbox,
            children: None,
            start,
            count,
        });
        if count <= BVH_LEAF {
            return idx;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (bbox.hi[a] - bbox.lo[a]).total_cmp(&(bbox.hi[b] - bbox.lo[b])))
            .unwrap();
        let mid = count / 2;
        order[start..start + count].select_nth_unstable_by(mid, |&f, &g| {
            let cf = boxes[f].lo[axis] + boxes[f].hi[axis];
            let cg = boxes[g].lo[axis] + boxes[g].hi[axis];
            cf.total_cmp(&cg)
        });
        let left = Self::split(boxes, order, start, mid, nodes);
        let right = Self::split(boxes, order, start + mid, count - mid, nodes);
        nodes[idx].children = Some((left, right));
        idx
    }

    /// Calls `f` on every face pair whose bounding boxes overlap.
    fn for_each_overlap(&self, f: &mut dyn FnMut(usize, usize)) {
        if !self.nodes.is_empty() {
            self.visit(0, 0, f);
        }
    }

    fn visit(&self, a: usize, b: usize, f: &mut dyn FnMut(usize, usize)) {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        if !na.bbox.overlaps(&nb.bbox) {
            return;
        }
        match (na.children, nb.children) {
            (None, None) => {
                for p in na.start..na.start + na.count {
                    let q0 = if a == b { p + 1 } else { nb.start };
                    for q in q0..nb.start + nb.count {
                        f(self.order[p], self.order[q]);
                    }
                }
            }
            (Some((l, r)), _) if a == b => {
                self.visit(l, l, f);
                self.visit(l, r, f);
                self.visit(r, r, f);
            }
            (Some((l, r)), _) => {
                self.visit(l, b, f);
                self.visit(r, b, f);
            }
            (None, Some((l, r))) => {
                self.visit(a, l, f);
                self.visit(a, r, f);
            }
        }
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Triangle-triangle intersection over the shared-line interval method:
/// reject when one triangle lies strictly on one side of the other's plane,
/// otherwise compare the intervals both triangles cut out of the
/// intersection line of their planes; coplanar pairs fall back to a 2D
/// overlap test.
fn tri_tri_intersect(t1: &[[f64; 3]; 3], t2: &[[f64; 3]; 3]) -> bool {
    let n1 = cross(&sub(&t1[1], &t1[0]), &sub(&t1[2], &t1[0]));
    let n2 = cross(&sub(&t2[1], &t2[0]), &sub(&t2[2], &t2[0]));

    let d1: Vec<f64> = t1.iter().map(|v| dot(&n2, &sub(v, &t2[0]))).collect();
    if d1.iter().all(|&d| d > 0.0) || d1.iter().all(|&d| d < 0.0) {
        return false;
    }
    let d2: Vec<f64> = t2.iter().map(|v| dot(&n1, &sub(v, &t1[0]))).collect();
    if d2.iter().all(|&d| d > 0.0) || d2.iter().all(|&d| d < 0.0) {
        return false;
    }

    let line = cross(&n1, &n2);
    let line_scale = dot(&line, &line);
    let plane_scale = dot(&n1, &n1).max(dot(&n2, &n2));
    if line_scale <= 1e-24 * plane_scale * plane_scale.max(1.0) {
        return coplanar_overlap(t1, t2, &n1);
    }

    let i1 = line_interval(t1, &d1, &line);
    let i2 = line_interval(t2, &d2, &line);
    match (i1, i2) {
        (Some((a0, a1)), Some((b0, b1))) => a0.max(b0) <= a1.min(b1),
        _ => false,
    }
}

/// Interval a triangle cuts out of the plane-intersection line, as
/// projections onto the line direction. `d` holds the vertices' signed
/// distances to the other plane.
fn line_interval(t: &[[f64; 3]; 3], d: &[f64], line: &[f64; 3]) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for i in 0..3 {
        if d[i] == 0.0 {
            let p = dot(line, &t[i]);
            lo = lo.min(p);
            hi = hi.max(p);
            any = true;
        }
        let j = (i + 1) % 3;
        if d[i] * d[j] < 0.0 {
            let s = d[i] / (d[i] - d[j]);
            let point = [
                t[i][0] + s * (t[j][0] - t[i][0]),
                t[i][1] + s * (t[j][1] - t[i][1]),
                t[i][2] + s * (t[j][2] - t[i][2]),
            ];
            let p = dot(line, &point);
            lo = lo.min(p);
            hi = hi.max(p);
            any = true;
        }
    }
    any.then_some((lo, hi))
}

fn coplanar_overlap(t1: &[[f64; 3]; 3], t2: &[[f64; 3]; 3], n: &[f64; 3]) -> bool {
    // Project out the dominant normal axis.
    let drop = (0..3).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
    let keep: Vec<usize> = (0..3).filter(|&c| c != drop).collect();
    let p1: Vec<[f64; 2]> = t1.iter().map(|v| [v[keep[0]], v[keep[1]]]).collect();
    let p2: Vec<[f64; 2]> = t2.iter().map(|v| [v[keep[0]], v[keep[1]]]).collect();
    for i in 0..3 {
        for j in 0..3 {
            if segments_cross(&p1[i], &p1[(i + 1) % 3], &p2[j], &p2[(j + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_triangle(&p1[0], &p2) || point_in_triangle(&p2[0], &p1)
}

fn orient2d(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], d: &[f64; 2]) -> bool {
    let o1 = orient2d(a, b, c);
    let o2 = orient2d(a, b, d);
    let o3 = orient2d(c, d, a);
    let o4 = orient2d(c, d, b);
    o1 * o2 <= 0.0 && o3 * o4 <= 0.0 && (o1 != o2 || o3 != o4)
}

fn point_in_triangle(p: &[f64; 2], t: &[[f64; 2]]) -> bool {
    let o1 = orient2d(&t[0], &t[1], p);
    let o2 = orient2d(&t[1], &t[2], p);
    let o3 = orient2d(&t[2], &t[0], p);
    (o1 >= 0.0 && o2 >= 0.0 && o3 >= 0.0) || (o1 <= 0.0 && o2 <= 0.0 && o3 <= 0.0)
}

#[derive(Debug, Clone)]
pub struct MDiagnostic {
    pub m: usize,
    pub injective: bool,
    pub vacuous: bool,
    pub min_image_distance: f64,
    /// Collision threshold applied at this m.
    pub tau: f64,
    pub immersed: bool,
    pub min_rank_ratio: f64,
    /// Intersecting face pairs; populated for mesh images at m = 3.
    pub intersecting_pairs: Option<usize>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct EmbedDimReport {
    /// Smallest m passing every check, if one was found by `m_max`.
    pub m_star: Option<usize>,
    pub diagnostics: Vec<MDiagnostic>,
    pub delta: f64,
    /// Explicit collision threshold; `None` means each m derived its own
    /// from the image resolution (recorded per diagnostic).
    pub tau: Option<f64>,
    pub rank_tol: f64,
}

/// Runs the three checks for m = intrinsic_dim..=m_max and reports the
/// first m passing all of them.
pub fn embedding_dimension(
    spec: &Spectrum,
    geometry: &Geometry,
    gd: &dyn DistanceField,
    m_max: usize,
    thresholds: &Thresholds,
) -> Result<EmbedDimReport> {
    if m_max > spec.count() {
        return Err(Error::InvalidParameter(format!(
            "m_max {m_max} exceeds the {} computed pairs",
            spec.count()
        )));
    }
    let delta = match thresholds.delta {
        Some(d) => d,
        None => 3.0 * geometry.mean_spacing(),
    };
    let n = thresholds.intrinsic_dim;
    let mut report = EmbedDimReport {
        m_star: None,
        diagnostics: Vec::new(),
        delta,
        tau: thresholds.tau,
        rank_tol: thresholds.rank_tol,
    };

    for m in n..=m_max {
        let coords = eigenmap(spec, m)?;
        let tau = thresholds.tau.unwrap_or_else(|| {
            near_pair_image_floor(&coords, gd, delta, thresholds.scan, thresholds.seed)
        });
        let inj =
            injectivity_scan_opts(&coords, gd, delta, tau, thresholds.scan, thresholds.seed)?;
        let imm = immersion_rank(&coords, geometry, n, thresholds.rank_tol)?;
        let intersecting = match geometry {
            Geometry::Mesh(mesh) if m == 3 => {
                Some(self_intersection_check(mesh, &coords)?.len())
            }
            _ => None,
        };
        let pass = inj.pass && imm.pass && intersecting.unwrap_or(0) == 0;
        report.diagnostics.push(MDiagnostic {
            m,
            injective: inj.pass,
            vacuous: inj.vacuous,
            min_image_distance: inj.min_image_distance,
            tau,
            immersed: imm.pass,
            min_rank_ratio: imm.min_rank_ratio,
            intersecting_pairs: intersecting,
            pass,
        });
        if pass {
            report.m_star = Some(m);
            break;
        }
    }
    Ok(report)
}
