//! Triangle meshes, point clouds, and small generators used across the crate.
//!
//! Construction validates inputs aggressively: indices must be in range,
//! coordinates finite, meshes a single edge-connected component, and point
//! clouds free of coincident points. Everything downstream can then assume a
//! clean geometry.

use rayon::prelude::*;

use crate::{Error, Result};

/// Two points closer than this (Euclidean) are treated as coincident.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Neighborhood size used when a point-cloud graph is needed and the caller
/// did not pick one.
pub const DEFAULT_CLOUD_K: usize = 8;

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    positions: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl TriangleMesh {
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("mesh has no vertices".into()));
        }
        if faces.is_empty() {
            return Err(Error::InvalidParameter("mesh has no faces".into()));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "vertex {i} has a non-finite coordinate"
                )));
            }
        }
        let n = positions.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n {
                    return Err(Error::InvalidParameter(format!(
                        "face {f} references vertex {v} but the mesh has {n} vertices"
                    )));
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::InvalidParameter(format!(
                    "face {f} repeats a vertex: {face:?}"
                )));
            }
        }

        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for face in &faces {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                neighbors[face[a]].push(face[b]);
                neighbors[face[b]].push(face[a]);
            }
        }
        let mut edges = Vec::new();
        for (v, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &w in list.iter() {
                if v < w {
                    edges.push((v, w));
                }
            }
        }

        let sizes = component_sizes(n, |v| neighbors[v].iter().copied());
        if sizes.len() != 1 {
            return Err(Error::Disconnected { sizes });
        }

        Ok(Self {
            positions,
            faces,
            neighbors,
            edges,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> [f64; 3] {
        self.positions[v]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// One-ring neighbors of `v`, ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Unique undirected edges `(i, j)` with `i < j`, lexicographic.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        dist3(self.positions[i], self.positions[j])
    }

    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self.edges.iter().map(|&(i, j)| self.edge_length(i, j)).sum();
        total / self.edges.len() as f64
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(self.positions[a], self.positions[b], self.positions[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Same connectivity with vertex positions mapped through `f`.
    pub fn with_positions(&self, f: impl Fn(usize, [f64; 3]) -> [f64; 3]) -> Result<Self> {
        let positions = self
            .positions
            .iter()
            .enumerate()
            .map(|(i, &p)| f(i, p))
            .collect();
        Self::new(positions, self.faces.clone())
    }

    /// Same surface with vertex `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.positions.len();
        if perm.len() != n {
            return Err(Error::InvalidParameter(format!(
                "permutation has {} entries for {n} vertices",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidParameter(
                    "relabeling is not a permutation".into(),
                ));
            }
            seen[p] = true;
        }
        let mut positions = vec![[0.0; 3]; n];
        for (i, &p) in perm.iter().enumerate() {
            positions[p] = self.positions[i];
        }
        let faces = self
            .faces
            .iter()
            .map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]])
            .collect();
        Self::new(positions, faces)
    }
}

#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("point cloud is empty".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("points have dimension 0".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        if let Some((a, b)) = find_duplicate(&points, DUPLICATE_TOL) {
            return Err(Error::DuplicatePoints {
                a,
                b,
                tol: DUPLICATE_TOL,
            });
        }
        Ok(Self { points, dim })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// The `k` nearest neighbors of every point (self excluded), each list
    /// ascending by distance with index as tie-breaker.
    pub fn knn(&self, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
        let n = self.points.len();
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "k = {k} is out of range for {n} points"
            )));
        }
        let lists: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut cand: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, dist_nd(&self.points[i], &self.points[j])))
                    .collect();
                cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                cand.truncate(k);
                cand
            })
            .collect();
        Ok(lists)
    }

    /// Undirected union of the directed k-NN edges, `(i, j, length)` with
    /// `i < j`, lexicographic.
    pub fn symmetrized_knn_edges(&self, k: usize) -> Result<Vec<(usize, usize, f64)>> {
        let lists = self.knn(k)?;
        let mut edges = Vec::new();
        for (i, list) in lists.iter().enumerate() {
            for &(j, d) in list {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                edges.push((a, b, d));
            }
        }
        edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        Ok(edges)
    }

    /// Median over points of the distance to the single nearest neighbor.
    pub fn median_nn_distance(&self) -> f64 {
        let n = self.points.len();
        let mut nn: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist_nd(&self.points[i], &self.points[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        nn.sort_by(f64::total_cmp);
        nn[nn.len() / 2]
    }

    pub fn mean_nn_distance(&self) -> f64 {
        let n = self.points.len();
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist_nd(&self.points[i], &self.points[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / n as f64
    }
}

/// A surface sample that operations can treat uniformly.
#[derive(Debug, Clone)]
pub enum Geometry {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

impl Geometry {
    pub fn n_points(&self) -> usize {
        match self {
            Geometry::Mesh(m) => m.n_vertices(),
            Geometry::Cloud(c) => c.n_points(),
        }
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            Geometry::Mesh(m) => m.position(i).to_vec(),
            Geometry::Cloud(c) => c.point(i).to_vec(),
        }
    }

    /// One-ring neighbors for meshes, symmetrized k-NN neighbors for clouds.
    pub fn neighbor_lists(&self, cloud_k: usize) -> Result<Vec<Vec<usize>>> {
        match self {
            Geometry::Mesh(m) => Ok((0..m.n_vertices()).map(|v| m.neighbors(v).to_vec()).collect()),
            Geometry::Cloud(c) => {
                let mut lists: Vec<Vec<usize>> = vec![Vec::new(); c.n_points()];
                for (i, j, _) in c.symmetrized_knn_edges(cloud_k)? {
                    lists[i].push(j);
                    lists[j].push(i);
                }
                for list in &mut lists {
                    list.sort_unstable();
                }
                Ok(lists)
            }
        }
    }

    /// Mean edge length for meshes, mean nearest-neighbor distance for clouds.
    pub fn mean_spacing(&self) -> f64 {
        match self {
            Geometry::Mesh(m) => m.mean_edge_length(),
            Geometry::Cloud(c) => c.mean_nn_distance(),
        }
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub(crate) fn dist_nd(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Connected-component sizes of a graph given by a neighbor iterator,
/// descending.
pub(crate) fn component_sizes<I>(n: usize, neighbors: impl Fn(usize) -> I) -> Vec<usize>
where
    I: Iterator<Item = usize>,
{
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for w in neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Finds a pair of points within `tol` of each other, if any.
///
/// Points are sorted by first coordinate; only windows whose first
/// coordinates differ by at most `tol` need a full distance check, so this is
/// near-linear away from pathological inputs.
fn find_duplicate(points: &[Vec<f64>], tol: f64) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    for (rank, &i) in order.iter().enumerate() {
        for &j in order[rank + 1..].iter() {
            if points[j][0] - points[i][0] > tol {
                break;
            }
            if dist_nd(&points[i], &points[j]) <= tol {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// Unit-radius sphere mesh built by subdividing an icosahedron and projecting
/// back to the sphere. `subdivisions = s` yields `20 * 4^s` faces and
/// `2 + 10 * 4^s` vertices.
pub fn icosphere(subdivisions: usize) -> TriangleMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut positions: Vec<[f64; 3]> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize3)
    .collect();

    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for face in &faces {
            let mut mid = [0usize; 3];
            for (e, (a, b)) in [(face[0], face[1]), (face[1], face[2]), (face[2], face[0])]
                .into_iter()
                .enumerate()
            {
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = positions[a];
                    let pb = positions[b];
                    positions.push(normalize3([
                        (pa[0] + pb[0]) / 2.0,
                        (pa[1] + pb[1]) / 2.0,
                        (pa[2] + pb[2]) / 2.0,
                    ]));
                    positions.len() - 1
                });
            }
            next.push([face[0], mid[0], mid[2]]);
            next.push([face[1], mid[1], mid[0]]);
            next.push([face[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }

    TriangleMesh::new(positions, faces).expect("icosphere construction is valid")
}

fn normalize3(p: [f64; 3]) -> [f64; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}

/// Icosphere pushed through a fixed asymmetric radial deformation. Unlike the
/// round sphere it has no isometries and a simple low spectrum, so vertex
/// correspondences are identifiable from eigenfunctions alone.
pub fn bumpy_sphere(subdivisions: usize) -> TriangleMesh {
    icosphere(subdivisions)
        .with_positions(|_, [x, y, z]| {
            let r = 1.0
                + 0.16 * (1.3 * x + 0.7).sin() * (0.9 * y - 0.4).sin()
                + 0.11 * (1.7 * z + 0.3).cos()
                + 0.07 * (2.1 * x - 1.1 * z).sin()
                + 0.06 * x * y
                - 0.05 * y * z;
            [r * x, r * y, r * z]
        })
        .expect("radial deformation keeps the sphere mesh valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn tetrahedron_edges_and_neighbors() {
        let m = tetrahedron();
        assert_eq!(m.edges().len(), 6);
        for v in 0..4 {
            assert_eq!(m.neighbors(v), {
                let mut others: Vec<usize> = (0..4).filter(|&w| w != v).collect();
                others.sort_unstable();
                others
            });
        }
    }

    #[test]
    fn face_index_out_of_range_is_rejected() {
        let err = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 3]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn two_component_mesh_is_rejected() {
        let err = TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [5.0, 0.0, 0.0],
                [6.0, 0.0, 0.0],
                [5.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap_err();
        match err {
            Error::Disconnected { sizes } => assert_eq!(sizes, vec![3, 3]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn icosphere_counts() {
        for (s, v, f) in [(0, 12, 20), (1, 42, 80), (2, 162, 320), (4, 2562, 5120)] {
            let m = icosphere(s);
            assert_eq!(m.n_vertices(), v);
            assert_eq!(m.n_faces(), f);
            // Closed surface of genus 0: V - E + F = 2.
            assert_eq!(m.n_vertices() + m.n_faces(), m.edges().len() + 2);
        }
    }

    #[test]
    fn icosphere_vertices_on_unit_sphere() {
        let m = icosphere(3);
        for p in m.positions() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn icosphere_area_approaches_sphere_area() {
        let m = icosphere(4);
        let sphere = 4.0 * std::f64::consts::PI;
        assert!((m.total_area() - sphere).abs() / sphere < 2e-3);
    }

    #[test]
    fn cloud_duplicate_points_are_rejected() {
        let err = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0 + 1e-13, 0.0],
        ])
        .unwrap_err();
        match err {
            Error::DuplicatePoints { a, b, .. } => assert_eq!((a, b), (1, 2)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn knn_is_sorted_and_excludes_self() {
        let c = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 3.0],
        ])
        .unwrap();
        let lists = c.knn(2).unwrap();
        assert_eq!(lists[0][0].0, 1);
        assert_eq!(lists[0][1].0, 2);
        assert_eq!(lists[2][0].0, 1);
    }

    #[test]
    fn symmetrized_knn_contains_union_of_directed_edges() {
        // Point 3 is far out: nobody picks it as a 1-NN, but it picks point 2,
        // so the symmetrized edge set must contain (2, 3).
        let c = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![10.0, 0.0],
        ])
        .unwrap();
        let edges = c.symmetrized_knn_edges(1).unwrap();
        assert!(edges.iter().any(|&(i, j, _)| (i, j) == (2, 3)));
    }

    #[test]
    fn mean_spacing_of_unit_grid_is_one() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(vec![i as f64, j as f64]);
            }
        }
        let g = Geometry::Cloud(PointCloud::new(pts).unwrap());
        assert!((g.mean_spacing() - 1.0).abs() < 1e-12);
    }
}
