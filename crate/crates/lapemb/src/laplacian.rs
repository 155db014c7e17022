//! Discrete Laplacians: cotangent weights with lumped mass on triangle
//! meshes, Gaussian kernel weights on point-cloud k-NN graphs.
//!
//! Both assemblies normalize the mass to total 1, so the constant
//! eigenfunction is identically 1 and heat-kernel values converge to 1 as
//! t grows. The mesh stiffness is divided by the same total so the two
//! rescalings cancel in the generalized eigenvalues, which therefore keep
//! the scale of the input geometry.

use crate::geometry::{PointCloud, TriangleMesh};
use crate::sparse::SparseSym;
use crate::{Error, Result};

/// Cotangents beyond this magnitude (angles within about 1e-6 rad of 0 or
/// pi) are clamped.
pub const COT_CLAMP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    CotangentMesh,
    GaussianGraph,
}

/// Generalized eigenproblem data: sparse symmetric stiffness `L` and lumped
/// (diagonal) mass `M`, for `L phi = lambda M phi`.
#[derive(Debug, Clone)]
pub struct LaplacianPair {
    pub stiffness: SparseSym,
    pub mass: Vec<f64>,
    pub kind: LaplacianKind,
    /// Kernel bandwidth actually used (graph Laplacians only).
    pub bandwidth: Option<f64>,
}

impl LaplacianPair {
    pub fn n(&self) -> usize {
        self.mass.len()
    }
}

pub fn cotangent_laplacian(mesh: &TriangleMesh) -> Result<LaplacianPair> {
    let n = mesh.n_vertices();
    let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(mesh.n_faces() * 9);
    let mut mass = vec![0.0; n];

    for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
        let pa = mesh.position(a);
        let pb = mesh.position(b);
        let pc = mesh.position(c);
        let area = crate::geometry::triangle_area(pa, pb, pc);
        let lmax = mesh
            .edge_length(a, b)
            .max(mesh.edge_length(b, c))
            .max(mesh.edge_length(c, a));
        if area <= 1e-18 * lmax * lmax {
            return Err(Error::DegenerateFace { face: f, area });
        }
        let third = area / 3.0;
        mass[a] += third;
        mass[b] += third;
        mass[c] += third;

        // Corner (apex, edge endpoints): half-cotangent of the apex angle
        // goes to the opposite edge.
        for (apex, i, j) in [(a, b, c), (b, c, a), (c, a, b)] {
            let p = mesh.position(apex);
            let pi = mesh.position(i);
            let pj = mesh.position(j);
            let u = [pi[0] - p[0], pi[1] - p[1], pi[2] - p[2]];
            let v = [pj[0] - p[0], pj[1] - p[1], pj[2] - p[2]];
            let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
            let cot = (dot / (2.0 * area)).clamp(-COT_CLAMP, COT_CLAMP);
            let w = cot / 2.0;
            let (lo, hi) = (i.min(j) as u32, i.max(j) as u32);
            triplets.push((lo, hi, -w));
            triplets.push((lo, lo, w));
            triplets.push((hi, hi, w));
        }
    }

    let total: f64 = mass.iter().sum();
    for m in &mut mass {
        *m /= total;
    }
    let mut stiffness = SparseSym::from_upper_triplets(n, &triplets)?;
    stiffness.scale(1.0 / total);

    Ok(LaplacianPair {
        stiffness,
        mass,
        kind: LaplacianKind::CotangentMesh,
        bandwidth: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median nearest-neighbor distance of the cloud.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct GraphLaplacianParams {
    pub k: usize,
    pub bandwidth: Bandwidth,
}

impl Default for GraphLaplacianParams {
    fn default() -> Self {
        Self {
            k: crate::geometry::DEFAULT_CLOUD_K,
            bandwidth: Bandwidth::Auto,
        }
    }
}

pub fn gaussian_graph_laplacian(
    cloud: &PointCloud,
    params: GraphLaplacianParams,
) -> Result<LaplacianPair> {
    let n = cloud.n_points();
    let sigma = match params.bandwidth {
        Bandwidth::Auto => cloud.median_nn_distance(),
        Bandwidth::Fixed(s) => {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "bandwidth must be positive, got {s}"
                )));
            }
            s
        }
    };

    let edges = cloud.symmetrized_knn_edges(params.k)?;
    let mut degree = vec![0.0; n];
    let mut triplets: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len() * 3);
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, d) in edges {
        let w = (-(d * d) / (sigma * sigma)).exp();
        if w > 0.0 {
            degree[i] += w;
            degree[j] += w;
            adjacency[i].push(j);
            adjacency[j].push(i);
            triplets.push((i as u32, j as u32, -w));
            triplets.push((i as u32, i as u32, w));
            triplets.push((j as u32, j as u32, w));
        }
    }

    let sizes = crate::geometry::component_sizes(n, |v| adjacency[v].iter().copied());
    if sizes.len() != 1 {
        return Err(Error::Disconnected { sizes });
    }

    let total: f64 = degree.iter().sum();
    let mass: Vec<f64> = degree.iter().map(|&d| d / total).collect();
    let stiffness = SparseSym::from_upper_triplets(n, &triplets)?;

    Ok(LaplacianPair {
        stiffness,
        mass,
        kind: LaplacianKind::GaussianGraph,
        bandwidth: Some(sigma),
    })
}
