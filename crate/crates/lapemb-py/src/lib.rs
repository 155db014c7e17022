//! Python module exposing the core pipeline: build a spectrum from a mesh
//! or point cloud, read eigenfunction coordinates out of it, and query the
//! closed-form embedding dimensions.
//!
//! Build with `cargo build -p lapemb-py`, then place the produced
//! `liblapemb_py.so` on the Python path as `lapemb_py.so`.

use lapemb::distance::default_sources;
use lapemb::register::SearchMode;
use lapemb::{
    cotangent_laplacian, gaussian_graph_laplacian, graph_distance, Bandwidth, Geometry,
    GraphLaplacianParams, PointCloud, SolverOptions, Thresholds, TorusGrid, TriangleMesh,
    DEFAULT_SEED,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn pyerr(e: lapemb::Error) -> PyErr {
    match e {
        lapemb::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(coords: &lapemb::EmbeddingCoords) -> Vec<Vec<f64>> {
    let m = &coords.coords;
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Eigenvalues and eigenfunctions of one shape, ready to be turned into
/// embedding coordinates.
#[pyclass(name = "Spectrum", frozen)]
struct PySpectrum {
    inner: lapemb::Spectrum,
}

#[pymethods]
impl PySpectrum {
    /// All computed eigenvalues, starting with the constant mode's 0.
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.residuals.clone()
    }

    /// Non-constant eigenpairs held.
    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    /// Rows of the eigenfunction map into the first `m` coordinates.
    fn eigenmap(&self, m: usize) -> PyResult<Vec<Vec<f64>>> {
        let coords = lapemb::eigenmap(&self.inner, m).map_err(pyerr)?;
        Ok(rows(&coords))
    }

    /// Diffusion map at time `t`; `None` picks `1 / lambda_1`.
    #[pyo3(signature = (m, t=None))]
    fn diffusion_map(&self, m: usize, t: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
        let coords = lapemb::diffusion_map(&self.inner, m, t).map_err(pyerr)?;
        Ok(rows(&coords))
    }

    fn gps_map(&self, m: usize) -> PyResult<Vec<Vec<f64>>> {
        let coords = lapemb::gps_map(&self.inner, m).map_err(pyerr)?;
        Ok(rows(&coords))
    }

    /// Heat kernel truncated to the first `k` non-constant modes.
    fn heat_kernel(&self, k: usize, t: f64, i: usize, j: usize) -> PyResult<f64> {
        lapemb::partial_heat_kernel(&self.inner, k, t, i, j).map_err(pyerr)
    }

    fn __repr__(&self) -> String {
        format!(
            "Spectrum(n_points={}, count={})",
            self.inner.n_points(),
            self.inner.count()
        )
    }
}

fn mesh_from_lists(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> PyResult<TriangleMesh> {
    TriangleMesh::new(vertices, faces).map_err(pyerr)
}

fn solve(lap: &lapemb::LaplacianPair, count: usize, seed: u64) -> PyResult<PySpectrum> {
    let opts = SolverOptions {
        seed,
        ..SolverOptions::default()
    };
    let inner = lapemb::smallest_eigenpairs_opts(lap, count, opts).map_err(pyerr)?;
    Ok(PySpectrum { inner })
}

/// Spectrum of the cotangent Laplacian of a triangle mesh.
#[pyfunction]
#[pyo3(signature = (vertices, faces, count, seed=DEFAULT_SEED))]
fn mesh_spectrum(
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    count: usize,
    seed: u64,
) -> PyResult<PySpectrum> {
    let mesh = mesh_from_lists(vertices, faces)?;
    let lap = cotangent_laplacian(&mesh).map_err(pyerr)?;
    solve(&lap, count, seed)
}

/// Spectrum of the Gaussian-weight graph Laplacian of a point cloud.
#[pyfunction]
#[pyo3(signature = (points, count, knn=lapemb::geometry::DEFAULT_CLOUD_K, bandwidth=None, seed=DEFAULT_SEED))]
fn cloud_spectrum(
    points: Vec<Vec<f64>>,
    count: usize,
    knn: usize,
    bandwidth: Option<f64>,
    seed: u64,
) -> PyResult<PySpectrum> {
    let cloud = PointCloud::new(points).map_err(pyerr)?;
    let params = GraphLaplacianParams {
        k: knn,
        bandwidth: bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
    };
    let lap = gaussian_graph_laplacian(&cloud, params).map_err(pyerr)?;
    solve(&lap, count, seed)
}

/// Smallest m whose eigenfunction map embeds the mesh, or None if no
/// m <= mmax does.
#[pyfunction]
#[pyo3(signature = (vertices, faces, mmax, seed=DEFAULT_SEED))]
fn mesh_embedding_dimension(
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    mmax: usize,
    seed: u64,
) -> PyResult<Option<usize>> {
    let mesh = mesh_from_lists(vertices, faces)?;
    let lap = cotangent_laplacian(&mesh).map_err(pyerr)?;
    let spec = solve(&lap, mmax, seed)?.inner;
    let geom = Geometry::Mesh(mesh);
    let sources = default_sources(geom.n_points(), seed);
    let gd = graph_distance(&geom, &sources).map_err(pyerr)?;
    let thresholds = Thresholds {
        seed,
        ..Thresholds::default()
    };
    let report = lapemb::embedding_dimension(&spec, &geom, &gd, mmax, &thresholds).map_err(pyerr)?;
    Ok(report.m_star)
}

/// Vertex correspondence from the first mesh into the second, matched in m
/// eigenfunction coordinates with the sign ambiguity searched exhaustively.
#[pyfunction]
#[pyo3(signature = (vertices_a, faces_a, vertices_b, faces_b, m, seed=DEFAULT_SEED))]
fn register_meshes(
    vertices_a: Vec<[f64; 3]>,
    faces_a: Vec<[usize; 3]>,
    vertices_b: Vec<[f64; 3]>,
    faces_b: Vec<[usize; 3]>,
    m: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    let lap_a = cotangent_laplacian(&mesh_from_lists(vertices_a, faces_a)?).map_err(pyerr)?;
    let lap_b = cotangent_laplacian(&mesh_from_lists(vertices_b, faces_b)?).map_err(pyerr)?;
    let spec_a = solve(&lap_a, m + 1, seed)?.inner;
    let spec_b = solve(&lap_b, m + 1, seed)?.inner;
    let out =
        lapemb::register(&spec_a, &spec_b, m, SearchMode::Exhaustive).map_err(pyerr)?;
    Ok(out.correspondence.map)
}

/// Closed-form embedding dimension of the flat torus with n-1 sides a and
/// one side b >= a.
#[pyfunction]
fn torus_embedding_dimension(a: f64, b: f64, n: usize) -> PyResult<usize> {
    lapemb::torus_embedding_dimension(a, b, n).map_err(pyerr)
}

/// Embedding dimension of the round n-sphere: the multiplicity n+1 of its
/// first non-zero eigenvalue.
#[pyfunction]
fn sphere_embedding_dimension(n: usize) -> PyResult<usize> {
    let spec = lapemb::sphere_spectrum(n, 1).map_err(pyerr)?;
    Ok(spec.degrees[1].multiplicity as usize)
}

/// Points of a uniform lattice on the flat torus, embedded in R^{2n}.
#[pyfunction]
fn flat_torus_cloud(a: f64, b: f64, n: usize, dims: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
    let grid = TorusGrid::new(a, b, n, &dims).map_err(pyerr)?;
    let cloud = lapemb::flat_torus_grid_cloud(&grid).map_err(pyerr)?;
    Ok(cloud.points().to_vec())
}

/// Vertices and faces of a unit icosphere.
#[pyfunction]
fn icosphere(subdivisions: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let mesh = lapemb::icosphere(subdivisions);
    (mesh.positions().to_vec(), mesh.faces().to_vec())
}

/// Vertices and faces from an OFF or ASCII PLY file.
#[pyfunction]
fn load_mesh(path: std::path::PathBuf) -> PyResult<(Vec<[f64; 3]>, Vec<[usize; 3]>)> {
    let mesh = lapemb::io::load_mesh(&path).map_err(pyerr)?;
    Ok((mesh.positions().to_vec(), mesh.faces().to_vec()))
}

#[pymodule]
fn lapemb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(mesh_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(cloud_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_embedding_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(register_meshes, m)?)?;
    m.add_function(wrap_pyfunction!(torus_embedding_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_embedding_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(flat_torus_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(icosphere, m)?)?;
    m.add_function(wrap_pyfunction!(load_mesh, m)?)?;
    m.add("__version__", lapemb::VERSION)?;
    Ok(())
}
