//! Laplacian spectra of discretized surfaces, eigenfunction embeddings, and
//! heat-kernel certificates for their embedding dimension.
//!
//! The crate covers the full pipeline: load a triangle mesh or point cloud,
//! assemble the matching Laplacian ([`cotangent_laplacian`] or
//! [`gaussian_graph_laplacian`]), solve for the smallest eigenpairs
//! ([`smallest_eigenpairs`]), map points into eigenfunction coordinates
//! ([`eigenmap`], [`diffusion_map`], [`gps_map`]), determine the smallest
//! embedding dimension empirically ([`embedding_dimension`]) or certify one
//! through heat-kernel separation ([`separation_certificate`]), and register
//! two spectra of the same shape against each other ([`register`]).
//! Closed-form sphere and flat-torus spectra in [`analytic`] back the
//! verification commands.

pub mod analytic;
pub mod distance;
pub mod eigen;
pub mod embed_dim;
mod error;
pub mod geometry;
pub mod heat;
pub mod io;
pub mod laplacian;
pub mod maps;
pub mod register;
pub mod sparse;

pub use analytic::{
    flat_torus_grid_cloud, sphere_coordinate_eigenmap, sphere_spectrum,
    torus_embedding_dimension, torus_proof_basis_coords, torus_spectrum, SphereSpec, TorusGrid,
    TorusSpec,
};
pub use distance::{graph_distance, DistanceField, GraphDistances, PairScan, DEFAULT_SEED};
pub use eigen::{
    degenerate_groups, dense_oracle, smallest_eigenpairs, smallest_eigenpairs_opts, SolverOptions,
    Spectrum, DEGENERACY_TOL,
};
pub use embed_dim::{
    embedding_dimension, immersion_rank, injectivity_scan, self_intersection_check,
    EmbedDimReport, Thresholds,
};
pub use error::{Error, Result};
pub use geometry::{bumpy_sphere, icosphere, Geometry, PointCloud, TriangleMesh};
pub use heat::{
    empirical_remainder, partial_heat_kernel, separation_certificate, CertificateParams,
    SeparationCertificate,
};
pub use laplacian::{
    cotangent_laplacian, gaussian_graph_laplacian, Bandwidth, GraphLaplacianParams, LaplacianKind,
    LaplacianPair,
};
pub use maps::{diffusion_map, eigenmap, gps_map, local_distortion, EmbeddingCoords, MapKind};
pub use register::{
    align_degenerate_groups, match_closest, register, sign_search, stability_probe,
    Correspondence, GroupAlignment, SearchMode, SignSearchOutcome, StabilityReport,
};
pub use sparse::SparseSym;

/// Crate version, recorded in artifact manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
