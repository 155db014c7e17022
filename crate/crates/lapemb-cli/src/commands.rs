use std::path::Path;

use lapemb::analytic::{torus_embedding_dimension, torus_proof_basis_coords, torus_spectrum, Trig};
use lapemb::distance::{default_sources, graph_distance, PairScan};
use lapemb::embed_dim::injectivity_scan_opts;
use lapemb::heat::CertificateParams;
use lapemb::io::{self, format_float};
use lapemb::register::{register_tol, SearchMode};
use lapemb::{
    cotangent_laplacian, diffusion_map, eigenmap, embedding_dimension, gaussian_graph_laplacian,
    gps_map, separation_certificate, smallest_eigenpairs_opts, sphere_coordinate_eigenmap,
    sphere_spectrum, Bandwidth, Error, Geometry, GraphLaplacianParams, LaplacianKind,
    LaplacianPair, Result, SolverOptions, Spectrum, Thresholds, TorusGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::manifest::{num, Manifest};
use crate::{
    CertifyArgs, Command, EigenArgs, EmbedArgs, EmbedDimArgs, GraphOpts, LaplacianArgs, MapChoice,
    ModeChoice, RegisterArgs, SphereVerifyArgs, TorusVerifyArgs,
};

pub enum Outcome {
    Pass,
    /// The computation ran and its artifacts were written, but the domain
    /// check it encodes did not hold.
    Fail(String),
}

pub fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Laplacian(args) => laplacian(args),
        Command::Eigen(args) => eigen(args),
        Command::Embed(args) => embed(args),
        Command::EmbedDim(args) => embed_dim(args),
        Command::Certify(args) => certify(args),
        Command::Register(args) => register_cmd(args),
        Command::TorusVerify(args) => torus_verify(args),
        Command::SphereVerify(args) => sphere_verify(args),
    }
}

fn load_geometry(path: &Path) -> Result<Geometry> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("off") | Some("ply") => Ok(Geometry::Mesh(io::load_mesh(path)?)),
        Some("csv") => Ok(Geometry::Cloud(io::load_point_csv(path)?)),
        _ => Err(Error::InvalidParameter(format!(
            "cannot tell mesh from cloud: {} has no .off/.ply/.csv extension",
            path.display()
        ))),
    }
}

fn build_laplacian(geom: &Geometry, graph: &GraphOpts) -> Result<LaplacianPair> {
    match geom {
        Geometry::Mesh(mesh) => cotangent_laplacian(mesh),
        Geometry::Cloud(cloud) => gaussian_graph_laplacian(
            cloud,
            GraphLaplacianParams {
                k: graph.knn,
                bandwidth: graph.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
            },
        ),
    }
}

fn solve(lap: &LaplacianPair, count: usize, seed: u64) -> Result<Spectrum> {
    smallest_eigenpairs_opts(
        lap,
        count,
        SolverOptions {
            seed,
            ..SolverOptions::default()
        },
    )
}

fn record_graph_params(man: &mut Manifest, graph: &GraphOpts, seed: u64) {
    man.param("knn", graph.knn as u64);
    man.param("bandwidth", graph.bandwidth.map_or(json!(null), num));
    man.param("seed", seed);
}

fn kind_name(kind: LaplacianKind) -> &'static str {
    match kind {
        LaplacianKind::CotangentMesh => "cotangent-mesh",
        LaplacianKind::GaussianGraph => "gaussian-graph",
    }
}

fn laplacian(args: LaplacianArgs) -> Result<Outcome> {
    let mut man = Manifest::new("laplacian", &args.common.out_dir)?;
    man.input(&args.input)?;
    record_graph_params(&mut man, &args.graph, args.common.seed);

    let geom = load_geometry(&args.input)?;
    let lap = build_laplacian(&geom, &args.graph)?;

    man.emit("stiffness.txt", &io::triplets_string(&lap.stiffness))?;
    let mut mass = String::from("mass\n");
    for &m in &lap.mass {
        mass.push_str(&format_float(m));
        mass.push('\n');
    }
    man.emit("mass.csv", &mass)?;

    man.result("n", lap.n() as u64);
    man.result("nnz", lap.stiffness.nnz() as u64);
    man.result("kind", kind_name(lap.kind));
    man.result("bandwidth_used", lap.bandwidth.map_or(json!(null), num));
    man.write()?;
    println!(
        "{} Laplacian on {} points: stiffness.txt, mass.csv",
        kind_name(lap.kind),
        lap.n()
    );
    Ok(Outcome::Pass)
}

fn eigen(args: EigenArgs) -> Result<Outcome> {
    let mut man = Manifest::new("eigen", &args.common.out_dir)?;
    man.input(&args.input)?;
    record_graph_params(&mut man, &args.graph, args.common.seed);
    man.param("count", args.count as u64);
    man.param("tol", num(args.tol));
    man.param("max_subspace", args.max_subspace as u64);

    let geom = load_geometry(&args.input)?;
    let lap = build_laplacian(&geom, &args.graph)?;
    let spec = smallest_eigenpairs_opts(
        &lap,
        args.count,
        SolverOptions {
            tol: args.tol,
            seed: args.common.seed,
            max_subspace: args.max_subspace,
        },
    )?;

    man.emit("spectrum.txt", &io::spectrum_string(&spec))?;
    man.result(
        "eigenvalues",
        spec.eigenvalues.iter().map(|&l| num(l)).collect::<Vec<_>>(),
    );
    man.result(
        "max_residual",
        num(spec.residuals.iter().copied().fold(0.0, f64::max)),
    );
    man.write()?;
    println!(
        "{} eigenpairs of {} points: spectrum.txt",
        spec.count(),
        spec.n_points()
    );
    Ok(Outcome::Pass)
}

fn embed(args: EmbedArgs) -> Result<Outcome> {
    let mut man = Manifest::new("embed", &args.common.out_dir)?;
    man.input(&args.input)?;
    record_graph_params(&mut man, &args.graph, args.common.seed);
    let map_name = match args.map {
        MapChoice::Eigen => "eigen",
        MapChoice::Diffusion => "diffusion",
        MapChoice::Gps => "gps",
    };
    man.param("map", map_name);
    man.param("m", args.m as u64);
    man.param("t", args.t.map_or(json!(null), num));

    let geom = load_geometry(&args.input)?;
    let faces = match &geom {
        Geometry::Mesh(mesh) => Some(mesh.faces().to_vec()),
        Geometry::Cloud(_) => None,
    };
    let lap = build_laplacian(&geom, &args.graph)?;
    let spec = solve(&lap, args.m, args.common.seed)?;
    let coords = match args.map {
        MapChoice::Eigen => eigenmap(&spec, args.m)?,
        MapChoice::Diffusion => diffusion_map(&spec, args.m, args.t)?,
        MapChoice::Gps => gps_map(&spec, args.m)?,
    };

    man.emit("embedding.csv", &io::coords_csv_string(&coords.coords))?;
    let mut wrote_off = false;
    if args.m == 3 {
        if let Some(faces) = &faces {
            man.emit("embedding.off", &image_off_text(&coords, faces))?;
            wrote_off = true;
        }
    }

    man.result("t_used", coords.t.map_or(json!(null), num));
    man.write()?;
    println!(
        "{map_name} map of {} points into {} coordinates: embedding.csv{}",
        spec.n_points(),
        args.m,
        if wrote_off { ", embedding.off" } else { "" }
    );
    Ok(Outcome::Pass)
}

/// OFF text of the image vertices over the source faces. Written directly:
/// an embedded image is a picture, not a certified mesh, so it skips the
/// mesh type's validity checks.
fn image_off_text(coords: &lapemb::EmbeddingCoords, faces: &[[usize; 3]]) -> String {
    let coords = &coords.coords;
    let mut out = String::from("OFF\n");
    out.push_str(&format!("{} {} 0\n", coords.nrows(), faces.len()));
    for i in 0..coords.nrows() {
        let row: Vec<String> = (0..3).map(|j| format_float(coords[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    for f in faces {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    out
}

fn embed_dim(args: EmbedDimArgs) -> Result<Outcome> {
    let mut man = Manifest::new("embed-dim", &args.common.out_dir)?;
    man.input(&args.input)?;
    record_graph_params(&mut man, &args.graph, args.common.seed);
    man.param("mmax", args.mmax as u64);
    man.param("delta", args.delta.map_or(json!(null), num));
    man.param("tau", args.tau.map_or(json!(null), num));
    man.param("rank_tol", num(args.rank_tol));
    man.param("intrinsic_dim", args.intrinsic_dim as u64);

    let geom = load_geometry(&args.input)?;
    let lap = build_laplacian(&geom, &args.graph)?;
    let spec = solve(&lap, args.mmax, args.common.seed)?;
    let sources = default_sources(geom.n_points(), args.common.seed);
    let gd = graph_distance(&geom, &sources)?;
    let thresholds = Thresholds {
        delta: args.delta,
        tau: args.tau,
        rank_tol: args.rank_tol,
        intrinsic_dim: args.intrinsic_dim,
        scan: PairScan::Auto,
        seed: args.common.seed,
    };
    let report = embedding_dimension(&spec, &geom, &gd, args.mmax, &thresholds)?;

    let diagnostics: Vec<_> = report
        .diagnostics
        .iter()
        .map(|d| {
            json!({
                "m": d.m,
                "injective": d.injective,
                "vacuous": d.vacuous,
                "min_image_distance": num(d.min_image_distance),
                "tau": num(d.tau),
                "immersed": d.immersed,
                "min_rank_ratio": num(d.min_rank_ratio),
                "intersecting_pairs": d.intersecting_pairs,
                "pass": d.pass,
            })
        })
        .collect();
    let doc = json!({
        "m_star": report.m_star,
        "delta": num(report.delta),
        "tau": report.tau.map_or(json!(null), num),
        "rank_tol": num(report.rank_tol),
        "diagnostics": diagnostics,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("valid JSON document");
    text.push('\n');
    man.emit("embed_dim.json", &text)?;
    man.result("m_star", report.m_star.map(|m| m as u64));
    man.write()?;

    match report.m_star {
        Some(m) => {
            println!("embedding dimension m_star = {m}: embed_dim.json");
            Ok(Outcome::Pass)
        }
        None => Ok(Outcome::Fail(format!(
            "no m <= {} passes the embedding checks; see embed_dim.json",
            args.mmax
        ))),
    }
}

fn certify(args: CertifyArgs) -> Result<Outcome> {
    let mut man = Manifest::new("certify", &args.common.out_dir)?;
    man.input(&args.input)?;
    record_graph_params(&mut man, &args.graph, args.common.seed);
    man.param("epsilon", num(args.epsilon));
    man.param("dmax", args.dmax as u64);

    let geom = load_geometry(&args.input)?;
    let lap = build_laplacian(&geom, &args.graph)?;
    let spec = solve(&lap, args.dmax, args.common.seed)?;
    let sources = default_sources(geom.n_points(), args.common.seed);
    let gd = graph_distance(&geom, &sources)?;
    let mut params = CertificateParams::new(args.epsilon, args.dmax);
    params.seed = args.common.seed;
    let cert = separation_certificate(&spec, &gd, &params)?;

    let doc = json!({
        "d": cert.d,
        "t": num(cert.t),
        "epsilon": num(cert.epsilon),
        "margin": num(cert.margin),
        "pairs_tested": cert.pairs_tested,
        "pass": cert.pass,
        "vacuous": cert.vacuous,
        "sampled": cert.sampled,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("valid JSON document");
    text.push('\n');
    man.emit("certificate.json", &text)?;
    man.result("d", cert.d as u64);
    man.result("pass", cert.pass);
    man.write()?;

    if cert.pass {
        println!(
            "separation certified at d = {} (margin {:.3e}): certificate.json",
            cert.d, cert.margin
        );
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!(
            "no d <= {} separates all pairs at distance >= {}; see certificate.json",
            args.dmax, args.epsilon
        )))
    }
}

fn register_cmd(args: RegisterArgs) -> Result<Outcome> {
    let mut man = Manifest::new("register", &args.common.out_dir)?;
    man.input(&args.source)?;
    man.input(&args.target)?;
    record_graph_params(&mut man, &args.graph, args.common.seed);
    let mode_name = match args.mode {
        ModeChoice::Exhaustive => "exhaustive",
        ModeChoice::Greedy => "greedy",
    };
    man.param("m", args.m as u64);
    man.param("mode", mode_name);
    man.param("degeneracy_tol", num(args.degeneracy_tol));

    let geom_a = load_geometry(&args.source)?;
    let geom_b = load_geometry(&args.target)?;
    // One mode past m so the matcher can see whether the window ends on a
    // complete degenerate group.
    let spec_a = solve(&build_laplacian(&geom_a, &args.graph)?, args.m + 1, args.common.seed)?;
    let spec_b = solve(&build_laplacian(&geom_b, &args.graph)?, args.m + 1, args.common.seed)?;
    let mode = match args.mode {
        ModeChoice::Exhaustive => SearchMode::Exhaustive,
        ModeChoice::Greedy => SearchMode::Greedy,
    };
    let out = register_tol(&spec_a, &spec_b, args.m, mode, args.degeneracy_tol)?;

    let mut csv = String::from("source,target\n");
    for (i, &j) in out.correspondence.map.iter().enumerate() {
        csv.push_str(&format!("{i},{j}\n"));
    }
    man.emit("correspondence.csv", &csv)?;

    man.result("cost", num(out.correspondence.cost));
    man.result("identity_fraction", num(out.correspondence.identity_fraction()));
    man.result("signs", json!(out.signs));
    man.result("candidates_evaluated", out.candidates_evaluated as u64);
    man.write()?;
    println!(
        "matched {} source vertices at cost {:.6e}: correspondence.csv",
        out.correspondence.map.len(),
        out.correspondence.cost
    );
    Ok(Outcome::Pass)
}

/// Grid sized to roughly 10k points with the torus's own aspect ratio,
/// long axis last.
fn default_torus_dims(a: f64, b: f64, n: usize) -> Vec<usize> {
    let ratio = b / a;
    let base = ((10_240.0 / ratio).powf(1.0 / n as f64).round() as usize).max(4);
    let mut dims = vec![base; n - 1];
    dims.push(((base as f64 * ratio).round() as usize).max(4));
    dims
}

fn torus_verify(args: TorusVerifyArgs) -> Result<Outcome> {
    let mut man = Manifest::new("torus-verify", &args.common.out_dir)?;
    man.param("a", num(args.a));
    man.param("b", num(args.b));
    man.param("n", args.n as u64);
    man.param("seed", args.common.seed);

    let d = torus_embedding_dimension(args.a, args.b, args.n)?;
    let dims = args
        .dims
        .clone()
        .unwrap_or_else(|| default_torus_dims(args.a, args.b, args.n));
    man.param("dims", json!(dims));
    let grid = TorusGrid::new(args.a, args.b, args.n, &dims)?;
    let metric = grid.metric();
    let delta = 3.0 * grid.mean_spacing();

    // The formula says the proof-basis map turns injective exactly at d:
    // scan the grid image at d and d-1 with a zero collision threshold
    // (analytic collisions are bit-exact).
    let mut scans = Vec::new();
    let mut injective_at = Vec::new();
    for m in [d, d - 1] {
        let coords = torus_proof_basis_coords(&grid, m)?;
        let scan =
            injectivity_scan_opts(&coords, &metric, delta, 0.0, PairScan::Exhaustive, args.common.seed)?;
        injective_at.push(scan.pass && !scan.vacuous);
        scans.push(json!({
            "m": m,
            "pass": scan.pass,
            "vacuous": scan.vacuous,
            "min_image_distance": num(scan.min_image_distance),
            "pairs_tested": scan.pairs_tested,
        }));
    }
    let verified = injective_at[0] && !injective_at[1];

    let table_len = (2 * d).max(16);
    let spectrum = torus_spectrum(args.a, args.b, args.n, table_len)?;
    let mut csv = String::from("index,eigenvalue");
    for axis in 0..args.n {
        csv.push_str(&format!(",m_{}", axis + 1));
    }
    for axis in 0..args.n {
        csv.push_str(&format!(",trig_{}", axis + 1));
    }
    csv.push('\n');
    for (idx, mode) in spectrum.modes.iter().enumerate() {
        csv.push_str(&format!("{},{}", idx + 1, format_float(mode.eigenvalue)));
        for &f in &mode.freqs {
            csv.push_str(&format!(",{f}"));
        }
        for &t in &mode.trig {
            csv.push_str(match t {
                Trig::Cos => ",cos",
                Trig::Sin => ",sin",
            });
        }
        csv.push('\n');
    }
    man.emit("torus_spectrum.csv", &csv)?;

    let doc = json!({
        "a": num(args.a),
        "b": num(args.b),
        "n": args.n,
        "d": d,
        "dims": dims,
        "delta": num(delta),
        "scans": scans,
        "verified": verified,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("valid JSON document");
    text.push('\n');
    man.emit("torus_verification.json", &text)?;
    man.result("d", d as u64);
    man.result("verified", verified);
    man.write()?;

    if verified {
        println!(
            "torus a = {}, b = {}, n = {}: d = {d}, grid scan agrees (injective at {d}, not at {})",
            args.a,
            args.b,
            args.n,
            d - 1
        );
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!(
            "grid scan contradicts d = {d}; see torus_verification.json"
        )))
    }
}

/// Uniform points on the unit sphere in `R^{dim}` via normalized Gaussians.
fn sphere_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || {
        let u: f64 = 1.0 - rng.random::<f64>();
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    (0..count)
        .map(|_| {
            loop {
                let p: Vec<f64> = (0..dim).map(|_| normal()).collect();
                let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    return p.iter().map(|x| x / norm).collect();
                }
            }
        })
        .collect()
}

fn sphere_verify(args: SphereVerifyArgs) -> Result<Outcome> {
    let mut man = Manifest::new("sphere-verify", &args.common.out_dir)?;
    man.param("n", args.n as u64);
    man.param("degree_max", args.degree_max);
    man.param("samples", args.samples as u64);
    man.param("seed", args.common.seed);

    let spec = sphere_spectrum(args.n, args.degree_max)?;
    let mut csv = String::from("degree,eigenvalue,multiplicity,cumulative\n");
    let mut cumulative = 0u64;
    for row in &spec.degrees {
        cumulative += row.multiplicity;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.k,
            format_float(row.eigenvalue),
            row.multiplicity,
            cumulative
        ));
    }
    man.emit("sphere_spectrum.csv", &csv)?;

    // The first non-constant eigenspace is spanned by the n+1 coordinate
    // functions, so the embedding dimension is its multiplicity. Push random
    // unit points through the coordinate eigenmap and confirm it is the
    // identity embedding up to one scale factor, hence injective.
    let d = args.n + 1;
    let degree_one = &spec.degrees[1];
    let multiplicity_ok =
        degree_one.multiplicity == d as u64 && degree_one.eigenvalue == args.n as f64;

    let points = sphere_samples(d, args.samples.max(2), args.common.seed);
    let coords = sphere_coordinate_eigenmap(args.n, &points)?;
    let scale = (d as f64).sqrt();
    let mut max_deviation = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for j in 0..d {
            max_deviation = max_deviation.max((coords.coords[(i, j)] - scale * p[j]).abs());
        }
    }
    let mut min_image_distance = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            min_image_distance = min_image_distance.min(coords.image_distance(i, j));
        }
    }
    let verified = multiplicity_ok && max_deviation <= 1e-12 && min_image_distance > 0.0;

    let doc = json!({
        "n": args.n,
        "d": d,
        "lambda_1": num(degree_one.eigenvalue),
        "multiplicity_1": degree_one.multiplicity,
        "samples": points.len(),
        "max_identity_deviation": num(max_deviation),
        "min_image_distance": num(min_image_distance),
        "verified": verified,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("valid JSON document");
    text.push('\n');
    man.emit("sphere_verification.json", &text)?;
    man.result("d", d as u64);
    man.result("verified", verified);
    man.write()?;

    if verified {
        println!(
            "sphere S^{}: d = {d} from the degree-1 eigenspace, coordinate map injective on {} samples",
            args.n,
            points.len()
        );
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(
            "coordinate eigenmap check failed; see sphere_verification.json".into(),
        ))
    }
}
