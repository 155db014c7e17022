//! Readers and writers for OFF meshes, ASCII PLY meshes, CSV point clouds,
//! spectra, and sparse-matrix coordinate dumps.
//!
//! Writers emit floats with 17 significant digits, which round-trips every
//! f64 exactly, and otherwise produce a single canonical formatting so that
//! identical inputs yield byte-identical files.

use std::fs;
use std::path::Path;

use crate::eigen::Spectrum;
use crate::geometry::{PointCloud, TriangleMesh};
use crate::sparse::SparseSym;
use crate::{Error, Result};

/// Canonical float formatting: 17 significant digits, exponent notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(tok: &str, label: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        label: label.into(),
        line,
        msg: format!("expected a number, found {tok:?}"),
    })
}

fn parse_usize(tok: &str, label: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        label: label.into(),
        line,
        msg: format!("expected a non-negative integer, found {tok:?}"),
    })
}

/// Lines with content: comments (`#` to end of line) and blanks stripped,
/// paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

pub fn parse_off(text: &str, label: &str) -> Result<TriangleMesh> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| Error::Parse {
        label: label.into(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let mut fields: Vec<&str> = header.split_whitespace().collect();
    if fields[0] != "OFF" {
        return Err(Error::Parse {
            label: label.into(),
            line: line_no,
            msg: format!("expected OFF header, found {:?}", fields[0]),
        });
    }
    fields.remove(0);
    let (counts_line, counts): (usize, Vec<&str>) = if fields.is_empty() {
        let (l, s) = lines.next().ok_or_else(|| Error::Parse {
            label: label.into(),
            line: line_no,
            msg: "missing vertex/face counts".into(),
        })?;
        (l, s.split_whitespace().collect())
    } else {
        (line_no, fields)
    };
    if counts.len() != 3 {
        return Err(Error::Parse {
            label: label.into(),
            line: counts_line,
            msg: format!("expected `nv nf ne`, found {} fields", counts.len()),
        });
    }
    let nv = parse_usize(counts[0], label, counts_line)?;
    let nf = parse_usize(counts[1], label, counts_line)?;

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| Error::Parse {
            label: label.into(),
            line: counts_line,
            msg: format!("expected {nv} vertex lines"),
        })?;
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                label: label.into(),
                line: l,
                msg: format!("expected 3 coordinates, found {}", f.len()),
            });
        }
        positions.push([
            parse_f64(f[0], label, l)?,
            parse_f64(f[1], label, l)?,
            parse_f64(f[2], label, l)?,
        ]);
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| Error::Parse {
            label: label.into(),
            line: counts_line,
            msg: format!("expected {nf} face lines"),
        })?;
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.is_empty() || parse_usize(f[0], label, l)? != 3 {
            return Err(Error::Parse {
                label: label.into(),
                line: l,
                msg: "only triangle faces are supported".into(),
            });
        }
        if f.len() != 4 {
            return Err(Error::Parse {
                label: label.into(),
                line: l,
                msg: format!("expected `3 a b c`, found {} fields", f.len()),
            });
        }
        faces.push([
            parse_usize(f[1], label, l)?,
            parse_usize(f[2], label, l)?,
            parse_usize(f[3], label, l)?,
        ]);
    }

    if let Some((l, _)) = lines.next() {
        return Err(Error::Parse {
            label: label.into(),
            line: l,
            msg: "trailing content after the declared faces".into(),
        });
    }
    TriangleMesh::new(positions, faces)
}

pub fn off_string(mesh: &TriangleMesh) -> String {
    let mut out = String::from("OFF\n");
    out.push_str(&format!(
        "{} {} {}\n",
        mesh.n_vertices(),
        mesh.n_faces(),
        mesh.edges().len()
    ));
    for p in mesh.positions() {
        out.push_str(&format!(
            "{} {} {}\n",
            format_float(p[0]),
            format_float(p[1]),
            format_float(p[2])
        ));
    }
    for f in mesh.faces() {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    out
}

pub fn parse_ply(text: &str, label: &str) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().map(|(i, s)| (i + 1, s.trim()));
    let err = |line: usize, msg: String| Error::Parse {
        label: label.into(),
        line,
        msg,
    };

    match lines.next() {
        Some((_, "ply")) => {}
        Some((l, other)) => return Err(err(l, format!("expected `ply`, found {other:?}"))),
        None => return Err(err(1, "empty file".into())),
    }

    let mut nv = None;
    let mut nf = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current: Option<&str> = None;
    let mut header_end = 0;
    let mut format_seen = false;
    for (l, line) in lines.by_ref() {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.first().copied() {
            Some("comment") | None => {}
            Some("format") => {
                if f.get(1) != Some(&"ascii") {
                    return Err(err(l, "only `format ascii 1.0` is supported".into()));
                }
                format_seen = true;
            }
            Some("element") => match f.get(1).copied() {
                Some("vertex") => {
                    nv = Some(parse_usize(f.get(2).copied().unwrap_or(""), label, l)?);
                    current = Some("vertex");
                }
                Some("face") => {
                    nf = Some(parse_usize(f.get(2).copied().unwrap_or(""), label, l)?);
                    current = Some("face");
                }
                other => return Err(err(l, format!("unsupported element {other:?}"))),
            },
            Some("property") => match current {
                Some("vertex") => {
                    if f.len() != 3 || !matches!(f[1], "float" | "double" | "float32" | "float64") {
                        return Err(err(l, format!("unsupported vertex property: {line}")));
                    }
                    vertex_props.push(f[2].to_string());
                }
                Some("face") => {
                    if f.get(1) != Some(&"list")
                        || !matches!(f.get(4).copied(), Some("vertex_indices" | "vertex_index"))
                    {
                        return Err(err(l, format!("unsupported face property: {line}")));
                    }
                }
                _ => return Err(err(l, "property before any element".into())),
            },
            Some("end_header") => {
                header_end = l;
                break;
            }
            Some(other) => return Err(err(l, format!("unexpected header line {other:?}"))),
        }
    }
    if header_end == 0 {
        return Err(err(1, "missing end_header".into()));
    }
    if !format_seen {
        return Err(err(1, "missing format line".into()));
    }
    if vertex_props != ["x", "y", "z"] {
        return Err(err(
            header_end,
            format!("vertex properties must be exactly x, y, z; found {vertex_props:?}"),
        ));
    }
    let nv = nv.ok_or_else(|| err(header_end, "missing `element vertex`".into()))?;
    let nf = nf.ok_or_else(|| err(header_end, "missing `element face`".into()))?;

    let mut body = lines.filter(|(_, s)| !s.is_empty());
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = body.next().ok_or_else(|| {
            err(header_end, format!("expected {nv} vertex lines"))
        })?;
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(l, format!("expected 3 coordinates, found {}", f.len())));
        }
        positions.push([
            parse_f64(f[0], label, l)?,
            parse_f64(f[1], label, l)?,
            parse_f64(f[2], label, l)?,
        ]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = body.next().ok_or_else(|| {
            err(header_end, format!("expected {nf} face lines"))
        })?;
        let f: Vec<&str> = s.split_whitespace().collect();
        if f.is_empty() || parse_usize(f[0], label, l)? != 3 || f.len() != 4 {
            return Err(err(l, "only `3 a b c` faces are supported".into()));
        }
        faces.push([
            parse_usize(f[1], label, l)?,
            parse_usize(f[2], label, l)?,
            parse_usize(f[3], label, l)?,
        ]);
    }
    if let Some((l, _)) = body.next() {
        return Err(err(l, "trailing content after the declared faces".into()));
    }
    TriangleMesh::new(positions, faces)
}

pub fn ply_string(mesh: &TriangleMesh) -> String {
    let mut out = String::from("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", mesh.n_vertices()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    out.push_str(&format!("element face {}\n", mesh.n_faces()));
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for p in mesh.positions() {
        out.push_str(&format!(
            "{} {} {}\n",
            format_float(p[0]),
            format_float(p[1]),
            format_float(p[2])
        ));
    }
    for f in mesh.faces() {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    out
}

/// CSV point parser. The first row is treated as a header when any of its
/// fields fails to parse as a number.
pub fn parse_point_csv(text: &str, label: &str) -> Result<PointCloud> {
    let mut rows = Vec::new();
    let mut expected = None;
    for (idx, (line_no, line)) in content_lines(text).enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        if let Some(expected) = expected {
            if fields.len() != expected {
                return Err(Error::Parse {
                    label: label.into(),
                    line: line_no,
                    msg: format!("expected {expected} fields, found {}", fields.len()),
                });
            }
        } else {
            expected = Some(fields.len());
        }
        let row = fields
            .iter()
            .map(|f| parse_f64(f, label, line_no))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    PointCloud::new(rows)
}

pub fn point_csv_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        let fields: Vec<String> = p.iter().map(|&c| format_float(c)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Embedding coordinates as CSV with a `c1..cm` header.
pub fn coords_csv_string(coords: &nalgebra::DMatrix<f64>) -> String {
    let header: Vec<String> = (1..=coords.ncols()).map(|j| format!("c{j}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..coords.nrows() {
        let fields: Vec<String> = (0..coords.ncols())
            .map(|j| format_float(coords[(i, j)]))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Sparse matrix as `row col value` coordinate triplets (upper triangle).
pub fn triplets_string(m: &SparseSym) -> String {
    let mut out = format!("{} {}\n", m.n(), m.upper_triplets().len());
    for (i, j, v) in m.upper_triplets() {
        out.push_str(&format!("{i} {j} {}\n", format_float(v)));
    }
    out
}

pub fn spectrum_string(spec: &Spectrum) -> String {
    let n = spec.n_points();
    let m = spec.count();
    let mut out = format!("spectrum {n} {m}\n");
    let evs: Vec<String> = spec.eigenvalues.iter().map(|&x| format_float(x)).collect();
    out.push_str(&evs.join(" "));
    out.push('\n');
    let res: Vec<String> = spec.residuals.iter().map(|&x| format_float(x)).collect();
    out.push_str(&res.join(" "));
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = (0..=m)
            .map(|j| format_float(spec.eigenvectors[(i, j)]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_spectrum(text: &str, label: &str) -> Result<Spectrum> {
    let mut lines = content_lines(text);
    let (l, header) = lines.next().ok_or_else(|| Error::Parse {
        label: label.into(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 3 || f[0] != "spectrum" {
        return Err(Error::Parse {
            label: label.into(),
            line: l,
            msg: "expected `spectrum <n> <m>` header".into(),
        });
    }
    let n = parse_usize(f[1], label, l)?;
    let m = parse_usize(f[2], label, l)?;

    let mut read_row = |expected: usize, what: &str| -> Result<Vec<f64>> {
        let (l, s) = lines.next().ok_or_else(|| Error::Parse {
            label: label.into(),
            line: 0,
            msg: format!("missing {what}"),
        })?;
        let vals = s
            .split_whitespace()
            .map(|t| parse_f64(t, label, l))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != expected {
            return Err(Error::Parse {
                label: label.into(),
                line: l,
                msg: format!("expected {expected} values for {what}, found {}", vals.len()),
            });
        }
        Ok(vals)
    };

    let eigenvalues = read_row(m + 1, "eigenvalues")?;
    let residuals = read_row(m + 1, "residuals")?;
    let mut eigenvectors = nalgebra::DMatrix::zeros(n, m + 1);
    for i in 0..n {
        let row = read_row(m + 1, "an eigenvector row")?;
        for (j, v) in row.into_iter().enumerate() {
            eigenvectors[(i, j)] = v;
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residuals,
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn label_of(path: &Path) -> String {
    path.display().to_string()
}

pub fn load_off(path: &Path) -> Result<TriangleMesh> {
    parse_off(&read_to_string(path)?, &label_of(path))
}

pub fn load_ply(path: &Path) -> Result<TriangleMesh> {
    parse_ply(&read_to_string(path)?, &label_of(path))
}

/// Loads a mesh, dispatching on the file extension (`.off` or `.ply`).
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("off") | Some("OFF") => load_off(path),
        Some("ply") | Some("PLY") => load_ply(path),
        other => Err(Error::InvalidParameter(format!(
            "unsupported mesh extension {other:?} for {}",
            path.display()
        ))),
    }
}

pub fn load_point_csv(path: &Path) -> Result<PointCloud> {
    parse_point_csv(&read_to_string(path)?, &label_of(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use proptest::prelude::*;

    #[test]
    fn off_round_trip_is_identical() {
        let m = icosphere(2);
        let text = off_string(&m);
        let back = parse_off(&text, "test").unwrap();
        assert_eq!(m.positions(), back.positions());
        assert_eq!(m.faces(), back.faces());
        assert_eq!(off_string(&back), text);
    }

    #[test]
    fn ply_round_trip_is_identical() {
        let m = icosphere(1);
        let text = ply_string(&m);
        let back = parse_ply(&text, "test").unwrap();
        assert_eq!(m.positions(), back.positions());
        assert_eq!(m.faces(), back.faces());
        assert_eq!(ply_string(&back), text);
    }

    #[test]
    fn off_comments_and_blank_lines_are_skipped() {
        let text = "# a comment\nOFF\n\n3 1 3\n0 0 0\n1 0 0 # inline\n0 1 0\n3 0 1 2\n";
        let m = parse_off(text, "test").unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.n_faces(), 1);
    }

    #[test]
    fn off_reports_line_numbers() {
        let text = "OFF\n3 1 3\n0 0 0\n1 0 zero\n0 1 0\n3 0 1 2\n";
        match parse_off(text, "bad.off") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_rejects_quads() {
        let text = "OFF\n4 1 4\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(parse_off(text, "quad.off").is_err());
    }

    #[test]
    fn ply_rejects_extra_vertex_attributes() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n";
        match parse_ply(text, "attrs.ply") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("x, y, z")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_header_auto_detect() {
        let with_header = "x,y\n0,0\n1,0\n0,1\n";
        let without = "0,0\n1,0\n0,1\n";
        let a = parse_point_csv(with_header, "a").unwrap();
        let b = parse_point_csv(without, "b").unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn csv_ragged_rows_are_rejected() {
        let text = "0,0\n1,0,5\n";
        match parse_point_csv(text, "ragged") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn float_format_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let s = format_float(x);
            let y: f64 = s.parse().unwrap();
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
