//! Plain-text file formats: OBJ frames, cut lists, seed lists, saliency weights.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::anim::Anim;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Vertices and triangles of one OBJ file.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjMesh<T> {
    pub vertices: Vec<[T; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses the `v` and `f` records of an ASCII OBJ file.
///
/// Face corners may use the `v/vt/vn` forms; only the position index is
/// kept. Negative (relative) indices are resolved. Polygons are rejected.
pub fn parse_obj<T: Real>(text: &str, path: &Path) -> Result<ObjMesh<T>> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut p = [T::zero(); 3];
                for c in &mut p {
                    let tok = tokens.next().ok_or_else(|| parse_err(path, lineno, "short vertex record"))?;
                    let x: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad coordinate `{tok}`")))?;
                    *c = T::lit(x);
                }
                vertices.push(p);
            }
            Some("f") => {
                let corners: Vec<&str> = tokens.collect();
                if corners.len() != 3 {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("expected a triangle, got {} corners", corners.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (slot, corner) in tri.iter_mut().zip(&corners) {
                    let idx = corner.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad face index `{corner}`")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 {
                        return Err(parse_err(path, lineno, format!("face index {i} out of range")));
                    }
                    *slot = resolved as usize;
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    Ok(ObjMesh { vertices, triangles })
}

pub fn read_obj<T: Real>(path: &Path) -> Result<ObjMesh<T>> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text, path)
}

/// Formats a mesh as OBJ. Coordinates use shortest round-trip formatting.
pub fn format_obj<T: Real>(vertices: &[[T; 3]], triangles: &[[usize; 3]]) -> String {
    let mut out = String::with_capacity(vertices.len() * 40 + triangles.len() * 20);
    for p in vertices {
        let _ = writeln!(out, "v {} {} {}", p[0].to_f64_lossy(), p[1].to_f64_lossy(), p[2].to_f64_lossy());
    }
    for t in triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn write_obj<T: Real>(path: &Path, vertices: &[[T; 3]], triangles: &[[usize; 3]]) -> Result<()> {
    fs::write(path, format_obj(vertices, triangles))?;
    Ok(())
}

/// Loads an ordered list of OBJ frames into one sequence.
///
/// Connectivity comes from the first frame; every other frame must have the
/// same vertex count and an identical triangle list. `cuts[f]` is set for
/// every `f` in `cut_marks` and for frame 0.
pub fn load_sequence<T: Real>(frame_sources: &[PathBuf], cut_marks: &[usize]) -> Result<Anim<T>> {
    let Some(first) = frame_sources.first() else {
        return Err(Error::EmptyInput);
    };
    let base: ObjMesh<T> = read_obj(first)?;
    let m = base.vertices.len();
    let mut positions = Vec::with_capacity(m * frame_sources.len());
    positions.extend_from_slice(&base.vertices);
    for (f, path) in frame_sources.iter().enumerate().skip(1) {
        let mesh: ObjMesh<T> = read_obj(path)?;
        if mesh.vertices.len() != m || mesh.triangles != base.triangles {
            return Err(Error::ConnectivityMismatch(f));
        }
        positions.extend_from_slice(&mesh.vertices);
    }
    let n = frame_sources.len();
    let mut cuts = vec![false; n];
    for &f in cut_marks {
        if f >= n {
            return Err(Error::InvalidConfig(format!("cut frame {f} beyond {n} frames")));
        }
        cuts[f] = true;
    }
    Anim::from_flat(positions, m, base.triangles, cuts)
}

/// Lexicographically sorted `.obj` files of a directory.
pub fn list_obj_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every OBJ frame in `dir`, with an optional cut file.
pub fn load_sequence_dir<T: Real>(dir: &Path, cut_file: Option<&Path>) -> Result<Anim<T>> {
    let files = list_obj_files(dir)?;
    let cuts = match cut_file {
        Some(p) => read_index_list(p)?,
        None => Vec::new(),
    };
    load_sequence(&files, &cuts)
}

/// Writes one OBJ per frame as `{prefix}{f:05}.obj`; returns the paths.
pub fn save_sequence<T: Real>(anim: &Anim<T>, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(anim.n_frames());
    for (f, frame) in anim.frames().enumerate() {
        let path = dir.join(format!("{prefix}{f:05}.obj"));
        write_obj(&path, frame, anim.triangles())?;
        paths.push(path);
    }
    Ok(paths)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Whitespace-separated frame (or triangle) indices, `#` comments allowed.
pub fn parse_index_list(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (lineno, line) in data_lines(text) {
        for tok in line.split_whitespace() {
            out.push(
                tok.parse()
                    .map_err(|_| parse_err(path, lineno, format!("bad index `{tok}`")))?,
            );
        }
    }
    Ok(out)
}

pub fn read_index_list(path: &Path) -> Result<Vec<usize>> {
    parse_index_list(&fs::read_to_string(path)?, path)
}

/// One line per part, each a whitespace-separated list of triangle indices.
pub fn parse_seed_file(text: &str, path: &Path) -> Result<Vec<Vec<usize>>> {
    let mut parts = Vec::new();
    for (lineno, line) in data_lines(text) {
        let tris = line
            .split_whitespace()
            .map(|tok| tok.parse().map_err(|_| parse_err(path, lineno, format!("bad triangle index `{tok}`"))))
            .collect::<Result<Vec<usize>>>()?;
        parts.push(tris);
    }
    Ok(parts)
}

pub fn read_seed_file(path: &Path) -> Result<Vec<Vec<usize>>> {
    parse_seed_file(&fs::read_to_string(path)?, path)
}

/// Non-negative per-vertex weights, whitespace-separated; length must be `m`.
pub fn parse_saliency<T: Real>(text: &str, path: &Path, m: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(m);
    for (lineno, line) in data_lines(text) {
        for tok in line.split_whitespace() {
            let w: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad weight `{tok}`")))?;
            if !(w >= 0.0 && w.is_finite()) {
                return Err(parse_err(path, lineno, format!("weight {w} must be finite and non-negative")));
            }
            out.push(T::lit(w));
        }
    }
    if out.len() != m {
        return Err(Error::Dimension(format!("{} saliency weights for {} vertices", out.len(), m)));
    }
    Ok(out)
}

pub fn read_saliency<T: Real>(path: &Path, m: usize) -> Result<Vec<T>> {
    parse_saliency(&fs::read_to_string(path)?, path, m)
}
