//! ASCII OBJ mesh I/O (v/vt/f records, 1-based indices).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{TriMesh, Vec3};
use crate::{Error, Result};

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in &mesh.vertices {
        // Shortest round-trip representation keeps read(write(m)) exact.
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    if let Some(uv) = &mesh.uv {
        for t in uv {
            writeln!(w, "vt {} {}", t[0], t[1])?;
        }
        for f in &mesh.faces {
            writeln!(
                w,
                "f {}/{} {}/{} {}/{}",
                f[0] + 1,
                f[0] + 1,
                f[1] + 1,
                f[1] + 1,
                f[2] + 1,
                f[2] + 1
            )?;
        }
    } else {
        for f in &mesh.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
    }
    Ok(())
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let r = BufReader::new(File::open(path)?);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut uv: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut p = [0.0f64; 3];
                for x in p.iter_mut() {
                    *x = parse_f64(it.next(), path, ln)?;
                }
                vertices.push(Vec3::new(p[0], p[1], p[2]));
            }
            Some("vt") => {
                let u = parse_f64(it.next(), path, ln)?;
                let v = parse_f64(it.next(), path, ln)?;
                uv.push([u, v]);
            }
            Some("f") => {
                let mut idx = [0u32; 3];
                for x in idx.iter_mut() {
                    let tok = it
                        .next()
                        .ok_or_else(|| Error::other(format!("{}:{}: short face", path.display(), ln + 1)))?;
                    let first = tok.split('/').next().unwrap();
                    let one_based: i64 = first
                        .parse()
                        .map_err(|_| Error::other(format!("{}:{}: bad face index", path.display(), ln + 1)))?;
                    if one_based < 1 {
                        return Err(Error::other(format!(
                            "{}:{}: non-positive face index",
                            path.display(),
                            ln + 1
                        )));
                    }
                    *x = (one_based - 1) as u32;
                }
                faces.push(idx);
            }
            _ => {}
        }
    }
    let mesh = TriMesh::new(vertices, faces)?;
    if !uv.is_empty() && uv.len() == mesh.vertices.len() {
        return mesh.with_uv(uv);
    }
    Ok(mesh)
}

fn parse_f64(tok: Option<&str>, path: &Path, ln: usize) -> Result<f64> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::other(format!("{}:{}: bad float", path.display(), ln + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::box_mesh;

    #[test]
    fn round_trip_exact() {
        let dir = std::env::temp_dir().join("obj_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cube.obj");
        let mesh = box_mesh(Vec3::new(0.1, -0.2, 0.05), Vec3::new(0.3, 0.25, 0.2));
        write_obj(&path, &mesh).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.faces, mesh.faces);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn round_trip_with_uv() {
        let dir = std::env::temp_dir().join("obj_rt_uv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("quad.obj");
        let mesh = TriMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
        .with_uv(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        .unwrap();
        write_obj(&path, &mesh).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.uv, mesh.uv);
    }
}
