use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

use super::Mesh2D;

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub(super) struct MeshFile {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<(usize, usize, String)>,
    #[serde(default)]
    tracked_points: BTreeMap<String, usize>,
}

impl TryFrom<MeshFile> for Mesh2D {
    type Error = Error;

    fn try_from(f: MeshFile) -> Result<Self> {
        Mesh2D::new(f.vertices, f.triangles, f.boundary_edges, f.tracked_points)
    }
}

impl From<Mesh2D> for MeshFile {
    fn from(m: Mesh2D) -> Self {
        MeshFile {
            boundary_edges: m
                .boundary_edges
                .iter()
                .map(|e| (e.v[0], e.v[1], m.tags[e.tag].clone()))
                .collect(),
            vertices: m.vertices,
            triangles: m.triangles,
            tracked_points: m.tracked_points,
        }
    }
}

/// JSON formatter writing every float with 17 significant digits.
struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Serializes `value` as compact JSON with round-trip exact floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// Writes `value` to `path` as JSON, through a temporary file so readers
/// never see a partial document.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_atomic(path.as_ref(), to_json_string(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes `bytes` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    read_json(path)
}

pub fn save_mesh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<()> {
    write_json(path, mesh)
}

/// A named per-vertex field for VTK export.
pub enum NodalField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [Vec2]),
}

/// Writes a VTK legacy ASCII unstructured grid. `positions` overrides the
/// mesh vertices when given (e.g. a morphed configuration).
pub fn export_vtk(
    mesh: &Mesh2D,
    positions: Option<&[Vec2]>,
    fields: &[NodalField<'_>],
    path: impl AsRef<Path>,
) -> Result<()> {
    let x = positions.unwrap_or(mesh.vertices());
    let n = mesh.n_vertices();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nmorphrom mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in x {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p.x, p.y);
    }
    let nt = mesh.triangles().len();
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
    }
    for f in fields {
        match f {
            NodalField::Scalar(name, v) => {
                check_len(name, v.len(), n)?;
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for a in v.iter() {
                    let _ = writeln!(s, "{a:.16e}");
                }
            }
            NodalField::Vector(name, v) => {
                check_len(name, v.len(), n)?;
                let _ = writeln!(s, "VECTORS {name} double");
                for a in v.iter() {
                    let _ = writeln!(s, "{:.16e} {:.16e} 0", a.x, a.y);
                }
            }
        }
    }
    write_atomic(path.as_ref(), s.as_bytes())
}

fn check_len(name: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::Dimension(format!("field {name} has {got} values for {n} vertices")));
    }
    Ok(())
}
