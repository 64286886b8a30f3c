use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{FieldSnapshot, ScatterPoint, SliceProfile};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn g(v: f64) -> String {
    format!("{v:.16e}")
}

/// Legacy ASCII VTK unstructured grid with cell data.
pub fn write_vtk(snap: &FieldSnapshot, title: &str, path: &Path) -> Result<()> {
    let mesh = &snap.mesh;
    let nc = mesh.num_cells();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 2.0\n");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", g(p[0]), g(p[1]));
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in mesh.cells() {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    s.push_str("VECTORS velocity double\n");
    for u in &snap.velocity {
        let _ = writeln!(s, "{} {} 0", g(u[0]), g(u[1]));
    }
    for (name, data) in [
        ("pressure", &snap.pressure),
        ("vorticity", &snap.vorticity),
        ("speed", &snap.speed),
        ("stress_norm", &snap.stress_norm),
        ("strain_norm", &snap.strain_norm),
        ("raw_strain_norm", &snap.raw_strain_norm),
    ] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in data.iter() {
            s.push_str(&g(*v));
            s.push('\n');
        }
    }
    write_atomic(path, &s)
}

pub const SCATTER_HEADER: &str = "cell,s_norm,d_lifted_norm,d_raw_norm";
pub const SLICE_HEADER: &str = "x,y,present,speed,vorticity";

pub fn write_scatter_csv(points: &[ScatterPoint], path: &Path) -> Result<()> {
    let mut s = String::from(SCATTER_HEADER);
    s.push('\n');
    for q in points {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            q.cell,
            g(q.s_norm),
            g(q.d_lifted),
            g(q.d_raw)
        );
    }
    write_atomic(path, &s)
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<ScatterPoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SCATTER_HEADER => {}
        _ => {
            return Err(Error::Config {
                line: 1,
                message: format!("expected header `{SCATTER_HEADER}`"),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |m: &str| Error::Config {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(&format!("bad number `{s}`")))
            };
            Ok(ScatterPoint {
                cell: f[0].parse().map_err(|_| bad("bad cell index"))?,
                s_norm: num(f[1])?,
                d_lifted: num(f[2])?,
                d_raw: num(f[3])?,
            })
        })
        .collect()
}

/// Absent samples have `present = 0` and empty value columns.
pub fn write_slices_csv(profiles: &[SliceProfile], path: &Path) -> Result<()> {
    let mut s = String::from(SLICE_HEADER);
    s.push('\n');
    for p in profiles {
        for q in &p.samples {
            match q.value {
                Some((sp, w)) => {
                    let _ = writeln!(s, "{},{},1,{},{}", g(p.x), g(q.y), g(sp), g(w));
                }
                None => {
                    let _ = writeln!(s, "{},{},0,,", g(p.x), g(q.y));
                }
            }
        }
    }
    write_atomic(path, &s)
}
