//! Text output: legacy ASCII VTK and CSV.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::evolve::Trajectory;
use crate::fem::DiscreteField;
use crate::mesh::Mesh;
use crate::scalar::Real;

/// Legacy VTK unstructured grid with the named point scalars.
pub fn vtk_string<T: Real>(mesh: &Mesh<T>, scalars: &[(&str, &[T])]) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nquasilin\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", v[0], v[1]);
    }
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !scalars.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
        for (name, values) in scalars {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(s, "{v:.16e}");
            }
        }
    }
    s
}

pub fn write_vtk<T: Real, W: Write>(field: &DiscreteField<T>, mut w: W) -> Result<()> {
    w.write_all(vtk_string(&field.mesh, &[("u", &field.values)]).as_bytes())?;
    Ok(())
}

/// `x,y,u` rows, one per vertex.
pub fn field_csv<T: Real>(field: &DiscreteField<T>) -> String {
    let mut s = String::from("x,y,u\n");
    for (x, u) in field.mesh.vertices.iter().zip(&field.values) {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", x[0], x[1], u);
    }
    s
}

/// Wide table: one row per vertex, one column per stored time.
pub fn trajectory_csv<T: Real>(trajectory: &Trajectory<T>) -> String {
    let mut s = String::from("x,y");
    for t in &trajectory.times {
        let _ = write!(s, ",t={t:.16e}");
    }
    s.push('\n');
    let Some(first) = trajectory.fields.first() else {
        return s;
    };
    for (i, x) in first.mesh.vertices.iter().enumerate() {
        let _ = write!(s, "{:.16e},{:.16e}", x[0], x[1]);
        for f in &trajectory.fields {
            let _ = write!(s, ",{:.16e}", f.values[i]);
        }
        s.push('\n');
    }
    s
}
