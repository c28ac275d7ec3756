use std::io::Write;
use std::path::Path;

use super::table::write_file;
use crate::error::Result;
use crate::Field;

/// Legacy VTK structured points with one vector attribute `magnetization`.
pub fn write_vtk(field: &Field, out: &mut impl Write) -> std::io::Result<()> {
    let g = field.grid();
    let n = g.cells();
    let h = g.spacing();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "magnetization")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} {}", n[0], n[1], n[2])?;
    writeln!(
        out,
        "ORIGIN {:e} {:e} {:e}",
        0.5 * h[0],
        0.5 * h[1],
        0.5 * h[2]
    )?;
    writeln!(out, "SPACING {:e} {:e} {:e}", h[0], h[1], h[2])?;
    writeln!(out, "POINT_DATA {}", g.n_cells())?;
    writeln!(out, "VECTORS magnetization double")?;
    for (i, j, k) in g.interior() {
        let m = field.get(i, j, k);
        writeln!(out, "{:e} {:e} {:e}", m[0], m[1], m[2])?;
    }
    Ok(())
}

/// One line per cell with header `i,j,k,x,y,z,u,v,w`; indices are 1-based.
pub fn write_field_csv(field: &Field, out: &mut impl Write) -> std::io::Result<()> {
    let g = field.grid();
    writeln!(out, "i,j,k,x,y,z,u,v,w")?;
    for (i, j, k) in g.interior() {
        let x = g.center(i, j, k);
        let m = field.get(i, j, k);
        writeln!(
            out,
            "{i},{j},{k},{:e},{:e},{:e},{:e},{:e},{:e}",
            x[0], x[1], x[2], m[0], m[1], m[2]
        )?;
    }
    Ok(())
}

/// Writes CSV for a `.csv` path and VTK otherwise.
pub fn export_field(field: &Field, path: &Path) -> Result<()> {
    let csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    write_file(path, |w| {
        if csv {
            write_field_csv(field, w)
        } else {
            write_vtk(field, w)
        }
    })
}
