//! CSV and legacy VTK exports, and design-field import.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{HdSample, IterationRecord};
use crate::error::{Error, Result};
use crate::fem::Trajectory;
use crate::mesh::Mesh;
use crate::sensitivity::ThicknessMap;

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const INITIAL_CURVE_FILE: &str = "hd_curve_initial.csv";
pub const FINAL_CURVE_FILE: &str = "hd_curve_final.csv";
pub const CURVE_FILE: &str = "hd_curve.csv";
pub const DESIGN_FILE: &str = "design.csv";
pub const DESIGN_VTK_FILE: &str = "design.vtk";
pub const DEFORMED_FILE: &str = "deformed_nodes.csv";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            detail: format!("{other:?}"),
        },
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ConvergenceRow {
    iter: usize,
    f0: f64,
    f0_over_finit: f64,
    volume_fraction: f64,
}

pub fn write_convergence(path: &Path, history: &[IterationRecord]) -> Result<()> {
    write_rows(
        path,
        history.iter().map(|h| ConvergenceRow {
            iter: h.iteration,
            f0: h.f0,
            f0_over_finit: h.f0_over_finit,
            volume_fraction: h.volume_fraction,
        }),
    )
}

#[derive(Serialize)]
struct CurveRow {
    step: usize,
    stretch_mm: f64,
    pore_id: usize,
    area_mm2: f64,
    perimeter_mm: f64,
    hd_mm: f64,
}

pub fn write_hd_curve(path: &Path, curve: &[HdSample]) -> Result<()> {
    write_rows(
        path,
        curve.iter().map(|s| CurveRow {
            step: s.step,
            stretch_mm: s.stretch,
            pore_id: s.pore,
            area_mm2: s.area,
            perimeter_mm: s.perimeter,
            hd_mm: s.hydraulic_diameter,
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub element_id: usize,
    pub zeta: f64,
    pub zeta_filtered: f64,
    pub thickness: f64,
}

pub fn design_rows(z: &[f64], z_phys: &[f64], map: &ThicknessMap) -> Vec<DesignRow> {
    z.iter()
        .zip(z_phys)
        .enumerate()
        .map(|(element_id, (&zeta, &zeta_filtered))| DesignRow {
            element_id,
            zeta,
            zeta_filtered,
            thickness: map.thickness(zeta_filtered),
        })
        .collect()
}

pub fn write_design(path: &Path, rows: &[DesignRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_design(path: &Path) -> Result<Vec<DesignRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let rows: Vec<DesignRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_error(path, e))?;
    for (i, row) in rows.iter().enumerate() {
        if row.element_id != i {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("row {i} has element_id {}", row.element_id),
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct NodeRow {
    node_id: usize,
    x_mm: f64,
    y_mm: f64,
    ux_mm: f64,
    uy_mm: f64,
}

pub fn write_deformed_nodes(path: &Path, mesh: &Mesh, u: &[f64]) -> Result<()> {
    write_rows(
        path,
        mesh.nodes.iter().enumerate().map(|(n, x)| NodeRow {
            node_id: n,
            x_mm: x.x + u[2 * n],
            y_mm: x.y + u[2 * n + 1],
            ux_mm: u[2 * n],
            uy_mm: u[2 * n + 1],
        }),
    )
}

#[derive(Serialize)]
struct StepRow {
    step: usize,
    load_factor: f64,
    newton_iterations: usize,
    cutbacks: u32,
    residual_norm: f64,
    max_sigma33: f64,
}

/// Debug dump of a trajectory: a step summary plus one nodal file per step.
pub fn write_state_dump(dir: &Path, mesh: &Mesh, trajectory: &Trajectory) -> Result<()> {
    ensure_dir(dir)?;
    write_rows(
        &dir.join("steps.csv"),
        trajectory.states.iter().enumerate().map(|(step, s)| StepRow {
            step,
            load_factor: s.load_factor,
            newton_iterations: s.newton_iterations,
            cutbacks: s.cutbacks,
            residual_norm: s.residual_norm,
            max_sigma33: s.max_sigma33,
        }),
    )?;
    for (step, s) in trajectory.states.iter().enumerate() {
        write_deformed_nodes(&dir.join(format!("step_{step:03}.csv")), mesh, &s.u)?;
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with one scalar per named cell field.
pub fn vtk_string(mesh: &Mesh, u: Option<&[f64]>, fields: &[(&str, &[f64])]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "thickness design");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_nodes());
    for (n, x) in mesh.nodes.iter().enumerate() {
        let (ux, uy) = u.map_or((0.0, 0.0), |u| (u[2 * n], u[2 * n + 1]));
        let _ = writeln!(s, "{} {} 0", x.x + ux, x.y + uy);
    }
    let ne = mesh.num_elements();
    let _ = writeln!(s, "CELLS {ne} {}", 5 * ne);
    for c in &mesh.elements {
        let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "9");
    }
    let _ = writeln!(s, "CELL_DATA {ne}");
    for (name, values) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{v}");
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, u: Option<&[f64]>, fields: &[(&str, &[f64])]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, vtk_string(mesh, u, fields)).map_err(|e| Error::io(path, e))
}

/// Cell count declared in a legacy VTK file.
pub fn vtk_cell_count(text: &str) -> Option<usize> {
    text.lines()
        .find_map(|l| l.strip_prefix("CELLS "))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|n| n.parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainSpec};

    fn mesh2() -> Mesh {
        build_mesh(&DomainSpec {
            length_x: 2.0,
            length_y: 2.0,
            nelx: 2,
            nely: 2,
            pores: vec![],
            stretch: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn design_csv_for_half_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out/design.csv");
        let rows = design_rows(&[0.5; 4], &[0.5; 4], &ThicknessMap::default());
        write_design(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "element_id,zeta,zeta_filtered,thickness");
        assert_eq!(lines[1], "0,0.5,0.5,1.25");
        assert_eq!(read_design(&path).unwrap(), rows);
    }

    #[test]
    fn vtk_round_trips_cell_count() {
        let m = mesh2();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.vtk");
        write_vtk(&path, &m, None, &[("thickness", &[1.0; 4])]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(vtk_cell_count(&text), Some(4));
        assert_eq!(text.lines().filter(|l| *l == "9").count(), 4);
    }

    #[test]
    fn convergence_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let rec = IterationRecord {
            iteration: 1,
            f0: 2.25,
            f0_over_finit: 1.0,
            volume_fraction: 0.55,
            constraint: -0.1,
            multiplier: 0.0,
            hydraulic_diameters: vec![0.5],
        };
        write_convergence(&path, &[rec]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "iter,f0,f0_over_finit,volume_fraction\n1,2.25,1.0,0.55\n");
    }

    #[test]
    fn bad_design_file_reports_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "element_id,zeta,zeta_filtered,thickness\n0,a,b,c\n").unwrap();
        match read_design(&path) {
            Err(Error::Parse { path: p, .. }) => assert_eq!(p, path),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_design(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
