//! Legacy ASCII VTK output.

use std::io::{self, Write};

use super::SolutionField;
use crate::mesh::{FacetKind, Mesh};

fn cell_type(nv: usize) -> u8 {
    match nv {
        2 => 3,
        3 => 5,
        _ => 10,
    }
}

fn header(out: &mut impl Write, title: &str) -> io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")
}

fn write_cells(out: &mut impl Write, cells: &[Vec<usize>]) -> io::Result<()> {
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    writeln!(out, "CELLS {} {size}", cells.len())?;
    for c in cells {
        write!(out, "{}", c.len())?;
        for v in c {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for c in cells {
        writeln!(out, "{}", cell_type(c.len()))?;
    }
    Ok(())
}

fn write_int_data(out: &mut impl Write, name: &str, values: impl Iterator<Item = i32>) -> io::Result<()> {
    writeln!(out, "SCALARS {name} int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// One point per dof, so values on the two sides of a barrier stay separate.
/// Point data `pressure`, cell data `region`.
pub fn write_solution_vtk(field: &SolutionField, out: &mut impl Write) -> io::Result<()> {
    let mesh = field.mesh();
    let values = field.values();
    let mut positions = vec![[0.0; 3]; values.len()];
    let cells: Vec<Vec<usize>> = (0..mesh.num_cells())
        .map(|c| {
            let dofs = field.cell_dofs(c);
            for (k, &d) in dofs.iter().enumerate() {
                positions[d] = *mesh.vertex(mesh.cell(c)[k]);
            }
            dofs.to_vec()
        })
        .collect();
    header(out, "boxdfm pressure")?;
    writeln!(out, "POINTS {} double", positions.len())?;
    for p in &positions {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    write_cells(out, &cells)?;
    writeln!(out, "CELL_DATA {}", cells.len())?;
    write_int_data(out, "region", mesh.cell_regions().iter().copied())?;
    writeln!(out, "POINT_DATA {}", positions.len())?;
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Interior fracture and barrier facets as a lower-dimensional grid with cell
/// data `tag` and `kind` (0 fracture, 1 barrier).
pub fn write_feature_vtk(mesh: &Mesh, out: &mut impl Write) -> io::Result<()> {
    let facets: Vec<(usize, i32, FacetKind)> = mesh
        .tagged_facets()
        .filter_map(|(f, t)| mesh.facet_kind(f).map(|k| (f, t, k)))
        .filter(|(_, _, k)| !k.is_boundary())
        .collect();
    let mut index = vec![usize::MAX; mesh.num_vertices()];
    let mut points = Vec::new();
    let cells: Vec<Vec<usize>> = facets
        .iter()
        .map(|&(f, _, _)| {
            mesh.facet(f)
                .iter()
                .map(|&v| {
                    if index[v] == usize::MAX {
                        index[v] = points.len();
                        points.push(*mesh.vertex(v));
                    }
                    index[v]
                })
                .collect()
        })
        .collect();
    header(out, "boxdfm features")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for p in &points {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    write_cells(out, &cells)?;
    writeln!(out, "CELL_DATA {}", cells.len())?;
    write_int_data(out, "tag", facets.iter().map(|f| f.1))?;
    write_int_data(out, "kind", facets.iter().map(|f| i32::from(f.2 == FacetKind::Barrier)))
}
