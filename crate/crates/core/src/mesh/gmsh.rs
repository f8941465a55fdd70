//! Gmsh MSH ASCII reader (format 4.1, with 2.2 as fallback).
//!
//! Supported element types are 2-node lines, 3-node triangles and 4-node
//! tetrahedra. Point elements are skipped. The mesh dimension is 3 when any
//! tetrahedron is present, otherwise 2; elements of dimension `dim - 1`
//! become tagged facets and elements of dimension `dim` become cells.
//! Tags are physical group tags when the entity has one, otherwise the
//! elementary entity tag.

use std::collections::HashMap;

use super::{Mesh, MeshError, TaggedFacet};
use crate::geometry::Point;

struct Lines<'a> {
    file: &'a str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, file: &'a str) -> Self {
        Lines { file, inner: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> MeshError {
        MeshError::Parse { file: self.file.to_string(), line: self.line, msg: msg.into() }
    }

    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self) -> Result<&'a str, MeshError> {
        self.next().ok_or_else(|| self.err("unexpected end of file"))
    }

    fn numbers<T: std::str::FromStr>(&mut self, min: usize) -> Result<Vec<T>, MeshError> {
        let line = self.expect()?;
        let vals: Result<Vec<T>, _> = line.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| self.err(format!("malformed numbers: {line:?}")))?;
        if vals.len() < min {
            return Err(self.err(format!("expected at least {min} values, got {line:?}")));
        }
        Ok(vals)
    }

    fn skip_section(&mut self, name: &str) -> Result<(), MeshError> {
        let end = format!("$End{name}");
        loop {
            if self.expect()? == end {
                return Ok(());
            }
        }
    }

    fn end(&mut self, name: &str) -> Result<(), MeshError> {
        let line = self.expect()?;
        if line != format!("$End{name}") {
            return Err(self.err(format!("expected $End{name}, got {line:?}")));
        }
        Ok(())
    }
}

#[derive(Default)]
struct Raw {
    nodes: HashMap<u64, Point>,
    /// (element dimension, tag, node ids)
    elements: Vec<(usize, i32, Vec<u64>)>,
}

fn element_dim(ty: i64) -> Result<Option<(usize, usize)>, MeshError> {
    match ty {
        1 => Ok(Some((1, 2))),
        2 => Ok(Some((2, 3))),
        4 => Ok(Some((3, 4))),
        15 => Ok(None),
        other => Err(MeshError::UnsupportedElement(other)),
    }
}

fn parse_v41(lines: &mut Lines<'_>, raw: &mut Raw) -> Result<(), MeshError> {
    // (entity dim, entity tag) -> physical tag
    let mut physical: HashMap<(usize, i32), i32> = HashMap::new();
    while let Some(header) = lines.next() {
        match header {
            "$Entities" => {
                let counts: Vec<usize> = lines.numbers(4)?;
                for _ in 0..counts[0] {
                    lines.expect()?;
                }
                for dim in 1..=3 {
                    for _ in 0..counts[dim] {
                        let v: Vec<f64> = lines.numbers(8)?;
                        let tag = v[0] as i32;
                        let nphys = v[7] as usize;
                        if nphys > 0 {
                            let p = *v.get(8).ok_or_else(|| lines.err("missing physical tag"))?;
                            physical.insert((dim, tag), p as i32);
                        }
                    }
                }
                lines.end("Entities")?;
            }
            "$Nodes" => {
                let head: Vec<u64> = lines.numbers(4)?;
                for _ in 0..head[0] {
                    let b: Vec<i64> = lines.numbers(4)?;
                    let parametric = b[2] != 0;
                    let n = b[3] as usize;
                    let mut tags = Vec::with_capacity(n);
                    for _ in 0..n {
                        tags.push(lines.numbers::<u64>(1)?[0]);
                    }
                    for t in tags {
                        let c: Vec<f64> = lines.numbers(3)?;
                        if !parametric && c.len() != 3 {
                            return Err(lines.err("node coordinates must have 3 values"));
                        }
                        raw.nodes.insert(t, [c[0], c[1], c[2]]);
                    }
                }
                lines.end("Nodes")?;
            }
            "$Elements" => {
                let head: Vec<u64> = lines.numbers(4)?;
                for _ in 0..head[0] {
                    let b: Vec<i64> = lines.numbers(4)?;
                    let (edim, etag, ety, n) = (b[0] as usize, b[1] as i32, b[2], b[3] as usize);
                    let kind = element_dim(ety)?;
                    let tag = physical.get(&(edim, etag)).copied().unwrap_or(etag);
                    for _ in 0..n {
                        let v: Vec<u64> = lines.numbers(1)?;
                        if let Some((d, nn)) = kind {
                            if v.len() != nn + 1 {
                                return Err(lines.err(format!("element type {ety} needs {nn} nodes")));
                            }
                            raw.elements.push((d, tag, v[1..].to_vec()));
                        }
                    }
                }
                lines.end("Elements")?;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let name = s[1..].to_string();
                lines.skip_section(&name)?;
            }
            other => return Err(lines.err(format!("unexpected line {other:?}"))),
        }
    }
    Ok(())
}

fn parse_v22(lines: &mut Lines<'_>, raw: &mut Raw) -> Result<(), MeshError> {
    while let Some(header) = lines.next() {
        match header {
            "$Nodes" => {
                let n = lines.numbers::<usize>(1)?[0];
                for _ in 0..n {
                    let v: Vec<f64> = lines.numbers(4)?;
                    raw.nodes.insert(v[0] as u64, [v[1], v[2], v[3]]);
                }
                lines.end("Nodes")?;
            }
            "$Elements" => {
                let n = lines.numbers::<usize>(1)?[0];
                for _ in 0..n {
                    let v: Vec<i64> = lines.numbers(3)?;
                    let ety = v[1];
                    let ntags = v[2] as usize;
                    let Some((d, nn)) = element_dim(ety)? else { continue };
                    if v.len() != 3 + ntags + nn {
                        return Err(lines.err(format!("element type {ety} needs {nn} nodes")));
                    }
                    let tag = if ntags > 0 { v[3] as i32 } else { 0 };
                    let nodes = v[3 + ntags..].iter().map(|&x| x as u64).collect();
                    raw.elements.push((d, tag, nodes));
                }
                lines.end("Elements")?;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let name = s[1..].to_string();
                lines.skip_section(&name)?;
            }
            other => return Err(lines.err(format!("unexpected line {other:?}"))),
        }
    }
    Ok(())
}

/// Parses MSH text into an untyped mesh (facet kinds unresolved).
pub fn parse_msh(text: &str, file: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text, file);
    if lines.next() != Some("$MeshFormat") {
        return Err(lines.err("missing $MeshFormat"));
    }
    let fmt = lines.expect()?;
    let mut parts = fmt.split_whitespace();
    let version = parts.next().unwrap_or("");
    if parts.next() != Some("0") {
        return Err(lines.err("only ASCII MSH files are supported"));
    }
    lines.end("MeshFormat")?;
    let mut raw = Raw::default();
    match version {
        "4.1" => parse_v41(&mut lines, &mut raw)?,
        v if v.starts_with("2.") => parse_v22(&mut lines, &mut raw)?,
        v => return Err(lines.err(format!("unsupported MSH version {v}"))),
    }

    let dim = if raw.elements.iter().any(|e| e.0 == 3) { 3 } else { 2 };
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut ids: Vec<u64> = raw
        .elements
        .iter()
        .filter(|e| e.0 == dim)
        .flat_map(|e| e.2.iter().copied())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let mut vertices = Vec::with_capacity(ids.len());
    for id in ids {
        let p = raw
            .nodes
            .get(&id)
            .ok_or_else(|| MeshError::Validation(format!("element references unknown node {id}")))?;
        index.insert(id, vertices.len());
        vertices.push(*p);
    }
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    let mut tagged = Vec::new();
    for (d, tag, nodes) in &raw.elements {
        if *d == dim {
            cells.extend(nodes.iter().map(|n| index[n]));
            regions.push(*tag);
        } else if *d == dim - 1 {
            let vs: Result<Vec<usize>, _> = nodes
                .iter()
                .map(|n| {
                    index
                        .get(n)
                        .copied()
                        .ok_or_else(|| MeshError::Validation(format!("tagged facet node {n} is not a cell vertex")))
                })
                .collect();
            tagged.push(TaggedFacet { vertices: vs?, tag: *tag });
        }
    }
    Mesh::new(dim, vertices, cells, regions, &tagged)
}
