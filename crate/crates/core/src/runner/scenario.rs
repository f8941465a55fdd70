//! Declarative scenario description, loaded from JSON.
//!
//! ```json
//! {
//!   "name": "single_barrier",
//!   "mesh": { "file": "meshes/ex52_vertical.msh" },
//!   "tags": { "1": "dirichlet", "2": "dirichlet", "3": "neumann", "4": "neumann", "10": "barrier" },
//!   "materials": {
//!     "default": 1.0,
//!     "barriers": { "10": { "aperture": 1e-3, "normal_permeability": 1e-8 } }
//!   },
//!   "dirichlet": { "1": "0", "2": "1" },
//!   "neumann": { "3": "0", "4": "0" },
//!   "outputs": { "slices": [ { "name": "h", "from": [0, 0.75], "to": [1, 0.75] } ] }
//! }
//! ```
//!
//! Expressions are either one string or a map from cell region to string.
//! Relative mesh paths are resolved against the scenario file's directory
//! first and the shipped data directory second.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::RunError;
use crate::assembly::{isotropic, BarrierProps, BoundaryConditions, Field, FractureProps, MaterialModel, Tensor};
use crate::dofspace::IntersectionPolicy;
use crate::linalg::Preconditioner;
use crate::mesh::{load_mesh, uniform_refine, FacetKind, Mesh, StructuredGrid, TagMap};

/// Directory holding the shipped meshes and network files.
///
/// `BOXDFM_DATA` overrides the compiled-in location.
pub fn data_dir() -> PathBuf {
    std::env::var_os("BOXDFM_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    File(PathBuf),
    Grid(StructuredGrid),
}

/// A single expression or one expression per cell region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawRegionExpr")]
pub enum RegionExpr {
    Single(String),
    PerRegion(BTreeMap<i32, String>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawRegionExpr {
    Single(String),
    PerRegion(BTreeMap<String, String>),
}

impl TryFrom<RawRegionExpr> for RegionExpr {
    type Error = String;

    fn try_from(raw: RawRegionExpr) -> Result<Self, String> {
        match raw {
            RawRegionExpr::Single(s) => Ok(RegionExpr::Single(s)),
            RawRegionExpr::PerRegion(map) => map
                .into_iter()
                .map(|(k, v)| k.parse().map(|r| (r, v)).map_err(|_| format!("region key {k:?} is not an integer")))
                .collect::<Result<_, _>>()
                .map(RegionExpr::PerRegion),
        }
    }
}

impl From<&str> for RegionExpr {
    fn from(s: &str) -> Self {
        RegionExpr::Single(s.to_string())
    }
}

impl RegionExpr {
    pub fn per_region<'a>(items: impl IntoIterator<Item = (i32, &'a str)>) -> Self {
        RegionExpr::PerRegion(items.into_iter().map(|(r, s)| (r, s.to_string())).collect())
    }

    /// Parses the expressions into a field; regions without an expression evaluate to NaN.
    pub fn compile(&self) -> Result<Field, RunError> {
        match self {
            RegionExpr::Single(s) => {
                let e = Expr::parse(s)?;
                Ok(Arc::new(move |p, _| e.eval(p)))
            }
            RegionExpr::PerRegion(map) => {
                let parsed = map
                    .iter()
                    .map(|(r, s)| Ok((*r, Expr::parse(s)?)))
                    .collect::<Result<BTreeMap<i32, Expr>, RunError>>()?;
                Ok(Arc::new(move |p, r| parsed.get(&r).map_or(f64::NAN, |e| e.eval(p))))
            }
        }
    }

    /// Regions of `regions` that have no expression.
    pub fn missing_regions(&self, regions: &BTreeSet<i32>) -> Vec<i32> {
        match self {
            RegionExpr::Single(_) => Vec::new(),
            RegionExpr::PerRegion(map) => regions.iter().filter(|r| !map.contains_key(r)).copied().collect(),
        }
    }
}

/// Isotropic scalar or full tensor given as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Permeability {
    Scalar(f64),
    Tensor(Vec<Vec<f64>>),
}

impl Permeability {
    pub fn tensor(&self, dim: usize) -> Result<Tensor, RunError> {
        match self {
            Permeability::Scalar(k) => Ok(isotropic(*k)),
            Permeability::Tensor(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(RunError::Validation(format!("permeability tensor must be {dim}x{dim}")));
                }
                let mut t = [[0.0; 3]; 3];
                for (i, r) in rows.iter().enumerate() {
                    t[i][..dim].copy_from_slice(r);
                }
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Materials {
    /// Matrix permeability per cell region.
    #[serde(default)]
    pub matrix: BTreeMap<i32, Permeability>,
    /// Matrix permeability for regions not listed in `matrix`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Permeability>,
    #[serde(default)]
    pub fractures: BTreeMap<i32, FractureProps>,
    #[serde(default)]
    pub barriers: BTreeMap<i32, BarrierProps>,
}

impl Materials {
    pub fn model(&self, dim: usize) -> Result<MaterialModel, RunError> {
        Ok(MaterialModel {
            regions: self.matrix.iter().map(|(r, k)| Ok((*r, k.tensor(dim)?))).collect::<Result<_, RunError>>()?,
            default_region: self.default.as_ref().map(|k| k.tensor(dim)).transpose()?,
            fractures: self.fractures.clone(),
            barriers: self.barriers.clone(),
        })
    }
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative residual target `|b - A x| / |b|`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to `10 n + 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default = "default_preconditioner")]
    pub preconditioner: Preconditioner,
    /// Assemble cell contributions in parallel.
    #[serde(default)]
    pub parallel: bool,
}

fn default_preconditioner() -> Preconditioner {
    Preconditioner::Ic0
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: default_tol(), max_iter: None, preconditioner: default_preconditioner(), parallel: false }
    }
}

fn default_samples() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub name: String,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl SliceSpec {
    pub fn new(name: &str, from: &[f64], to: &[f64]) -> Self {
        SliceSpec { name: name.to_string(), from: from.to_vec(), to: to.to_vec(), samples: default_samples() }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub vtk: bool,
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
    /// Also write the assembled matrix and right-hand side in Matrix Market format.
    #[serde(default)]
    pub matrix_market: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { vtk: true, slices: Vec::new(), matrix_market: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub mesh: MeshSource,
    /// Uniform refinements applied after loading.
    #[serde(default)]
    pub refine: usize,
    pub tags: TagMap,
    pub materials: Materials,
    #[serde(default)]
    pub dirichlet: BTreeMap<i32, RegionExpr>,
    /// Outflow flux `-(K grad p) . n`; untagged boundary facets are no-flow.
    #[serde(default)]
    pub neumann: BTreeMap<i32, RegionExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<RegionExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<RegionExpr>,
    #[serde(default)]
    pub policy: IntersectionPolicy,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub outputs: Outputs,
    /// Allow a system without Dirichlet data; one dof is then fixed to zero.
    #[serde(default)]
    pub pure_neumann: bool,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Scenario, RunError> {
        let mut s: Scenario = serde_json::from_str(text)?;
        s.base_dir = base_dir.map(Path::to_path_buf);
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Scenario, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::MissingData { path: path.to_path_buf(), msg: e.to_string() })?;
        Scenario::from_json(&text, path.parent())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Mesh file location, or `None` for generated meshes.
    pub fn mesh_path(&self) -> Option<PathBuf> {
        let MeshSource::File(p) = &self.mesh else { return None };
        if p.is_absolute() {
            return Some(p.clone());
        }
        if let Some(base) = &self.base_dir {
            let candidate = base.join(p);
            if candidate.exists() {
                return Some(candidate);
            }
        }
        Some(data_dir().join(p))
    }

    /// Fails with [`RunError::MissingData`] when the mesh file is absent.
    pub fn check_available(&self) -> Result<(), RunError> {
        match self.mesh_path() {
            Some(p) if !p.exists() => {
                Err(RunError::MissingData { path: p, msg: "mesh file not found".into() })
            }
            _ => Ok(()),
        }
    }

    /// Loads or generates the mesh, applies the tag map and refines.
    pub fn build_mesh(&self) -> Result<Mesh, RunError> {
        self.check_available()?;
        let mut mesh = match &self.mesh {
            MeshSource::File(_) => load_mesh(self.mesh_path().expect("file source"), &self.tags)?,
            MeshSource::Grid(g) => g.build()?.with_tag_map(&self.tags)?,
        };
        for _ in 0..self.refine {
            mesh = uniform_refine(&mesh);
        }
        Ok(mesh)
    }

    /// Checks that every facet tag and cell region present in `mesh` has data.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), RunError> {
        let err = |m: String| Err(RunError::Validation(format!("scenario {}: {m}", self.name)));
        let mut tags = BTreeSet::new();
        for (_, t) in mesh.tagged_facets() {
            tags.insert(t);
        }
        for t in tags {
            let Some(kind) = self.tags.get(&t) else { return err(format!("facet tag {t} is not in the tag map")) };
            let ok = match kind {
                FacetKind::Fracture => self.materials.fractures.contains_key(&t),
                FacetKind::Barrier => self.materials.barriers.contains_key(&t),
                FacetKind::BoundaryDirichlet => self.dirichlet.contains_key(&t),
                FacetKind::BoundaryNeumann => self.neumann.contains_key(&t),
            };
            if !ok {
                let what = match kind {
                    FacetKind::Fracture => "fracture material",
                    FacetKind::Barrier => "barrier material",
                    FacetKind::BoundaryDirichlet => "Dirichlet value",
                    FacetKind::BoundaryNeumann => "Neumann value",
                };
                return err(format!("facet tag {t} has no {what}"));
            }
        }
        let regions: BTreeSet<i32> = mesh.cell_regions().iter().copied().collect();
        if self.materials.default.is_none() {
            if let Some(r) = regions.iter().find(|r| !self.materials.matrix.contains_key(r)) {
                return err(format!("cell region {r} has no matrix permeability"));
            }
        }
        let named = self.dirichlet.iter().map(|(t, e)| (format!("Dirichlet value {t}"), e));
        let named = named.chain(self.neumann.iter().map(|(t, e)| (format!("Neumann value {t}"), e)));
        let named = named.chain(self.source.iter().map(|e| ("source".to_string(), e)));
        let named = named.chain(self.exact.iter().map(|e| ("exact solution".to_string(), e)));
        for (what, e) in named {
            e.compile()?;
            if let Some(r) = e.missing_regions(&regions).first() {
                return err(format!("{what} has no expression for cell region {r}"));
            }
        }
        let has_dirichlet = mesh.facets_of_kind(FacetKind::BoundaryDirichlet).next().is_some();
        if !has_dirichlet && !self.pure_neumann {
            return err("no Dirichlet boundary; set \"pure_neumann\": true to fix one dof instead".into());
        }
        if !(self.solver.tol > 0.0) {
            return err("solver tolerance must be positive".into());
        }
        for s in &self.outputs.slices {
            if s.from.len() != mesh.dim() || s.to.len() != mesh.dim() || s.samples < 2 {
                return err(format!("slice {} needs {}-component endpoints and at least 2 samples", s.name, mesh.dim()));
            }
        }
        Ok(())
    }

    pub fn boundary_conditions(&self) -> Result<BoundaryConditions, RunError> {
        Ok(BoundaryConditions {
            dirichlet: self.dirichlet.iter().map(|(t, e)| Ok((*t, e.compile()?))).collect::<Result<_, RunError>>()?,
            neumann: self.neumann.iter().map(|(t, e)| Ok((*t, e.compile()?))).collect::<Result<_, RunError>>()?,
            fixed_dofs: Vec::new(),
        })
    }

    /// Barriers whose tangential permeability exceeds the largest matrix permeability.
    pub fn warnings(&self, mesh: &Mesh) -> Vec<String> {
        let mut out = Vec::new();
        let kmax = self
            .materials
            .model(mesh.dim())
            .map(|m| m.max_matrix_permeability(mesh.dim()))
            .unwrap_or(f64::INFINITY);
        for (tag, b) in &self.materials.barriers {
            if let Some(kt) = b.tangential_permeability.filter(|&kt| kt > kmax) {
                out.push(format!(
                    "barrier {tag}: tangential permeability {kt:e} exceeds the matrix permeability {kmax:e}; \
                     tangential flow along barriers is not represented"
                ));
            }
        }
        let zero_kb = self.materials.barriers.values().any(|b| b.normal_permeability == 0.0);
        let enclosed = crate::dofspace::enclosed_compartments(mesh);
        if zero_kb && enclosed > 0 {
            out.push(format!("{enclosed} compartment(s) are enclosed by barriers with zero normal permeability"));
        }
        if self.pure_neumann {
            out.push("pure Neumann problem: dof 0 is fixed to zero".into());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JSON: &str = r#"{
        "name": "t",
        "mesh": { "grid": { "min": [0, 0], "max": [1, 1], "n": [4, 4], "pattern": "diagonal",
                            "features": [ { "tag": 10, "segment": [[0.5, 0], [0.5, 1]] } ],
                            "boundary": [ { "tag": 1, "min": [0, 0], "max": [0, 1] },
                                          { "tag": 2, "min": [1, 0], "max": [1, 1] } ] } },
        "tags": { "1": "dirichlet", "2": "dirichlet", "10": "barrier" },
        "materials": { "default": 1.0, "barriers": { "10": { "aperture": 1, "normal_permeability": 1 } } },
        "dirichlet": { "1": "0", "2": { "1": "1" } }
    }"#;

    #[test]
    fn parses_and_validates() {
        let s = Scenario::from_json(JSON, None).unwrap();
        assert_eq!(s.policy, IntersectionPolicy::FracturePenetrates);
        assert_eq!(s.solver.preconditioner, Preconditioner::Ic0);
        let mesh = s.build_mesh().unwrap();
        s.validate(&mesh).unwrap();
        let back = Scenario::from_json(&s.to_json(), None).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_catches_missing_data() {
        let mut s = Scenario::from_json(JSON, None).unwrap();
        let mesh = s.build_mesh().unwrap();
        s.materials.barriers.clear();
        let e = s.validate(&mesh).unwrap_err().to_string();
        assert!(e.contains("barrier material"), "{e}");

        let mut s = Scenario::from_json(JSON, None).unwrap();
        s.dirichlet.insert(2, RegionExpr::per_region([(2, "1")]));
        let e = s.validate(&mesh).unwrap_err().to_string();
        assert!(e.contains("cell region 1"), "{e}");

        let mut s = Scenario::from_json(JSON, None).unwrap();
        s.tags.insert(1, FacetKind::BoundaryNeumann);
        s.tags.insert(2, FacetKind::BoundaryNeumann);
        s.neumann.insert(1, "0".into());
        s.neumann.insert(2, "0".into());
        let mesh = s.build_mesh().unwrap();
        assert!(s.validate(&mesh).unwrap_err().to_string().contains("pure_neumann"));
        s.pure_neumann = true;
        s.validate(&mesh).unwrap();
    }

    #[test]
    fn unknown_fields_and_bad_expressions_are_rejected() {
        assert!(Scenario::from_json(&JSON.replace("\"tags\"", "\"tagz\""), None).is_err());
        let s = Scenario::from_json(&JSON.replace("\"0\"", "\"1 +\""), None).unwrap();
        let mesh = s.build_mesh().unwrap();
        assert!(matches!(s.validate(&mesh), Err(RunError::Expr(_))));
    }

    #[test]
    fn missing_mesh_file_is_missing_data() {
        let mut s = Scenario::from_json(JSON, None).unwrap();
        s.mesh = MeshSource::File("meshes/does_not_exist.msh".into());
        assert!(matches!(s.build_mesh(), Err(RunError::MissingData { .. })));
    }
}
