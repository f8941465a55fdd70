use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::AssemblyError;

/// Symmetric permeability tensor; 2D problems use the upper-left block.
pub type Tensor = [[f64; 3]; 3];

pub fn isotropic(k: f64) -> Tensor {
    [[k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, k]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractureProps {
    pub aperture: f64,
    pub permeability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierProps {
    pub aperture: f64,
    pub normal_permeability: f64,
    /// Accepted for reporting only; tangential flow along barriers is not modelled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangential_permeability: Option<f64>,
}

impl BarrierProps {
    /// Transfer coefficient `k_b / a`.
    pub fn beta(&self) -> f64 {
        self.normal_permeability / self.aperture
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialModel {
    pub regions: BTreeMap<i32, Tensor>,
    pub default_region: Option<Tensor>,
    pub fractures: BTreeMap<i32, FractureProps>,
    pub barriers: BTreeMap<i32, BarrierProps>,
}

impl MaterialModel {
    pub fn uniform(k: f64) -> Self {
        MaterialModel { default_region: Some(isotropic(k)), ..Default::default() }
    }

    pub fn region(&self, tag: i32) -> Result<&Tensor, AssemblyError> {
        self.regions
            .get(&tag)
            .or(self.default_region.as_ref())
            .ok_or(AssemblyError::MissingMaterial { what: "cell region", tag })
    }

    pub fn fracture(&self, tag: i32) -> Result<&FractureProps, AssemblyError> {
        self.fractures.get(&tag).ok_or(AssemblyError::MissingMaterial { what: "fracture", tag })
    }

    pub fn barrier(&self, tag: i32) -> Result<&BarrierProps, AssemblyError> {
        self.barriers.get(&tag).ok_or(AssemblyError::MissingMaterial { what: "barrier", tag })
    }

    /// Checks symmetry and positive definiteness of every tensor and the sign constraints on features.
    pub fn validate(&self, dim: usize) -> Result<(), AssemblyError> {
        let tensors = self.regions.iter().map(|(t, k)| (Some(*t), k)).chain(self.default_region.iter().map(|k| (None, k)));
        for (tag, k) in tensors {
            let name = tag.map_or("default".to_string(), |t| t.to_string());
            if !is_spd(k, dim) {
                return Err(AssemblyError::InvalidMaterial(format!(
                    "permeability of region {name} is not symmetric positive definite"
                )));
            }
        }
        for (tag, f) in &self.fractures {
            if !(f.aperture > 0.0) || !(f.permeability > 0.0) {
                return Err(AssemblyError::InvalidMaterial(format!(
                    "fracture {tag}: aperture and permeability must be positive"
                )));
            }
        }
        for (tag, b) in &self.barriers {
            if !(b.aperture > 0.0) || !(b.normal_permeability >= 0.0) || !b.normal_permeability.is_finite() {
                return Err(AssemblyError::InvalidMaterial(format!(
                    "barrier {tag}: aperture must be positive and normal permeability non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Largest matrix permeability (spectral norm over all regions).
    pub fn max_matrix_permeability(&self, dim: usize) -> f64 {
        self.regions
            .values()
            .chain(self.default_region.iter())
            .map(|k| eigenvalues(k, dim).into_iter().fold(0.0f64, |m, e| m.max(e.abs())))
            .fold(0.0, f64::max)
    }
}

fn eigenvalues(k: &Tensor, dim: usize) -> Vec<f64> {
    if dim == 2 {
        Matrix2::new(k[0][0], k[0][1], k[1][0], k[1][1]).symmetric_eigenvalues().iter().copied().collect()
    } else {
        Matrix3::from_fn(|i, j| k[i][j]).symmetric_eigenvalues().iter().copied().collect()
    }
}

fn is_spd(k: &Tensor, dim: usize) -> bool {
    let scale = (0..dim).map(|i| k[i][i].abs()).fold(0.0, f64::max);
    let symmetric = (0..dim).all(|i| (0..dim).all(|j| (k[i][j] - k[j][i]).abs() <= 1e-14 * scale));
    let finite = k.iter().flatten().all(|x| x.is_finite());
    symmetric && finite && eigenvalues(k, dim).iter().all(|&e| e > 0.0)
}
