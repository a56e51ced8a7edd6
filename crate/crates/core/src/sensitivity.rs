//! Density filter, thickness interpolation, adjoint design sensitivities and
//! the volume constraint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Assembly, BandLu, DofMap};
use crate::mesh::Mesh;

/// Maps physical variables in `[0, 1]` to element thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessMap {
    pub t_min: f64,
    pub t_max: f64,
    pub penalty: f64,
}

impl Default for ThicknessMap {
    fn default() -> Self {
        Self {
            t_min: 0.5,
            t_max: 2.0,
            penalty: 1.0,
        }
    }
}

impl ThicknessMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::Config("thickness bounds must satisfy 0 < t_min < t_max".into()));
        }
        if !(self.penalty >= 1.0 && self.penalty.is_finite()) {
            return Err(Error::Config("penalty exponent must be at least 1".into()));
        }
        Ok(())
    }

    pub fn thickness(&self, z: f64) -> f64 {
        self.t_min + z.powf(self.penalty) * (self.t_max - self.t_min)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        if self.penalty == 1.0 {
            self.t_max - self.t_min
        } else if z <= 0.0 {
            0.0
        } else {
            self.penalty * z.powf(self.penalty - 1.0) * (self.t_max - self.t_min)
        }
    }

    pub fn thicknesses(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.thickness(v)).collect()
    }
}

/// Normalized cone filter over element centroids, stored row-wise.
#[derive(Debug, Clone)]
pub struct DensityFilter {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl DensityFilter {
    pub fn new(mesh: &Mesh, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::Config("filter radius must be positive".into()));
        }
        let (hx, hy) = mesh.element_size();
        let mut slot = vec![usize::MAX; mesh.nelx * mesh.nely];
        for (e, &(ix, iy)) in mesh.element_grid.iter().enumerate() {
            slot[iy * mesh.nelx + ix] = e;
        }
        let rx = (r_min / hx).ceil() as isize;
        let ry = (r_min / hy).ceil() as isize;
        let rows: Vec<Vec<(usize, f64)>> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                let (ix, iy) = mesh.element_grid[e];
                let ce = mesh.element_centroid(e);
                let mut row = Vec::new();
                for jy in (iy as isize - ry).max(0)..=(iy as isize + ry).min(mesh.nely as isize - 1) {
                    for jx in (ix as isize - rx).max(0)..=(ix as isize + rx).min(mesh.nelx as isize - 1) {
                        let k = slot[jy as usize * mesh.nelx + jx as usize];
                        if k == usize::MAX {
                            continue;
                        }
                        let w = r_min - (mesh.element_centroid(k) - ce).norm();
                        if w > 0.0 {
                            row.push((k, w));
                        }
                    }
                }
                let total: f64 = row.iter().map(|(_, w)| w).sum();
                row.iter_mut().for_each(|(_, w)| *w /= total);
                row
            })
            .collect();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for row in rows {
            for (k, w) in row {
                neighbors.push(k);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Ok(Self {
            offsets,
            neighbors,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[e]..self.offsets[e + 1];
        self.neighbors[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Physical variables from design variables.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.len());
        (0..self.len())
            .into_par_iter()
            .map(|e| self.row(e).map(|(k, w)| w * z[k]).sum())
            .collect()
    }

    /// Maps a gradient with respect to physical variables back to design variables.
    pub fn chain(&self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.len());
        let mut out = vec![0.0; self.len()];
        for e in 0..self.len() {
            for (k, w) in self.row(e) {
                out[k] += w * grad[e];
            }
        }
        out
    }
}

/// Solves `K^T lambda = -df0/du` on the free DOFs; zero on constrained DOFs.
pub fn adjoint_solve(tangent: &BandLu, dofs: &DofMap, df0_du: &[f64]) -> Vec<f64> {
    let rhs: Vec<f64> = dofs.restrict(df0_du).iter().map(|v| -v).collect();
    let lambda = tangent.solve_transpose(&rhs);
    dofs.expand(&lambda, df0_du.len())
}

/// `lambda^T dR/dz~` per element: the internal force is linear in the element
/// thickness, so its thickness derivative is `f_e / t_e`.
pub fn physical_sensitivity(
    mesh: &Mesh,
    lambda: &[f64],
    assembly: &Assembly,
    thickness: &[f64],
    z_phys: &[f64],
    map: &ThicknessMap,
) -> Vec<f64> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let dofs = mesh.element_dofs(e);
            let fe = &assembly.element_forces[e];
            let work: f64 = dofs.iter().enumerate().map(|(a, &d)| lambda[d] * fe[a]).sum();
            work / thickness[e] * map.derivative(z_phys[e])
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct VolumeConstraint {
    /// Material volume `sum t_e A_e` (mm^3).
    pub volume: f64,
    /// Volume with every element at `t_max`.
    pub max_volume: f64,
    pub bound: f64,
    /// `V / V* - 1`.
    pub value: f64,
    /// Gradient of `value` with respect to physical variables.
    pub gradient: Vec<f64>,
}

impl VolumeConstraint {
    pub fn fraction(&self) -> f64 {
        self.volume / self.max_volume
    }
}

pub fn volume_constraint(mesh: &Mesh, z_phys: &[f64], map: &ThicknessMap, fraction: f64) -> VolumeConstraint {
    let areas: Vec<f64> = (0..mesh.num_elements()).map(|e| mesh.element_area(e)).collect();
    let volume: f64 = z_phys.iter().zip(&areas).map(|(&z, a)| map.thickness(z) * a).sum();
    let max_volume: f64 = areas.iter().map(|a| map.t_max * a).sum();
    let bound = fraction * max_volume;
    VolumeConstraint {
        volume,
        max_volume,
        bound,
        value: volume / bound - 1.0,
        gradient: z_phys
            .iter()
            .zip(&areas)
            .map(|(&z, a)| map.derivative(z) * a / bound)
            .collect(),
    }
}
