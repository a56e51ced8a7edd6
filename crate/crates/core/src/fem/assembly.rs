use rayon::prelude::*;

use super::band::BandMatrix;
use super::element::{element_response, ElementInput, ElementMatrix, ElementVector, ThicknessMode};
use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::mesh::{DofKind, Mesh};

/// Numbering of the free DOFs, in global DOF order.
#[derive(Debug, Clone)]
pub struct DofMap {
    free_of: Vec<Option<usize>>,
    free: Vec<usize>,
    half_bandwidth: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut free_of = vec![None; mesh.num_dofs()];
        let mut free = Vec::new();
        for (d, kind) in mesh.dofs.iter().enumerate() {
            if *kind == DofKind::Free {
                free_of[d] = Some(free.len());
                free.push(d);
            }
        }
        let mut half_bandwidth = 0;
        for e in 0..mesh.num_elements() {
            let ids: Vec<usize> = mesh.element_dofs(e).iter().filter_map(|&d| free_of[d]).collect();
            if let (Some(lo), Some(hi)) = (ids.iter().min(), ids.iter().max()) {
                half_bandwidth = half_bandwidth.max(hi - lo);
            }
        }
        Self {
            free_of,
            free,
            half_bandwidth,
        }
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_of[dof]
    }

    /// Global DOF ids of the free equations.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    pub fn expand(&self, free: &[f64], num_dofs: usize) -> Vec<f64> {
        let mut full = vec![0.0; num_dofs];
        for (&d, &v) in self.free.iter().zip(free) {
            full[d] = v;
        }
        full
    }
}

/// Element-level results of one pass over the mesh.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Internal force on every global DOF (reactions on constrained DOFs).
    pub internal_force: Vec<f64>,
    pub element_forces: Vec<ElementVector>,
    /// Present when the tangent was requested.
    pub element_stiffness: Option<Vec<ElementMatrix>>,
    /// Converged thickness stretch per element and Gauss point.
    pub f33: Vec<[f64; 4]>,
    /// Largest `|sigma33| / G` over all Gauss points.
    pub max_sigma33: f64,
}

impl Assembly {
    pub fn residual(&self, dofs: &DofMap) -> Vec<f64> {
        dofs.restrict(&self.internal_force)
    }

    /// Tangent restricted to the free DOFs.
    pub fn tangent(&self, mesh: &Mesh, dofs: &DofMap) -> BandMatrix {
        let ke = self
            .element_stiffness
            .as_ref()
            .expect("assembly was run without the tangent");
        let mut k = BandMatrix::zeros(dofs.num_free(), dofs.half_bandwidth());
        for (e, ke) in ke.iter().enumerate() {
            let ids = mesh.element_dofs(e).map(|d| dofs.free_index(d));
            for (a, ia) in ids.iter().enumerate() {
                let Some(i) = ia else { continue };
                for (b, ib) in ids.iter().enumerate() {
                    if let Some(j) = ib {
                        k.add(*i, *j, ke[(a, b)]);
                    }
                }
            }
        }
        k
    }

    /// Free-DOF part of `K u_c` where `u_c` is nonzero only on constrained DOFs.
    pub fn constrained_coupling(&self, mesh: &Mesh, dofs: &DofMap, constrained: &[f64]) -> Vec<f64> {
        let ke = self
            .element_stiffness
            .as_ref()
            .expect("assembly was run without the tangent");
        let mut out = vec![0.0; dofs.num_free()];
        for (e, ke) in ke.iter().enumerate() {
            let ed = mesh.element_dofs(e);
            let ue = ElementVector::from_fn(|a, _| {
                if dofs.free_index(ed[a]).is_none() {
                    constrained[ed[a]]
                } else {
                    0.0
                }
            });
            if ue.iter().all(|v| *v == 0.0) {
                continue;
            }
            let fe = ke * ue;
            for (a, &d) in ed.iter().enumerate() {
                if let Some(i) = dofs.free_index(d) {
                    out[i] += fe[a];
                }
            }
        }
        out
    }
}

/// Evaluates every element at displacement `u` and sums the internal forces.
///
/// Element work runs in parallel; results are gathered and summed in element
/// order, so the output does not depend on the thread count.
pub fn assemble(
    mesh: &Mesh,
    material: &MaterialParams,
    thickness: &[f64],
    u: &[f64],
    f33_guess: Option<&[[f64; 4]]>,
    mode: ThicknessMode,
    with_tangent: bool,
) -> Result<Assembly> {
    if thickness.len() != mesh.num_elements() {
        return Err(Error::Config(format!(
            "thickness field has {} entries, mesh has {} elements",
            thickness.len(),
            mesh.num_elements()
        )));
    }
    if u.len() != mesh.num_dofs() {
        return Err(Error::Config("displacement vector length mismatch".into()));
    }
    let responses: Vec<_> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let coords = mesh.element_coords(e);
            let dofs = mesh.element_dofs(e);
            let ue = ElementVector::from_fn(|a, _| u[dofs[a]]);
            let input = ElementInput {
                id: e,
                coords: &coords,
                displacement: &ue,
                thickness: thickness[e],
                material,
                mode,
                f33_guess: f33_guess.map_or([1.0; 4], |g| g[e]),
            };
            element_response(&input, with_tangent)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut internal_force = vec![0.0; mesh.num_dofs()];
    let mut max_sigma33: f64 = 0.0;
    for (e, r) in responses.iter().enumerate() {
        for (a, &d) in mesh.element_dofs(e).iter().enumerate() {
            internal_force[d] += r.force[a];
        }
        for p in &r.points {
            max_sigma33 = max_sigma33.max(p.sigma33().abs() / material.shear_modulus);
        }
    }
    Ok(Assembly {
        internal_force,
        element_forces: responses.iter().map(|r| r.force).collect(),
        element_stiffness: with_tangent.then(|| responses.iter().map(|r| r.stiffness()).collect()),
        f33: responses.iter().map(|r| r.f33()).collect(),
        max_sigma33,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainSpec, PoreSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_mesh() -> Mesh {
        build_mesh(&DomainSpec {
            length_x: 10.0,
            length_y: 16.0,
            nelx: 4,
            nely: 6,
            pores: vec![PoreSpec {
                center: [5.0, 8.0],
                width: 5.0,
                height: 16.0 / 6.0 * 2.0,
                target_hd: 2.0,
                weight: 1.0,
            }],
            stretch: 10.0,
        })
        .unwrap()
    }

    fn random_state(mesh: &Mesh, seed: u64, scale: f64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..mesh.num_dofs()).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
        let t = (0..mesh.num_elements()).map(|_| 0.5 + 1.5 * rng.random::<f64>()).collect();
        (u, t)
    }

    #[test]
    fn zero_displacement_has_zero_residual() {
        let mesh = small_mesh();
        let dofs = DofMap::new(&mesh);
        let t = vec![1.0; mesh.num_elements()];
        let u = vec![0.0; mesh.num_dofs()];
        let a = assemble(&mesh, &MaterialParams::default(), &t, &u, None, ThicknessMode::Deformed, false).unwrap();
        assert!(a.residual(&dofs).iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn global_tangent_is_symmetric() {
        let mesh = small_mesh();
        let dofs = DofMap::new(&mesh);
        let (u, t) = random_state(&mesh, 3, 0.4);
        let a = assemble(&mesh, &MaterialParams::default(), &t, &u, None, ThicknessMode::Deformed, true).unwrap();
        let (diff, max) = a.tangent(&mesh, &dofs).asymmetry();
        assert!(diff <= 1e-12 * max, "{diff} vs {max}");
    }

    #[test]
    fn global_tangent_matches_residual_differences() {
        let mesh = small_mesh();
        let dofs = DofMap::new(&mesh);
        let m = MaterialParams::default();
        for (seed, mode) in [(5, ThicknessMode::Deformed), (6, ThicknessMode::Reference)] {
            let (u, t) = random_state(&mesh, seed, 0.4);
            let a = assemble(&mesh, &m, &t, &u, None, mode, true).unwrap();
            let k = a.tangent(&mesh, &dofs);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            for _ in 0..3 {
                let dir: Vec<f64> = (0..dofs.num_free()).map(|_| rng.random::<f64>() - 0.5).collect();
                let h = 1e-6;
                let shift = |sign: f64| {
                    let mut v = u.clone();
                    for (i, &d) in dofs.free_dofs().iter().enumerate() {
                        v[d] += sign * h * dir[i];
                    }
                    assemble(&mesh, &m, &t, &v, None, mode, false).unwrap().residual(&dofs)
                };
                let (rp, rm) = (shift(1.0), shift(-1.0));
                let fd: Vec<f64> = rp.iter().zip(&rm).map(|(p, q)| (p - q) / (2.0 * h)).collect();
                let kd = k.mul_vec(&dir);
                let err: f64 = kd.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(err <= 1e-5 * norm, "{mode:?}: {err} vs {norm}");
            }
        }
    }

    #[test]
    fn residual_scales_with_uniform_thickness() {
        let mesh = small_mesh();
        let dofs = DofMap::new(&mesh);
        let m = MaterialParams::default();
        let (u, t) = random_state(&mesh, 9, 0.3);
        let t3: Vec<f64> = t.iter().map(|v| 3.0 * v).collect();
        let r1 = assemble(&mesh, &m, &t, &u, None, ThicknessMode::Deformed, false).unwrap().residual(&dofs);
        let r3 = assemble(&mesh, &m, &t3, &u, None, ThicknessMode::Deformed, false).unwrap().residual(&dofs);
        for (a, b) in r1.iter().zip(&r3) {
            assert!((3.0 * a - b).abs() <= 1e-13 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn rigid_translation_of_unconstrained_patch_is_force_free() {
        let mesh = small_mesh();
        let t = vec![1.0; mesh.num_elements()];
        let u: Vec<f64> = (0..mesh.num_dofs()).map(|d| if d % 2 == 0 { 0.3 } else { -0.7 }).collect();
        let a = assemble(&mesh, &MaterialParams::default(), &t, &u, None, ThicknessMode::Deformed, false).unwrap();
        assert!(a.internal_force.iter().all(|f| f.abs() < 1e-13));
    }

    #[test]
    fn assembly_is_independent_of_thread_count() {
        let mesh = small_mesh();
        let (u, t) = random_state(&mesh, 11, 0.3);
        let m = MaterialParams::default();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| assemble(&mesh, &m, &t, &u, None, ThicknessMode::Deformed, true).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.internal_force, b.internal_force);
        assert_eq!(a.element_stiffness, b.element_stiffness);
    }
}
