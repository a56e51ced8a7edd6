//! Displacement-controlled incremental loading with Newton-Raphson
//! equilibrium iterations and step cut-back.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::assembly::{assemble, Assembly, DofMap};
use super::band::BandLu;
use super::element::ThicknessMode;
use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::mesh::{DofKind, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub load_steps: usize,
    pub max_newton_iters: usize,
    /// Residual tolerance relative to the characteristic force `G * t_max * L2`.
    pub relative_tolerance: f64,
    pub max_cutbacks: u32,
    pub thickness_mode: ThicknessMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            load_steps: 20,
            max_newton_iters: 10,
            relative_tolerance: 1e-8,
            max_cutbacks: 4,
            thickness_mode: ThicknessMode::Deformed,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.load_steps == 0 {
            return Err(Error::Config("load_steps must be at least 1".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::Config("max_newton_iters must be at least 1".into()));
        }
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::Config("relative_tolerance must be positive".into()));
        }
        if self.max_cutbacks > 20 {
            return Err(Error::Config("max_cutbacks must not exceed 20".into()));
        }
        Ok(())
    }
}

/// Converged state at one load level.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    pub load_factor: f64,
    /// Nodal displacements on all DOFs (mm).
    pub u: Vec<f64>,
    pub f33: Vec<[f64; 4]>,
    /// Free-DOF residual norm at acceptance.
    pub residual_norm: f64,
    /// Residual norms seen by the Newton iterations of the last sub-step.
    pub residual_history: Vec<f64>,
    pub newton_iterations: usize,
    pub cutbacks: u32,
    pub max_sigma33: f64,
}

impl EquilibriumState {
    pub fn stretch(&self, total_stretch: f64) -> f64 {
        self.load_factor * total_stretch
    }
}

/// States at every nominal load step (index 0 is the undeformed state) plus
/// the data the adjoint needs at the final one.
#[derive(Debug)]
pub struct Trajectory {
    pub states: Vec<EquilibriumState>,
    /// Element forces and stiffness at the final converged state.
    pub final_assembly: Assembly,
    /// Factorized free-DOF tangent at the final converged state.
    pub final_tangent: BandLu,
}

impl Trajectory {
    pub fn final_state(&self) -> &EquilibriumState {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Result of one Newton update.
#[derive(Debug)]
pub struct NewtonStep {
    /// Residual norm at the entry point.
    pub residual_norm: f64,
    /// Norm of the applied correction; zero when the entry point was accepted.
    pub update_norm: f64,
    pub converged: bool,
    pub assembly: Assembly,
}

/// Equilibrium problem at fixed design.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub material: MaterialParams,
    pub thickness: &'a [f64],
    /// Full stretch applied to the right edge (mm).
    pub stretch: f64,
    pub options: SolverOptions,
    /// Force scale used for the Newton tolerance.
    pub characteristic_force: f64,
    pub dofs: DofMap,
}

impl<'a> Problem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        material: MaterialParams,
        thickness: &'a [f64],
        stretch: f64,
        max_thickness: f64,
        options: SolverOptions,
    ) -> Self {
        Self {
            mesh,
            material,
            thickness,
            stretch,
            characteristic_force: material.shear_modulus * max_thickness * mesh.length_y,
            options,
            dofs: DofMap::new(mesh),
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.options.relative_tolerance * self.characteristic_force
    }

    pub fn assemble(&self, u: &[f64], f33: Option<&[[f64; 4]]>, with_tangent: bool) -> Result<Assembly> {
        assemble(
            self.mesh,
            &self.material,
            self.thickness,
            u,
            f33,
            self.options.thickness_mode,
            with_tangent,
        )
    }

    /// Constrained-DOF values at a load factor.
    fn boundary_values(&self, load_factor: f64) -> Vec<f64> {
        self.mesh
            .dofs
            .iter()
            .map(|k| match k {
                DofKind::Prescribed => load_factor * self.stretch,
                _ => 0.0,
            })
            .collect()
    }

    /// Assembles at `u`; unless the residual is already within tolerance,
    /// applies `du = -K^-1 R` on the free DOFs.
    pub fn newton_step(&self, u: &mut [f64], f33: &mut Vec<[f64; 4]>) -> Result<NewtonStep> {
        let assembly = self.assemble(u, Some(f33), true)?;
        *f33 = assembly.f33.clone();
        let residual = assembly.residual(&self.dofs);
        let residual_norm = norm(&residual);
        if !residual_norm.is_finite() {
            return Err(Error::NonFinite("residual".into()));
        }
        if residual_norm <= self.tolerance() {
            return Ok(NewtonStep {
                residual_norm,
                update_norm: 0.0,
                converged: true,
                assembly,
            });
        }
        let lu = assembly.tangent(self.mesh, &self.dofs).factor()?;
        let du = lu.solve(&residual);
        for (&d, v) in self.dofs.free_dofs().iter().zip(&du) {
            u[d] -= v;
        }
        Ok(NewtonStep {
            residual_norm,
            update_norm: norm(&du),
            converged: false,
            assembly,
        })
    }

    /// Ramps the prescribed stretch from zero to its full value.
    pub fn incremental_solve(&self) -> Result<Trajectory> {
        self.options.validate()?;
        let n_steps = self.options.load_steps;
        let sub_units: u64 = 1 << self.options.max_cutbacks;

        let u0 = vec![0.0; self.mesh.num_dofs()];
        let f33_0 = vec![[1.0; 4]; self.mesh.num_elements()];
        let assembly0 = self.assemble(&u0, Some(&f33_0), true)?;
        let lu0 = assembly0.tangent(self.mesh, &self.dofs).factor()?;
        let mut current = Converged {
            load_factor: 0.0,
            u: u0,
            f33: f33_0,
            assembly: assembly0,
            tangent: lu0,
        };
        let mut states = vec![EquilibriumState {
            load_factor: 0.0,
            u: current.u.clone(),
            f33: current.f33.clone(),
            residual_norm: norm(&current.assembly.residual(&self.dofs)),
            residual_history: Vec::new(),
            newton_iterations: 0,
            cutbacks: 0,
            max_sigma33: current.assembly.max_sigma33,
        }];

        for step in 0..n_steps {
            // Position inside the step, in units of 1 / sub_units.
            let mut position = 0u64;
            let mut size = sub_units;
            let mut cutbacks = 0u32;
            let mut last_history = Vec::new();
            let mut last_iterations = 0;
            while position < sub_units {
                let target = (step as f64 + (position + size) as f64 / sub_units as f64) / n_steps as f64;
                match self.advance(&current, target) {
                    Ok((next, history)) => {
                        last_iterations = history.len();
                        last_history = history;
                        current = next;
                        position += size;
                    }
                    Err(err) if err.is_recoverable_by_cutback() && size > 1 => {
                        size /= 2;
                        cutbacks += 1;
                        warn!(
                            "load step {} failed at factor {target:.5} ({err}); cutting back",
                            step + 1
                        );
                    }
                    Err(err) => {
                        return Err(Error::NonConvergence {
                            last_load_factor: current.load_factor,
                            reason: err.to_string(),
                        })
                    }
                }
            }
            debug!(
                "load step {}/{n_steps}: factor {:.4}, {} Newton iterations, {cutbacks} cut-backs",
                step + 1,
                current.load_factor,
                last_iterations
            );
            states.push(EquilibriumState {
                load_factor: current.load_factor,
                u: current.u.clone(),
                f33: current.f33.clone(),
                residual_norm: last_history.last().copied().unwrap_or(0.0),
                residual_history: last_history,
                newton_iterations: last_iterations.saturating_sub(1),
                cutbacks,
                max_sigma33: current.assembly.max_sigma33,
            });
        }

        Ok(Trajectory {
            states,
            final_assembly: current.assembly,
            final_tangent: current.tangent,
        })
    }

    /// Tangent predictor from the last converged state, then Newton corrections.
    fn advance(&self, from: &Converged, load_factor: f64) -> Result<(Converged, Vec<f64>)> {
        let target_bc = self.boundary_values(load_factor);
        let mut jump = vec![0.0; self.mesh.num_dofs()];
        let mut u = from.u.clone();
        for (d, kind) in self.mesh.dofs.iter().enumerate() {
            if *kind != DofKind::Free {
                jump[d] = target_bc[d] - from.u[d];
                u[d] = target_bc[d];
            }
        }
        let coupling = from.assembly.constrained_coupling(self.mesh, &self.dofs, &jump);
        let predictor = from.tangent.solve(&coupling);
        for (&d, v) in self.dofs.free_dofs().iter().zip(&predictor) {
            u[d] -= v;
        }

        let mut f33 = from.f33.clone();
        let mut history = Vec::with_capacity(self.options.max_newton_iters + 1);
        for _ in 0..=self.options.max_newton_iters {
            let step = self.newton_step(&mut u, &mut f33)?;
            history.push(step.residual_norm);
            if step.converged {
                let tangent = step.assembly.tangent(self.mesh, &self.dofs).factor()?;
                return Ok((
                    Converged {
                        load_factor,
                        u,
                        f33,
                        assembly: step.assembly,
                        tangent,
                    },
                    history,
                ));
            }
            let n = history.len();
            if n >= 3 && history[n - 1] > history[n - 2] && history[n - 2] > history[n - 3] {
                return Err(Error::NonConvergence {
                    last_load_factor: from.load_factor,
                    reason: format!("residual grew twice in a row ({:.3e})", history[n - 1]),
                });
            }
        }
        Err(Error::NonConvergence {
            last_load_factor: from.load_factor,
            reason: format!(
                "no convergence within {} Newton iterations (residual {:.3e}, tolerance {:.3e})",
                self.options.max_newton_iters,
                history.last().copied().unwrap_or(f64::NAN),
                self.tolerance()
            ),
        })
    }
}

struct Converged {
    load_factor: f64,
    u: Vec<f64>,
    f33: Vec<[f64; 4]>,
    assembly: Assembly,
    tangent: BandLu,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
