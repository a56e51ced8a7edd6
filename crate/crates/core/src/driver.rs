//! Optimization loop and fixed-design analyses.

use log::{error, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fem::{Problem, Trajectory};
use crate::mesh::{build_mesh, Mesh};
use crate::mma::MmaState;
use crate::pore::{all_pore_metrics, objective, PoreMetrics};
use crate::sensitivity::{adjoint_solve, physical_sensitivity, volume_constraint, DensityFilter, ThicknessMap, VolumeConstraint};

/// Pore state at one load step.
#[derive(Debug, Clone, PartialEq)]
pub struct HdSample {
    pub step: usize,
    pub stretch: f64,
    pub pore: usize,
    pub area: f64,
    pub perimeter: f64,
    pub hydraulic_diameter: f64,
}

/// Hydraulic-diameter curves of every pore along a trajectory.
pub fn hd_curve(mesh: &Mesh, trajectory: &Trajectory, total_stretch: f64) -> Result<Vec<HdSample>> {
    let mut out = Vec::new();
    for (step, state) in trajectory.states.iter().enumerate() {
        for m in all_pore_metrics(mesh, &state.u)? {
            out.push(HdSample {
                step,
                stretch: state.stretch(total_stretch),
                pore: m.pore,
                area: m.area,
                perimeter: m.perimeter,
                hydraulic_diameter: m.hydraulic_diameter,
            });
        }
    }
    Ok(out)
}

/// Mesh, filter and settings shared by every evaluation of a run.
#[derive(Debug)]
pub struct Study {
    pub config: RunConfig,
    pub mesh: Mesh,
    pub filter: DensityFilter,
    pub map: ThicknessMap,
}

/// Response of one design.
#[derive(Debug)]
pub struct Evaluation {
    pub z_phys: Vec<f64>,
    pub thickness: Vec<f64>,
    pub trajectory: Trajectory,
    pub metrics: Vec<PoreMetrics>,
    pub f0: f64,
    pub volume: VolumeConstraint,
    /// Objective gradient with respect to the design variables.
    pub df0_dz: Vec<f64>,
    /// Constraint gradient with respect to the design variables.
    pub dg_dz: Vec<f64>,
}

impl Study {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = build_mesh(&config.domain)?;
        let filter = DensityFilter::new(&mesh, config.r_min())?;
        let map = config.design.thickness_map();
        Ok(Self {
            config,
            mesh,
            filter,
            map,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn initial_design(&self) -> Vec<f64> {
        let d = &self.config.design;
        let n = self.num_elements();
        if d.initial_perturbation == 0.0 {
            return vec![d.initial; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        (0..n)
            .map(|_| (d.initial + d.initial_perturbation * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0))
            .collect()
    }

    /// Equilibrium path for a given thickness field.
    pub fn solve(&self, thickness: &[f64]) -> Result<Trajectory> {
        Problem::new(
            &self.mesh,
            self.config.material,
            thickness,
            self.config.domain.stretch,
            self.map.t_max,
            self.config.solver.clone(),
        )
        .incremental_solve()
    }

    /// Objective and constraint at design `z`, with gradients.
    pub fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
        if z.len() != self.num_elements() {
            return Err(Error::Config(format!(
                "design has {} entries, mesh has {} elements",
                z.len(),
                self.num_elements()
            )));
        }
        let z_phys = self.filter.apply(z);
        let thickness = self.map.thicknesses(&z_phys);
        let problem = Problem::new(
            &self.mesh,
            self.config.material,
            &thickness,
            self.config.domain.stretch,
            self.map.t_max,
            self.config.solver.clone(),
        );
        let trajectory = problem.incremental_solve()?;
        let u = &trajectory.final_state().u;
        let metrics = all_pore_metrics(&self.mesh, u)?;
        let obj = objective(&metrics, &self.config.targets(), &self.config.weights(), self.mesh.num_dofs());
        let lambda = adjoint_solve(&trajectory.final_tangent, &problem.dofs, &obj.gradient);
        let df0_dzp = physical_sensitivity(&self.mesh, &lambda, &trajectory.final_assembly, &thickness, &z_phys, &self.map);
        let volume = volume_constraint(&self.mesh, &z_phys, &self.map, self.config.design.volume_fraction);
        let df0_dz = self.filter.chain(&df0_dzp);
        let dg_dz = self.filter.chain(&volume.gradient);
        if !obj.value.is_finite() || df0_dz.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective or its gradient".into()));
        }
        Ok(Evaluation {
            z_phys,
            thickness,
            trajectory,
            metrics,
            f0: obj.value,
            volume,
            df0_dz,
            dg_dz,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub f0: f64,
    pub f0_over_finit: f64,
    pub volume_fraction: f64,
    /// `V / V* - 1`.
    pub constraint: f64,
    /// Multiplier of the volume constraint in the MMA subproblem built at this design.
    pub multiplier: f64,
    pub hydraulic_diameters: Vec<f64>,
}

#[derive(Debug)]
pub struct OptimizationResult {
    pub history: Vec<IterationRecord>,
    /// Design variables of the last evaluated design.
    pub z: Vec<f64>,
    pub initial_curve: Vec<HdSample>,
    pub final_curve: Vec<HdSample>,
    pub final_evaluation: Evaluation,
}

impl OptimizationResult {
    pub fn final_record(&self) -> &IterationRecord {
        self.history.last().expect("at least one iteration")
    }
}

/// Runs the configured number of design iterations. The design returned is
/// the last one evaluated.
pub fn run_optimization(study: &Study, mut observer: impl FnMut(&IterationRecord)) -> Result<OptimizationResult> {
    let n_iter = study.config.optimizer.iterations;
    let mut mma = MmaState::unit_box(study.num_elements(), study.config.optimizer.mma)?;
    let mut z = study.initial_design();
    let mut history = Vec::with_capacity(n_iter);
    let mut f_init = None;
    let mut initial_curve = Vec::new();
    let mut last = None;
    for iteration in 1..=n_iter {
        let eval = study.evaluate(&z).map_err(|e| {
            error!("design iteration {iteration} failed: {e}");
            e
        })?;
        if iteration == 1 {
            initial_curve = hd_curve(&study.mesh, &eval.trajectory, study.config.domain.stretch)?;
        }
        let f0_ref = *f_init.get_or_insert(eval.f0);
        let scale = if f0_ref > 0.0 { 1.0 / f0_ref } else { 1.0 };
        let scaled_grad: Vec<f64> = eval.df0_dz.iter().map(|g| g * scale).collect();
        let step = mma.update(&z, &scaled_grad, eval.volume.value, &eval.dg_dz)?;
        let record = IterationRecord {
            iteration,
            f0: eval.f0,
            f0_over_finit: if f0_ref > 0.0 { eval.f0 / f0_ref } else { eval.f0 },
            volume_fraction: eval.volume.fraction(),
            constraint: eval.volume.value,
            multiplier: step.multiplier,
            hydraulic_diameters: eval.metrics.iter().map(|m| m.hydraulic_diameter).collect(),
        };
        if !(record.f0.is_finite() && record.f0_over_finit.is_finite() && record.volume_fraction.is_finite()) {
            return Err(Error::NonFinite(format!("history at iteration {iteration}")));
        }
        info!(
            "iter {iteration:3}  f0 {:.6e}  f0/finit {:.5}  V/Vmax {:.4}  HD {:?}",
            record.f0, record.f0_over_finit, record.volume_fraction, record.hydraulic_diameters
        );
        observer(&record);
        history.push(record);
        if iteration < n_iter {
            z = step.x;
        }
        last = Some(eval);
    }
    let final_evaluation = last.expect("at least one iteration");
    let final_curve = hd_curve(&study.mesh, &final_evaluation.trajectory, study.config.domain.stretch)?;
    Ok(OptimizationResult {
        history,
        z,
        initial_curve,
        final_curve,
        final_evaluation,
    })
}

/// Result of an analysis at fixed thickness.
#[derive(Debug)]
pub struct AnalysisResult {
    pub thickness: Vec<f64>,
    pub trajectory: Trajectory,
    pub curve: Vec<HdSample>,
}

pub fn run_analysis(study: &Study, thickness: Vec<f64>) -> Result<AnalysisResult> {
    if thickness.len() != study.num_elements() {
        return Err(Error::Config(format!(
            "design field has {} entries, mesh has {} elements",
            thickness.len(),
            study.num_elements()
        )));
    }
    if thickness.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Config("thickness values must be positive".into()));
    }
    let trajectory = study.solve(&thickness)?;
    let curve = hd_curve(&study.mesh, &trajectory, study.config.domain.stretch)?;
    Ok(AnalysisResult {
        thickness,
        trajectory,
        curve,
    })
}

/// Uniform sheet at the minimum thickness.
pub fn run_flat_sheet(study: &Study) -> Result<AnalysisResult> {
    run_analysis(study, vec![study.map.t_min; study.num_elements()])
}

/// Final hydraulic diameter of each pore on a curve.
pub fn final_hydraulic_diameters(curve: &[HdSample]) -> Vec<f64> {
    let last_step = curve.iter().map(|s| s.step).max().unwrap_or(0);
    curve
        .iter()
        .filter(|s| s.step == last_step)
        .map(|s| s.hydraulic_diameter)
        .collect()
}
