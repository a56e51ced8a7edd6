//! Updated-Lagrangian plane-stress quadrilateral.
//!
//! At each Gauss point the in-plane deformation gradient is formed from the
//! reference and current nodal positions, the thickness stretch is solved for
//! `sigma33 = 0`, and the force and tangent are integrated over the current
//! area with gradients taken w.r.t. current coordinates.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use super::quadrature::{shape_eval, GAUSS_POINTS, GAUSS_WEIGHTS};
use crate::error::{Error, Result};
use crate::material::{enforce_plane_stress, MaterialParams, PlaneStressPoint};

pub type ElementVector = SVector<f64, 8>;
pub type ElementMatrix = SMatrix<f64, 8, 8>;

/// Through-thickness measure used in the current-configuration integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThicknessMode {
    /// Design thickness times the current thickness stretch `F33`.
    #[default]
    Deformed,
    /// Design thickness only; the tangent then picks up a non-symmetric
    /// thickness-change term.
    Reference,
}

#[derive(Debug, Clone)]
pub struct ElementResponse {
    pub force: ElementVector,
    pub material_stiffness: ElementMatrix,
    pub geometric_stiffness: ElementMatrix,
    pub points: [PlaneStressPoint; 4],
}

impl ElementResponse {
    pub fn stiffness(&self) -> ElementMatrix {
        self.material_stiffness + self.geometric_stiffness
    }

    pub fn f33(&self) -> [f64; 4] {
        self.points.map(|p| p.f33)
    }
}

/// Everything needed to evaluate one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementInput<'a> {
    pub id: usize,
    pub coords: &'a [Vector2<f64>; 4],
    pub displacement: &'a ElementVector,
    pub thickness: f64,
    pub material: &'a MaterialParams,
    pub mode: ThicknessMode,
    /// Starting values for the per-point thickness stretch iteration.
    pub f33_guess: [f64; 4],
}

pub fn element_response(input: &ElementInput, with_stiffness: bool) -> Result<ElementResponse> {
    let mut force = ElementVector::zeros();
    let mut kmat = ElementMatrix::zeros();
    let mut kgeo = ElementMatrix::zeros();
    let mut points = Vec::with_capacity(4);

    for (gp, (&(xi, eta), &w)) in GAUSS_POINTS.iter().zip(GAUSS_WEIGHTS.iter()).enumerate() {
        let shape = shape_eval(xi, eta);
        let mut jac_ref = Matrix2::zeros();
        for a in 0..4 {
            let dn = Vector2::new(shape.dn[a][0], shape.dn[a][1]);
            jac_ref += input.coords[a] * dn.transpose();
        }
        let det_ref = jac_ref.determinant();
        if !(det_ref > 0.0) {
            return Err(Error::ElementInversion {
                element: input.id,
                gauss_point: gp,
                det: det_ref,
            });
        }
        let jac_ref_inv_t = jac_ref
            .try_inverse()
            .expect("positive determinant")
            .transpose();
        let dn_dx_ref: [Vector2<f64>; 4] =
            std::array::from_fn(|a| jac_ref_inv_t * Vector2::new(shape.dn[a][0], shape.dn[a][1]));

        let mut fp = Matrix2::identity();
        for a in 0..4 {
            let ua = Vector2::new(input.displacement[2 * a], input.displacement[2 * a + 1]);
            fp += ua * dn_dx_ref[a].transpose();
        }
        let det_fp = fp.determinant();
        if !(det_fp > 0.0) {
            return Err(Error::ElementInversion {
                element: input.id,
                gauss_point: gp,
                det: det_fp,
            });
        }
        let point = enforce_plane_stress(&fp, input.material, input.f33_guess[gp]).map_err(|e| {
            Error::ElementPlaneStress {
                element: input.id,
                source: Box::new(e),
            }
        })?;

        let fp_inv_t = fp.try_inverse().expect("positive determinant").transpose();
        let grad: [Vector2<f64>; 4] = std::array::from_fn(|a| fp_inv_t * dn_dx_ref[a]);
        let thickness = match input.mode {
            ThicknessMode::Deformed => input.thickness * point.f33,
            ThicknessMode::Reference => input.thickness,
        };
        let dv = w * det_ref * det_fp * thickness;

        let s = point.stress_voigt;
        for a in 0..4 {
            let g = grad[a];
            force[2 * a] += dv * (s[0] * g.x + s[2] * g.y);
            force[2 * a + 1] += dv * (s[2] * g.x + s[1] * g.y);
        }

        if with_stiffness {
            let mut c = point.tangent;
            if input.mode == ThicknessMode::Reference {
                c += s * point.thickness_coupling.transpose();
            }
            let mut bmat = SMatrix::<f64, 3, 8>::zeros();
            for a in 0..4 {
                let g = grad[a];
                bmat[(0, 2 * a)] = g.x;
                bmat[(1, 2 * a + 1)] = g.y;
                bmat[(2, 2 * a)] = g.y;
                bmat[(2, 2 * a + 1)] = g.x;
            }
            kmat += bmat.transpose() * c * bmat * dv;

            let sigma = Matrix2::new(s[0], s[2], s[2], s[1]);
            for a in 0..4 {
                let sa = sigma * grad[a];
                for b in 0..4 {
                    let kab = dv * sa.dot(&grad[b]);
                    kgeo[(2 * a, 2 * b)] += kab;
                    kgeo[(2 * a + 1, 2 * b + 1)] += kab;
                }
            }
        }
        points.push(point);
    }

    Ok(ElementResponse {
        force,
        material_stiffness: kmat,
        geometric_stiffness: kgeo,
        points: points.try_into().expect("four Gauss points"),
    })
}

pub fn element_force(input: &ElementInput) -> Result<ElementVector> {
    element_response(input, false).map(|r| r.force)
}

pub fn element_stiffness(input: &ElementInput) -> Result<ElementMatrix> {
    element_response(input, true).map(|r| r.stiffness())
}

/// Largest `|sigma33| / G` over the element's Gauss points.
pub fn max_plane_stress_residual(points: &[PlaneStressPoint], material: &MaterialParams) -> f64 {
    points
        .iter()
        .map(|p| p.sigma33().abs() / material.shear_modulus)
        .fold(0.0, f64::max)
}

/// Small-strain plane-stress modulus matrix (engineering shear) for an
/// isotropic material with bulk modulus `k` and shear modulus `mu`.
pub fn linear_plane_stress_modulus(k: f64, mu: f64) -> nalgebra::Matrix3<f64> {
    let lambda = k - 2.0 * mu / 3.0;
    let lambda_ps = 2.0 * lambda * mu / (lambda + 2.0 * mu);
    nalgebra::Matrix3::new(
        lambda_ps + 2.0 * mu,
        lambda_ps,
        0.0,
        lambda_ps,
        lambda_ps + 2.0 * mu,
        0.0,
        0.0,
        0.0,
        mu,
    )
}

/// Small-strain `B` matrix and reference `det j` at a parent point.
pub fn strain_displacement_reference(coords: &[Vector2<f64>; 4], xi: f64, eta: f64) -> (SMatrix<f64, 3, 8>, f64) {
    let shape = shape_eval(xi, eta);
    let mut jac = Matrix2::zeros();
    for a in 0..4 {
        jac += coords[a] * Vector2::new(shape.dn[a][0], shape.dn[a][1]).transpose();
    }
    let inv_t = jac.try_inverse().expect("valid element").transpose();
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for a in 0..4 {
        let g = inv_t * Vector2::new(shape.dn[a][0], shape.dn[a][1]);
        b[(0, 2 * a)] = g.x;
        b[(1, 2 * a + 1)] = g.y;
        b[(2, 2 * a)] = g.y;
        b[(2, 2 * a + 1)] = g.x;
    }
    (b, jac.determinant())
}
