//! Three-term Arruda-Boyce hyperelasticity with a Simo-Taylor volumetric part.
//!
//! Tensors are 3x3 and the spatial tangent is kept in Voigt form with the
//! component order `[11, 22, 33, 12, 23, 13]`. Tangent entries are plain
//! tensor components, so `c * d` expects engineering shear strain rates.

use nalgebra::{Matrix2, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative plane-stress tolerance, `|sigma33| <= PLANE_STRESS_TOL * G`.
pub const PLANE_STRESS_TOL: f64 = 1e-10;
pub const PLANE_STRESS_MAX_ITERS: usize = 20;

/// Voigt position of each tensor index pair.
const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
const IN_PLANE: [usize; 3] = [0, 1, 3];
const OUT_OF_PLANE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Linear shear modulus G (MPa).
    pub shear_modulus: f64,
    /// Linear bulk modulus K (MPa).
    pub bulk_modulus: f64,
    /// Chain segment count n.
    #[serde(default = "default_chain_segments")]
    pub chain_segments: f64,
}

fn default_chain_segments() -> f64 {
    8.0
}

impl Default for MaterialParams {
    /// PDMS values (G = 0.68 MPa, K = 3.42 MPa) with n = 8.
    fn default() -> Self {
        Self {
            shear_modulus: 0.68,
            bulk_modulus: 3.42,
            chain_segments: default_chain_segments(),
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("shear_modulus", self.shear_modulus),
            ("bulk_modulus", self.bulk_modulus),
            ("chain_segments", self.chain_segments),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("material {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Effective modulus Gbar = G / (1 + 3/(5n) + 99/(175 n^2)).
    pub fn g_bar(&self) -> f64 {
        let n = self.chain_segments;
        self.shear_modulus / (1.0 + 3.0 / (5.0 * n) + 99.0 / (175.0 * n * n))
    }

    pub fn a1(&self) -> f64 {
        0.5 * self.g_bar()
    }

    pub fn a2(&self) -> f64 {
        self.a1() / (10.0 * self.chain_segments)
    }

    pub fn a3(&self) -> f64 {
        11.0 * self.a1() / (525.0 * self.chain_segments * self.chain_segments)
    }

    /// First and second derivative of the deviatoric energy w.r.t. the
    /// isochoric first invariant.
    fn dev_derivatives(&self, i1_bar: f64) -> (f64, f64) {
        let (a1, a2, a3) = (self.a1(), self.a2(), self.a3());
        (
            a1 + 2.0 * a2 * i1_bar + 3.0 * a3 * i1_bar * i1_bar,
            2.0 * a2 + 6.0 * a3 * i1_bar,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub f: Matrix3<f64>,
    /// Left Cauchy-Green tensor `F F^T`.
    pub b: Matrix3<f64>,
    pub j: f64,
    /// `J^(-2/3) tr B`.
    pub i1_bar: f64,
}

impl DeformationState {
    pub fn new(f: Matrix3<f64>) -> Result<Self> {
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(Error::InvertedMaterial { jacobian: j });
        }
        let b = f * f.transpose();
        Ok(Self {
            f,
            b,
            j,
            i1_bar: j.powf(-2.0 / 3.0) * b.trace(),
        })
    }

    /// Plane-stress layout: in-plane block plus the thickness stretch.
    pub fn from_plane(fp: &Matrix2<f64>, f33: f64) -> Result<Self> {
        let f = Matrix3::new(
            fp[(0, 0)],
            fp[(0, 1)],
            0.0,
            fp[(1, 0)],
            fp[(1, 1)],
            0.0,
            0.0,
            0.0,
            f33,
        );
        Self::new(f)
    }

    pub fn i1(&self) -> f64 {
        self.b.trace()
    }
}

pub fn strain_energy(state: &DeformationState, mat: &MaterialParams) -> f64 {
    let (ib, j) = (state.i1_bar, state.j);
    mat.a1() * (ib - 3.0)
        + mat.a2() * (ib * ib - 9.0)
        + mat.a3() * (ib * ib * ib - 27.0)
        + volumetric_energy(j, mat.bulk_modulus)
}

/// `K/2 [ (J^2 - 1)/2 - ln J ]`.
pub fn volumetric_energy(j: f64, bulk_modulus: f64) -> f64 {
    0.5 * bulk_modulus * (0.5 * (j * j - 1.0) - j.ln())
}

pub fn cauchy_stress(state: &DeformationState, mat: &MaterialParams) -> Matrix3<f64> {
    let j = state.j;
    let (dw, _) = mat.dev_derivatives(state.i1_bar);
    let dev = state.b - Matrix3::identity() * (state.i1() / 3.0);
    dev * (2.0 * j.powf(-5.0 / 3.0) * dw)
        + Matrix3::identity() * (0.5 * mat.bulk_modulus / j * (j * j - 1.0))
}

/// Spatial elasticity tensor in Voigt form (major and minor symmetric).
pub fn tangent_tensor(state: &DeformationState, mat: &MaterialParams) -> Matrix6<f64> {
    let j = state.j;
    let i1 = state.i1();
    let b = &state.b;
    let k = mat.bulk_modulus;
    let (dw, ddw) = mat.dev_derivatives(state.i1_bar);
    let c1 = 4.0 / j * dw * j.powf(-2.0 / 3.0);
    let c2 = 4.0 / j * ddw * j.powf(-4.0 / 3.0);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut c = Matrix6::zeros();
    for (p, &(i, jj)) in VOIGT.iter().enumerate() {
        for (q, &(kk, l)) in VOIGT.iter().enumerate() {
            let ii = delta(i, jj) * delta(kk, l);
            let sym = 0.5 * (delta(i, kk) * delta(jj, l) + delta(i, l) * delta(jj, kk));
            let bi = b[(i, jj)] * delta(kk, l);
            let ib = delta(i, jj) * b[(kk, l)];
            let bb = b[(i, jj)] * b[(kk, l)];
            let t1 = i1 / 9.0 * ii + i1 / 3.0 * sym - (bi + ib) / 3.0;
            let t2 = bb - i1 / 3.0 * (bi + ib) + i1 * i1 / 9.0 * ii;
            c[(p, q)] = c1 * t1 + c2 * t2 + k * j * (ii - sym) + k / j * sym;
        }
    }
    c
}

/// Converged plane-stress material point.
#[derive(Debug, Clone, Copy)]
pub struct PlaneStressPoint {
    pub f33: f64,
    pub state: DeformationState,
    pub stress: Matrix3<f64>,
    /// In-plane stress `[s11, s22, s12]`.
    pub stress_voigt: Vector3<f64>,
    /// Tangent with the thickness direction statically condensed out.
    pub tangent: Matrix3<f64>,
    /// `c_33p / c_3333`: sensitivity of the thickness strain rate, `d33 = -coupling . d`.
    pub thickness_coupling: Vector3<f64>,
    pub iterations: usize,
}

impl PlaneStressPoint {
    pub fn sigma33(&self) -> f64 {
        self.stress[(2, 2)]
    }
}

fn sigma33_and_slope(fp_det: f64, bp_trace: f64, s: f64, mat: &MaterialParams) -> (f64, f64) {
    let j = fp_det * s;
    let i1 = bp_trace + s * s;
    let jm23 = j.powf(-2.0 / 3.0);
    let jm53 = jm23 / j;
    let i1_bar = jm23 * i1;
    let (dw, ddw) = mat.dev_derivatives(i1_bar);
    let k = mat.bulk_modulus;
    let dev33 = s * s - i1 / 3.0;
    let sigma = 2.0 * jm53 * dw * dev33 + 0.5 * k * (j - 1.0 / j);
    let di1_bar = jm23 * (2.0 * s - 2.0 / 3.0 * i1 / s);
    let slope = 2.0
        * (-5.0 / 3.0 * jm53 / s * dw * dev33 + jm53 * ddw * di1_bar * dev33 + jm53 * dw * 4.0 * s / 3.0)
        + 0.5 * k * (fp_det + fp_det / (j * j));
    (sigma, slope)
}

/// Solves `sigma33(F33) = 0` for the in-plane gradient `fp` by safeguarded
/// Newton iteration starting at `guess`, then condenses the tangent.
pub fn enforce_plane_stress(
    fp: &Matrix2<f64>,
    mat: &MaterialParams,
    guess: f64,
) -> Result<PlaneStressPoint> {
    let fp_det = fp.determinant();
    if !(fp_det > 0.0) {
        return Err(Error::InvertedMaterial { jacobian: fp_det });
    }
    let bp_trace = (fp * fp.transpose()).trace();
    let tol = PLANE_STRESS_TOL * mat.shear_modulus;

    let mut s = if guess.is_finite() && guess > 0.0 { guess } else { 1.0 };
    // sigma33 -> -inf as F33 -> 0 and grows without bound, so [lo, hi] brackets the root.
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::NAN;
    while iterations < PLANE_STRESS_MAX_ITERS {
        iterations += 1;
        let (g, dg) = sigma33_and_slope(fp_det, bp_trace, s, mat);
        residual = g;
        if g > 0.0 {
            hi = hi.min(s);
        } else {
            lo = lo.max(s);
        }
        let newton = s - g / dg;
        if g.abs() <= tol {
            // One more Newton step polishes the root to round-off.
            if dg > 0.0 && newton > 0.0 {
                s = newton;
            }
            converged = true;
            break;
        }
        s = if g < 0.0 && hi.is_infinite() {
            // Newton undershoots from the left, slowly when far below the root.
            if dg > 0.0 && newton > s && newton <= 1.25 * s {
                newton
            } else if dg > 0.0 {
                newton.max(4.0 * s)
            } else {
                4.0 * s
            }
        } else if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * s
        };
    }
    if !converged {
        return Err(Error::PlaneStress {
            residual,
            iterations,
        });
    }

    let state = DeformationState::from_plane(fp, s)?;
    let stress = cauchy_stress(&state, mat);
    let c = tangent_tensor(&state, mat);
    let c33 = c[(OUT_OF_PLANE, OUT_OF_PLANE)];
    let mut tangent = Matrix3::zeros();
    let mut coupling = Vector3::zeros();
    for (a, &pa) in IN_PLANE.iter().enumerate() {
        coupling[a] = c[(OUT_OF_PLANE, pa)] / c33;
        for (b, &pb) in IN_PLANE.iter().enumerate() {
            tangent[(a, b)] = c[(pa, pb)] - c[(pa, OUT_OF_PLANE)] * c[(OUT_OF_PLANE, pb)] / c33;
        }
    }
    Ok(PlaneStressPoint {
        f33: s,
        state,
        stress,
        stress_voigt: Vector3::new(stress[(0, 0)], stress[(1, 1)], stress[(0, 1)]),
        tangent,
        thickness_coupling: coupling,
        iterations,
    })
}

/// Voigt index of the symmetric pair `(i, j)`.
pub fn voigt_index(i: usize, j: usize) -> usize {
    VOIGT
        .iter()
        .position(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i))
        .expect("indices below 3")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    fn pdms() -> MaterialParams {
        MaterialParams::default()
    }

    #[test]
    fn coefficients_follow_chain_statistics() {
        let m = pdms();
        let n = 8.0;
        let g_bar = 0.68 / (1.0 + 3.0 / (5.0 * n) + 99.0 / (175.0 * n * n));
        assert_relative_eq!(m.g_bar(), g_bar, max_relative = 1e-15);
        assert_relative_eq!(m.a1(), g_bar / 2.0, max_relative = 1e-15);
        assert_relative_eq!(m.a2(), g_bar / 2.0 / 80.0, max_relative = 1e-15);
        assert_relative_eq!(m.a3(), 11.0 * g_bar / 2.0 / (525.0 * 64.0), max_relative = 1e-15);
    }

    #[test]
    fn identity_is_stress_and_energy_free() {
        let s = DeformationState::new(Matrix3::identity()).unwrap();
        assert!(strain_energy(&s, &pdms()).abs() < 1e-15);
        assert!(cauchy_stress(&s, &pdms()).norm() < 1e-15);
    }

    #[test]
    fn rotation_is_energy_free() {
        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1).into_inner();
        let s = DeformationState::new(r).unwrap();
        assert!(strain_energy(&s, &pdms()).abs() < 1e-13);
    }

    #[test]
    fn dilation_is_purely_volumetric() {
        let lambda = 1.1_f64;
        let s = DeformationState::new(Matrix3::identity() * lambda).unwrap();
        let j = lambda.powi(3);
        let expected = Matrix3::identity() * (3.42 / (2.0 * j) * (j * j - 1.0));
        assert_relative_eq!(cauchy_stress(&s, &pdms()), expected, max_relative = 1e-13);
    }

    #[test]
    fn inverted_gradient_is_rejected() {
        let f = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(DeformationState::new(f), Err(Error::InvertedMaterial { .. })));
    }

    #[test]
    fn small_strain_tangent_is_isotropic() {
        // Linearization at B = I: c = K I x I + 2 mu (Isym - I x I / 3).
        let m = pdms();
        let s = DeformationState::new(Matrix3::identity()).unwrap();
        let c = tangent_tensor(&s, &m);
        let mu = 2.0 * (m.a1() + 6.0 * m.a2() + 27.0 * m.a3());
        let k = m.bulk_modulus;
        let mut expected = Matrix6::zeros();
        for p in 0..3 {
            for q in 0..3 {
                expected[(p, q)] = k - 2.0 * mu / 3.0;
            }
            expected[(p, p)] += 2.0 * mu;
            expected[(p + 3, p + 3)] = mu;
        }
        assert_relative_eq!(c, expected, max_relative = 1e-8, epsilon = 1e-12);
        // 2 (a1 + 6 a2 + 27 a3) = Gbar (1 + 3/(5n) + 99/(175 n^2)) = G.
        assert_relative_eq!(mu, m.shear_modulus, max_relative = 1e-14);
    }

    #[test]
    fn volumetric_energy_has_unique_minimum_at_one() {
        for &j in &[0.2, 0.5, 0.9, 0.999, 1.001, 1.5, 3.0, 10.0] {
            assert!(volumetric_energy(j, 3.42) > 0.0, "J = {j}");
        }
        assert_eq!(volumetric_energy(1.0, 3.42), 0.0);
    }

    #[test]
    fn plane_stress_at_identity() {
        let p = enforce_plane_stress(&Matrix2::identity(), &pdms(), 1.0).unwrap();
        assert_relative_eq!(p.f33, 1.0, max_relative = 1e-14);
        assert!(p.stress.norm() < 1e-14);
    }

    #[test]
    fn equibiaxial_stretch_thins_the_sheet() {
        let m = pdms();
        let lambda = 1.3;
        let p = enforce_plane_stress(&(Matrix2::identity() * lambda), &m, 1.0).unwrap();
        assert!(p.f33 < 1.0);
        assert!(p.sigma33().abs() <= 1e-9 * m.shear_modulus);
        // Independent bracketing on sigma33(F33).
        let sigma33 = |s: f64| {
            let f = Matrix3::from_diagonal(&Vector3::new(lambda, lambda, s));
            cauchy_stress(&DeformationState::new(f).unwrap(), &m)[(2, 2)]
        };
        let (mut lo, mut hi) = (0.1, 1.0);
        assert!(sigma33(lo) < 0.0 && sigma33(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sigma33(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_relative_eq!(p.f33, 0.5 * (lo + hi), max_relative = 1e-12);
    }

    #[test]
    fn thickness_slope_matches_finite_difference() {
        let m = pdms();
        let fp = Matrix2::new(1.4, 0.2, -0.1, 0.9);
        let (det, tr) = (fp.determinant(), (fp * fp.transpose()).trace());
        for &s in &[0.4, 0.8, 1.0, 1.7] {
            let h = 1e-6;
            let (_, slope) = sigma33_and_slope(det, tr, s, &m);
            let fd = (sigma33_and_slope(det, tr, s + h, &m).0 - sigma33_and_slope(det, tr, s - h, &m).0) / (2.0 * h);
            assert_relative_eq!(slope, fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn poor_guesses_still_converge() {
        let m = pdms();
        let fp = Matrix2::new(2.0, 0.3, 0.0, 0.8);
        let reference = enforce_plane_stress(&fp, &m, 1.0).unwrap().f33;
        for &g in &[1e-3, 0.2, 5.0, 40.0, f64::NAN] {
            let p = enforce_plane_stress(&fp, &m, g).unwrap();
            assert_relative_eq!(p.f33, reference, max_relative = 1e-13);
        }
    }

    #[test]
    fn condensed_tangent_is_symmetric() {
        let fp = Matrix2::new(1.6, 0.25, -0.15, 0.85);
        let p = enforce_plane_stress(&fp, &pdms(), 1.0).unwrap();
        assert_relative_eq!(p.tangent, p.tangent.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn voigt_lookup() {
        assert_eq!(voigt_index(0, 0), 0);
        assert_eq!(voigt_index(2, 2), 2);
        assert_eq!(voigt_index(1, 0), 3);
        assert_eq!(voigt_index(2, 1), 4);
        assert_eq!(voigt_index(0, 2), 5);
    }
}
