use approx::assert_relative_eq;
use cfcs::material::{
    cauchy_stress, enforce_plane_stress, strain_energy, tangent_tensor, DeformationState, MaterialParams,
};
use nalgebra::{Matrix2, Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn pdms() -> MaterialParams {
    MaterialParams::default()
}

#[test]
fn energy_at_uniaxial_plane_stress_state() {
    // 40-digit evaluation of the energy and the sigma33 = 0 root.
    let p = enforce_plane_stress(&Matrix2::new(1.2, 0.0, 0.0, 1.0), &pdms(), 1.0).unwrap();
    assert_relative_eq!(p.f33, 0.879_709_311_333_812_1, max_relative = 1e-13);
    assert_relative_eq!(strain_energy(&p.state, &pdms()), 0.039_222_988_107_220_41, max_relative = 1e-12);
}

#[test]
fn simple_shear_stress_from_energy() {
    let m = pdms();
    let mut f = Matrix3::identity();
    f[(0, 1)] = 0.1;
    let s = DeformationState::new(f).unwrap();
    // sigma = (2/J) dPsi/dB B, with Psi written as a function of a symmetric B.
    let psi_b = |b: Matrix3<f64>| {
        let j = b.determinant().sqrt();
        let ib = j.powf(-2.0 / 3.0) * b.trace();
        m.a1() * (ib - 3.0) + m.a2() * (ib * ib - 9.0) + m.a3() * (ib.powi(3) - 27.0)
            + cfcs::material::volumetric_energy(j, m.bulk_modulus)
    };
    let h = 1e-6;
    let mut d = Matrix3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            let mut e = Matrix3::zeros();
            e[(i, k)] += 0.5 * h;
            e[(k, i)] += 0.5 * h;
            d[(i, k)] = (psi_b(s.b + e) - psi_b(s.b - e)) / (2.0 * h);
        }
    }
    let fd = d * s.b * (2.0 / s.j);
    let sigma = cauchy_stress(&s, &m);
    assert!((sigma - fd).norm() <= 1e-6 * fd.norm());
}

/// Energy minimized over the two transverse stretches at a fixed axial stretch.
fn relaxed_energy(m: &MaterialParams, stretch: f64) -> f64 {
    let psi = |a: f64, b: f64| strain_energy(&DeformationState::new(Matrix3::from_diagonal(&Vector3::new(stretch, a, b))).unwrap(), m);
    let inner = |a: f64| golden(|b| psi(a, b), 0.3, 1.5).1;
    let a = golden(inner, 0.3, 1.5).0;
    inner(a)
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-11 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Nominal axial stress of the plane-stress model with a traction-free lateral edge.
fn plane_stress_nominal(m: &MaterialParams, stretch: f64) -> f64 {
    let sigma22 = |a: f64| {
        let p = enforce_plane_stress(&Matrix2::new(stretch, 0.0, 0.0, a), m, 1.0).unwrap();
        p.stress[(1, 1)]
    };
    let (mut lo, mut hi) = (0.2, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sigma22(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = enforce_plane_stress(&Matrix2::new(stretch, 0.0, 0.0, 0.5 * (lo + hi)), m, 1.0).unwrap();
    p.stress[(0, 0)] * p.state.j / stretch
}

#[test]
fn uniaxial_curve_matches_relaxed_energy() {
    let m = pdms();
    assert!(plane_stress_nominal(&m, 1.0).abs() < 1e-10);
    for i in 1..=10 {
        let stretch = 1.0 + 0.1 * i as f64;
        let h = 1e-4;
        let oracle = (relaxed_energy(&m, stretch + h) - relaxed_energy(&m, stretch - h)) / (2.0 * h);
        let model = plane_stress_nominal(&m, stretch);
        assert_relative_eq!(model, oracle, max_relative = 1e-4);
    }
}

fn admissible_f() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform9(-0.3..0.3f64).prop_filter_map("inverted", |a| {
        let f = Matrix3::identity() + Matrix3::from_row_slice(&a);
        (f.determinant() > 0.2).then_some(f)
    })
}

proptest! {
    #[test]
    fn frame_indifference(f in admissible_f(), axis in prop::array::uniform3(-1.0..1.0f64), angle in -3.0..3.0f64) {
        let m = pdms();
        let v = Vector3::from(axis);
        prop_assume!(v.norm() > 1e-3);
        let q = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(v), angle).into_inner();
        let s = DeformationState::new(f).unwrap();
        let r = DeformationState::new(q * f).unwrap();
        let psi = strain_energy(&s, &m);
        prop_assert!((strain_energy(&r, &m) - psi).abs() <= 1e-12 * psi.abs().max(1.0));
        let sigma = cauchy_stress(&s, &m);
        let rotated = cauchy_stress(&r, &m);
        prop_assert!((rotated - q * sigma * q.transpose()).norm() <= 1e-12 * sigma.norm().max(1.0));
    }

    #[test]
    fn tangent_has_major_symmetry(f in admissible_f()) {
        let c = tangent_tensor(&DeformationState::new(f).unwrap(), &pdms());
        prop_assert!((c - c.transpose()).amax() <= 1e-13 * c.amax());
    }
}
