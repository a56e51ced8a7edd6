use cfcs::config::{presets, RunConfig};
use cfcs::driver::Study;
use cfcs::fem::ThicknessMode;
use cfcs::mesh::PoreSpec;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 8x12 elements on the 10x16 mm domain with a central 2x2-element pore.
fn small_config(mode: ThicknessMode, targets: &[f64]) -> RunConfig {
    let mut c = presets::load("cfcs1").unwrap().with_resolution(8, 12);
    c.domain.pores = vec![PoreSpec {
        center: [5.0, 8.0],
        width: 2.5,
        height: 16.0 / 6.0,
        target_hd: targets[0],
        weight: 1.0,
    }];
    c.solver.thickness_mode = mode;
    c.solver.relative_tolerance = 1e-12;
    c
}

fn random_design(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.1..0.9)).collect()
}

fn check_gradient(config: RunConfig, seed: u64, samples: usize) -> f64 {
    let study = Study::new(config).unwrap();
    let n = study.num_elements();
    let z = random_design(n, seed);
    let base = study.evaluate(&z).unwrap();
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let mut worst: f64 = 0.0;
    for e in sample(&mut rng, n, samples) {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[e] += h;
        zm[e] -= h;
        let fd = (study.evaluate(&zp).unwrap().f0 - study.evaluate(&zm).unwrap().f0) / (2.0 * h);
        let rel = (base.df0_dz[e] - fd).abs() / fd.abs();
        assert!(rel <= 1e-4, "element {e}: adjoint {} vs fd {fd} (rel {rel:.2e})", base.df0_dz[e]);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn adjoint_matches_finite_differences_at_full_stretch() {
    let worst = check_gradient(small_config(ThicknessMode::Deformed, &[2.0]), 7, 24);
    eprintln!("worst relative error {worst:.3e}");
}

#[test]
fn adjoint_matches_finite_differences_for_contracting_target() {
    check_gradient(small_config(ThicknessMode::Deformed, &[0.0]), 19, 20);
}

#[test]
fn adjoint_matches_finite_differences_with_reference_thickness() {
    check_gradient(small_config(ThicknessMode::Reference, &[2.0]), 3, 20);
}

#[test]
fn volume_gradient_matches_finite_differences() {
    let study = Study::new(small_config(ThicknessMode::Deformed, &[2.0])).unwrap();
    let n = study.num_elements();
    let z = random_design(n, 5);
    let base = study.evaluate(&z).unwrap();
    let vol = |z: &[f64]| {
        let zp = study.filter.apply(z);
        cfcs::sensitivity::volume_constraint(&study.mesh, &zp, &study.map, 0.6).value
    };
    for e in [0, 13, n / 2, n - 1] {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[e] += 1e-6;
        zm[e] -= 1e-6;
        let fd = (vol(&zp) - vol(&zm)) / 2e-6;
        assert!((base.dg_dz[e] - fd).abs() <= 1e-8 * fd.abs());
    }
}

#[test]
fn undeformed_state_has_zero_sensitivity() {
    let mut c = small_config(ThicknessMode::Deformed, &[2.0]);
    c.domain.stretch = 0.0;
    let study = Study::new(c).unwrap();
    let eval = study.evaluate(&random_design(study.num_elements(), 2)).unwrap();
    assert!(eval.df0_dz.iter().all(|g| *g == 0.0));
}
