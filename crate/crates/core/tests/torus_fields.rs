use std::f64::consts::PI;

use meanflow::torus::{
    advect_scalar, curl, divergence, gradient, l2_inner, laplacian, leray_project, partial, shift_by, transform_pair,
    Field, ScalarField, TorusGrid, VectorField, EPS_SPEC,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(grid: TorusGrid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::new(grid, v).unwrap()
}

/// Band-limited random data: a handful of low modes with random phases.
fn low_modes(grid: TorusGrid, seed: u64, kmax: i64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            modes.push((a as f64, b as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    ScalarField::from_fn(grid, |p| {
        modes
            .iter()
            .map(|(a, b, c, ph)| c * (2.0 * PI * (a * p[0] + b * p[1]) + ph).cos())
            .sum()
    })
}

fn low_vector(grid: TorusGrid, seed: u64) -> VectorField {
    VectorField::new(vec![low_modes(grid, seed, 3), low_modes(grid, seed.wrapping_add(1), 3)]).unwrap()
}

fn max_diff<F: Field>(a: &F, b: &F) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn white_noise_round_trip() {
    let g = TorusGrid::line(64).unwrap();
    let f = noise(g, 11);
    let (_, back) = transform_pair(&f);
    assert!(max_diff(&f, &back) < 1e-12);
}

#[test]
fn parseval() {
    let g = TorusGrid::square(32).unwrap();
    let f = noise(g, 12);
    let spec = f.spectrum();
    let parseval: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum();
    let direct = l2_inner(&f, &f).unwrap();
    assert!((direct - parseval).abs() < 1e-12, "{direct} vs {parseval}");
}

#[test]
fn inner_products_of_sines() {
    let g = TorusGrid::line(64).unwrap();
    let s = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
    let c = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).cos());
    assert!((l2_inner(&s, &s).unwrap() - 0.5).abs() < 1e-14);
    assert!(l2_inner(&s, &c).unwrap().abs() < 1e-14);
}

#[test]
fn derivatives_of_sine() {
    let g = TorusGrid::line(64).unwrap();
    let s = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
    let dx = ScalarField::from_fn(g, |p| 2.0 * PI * (2.0 * PI * p[0]).cos());
    assert!(max_diff(&partial(&s, 0), &dx) < EPS_SPEC);
    let lap = s.scale(-4.0 * PI * PI);
    assert!(max_diff(&laplacian(&s), &lap) < EPS_SPEC);
}

#[test]
fn pure_gradient_projects_to_zero() {
    let g = TorusGrid::square(64).unwrap();
    let phi = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin());
    let d = leray_project(&gradient(&phi));
    assert!(d.projected.max_abs() < EPS_SPEC);
    assert!(max_diff(&d.pressure, &phi) < EPS_SPEC);
}

#[test]
fn rotated_gradient_is_kept() {
    let g = TorusGrid::square(64).unwrap();
    let psi = low_modes(g, 3, 4);
    let y = VectorField::from_stream_function(&psi).unwrap();
    let d = leray_project(&y);
    assert!(max_diff(&d.projected, &y) < EPS_SPEC);
    assert!(d.pressure.max_abs() < EPS_SPEC);
}

#[test]
fn quarter_and_third_shifts() {
    let g = TorusGrid::line(64).unwrap();
    let s = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin());
    let c = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).cos());
    assert!(max_diff(&shift_by(&s, &[0.25]), &c) < 1e-13);
    let third = ScalarField::from_fn(g, |p| (2.0 * PI * (p[0] + 1.0 / 3.0)).sin());
    assert!(max_diff(&shift_by(&s, &[1.0 / 3.0]), &third) < 1e-12);
    assert!(max_diff(&shift_by(&s, &[3.0]), &s) < 1e-13);
}

#[test]
fn taylor_green_transports_its_vorticity_trivially() {
    let g = TorusGrid::square(64).unwrap();
    let psi = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin());
    let u = VectorField::from_stream_function(&psi).unwrap();
    let w = curl(&u).unwrap();
    assert!(advect_scalar(&u, &w).unwrap().max_abs() < EPS_SPEC * w.max_abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projector_is_idempotent_and_orthogonal(seed in any::<u64>()) {
        let g = TorusGrid::square(32).unwrap();
        let y = VectorField::new(vec![noise(g, seed), noise(g, seed ^ 0xabc)]).unwrap();
        let d = leray_project(&y);
        let twice = leray_project(&d.projected).projected;
        prop_assert!(max_diff(&twice, &d.projected) < EPS_SPEC);
        let gp = gradient(&d.pressure);
        let inner = l2_inner(&d.projected, &gp).unwrap().abs();
        prop_assert!(inner <= EPS_SPEC * d.projected.l2_norm() * gp.l2_norm() + 1e-15);
    }

    #[test]
    fn shift_group_law(seed in any::<u64>(), x in -2.0f64..2.0, y in -2.0f64..2.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = TorusGrid::square(32).unwrap();
        let f = low_modes(g, seed, 4);
        let two = shift_by(&shift_by(&f, &[x, y]), &[a, b]);
        let one = shift_by(&f, &[x + a, y + b]);
        prop_assert!(max_diff(&two, &one) < EPS_SPEC);
    }

    #[test]
    fn shifts_commute_with_multipliers(seed in any::<u64>(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let g = TorusGrid::square(32).unwrap();
        let f = low_modes(g, seed, 4);
        let s = [x, y];
        prop_assert!(max_diff(&shift_by(&gradient(&f), &s), &gradient(&shift_by(&f, &s))) < EPS_SPEC * 100.0);
        prop_assert!(max_diff(&shift_by(&laplacian(&f), &s), &laplacian(&shift_by(&f, &s))) < EPS_SPEC * 1e3);
        let v = low_vector(g, seed);
        let a = shift_by(&leray_project(&v).projected, &s);
        let b = leray_project(&shift_by(&v, &s)).projected;
        prop_assert!(max_diff(&a, &b) < EPS_SPEC);
    }

    #[test]
    fn shifted_solenoidal_fields_stay_solenoidal(seed in any::<u64>(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let g = TorusGrid::square(32).unwrap();
        let u = VectorField::from_stream_function(&low_modes(g, seed, 4)).unwrap();
        prop_assert!(divergence(&shift_by(&u, &[x, y])).max_abs() < EPS_SPEC);
    }
}
