use std::f64::consts::PI;

use meanflow::inviscid::{euler_solve, flow_map, hopf_solve, shock_time, HopfSolution};
use meanflow::torus::{advect, curl, shift_by, Field, ScalarField, TorusGrid, VectorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sine(grid: TorusGrid, a: f64) -> VectorField {
    VectorField::from_fn(grid, |p| [a * (2.0 * PI * p[0]).sin(), 0.0])
}

fn max_diff<F: Field>(a: &F, b: &F) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Hopf solution from a dense family of straight characteristics
/// `y = m + t v0(m)`, linearly interpolated between the two bracketing feet.
fn brute_force_hopf(v0: impl Fn(f64) -> f64, t: f64, count: usize, points: &[f64]) -> Vec<f64> {
    let feet: Vec<f64> = (0..=count).map(|j| j as f64 / count as f64).collect();
    let ys: Vec<f64> = feet.iter().map(|&m| m + t * v0(m)).collect();
    points
        .iter()
        .map(|&x| {
            // bring x into the window covered by the characteristics
            let mut x = x;
            while x < ys[0] {
                x += 1.0;
            }
            while x >= ys[count] {
                x -= 1.0;
            }
            let j = ys.partition_point(|&y| y <= x) - 1;
            let w = (x - ys[j]) / (ys[j + 1] - ys[j]);
            (1.0 - w) * v0(feet[j]) + w * v0(feet[j + 1])
        })
        .collect()
}

#[test]
fn shock_times_of_sines() {
    let g = TorusGrid::line(256).unwrap();
    assert!(shock_time(&VectorField::constant(g, &[0.3])).is_infinite());
    assert!((shock_time(&sine(g, 1.0)) - 1.0 / (2.0 * PI)).abs() < 1e-3);
    assert!((shock_time(&sine(g, 0.5)) - 1.0 / PI).abs() < 2e-3);
}

#[test]
fn hopf_matches_dense_characteristics() {
    let g = TorusGrid::line(256).unwrap();
    let v = hopf_solve(&sine(g, 1.0), 0.05).unwrap();
    let xs: Vec<f64> = (0..g.len()).map(|i| g.point(i)[0]).collect();
    let oracle = brute_force_hopf(|m| (2.0 * PI * m).sin(), 0.05, 1_000_000, &xs);
    let err = v.components()[0]
        .values()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn hopf_constant_data_translates() {
    let g = TorusGrid::line(64).unwrap();
    let c = VectorField::constant(g, &[0.7]);
    assert!(max_diff(&hopf_solve(&c, 0.4).unwrap(), &c) < 1e-15);
}

#[test]
fn hopf_galilean_shift() {
    let g = TorusGrid::line(128).unwrap();
    let v0 = sine(g, 0.5);
    let c = 0.37;
    let boosted = HopfSolution::new(v0.add(&VectorField::constant(g, &[c])).unwrap());
    let base = HopfSolution::new(v0);
    let t = 0.2;
    let vb = boosted.solve(t).unwrap();
    let mut err: f64 = 0.0;
    for i in 0..g.len() {
        let m = g.point(i)[0];
        let old = base.velocity_at(t, &[m - c * t]).unwrap()[0];
        err = err.max((vb.components()[0].values()[i] - old - c).abs());
    }
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn hopf_time_residual_is_second_order() {
    let t = 0.1;
    let residual = |n: usize, dt: f64| {
        let g = TorusGrid::line(n).unwrap();
        let h = HopfSolution::new(sine(g, 0.5));
        let (a, b, c) = (h.solve(t - dt).unwrap(), h.solve(t).unwrap(), h.solve(t + dt).unwrap());
        let dvdt = c.sub(&a).unwrap().scale(0.5 / dt);
        dvdt.add(&advect(&b, &b).unwrap()).unwrap().max_component_abs()
    };
    let r1 = residual(256, 2e-3);
    let r2 = residual(512, 1e-3);
    let order = (r1 / r2).log2();
    assert!((1.8..2.3).contains(&order), "order {order}");
}

#[test]
fn flow_map_trivial_cases() {
    let g = TorusGrid::line(64).unwrap();
    let c = VectorField::constant(g, &[0.3]);
    let d = flow_map(&c, 0.5).unwrap();
    assert!(d.components()[0].values().iter().all(|x| (x - 0.15).abs() < 1e-15));
    assert!(flow_map(&sine(g, 1.0), 0.0).unwrap().max_abs() == 0.0);
}

#[test]
fn flow_map_commutes_with_lattice_relabeling() {
    let g = TorusGrid::line(128).unwrap();
    let v0 = sine(g, 0.5);
    let j = 17;
    let rolled = shift_by(&v0, &[j as f64 * g.spacing()]);
    let a = flow_map(&rolled, 0.2).unwrap();
    let b = flow_map(&v0, 0.2).unwrap();
    let (av, bv) = (a.components()[0].values(), b.components()[0].values());
    let err = (0..g.len())
        .map(|i| (av[i] - bv[(i + j) % g.len()]).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn taylor_green_is_steady() {
    let g = TorusGrid::square(64).unwrap();
    let psi = ScalarField::from_fn(g, |p| (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin());
    let u0 = VectorField::from_stream_function(&psi).unwrap();
    let run = euler_solve(&u0, 1.0, 1e-3, 1000).unwrap();
    let last = &run.states.last().unwrap().velocity;
    assert!(max_diff(last, &u0) < 1e-8);
}

#[test]
fn band_limited_euler_conserves_energy_and_enstrophy() {
    let g = TorusGrid::square(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut modes = Vec::new();
    for a in -8i64..=8 {
        for b in 0i64..=8 {
            if (b == 0 && a <= 0) || a * a + b * b > 64 {
                continue;
            }
            let k2 = (a * a + b * b) as f64;
            modes.push((a as f64, b as f64, rng.gen_range(-1.0..1.0) / k2.powf(1.5), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    let psi = ScalarField::from_fn(g, |p| {
        modes.iter().map(|(a, b, c, ph)| c * (2.0 * PI * (a * p[0] + b * p[1]) + ph).sin()).sum()
    });
    let u0 = VectorField::from_stream_function(&psi).unwrap();
    let u0 = u0.scale(0.5 / u0.max_abs());
    let run = euler_solve(&u0, 1.0, 1e-3, 100).unwrap();
    let energy = |u: &VectorField| u.l2_norm().powi(2);
    let enstrophy = |u: &VectorField| curl(u).unwrap().l2_norm().powi(2);
    let (e0, z0) = (energy(&u0), enstrophy(&u0));
    for s in &run.states {
        assert!((energy(&s.velocity) / e0 - 1.0).abs() < 1e-6);
        assert!((enstrophy(&s.velocity) / z0 - 1.0).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hopf_translation_equivariance(x in -1.0f64..1.0, t in 0.0f64..0.25) {
        let g = TorusGrid::line(128).unwrap();
        let v0 = sine(g, 0.5).add(&VectorField::from_fn(g, |p| [0.1 * (6.0 * PI * p[0]).cos(), 0.0])).unwrap();
        let base = HopfSolution::new(v0.clone());
        prop_assume!(t < base.horizon());
        let shifted = hopf_solve(&shift_by(&v0, &[x]), t).unwrap();
        for i in 0..g.len() {
            let m = g.point(i)[0];
            let direct = base.velocity_at(t, &[m + x]).unwrap()[0];
            prop_assert!((shifted.components()[0].values()[i] - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn hopf_transport_identity(t in 0.0f64..0.25, seed in any::<u64>()) {
        let g = TorusGrid::line(64).unwrap();
        let h = HopfSolution::new(sine(g, 0.5));
        prop_assume!(t < h.horizon());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let m: f64 = rng.gen_range(0.0..1.0);
            let y = h.forward_map(t, &[m]);
            let v = h.velocity_at(t, &y).unwrap()[0];
            prop_assert!((v - 0.5 * (2.0 * PI * m).sin()).abs() < 1e-10);
        }
    }
}
