use std::f64::consts::PI;

use meanflow::inviscid::euler_solve;
use meanflow::mean_fields::heat_smooth;
use meanflow::oracles::{cole_hopf_burgers, heat_solve, spectral_ns_2d};
use meanflow::runner::config::random_band;
use meanflow::torus::{Field, TorusGrid, VectorField};

fn max_diff<F: Field>(a: &F, b: &F) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Viscous Burgers by fourth-order central differences and classical RK4.
fn burgers_fd(v0: &[f64], nu: f64, t: f64, dt: f64) -> Vec<f64> {
    let n = v0.len();
    let h = 1.0 / n as f64;
    let rhs = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let at = |o: isize| v[(i as isize + o).rem_euclid(n as isize) as usize];
                let vx = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
                let vxx = (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h);
                nu * vxx - v[i] * vx
            })
            .collect()
    };
    let steps = (t / dt).round() as usize;
    let mut v = v0.to_vec();
    for _ in 0..steps {
        let stage = |k: &[f64], c: f64| -> Vec<f64> { v.iter().zip(k).map(|(a, b)| a + c * dt * b).collect() };
        let k1 = rhs(&v);
        let k2 = rhs(&stage(&k1, 0.5));
        let k3 = rhs(&stage(&k2, 0.5));
        let k4 = rhs(&stage(&k3, 1.0));
        for i in 0..n {
            v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    v
}

#[test]
fn cole_hopf_agrees_with_finite_differences() {
    let g = TorusGrid::line(1024).unwrap();
    let (nu, t) = (0.05, 0.3);
    let v0 = VectorField::from_fn(g, |p| [0.5 * (2.0 * PI * p[0]).sin() + 0.2, 0.0]);
    let exact = cole_hopf_burgers(&v0, nu, t).unwrap();
    let fd = burgers_fd(v0.slices()[0], nu, t, 5e-6);
    let err = exact.slices()[0].iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn cole_hopf_trivial_data() {
    let g = TorusGrid::line(64).unwrap();
    let c = VectorField::constant(g, &[0.4]);
    assert!(max_diff(&cole_hopf_burgers(&c, 0.1, 0.5).unwrap(), &c) < 1e-14);
    assert!(cole_hopf_burgers(&c, 0.0, 0.5).is_err());
}

#[test]
fn heat_solve_is_heat_smoothing_at_half_sigma_squared() {
    let g = TorusGrid::square(32).unwrap();
    let u = random_band(g, 5, 31, 1.0).unwrap();
    let sigma = 0.35;
    for t in [0.0, 0.1, 0.4] {
        let a = heat_solve(&u, 0.5 * sigma * sigma, t).unwrap();
        let b = heat_smooth(&u, sigma, t).unwrap();
        assert!(max_diff(&a, &b) < 1e-14);
    }
}

#[test]
fn taylor_green_decays_exponentially() {
    let g = TorusGrid::square(32).unwrap();
    let u0 = VectorField::from_fn(g, |p| {
        let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        [x.sin() * y.cos(), -x.cos() * y.sin()]
    });
    let nu = 0.02;
    let run = spectral_ns_2d(&u0, nu, 0.5, 1e-3, 100).unwrap();
    for s in &run.states {
        let expected = u0.scale((-8.0 * PI * PI * nu * s.t).exp());
        assert!(max_diff(&s.velocity, &expected) < 1e-8, "t = {}", s.t);
    }
}

#[test]
fn inviscid_limit_is_euler() {
    let g = TorusGrid::square(32).unwrap();
    let u0 = random_band(g, 4, 32, 0.5).unwrap();
    let ns = spectral_ns_2d(&u0, 0.0, 0.2, 1e-3, 50).unwrap();
    let eu = euler_solve(&u0, 0.2, 1e-3, 50).unwrap();
    for (a, b) in ns.states.iter().zip(&eu.states) {
        assert!(max_diff(&a.velocity, &b.velocity) < 1e-10);
    }
}

#[test]
fn enstrophy_never_grows() {
    let g = TorusGrid::square(32).unwrap();
    let u0 = random_band(g, 6, 33, 1.0).unwrap();
    let run = spectral_ns_2d(&u0, 0.01, 0.3, 1e-3, 10).unwrap();
    for w in run.enstrophy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    for w in run.energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}
