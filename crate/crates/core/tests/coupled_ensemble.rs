use std::f64::consts::PI;
use std::sync::Arc;

use meanflow::ensemble::{
    ensemble_force, ensemble_mean_shifted, run_meanfield_experiment, step_forced_system, EnsembleState,
    MeanFieldSettings,
};
use meanflow::mean_fields::{heat_smooth, mc_smooth, reynolds_stress};
use meanflow::runner::config::random_band;
use meanflow::stochastic::sample_wiener;
use meanflow::torus::{advect, leray_project, shift_by, Field, TorusGrid, VectorField};
use meanflow::Error;

fn max_diff<F: Field>(a: &F, b: &F) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn taylor_green(g: TorusGrid) -> VectorField {
    VectorField::from_fn(g, |p| {
        let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        [x.sin() * y.cos(), -x.cos() * y.sin()]
    })
}

/// Realizations that differ from path to path, built from a few band fields.
fn mixed_realizations(g: TorusGrid, m: usize) -> Vec<VectorField> {
    (0..m)
        .map(|p| random_band(g, 3, 100 + p as u64 % 5, 0.3 + 0.1 * (p % 3) as f64).unwrap())
        .collect()
}

/// `P E[(Ŭ·∇)Ŭ]` assembled from real-space shifts and advection, path by path.
fn direct_stress(us: &[VectorField], shifts: &[[f64; 2]]) -> VectorField {
    let g = us[0].grid();
    let back: Vec<VectorField> = us.iter().zip(shifts).map(|(u, s)| shift_by(u, &[-s[0], -s[1]])).collect();
    let m = us.len() as f64;
    let mut mean = VectorField::zeros(g);
    for b in &back {
        mean = mean.add(b).unwrap();
    }
    let mean = mean.scale(1.0 / m);
    let mut acc = VectorField::zeros(g);
    for b in &back {
        let f = b.sub(&mean).unwrap();
        acc = acc.add(&advect(&f, &f).unwrap()).unwrap();
    }
    leray_project(&acc.scale(1.0 / m)).projected
}

#[test]
fn force_matches_a_direct_assembly() {
    let g = TorusGrid::square(16).unwrap();
    let m = 12;
    let w = Arc::new(sample_wiener(m, 2, 0.01, 0.1, 21).unwrap().with_sigma(0.4));
    let us = mixed_realizations(g, m);
    for step in [1, 4, 10] {
        let state = EnsembleState::from_realizations(&us, w.clone(), step).unwrap();
        let shifts: Vec<[f64; 2]> = (0..m).map(|p| w.shift(p, step)).collect();
        let f = ensemble_force(&state).unwrap();
        let direct = direct_stress(&us, &shifts);
        assert!(max_diff(&f.stress, &direct) < 1e-12 * direct.max_abs().max(1.0));
        for (p, s) in shifts.iter().enumerate() {
            assert!(max_diff(&f.forces[p], &shift_by(&direct, s)) < 1e-11);
        }
    }
}

#[test]
fn identical_realizations_reduce_to_the_smoothed_field() {
    let g = TorusGrid::square(16).unwrap();
    let (sigma, t, m) = (0.3, 0.2, 4_096);
    let w = Arc::new(sample_wiener(m, 2, 0.01, t, 22).unwrap().with_sigma(sigma));
    let u = taylor_green(g);
    let state = EnsembleState::from_realizations(&vec![u.clone(); m], w.clone(), 20).unwrap();
    let mean = ensemble_mean_shifted(&state);
    let mc = mc_smooth(&u, &w, t).unwrap();
    assert!(max_diff(&mean, &mc.mean) < 1e-12);
    let heat = heat_smooth(&u, sigma, t).unwrap();
    assert!(max_diff(&mean, &heat) < 5.0 * mc.max_se());

    let band = random_band(g, 4, 23, 0.5).unwrap();
    let state = EnsembleState::from_realizations(&vec![band.clone(); m], w.clone(), 20).unwrap();
    let own_mean = ensemble_mean_shifted(&state);
    let g_field = ensemble_force(&state).unwrap().stress;
    let st = reynolds_stress(&band, &own_mean, &w, t, true).unwrap();
    assert!(max_diff(&g_field, &st.mean) < 1e-11);
}

#[test]
fn path_relabeling_leaves_the_mean_and_stress_unchanged() {
    let g = TorusGrid::square(16).unwrap();
    let m = 9;
    let w = sample_wiener(m, 2, 0.01, 0.1, 24).unwrap().with_sigma(0.5);
    let us = mixed_realizations(g, m);
    let perm = [3, 7, 0, 8, 1, 5, 2, 6, 4];
    let wp = w.permuted(&perm).unwrap();
    let up: Vec<VectorField> = perm.iter().map(|&p| us[p].clone()).collect();
    let a = EnsembleState::from_realizations(&us, Arc::new(w), 6).unwrap();
    let b = EnsembleState::from_realizations(&up, Arc::new(wp), 6).unwrap();
    assert!(max_diff(&ensemble_mean_shifted(&a), &ensemble_mean_shifted(&b)) < 1e-13);
    let (fa, fb) = (ensemble_force(&a).unwrap(), ensemble_force(&b).unwrap());
    assert!(max_diff(&fa.stress, &fb.stress) < 1e-12);
    for (i, &p) in perm.iter().enumerate() {
        assert!(max_diff(&fb.forces[i], &fa.forces[p]) < 1e-12);
    }
    let (sa, sb) = (step_forced_system(&a, 0.01).unwrap(), step_forced_system(&b, 0.01).unwrap());
    for (i, &p) in perm.iter().enumerate() {
        assert!(max_diff(&sb.realization(i), &sa.realization(p)) < 1e-12);
    }
}

#[test]
fn forces_pulled_back_average_to_the_stress() {
    let g = TorusGrid::square(16).unwrap();
    let m = 16;
    let w = Arc::new(sample_wiener(m, 2, 0.01, 0.1, 25).unwrap().with_sigma(0.3));
    let state = EnsembleState::from_realizations(&mixed_realizations(g, m), w.clone(), 8).unwrap();
    let f = ensemble_force(&state).unwrap();
    let mut acc = VectorField::zeros(g);
    for p in 0..m {
        let s = w.shift(p, 8);
        acc = acc.add(&shift_by(&f.forces[p], &[-s[0], -s[1]])).unwrap();
    }
    assert!(max_diff(&acc.scale(1.0 / m as f64), &f.stress) < 1e-12);
}

#[test]
fn zero_noise_pipeline_has_no_stress() {
    let g = TorusGrid::square(16).unwrap();
    let u0 = random_band(g, 3, 26, 0.5).unwrap();
    let w = Arc::new(sample_wiener(4, 2, 0.01, 0.05, 27).unwrap().with_sigma(0.0));
    let mut s = EnsembleState::new(&u0, w).unwrap();
    for _ in 0..5 {
        assert!(ensemble_force(&s).unwrap().stress.max_abs() < 1e-15);
        s = step_forced_system(&s, 0.01).unwrap();
    }
    let e = meanflow::inviscid::euler_solve(&u0, 0.05, 0.01, 5).unwrap();
    assert!(max_diff(&ensemble_mean_shifted(&s), &e.states.last().unwrap().velocity) < 1e-12);
}

#[test]
fn experiment_from_rest_stays_at_rest() {
    let g = TorusGrid::square(16).unwrap();
    let settings = MeanFieldSettings {
        sigma: 0.3,
        horizon: 0.05,
        dt: 0.01,
        paths: 4,
        seed: 28,
        report_times: vec![0.02],
        residual_lag: 1,
    };
    let out = run_meanfield_experiment(&VectorField::zeros(g), &settings).unwrap();
    assert!(out.mean.iter().all(|u| u.max_abs() == 0.0));
    assert_eq!(out.ns_report.max_linf(), 0.0);

    let one = MeanFieldSettings { paths: 1, ..settings };
    assert!(matches!(run_meanfield_experiment(&taylor_green(g), &one), Err(Error::Config(_))));
}

/// `E[(Ŭ·∇)Ŭ]` with `Ŭ = X(m − z) − E X(m − z)`, `z ~ N(0, s² I)`, by a
/// tensor trapezoidal rule over the shift.
fn stress_by_quadrature(x: &VectorField, s: f64) -> VectorField {
    let g = x.grid();
    let nodes = 61;
    let half = 7.0 * s;
    let h = 2.0 * half / (nodes - 1) as f64;
    let z: Vec<f64> = (0..nodes).map(|k| -half + k as f64 * h).collect();
    let w: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let end = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
            end * h * (-v * v / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
        })
        .collect();
    let mut mean = VectorField::zeros(g);
    let mut second = VectorField::zeros(g);
    for (a, wa) in z.iter().zip(&w) {
        for (b, wb) in z.iter().zip(&w) {
            let y = shift_by(x, &[-a, -b]);
            mean = mean.add(&y.scale(wa * wb)).unwrap();
            second = second.add(&advect(&y, &y).unwrap().scale(wa * wb)).unwrap();
        }
    }
    second.sub(&advect(&mean, &mean).unwrap()).unwrap()
}

// Taylor–Green fluctuations stay on one shell, so the stress vanishes there
// even before projection; the band field exercises a non-trivial stress.
#[test]
fn force_against_shift_quadrature() {
    let g = TorusGrid::square(16).unwrap();
    let (sigma, t, m, step) = (0.3, 0.2, 4_096, 20);
    let w = Arc::new(sample_wiener(m, 2, 0.01, t, 29).unwrap().with_sigma(sigma));
    for u in [taylor_green(g), random_band(g, 2, 30, 0.5).unwrap()] {
        let state = EnsembleState::from_realizations(&vec![u.clone(); m], w.clone(), step).unwrap();
        let force = ensemble_force(&state).unwrap().stress;
        let quad = stress_by_quadrature(&u, sigma * t.sqrt());
        let raw = reynolds_stress(&u, &heat_smooth(&u, sigma, t).unwrap(), &w, t, false).unwrap();
        let projected = reynolds_stress(&u, &heat_smooth(&u, sigma, t).unwrap(), &w, t, true).unwrap();
        let quad_projected = leray_project(&quad).projected;
        for k in [0, 37, 201] {
            for c in 0..2 {
                let (mc, se, q) = (raw.mean.slices()[c][k], raw.se.slices()[c][k], quad.slices()[c][k]);
                assert!((mc - q).abs() <= 5.0 * se + 1e-12, "probe {k}: {mc} ± {se} vs {q}");
                let (f, se, q) = (force.slices()[c][k], projected.se.slices()[c][k], quad_projected.slices()[c][k]);
                assert!((f - q).abs() <= 5.0 * se + 1e-12, "probe {k}: {f} ± {se} vs {q}");
            }
        }
    }
}
