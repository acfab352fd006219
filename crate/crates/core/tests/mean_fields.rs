use std::f64::consts::PI;

use meanflow::inviscid::{euler_solve, HopfSolution};
use meanflow::mean_fields::{
    burgers_residual, decompose_expected_advection, fluctuation_field, heat_smooth, ito_transport_check, mc_smooth,
    ns_residual, projected_backward_second_derivative, reynolds_residual, reynolds_stress, smooth_by_expectation,
    Orientation, ReynoldsForm, Smoothing,
};
use meanflow::oracles::{cole_hopf_burgers, spectral_ns_2d};
use meanflow::runner::config::random_band;
use meanflow::stochastic::{build_perturbed_flow, sample_wiener, BaseFlow, EulerFlowMaps};
use meanflow::torus::{divergence, laplacian, leray_project, Field, ScalarField, TorusGrid, VectorField, EPS_SPEC};

fn line_sine(g: TorusGrid, a: f64) -> VectorField {
    VectorField::from_fn(g, |p| [a * (2.0 * PI * p[0]).sin(), 0.0])
}

fn taylor_green(g: TorusGrid) -> VectorField {
    VectorField::from_fn(g, |p| {
        let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        [x.sin() * y.cos(), -x.cos() * y.sin()]
    })
    .assert_divfree()
    .unwrap()
}

fn max_diff<F: Field>(a: &F, b: &F) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn constants_are_fixed_points_of_smoothing() {
    let g = TorusGrid::square(16).unwrap();
    let c = VectorField::constant(g, &[0.4, -1.1]);
    let ens = sample_wiener(64, 2, 0.01, 0.5, 1).unwrap().with_sigma(0.7);
    for t in [0.0, 0.2, 0.5] {
        let h = smooth_by_expectation(&c, 0.7, t, Smoothing::HeatKernel).unwrap();
        let m = smooth_by_expectation(&c, 0.7, t, Smoothing::MonteCarlo(&ens)).unwrap();
        assert!(max_diff(&h, &c) < 1e-15 && max_diff(&m, &c) < 1e-14);
    }
}

#[test]
fn heat_kernel_on_a_sine_mode() {
    let g = TorusGrid::line(64).unwrap();
    let (sigma, t) = (0.3, 0.5);
    let out = heat_smooth(&line_sine(g, 1.0), sigma, t).unwrap();
    let exact = line_sine(g, (-2.0 * PI * PI * sigma * sigma * t).exp());
    assert!(max_diff(&out, &exact) < 1e-14);
}

#[test]
fn monte_carlo_smoothing_agrees_with_heat_kernel() {
    let g = TorusGrid::line(64).unwrap();
    let (sigma, t) = (0.3, 0.5);
    let ens = sample_wiener(10_000, 1, 0.01, t, 2).unwrap().with_sigma(sigma);
    let x = line_sine(g, 1.0);
    let mc = mc_smooth(&x, &ens, t).unwrap();
    let exact = heat_smooth(&x, sigma, t).unwrap();
    assert!(max_diff(&mc.mean, &exact) < 5.0 * mc.max_se());
}

#[test]
fn fluctuations_of_trivial_inputs_vanish_exactly() {
    let g = TorusGrid::square(16).unwrap();
    let c = VectorField::constant(g, &[0.3, 0.2]);
    let ens = sample_wiener(4, 2, 0.01, 0.1, 3).unwrap().with_sigma(0.5);
    assert_eq!(fluctuation_field(&c, &ens, 1, 0.1, &c).unwrap().max_abs(), 0.0);
    let u = taylor_green(g);
    let zero = sample_wiener(4, 2, 0.01, 0.1, 3).unwrap().with_sigma(0.0);
    assert_eq!(fluctuation_field(&u, &zero, 2, 0.1, &u).unwrap().max_abs(), 0.0);
}

#[test]
fn fluctuations_are_centred_and_solenoidal() {
    let g = TorusGrid::square(16).unwrap();
    let (sigma, t) = (0.3, 0.2);
    let u = taylor_green(g);
    let ens = sample_wiener(4_096, 2, 0.01, t, 4).unwrap().with_sigma(sigma);
    let mean = heat_smooth(&u, sigma, t).unwrap();
    // centering: the Monte Carlo mean of Ŭ is the Monte Carlo mean minus the exact one
    let mc = mc_smooth(&u, &ens, t).unwrap();
    let centred = mc.mean.sub(&mean).unwrap();
    assert!(centred.max_component_abs() < 5.0 * mc.max_se());
    for p in [0, 17, 4_095] {
        let f = fluctuation_field(&u, &ens, p, t, &mean).unwrap();
        assert!(divergence(&f).max_abs() < EPS_SPEC);
    }
}

/// `E[Ŭ Ŭ_x]` for `X = sin 2πm` by trapezoidal quadrature over the Gaussian shift.
fn stress_by_quadrature(m: f64, sigma: f64, t: f64) -> f64 {
    let s = sigma * t.sqrt();
    let a = (-2.0 * PI * PI * s * s).exp();
    let n = 20_000;
    let lo = -12.0 * s;
    let h = 24.0 * s / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let z = lo + k as f64 * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let dens = (-z * z / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let u = (2.0 * PI * (m - z)).sin() - a * (2.0 * PI * m).sin();
        let ux = 2.0 * PI * ((2.0 * PI * (m - z)).cos() - a * (2.0 * PI * m).cos());
        acc += w * dens * u * ux;
    }
    acc * h
}

#[test]
fn one_dimensional_stress_closed_form() {
    let g = TorusGrid::line(64).unwrap();
    let (sigma, t) = (0.3, 0.5);
    let a = (-2.0 * PI * PI * sigma * sigma * t).exp();
    let closed = |m: f64| PI * (a.powi(4) - a * a) * (4.0 * PI * m).sin();
    for m in [0.05, 0.2, 0.37, 0.81] {
        assert!((stress_by_quadrature(m, sigma, t) - closed(m)).abs() < 1e-10);
    }
    let x = line_sine(g, 1.0);
    let ens = sample_wiener(10_000, 1, 0.01, t, 5).unwrap().with_sigma(sigma);
    let st = reynolds_stress(&x, &heat_smooth(&x, sigma, t).unwrap(), &ens, t, false).unwrap();
    let exact = VectorField::from_fn(g, |p| [closed(p[0]), 0.0]);
    assert!(max_diff(&st.mean, &exact) < 5.0 * st.max_se());
}

#[test]
fn stress_vanishes_quadratically_in_sigma() {
    let g = TorusGrid::square(16).unwrap();
    // Taylor–Green has no stress at any σ; a band field does
    let (t, u) = (0.2, random_band(g, 2, 12, 0.5).unwrap());
    let base = sample_wiener(4_096, 2, 0.01, t, 6).unwrap();
    let sigmas = [0.04, 0.02, 0.01];
    let norms: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            let ens = base.clone().with_sigma(s);
            let mean = heat_smooth(&u, s, t).unwrap();
            reynolds_stress(&u, &mean, &ens, t, false).unwrap().mean.max_component_abs()
        })
        .collect();
    for w in norms.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((1.7..2.3).contains(&slope), "{norms:?}");
    }
    let zero = base.with_sigma(0.0);
    assert_eq!(reynolds_stress(&u, &u, &zero, t, false).unwrap().mean.max_abs(), 0.0);
}

#[test]
fn advection_decomposition() {
    let g = TorusGrid::square(32).unwrap();
    let c = VectorField::constant(g, &[0.2, 0.5]);
    let ens = sample_wiener(4_096, 2, 0.01, 0.2, 7).unwrap().with_sigma(0.3);
    let d = decompose_expected_advection(&c, &ens, 0.2).unwrap();
    assert!(d.expected_advection.mean.max_abs() == 0.0 && d.mean_advection.max_abs() == 0.0);
    assert!(d.stress.mean.max_abs() == 0.0);

    let u = taylor_green(g);
    let d = decompose_expected_advection(&u, &ens, 0.2).unwrap();
    assert!(d.gap_ratio() <= 5.0, "{}", d.gap_ratio());

    let zero = sample_wiener(8, 2, 0.01, 0.2, 7).unwrap().with_sigma(0.0);
    let d = decompose_expected_advection(&u, &zero, 0.2).unwrap();
    assert_eq!(d.stress.mean.max_abs(), 0.0);
    assert!(max_diff(&d.expected_advection.mean, &d.mean_advection) < 1e-14);
}

#[test]
fn ito_check_on_a_steady_field_is_the_differencing_error() {
    let g = TorusGrid::line(64).unwrap();
    let (sigma, dt) = (0.3, 1e-3);
    let times: Vec<f64> = (0..=20).map(|j| j as f64 * dt).collect();
    let v = vec![line_sine(g, 1.0); times.len()];
    let tend = vec![VectorField::zeros(g); times.len()];
    let rep = ito_transport_check(&times, &v, &tend, sigma).unwrap();
    let lam = 2.0 * PI * PI * sigma * sigma;
    for r in &rep.records {
        // central difference of e^{−λt} against its exact derivative
        let predicted = (-lam * r.time).exp() * ((lam * dt).sinh() / dt - lam);
        assert!((r.linf - predicted).abs() < EPS_SPEC, "{} vs {predicted}", r.linf);
    }
}

#[test]
fn ito_check_without_noise_is_pure_differencing() {
    let g = TorusGrid::line(128).unwrap();
    let h = HopfSolution::new(line_sine(g, 0.5));
    let dt = 1e-3;
    let times: Vec<f64> = (0..=50).map(|j| j as f64 * dt).collect();
    let v: Vec<_> = times.iter().map(|&t| h.solve(t).unwrap()).collect();
    let tend: Vec<_> = times.iter().map(|&t| h.tendency(t).unwrap()).collect();
    let rep = ito_transport_check(&times, &v, &tend, 0.0).unwrap();
    for (i, r) in rep.records.iter().enumerate() {
        let d = v[i + 2].sub(&v[i]).unwrap().scale(0.5 / dt).sub(&tend[i + 1]).unwrap();
        assert!((r.linf - d.max_component_abs()).abs() < 1e-12);
    }
}

#[test]
fn ito_check_is_second_order_on_hopf() {
    let residual = |dt: f64| {
        let g = TorusGrid::line(256).unwrap();
        let h = HopfSolution::new(line_sine(g, 0.5));
        let steps = (0.1 / dt).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
        let v: Vec<_> = times.iter().map(|&t| h.solve(t).unwrap()).collect();
        let tend: Vec<_> = times.iter().map(|&t| h.tendency(t).unwrap()).collect();
        ito_transport_check(&times, &v, &tend, 0.3).unwrap().max_linf()
    };
    let order = (residual(2e-3) / residual(1e-3)).log2();
    assert!(order > 1.8, "{order}");
}

#[test]
fn burgers_residual_of_the_viscous_oracle() {
    let g = TorusGrid::line(256).unwrap();
    let (nu, dt) = (0.01, 1e-3);
    let v0 = line_sine(g, 0.5);
    let times: Vec<f64> = (0..=100).map(|j| j as f64 * dt).collect();
    let series: Vec<_> = times.iter().map(|&t| cole_hopf_burgers(&v0, nu, t).unwrap()).collect();
    let rep = burgers_residual(&times, &series, nu, Orientation::Reversed).unwrap();
    assert!(rep.max_linf() < 1e-4, "{}", rep.max_linf());

    let c = vec![VectorField::constant(g, &[0.3]); times.len()];
    for o in [Orientation::Forward, Orientation::Reversed] {
        assert_eq!(burgers_residual(&times, &c, nu, o).unwrap().max_linf(), 0.0);
    }
}

#[test]
fn burgers_residual_of_the_inviscid_flow_is_the_viscous_term() {
    let g = TorusGrid::line(256).unwrap();
    let (nu, dt) = (0.05, 1e-3);
    let h = HopfSolution::new(line_sine(g, 0.5));
    let times: Vec<f64> = (0..=100).map(|j| j as f64 * dt).collect();
    let series: Vec<_> = times.iter().map(|&t| h.solve(t).unwrap()).collect();
    let rep = burgers_residual(&times, &series, nu, Orientation::Reversed).unwrap();
    for (i, r) in rep.records.iter().enumerate() {
        let visc = laplacian(&series[i + 1]).max_component_abs() * nu;
        assert!((r.linf - visc).abs() < 1e-3 * visc, "{} vs {visc}", r.linf);
    }
}

#[test]
fn reynolds_residual_of_trivial_flows() {
    let g = TorusGrid::square(16).unwrap();
    let dt = 0.01;
    let times: Vec<f64> = (0..=10).map(|j| j as f64 * dt).collect();
    let ens = sample_wiener(16, 2, dt, 0.1, 8).unwrap().with_sigma(0.3);
    for c in [[0.0, 0.0], [0.4, -0.2]] {
        let u = vec![VectorField::constant(g, &c); times.len()];
        for form in [ReynoldsForm::Raw, ReynoldsForm::Standard] {
            let rep = reynolds_residual(&times, &u, &ens, &[0.05], form).unwrap();
            assert!(rep.max_linf() < 1e-14);
        }
    }
}

#[test]
fn ns_residual_checks() {
    let g = TorusGrid::square(32).unwrap();
    let dt = 1e-3;
    let zero = vec![VectorField::zeros(g).assert_divfree().unwrap(); 11];
    let times: Vec<f64> = (0..=10).map(|j| j as f64 * dt).collect();
    assert_eq!(ns_residual(&times, &zero, 0.1, 1).unwrap().max_linf(), 0.0);

    let u0 = random_band(g, 3, 9, 0.5).unwrap();
    let nu = 0.05;
    let residual = |dt: f64| {
        let oracle = spectral_ns_2d(&u0, nu, 0.05, dt, 1).unwrap();
        ns_residual(&oracle.times(), &oracle.velocities(), nu, 1).unwrap().max_linf()
    };
    let order = (residual(2e-3) / residual(dt)).log2();
    assert!(order > 1.8, "{order}");

    let euler = euler_solve(&u0, 0.05, dt, 1).unwrap();
    let us = euler.velocities();
    let rep = ns_residual(&euler.times(), &us, nu, 1).unwrap();
    for (i, r) in rep.records.iter().enumerate() {
        let visc = laplacian(&us[i + 1]).max_component_abs() * nu;
        assert!((r.linf - visc).abs() < 1e-3 * visc, "{} vs {visc}", r.linf);
    }
}

// The projected backward quotient of U(T − s, ξ_t(s)) tends to
// P E[(Ŭ·∇)Ŭ] − σ²∇²U: reversing time flips the sign of both the stress
// and the diffusion relative to the forward Reynolds relation.
#[test]
fn projected_backward_second_derivative_limit() {
    let g = TorusGrid::square(8).unwrap();
    // a short lag keeps the O(Δ) bias, relative size ν|2πk|²Δ, under the noise
    let (sigma, dt, horizon, t, lag) = (0.3, 1e-3, 0.06, 0.03, 2);
    let u0 = random_band(g, 2, 10, 0.5).unwrap();
    let run = euler_solve(&u0, horizon, dt, 1).unwrap();
    let maps = EulerFlowMaps::from_run(&run).unwrap();
    let ens = sample_wiener(4_096, 2, dt, horizon, 11).unwrap().with_sigma(sigma);
    let flow = build_perturbed_flow(BaseFlow::Euler(maps), ens.clone(), horizon).unwrap();
    let (times, us) = (run.times(), run.velocities());
    let est = projected_backward_second_derivative(&flow, &times, &us, t, lag).unwrap();

    let tau = horizon - t;
    let i = (tau / dt).round() as usize;
    let big_u = heat_smooth(&us[i], sigma, tau).unwrap();
    let stress = reynolds_stress(&us[i], &big_u, &ens, tau, true).unwrap().mean;
    let predicted = stress.sub(&laplacian(&big_u).scale(sigma * sigma)).unwrap();
    let paper = leray_project(&stress).projected.scale(-1.0);
    let worst = |target: &VectorField| {
        est.mean
            .slices()
            .iter()
            .zip(est.se.slices())
            .zip(target.slices())
            .flat_map(|((m, s), r)| (0..m.len()).map(move |k| (m[k] - r[k]).abs() / s[k]))
            .fold(0.0, f64::max)
    };
    let (z_pred, z_paper) = (worst(&predicted), worst(&paper));
    assert!(z_pred < 5.0, "derived limit z = {z_pred}");
    assert!(z_paper > z_pred, "paper form z = {z_paper}, derived z = {z_pred}");
}

#[test]
fn heat_smoothing_identities() {
    let g = TorusGrid::square(64).unwrap();
    let u = VectorField::from_fn(g, |p| {
        let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
        [(x + 2.0 * y).sin() + 0.3 * (3.0 * x).cos(), (2.0 * x).cos() * y.sin()]
    });
    let sigma = 0.4;
    let a = heat_smooth(&heat_smooth(&u, sigma, 0.1).unwrap(), sigma, 0.2).unwrap();
    let b = heat_smooth(&u, sigma, 0.3).unwrap();
    assert!(max_diff(&a, &b) < EPS_SPEC);
    let p = leray_project(&u);
    let hp = leray_project(&heat_smooth(&u, sigma, 0.3).unwrap()).projected;
    assert!(max_diff(&heat_smooth(&p.projected, sigma, 0.3).unwrap(), &hp) < EPS_SPEC);
    let s = ScalarField::from_fn(g, |q| (2.0 * PI * (q[0] - q[1])).cos());
    let l1 = laplacian(&heat_smooth(&s, sigma, 0.3).unwrap());
    let l2 = heat_smooth(&laplacian(&s), sigma, 0.3).unwrap();
    assert!(max_diff(&l1, &l2) < EPS_SPEC * 100.0);
}
