//! 2D incompressible Euler in vorticity–stream form, pseudospectral with RK4.
//!
//! The state is the dealiased vorticity spectrum plus the (conserved) mean
//! velocity, which vorticity alone does not determine. Velocity is recovered
//! as `u = ū + (∂_y ψ, −∂_x ψ)` with `−∇²ψ = ω`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::fft;
use crate::torus::ops::{advect_spectral, derivative_wavevector};
use crate::torus::{
    advect, curl, leray_project, Interpolant, ScalarField, TorusGrid, VectorField, VectorSpectrum,
};

/// Courant number enforced by the time steppers.
pub const CFL_NUMBER: f64 = 0.5;

/// A velocity snapshot of an inviscid (or viscous) trajectory.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub velocity: VectorField,
    pub vorticity: Option<ScalarField>,
    /// Periodic displacement `g(t, m) − m` when tracked.
    pub flow_map: Option<VectorField>,
}

/// Snapshots and conservation diagnostics of an Euler integration.
#[derive(Clone, Debug)]
pub struct EulerRun {
    pub dt: f64,
    pub states: Vec<FlowState>,
    /// `½ mean |u|²` per snapshot.
    pub energy: Vec<f64>,
    /// `½ mean ω²` per snapshot.
    pub enstrophy: Vec<f64>,
}

impl EulerRun {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn velocities(&self) -> Vec<VectorField> {
        self.states.iter().map(|s| s.velocity.clone()).collect()
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`; `t_end` must be a multiple of `dt`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::config(format!("need dt > 0 and T >= 0 (dt = {dt}, T = {t_end})")));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::config(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// `dt ≤ CFL · h / max|u|`, enforced rather than adjusted.
pub fn check_cfl(grid: &TorusGrid, max_speed: f64, dt: f64) -> Result<()> {
    if !max_speed.is_finite() {
        return Err(Error::numerical("non-finite velocity"));
    }
    let limit = CFL_NUMBER * grid.spacing() / max_speed;
    if max_speed > 0.0 && dt > limit {
        return Err(Error::config(format!(
            "CFL violated: dt = {dt} exceeds {CFL_NUMBER}·h/max|u| = {limit:.3e}"
        )));
    }
    Ok(())
}

pub(crate) fn velocity_spectrum(grid: &TorusGrid, w: &[Complex64], mean: &[f64; 2]) -> VectorSpectrum {
    let mut ux = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut uy = ux.clone();
    for idx in 0..grid.len() {
        let k = grid.wavevector(idx);
        let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let psi = w[idx] / (4.0 * PI * PI * k2);
        let kd = derivative_wavevector(grid, idx);
        ux[idx] = psi * Complex64::new(0.0, 2.0 * PI * kd[1]);
        uy[idx] = psi * Complex64::new(0.0, -2.0 * PI * kd[0]);
    }
    ux[0] = Complex64::new(mean[0], 0.0);
    uy[0] = Complex64::new(mean[1], 0.0);
    VectorSpectrum::new(*grid, vec![ux, uy]).expect("shape")
}

fn max_speed(u: &VectorSpectrum) -> f64 {
    let f = u.to_field();
    f.max_abs()
}

fn dealias(grid: &TorusGrid, w: &mut [Complex64]) {
    for (i, c) in w.iter_mut().enumerate() {
        if !grid.retained(i) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

fn euler_rhs(grid: &TorusGrid, w: &[Complex64], mean: &[f64; 2]) -> Vec<Complex64> {
    let u = velocity_spectrum(grid, w, mean);
    let mut out = advect_spectral(&u, &[w.to_vec()]).remove(0);
    for c in out.iter_mut() {
        *c = -*c;
    }
    out
}

fn state_from(grid: &TorusGrid, t: f64, w: &[Complex64], mean: &[f64; 2]) -> (FlowState, f64, f64) {
    let u = velocity_spectrum(grid, w, mean).to_field().with_flag(true);
    let vort = ScalarField::new(*grid, fft::inverse_real(grid, w)).expect("finite vorticity");
    let energy = 0.5 * u.l2_norm().powi(2);
    let enstrophy = 0.5 * vort.l2_norm().powi(2);
    (
        FlowState {
            t,
            velocity: u,
            vorticity: Some(vort),
            flow_map: None,
        },
        energy,
        enstrophy,
    )
}

/// Integrates 2D Euler from divergence-free `u0` to `t_end` with RK4 steps of `dt`,
/// keeping every `snapshot_every`-th state (and always the first and last).
pub fn euler_solve(u0: &VectorField, t_end: f64, dt: f64, snapshot_every: usize) -> Result<EulerRun> {
    let grid = u0.grid();
    if grid.dim() != 2 {
        return Err(Error::config("Euler solver is two-dimensional"));
    }
    let u0 = u0.clone().assert_divfree()?;
    let steps = step_count(t_end, dt)?;
    let every = snapshot_every.max(1);
    let mean = [u0.component(0).mean(), u0.component(1).mean()];
    let mut w = curl(&u0)?.spectrum().into_coeffs();
    dealias(&grid, &mut w);

    let mut states = Vec::new();
    let mut energy = Vec::new();
    let mut enstrophy = Vec::new();
    let mut record = |k: usize, w: &[Complex64]| {
        let (s, e, z) = state_from(&grid, k as f64 * dt, w, &mean);
        states.push(s);
        energy.push(e);
        enstrophy.push(z);
    };
    record(0, &w);

    for k in 0..steps {
        let speed = max_speed(&velocity_spectrum(&grid, &w, &mean));
        check_cfl(&grid, speed, dt)?;
        w = rk4_step(&w, dt, |x| euler_rhs(&grid, x, &mean));
        if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::numerical(format!("NaN in vorticity at step {}", k + 1)));
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            record(k + 1, &w);
        }
    }
    Ok(EulerRun {
        dt,
        states,
        energy,
        enstrophy,
    })
}

/// Classical RK4 step of `y' = f(y)` on a complex vector.
pub(crate) fn rk4_step(
    y: &[Complex64],
    dt: f64,
    f: impl Fn(&[Complex64]) -> Vec<Complex64>,
) -> Vec<Complex64> {
    let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * dt, &k1));
    let k3 = f(&axpy(y, 0.5 * dt, &k2));
    let k4 = f(&axpy(y, dt, &k3));
    y.iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect()
}

/// Pressure of an Euler velocity: `(u·∇)u = P[(u·∇)u] + grad p`, zero mean.
pub fn euler_pressure(u: &VectorField) -> Result<ScalarField> {
    Ok(leray_project(&advect(u, u)?).pressure)
}

/// Euler tendency `∂_t u = −P[(u·∇)u]`.
pub fn euler_tendency(u: &VectorField) -> Result<VectorField> {
    Ok(leray_project(&advect(u, u)?).projected.scale(-1.0))
}

/// Lagrangian displacement `g(t_k, m) − m` of every grid point, tracked with
/// RK4 through the velocity snapshots. Needs a snapshot at every step; the
/// mid-step velocity is the average of the bracketing snapshots.
pub fn track_flow_maps(run: &EulerRun) -> Result<Vec<VectorField>> {
    let states = &run.states;
    if states.len() < 2 {
        return Ok(states
            .iter()
            .map(|s| VectorField::zeros(s.velocity.grid()))
            .collect());
    }
    for w in states.windows(2) {
        if ((w[1].t - w[0].t) - run.dt).abs() > 1e-9 * run.dt {
            return Err(Error::config("flow-map tracking needs a snapshot at every step"));
        }
    }
    let grid = states[0].velocity.grid();
    let n = grid.len();
    let mut pos: Vec<[f64; 2]> = (0..n).map(|i| grid.point(i)).collect();
    let mut out = vec![VectorField::zeros(grid)];
    let dt = run.dt;
    for k in 0..states.len() - 1 {
        let a = &states[k].velocity;
        let b = &states[k + 1].velocity;
        let mid = a.add(b)?.scale(0.5);
        let (ia, im, ib) = (
            Interpolant::vector(a),
            Interpolant::vector(&mid),
            Interpolant::vector(b),
        );
        for p in pos.iter_mut() {
            let v = |it: &Interpolant, x: [f64; 2]| {
                let r = it.value(&x);
                [r[0], r[1]]
            };
            let k1 = v(&ia, *p);
            let k2 = v(&im, [p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]]);
            let k3 = v(&im, [p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]]);
            let k4 = v(&ib, [p[0] + dt * k3[0], p[1] + dt * k3[1]]);
            for c in 0..2 {
                p[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        out.push(VectorField::from_parts(
            grid,
            (0..2)
                .map(|c| {
                    ScalarField::from_raw(
                        grid,
                        pos.iter()
                            .enumerate()
                            .map(|(i, p)| p[c] - grid.point(i)[c])
                            .collect(),
                    )
                })
                .collect(),
            false,
        ));
    }
    Ok(out)
}
