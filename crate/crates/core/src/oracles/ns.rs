use rustfft::num_complex::Complex64;

use super::Wavenumbers;
use crate::error::{Error, Result};
use crate::inviscid::FlowState;
use crate::torus::{fft, Field, ScalarField, TorusGrid, VectorField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Snapshots and diagnostics of a Navier–Stokes integration.
#[derive(Clone, Debug)]
pub struct NsRun {
    pub dt: f64,
    pub nu: f64,
    pub states: Vec<FlowState>,
    /// `½ mean |u|²` per snapshot.
    pub energy: Vec<f64>,
    /// `½ mean ω²` per snapshot.
    pub enstrophy: Vec<f64>,
}

impl NsRun {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn velocities(&self) -> Vec<VectorField> {
        self.states.iter().map(|s| s.velocity.clone()).collect()
    }
}

struct Solver {
    grid: TorusGrid,
    w: Wavenumbers,
    mean: [f64; 2],
}

impl Solver {
    fn velocity(&self, om: &[Complex64]) -> [Vec<Complex64>; 2] {
        let mut ux = vec![ZERO; om.len()];
        let mut uy = vec![ZERO; om.len()];
        for i in 0..om.len() {
            let k2 = self.w.k2[i];
            if k2 == 0.0 {
                continue;
            }
            // −∇²ψ = ω, u = (ψ_y, −ψ_x)
            let psi = om[i] / k2;
            let [kx, ky] = self.w.deriv[i];
            ux[i] = psi * Complex64::new(0.0, ky);
            uy[i] = psi * Complex64::new(0.0, -kx);
        }
        ux[0] = Complex64::new(self.mean[0], 0.0);
        uy[0] = Complex64::new(self.mean[1], 0.0);
        [ux, uy]
    }

    fn truncate(&self, c: &mut [Complex64]) {
        for (v, keep) in c.iter_mut().zip(&self.w.keep) {
            if !keep {
                *v = ZERO;
            }
        }
    }

    /// Dealiased `−(u·∇)ω`.
    fn nonlinear(&self, om: &[Complex64]) -> Vec<Complex64> {
        let g = &self.grid;
        let [mut ux, mut uy] = self.velocity(om);
        self.truncate(&mut ux);
        self.truncate(&mut uy);
        let mut o = om.to_vec();
        self.truncate(&mut o);
        let grad = |axis: usize| -> Vec<f64> {
            let d: Vec<Complex64> = o
                .iter()
                .zip(&self.w.deriv)
                .map(|(v, k)| v * Complex64::new(0.0, k[axis]))
                .collect();
            fft::inverse_real(g, &d)
        };
        let (ox, oy) = (grad(0), grad(1));
        let (ux, uy) = (fft::inverse_real(g, &ux), fft::inverse_real(g, &uy));
        let prod: Vec<f64> = (0..g.len()).map(|i| -(ux[i] * ox[i] + uy[i] * oy[i])).collect();
        let mut out = fft::forward_real(g, &prod);
        self.truncate(&mut out);
        out
    }

    fn max_speed(&self, om: &[Complex64]) -> f64 {
        let [ux, uy] = self.velocity(om);
        let (ux, uy) = (fft::inverse_real(&self.grid, &ux), fft::inverse_real(&self.grid, &uy));
        ux.iter().zip(&uy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    fn state(&self, t: f64, om: &[Complex64]) -> (FlowState, f64, f64) {
        let [ux, uy] = self.velocity(om);
        let g = self.grid;
        let vel = <VectorField as Field>::assemble(g, vec![fft::inverse_real(&g, &ux), fft::inverse_real(&g, &uy)]);
        let vort = ScalarField::new(g, fft::inverse_real(&g, om)).expect("finite vorticity");
        let e = 0.5 * vel.l2_norm().powi(2);
        let z = 0.5 * vort.l2_norm().powi(2);
        (
            FlowState {
                t,
                velocity: vel,
                vorticity: Some(vort),
                flow_map: None,
            },
            e,
            z,
        )
    }
}

/// 2D incompressible Navier–Stokes from divergence-free `u0`, vorticity form,
/// integrating-factor RK4 for the viscous term, 2/3 dealiasing. Keeps every
/// `snapshot_every`-th state plus the first and last.
pub fn spectral_ns_2d(u0: &VectorField, nu: f64, t_end: f64, dt: f64, snapshot_every: usize) -> Result<NsRun> {
    let grid = u0.grid();
    if grid.dim() != 2 {
        return Err(Error::config("Navier–Stokes oracle is two-dimensional"));
    }
    if nu < 0.0 {
        return Err(Error::config(format!("negative viscosity {nu}")));
    }
    if !(dt > 0.0) {
        return Err(Error::config("dt must be positive"));
    }
    let steps_f = (t_end / dt).round();
    if (steps_f * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::config(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    let steps = steps_f as usize;
    let w = Wavenumbers::new(&grid);
    let ux = fft::forward_real(&grid, u0.slices()[0]);
    let uy = fft::forward_real(&grid, u0.slices()[1]);
    let div_max = {
        let d: Vec<Complex64> = (0..grid.len())
            .map(|i| ux[i] * Complex64::new(0.0, w.deriv[i][0]) + uy[i] * Complex64::new(0.0, w.deriv[i][1]))
            .collect();
        fft::inverse_real(&grid, &d).iter().fold(0.0, |a: f64, b| a.max(b.abs()))
    };
    if div_max > 1e-10 * u0.max_component_abs().max(1.0) {
        return Err(Error::precondition(format!("initial velocity has divergence {div_max:e}")));
    }
    let mut om: Vec<Complex64> = (0..grid.len())
        .map(|i| ux[i] * Complex64::new(0.0, -w.deriv[i][1]) + uy[i] * Complex64::new(0.0, w.deriv[i][0]))
        .collect();
    let solver = Solver {
        grid,
        mean: [ux[0].re, uy[0].re],
        w,
    };
    solver.truncate(&mut om);
    let half: Vec<f64> = solver.w.k2.iter().map(|k2| (-nu * k2 * dt * 0.5).exp()).collect();
    let every = snapshot_every.max(1);

    let mut run = NsRun {
        dt,
        nu,
        states: Vec::new(),
        energy: Vec::new(),
        enstrophy: Vec::new(),
    };
    let keep = |t: f64, om: &[Complex64], run: &mut NsRun| {
        let (s, e, z) = solver.state(t, om);
        run.states.push(s);
        run.energy.push(e);
        run.enstrophy.push(z);
    };
    keep(0.0, &om, &mut run);
    let h = grid.spacing();
    for step in 0..steps {
        let speed = solver.max_speed(&om);
        if speed > 0.0 && dt > 0.5 * h / speed {
            return Err(Error::config(format!(
                "CFL violated: dt = {dt} exceeds 0.5·h/max|u| = {:.3e}",
                0.5 * h / speed
            )));
        }
        let a = solver.nonlinear(&om);
        let s2: Vec<Complex64> = (0..om.len()).map(|i| half[i] * (om[i] + a[i] * (0.5 * dt))).collect();
        let b = solver.nonlinear(&s2);
        let s3: Vec<Complex64> = (0..om.len()).map(|i| half[i] * om[i] + b[i] * (0.5 * dt)).collect();
        let c = solver.nonlinear(&s3);
        let s4: Vec<Complex64> = (0..om.len())
            .map(|i| half[i] * half[i] * om[i] + half[i] * c[i] * dt)
            .collect();
        let d = solver.nonlinear(&s4);
        for i in 0..om.len() {
            let e1 = half[i];
            let e2 = e1 * e1;
            om[i] = e2 * om[i] + (e2 * a[i] + e1 * (b[i] + c[i]) * 2.0 + d[i]) * (dt / 6.0);
        }
        if om.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical(format!("NaN in vorticity at step {}", step + 1)));
        }
        if (step + 1) % every == 0 || step + 1 == steps {
            keep((step + 1) as f64 * dt, &om, &mut run);
        }
    }
    Ok(run)
}
