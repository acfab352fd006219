//! Inviscid reference dynamics: the Hopf equation (diffuse matter) and 2D
//! incompressible Euler, with their Lagrangian flow maps.

mod euler;
mod hopf;

pub use euler::{
    check_cfl, euler_pressure, euler_solve, euler_tendency, step_count, track_flow_maps, EulerRun,
    FlowState, CFL_NUMBER,
};
pub use hopf::{flow_map, hopf_solve, shock_time, HopfSolution, SHOCK_SAFETY};
