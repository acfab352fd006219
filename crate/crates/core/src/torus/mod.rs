//! Periodic grids, spectral transforms and calculus on the unit flat torus.

pub mod fft;
pub mod interp;
mod field;
mod grid;
pub mod io;
pub mod ops;

pub use field::{ScalarField, SpectralField, VectorField, VectorSpectrum, EPS_SPEC};
pub use grid::TorusGrid;
pub use interp::Interpolant;
pub use ops::{
    advect, advect_scalar, curl, divergence, gradient, l2_inner, laplacian, leray_project,
    partial, shift_by, DiffKind, Field, LerayDecomposition,
};

/// Spectral round trip `ScalarField → SpectralField → ScalarField`.
pub fn transform_pair(field: &ScalarField) -> (SpectralField, ScalarField) {
    let s = field.spectrum();
    let back = s.to_real();
    (s, back)
}

/// Applies one of the three differential operators, returning a vector or scalar field as appropriate.
pub enum Derivative {
    Scalar(ScalarField),
    Vector(VectorField),
}

pub fn differentiate_scalar(field: &ScalarField, kind: DiffKind) -> crate::Result<Derivative> {
    match kind {
        DiffKind::Gradient => Ok(Derivative::Vector(gradient(field))),
        DiffKind::Laplacian => Ok(Derivative::Scalar(laplacian(field))),
        DiffKind::Divergence => Err(crate::Error::config("divergence needs a vector field")),
    }
}

pub fn differentiate_vector(field: &VectorField, kind: DiffKind) -> crate::Result<Derivative> {
    match kind {
        DiffKind::Divergence => Ok(Derivative::Scalar(divergence(field))),
        DiffKind::Laplacian => Ok(Derivative::Vector(laplacian(field))),
        DiffKind::Gradient => Err(crate::Error::config(
            "gradient of a vector field is not supported; differentiate components instead",
        )),
    }
}
