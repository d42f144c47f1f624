//! Construction and certification of singular convolution kernels
//! `J = rho / |.|^2`, pointwise evaluation of the associated nonlocal
//! operators on the full space and on domains with boundary, and a harness
//! that measures the nonlocal-to-local convergence rate against the local
//! operator `-div(M grad u)`.
//!
//! The library is organized around the pipeline
//!
//! ```text
//! kernel (densities rho, scaled families rho_eps, J_eps)
//!   -> moments (momentum matrix M, square root A, moment cancellation)
//!   -> quadrature (singular polar integration engine)
//!   -> domains / functions (geometry, Neumann-compatible test functions)
//!   -> operators (L_eps, local operator, energy identity)
//!   -> harness (epsilon sweeps, L^p errors, rate fits)
//! ```
//!
//! The `nonloc-lab` binary wires JSON configurations to these modules.

// Dimensions are a runtime prefix of fixed [f64; 3] storage, so indexed loops
// over `0..dim` are the house style; iterator rewrites would obscure that.
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod domains;
pub mod error;
pub mod functions;
pub mod harness;
pub mod kernel;
pub mod moments;
pub mod operators;
pub mod quadrature;

pub use error::{Error, Result};

/// Points live in at most three dimensions; the active dimension is carried
/// by the surrounding object and trailing coordinates are zero.
pub type Point = [f64; 3];

pub const MAX_DIM: usize = 3;

/// Euclidean norm of the first `dim` coordinates.
#[inline]
pub fn norm(x: &Point, dim: usize) -> f64 {
    dot(x, x, dim).sqrt()
}

#[inline]
pub fn dot(x: &Point, y: &Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        s += x[i] * y[i];
    }
    s
}

#[inline]
pub fn scale(x: &Point, c: f64) -> Point {
    [x[0] * c, x[1] * c, x[2] * c]
}

#[inline]
pub fn sub(x: &Point, y: &Point) -> Point {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
}

#[inline]
pub fn add(x: &Point, y: &Point) -> Point {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2]]
}

/// Surface measure of the unit sphere S^{n-1}.
pub fn unit_sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}
