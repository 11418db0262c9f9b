//! Spin transport coefficients of periodic tight-binding models on ℤ².

pub mod cli;
pub mod kernel_algebra;
pub mod lattice_model;
pub mod spectral;
pub mod torus_oracle;
pub mod trace_functionals;
pub mod transport;
