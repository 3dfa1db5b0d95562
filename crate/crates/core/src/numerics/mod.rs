//! Numerical kernels shared by the physics modules: Bessel functions,
//! adaptive and oscillatory quadrature, compensated summation, line fits.

pub mod bessel;
mod ddouble;
pub mod fit;
pub mod quadrature;
pub mod sum;
