//! Small numerical toolkit shared by the solvers: scalar root finding,
//! adaptive quadrature, an embedded Runge-Kutta integrator and a sparse
//! direct solve.

pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod spline;
pub mod sparse;
