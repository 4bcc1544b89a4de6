//! Finite-difference laboratory for the compressible two-fluid model with
//! algebraic pressure closure on periodic domains.
//!
//! * [`closure`]: pointwise solve of `(1 - R/Z) Z^gamma = Q` and its derivatives.
//! * [`grid`]: periodic grids, centered operators, integrals and norms.
//! * [`dynamics`]: conservative right-hand side and Heun time stepping.
//! * [`energy`]: mixture energy, dissipation and the energy-inequality audit.
//! * [`gronwall`]: numerical checks of classical and generalized Gronwall bounds.
//! * [`harness`]: twin experiments comparing a reference and a perturbed run.
//! * [`config`] and [`io`]: run configuration and CSV / field-dump formats.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]


pub mod closure;
pub mod config;
pub mod dynamics;
pub mod energy;
pub mod grid;
pub mod gronwall;
pub mod harness;
pub mod io;
