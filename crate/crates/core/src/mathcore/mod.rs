//! Numerical building blocks: signed log arithmetic, determinants,
//! Pfaffians, gamma-family special functions and chamber quadrature.

pub mod linalg;
pub mod logsigned;
pub mod quadrature;
pub mod special;

pub use linalg::{log_det, log_det_of_logs, mat_inverse, pfaffian, SquareMatrix};
pub use logsigned::LogSigned;
pub use quadrature::{chamber_integrate, chamber_integrate_refined, ChamberSpec, QuadratureRule};
pub use special::{
    gamma_density, gamma_density_log, gamma_moment, ln_gamma, q_poly, reg_lower_gamma, reg_upper_gamma,
};
