//! Numerical verification of the convergence and slow-variation bounds.

pub mod apriori;
pub mod explicit;
pub mod norms;
pub mod slow;

pub use apriori::{ctilde, tail_t, verify_apriori_all, verify_apriori_convergence};
pub use explicit::verify_explicit_convergence;
pub use norms::{d2_contraction_identity, second_derivative_norm};
pub use slow::{frame_derivative_fd, slow_variation_terms, verify_slow_variation};
