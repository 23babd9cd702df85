//! Lipschitz p-summing norm estimation: configuration lower bounds, the
//! Pietsch LP with certificates, explicit factorizations, restriction and
//! the polynomial variant.

pub mod estimate;
pub mod factor;
pub mod lp;
pub mod poly;

pub use estimate::{
    certified_summing_upper, config_numerator, estimate_pi_lip, estimate_pi_lip_full, lower_bound_config, lower_bound_config_with,
    lp_constant_on, Budget, Estimate, LowerBound,
};
pub use factor::{build_factorization, compose_operator, lift_configuration, restrict_operator, FactorizationBundle};
pub use lp::{pietsch_upper_lp, pietsch_upper_lp_in, PietschCertificate};
pub use poly::{estimate_pi_lip_poly, estimate_pi_lip_poly_full, polynomial_argmax};
