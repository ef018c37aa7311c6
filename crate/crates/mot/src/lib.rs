//! Optimal martingale couplings for the two-marginals transport problem on
//! positive supports.
//!
//! Given two laws `mu` and `nu` on `(0, inf)` with unit mean and `mu` below
//! `nu` in the convex order, this crate constructs the explicit optimal
//! transference plans of the associated martingale transport problem:
//!
//! * the three-band plan, which leaves mass in place outside an interval
//!   `(a, b)` and splits interior mass onto `{p(x), x, q(x)}`; this coupling
//!   attaining the model-free lower bound of at-the-money forward start
//!   straddles of both types;
//! * the left- and right-monotone plans, optimal for payoffs with a definite
//!   sign of the cross-derivative `C_xyy`.
//!
//! A change-of-numeraire layer ([`numeraire`]) transports marginals,
//! couplings, payoffs and semi-static hedges to the reciprocal picture, and a
//! discrete linear-programming oracle ([`lp`]) verifies every bound and
//! symmetry identity on quantized instances.
//!
//! ```
//! use mot::measures::Marginal;
//! use mot::couplings::build_hk;
//! use mot::pricing::{price, Payoff};
//!
//! let mu = Marginal::lognormal(0.2).unwrap();
//! let nu = Marginal::lognormal(0.3).unwrap();
//! let plan = build_hk(&mu, &nu, 64).unwrap();
//! let straddle = Payoff::straddle_type_ii(1.0).unwrap();
//! let lower = price(&plan.clone().into(), &straddle, 1e-9).unwrap();
//! assert!(lower.value > 0.0 && lower.value < 0.2);
//! ```

pub mod config;
pub mod couplings;
pub mod error;
pub mod lp;
pub mod measures;
pub mod numeraire;
pub mod numerics;
pub mod pricing;
pub mod verify;

pub use error::{Error, Result};

#[cfg(test)]
mod thread_safety {
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn values_are_shareable_across_threads() {
        assert_send_sync::<crate::measures::Marginal>();
        assert_send_sync::<crate::measures::DeltaProfile>();
        assert_send_sync::<crate::couplings::CouplingKernel>();
        assert_send_sync::<crate::pricing::Payoff>();
        assert_send_sync::<crate::lp::DiscreteMotInstance>();
    }
}
