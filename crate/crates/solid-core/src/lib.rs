//! Sequential optimization of expensive, noisy black-box functions on the
//! unit hypercube.
//!
//! The toolkit fits a Gaussian-process surrogate whose kernel range
//! parameters carry a spike-and-slab prior, samples the posterior with
//! Metropolis-Hastings-within-Gibbs, performs global and local variable
//! selection, and picks new design points by maximizing augmented expected
//! improvement over search regions restricted to the locally active
//! dimensions.
//!
//! The main entry points are [`solid_loop::run_solid`] and
//! [`solid_loop::run_baseline`], which execute a whole sequential run; the
//! lower-level modules are usable on their own.

pub mod acquisition;
pub mod design;
pub mod gp;
pub mod mcmc;
pub mod optimum;
pub mod region;
pub mod solid_loop;
pub mod stats;
pub mod testbed;
pub mod varsel;

mod error;

pub use error::{Error, Result};

pub use design::{Design, DesignMatrix};
pub use gp::{FittedSurface, GpParams, PosteriorDraws};
pub use mcmc::{ChainConfig, Priors};
pub use region::SearchRegion;
pub use solid_loop::{Mode, RunConfig, RunTrace};
pub use testbed::Objective;
