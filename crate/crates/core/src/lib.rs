//! Easy rejection sampling.
//!
//! Draws i.i.d. samples from a user-supplied, possibly unnormalized,
//! differentiable log-density. The proposal is a truncated diagonal Gaussian
//! mixture that is initialized from a handful of target evaluations, refit by
//! weighted EM as samples accumulate, and refined by gradient descent on a
//! softmax surrogate of the maximum log-ratio `log f - log g`. The rejection
//! bound is the empirical supremum of observed ratios, so the caller supplies
//! neither a proposal nor a bound.
//!
//! ```no_run
//! use ers::bench::{BenchSpec, Family};
//! use ers::sampler::{run, SamplerConfig};
//!
//! let spec = BenchSpec::new(Family::Clutter, 1).unwrap();
//! let target = spec.target();
//! let cfg = SamplerConfig { target_count: 1000, seed: 7, ..SamplerConfig::default() };
//! let out = run(&target, &cfg).unwrap();
//! println!("acceptance rate {:.3}", out.report.acceptance_rate);
//! ```

pub mod bench;
pub mod cli;
pub mod dual;
pub mod error;
pub mod expr;
pub mod init;
pub mod normal;
pub mod optim;
pub mod par;
pub mod points;
pub mod proposal;
pub mod refine;
pub mod sampler;
pub mod stats;
pub mod target;

pub use error::{Error, Result};
pub use points::Points;
pub use proposal::GmmProposal;
pub use target::{Domain, LogTarget};
