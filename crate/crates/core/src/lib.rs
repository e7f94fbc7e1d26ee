//! `groupmix`: recovery of mixtures of categorical measures from grouped samples.
//!
//! Data arrive as *random groups*: each group picks one latent categorical
//! distribution from a finite mixture and then draws `k` iid categories from it.
//! With `2m - 1` draws per group the `m` components and their weights can be
//! recovered spectrally:
//!
//! 1. estimate the symmetric moment tensors of orders `2m - 2` and `2m - 1`
//!    under a diagonal change of dominating measure (spreads the component norms);
//! 2. whiten with the pseudo-inverse square root of the order-`2m - 2` operator;
//! 3. eigendecompose `T T^H` where `T` unfolds the whitened order-`2m - 1` tensor;
//! 4. contract each top eigenvector with a probe, undo the measure change, clip
//!    and renormalise; then fit weights by least squares on the order-`m - 1` moment.
//!
//! The crate also builds explicit pairs of distinct mixtures whose grouped-sample
//! laws agree up to a given group size (the identifiability boundary), the
//! multinomial bridge between tallies and symmetric tensors, and a reproducible
//! Monte-Carlo harness.
//!
//! ```
//! use groupmix::model::{MixtureSpec, ProbabilityVector};
//! use groupmix::recovery::{recover_full, RecoveryConfig};
//! use groupmix::model::DominatingScheme;
//! use groupmix::experiments::matched_l1_error;
//!
//! let mix = MixtureSpec::new(
//!     vec![0.6, 0.4],
//!     vec![
//!         ProbabilityVector::new(vec![0.7, 0.2, 0.1]).unwrap(),
//!         ProbabilityVector::new(vec![0.1, 0.3, 0.6]).unwrap(),
//!     ],
//! )
//! .unwrap();
//! let mut cfg = RecoveryConfig::new(2);
//! cfg.dominating = DominatingScheme::Fixed(vec![9.0, 4.0, 1.0]);
//! // A mixture is its own population moment source.
//! let fit = recover_full(&mix, &cfg).unwrap();
//! assert!(matched_l1_error(mix.components(), &fit.components).unwrap() < 1e-8);
//! ```

#![forbid(unsafe_code)]

pub mod counterexamples;
mod error;
pub mod estimation;
pub mod experiments;
pub mod model;
pub mod multinomial;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod tensor;

pub use error::{Error, Result};
