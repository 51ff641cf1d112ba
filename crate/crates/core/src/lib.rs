//! Fully Bayesian spatio-temporal ETAS modelling.
//!
//! The crate covers the complete workflow around the epidemic-type
//! aftershock sequence model with an inhomogeneous spatial background:
//!
//! * [`catalog`]: event catalogs, CSV ingestion, window splitting;
//! * [`kernels`]: normalised triggering kernels, conditional intensity and
//!   both the plain and the branching-conditioned log-likelihood;
//! * [`background`]: uniform, kernel-density and Dirichlet-process mixture
//!   models of the background density;
//! * [`gibbs`]: the latent-branching Gibbs sampler (exact branching and
//!   background-rate conditionals, random-walk blocks for the kernel
//!   parameter pairs);
//! * [`simulate`]: forward catalog simulation via the branching cascade and
//!   posterior-predictive forecasting;
//! * [`evaluate`]: DIC, out-of-sample posterior-predictive likelihood and
//!   model comparison.
//!
//! Everything numerical is generic over the scalar type through
//! [`num::Scalar`]; `f64` is the default type parameter throughout, so
//! `Catalog`, `EtasParams` and friends are `f64`-typed unless instantiated
//! otherwise.
//!
//! ```
//! use etas::prelude::*;
//!
//! let params = EtasParams::new(0.3, 0.2, 1.0, 0.5, 2.0, 0.4, 2.0, 10f64.ln()).unwrap();
//! let region = Region::new(0.0, 4.0, 0.0, 6.0).unwrap();
//! let spec = SimulationSpec::new(
//!     params,
//!     SimDensity::Background(BackgroundDensity::uniform(region)),
//!     region,
//!     50.0,
//!     2.0,
//!     7,
//! );
//! let sim = simulate_catalog(&spec).unwrap();
//! let config = SamplerConfig {
//!     n_samples: 50,
//!     burn_in: Some(50),
//!     branching_update_every: 10,
//!     ..SamplerConfig::default()
//! };
//! let chain = run_chain(&sim.catalog, &config, &PriorSpec::default(), None).unwrap();
//! assert_eq!(chain.samples.len(), 50);
//! ```

pub mod background;
pub mod catalog;
pub mod chain;
pub mod error;
pub mod evaluate;
pub mod gibbs;
pub mod kernels;
pub mod linalg2;
pub mod num;
pub mod simulate;

pub use background::{BackgroundDensity, DpConfig, GaussianMixture};
pub use catalog::{load_catalog, Catalog, Event, Region};
pub use chain::{Chain, PosteriorSample};
pub use error::{EtasError, Result};
pub use gibbs::{run_chain, BackgroundModel, BranchingVector, PriorSpec, SamplerConfig};
pub use kernels::EtasParams;
pub use num::Scalar;
pub use simulate::{simulate_catalog, simulate_forecast, SimDensity, SimulationSpec};

/// One-stop imports for the common workflow.
pub mod prelude {
    pub use crate::background::{BackgroundDensity, DpConfig, GaussianMixture};
    pub use crate::catalog::{load_catalog, Catalog, Event, Region};
    pub use crate::chain::{Chain, PosteriorSample};
    pub use crate::error::{EtasError, Result};
    pub use crate::evaluate::{compare_models, compute_dic, oos_loglik, EvaluationReport};
    pub use crate::gibbs::{
        run_chain, BackgroundModel, BranchingVector, GammaPrior, PriorSpec, SamplerConfig,
    };
    pub use crate::kernels::EtasParams;
    pub use crate::num::Scalar;
    pub use crate::simulate::{
        make_synthetic_phi, simulate_catalog, simulate_forecast, SimDensity, SimulationSpec,
    };
}
