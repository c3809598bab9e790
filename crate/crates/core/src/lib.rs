//! Age-of-information-optimal transmission over a channel that wears out.
//!
//! A transmitter sends status updates over a channel whose success
//! probability drops with every use and with time. Randomly arriving tokens
//! fill a bucket; a full bucket can be spent to restore the channel. The
//! average-cost problem is solved by relaxed relative value iteration and
//! checked against an exhaustive policy scan and Monte-Carlo rollouts.
//!
//! ```no_run
//! use aoi_wear::{model::ModelConfig, solver};
//!
//! let cfg = ModelConfig::reference();
//! let solved = solver::rvi_solve(&cfg, &Default::default()).unwrap();
//! println!("optimal average cost {}", solved.lambda_star);
//! ```

pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Action, ModelConfig, Profile, State};
pub use solver::{PolicyTable, SolveResult, SolverParams};
