//! Simulation and learning toolkit for battery-backed microgrid dispatch.
//!
//! - [`battery`]: equivalent-circuit digital twin with thermal and aging dynamics
//! - [`microgrid`]: power split and reward components of a single step
//! - [`env`]: the episodic dispatch environment
//! - [`policy`]: rule-based controllers and the policy interface
//! - [`learner`]: clipped-surrogate actor-critic trainer
//! - [`data`]: CSV ingestion, profile splits and synthetic series
//! - [`metrics`]: evaluation metrics, statistics and the DP oracle

pub mod battery;
pub mod data;
pub mod env;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod microgrid;
pub mod policy;

pub use battery::{BatteryModel, BatteryParams, BatteryState, IdealBattery, PowerBounds};
pub use env::{ExogenousBundle, MdpConfig, MicrogridEnv, Observation, ProfileSelector, StepOutcome, Trajectory};
pub use error::{Error, Result};
pub use learner::{GaussianPolicy, LearnerConfig};
pub use microgrid::{Dispatch, PriceQuote, RewardBreakdown};
pub use policy::{Method, Policy};
