//! Rating protocols that make strategic agents share information over a network.

// Range checks are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dcrs;
pub mod engine;
pub mod error;
pub mod growth;
pub mod protocol;
pub mod scalar;
pub mod tft;
pub mod topology;
pub mod utility;
pub mod welfare;

pub use error::{AgentSlack, Error, Result};
pub use scalar::Scalar;
pub use topology::{Topology, TopologyKind};
pub use utility::{ActionProfile, Benefit, LinkValues, UtilityModel};

pub use dcrs::{run_dcrs, DcrsOutcome, DcrsParams, StrategyTable};
pub use engine::{simulate, Behavior, SimConfig, SimReport};
pub use growth::{sweep_refresh, GrowthConfig, SweepSummary};
pub use protocol::{ppe_one_shot_check, RatingProtocol};
pub use welfare::{price_of_anarchy, solve_obedient, Metrics};

pub type Real = f64;

pub type UtilityModelF64 = UtilityModel<f64>;
pub type UtilityModelF32 = UtilityModel<f32>;
pub type LinkValuesF64 = LinkValues<f64>;
pub type LinkValuesF32 = LinkValues<f32>;
pub type StrategyTableF64 = StrategyTable<f64>;
pub type StrategyTableF32 = StrategyTable<f32>;
pub type RatingProtocolF64 = RatingProtocol<f64>;
pub type RatingProtocolF32 = RatingProtocol<f32>;
pub type DcrsParamsF64 = DcrsParams<f64>;
pub type DcrsParamsF32 = DcrsParams<f32>;
