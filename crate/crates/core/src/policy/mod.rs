//! The policy network, its action distribution, and the REINFORCE update.

mod adam;
mod distribution;
mod network;
mod reinforce;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use distribution::{
    ActionTriple, Categorical, DistributionParams, Intervention, ValueDistribution,
};
pub use network::{DenseLayer, ForwardCache, NetworkShape, PolicyNetwork, DEFAULT_HIDDEN, MIN_STD};
pub use reinforce::{discounted_returns, reinforce_update, Step};
