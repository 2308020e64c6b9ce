pub mod adversary;
pub mod batch;
pub mod channel;
pub mod crypto;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod mobility;
pub mod packet;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod trust;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a simulated node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}
