use thiserror::Error;

use crate::kernel::SimTime;
use crate::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("cannot schedule at {at}: clock already at {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
    #[error("event #{seq} is not pending (already fired or cancelled)")]
    UnknownEvent { seq: u64 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("node {0} already has a registered key pair")]
    DuplicateNode(NodeId),
    #[error("node {0} already signed this chain")]
    DuplicateSigner(NodeId),
    #[error("ciphertext is malformed: {0}")]
    MalformedCiphertext(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum TrustError {
    #[error("node {0} cannot hold a trust record about itself")]
    SelfTrust(NodeId),
    #[error("reporter {0} cannot report on itself")]
    SelfReport(NodeId),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("fusion weights {0:?} must be non-negative and sum to 1")]
    BadWeights([f64; 3]),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("a valid route to {0} already exists")]
    RouteAlreadyValid(NodeId),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
    #[error("invalid run configuration: {0}")]
    Config(String),
}
