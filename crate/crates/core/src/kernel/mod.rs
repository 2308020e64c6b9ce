//! Discrete-event kernel: virtual clock, stable event queue, seeded streams.

mod queue;
mod rng;
mod time;

pub use queue::{Event, EventHandle, EventQueue};
pub use rng::{fork_stream, RandomStream};
pub use time::{secs, SimTime};
