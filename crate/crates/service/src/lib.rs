//! HTTP aggregator service, its blocking client, simulated data owners and
//! the command implementations behind the `crowdpriv` binary.

pub mod client;
pub mod commands;
pub mod respond;
pub mod server;
pub mod wire;

pub use client::HttpAggregator;
pub use respond::{run_respond, RespondConfig, RespondSummary};
pub use server::{router, BackgroundServer};
