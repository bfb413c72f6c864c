//! Open Badges: sociometric badge simulation, speech detection, group
//! interaction metrics, BLE proximity and a base-station hub.

pub mod cli;
pub mod hub;
pub mod jsonl;
pub mod metrics;
pub mod protocol;
pub mod proximity;
pub mod registry;
pub mod signal;
pub mod sim;
