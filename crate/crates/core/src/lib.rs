pub mod cli;
pub mod lang;
pub mod metrics;
pub mod monitor;
pub mod secrecy;
pub mod trace;
pub mod upgrades;
