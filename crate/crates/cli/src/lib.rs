//! Config-driven experiment runner behind the `semiper` binary.

pub mod config;
pub mod plot;
pub mod run;
