//! Natural-language front end for GA4GH Beacon v2 networks.
//!
//! The no_std logic lives in `beaconql_core`; this crate adds LLM transports,
//! the Beacon SDK, the sandboxed analytics runner, dataset IO and the HTTP
//! service.

pub mod analytics;
pub mod beacon_server;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod extract;
pub mod mocks;
pub mod provider;
pub mod sdk;
pub mod service;
