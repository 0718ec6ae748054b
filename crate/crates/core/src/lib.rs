//! Core of beaconql: everything that can be computed without touching the
//! network, the filesystem or a clock.
//!
//! The crate is `no_std` (with `alloc`). IO-bound pieces such as HTTP
//! providers, the sandbox runner and the service live in the `beaconql`
//! crate and build on the types here.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bird;
pub mod canonical;
pub mod codegen;
pub mod cohort;
pub mod decode;
pub mod draft;
pub mod eval;
pub mod frame;
pub mod guard;
pub mod llm;
pub mod mock_beacon;
pub mod model;
pub mod payload;
pub mod session;
pub mod sql;
pub mod template;

pub use model::{BeaconQuery, BeaconResponse, Filter, FilterType, Granularity, Scope, VariantParams};
