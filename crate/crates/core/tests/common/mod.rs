//! Shared oracles and fixtures for the integration tests. Each test binary uses a subset.
#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;
