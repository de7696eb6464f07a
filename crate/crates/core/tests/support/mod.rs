//! Helpers shared by integration and acceptance tests.
#![allow(dead_code)]

pub mod demo;
pub mod oracles;
pub mod protocol;
