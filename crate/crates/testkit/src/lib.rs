//! Slow, direct reference implementations for cross-checking the harness.
//! Nothing here shares code with `lae-core`.
#![allow(clippy::needless_range_loop)]

pub mod dense;
pub mod events;
pub mod scoring;
