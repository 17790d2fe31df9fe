// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end for self-normalized changepoint testing.

pub mod commands;
pub mod input;
pub mod report;
