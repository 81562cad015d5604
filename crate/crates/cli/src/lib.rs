//! Command-line front end for the `gpmotpe` optimizer: manifest handling,
//! experiment execution and CSV artifacts.

pub mod commands;
pub mod csvio;
pub mod manifest;
