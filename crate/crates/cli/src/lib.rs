//! Library half of the command-line front end; the binary in `main.rs` only
//! parses arguments and maps errors to exit codes. Living here keeps the
//! commands and file formats testable in-process.

pub mod commands;
pub mod io;
