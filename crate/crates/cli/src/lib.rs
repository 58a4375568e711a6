//! Command-line driver and HTTP query service.

pub mod cli;
pub mod layout;
pub mod pipeline;
pub mod service;

pub use cli::run;
pub use layout::Layout;
