pub mod aqec4;
pub mod channels;
pub mod cli;
pub mod coupler;
pub mod error;
pub mod experiments;
pub mod qstate;
pub mod sensing;

pub use error::{Error, Result};
