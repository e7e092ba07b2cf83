pub mod casebook;
pub mod cli;
pub mod determining;
pub mod error;
pub mod expr;
pub mod format;
pub mod jet;
pub mod lie;
pub mod linalg;
pub mod par;
pub mod reduction;
pub mod report;

pub use error::{Error, Result};
