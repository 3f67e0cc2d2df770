pub mod agent;
pub mod cli;
pub mod clustering;
pub mod data_io;
pub mod error;
pub mod numerics;
pub mod pipeline;
pub mod rewards;
pub mod selector;
pub mod trainer;

pub use error::{Error, Result};
