pub mod adaptation;
pub mod cli;
pub mod detector;
pub mod disambiguation;
pub mod error;
pub mod events;
pub mod hierarchy;
pub mod kernels;
pub mod plot;
pub mod runner;
pub mod service;
pub mod streams;
pub mod supervisor;
pub mod windows;

pub use error::{Error, Result};
