pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod game;
pub mod metagame;
pub mod metrics;
pub mod plot;
pub mod qre;
pub mod responses;
pub mod rng;
pub mod strategy;

pub use error::{Error, Result};
