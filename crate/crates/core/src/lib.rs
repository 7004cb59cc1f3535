pub mod atlas;
pub mod cli;
pub mod dataset;
pub mod embedding;
pub mod gateway;
pub mod replot;
pub mod rng;
pub mod service;
