pub mod acquisition;
pub mod binning;
pub mod costs;
pub mod data;
pub mod nn;
pub mod xpt;
pub mod strategies;
pub mod eval;
pub mod cli;
