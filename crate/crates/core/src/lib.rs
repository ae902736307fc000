pub mod appearance;
pub mod cli;
pub mod dimest;
pub mod error;
pub mod evalx;
pub mod jacreg;
pub mod localize;
pub mod neighbors;
pub mod numeric;
pub mod pipeline;
pub mod pose;
pub mod report;
pub mod tbml;
pub mod types;
