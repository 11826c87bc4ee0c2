pub mod analysis;
pub mod cli;
pub mod generation;
pub mod hierarchy;
pub mod image;
pub mod report;
pub mod similarity;
