//! Certified construction of doubling measures on Cantor-type sets.

pub mod numerics;
pub mod construction;
pub mod measure;
pub mod power_measure;
pub mod theorem_measure;
pub mod analysis;
pub mod midpoint;
pub mod cli;
