//! Simulation and numerical oracles for treatment effects in principal strata
//! under the null of no treatment effect.

// Numerical kernels index several parallel arrays by visit or coordinate.
#![allow(clippy::needless_range_loop)]

pub mod calibration;
pub mod cli;
pub mod datagen;
pub mod demo;
pub mod hermite;
pub mod math;
pub mod params;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod strata;
pub mod summation;
