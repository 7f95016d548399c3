//! Sum-of-squares relaxations and rounding algorithms for maximizing cubic
//! and odd-degree polynomials over the hypercube and the unit sphere.

pub mod baselines;
pub mod compressed_sdp;
pub mod config;
pub mod error;
pub mod hitting_sets;
pub mod rng;
pub mod roundings;
pub mod sdp_solver;
pub mod sos_core;
pub mod tensor_poly;
pub mod threesat;

pub use error::{Error, Result};
