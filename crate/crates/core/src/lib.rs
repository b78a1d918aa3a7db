//! Fermionic antiflatness toolkit.
pub mod algebra;
pub mod commutant;
pub mod dense_state;
pub mod ed_lab;
pub mod error;
pub mod free_fermion;
pub mod harness;
pub mod nongauss;
pub mod stabilizer_mc;

pub use error::{Error, Result};
