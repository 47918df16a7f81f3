//! Simulation of optical state truncation ("quantum scissors") under loss.
//!
//! * [`lqs`]: linear scissors built from two lossy beam splitters and
//!   imperfect photodetectors, with closed-form fidelities and two
//!   brute-force oracles (explicit environment modes, full Fock-space
//!   projection).
//! * [`nqs`]: nonlinear scissors, a kicked Kerr cavity coupled to a thermal
//!   reservoir, propagated with the exact damped anharmonic oscillator
//!   solution.
//! * [`lindblad`]: an RK4 master-equation integrator used to check `nqs`.
//! * [`verify`]: the oracle-equivalence suites behind `qscissors verify`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod lqs;
pub mod nqs;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockVector, MultiModeState, C64};
pub use lqs::LqsParams;
pub use nqs::{EvolutionRecord, NqsParams, Stage};
