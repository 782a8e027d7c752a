//! Hierarchical federated learning over a heterogeneous wireless network with
//! massive-MIMO wireless backhaul and wireless energy transfer.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs plus an explicitly passed random stream; file
//! formats, the command line and parallel sweeps live in the `hetfl` crate.
//!
//! Module map:
//! - [`topology`]: placement, pathloss, micro-cells and worker mobility.
//! - [`channel`]: fading generation, ZF access decoding, BD backhaul decoding, rates.
//! - [`energy`]: device/MEC energy terms, batteries, optimal WET, grid cost.
//! - [`association`]: divergence, BFS / H2RMA / random association, scheduling, DHDA.
//! - [`fl`]: synthetic non-i.i.d. data, softmax classifier, hierarchical aggregation.
//! - [`sim`]: configuration and the frame-by-frame experiment loop.
//! - [`verify`]: self-checks backing the `verify` command.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod association;
pub mod channel;
pub mod energy;
mod error;
pub mod fl;
pub mod rng;
pub mod sim;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
