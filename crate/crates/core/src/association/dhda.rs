//! Mobility-aware re-association (DHDA).

use alloc::vec::Vec;

use super::h2rma::place_device;
use super::{Association, ClassCounts, DataSplit, MecRange};
use crate::Result;

/// Micro-cell bookkeeping and check periods for [`dhda_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct DhdaTracker {
    /// Micro-cell of each device at its last (re)association.
    pub cells: Vec<(i64, i64)>,
    /// Frames for a normal worker to cross a micro-cell.
    pub psi_nml: Option<u64>,
    /// Frames for a risky worker to cross a micro-cell.
    pub psi_rsk: Option<u64>,
    pub theta_max: f64,
    /// Devices per MEC at most.
    pub capacity: Option<usize>,
}

impl DhdaTracker {
    pub fn new(
        cells: Vec<(i64, i64)>,
        psi_nml: Option<u64>,
        psi_rsk: Option<u64>,
        theta_max: f64,
        capacity: Option<usize>,
    ) -> Self {
        Self { cells, psi_nml, psi_rsk, theta_max, capacity }
    }

    /// Whether frame `l` (1-based) is a check frame.
    pub fn is_check_frame(&self, l: u64) -> bool {
        let hit = |psi: Option<u64>| psi.is_some_and(|p| p > 0 && l % p == 0);
        l >= 1 && (hit(self.psi_rsk) || hit(self.psi_nml))
    }

    /// Devices whose micro-cell differs from the recorded one.
    pub fn moved(&self, now: &[(i64, i64)]) -> Vec<usize> {
        self.cells.iter().zip(now).enumerate().filter(|(_, (a, b))| a != b).map(|(k, _)| k).collect()
    }
}

/// Re-associate the devices that changed micro-cell, at check frames only.
///
/// Each moved device, in index order, is taken out of its MEC and placed
/// again with the H2RMA per-device rule against the ranges and divergence
/// of everyone else. Returns the devices that were re-placed.
pub fn dhda_update(
    assoc: &mut Association,
    tracker: &mut DhdaTracker,
    cells: &[(i64, i64)],
    frame: u64,
    split: &DataSplit,
    gains: &[Vec<f64>],
) -> Result<Vec<usize>> {
    if !tracker.is_check_frame(frame) {
        return Ok(Vec::new());
    }
    let gamma = tracker.moved(cells);
    if gamma.is_empty() {
        return Ok(gamma);
    }
    let cap = tracker.capacity.unwrap_or(usize::MAX);
    let mut counts = ClassCounts::from_devices(split, assoc, |_| true);
    let mut load = assoc.loads();
    for &k in &gamma {
        let old = assoc.mec_of(k);
        counts.remove(split, k, old);
        load[old] -= 1;
        let mut ranges = MecRange::from_association(assoc, gains, Some(k));
        let m = place_device(k, split, gains, tracker.theta_max, cap, &mut counts, &mut ranges, &mut load)?;
        assoc.set(k, m);
        tracker.cells[k] = cells[k];
    }
    Ok(gamma)
}
