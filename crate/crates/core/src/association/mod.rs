//! Device association, divergence and scheduling.
//!
//! Gains follow the "bigger is closer" convention everywhere: the range of a
//! MEC is the smallest gain among its devices, a device is in range when its
//! gain is at least that, and the closest MEC is the one with the largest gain.

mod bfs;
mod dhda;
mod h2rma;
mod schedule;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

pub use bfs::{bfs_optimal, evaluate_association, run_fixed_association, EnergyContext, FrameChannel, BFS_BUDGET};
pub use dhda::{dhda_update, DhdaTracker};
pub use h2rma::{h2rma_associate, h2rma_run};
pub use schedule::{percentile, random_schedule, schedule_devices, Schedule};

/// Samples per class per device, stored class-major (`counts[c][k]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    counts: Vec<Vec<u64>>,
}

impl DataSplit {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.first().map(Vec::len).unwrap_or(0);
        if counts.is_empty() || k == 0 || counts.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument("data split must be a non-empty C x K matrix".into()));
        }
        for dev in 0..k {
            if counts.iter().all(|row| row[dev] == 0) {
                return Err(Error::InvalidArgument(alloc::format!("device {dev} owns no data")));
            }
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_devices(&self) -> usize {
        self.counts[0].len()
    }

    pub fn count(&self, class: usize, device: usize) -> u64 {
        self.counts[class][device]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn device_total(&self, device: usize) -> u64 {
        self.counts.iter().map(|row| row[device]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Global class distribution `p(c)`.
    pub fn global_distribution(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|row| row.iter().sum::<u64>() as f64 / total).collect()
    }
}

/// Binary association matrix stored as the MEC index of every device, which
/// makes the one-MEC-per-device constraint structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Association {
    n_mecs: usize,
    mec_of: Vec<usize>,
}

impl Association {
    pub fn new(n_mecs: usize, mec_of: Vec<usize>) -> Result<Self> {
        if n_mecs == 0 || mec_of.iter().any(|&m| m >= n_mecs) {
            return Err(Error::InvalidArgument("association refers to a missing MEC".into()));
        }
        Ok(Self { n_mecs, mec_of })
    }

    /// From a 0/1 `M x K` matrix; every column must hold exactly one 1.
    pub fn from_matrix(chi: &[Vec<u8>]) -> Result<Self> {
        let m = chi.len();
        let k = chi.first().map(Vec::len).unwrap_or(0);
        let mut mec_of = vec![usize::MAX; k];
        for dev in 0..k {
            let mut ones = 0;
            for (mec, row) in chi.iter().enumerate() {
                match row.get(dev) {
                    Some(1) => {
                        ones += 1;
                        mec_of[dev] = mec;
                    }
                    Some(0) => {}
                    _ => return Err(Error::InvalidArgument("association entries must be 0 or 1".into())),
                }
            }
            if ones != 1 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "device {dev} is associated with {ones} MECs"
                )));
            }
        }
        Self::new(m, mec_of)
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        let mut chi = vec![vec![0u8; self.mec_of.len()]; self.n_mecs];
        for (k, &m) in self.mec_of.iter().enumerate() {
            chi[m][k] = 1;
        }
        chi
    }

    pub fn n_mecs(&self) -> usize {
        self.n_mecs
    }

    pub fn n_devices(&self) -> usize {
        self.mec_of.len()
    }

    pub fn mec_of(&self, device: usize) -> usize {
        self.mec_of[device]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.mec_of
    }

    pub fn set(&mut self, device: usize, mec: usize) {
        assert!(mec < self.n_mecs);
        self.mec_of[device] = mec;
    }

    pub fn devices_of(&self, mec: usize) -> impl Iterator<Item = usize> + '_ {
        self.mec_of.iter().enumerate().filter(move |(_, &m)| m == mec).map(|(k, _)| k)
    }

    pub fn loads(&self) -> Vec<usize> {
        let mut load = vec![0; self.n_mecs];
        for &m in &self.mec_of {
            load[m] += 1;
        }
        load
    }
}

/// Range of every MEC: the smallest gain among its devices, `None` while empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MecRange(pub Vec<Option<f64>>);

impl MecRange {
    pub fn empty(n_mecs: usize) -> Self {
        Self(vec![None; n_mecs])
    }

    /// Recompute from an association, skipping `exclude`.
    pub fn from_association(assoc: &Association, gains: &[Vec<f64>], exclude: Option<usize>) -> Self {
        let mut r = Self::empty(assoc.n_mecs());
        for k in 0..assoc.n_devices() {
            if Some(k) != exclude {
                let m = assoc.mec_of(k);
                r.extend(m, gains[m][k]);
            }
        }
        r
    }

    pub fn in_range(&self, mec: usize, gain: f64) -> bool {
        self.0[mec].is_some_and(|r| gain >= r)
    }

    pub fn extend(&mut self, mec: usize, gain: f64) {
        self.0[mec] = Some(self.0[mec].map_or(gain, |r| r.min(gain)));
    }
}

/// Per-MEC class histograms of the devices counted so far.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ClassCounts {
    per_mec: Vec<Vec<u64>>,
    mec_total: Vec<u64>,
    class_total: Vec<u64>,
    total: u64,
}

impl ClassCounts {
    pub(crate) fn new(n_mecs: usize, n_classes: usize) -> Self {
        Self {
            per_mec: vec![vec![0; n_classes]; n_mecs],
            mec_total: vec![0; n_mecs],
            class_total: vec![0; n_classes],
            total: 0,
        }
    }

    pub(crate) fn from_devices(split: &DataSplit, assoc: &Association, include: impl Fn(usize) -> bool) -> Self {
        let mut c = Self::new(assoc.n_mecs(), split.n_classes());
        for k in 0..assoc.n_devices() {
            if include(k) {
                c.add(split, k, assoc.mec_of(k));
            }
        }
        c
    }

    pub(crate) fn add(&mut self, split: &DataSplit, device: usize, mec: usize) {
        for c in 0..split.n_classes() {
            let n = split.count(c, device);
            self.per_mec[mec][c] += n;
            self.class_total[c] += n;
            self.mec_total[mec] += n;
            self.total += n;
        }
    }

    pub(crate) fn remove(&mut self, split: &DataSplit, device: usize, mec: usize) {
        for c in 0..split.n_classes() {
            let n = split.count(c, device);
            self.per_mec[mec][c] -= n;
            self.class_total[c] -= n;
            self.mec_total[mec] -= n;
            self.total -= n;
        }
    }

    /// Divergence against a fixed reference distribution.
    pub(crate) fn theta(&self, reference: &[f64]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let total = self.total as f64;
        let mut theta = 0.0;
        for (counts, &n_m) in self.per_mec.iter().zip(&self.mec_total) {
            if n_m == 0 {
                continue;
            }
            let n_m = n_m as f64;
            let gap: f64 = counts.iter().zip(reference).map(|(&n, p)| (p - n as f64 / n_m).abs()).sum();
            theta += n_m / total * gap;
        }
        theta
    }

    /// Divergence against the class distribution of the counted devices themselves.
    pub(crate) fn theta_self(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let total = self.total as f64;
        let p: Vec<f64> = self.class_total.iter().map(|&n| n as f64 / total).collect();
        self.theta(&p)
    }
}

/// Dataset-size weighted L1 gap between each MEC's class distribution and
/// the global one. MECs without devices contribute nothing.
pub fn divergence(split: &DataSplit, assoc: &Association) -> f64 {
    ClassCounts::from_devices(split, assoc, |_| true).theta_self()
}

/// Divergence of the active devices only, measured against the global class
/// distribution of the whole population.
pub fn divergence_active(split: &DataSplit, assoc: &Association, active: &[bool]) -> f64 {
    let p = split.global_distribution();
    ClassCounts::from_devices(split, assoc, |k| active[k]).theta(&p)
}

/// Every device to a MEC drawn uniformly among those with spare capacity.
pub fn random_associate<R: Rng + ?Sized>(
    n_mecs: usize,
    n_devices: usize,
    capacity: Option<usize>,
    rng: &mut R,
) -> Result<Association> {
    if n_mecs == 0 {
        return Err(Error::InvalidArgument("need at least one MEC".into()));
    }
    let cap = capacity.unwrap_or(usize::MAX);
    let mut load = vec![0usize; n_mecs];
    let mut mec_of = Vec::with_capacity(n_devices);
    for k in 0..n_devices {
        let open: Vec<usize> = (0..n_mecs).filter(|&m| load[m] < cap).collect();
        if open.is_empty() {
            return Err(Error::NoCapacity(k));
        }
        let m = open[rng.random_range(0..open.len())];
        load[m] += 1;
        mec_of.push(m);
    }
    Association::new(n_mecs, mec_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// Eq.-4 divergence written out directly from the matrices.
    pub(crate) fn theta_oracle(s: &[Vec<u64>], chi: &[Vec<u8>]) -> f64 {
        let c = s.len();
        let k = s[0].len();
        let total: f64 = s.iter().flatten().sum::<u64>() as f64;
        let p: Vec<f64> = s.iter().map(|r| r.iter().sum::<u64>() as f64 / total).collect();
        let mut theta = 0.0;
        for row in chi {
            let under: Vec<usize> = (0..k).filter(|&j| row[j] == 1).collect();
            let n_m: f64 = under.iter().map(|&j| (0..c).map(|i| s[i][j]).sum::<u64>()).sum::<u64>() as f64;
            if n_m == 0.0 {
                continue;
            }
            let mut l1 = 0.0;
            for i in 0..c {
                let n_mi: f64 = under.iter().map(|&j| s[i][j]).sum::<u64>() as f64;
                l1 += (p[i] - n_mi / n_m).abs();
            }
            theta += n_m / total * l1;
        }
        theta
    }

    #[test]
    fn data_split_rejects_empty_device() {
        assert!(DataSplit::new(vec![vec![1, 0], vec![2, 0]]).is_err());
        assert!(DataSplit::new(vec![vec![1, 2], vec![2]]).is_err());
        let s = DataSplit::new(vec![vec![1, 3], vec![2, 0]]).unwrap();
        assert_eq!(s.global_distribution(), vec![4.0 / 6.0, 2.0 / 6.0]);
    }

    #[test]
    fn association_matrix_validation() {
        assert!(Association::from_matrix(&[vec![1, 0], vec![0, 1]]).is_ok());
        assert!(Association::from_matrix(&[vec![1, 1], vec![0, 1]]).is_err());
        assert!(Association::from_matrix(&[vec![0, 0], vec![0, 1]]).is_err());
        assert!(Association::from_matrix(&[vec![2, 0], vec![0, 1]]).is_err());
        let a = Association::new(3, vec![2, 0, 2]).unwrap();
        assert_eq!(Association::from_matrix(&a.to_matrix()).unwrap(), a);
    }

    #[test]
    fn divergence_hand_examples() {
        // every MEC mirrors the global distribution
        let s = DataSplit::new(vec![vec![10, 20], vec![5, 10]]).unwrap();
        let a = Association::new(2, vec![0, 1]).unwrap();
        assert!(divergence(&s, &a).abs() < 1e-12);
        // two MECs each holding one pure class
        let s = DataSplit::new(vec![vec![50, 0], vec![0, 50]]).unwrap();
        let a = Association::new(2, vec![0, 1]).unwrap();
        assert!((divergence(&s, &a) - 1.0).abs() < 1e-12);
        // one device, one MEC
        let s = DataSplit::new(vec![vec![3], vec![9]]).unwrap();
        assert!(divergence(&s, &Association::new(1, vec![0]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn random_association_shares() {
        let a = random_associate(1, 10, None, &mut SimRng::seed_from_u64(1)).unwrap();
        assert!(a.as_slice().iter().all(|&m| m == 0));
        let a = random_associate(4, 100_000, None, &mut SimRng::seed_from_u64(2)).unwrap();
        for load in a.loads() {
            assert!((load as f64 / 1e5 - 0.25).abs() < 0.01);
        }
        let b = random_associate(4, 100, Some(30), &mut SimRng::seed_from_u64(3)).unwrap();
        assert_eq!(b, random_associate(4, 100, Some(30), &mut SimRng::seed_from_u64(3)).unwrap());
        assert!(b.loads().iter().all(|&l| l <= 30));
        assert!(random_associate(2, 5, Some(2), &mut SimRng::seed_from_u64(3)).is_err());
    }

    fn split_strategy() -> impl Strategy<Value = (Vec<Vec<u64>>, Vec<usize>, usize)> {
        (1usize..5, 1usize..8, 1usize..4).prop_flat_map(|(c, k, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u64..30, k), c),
                proptest::collection::vec(0..m, k),
                Just(m),
            )
        })
    }

    proptest! {
        #[test]
        fn divergence_matches_oracle_and_is_bounded((mut s, mec_of, m) in split_strategy()) {
            for k in 0..s[0].len() {
                s[0][k] += 1;
            }
            let split = DataSplit::new(s.clone()).unwrap();
            let a = Association::new(m, mec_of).unwrap();
            let theta = divergence(&split, &a);
            prop_assert!((theta - theta_oracle(&s, &a.to_matrix())).abs() < 1e-12);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&theta));
            let all = vec![true; split.n_devices()];
            prop_assert!((divergence_active(&split, &a, &all) - theta).abs() < 1e-12);
        }
    }
}
