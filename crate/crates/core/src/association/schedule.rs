//! Per-frame device scheduling.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;
use rand::Rng;

use super::{Association, ClassCounts, DataSplit};

/// Active set of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub active: Vec<bool>,
    /// Deactivation candidates in the order they were considered.
    pub omega: Vec<usize>,
}

impl Schedule {
    pub fn all_active(n_devices: usize) -> Self {
        Self { active: vec![true; n_devices], omega: Vec::new() }
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn n_inactive(&self) -> usize {
        self.active.len() - self.n_active()
    }
}

/// Linear-interpolation percentile, `q` in `[0, 100]`. NaN for empty input.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 100.0) / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Deactivate devices whose access energy exceeds `e_th`, costliest first,
/// as long as the divergence of the remaining active devices (against the
/// class distribution of the whole population) stays within `theta_max`.
pub fn schedule_devices(
    e_ac: &[f64],
    e_th: f64,
    split: &DataSplit,
    assoc: &Association,
    theta_max: f64,
) -> Schedule {
    let mut omega: Vec<usize> = (0..e_ac.len()).filter(|&k| e_ac[k] > e_th).collect();
    omega.sort_by(|&a, &b| e_ac[b].total_cmp(&e_ac[a]).then(a.cmp(&b)));
    let p = split.global_distribution();
    let mut counts = ClassCounts::from_devices(split, assoc, |_| true);
    let mut active = vec![true; e_ac.len()];
    for &k in &omega {
        let m = assoc.mec_of(k);
        counts.remove(split, k, m);
        if counts.theta(&p) <= theta_max {
            active[k] = false;
        } else {
            counts.add(split, k, m);
        }
    }
    Schedule { active, omega }
}

/// Deactivate `n_off` devices drawn uniformly without replacement.
pub fn random_schedule<R: Rng + ?Sized>(n_devices: usize, n_off: usize, rng: &mut R) -> Schedule {
    let mut active = vec![true; n_devices];
    let mut omega = sample(rng, n_devices, n_off.min(n_devices)).into_vec();
    omega.sort_unstable();
    for &k in &omega {
        active[k] = false;
    }
    Schedule { active, omega }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::divergence_active;
    use crate::rng::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 75.0), 4.0);
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 75.0), 3.25);
        assert_eq!(percentile(&[7.0], 30.0), 7.0);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn infinite_threshold_keeps_everyone() {
        let s = DataSplit::new(vec![vec![1, 2, 3], vec![3, 2, 1]]).unwrap();
        let a = Association::new(2, vec![0, 1, 1]).unwrap();
        let sch = schedule_devices(&[0.2, 0.7, 0.6], f64::INFINITY, &s, &a, 0.5);
        assert!(sch.active.iter().all(|&x| x));
        assert!(sch.omega.is_empty());
    }

    #[test]
    fn candidates_sorted_by_energy() {
        // iid split: every deactivation keeps theta at 0
        let s = DataSplit::new(vec![vec![2, 2, 2], vec![2, 2, 2]]).unwrap();
        let a = Association::new(1, vec![0, 0, 0]).unwrap();
        let sch = schedule_devices(&[0.2, 0.7, 0.6], 0.5, &s, &a, 0.5);
        assert_eq!(sch.omega, vec![1, 2]);
        assert_eq!(sch.active, vec![true, false, false]);
    }

    #[test]
    fn zero_slack_rejects_skewing_deactivations() {
        let s = DataSplit::new(vec![vec![5, 0, 5], vec![0, 5, 5]]).unwrap();
        let a = Association::new(1, vec![0, 0, 0]).unwrap();
        let sch = schedule_devices(&[1.0, 1.0, 1.0], 0.0, &s, &a, 0.0);
        // dropping dev0 or dev1 skews the single MEC; dropping dev2 keeps it
        // balanced
        assert_eq!(sch.active, vec![true, true, false]);
    }

    #[test]
    fn random_schedule_counts() {
        let mut rng = SimRng::seed_from_u64(3);
        let sch = random_schedule(10, 3, &mut rng);
        assert_eq!(sch.n_inactive(), 3);
        assert_eq!(random_schedule(4, 9, &mut rng).n_active(), 0);
    }

    proptest! {
        #[test]
        fn accepted_schedules_respect_theta(
            cols in prop::collection::vec((0u64..20, 1u64..20, 0usize..3, 0.0f64..1.0), 1..12),
            theta_max in 0.0f64..1.0,
        ) {
            let s = DataSplit::new(vec![
                cols.iter().map(|c| c.0).collect(),
                cols.iter().map(|c| c.1).collect(),
            ]).unwrap();
            let a = Association::new(3, cols.iter().map(|c| c.2).collect()).unwrap();
            let e: Vec<f64> = cols.iter().map(|c| c.3).collect();
            let base = divergence_active(&s, &a, &vec![true; cols.len()]);
            let sch = schedule_devices(&e, percentile(&e, 75.0), &s, &a, theta_max);
            let theta = divergence_active(&s, &a, &sch.active);
            if sch.n_inactive() > 0 {
                prop_assert!(theta <= theta_max + 1e-12);
            } else {
                prop_assert!((theta - base).abs() < 1e-12);
            }
        }
    }
}
