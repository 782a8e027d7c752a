//! Heuristic device association (H2RMA).

use alloc::vec;

use super::{run_fixed_association, Association, ClassCounts, DataSplit, EnergyContext, MecRange};
use crate::energy::EnergyLedger;
use crate::{Error, Result};

/// Place one device with the H2RMA rule and commit it to `counts`, `ranges`
/// and `load`.
///
/// Among MECs whose range covers the device, pick the one with the smallest
/// divergence, as long as it stays within `theta_max`. Divergence is measured
/// over the devices already counted plus this one. If no MEC qualifies, fall
/// back to the closest MEC and stretch its range. Full MECs are skipped.
/// Ties go to the lowest index.
pub(crate) fn place_device(
    device: usize,
    split: &DataSplit,
    gains: &[alloc::vec::Vec<f64>],
    theta_max: f64,
    capacity: usize,
    counts: &mut ClassCounts,
    ranges: &mut MecRange,
    load: &mut [usize],
) -> Result<usize> {
    let n_mecs = gains.len();
    let mut best: Option<usize> = None;
    let mut theta_min = theta_max;
    for m in 0..n_mecs {
        if load[m] >= capacity || !ranges.in_range(m, gains[m][device]) {
            continue;
        }
        counts.add(split, device, m);
        let theta = counts.theta_self();
        counts.remove(split, device, m);
        let better = match best {
            None => theta <= theta_min,
            Some(_) => theta < theta_min,
        };
        if better {
            best = Some(m);
            theta_min = theta;
        }
    }
    let chosen = match best {
        Some(m) => m,
        None => {
            let mut closest: Option<usize> = None;
            for m in 0..n_mecs {
                if load[m] < capacity && closest.is_none_or(|c| gains[m][device] > gains[c][device]) {
                    closest = Some(m);
                }
            }
            let m = closest.ok_or(Error::NoCapacity(device))?;
            ranges.extend(m, gains[m][device]);
            m
        }
    };
    counts.add(split, device, chosen);
    load[chosen] += 1;
    Ok(chosen)
}

/// Associate devices one by one in index order with the H2RMA rule.
///
/// `gains[m][k]` is the pathloss gain between MEC `m` and device `k`;
/// `capacity` caps the devices per MEC (ZF needs `K_m <= N_mec`).
pub fn h2rma_associate(
    split: &DataSplit,
    gains: &[alloc::vec::Vec<f64>],
    theta_max: f64,
    capacity: Option<usize>,
) -> Result<Association> {
    let n_mecs = gains.len();
    if n_mecs == 0 {
        return Err(Error::InvalidArgument("need at least one MEC".into()));
    }
    let k = split.n_devices();
    let cap = capacity.unwrap_or(usize::MAX);
    let mut counts = ClassCounts::new(n_mecs, split.n_classes());
    let mut ranges = MecRange::empty(n_mecs);
    let mut load = vec![0usize; n_mecs];
    let mut mec_of = vec![0usize; k];
    for (dev, slot) in mec_of.iter_mut().enumerate() {
        *slot = place_device(dev, split, gains, theta_max, cap, &mut counts, &mut ranges, &mut load)?;
    }
    Association::new(n_mecs, mec_of)
}

/// H2RMA end to end on a prepared energy context: associate on the context's
/// first-frame gains, then run the WET / battery / ledger loop over all frames.
pub fn h2rma_run(
    ctx: &EnergyContext,
    split: &DataSplit,
    theta_max: f64,
) -> Result<(Association, EnergyLedger)> {
    let assoc = h2rma_associate(split, &ctx.gains, theta_max, Some(ctx.model.n_mec))?;
    let ledger = run_fixed_association(ctx, &assoc)?;
    Ok((assoc, ledger))
}
