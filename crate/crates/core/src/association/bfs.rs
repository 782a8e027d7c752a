//! Exhaustive association search and the fixed-association energy loop.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;

use super::{Association, ClassCounts, DataSplit};
use crate::channel::{zf_noise_gains, CMatrix};
use crate::energy::{settle_frame, BatteryState, EnergyLedger, EnergyModel, FrameInputs};
use crate::{Error, Result};

/// Largest number of assignments [`bfs_optimal`] will enumerate.
pub const BFS_BUDGET: f64 = 1e7;

/// Channel state of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameChannel {
    /// Unit-variance fading per MEC, `N_mec x K` (every device has a column).
    pub fading: Vec<CMatrix>,
    /// `||H_m W_m||^2` per MEC.
    pub bd_gain: Vec<f64>,
}

/// Inputs to evaluate a fixed association over `n_frames` frames.
///
/// Frame `l` uses `channels[l % channels.len()]`, so a single entry gives the
/// frozen-channel mode.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    pub channels: Vec<FrameChannel>,
    /// `gains[m][k]`.
    pub gains: Vec<Vec<f64>>,
    pub model: EnergyModel,
    pub b0: f64,
    pub b_max: f64,
    pub n_frames: usize,
    /// Grid price `alpha[l][m]`; a short table repeats its last row.
    pub alpha: Vec<Vec<f64>>,
}

impl EnergyContext {
    pub fn n_mecs(&self) -> usize {
        self.gains.len()
    }

    pub fn n_devices(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, frame: usize) -> &FrameChannel {
        &self.channels[frame % self.channels.len()]
    }

    pub fn alpha(&self, frame: usize) -> &[f64] {
        &self.alpha[frame.min(self.alpha.len() - 1)]
    }

    pub fn batteries(&self) -> Result<Vec<BatteryState>> {
        (0..self.n_devices()).map(|_| BatteryState::new(self.b0, self.b_max)).collect()
    }
}

/// Run the WET / battery / ledger loop for a fixed association with every
/// device active.
pub fn run_fixed_association(ctx: &EnergyContext, assoc: &Association) -> Result<EnergyLedger> {
    let mut ledger = EnergyLedger::new();
    if ctx.n_frames == 0 {
        return Ok(ledger);
    }
    if ctx.channels.is_empty() || ctx.alpha.is_empty() {
        return Err(Error::InvalidArgument("energy context needs channels and prices".into()));
    }
    let mut batteries = ctx.batteries()?;
    let active = vec![true; assoc.n_devices()];
    for l in 0..ctx.n_frames {
        let ch = ctx.channel(l);
        let noise = zf_noise_gains(&ch.fading, &ctx.gains, assoc.as_slice(), &active)?;
        let input = FrameInputs {
            frame: l,
            mec_of: assoc.as_slice(),
            active: &active,
            gains: &ctx.gains,
            noise_gain: &noise,
            bd_gain: &ch.bd_gain,
            alpha: ctx.alpha(l),
        };
        ledger.record(settle_frame(&ctx.model, &input, &mut batteries)?);
    }
    Ok(ledger)
}

/// Grid cost of an association, or `None` when it breaks the divergence
/// bound or a MEC serves more devices than it has antennas.
pub fn evaluate_association(
    ctx: &EnergyContext,
    split: &DataSplit,
    assoc: &Association,
    theta_max: f64,
) -> Result<Option<f64>> {
    if assoc.loads().iter().any(|&n| n > ctx.model.n_mec) {
        return Ok(None);
    }
    if super::divergence(split, assoc) > theta_max {
        return Ok(None);
    }
    run_fixed_association(ctx, assoc).map(|l| Some(l.delta()))
}

/// Enumerate every association in lexicographic order and keep the cheapest
/// feasible one (ties keep the earlier assignment).
pub fn bfs_optimal(
    ctx: &EnergyContext,
    split: &DataSplit,
    theta_max: f64,
) -> Result<(Association, f64)> {
    let m = ctx.n_mecs();
    let k = split.n_devices();
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one MEC".into()));
    }
    let candidates = (m as f64).powi(k as i32);
    if candidates > BFS_BUDGET {
        return Err(Error::BfsBudget { candidates, budget: BFS_BUDGET });
    }
    let mut digits = vec![0usize; k];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if let Some(cost) = evaluate_digits(ctx, split, &digits, theta_max)? {
            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                best = Some((digits.clone(), cost));
            }
        }
        // odometer, last device fastest
        let mut i = k;
        loop {
            if i == 0 {
                let (mec_of, cost) = best.ok_or(Error::ThetaInfeasible)?;
                return Ok((Association::new(m, mec_of)?, cost));
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < m {
                break;
            }
            digits[i] = 0;
        }
    }
}

fn evaluate_digits(ctx: &EnergyContext, split: &DataSplit, digits: &[usize], theta_max: f64) -> Result<Option<f64>> {
    let mut load = vec![0usize; ctx.n_mecs()];
    for &d in digits {
        load[d] += 1;
        if load[d] > ctx.model.n_mec {
            return Ok(None);
        }
    }
    let assoc = Association::new(ctx.n_mecs(), digits.to_vec())?;
    if ClassCounts::from_devices(split, &assoc, |_| true).theta_self() > theta_max {
        return Ok(None);
    }
    run_fixed_association(ctx, &assoc).map(|l| Some(l.delta()))
}
