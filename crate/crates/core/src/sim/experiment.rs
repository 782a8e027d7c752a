use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;

use super::config::{Mobility, Policy, Scheduling, SimConfig, Threshold};
use crate::association::{
    bfs_optimal, dhda_update, divergence_active, h2rma_associate, percentile, random_associate,
    random_schedule, schedule_devices, Association, DataSplit, DhdaTracker, EnergyContext, FrameChannel,
    Schedule,
};
use crate::channel::{bd_gains, sample_fading, sample_rician, zf_noise_gains};
use crate::energy::{access_energies, settle_frame, BatteryState, EnergyLedger, FrameInputs};
use crate::fl::{
    class_means, cu_aggregate, evaluate, local_train, mec_aggregate, skewed_split, synth_datasets, LocalDataset,
    ModelWeights,
};
use crate::rng::{substream, SimRng, Stream};
use crate::topology::{gain_matrix, micro_cell_of, place_uniform, HiddenState, MicroCellGrid, Position, Worker};
use crate::{Error, Result};

/// Everything about a run that does not depend on the policy: placement,
/// data split and datasets.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mecs: Vec<Position>,
    /// Initial device positions.
    pub devices: Vec<Position>,
    /// Initial `gains[m][k]`.
    pub gains: Vec<Vec<f64>>,
    pub split: DataSplit,
    /// Empty when training is off.
    pub datasets: Vec<LocalDataset>,
    pub test: Option<LocalDataset>,
}

pub fn build_scenario(cfg: &SimConfig) -> Result<Scenario> {
    let mut rng = substream(cfg.seed, Stream::Placement, 0, 0);
    let mecs = place_uniform(cfg.m, cfg.cell_radius, &mut rng);
    let devices = place_uniform(cfg.k, cfg.cell_radius, &mut rng);
    let gains = gain_matrix(&mecs, &devices, cfg.nu, cfg.d0);
    let mut rng = substream(cfg.seed, Stream::Data, 0, 0);
    let split = skewed_split(cfg.c, cfg.k, cfg.classes_per_device, cfg.samples_min, cfg.samples_max, &mut rng)?;
    let (datasets, test) = if cfg.train {
        let mut rng = substream(cfg.seed, Stream::Data, 1, 0);
        let means = class_means(cfg.c, cfg.n_features, cfg.class_sep, &mut rng);
        let (d, t) = synth_datasets(&split, &means, cfg.noise_std, cfg.test_per_class, &mut rng)?;
        (d, Some(t))
    } else {
        (Vec::new(), None)
    };
    Ok(Scenario { mecs, devices, gains, split, datasets, test })
}

/// Channel of frame `l`: unit-variance access fading per MEC and the BD
/// gains of a fresh Rician backhaul.
pub fn sample_frame_channel(cfg: &SimConfig, l: usize) -> Result<FrameChannel> {
    let mut rng = substream(cfg.seed, Stream::Channel, l as u64, 0);
    let fading = (0..cfg.m).map(|_| sample_fading(cfg.n_mec, cfg.k, &mut rng)).collect();
    let backhaul: Vec<_> = (0..cfg.m).map(|_| sample_rician(cfg.n_mec, cfg.n_cu, cfg.rician_k, &mut rng)).collect();
    Ok(FrameChannel { fading, bd_gain: bd_gains(&backhaul)? })
}

/// Channels for the whole run (a single entry in frozen mode).
pub fn sample_channels(cfg: &SimConfig) -> Result<Vec<FrameChannel>> {
    let n = if cfg.frozen_channel { 1 } else { cfg.l };
    (0..n).map(|l| sample_frame_channel(cfg, l)).collect()
}

/// Energy context for evaluating fixed associations on this scenario, on
/// the first frame's channel replicated over all frames.
pub fn frozen_context(cfg: &SimConfig, scenario: &Scenario, first: &FrameChannel) -> EnergyContext {
    EnergyContext {
        channels: vec![first.clone()],
        gains: scenario.gains.clone(),
        model: cfg.energy_model(),
        b0: cfg.b_0,
        b_max: cfg.b_max,
        n_frames: cfg.l,
        alpha: cfg.alpha_table(),
    }
}

/// Learning metrics after one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMetrics {
    /// 1-based.
    pub round: usize,
    pub theta: f64,
    pub accuracy: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationRecord {
    pub frame: usize,
    pub device: usize,
    pub mec: usize,
    pub active: bool,
    /// Divergence of the frame's active set.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub frame: usize,
    pub device: usize,
    pub position: Position,
    pub state: HiddenState,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub ledger: EnergyLedger,
    pub metrics: Vec<RoundMetrics>,
    pub initial_association: Option<Association>,
    pub associations: Vec<AssociationRecord>,
    /// Empty without mobility.
    pub trace: Vec<TraceRecord>,
    /// Divergence of the active set, per frame.
    pub theta: Vec<f64>,
    /// Devices deactivated per frame.
    pub inactive: Vec<usize>,
    /// Filled in by callers that can read a clock.
    pub elapsed: Option<Duration>,
}

impl ExperimentResult {
    pub fn delta(&self) -> f64 {
        self.ledger.delta()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.metrics.last().map(|m| m.accuracy)
    }

    pub fn theta_final(&self) -> Option<f64> {
        self.theta.last().copied()
    }
}

pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let scenario = build_scenario(cfg)?;
    let channels = sample_channels(cfg)?;
    run_on(cfg, &scenario, &channels)
}

/// Initial association under the configured policy.
pub fn associate(cfg: &SimConfig, scenario: &Scenario, channels: &[FrameChannel]) -> Result<Association> {
    match cfg.policy {
        Policy::H2rma => h2rma_associate(&scenario.split, &scenario.gains, cfg.theta_max, Some(cfg.n_mec)),
        Policy::Random => {
            let mut rng = substream(cfg.seed, Stream::Association, 0, 0);
            random_associate(cfg.m, cfg.k, Some(cfg.n_mec), &mut rng)
        }
        Policy::Bfs => {
            let first = channels.first().ok_or_else(|| Error::InvalidArgument("no channel".into()))?;
            bfs_optimal(&frozen_context(cfg, scenario, first), &scenario.split, cfg.theta_max).map(|(a, _)| a)
        }
    }
}

/// Run on a prebuilt scenario and channel set, so several policies can share
/// them. `channels` is indexed by frame modulo its length.
pub fn run_on(cfg: &SimConfig, scenario: &Scenario, channels: &[FrameChannel]) -> Result<ExperimentResult> {
    let mut out = ExperimentResult {
        ledger: EnergyLedger::new(),
        metrics: Vec::new(),
        initial_association: None,
        associations: Vec::new(),
        trace: Vec::new(),
        theta: Vec::new(),
        inactive: Vec::new(),
        elapsed: None,
    };
    if cfg.l == 0 {
        return Ok(out);
    }
    let split = &scenario.split;
    let model = cfg.energy_model();
    let mut assoc = associate(cfg, scenario, channels)?;
    out.initial_association = Some(assoc.clone());

    let mut batteries: Vec<BatteryState> =
        (0..cfg.k).map(|_| BatteryState::new(cfg.b_0, cfg.b_max)).collect::<Result<_>>()?;
    let mut global = ModelWeights::zeros(cfg.c, cfg.n_features);
    let mut gains = scenario.gains.clone();

    let mobile = cfg.mobility == Mobility::Hmm;
    let grid = MicroCellGrid::new(cfg.mu, Position::new(-cfg.cell_radius, -cfg.cell_radius))?;
    // one stream per device: a device walks the same path whatever K is
    let mut mob_rngs: Vec<SimRng> =
        (0..cfg.k).map(|k| substream(cfg.seed, Stream::Mobility, k as u64, 0)).collect();
    let mut workers: Vec<Worker> = if mobile {
        scenario.devices.iter().zip(&mut mob_rngs).map(|(&p, r)| Worker::spawn(p, &cfg.mobility_params, r)).collect()
    } else {
        Vec::new()
    };
    let (psi_nml, psi_rsk) = cfg.psi();
    let mut tracker = DhdaTracker::new(
        scenario.devices.iter().map(|p| micro_cell_of(p, &grid)).collect(),
        psi_nml,
        psi_rsk,
        cfg.theta_max,
        Some(cfg.n_mec),
    );

    for l in 0..cfg.l {
        if mobile {
            for (k, (w, r)) in workers.iter_mut().zip(&mut mob_rngs).enumerate() {
                w.advance(&cfg.mobility_params, cfg.frame_duration, cfg.cell_radius, r);
                out.trace.push(TraceRecord {
                    frame: l,
                    device: k,
                    position: w.position,
                    state: w.mobility.state,
                    speed: w.mobility.speed,
                });
            }
            let positions: Vec<Position> = workers.iter().map(|w| w.position).collect();
            gains = gain_matrix(&scenario.mecs, &positions, cfg.nu, cfg.d0);
            if cfg.dhda {
                let cells: Vec<(i64, i64)> = positions.iter().map(|p| micro_cell_of(p, &grid)).collect();
                dhda_update(&mut assoc, &mut tracker, &cells, (l + 1) as u64, split, &gains)?;
            }
        }

        let ch = &channels[l % channels.len()];
        let schedule = schedule_frame(cfg, l, split, &assoc, &gains, ch)?;
        let noise = zf_noise_gains(&ch.fading, &gains, assoc.as_slice(), &schedule.active)?;
        let alpha = cfg.alpha_row(l);
        let input = FrameInputs {
            frame: l,
            mec_of: assoc.as_slice(),
            active: &schedule.active,
            gains: &gains,
            noise_gain: &noise,
            bd_gain: &ch.bd_gain,
            alpha: &alpha,
        };
        out.ledger.record(settle_frame(&model, &input, &mut batteries)?);

        let theta = divergence_active(split, &assoc, &schedule.active);
        out.theta.push(theta);
        out.inactive.push(schedule.n_inactive());
        for k in 0..cfg.k {
            out.associations.push(AssociationRecord {
                frame: l,
                device: k,
                mec: assoc.mec_of(k),
                active: schedule.active[k],
                theta,
            });
        }

        if let Some(test) = &scenario.test {
            global = train_round(cfg, l, scenario, &assoc, &schedule.active, &global)?;
            let (accuracy, loss) = evaluate(&global, test);
            out.metrics.push(RoundMetrics { round: l + 1, theta, accuracy, loss });
        }
    }
    Ok(out)
}

fn schedule_frame(
    cfg: &SimConfig,
    l: usize,
    split: &DataSplit,
    assoc: &Association,
    gains: &[Vec<f64>],
    ch: &FrameChannel,
) -> Result<Schedule> {
    if cfg.scheduling == Scheduling::Off {
        return Ok(Schedule::all_active(cfg.k));
    }
    let all = vec![true; cfg.k];
    let noise = zf_noise_gains(&ch.fading, gains, assoc.as_slice(), &all)?;
    let e_ac = access_energies(&cfg.energy_model(), &all, &noise)?;
    let e_th = match cfg.e_th {
        Threshold::Percentile(q) => percentile(&e_ac, q),
        Threshold::Absolute(v) => v,
    };
    Ok(match cfg.scheduling {
        Scheduling::Heuristic => schedule_devices(&e_ac, e_th, split, assoc, cfg.theta_max),
        _ => {
            let n_off = e_ac.iter().filter(|&&e| e > e_th).count();
            let mut rng = substream(cfg.seed, Stream::Scheduling, l as u64, 0);
            random_schedule(cfg.k, n_off, &mut rng)
        }
    })
}

/// One FL round: local SGD on every active device, then MEC and CU
/// averaging. MECs without active devices sit the round out; with nobody
/// active the global model is unchanged.
fn train_round(
    cfg: &SimConfig,
    l: usize,
    scenario: &Scenario,
    assoc: &Association,
    active: &[bool],
    global: &ModelWeights,
) -> Result<ModelWeights> {
    let lr = cfg.lr / ((l + 1) as f64).sqrt();
    let mut local: Vec<Option<ModelWeights>> = vec![None; cfg.k];
    for k in 0..cfg.k {
        if active[k] {
            let mut rng = substream(cfg.seed, Stream::Training, l as u64, k as u64);
            local[k] = Some(local_train(global, &scenario.datasets[k], cfg.epochs_local, lr, cfg.batch, &mut rng)?);
        }
    }
    let mut mec_models = Vec::new();
    let mut mec_sizes = Vec::new();
    for m in 0..cfg.m {
        let members: Vec<usize> = assoc.devices_of(m).filter(|&k| active[k]).collect();
        if members.is_empty() {
            continue;
        }
        let ws: Vec<&ModelWeights> = members.iter().filter_map(|&k| local[k].as_ref()).collect();
        let sizes: Vec<u64> = members.iter().map(|&k| scenario.split.device_total(k)).collect();
        mec_models.push(mec_aggregate(&ws, &sizes)?);
        mec_sizes.push(sizes.iter().sum());
    }
    if mec_models.is_empty() {
        return Ok(global.clone());
    }
    cu_aggregate(&mec_models.iter().collect::<Vec<_>>(), &mec_sizes)
}
