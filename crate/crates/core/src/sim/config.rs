use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;

use crate::energy::{DeviceEnergyParams, EnergyModel};
use crate::topology::{frames_per_cell, MobilityParams};
use crate::{Error, Result};

/// Device association policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Bfs,
    H2rma,
    Random,
}

/// Per-frame device scheduling rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduling {
    Off,
    Heuristic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mobility {
    Off,
    Hmm,
}

/// How the scheduling threshold is chosen each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Percentile (0 to 100) of the current access energies.
    Percentile(f64),
    /// Fixed value in joules.
    Absolute(f64),
}

macro_rules! named_enum {
    ($t:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }

            pub fn parse(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(Self::$v),)+
                    _ => Err(Error::InvalidArgument(alloc::format!(
                        concat!("unknown ", stringify!($t), " '{}'"), s
                    ))),
                }
            }
        }
    };
}

named_enum!(Policy { Bfs => "bfs", H2rma => "h2rma", Random => "random" });
named_enum!(Scheduling { Off => "off", Heuristic => "heuristic", Random => "random" });
named_enum!(Mobility { Off => "off", Hmm => "hmm" });

/// Every knob of one experiment. Units are SI unless the name says
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_cu: usize,
    pub n_mec: usize,
    /// Number of MECs.
    pub m: usize,
    /// Number of devices.
    pub k: usize,
    /// Number of frames (one FL round each).
    pub l: usize,
    /// Number of classes.
    pub c: usize,
    pub b_max: f64,
    pub b_0: f64,
    /// Pathloss exponent.
    pub nu: f64,
    /// Pathloss reference distance.
    pub d0: f64,
    /// Bandwidth, Hz.
    pub lambda: f64,
    /// CPU frequency, Hz.
    pub vartheta: f64,
    /// CPU cycles per bit.
    pub omega: f64,
    /// Effective switched capacitance of the device chip.
    pub varsigma: f64,
    pub theta_max: f64,
    pub cell_radius: f64,
    pub circuit_power_dbm: f64,
    pub noise_psd_dbm: f64,
    /// Frame duration T, s.
    pub frame_duration: f64,
    /// Time the circuits are on per frame; `None` means the whole frame.
    pub circuit_time: Option<f64>,
    /// Device target rate; `None` means `lambda`.
    pub rate_dev: Option<f64>,
    /// MEC backhaul target rate; `None` means `lambda`.
    pub rate_mec: Option<f64>,
    /// Rician K-factor of the backhaul, linear.
    pub rician_k: f64,
    /// Grid price per frame and MEC; `None` means 1 everywhere. A short
    /// table repeats its last row.
    pub alpha: Option<Vec<Vec<f64>>>,
    pub policy: Policy,
    pub scheduling: Scheduling,
    pub mobility: Mobility,
    /// Re-associate moving devices (only meaningful with mobility).
    pub dhda: bool,
    /// Reuse the first frame's channel in every frame.
    pub frozen_channel: bool,
    pub e_th: Threshold,
    pub seed: u64,
    /// Run local training and evaluation (off for energy-only studies).
    pub train: bool,
    pub n_features: usize,
    pub classes_per_device: usize,
    pub samples_min: u64,
    pub samples_max: u64,
    /// Scale of the random class centres.
    pub class_sep: f64,
    pub noise_std: f64,
    pub test_per_class: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs_local: usize,
    /// Micro-cell edge, m.
    pub mu: f64,
    pub mobility_params: MobilityParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_cu: 128,
            n_mec: 16,
            m: 8,
            k: 20,
            l: 50,
            c: 10,
            b_max: 1000.0,
            b_0: 200.0,
            nu: 3.7,
            d0: 1.0,
            lambda: 20e6,
            vartheta: 1e9,
            omega: 40.0,
            varsigma: 1e-27,
            theta_max: 0.5,
            cell_radius: 200.0,
            circuit_power_dbm: 30.0,
            noise_psd_dbm: -174.0,
            frame_duration: 10.0,
            circuit_time: None,
            rate_dev: None,
            rate_mec: None,
            rician_k: 10.0,
            alpha: None,
            policy: Policy::H2rma,
            scheduling: Scheduling::Off,
            mobility: Mobility::Off,
            dhda: true,
            frozen_channel: false,
            e_th: Threshold::Percentile(75.0),
            seed: 0,
            train: true,
            n_features: 16,
            classes_per_device: 2,
            samples_min: 20,
            samples_max: 80,
            class_sep: 1.0,
            noise_std: 1.0,
            test_per_class: 200,
            lr: 0.1,
            batch: 32,
            epochs_local: 1,
            mu: 20.0,
            mobility_params: MobilityParams::default(),
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(String::from(msg)));
        if self.m == 0 || self.k == 0 || self.c == 0 || self.n_mec == 0 {
            return bad("m, k, c and n_mec must be positive");
        }
        // BD needs a non-trivial null space of the other MECs' channels.
        if self.n_cu <= (self.m - 1) * self.n_mec {
            return bad("n_cu must exceed (m - 1) * n_mec for block diagonalization");
        }
        if self.k > self.m * self.n_mec {
            return bad("k exceeds m * n_mec: zero forcing cannot serve every device");
        }
        if !(self.b_max > 0.0 && self.b_0 >= 0.0 && self.b_0 <= self.b_max) {
            return bad("need 0 <= b_0 <= b_max and b_max > 0");
        }
        let positive = [
            self.nu,
            self.d0,
            self.lambda,
            self.vartheta,
            self.omega,
            self.varsigma,
            self.cell_radius,
            self.frame_duration,
            self.noise_std,
            self.lr,
            self.mu,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("physical constants must be positive and finite");
        }
        if !(self.theta_max >= 0.0) || !(self.rician_k >= 0.0) || !(self.class_sep >= 0.0) {
            return bad("theta_max, rician_k and class_sep must be non-negative");
        }
        for r in [self.circuit_time, self.rate_dev, self.rate_mec].into_iter().flatten() {
            if !(r > 0.0) {
                return bad("circuit_time and rates must be positive");
            }
        }
        if let Some(a) = &self.alpha {
            if a.is_empty() || a.iter().any(|row| row.len() != self.m || row.iter().any(|v| !(*v >= 0.0))) {
                return bad("alpha needs rows of m non-negative prices");
            }
        }
        let (Threshold::Absolute(v) | Threshold::Percentile(v)) = self.e_th;
        if v.is_nan() {
            return bad("e_th is NaN");
        }
        if self.classes_per_device == 0 || self.classes_per_device > self.c {
            return bad("classes_per_device must be in 1..=c");
        }
        if self.samples_min == 0 || self.samples_min > self.samples_max {
            return bad("need 1 <= samples_min <= samples_max");
        }
        if self.batch == 0 || self.n_features == 0 {
            return bad("batch and n_features must be positive");
        }
        if self.mobility == Mobility::Hmm {
            self.mobility_params.validate()?;
        }
        Ok(())
    }

    /// Noise power over the band, W.
    pub fn sigma2(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm) * self.lambda
    }

    pub fn circuit_power(&self) -> f64 {
        dbm_to_watts(self.circuit_power_dbm)
    }

    /// Circuit energy per frame, the same for devices and MECs.
    pub fn circuit_energy(&self) -> f64 {
        self.circuit_power() * self.circuit_time.unwrap_or(self.frame_duration)
    }

    /// Model payload in bits.
    pub fn model_bits(&self) -> f64 {
        32.0 * (self.c * (self.n_features + 1)) as f64
    }

    pub fn energy_model(&self) -> EnergyModel {
        EnergyModel {
            device: DeviceEnergyParams {
                chip_coeff: self.varsigma,
                cycles_per_bit: self.omega,
                cpu_freq: self.vartheta,
                model_bits: self.model_bits(),
                circuit_energy: self.circuit_energy(),
                rate: self.rate_dev.unwrap_or(self.lambda),
            },
            mec_circuit_energy: self.circuit_energy(),
            mec_rate: self.rate_mec.unwrap_or(self.lambda),
            bandwidth: self.lambda,
            sigma2: self.sigma2(),
            n_mec: self.n_mec,
        }
    }

    /// Grid prices of frame `l`.
    pub fn alpha_row(&self, l: usize) -> Vec<f64> {
        match &self.alpha {
            None => alloc::vec![1.0; self.m],
            Some(t) => t[l.min(t.len() - 1)].clone(),
        }
    }

    /// Full price table, one row per frame.
    pub fn alpha_table(&self) -> Vec<Vec<f64>> {
        (0..self.l.max(1)).map(|l| self.alpha_row(l)).collect()
    }

    /// Frames for a normal and a risky worker to cross a micro-cell.
    pub fn psi(&self) -> (Option<u64>, Option<u64>) {
        let p = &self.mobility_params;
        (
            frames_per_cell(self.mu, self.frame_duration, p.v_normal),
            frames_per_cell(self.mu, self.frame_duration, p.v_risky),
        )
    }
}
