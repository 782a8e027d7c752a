//! Network geometry and worker mobility.
//!
//! The CU sits at the origin of a circular macro-cell; MECs and devices are
//! dropped uniformly inside it. Devices may move according to a three-state
//! hidden Markov model (static / normal / risky) with Gamma-distributed step
//! lengths and Von Mises turning angles.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Average power gain of a link, in `(0, 1]`. Larger means closer.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PathlossGain(f64);

impl PathlossGain {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0 && beta <= 1.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "pathloss gain {beta} outside [0, 1]"
            )));
        }
        Ok(Self(beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Clamped power law `(max(d, d0) / d0)^(-nu)`.
pub fn pathloss_gain(d: f64, nu: f64, d0: f64) -> PathlossGain {
    debug_assert!(d >= 0.0 && nu > 0.0 && d0 > 0.0);
    PathlossGain((d.max(d0) / d0).powf(-nu))
}

/// `n` points i.i.d. uniform over the disk of the given radius around the origin.
pub fn place_uniform<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<Position> {
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            Position::new(r * phi.cos(), r * phi.sin())
        })
        .collect()
}

/// Gain matrix `gains[m][k]` between MEC `m` and device `k`.
pub fn gain_matrix(mecs: &[Position], devices: &[Position], nu: f64, d0: f64) -> Vec<Vec<f64>> {
    mecs.iter()
        .map(|m| {
            devices
                .iter()
                .map(|d| pathloss_gain(m.distance(d), nu, d0).value())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HiddenState {
    Static = 0,
    Normal = 1,
    Risky = 2,
}

impl HiddenState {
    pub const ALL: [HiddenState; 3] = [HiddenState::Static, HiddenState::Normal, HiddenState::Risky];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            HiddenState::Static => "static",
            HiddenState::Normal => "normal",
            HiddenState::Risky => "risky",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub state: HiddenState,
    /// Radians.
    pub heading: f64,
    /// Meters per second.
    pub speed: f64,
}

/// Row-stochastic 3x3 transition matrix over [`HiddenState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix([[f64; 3]; 3]);

impl TransitionMatrix {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotRowStochastic { row: i, sum });
            }
        }
        Ok(Self(rows))
    }

    /// `stay` on the diagonal, the remainder split evenly off it.
    pub fn with_stay(stay: f64) -> Result<Self> {
        let off = (1.0 - stay) / 2.0;
        Self::new([[stay, off, off], [off, stay, off], [off, off, stay]])
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    fn sample_next<R: Rng + ?Sized>(&self, from: HiddenState, rng: &mut R) -> HiddenState {
        let row = &self.0[from.index()];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return HiddenState::ALL[j];
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        HiddenState::ALL[row.iter().rposition(|p| *p > 0.0).unwrap_or(2)]
    }

    /// Stationary distribution by power iteration.
    pub fn stationary(&self) -> [f64; 3] {
        let mut pi = [1.0 / 3.0; 3];
        for _ in 0..10_000 {
            let mut next = [0.0; 3];
            for (i, row) in self.0.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] += pi[i] * p;
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        pi
    }
}

/// Parameters of the worker mobility model.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityParams {
    pub transition: TransitionMatrix,
    /// Mean speed of a normal worker, m/s.
    pub v_normal: f64,
    /// Mean speed of a risky worker, m/s.
    pub v_risky: f64,
    /// Meters per step, converts the step-rate threshold to a speed.
    pub step_length: f64,
    /// Normal/risky boundary in steps per minute.
    pub steps_per_minute_threshold: f64,
    pub kappa_normal: f64,
    pub kappa_risky: f64,
    pub gamma_shape: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            transition: TransitionMatrix::with_stay(0.8).expect("valid default"),
            v_normal: 0.5,
            v_risky: 1.5,
            step_length: 0.7,
            steps_per_minute_threshold: 84.0,
            kappa_normal: 4.0,
            kappa_risky: 0.5,
            gamma_shape: 2.0,
        }
    }
}

impl MobilityParams {
    /// Normal/risky speed boundary in m/s.
    pub fn speed_threshold(&self) -> f64 {
        self.steps_per_minute_threshold * self.step_length / 60.0
    }

    pub fn validate(&self) -> Result<()> {
        let thr = self.speed_threshold();
        let ok = self.v_normal > 0.0
            && self.v_normal < thr
            && self.v_risky > thr
            && self.step_length > 0.0
            && self.gamma_shape > 0.0
            && self.kappa_normal >= 0.0
            && self.kappa_risky >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!(
                "mobility parameters inconsistent with the {thr:.3} m/s normal/risky boundary"
            )))
        }
    }

    pub fn kappa(&self, state: HiddenState) -> f64 {
        match state {
            HiddenState::Risky => self.kappa_risky,
            _ => self.kappa_normal,
        }
    }

    /// Speed drawn inside the state's band: 0 when static, `(0, thr]` around
    /// `v_normal` when normal, `(thr, 2 v_risky - thr]` when risky.
    pub fn sample_speed<R: Rng + ?Sized>(&self, state: HiddenState, rng: &mut R) -> f64 {
        let thr = self.speed_threshold();
        let u = 1.0 - rng.random::<f64>(); // (0, 1]
        match state {
            HiddenState::Static => 0.0,
            HiddenState::Normal => u * (2.0 * self.v_normal).min(thr),
            HiddenState::Risky => thr + u * 2.0 * (self.v_risky - thr),
        }
    }
}

/// One HMM transition: new hidden state from row `P[s]`, new speed inside the
/// band of that state. The heading is left for [`sample_displacement`].
pub fn hmm_step<R: Rng + ?Sized>(
    s: &MobilityState,
    params: &MobilityParams,
    rng: &mut R,
) -> MobilityState {
    let state = params.transition.sample_next(s.state, rng);
    MobilityState {
        state,
        heading: s.heading,
        speed: params.sample_speed(state, rng),
    }
}

/// Von Mises(0, kappa) angle in `(-pi, pi]` (Best & Fisher rejection sampler).
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return PI * (2.0 * rng.random::<f64>() - 1.0);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = 1.0 - rng.random::<f64>();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 < 0.5 { -theta } else { theta };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    /// Heading after the turn, radians.
    pub heading: f64,
}

/// Step of Gamma(shape, scale) length along `heading + VonMises(kappa)`.
/// Static workers do not move.
pub fn sample_displacement<R: Rng + ?Sized>(
    s: &MobilityState,
    gamma_shape: f64,
    gamma_scale: f64,
    kappa: f64,
    rng: &mut R,
) -> Displacement {
    if s.state == HiddenState::Static || gamma_scale <= 0.0 {
        return Displacement { dx: 0.0, dy: 0.0, heading: s.heading };
    }
    let gamma = Gamma::new(gamma_shape, gamma_scale).expect("positive gamma parameters");
    let len: f64 = gamma.sample(rng);
    let heading = wrap_angle(s.heading + sample_von_mises(kappa, rng));
    Displacement {
        dx: len * heading.cos(),
        dy: len * heading.sin(),
        heading,
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Frames needed to cross a micro-cell of edge `mu` at speed `v`
/// (`ceil(mu / (T v))`). `None` for a static worker, which never crosses.
pub fn frames_per_cell(mu: f64, frame_duration: f64, v: f64) -> Option<u64> {
    if v <= 0.0 {
        return None;
    }
    let ratio = mu / (frame_duration * v);
    Some((ratio.ceil() as u64).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroCellGrid {
    pub mu: f64,
    pub origin: Position,
}

impl MicroCellGrid {
    pub fn new(mu: f64, origin: Position) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument("micro-cell edge must be positive".into()));
        }
        Ok(Self { mu, origin })
    }
}

pub fn micro_cell_of(p: &Position, grid: &MicroCellGrid) -> (i64, i64) {
    (
        ((p.x - grid.origin.x) / grid.mu).floor() as i64,
        ((p.y - grid.origin.y) / grid.mu).floor() as i64,
    )
}

/// Mirror a point that left the disk back inside it across the boundary circle.
/// Returns the new position and whether a reflection happened.
pub fn reflect_into_disk(p: Position, radius: f64) -> (Position, bool) {
    let r = p.norm();
    if r <= radius {
        return (p, false);
    }
    let target = (2.0 * radius - r).max(0.0);
    let s = target / r;
    (Position::new(p.x * s, p.y * s), true)
}

/// A mobile worker: position plus HMM state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worker {
    pub position: Position,
    pub mobility: MobilityState,
}

impl Worker {
    /// Initial state drawn from the stationary distribution of the chain,
    /// uniform heading.
    pub fn spawn<R: Rng + ?Sized>(position: Position, params: &MobilityParams, rng: &mut R) -> Self {
        let pi = params.transition.stationary();
        let u: f64 = rng.random();
        let state = if u < pi[0] {
            HiddenState::Static
        } else if u < pi[0] + pi[1] {
            HiddenState::Normal
        } else {
            HiddenState::Risky
        };
        let heading = PI * (2.0 * rng.random::<f64>() - 1.0);
        let speed = params.sample_speed(state, rng);
        Self { position, mobility: MobilityState { state, heading, speed } }
    }

    /// Advance one frame: HMM transition, then a displacement whose mean
    /// length is `speed * frame_duration`, reflected at the macro-cell edge.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        params: &MobilityParams,
        frame_duration: f64,
        radius: f64,
        rng: &mut R,
    ) {
        self.mobility = hmm_step(&self.mobility, params, rng);
        let scale = self.mobility.speed * frame_duration / params.gamma_shape;
        let kappa = params.kappa(self.mobility.state);
        let d = sample_displacement(&self.mobility, params.gamma_shape, scale, kappa, rng);
        self.mobility.heading = d.heading;
        let moved = Position::new(self.position.x + d.dx, self.position.y + d.dy);
        let (p, reflected) = reflect_into_disk(moved, radius);
        if reflected {
            self.mobility.heading = wrap_angle(self.mobility.heading + PI);
        }
        self.position = p;
    }
}
