//! Channel generation and linear receive processing.
//!
//! Access links (device -> MEC) are i.i.d. Rayleigh scaled by the pathloss
//! gain and decoded with per-MEC zero forcing. Backhaul links (MEC -> CU) are
//! Rician and separated at the CU by block diagonalization.
//!
//! Backhaul matrices are stored as `N_mec x N_cu` (one row per MEC antenna),
//! so that `H_j W_m` is defined for a CU-side decoder `W_m` with `N_cu` rows.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::topology::PathlossGain;
use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Largest condition number accepted by [`zf_decode`].
pub const MAX_CONDITION: f64 = 1e12;

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// `rows x cols` matrix of i.i.d. CN(0, 1) entries, filled column by column.
pub fn sample_fading<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| sample_cn(rng))
}

/// Access channel `G_m`, column `k` equal to `sqrt(beta_k) f_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessChannel {
    pub g: CMatrix,
}

impl AccessChannel {
    /// Build `G_m` from a unit-variance fading matrix holding one column per
    /// device of the network, keeping `columns` and scaling by `betas`.
    pub fn from_fading(fading: &CMatrix, columns: &[usize], betas: &[f64]) -> Self {
        debug_assert_eq!(columns.len(), betas.len());
        let mut g = CMatrix::zeros(fading.nrows(), columns.len());
        for (j, (&k, &beta)) in columns.iter().zip(betas).enumerate() {
            let s = beta.sqrt();
            for i in 0..fading.nrows() {
                g[(i, j)] = fading[(i, k)] * s;
            }
        }
        Self { g }
    }

    pub fn n_antennas(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_devices(&self) -> usize {
        self.g.ncols()
    }
}

pub fn sample_access<R: Rng + ?Sized>(
    betas: &[PathlossGain],
    n_mec: usize,
    rng: &mut R,
) -> Result<AccessChannel> {
    if betas.len() > n_mec {
        return Err(Error::ZfInfeasible(alloc::format!(
            "{} devices exceed {} MEC antennas",
            betas.len(),
            n_mec
        )));
    }
    let fading = sample_fading(n_mec, betas.len(), rng);
    let cols: Vec<usize> = (0..betas.len()).collect();
    let b: Vec<f64> = betas.iter().map(|b| b.value()).collect();
    Ok(AccessChannel::from_fading(&fading, &cols, &b))
}

/// Backhaul channel `H_m`, `N_mec x N_cu`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulChannel {
    pub h: CMatrix,
}

/// Rician matrix with unit per-entry power: `sqrt(K/(K+1)) H_los + sqrt(1/(K+1)) H_nlos`
/// with an all-ones (rank-1) line-of-sight component.
pub fn sample_rician<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    k_factor: f64,
    rng: &mut R,
) -> BackhaulChannel {
    debug_assert!(k_factor >= 0.0);
    let los = (k_factor / (k_factor + 1.0)).sqrt();
    let nlos = (1.0 / (k_factor + 1.0)).sqrt();
    let h = CMatrix::from_fn(rows, cols, |_, _| C64::new(los, 0.0) + sample_cn(rng) * nlos);
    BackhaulChannel { h }
}

/// Per-MEC zero-forcing decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfDecoder {
    /// `G (G^H G)^-1`, `N_mec x K_m`.
    pub z: CMatrix,
    /// `diag((G^H G)^-1)`, the noise amplification seen by each device.
    pub noise_gain: Vec<f64>,
}

fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn zf_decode(access: &AccessChannel) -> Result<ZfDecoder> {
    let g = &access.g;
    if g.ncols() == 0 {
        return Ok(ZfDecoder { z: CMatrix::zeros(g.nrows(), 0), noise_gain: Vec::new() });
    }
    if g.ncols() > g.nrows() {
        return Err(Error::ZfInfeasible(alloc::format!(
            "{} devices exceed {} antennas",
            g.ncols(),
            g.nrows()
        )));
    }
    let cond = condition_number(g);
    if !(cond < MAX_CONDITION) {
        return Err(Error::ZfInfeasible(alloc::format!("rank-deficient access channel (cond {cond:e})")));
    }
    let gram = g.adjoint() * g;
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::ZfInfeasible("G^H G not positive definite".into()))?
        .inverse();
    let noise_gain = (0..inv.nrows()).map(|k| inv[(k, k)].re).collect();
    Ok(ZfDecoder { z: g * inv, noise_gain })
}

/// Block-diagonalization decoder of one MEC at the CU.
#[derive(Debug, Clone, PartialEq)]
pub struct BdDecoder {
    /// `N_cu x J_m`, orthonormal columns in the null space of every other MEC's channel.
    pub w: CMatrix,
    /// `||H_m W_m||_F^2`.
    pub bd_gain: f64,
}

/// Right singular vectors of `a` (as columns, all `a.ncols()` of them) and the
/// numerical rank. Rows are zero-padded so the decomposition is full.
fn full_right_singular(a: &CMatrix) -> (CMatrix, usize) {
    let n = a.ncols();
    let padded = if a.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(core::cmp::Ordering::Equal));
    let max = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    let rank = order.iter().filter(|&&i| max > 0.0 && sv[i] > RANK_TOLERANCE * max).count();
    let mut v = CMatrix::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            v[(r, col)] = v_t[(i, r)].conj();
        }
    }
    (v, rank)
}

/// Stack the rows of every backhaul matrix except `skip`.
fn stack_except(h_all: &[BackhaulChannel], skip: usize, n_cu: usize) -> CMatrix {
    let rows: usize = h_all.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, h)| h.h.nrows()).sum();
    let mut out = CMatrix::zeros(rows, n_cu);
    let mut r0 = 0;
    for (j, h) in h_all.iter().enumerate() {
        if j == skip {
            continue;
        }
        out.view_mut((r0, 0), (h.h.nrows(), n_cu)).copy_from(&h.h);
        r0 += h.h.nrows();
    }
    out
}

/// BD decoder `W_m = V0 V1`: `V0` spans the null space of the stacked
/// interfering channels, `V1` holds the leading right singular vectors of
/// `H_m V0`.
pub fn bd_decode(h_all: &[BackhaulChannel], m: usize) -> Result<BdDecoder> {
    let n_cu = h_all[m].h.ncols();
    let h_bar = stack_except(h_all, m, n_cu);
    let (v, rank_bar) = full_right_singular(&h_bar);
    if rank_bar >= n_cu {
        return Err(Error::BdInfeasible { rank: rank_bar, n_cu });
    }
    let v0 = v.columns(rank_bar, n_cu - rank_bar).into_owned();
    let hm_v0 = &h_all[m].h * &v0;
    let (v_inner, j_m) = full_right_singular(&hm_v0);
    let v1 = v_inner.columns(0, j_m).into_owned();
    let w = v0 * v1;
    let bd_gain = (&h_all[m].h * &w).norm_squared();
    Ok(BdDecoder { w, bd_gain })
}

/// `||H_m W_m||_F^2` for every MEC.
///
/// When the stacked backhaul has full row rank, the gain equals
/// `tr([(Gamma^-1)_mm]^-1)` with `Gamma = H H^H`: the Schur complement of the
/// Gram matrix is `H_m P H_m^H`, `P` the projector onto the null space of the
/// other MECs' rows. That avoids one large SVD per MEC. Otherwise falls back
/// to [`bd_decode`].
pub fn bd_gains(h_all: &[BackhaulChannel]) -> Result<Vec<f64>> {
    if h_all.is_empty() {
        return Ok(Vec::new());
    }
    let n_cu = h_all[0].h.ncols();
    let sizes: Vec<usize> = h_all.iter().map(|h| h.h.nrows()).collect();
    let total: usize = sizes.iter().sum();
    if total <= n_cu {
        if let Some(g) = bd_gains_schur(h_all, &sizes, total, n_cu) {
            return Ok(g);
        }
    }
    (0..h_all.len()).map(|m| bd_decode(h_all, m).map(|d| d.bd_gain)).collect()
}

fn bd_gains_schur(h_all: &[BackhaulChannel], sizes: &[usize], total: usize, n_cu: usize) -> Option<Vec<f64>> {
    let mut stacked = CMatrix::zeros(total, n_cu);
    let mut r0 = 0;
    for h in h_all {
        stacked.view_mut((r0, 0), (h.h.nrows(), n_cu)).copy_from(&h.h);
        r0 += h.h.nrows();
    }
    let gram = &stacked * stacked.adjoint();
    let inv = gram.cholesky()?.inverse();
    let mut out = Vec::with_capacity(sizes.len());
    let mut r0 = 0;
    for &n in sizes {
        let block = inv.view((r0, r0), (n, n)).into_owned();
        let schur = block.cholesky()?.inverse();
        let gain: f64 = (0..n).map(|i| schur[(i, i)].re).sum();
        if !(gain.is_finite() && gain > 0.0) {
            return None;
        }
        out.push(gain);
        r0 += n;
    }
    Some(out)
}

/// ZF noise gain of every device given one fading matrix per MEC
/// (`N_mec x K`, a column for every device of the network).
///
/// Each MEC decodes only its active devices; inactive devices get 0.
pub fn zf_noise_gains(
    fading: &[CMatrix],
    gains: &[Vec<f64>],
    mec_of: &[usize],
    active: &[bool],
) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; mec_of.len()];
    for (m, f) in fading.iter().enumerate() {
        let cols: Vec<usize> = (0..mec_of.len()).filter(|&k| active[k] && mec_of[k] == m).collect();
        if cols.is_empty() {
            continue;
        }
        let betas: Vec<f64> = cols.iter().map(|&k| gains[m][k]).collect();
        let dec = zf_decode(&AccessChannel::from_fading(f, &cols, &betas))?;
        for (&k, g) in cols.iter().zip(dec.noise_gain) {
            out[k] = g;
        }
    }
    Ok(out)
}

/// Device uplink rate `lambda log2(1 + p / (sigma2 g_k))`.
pub fn device_rate(p: f64, noise_gain: f64, bandwidth: f64, sigma2: f64) -> f64 {
    bandwidth * (1.0 + p / (sigma2 * noise_gain)).log2()
}

/// MEC backhaul rate `lambda log2(1 + p ||H_m W_m||^2 / sigma2)`.
pub fn mec_rate(p: f64, bd_gain: f64, bandwidth: f64, sigma2: f64) -> f64 {
    bandwidth * (1.0 + p * bd_gain / sigma2).log2()
}
