//! Numerical self-checks: each one compares an implementation against an
//! independent oracle and reports its worst deviation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;
use rand::Rng;

use crate::association::{divergence, Association, DataSplit};
use crate::channel::{bd_decode, sample_fading, sample_rician, zf_decode, AccessChannel, CMatrix};
use crate::energy::{optimal_wet, WetRequirement};
use crate::fl::{class_means, cu_aggregate, loss_and_grad, mec_aggregate, synth_datasets, ModelWeights};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation (or count of failures, see `detail`).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self { name, passed: worst < tolerance, worst, tolerance, detail }
    }
}

/// Least feasible WET found by a grid scan over `[0, range]`, or `None`.
fn grid_least_feasible(reqs: &[WetRequirement], n_mec: usize, range: f64, step: f64) -> Option<f64> {
    let n = (range / step).ceil() as usize;
    (0..=n).map(|i| i as f64 * step).find(|&e| {
        reqs.iter().all(|r| r.battery + e * r.beta * r.xi * n_mec as f64 - r.e_dev >= -1e-12 * r.e_dev.max(1.0))
    })
}

/// Optimal WET against a grid search on random instances of up to six
/// devices. Fails if the grid finds a feasible value more than one step
/// below the closed form, or none within one step above it.
pub fn wet_grid_oracle(instances: usize, seed: u64) -> CheckResult {
    let mut rng = substream(seed, Stream::Model, 1, 0);
    let n_mec = 16;
    let mut failures = 0usize;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..=6);
        let reqs: Vec<WetRequirement> = (0..k)
            .map(|_| WetRequirement {
                e_dev: rng.random_range(0.0..2.0),
                battery: rng.random_range(0.0..2.0),
                beta: rng.random_range(1e-3..1.0),
                xi: 1.0 / k as f64,
            })
            .collect();
        let opt = optimal_wet(&reqs, n_mec);
        // random span so the closed form rarely lands on a grid point
        let range = if opt > 0.0 { opt * rng.random_range(1.5..2.5) } else { 1.0 };
        let step = 1e-4 * range;
        let found = grid_least_feasible(&reqs, n_mec, range, step);
        match found {
            Some(g) if g >= opt - step && g <= opt + step => worst_gap = worst_gap.max((g - opt).abs() / step),
            _ => failures += 1,
        }
    }
    CheckResult::new(
        "wet_grid_oracle",
        failures as f64,
        0.5,
        format!("{instances} instances, {failures} mismatches, worst gap {worst_gap:.3} grid steps"),
    )
}

/// `max ||Z^H G - I||_F` over random full-rank access channels.
pub fn zf_residuals(instances: usize, n_mec: usize, seed: u64) -> CheckResult {
    let mut rng = substream(seed, Stream::Model, 2, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..=n_mec);
        let betas: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let cols: Vec<usize> = (0..k).collect();
        let g = AccessChannel::from_fading(&sample_fading(n_mec, k, &mut rng), &cols, &betas);
        let Ok(dec) = zf_decode(&g) else {
            worst = f64::INFINITY;
            continue;
        };
        let r = dec.z.adjoint() * &g.g - CMatrix::identity(k, k);
        worst = worst.max(r.norm());
    }
    CheckResult::new("zf_residual", worst, 1e-8, format!("{instances} instances, N_mec = {n_mec}"))
}

/// `max_{j != m} ||H_j W_m||_F` and `||W^H W - I||_F` over random backhauls.
pub fn bd_residuals(instances: usize, n_cu: usize, m: usize, n_mec: usize, seed: u64) -> CheckResult {
    let mut rng = substream(seed, Stream::Model, 3, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let h: Vec<_> = (0..m).map(|_| sample_rician(n_mec, n_cu, 10.0, &mut rng)).collect();
        let target = rng.random_range(0..m);
        let Ok(dec) = bd_decode(&h, target) else {
            worst = f64::INFINITY;
            continue;
        };
        for (j, hj) in h.iter().enumerate() {
            if j != target {
                worst = worst.max((&hj.h * &dec.w).norm());
            }
        }
        let cols = dec.w.ncols();
        worst = worst.max((dec.w.adjoint() * &dec.w - CMatrix::identity(cols, cols)).norm());
    }
    CheckResult::new(
        "bd_residual",
        worst,
        1e-8,
        format!("{instances} instances, N_cu = {n_cu}, M = {m}, N_mec = {n_mec}"),
    )
}

/// Fourth-order central difference at 0. With `h = 1e-3` both truncation
/// and round-off stay near 1e-12 for an O(1) smooth function, so small
/// gradient components can still be checked to a tight relative bound.
pub fn five_point(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-3;
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// Softmax gradient against central finite differences.
pub fn gradient_check(probes: usize, seed: u64) -> CheckResult {
    let mut rng = substream(seed, Stream::Model, 4, 0);
    let (c, d) = (5, 8);
    let means = class_means(c, d, 1.0, &mut rng);
    let Ok(split) = DataSplit::new(vec![vec![4]; c]) else { unreachable!() };
    let data = match synth_datasets(&split, &means, 1.0, 0, &mut rng) {
        Ok((mut devs, _)) => devs.remove(0),
        Err(e) => return CheckResult::new("gradient_fd", f64::INFINITY, 1e-5, format!("{e}")),
    };
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let w = ModelWeights::random(c, d, 0.5, &mut rng);
        let i = rng.random_range(0..data.len());
        let j = rng.random_range(0..w.len());
        let (_, g) = loss_and_grad(&w, &data, &[i]);
        let fd = five_point(|x| {
            let mut v = w.clone();
            v.w[j] += x;
            loss_and_grad(&v, &data, &[i]).0
        });
        worst = worst.max((fd - g[j]).abs() / g[j].abs().max(fd.abs()).max(1e-8));
    }
    CheckResult::new("gradient_fd", worst, 1e-5, format!("{probes} probes, relative error"))
}

/// Two-tier averaging against the flat size-weighted mean.
pub fn nested_aggregation(trials: usize, seed: u64) -> CheckResult {
    let mut rng = substream(seed, Stream::Model, 5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let k = rng.random_range(1..20);
        let m = rng.random_range(1..5);
        let ws: Vec<ModelWeights> = (0..k).map(|_| ModelWeights::random(3, 4, 1.0, &mut rng)).collect();
        let sizes: Vec<u64> = (0..k).map(|_| rng.random_range(1..200)).collect();
        let mec_of: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
        let mut flat = vec![0.0; ws[0].len()];
        let total: u64 = sizes.iter().sum();
        for (w, &n) in ws.iter().zip(&sizes) {
            for (f, v) in flat.iter_mut().zip(&w.w) {
                *f += n as f64 / total as f64 * v;
            }
        }
        let mut mec_w = Vec::new();
        let mut mec_n = Vec::new();
        for j in 0..m {
            let idx: Vec<usize> = (0..k).filter(|&i| mec_of[i] == j).collect();
            if idx.is_empty() {
                continue;
            }
            let n: Vec<u64> = idx.iter().map(|&i| sizes[i]).collect();
            let Ok(agg) = mec_aggregate(&idx.iter().map(|&i| &ws[i]).collect::<Vec<_>>(), &n) else {
                return CheckResult::new("nested_aggregation", f64::INFINITY, 1e-12, "empty MEC".into());
            };
            mec_w.push(agg);
            mec_n.push(n.iter().sum());
        }
        let Ok(nested) = cu_aggregate(&mec_w.iter().collect::<Vec<_>>(), &mec_n) else {
            return CheckResult::new("nested_aggregation", f64::INFINITY, 1e-12, "empty CU".into());
        };
        for (a, b) in nested.w.iter().zip(&flat) {
            worst = worst.max((a - b).abs());
        }
    }
    CheckResult::new("nested_aggregation", worst, 1e-12, format!("{trials} trials, max abs difference"))
}

/// Divergence on hand-evaluated cases (0 and 1).
pub fn divergence_examples() -> CheckResult {
    let mut worst: f64 = 0.0;
    // every MEC mirrors the global distribution
    if let (Ok(s), Ok(a)) = (DataSplit::new(vec![vec![2, 4], vec![6, 12]]), Association::new(2, vec![0, 1])) {
        worst = worst.max(divergence(&s, &a).abs());
    }
    // two MECs, each holding one class only
    if let (Ok(s), Ok(a)) = (DataSplit::new(vec![vec![50, 0], vec![0, 50]]), Association::new(2, vec![0, 1])) {
        worst = worst.max((divergence(&s, &a) - 1.0).abs());
    }
    // one device
    if let (Ok(s), Ok(a)) = (DataSplit::new(vec![vec![3], vec![9]]), Association::new(1, vec![0])) {
        worst = worst.max(divergence(&s, &a).abs());
    }
    CheckResult::new("divergence_examples", worst, 1e-12, "theta = 0, 1, 0 cases".into())
}

/// Every check at the sizes used by the `verify` command. `bd_instances`
/// controls the most expensive one.
pub fn run_all(seed: u64, bd_instances: usize) -> Vec<CheckResult> {
    vec![
        wet_grid_oracle(500, seed),
        zf_residuals(1000, 16, seed),
        bd_residuals(bd_instances, 128, 8, 16, seed),
        gradient_check(100, seed),
        nested_aggregation(200, seed),
        divergence_examples(),
    ]
}
