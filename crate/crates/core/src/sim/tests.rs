use alloc::vec::Vec;

use super::*;
use crate::association::divergence_active;
use crate::channel::C64;

fn small(seed: u64) -> SimConfig {
    SimConfig { n_cu: 32, n_mec: 4, m: 2, k: 3, l: 2, c: 3, b_0: 5.0, seed, train: false, ..Default::default() }
}

#[test]
fn zero_frames_is_empty() {
    let r = run_experiment(&SimConfig { l: 0, ..small(1) }).unwrap();
    assert_eq!(r.delta(), 0.0);
    assert!(r.metrics.is_empty() && r.associations.is_empty());
}

#[test]
fn same_seed_same_result() {
    let cfg = SimConfig { k: 12, m: 3, l: 4, train: true, scheduling: Scheduling::Heuristic, ..small(9) };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let c = run_experiment(&SimConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.delta(), c.delta());
}

/// Rebuild the ledger of a 3-device, 2-MEC, 2-frame run by hand: per-MEC
/// ZF via a general inverse, the energy terms, the WET quotient, battery
/// updates and the weighted sum.
#[test]
fn micro_instance_matches_hand_ledger() {
    for seed in 0..5 {
        let cfg = small(seed);
        let sc = build_scenario(&cfg).unwrap();
        let ch = sample_channels(&cfg).unwrap();
        let assoc = associate(&cfg, &sc, &ch).unwrap();
        let r = run_on(&cfg, &sc, &ch).unwrap();

        let sigma2 = 10f64.powf((-174.0 - 30.0) / 10.0) * 20e6;
        let q = 32.0 * 3.0 * 17.0;
        let e_cir = 1.0 * 10.0;
        let e_cmp = 1e-27 * 40.0 * 1e18 * q;
        let r_dev = 20e6;
        let mut battery = [5.0f64; 3];
        let mut delta = 0.0;
        for l in 0..2 {
            let mut e_dev = [0.0; 3];
            for m in 0..2 {
                let members: Vec<usize> = (0..3).filter(|&k| assoc.mec_of(k) == m).collect();
                if members.is_empty() {
                    delta += e_cir;
                    continue;
                }
                let g = nalgebra::DMatrix::<C64>::from_fn(4, members.len(), |i, j| {
                    ch[l].fading[m][(i, members[j])] * sc.gains[m][members[j]].sqrt()
                });
                let inv = (g.adjoint() * &g).try_inverse().unwrap();
                let mut wet: f64 = 0.0;
                for (j, &k) in members.iter().enumerate() {
                    let e_ac = sigma2 * q * inv[(j, j)].re * (2f64.powf(r_dev / 20e6) - 1.0) / r_dev;
                    e_dev[k] = e_cir + e_cmp + e_ac;
                    let share = sc.gains[m][k] / members.len() as f64 * 4.0;
                    wet = wet.max((e_dev[k] - battery[k]) / share);
                }
                for &k in &members {
                    let a = wet * sc.gains[m][k] / members.len() as f64 * 4.0;
                    battery[k] = (battery[k] - e_dev[k] + a).min(1000.0).max(0.0);
                }
                let e_bh = sigma2 * q / (ch[l].bd_gain[m] * 20e6);
                delta += e_cir + wet + e_bh;
            }
        }
        assert!((r.delta() - delta).abs() <= 1e-9 * delta, "seed {seed}: {} vs {delta}", r.delta());
        let last: Vec<f64> = r.ledger.device_rows[3..].iter().map(|d| d.battery).collect();
        for k in 0..3 {
            assert!((last[k] - battery[k]).abs() < 1e-6);
        }
    }
}

#[test]
fn mobility_off_dhda_is_fixed_association() {
    let base = SimConfig { k: 10, m: 3, l: 6, ..small(3) };
    let a = run_experiment(&SimConfig { dhda: true, ..base.clone() }).unwrap();
    let b = run_experiment(&SimConfig { dhda: false, ..base }).unwrap();
    assert_eq!(a, b);
    let first = a.initial_association.unwrap();
    assert!(a.associations.iter().all(|r| r.mec == first.mec_of(r.device)));
}

#[test]
fn frame_invariants_hold() {
    for (seed, sched) in [(1, Scheduling::Off), (2, Scheduling::Heuristic), (3, Scheduling::Random)] {
        let cfg = SimConfig {
            n_cu: 64,
            n_mec: 8,
            m: 4,
            k: 16,
            l: 30,
            b_0: 50.0,
            scheduling: sched,
            mobility: Mobility::Hmm,
            seed,
            ..small(0)
        };
        let r = run_experiment(&cfg).unwrap();
        let e_cir = cfg.circuit_energy();
        for l in 0..cfg.l {
            let rows = &r.ledger.mec_rows[l * cfg.m..(l + 1) * cfg.m];
            let e_mec: f64 = rows.iter().map(|x| x.e_mec).sum();
            let e_bh: f64 = rows.iter().map(|x| x.e_bh).sum();
            assert!(e_mec >= e_bh + cfg.m as f64 * e_cir - 1e-9);
            assert!(rows.iter().all(|x| x.e_wet >= 0.0));
        }
        for d in &r.ledger.device_rows {
            assert!(d.battery >= 0.0 && d.battery <= cfg.b_max);
        }
        let recomputed: f64 = r.ledger.mec_rows.iter().map(|x| x.alpha * x.e_mec).sum();
        assert!((recomputed - r.delta()).abs() <= 1e-9 * r.delta());
        for l in 0..cfg.l {
            let loads = (0..cfg.m)
                .map(|m| r.associations[l * cfg.k..(l + 1) * cfg.k].iter().filter(|a| a.mec == m).count());
            assert!(loads.into_iter().all(|n| n <= cfg.n_mec));
        }
    }
}

#[test]
fn heuristic_schedules_respect_theta() {
    let cfg = SimConfig {
        n_cu: 64,
        n_mec: 8,
        m: 4,
        k: 20,
        l: 10,
        c: 3,
        scheduling: Scheduling::Heuristic,
        seed: 5,
        ..small(0)
    };
    let sc = build_scenario(&cfg).unwrap();
    let ch = sample_channels(&cfg).unwrap();
    let r = run_on(&cfg, &sc, &ch).unwrap();
    let assoc = r.initial_association.clone().unwrap();
    for l in 0..cfg.l {
        let active: Vec<bool> = r.associations[l * cfg.k..(l + 1) * cfg.k].iter().map(|a| a.active).collect();
        let theta = divergence_active(&sc.split, &assoc, &active);
        assert_eq!(theta, r.theta[l]);
        if r.inactive[l] > 0 {
            assert!(theta <= cfg.theta_max);
        }
    }
}

#[test]
fn training_improves_on_chance() {
    let cfg = SimConfig { k: 10, m: 2, n_mec: 8, l: 10, c: 3, train: true, class_sep: 2.0, ..small(4) };
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.metrics.len(), 10);
    assert!(r.final_accuracy().unwrap() > 0.6);
    assert!(r.metrics.iter().all(|m| (0.0..=1.0).contains(&m.accuracy)));
}

#[test]
fn bfs_policy_runs_and_reports_infeasible() {
    let cfg = SimConfig { policy: Policy::Bfs, k: 4, ..small(6) };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.delta() > 0.0);
    let tight = SimConfig { theta_max: 0.0, n_mec: 2, ..cfg };
    // four devices cannot share one MEC of two antennas, and any split of
    // skewed data has positive divergence
    assert_eq!(run_experiment(&tight).unwrap_err(), crate::Error::ThetaInfeasible);
}
