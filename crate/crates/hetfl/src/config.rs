//! Flat `key = value` configuration files.
//!
//! Keys are the field names of [`SimConfig`] (case-insensitive, so `K` and
//! `B_0` work too) plus the mobility parameters. Values:
//!
//! - numbers in any form Rust parses (`20e6`, `0.5`, `128`);
//! - `auto` for optional knobs (`circuit_time`, `rate_dev`, `rate_mec`, `alpha`);
//! - `e_th = 75%` for a percentile threshold, `e_th = 1e-10` for joules;
//! - matrices as rows separated by `;`, entries by `,` (`alpha`, `transition`).
//!
//! `#` starts a comment. [`render`] writes a file that parses back to the
//! identical configuration.

use std::fmt::Write as _;

use hetfl_core::sim::{Mobility, Policy, Scheduling, SimConfig, Threshold};
use hetfl_core::topology::TransitionMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{key}: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(key: &str, msg: impl Into<String>) -> Self {
        Self { line: None, key: key.to_string(), msg: msg.into() }
    }
}

/// Every simulation key, in the order [`render`] writes them.
pub const KEYS: &[&str] = &[
    "n_cu", "n_mec", "m", "k", "l", "c", "b_max", "b_0", "nu", "d0", "lambda", "vartheta", "omega",
    "varsigma", "theta_max", "cell_radius", "circuit_power_dbm", "noise_psd_dbm", "frame_duration",
    "circuit_time", "rate_dev", "rate_mec", "rician_k", "alpha", "policy", "scheduling", "mobility",
    "dhda", "frozen_channel", "e_th", "seed", "train", "n_features", "classes_per_device",
    "samples_min", "samples_max", "class_sep", "noise_std", "test_per_class", "lr", "batch",
    "epochs_local", "mu", "transition", "v_normal", "v_risky", "step_length",
    "steps_per_minute_threshold", "kappa_normal", "kappa_risky", "gamma_shape",
];

/// Keys read by the `compare` and `sweep` commands rather than the simulator.
pub const COMMAND_KEYS: &[&str] = &["policies", "param", "values", "seeds"];

pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

pub fn is_sim_key(key: &str) -> bool {
    KEYS.contains(&normalize_key(key).as_str())
}

/// `(line, key, value)` triples of a config file, keys normalized.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError { line: Some(i + 1), key: line.to_string(), msg: "expected key = value".into() });
        };
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) && !COMMAND_KEYS.contains(&key.as_str()) {
            return Err(ConfigError { line: Some(i + 1), key, msg: "unknown key".into() });
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::new(key, format!("cannot parse '{v}'")))
}

fn opt(key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::new(key, format!("expected true or false, got '{v}'"))),
    }
}

fn matrix(key: &str, v: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    v.split(';').map(|row| row.split(',').map(|x| num(key, x.trim())).collect()).collect()
}

fn named<T>(key: &str, v: &str, parse: fn(&str) -> hetfl_core::Result<T>) -> Result<T, ConfigError> {
    parse(&v.to_ascii_lowercase()).map_err(|e| ConfigError::new(key, e.to_string()))
}

pub fn parse_threshold(v: &str) -> Result<Threshold, ConfigError> {
    match v.strip_suffix('%') {
        Some(p) => num("e_th", p.trim()).map(Threshold::Percentile),
        None => num("e_th", v).map(Threshold::Absolute),
    }
}

/// Set one key. Validation of the whole configuration is left to
/// [`SimConfig::validate`].
pub fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let key = normalize_key(key);
    let k = key.as_str();
    let v = value.trim();
    let mp = &mut cfg.mobility_params;
    match k {
        "n_cu" => cfg.n_cu = num(k, v)?,
        "n_mec" => cfg.n_mec = num(k, v)?,
        "m" => cfg.m = num(k, v)?,
        "k" => cfg.k = num(k, v)?,
        "l" => cfg.l = num(k, v)?,
        "c" => cfg.c = num(k, v)?,
        "b_max" => cfg.b_max = num(k, v)?,
        "b_0" => cfg.b_0 = num(k, v)?,
        "nu" => cfg.nu = num(k, v)?,
        "d0" => cfg.d0 = num(k, v)?,
        "lambda" => cfg.lambda = num(k, v)?,
        "vartheta" => cfg.vartheta = num(k, v)?,
        "omega" => cfg.omega = num(k, v)?,
        "varsigma" => cfg.varsigma = num(k, v)?,
        "theta_max" => cfg.theta_max = num(k, v)?,
        "cell_radius" => cfg.cell_radius = num(k, v)?,
        "circuit_power_dbm" => cfg.circuit_power_dbm = num(k, v)?,
        "noise_psd_dbm" => cfg.noise_psd_dbm = num(k, v)?,
        "frame_duration" => cfg.frame_duration = num(k, v)?,
        "circuit_time" => cfg.circuit_time = opt(k, v)?,
        "rate_dev" => cfg.rate_dev = opt(k, v)?,
        "rate_mec" => cfg.rate_mec = opt(k, v)?,
        "rician_k" => cfg.rician_k = num(k, v)?,
        "alpha" => cfg.alpha = if v.eq_ignore_ascii_case("auto") { None } else { Some(matrix(k, v)?) },
        "policy" => cfg.policy = named(k, v, Policy::parse)?,
        "scheduling" => cfg.scheduling = named(k, v, Scheduling::parse)?,
        "mobility" => cfg.mobility = named(k, v, Mobility::parse)?,
        "dhda" => cfg.dhda = boolean(k, v)?,
        "frozen_channel" => cfg.frozen_channel = boolean(k, v)?,
        "e_th" => cfg.e_th = parse_threshold(v)?,
        "seed" => cfg.seed = num(k, v)?,
        "train" => cfg.train = boolean(k, v)?,
        "n_features" => cfg.n_features = num(k, v)?,
        "classes_per_device" => cfg.classes_per_device = num(k, v)?,
        "samples_min" => cfg.samples_min = num(k, v)?,
        "samples_max" => cfg.samples_max = num(k, v)?,
        "class_sep" => cfg.class_sep = num(k, v)?,
        "noise_std" => cfg.noise_std = num(k, v)?,
        "test_per_class" => cfg.test_per_class = num(k, v)?,
        "lr" => cfg.lr = num(k, v)?,
        "batch" => cfg.batch = num(k, v)?,
        "epochs_local" => cfg.epochs_local = num(k, v)?,
        "mu" => cfg.mu = num(k, v)?,
        "transition" => {
            let rows = matrix(k, v)?;
            if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                return Err(ConfigError::new(k, "expected a 3 x 3 matrix"));
            }
            let m = [0, 1, 2].map(|i| [rows[i][0], rows[i][1], rows[i][2]]);
            mp.transition = TransitionMatrix::new(m).map_err(|e| ConfigError::new(k, e.to_string()))?;
        }
        "v_normal" => mp.v_normal = num(k, v)?,
        "v_risky" => mp.v_risky = num(k, v)?,
        "step_length" => mp.step_length = num(k, v)?,
        "steps_per_minute_threshold" => mp.steps_per_minute_threshold = num(k, v)?,
        "kappa_normal" => mp.kappa_normal = num(k, v)?,
        "kappa_risky" => mp.kappa_risky = num(k, v)?,
        "gamma_shape" => mp.gamma_shape = num(k, v)?,
        _ => return Err(ConfigError::new(k, "unknown key")),
    }
    Ok(())
}

/// Apply parsed pairs, skipping command keys.
pub fn apply_pairs(cfg: &mut SimConfig, pairs: &[(usize, String, String)]) -> Result<(), ConfigError> {
    for (line, key, value) in pairs {
        if COMMAND_KEYS.contains(&key.as_str()) {
            continue;
        }
        apply(cfg, key, value).map_err(|e| ConfigError { line: Some(*line), ..e })?;
    }
    Ok(())
}

fn fmt_matrix(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| format!("{x:?}"))
}

/// Value of `key` as [`apply`] would read it back.
pub fn value_of(cfg: &SimConfig, key: &str) -> Option<String> {
    let mp = &cfg.mobility_params;
    let f = |x: f64| format!("{x:?}");
    Some(match normalize_key(key).as_str() {
        "n_cu" => cfg.n_cu.to_string(),
        "n_mec" => cfg.n_mec.to_string(),
        "m" => cfg.m.to_string(),
        "k" => cfg.k.to_string(),
        "l" => cfg.l.to_string(),
        "c" => cfg.c.to_string(),
        "b_max" => f(cfg.b_max),
        "b_0" => f(cfg.b_0),
        "nu" => f(cfg.nu),
        "d0" => f(cfg.d0),
        "lambda" => f(cfg.lambda),
        "vartheta" => f(cfg.vartheta),
        "omega" => f(cfg.omega),
        "varsigma" => f(cfg.varsigma),
        "theta_max" => f(cfg.theta_max),
        "cell_radius" => f(cfg.cell_radius),
        "circuit_power_dbm" => f(cfg.circuit_power_dbm),
        "noise_psd_dbm" => f(cfg.noise_psd_dbm),
        "frame_duration" => f(cfg.frame_duration),
        "circuit_time" => fmt_opt(cfg.circuit_time),
        "rate_dev" => fmt_opt(cfg.rate_dev),
        "rate_mec" => fmt_opt(cfg.rate_mec),
        "rician_k" => f(cfg.rician_k),
        "alpha" => cfg.alpha.as_deref().map_or_else(|| "auto".to_string(), fmt_matrix),
        "policy" => cfg.policy.name().to_string(),
        "scheduling" => cfg.scheduling.name().to_string(),
        "mobility" => cfg.mobility.name().to_string(),
        "dhda" => cfg.dhda.to_string(),
        "frozen_channel" => cfg.frozen_channel.to_string(),
        "e_th" => match cfg.e_th {
            Threshold::Percentile(p) => format!("{p:?}%"),
            Threshold::Absolute(j) => f(j),
        },
        "seed" => cfg.seed.to_string(),
        "train" => cfg.train.to_string(),
        "n_features" => cfg.n_features.to_string(),
        "classes_per_device" => cfg.classes_per_device.to_string(),
        "samples_min" => cfg.samples_min.to_string(),
        "samples_max" => cfg.samples_max.to_string(),
        "class_sep" => f(cfg.class_sep),
        "noise_std" => f(cfg.noise_std),
        "test_per_class" => cfg.test_per_class.to_string(),
        "lr" => f(cfg.lr),
        "batch" => cfg.batch.to_string(),
        "epochs_local" => cfg.epochs_local.to_string(),
        "mu" => f(cfg.mu),
        "transition" => fmt_matrix(&mp.transition.rows().iter().map(|r| r.to_vec()).collect::<Vec<_>>()),
        "v_normal" => f(mp.v_normal),
        "v_risky" => f(mp.v_risky),
        "step_length" => f(mp.step_length),
        "steps_per_minute_threshold" => f(mp.steps_per_minute_threshold),
        "kappa_normal" => f(mp.kappa_normal),
        "kappa_risky" => f(mp.kappa_risky),
        "gamma_shape" => f(mp.gamma_shape),
        _ => return None,
    })
}

/// Every key of `cfg`, one per line.
pub fn render(cfg: &SimConfig) -> String {
    let mut s = String::new();
    for key in KEYS {
        let v = value_of(cfg, key).unwrap_or_default();
        let _ = writeln!(s, "{key} = {v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn every_key_is_readable_and_writable() {
        let cfg = SimConfig::default();
        for key in KEYS {
            let v = value_of(&cfg, key).expect(key);
            let mut c = cfg.clone();
            apply(&mut c, key, &v).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }

    #[test]
    fn parses_comments_case_and_forms() {
        let text = "# base\nK = 12   # devices\nB_0=50\ne_th = 90%\nalpha = 1,2;3,4\nm = 2\ncircuit_time = 0.5\npolicies = h2rma\n\n";
        let pairs = parse_pairs(text).unwrap();
        assert_eq!(pairs.len(), 7);
        let mut cfg = SimConfig::default();
        apply_pairs(&mut cfg, &pairs).unwrap();
        assert_eq!((cfg.k, cfg.b_0, cfg.m), (12, 50.0, 2));
        assert_eq!(cfg.e_th, Threshold::Percentile(90.0));
        assert_eq!(cfg.alpha, Some(vec![vec![1.0, 2.0], vec![3.0, 4.0]]));
        assert_eq!(cfg.circuit_time, Some(0.5));
    }

    #[test]
    fn rejects_bad_input_with_line_numbers() {
        let e = parse_pairs("k = 3\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_pairs("k 3\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let pairs = parse_pairs("k = 3\nk = three\n").unwrap();
        let e = apply_pairs(&mut SimConfig::default(), &pairs).unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(apply(&mut SimConfig::default(), "policy", "greedy").is_err());
        assert!(apply(&mut SimConfig::default(), "transition", "1,0,0;0,1,0").is_err());
        assert!(apply(&mut SimConfig::default(), "dhda", "maybe").is_err());
    }

    proptest! {
        #[test]
        fn render_round_trips(
            k in 1usize..200,
            b0 in 0.0f64..1000.0,
            lr in 1e-6f64..1.0,
            sep in 0.0f64..10.0,
            seed in any::<u64>(),
            pct in proptest::option::of(0.0f64..100.0),
            ct in proptest::option::of(1e-3f64..10.0),
            alpha in proptest::option::of(proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, 3), 1..4)),
        ) {
            let cfg = SimConfig {
                k, b_0: b0, lr, class_sep: sep, seed, m: 3, circuit_time: ct, alpha,
                e_th: pct.map_or(Threshold::Absolute(lr * 1e-9), Threshold::Percentile),
                ..Default::default()
            };
            let mut back = SimConfig::default();
            apply_pairs(&mut back, &parse_pairs(&render(&cfg)).unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
