//! `hetfl run | compare | sweep | verify`.
//!
//! Settings are layered, later wins: built-in defaults, `HETFL_SEED`, the
//! `--config` file, `--<key> <value>` overrides for any config key, then the
//! named flags (`--seed`, `--policy`, ...).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hetfl_core::sim::{run_experiment, Policy, SimConfig};
use hetfl_core::verify;

use crate::config::{self, ConfigError, COMMAND_KEYS};
use crate::experiments::{compare_policies, sweep, Batch};
use crate::export;
use crate::Error;

const OVERRIDES: &str = "Any config key can also be set as --<key> <value> (for example --K 12 --b_0 50).";

#[derive(Debug, Parser)]
#[command(name = "hetfl", version, about = "Hierarchical federated learning over a wireless HetNet", after_help = OVERRIDES)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// One experiment; writes ledgers, associations, metrics and the trace.
    #[command(after_help = OVERRIDES)]
    Run(Common),
    /// Several association policies on the same seeds.
    #[command(after_help = OVERRIDES)]
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// A policy comparison per value of one parameter.
    #[command(after_help = OVERRIDES)]
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        batch: BatchArgs,
        /// K, M, E_th or B_0.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
    },
    /// Numerical self-checks; exits 0 only if all pass.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write verify.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fewer block-diagonalization instances.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    scheduling: Option<String>,
    #[arg(long)]
    mobility: Option<String>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// Comma-separated policies (default h2rma,random).
    #[arg(long)]
    policies: Option<String>,
    /// Number of seeds (default 30).
    #[arg(long)]
    seeds: Option<usize>,
}

/// Flags clap handles itself; every other `--<config key>` is an override.
const NAMED: &[&str] =
    &["config", "out", "seed", "policy", "scheduling", "mobility", "policies", "seeds", "param", "values", "quick"];

/// Pull `--key value` / `--key=value` config overrides out of `args`.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), Error> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if NAMED.contains(&name.as_str()) || !config::is_sim_key(&name) {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| Error::Usage(format!("--{name} needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

/// Resolved settings of a `run`, `compare` or `sweep` invocation.
struct Resolved {
    cfg: SimConfig,
    /// Command keys found in the config file.
    file_extras: Vec<(String, String)>,
}

fn resolve(common: &Common, overrides: &[(String, String)], env_seed: Option<&str>) -> Result<Resolved, Error> {
    let mut cfg = SimConfig::default();
    if let Some(s) = env_seed {
        config::apply(&mut cfg, "seed", s).map_err(|e| ConfigError::new("HETFL_SEED", e.msg))?;
    }
    let mut file_extras = Vec::new();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        let pairs = config::parse_pairs(&text)?;
        config::apply_pairs(&mut cfg, &pairs)?;
        file_extras =
            pairs.into_iter().filter(|(_, k, _)| COMMAND_KEYS.contains(&k.as_str())).map(|(_, k, v)| (k, v)).collect();
    }
    for (k, v) in overrides {
        config::apply(&mut cfg, k, v)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    for (key, v) in [("policy", &common.policy), ("scheduling", &common.scheduling), ("mobility", &common.mobility)] {
        if let Some(v) = v {
            config::apply(&mut cfg, key, v)?;
        }
    }
    cfg.validate()?;
    Ok(Resolved { cfg, file_extras })
}

fn extra<'a>(r: &'a Resolved, key: &str) -> Option<&'a str> {
    r.file_extras.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_policies(s: &str) -> Result<Vec<Policy>, Error> {
    s.split(',')
        .map(|p| Policy::parse(p.trim()).map_err(|e| ConfigError::new("policies", e.to_string()).into()))
        .collect()
}

fn batch_settings(r: &Resolved, b: &BatchArgs) -> Result<(Vec<Policy>, usize), Error> {
    let policies = parse_policies(b.policies.as_deref().or(extra(r, "policies")).unwrap_or("h2rma,random"))?;
    let seeds = match (b.seeds, extra(r, "seeds")) {
        (Some(n), _) => n,
        (None, Some(s)) => s.parse().map_err(|_| ConfigError::new("seeds", format!("cannot parse '{s}'")))?,
        (None, None) => 30,
    };
    Ok((policies, seeds))
}

fn manifest(cfg: &SimConfig, command: &str, extras: &[(&str, String)]) -> String {
    let mut s = format!("# hetfl {} {command}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&config::render(cfg));
    for (k, v) in extras {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

fn prepare_out(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn print_summary(out: &mut dyn Write, batch: &Batch) -> Result<(), Error> {
    writeln!(out, "{:<8} {:<8} {:<8} {:>6} {:>14} {:>14} {:>9}", "param", "value", "policy", "seeds", "mean_delta", "std_delta", "mean_acc")?;
    for s in &batch.summary {
        writeln!(
            out,
            "{:<8} {:<8} {:<8} {:>6} {:>14.6e} {:>14.6e} {:>9}",
            s.param.as_deref().unwrap_or("-"),
            s.value.as_deref().unwrap_or("-"),
            s.policy.name(),
            s.n_seeds,
            s.mean_delta,
            s.std_delta,
            s.mean_acc.map_or("-".to_string(), |a| format!("{a:.4}")),
        )?;
    }
    Ok(())
}

fn execute(args: Vec<String>, env_seed: Option<&str>, out: &mut dyn Write) -> Result<(), Error> {
    let (rest, overrides) = split_overrides(args)?;
    let cli = match Cli::try_parse_from(rest.iter().map(OsString::from)) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(Error::Usage(first.to_string()));
        }
    };
    if !overrides.is_empty() && matches!(cli.cmd, Cmd::Verify { .. }) {
        return Err(Error::Usage("verify takes no config overrides".into()));
    }

    match cli.cmd {
        Cmd::Run(common) => {
            let r = resolve(&common, &overrides, env_seed)?;
            let t = std::time::Instant::now();
            let res = run_experiment(&r.cfg)?;
            prepare_out(&common.out)?;
            export::write_experiment(&common.out, r.cfg.policy.name(), &res)?;
            let row = crate::experiments::RunRow::from_result(r.cfg.policy, r.cfg.seed, &res);
            export::write_runs(std::fs::File::create(common.out.join("runs.csv"))?, &[row])?;
            export::write_manifest(&common.out, &manifest(&r.cfg, "run", &[]))?;
            writeln!(out, "grid cost = {:.6e} (price-weighted J)", res.delta())?;
            if let Some(a) = res.final_accuracy() {
                writeln!(out, "final accuracy = {a:.4}")?;
            }
            writeln!(out, "elapsed = {:.3} s", t.elapsed().as_secs_f64())?;
        }
        Cmd::Compare { common, batch } => {
            let r = resolve(&common, &overrides, env_seed)?;
            let (policies, seeds) = batch_settings(&r, &batch)?;
            let b = compare_policies(&r.cfg, &policies, seeds)?;
            prepare_out(&common.out)?;
            export::write_batch(&common.out, &b.runs, &b.summary)?;
            let names: Vec<&str> = policies.iter().map(|p| p.name()).collect();
            let extras = [("policies", names.join(",")), ("seeds", seeds.to_string())];
            export::write_manifest(&common.out, &manifest(&r.cfg, "compare", &extras))?;
            print_summary(out, &b)?;
        }
        Cmd::Sweep { common, batch, param, values } => {
            let r = resolve(&common, &overrides, env_seed)?;
            let (policies, seeds) = batch_settings(&r, &batch)?;
            let param = param
                .or_else(|| extra(&r, "param").map(str::to_string))
                .ok_or_else(|| ConfigError::new("param", "sweep needs --param"))?;
            let values = values.or_else(|| extra(&r, "values").map(str::to_string)).unwrap_or_default();
            let values: Vec<String> =
                values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let b = sweep(&r.cfg, &param, &values, &policies, seeds)?;
            prepare_out(&common.out)?;
            export::write_batch(&common.out, &b.runs, &b.summary)?;
            let names: Vec<&str> = policies.iter().map(|p| p.name()).collect();
            let extras = [
                ("policies", names.join(",")),
                ("seeds", seeds.to_string()),
                ("param", param),
                ("values", values.join(",")),
            ];
            export::write_manifest(&common.out, &manifest(&r.cfg, "sweep", &extras))?;
            print_summary(out, &b)?;
        }
        Cmd::Verify { seed, out: dir, quick } => {
            let checks = verify::run_all(seed, if quick { 20 } else { 200 });
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{tag} {:<22} worst {:.3e} (limit {:.1e}) {}", c.name, c.worst, c.tolerance, c.detail)?;
            }
            if let Some(dir) = dir {
                prepare_out(&dir)?;
                export::write_checks(std::fs::File::create(dir.join("verify.csv"))?, &checks)?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Error::Verify(failed));
            }
        }
    }
    Ok(())
}

/// Run the command line `args` (program name first) and return the exit
/// code. Errors go to `err` as one `ERROR:<code>:<message>` line.
pub fn main_with(args: Vec<String>, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(args, env_seed, out) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "ERROR:{}:{msg}", e.code());
            e.exit_code()
        }
    }
}
