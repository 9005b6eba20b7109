//! Batch command-line front end.
//!
//! Every subcommand reads an optional TOML config (sections `env`,
//! `policies`, `estimator`, `band`, `bootstrap`, `nonstat`, `experiment`).
//! Any key can be overridden on the command line as `--section.key=value`.
//! Output numbers are written with 17 significant digits, and all random
//! streams derive from seeds in the config, so reruns are byte-identical for
//! any `--threads` setting.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 1 runtime error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::band::{self, ConfidenceBand, FitOptions, KeyPointPlan, PlanObjective};
use crate::bootstrap;
use crate::bounds::{self, Side};
use crate::cdf::StepCdf;
use crate::conc::{CiKind, CiMethod};
use crate::envs::{self, Environment, TabularPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::nonstat;
use crate::numeric::substream;
use crate::oracle;
use crate::plugin::Parameter;
use crate::returns::{estimate_cdf_is, estimate_cdf_wis, ReturnDataset, ReturnSample};

const SECTIONS: [&str; 7] = ["env", "policies", "estimator", "band", "bootstrap", "nonstat", "experiment"];

#[derive(Parser, Debug)]
#[command(
    name = "retdist",
    version,
    about = "Off-policy return-distribution estimates and high-confidence bounds",
    after_help = "Config keys can be overridden as --section.key=value, e.g. --band.delta=0.1"
)]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll out the configured environment and write a JSONL dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Also log per-step observations, actions, probabilities and rewards.
        #[arg(long)]
        trajectories: bool,
    },
    /// CDF estimate (CSV) and plug-in parameters (JSON).
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_cdf: PathBuf,
        #[arg(long)]
        out_params: PathBuf,
        #[arg(long, default_value = "mean,median,variance,cvar@0.1,iqr,entropy")]
        parameters: String,
    },
    /// Confidence band (CSV).
    Band {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simultaneous parameter bounds from one band (JSON).
    Bound {
        /// Dataset to build the band from.
        #[arg(long, required_unless_present = "band")]
        data: Option<PathBuf>,
        /// Previously written band CSV.
        #[arg(long)]
        band: Option<PathBuf>,
        #[arg(long, default_value = "mean,median,variance,cvar@0.1,iqr")]
        parameters: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// BCa bootstrap intervals (JSON).
    Boot {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "mean,median,variance,cvar@0.1")]
        parameters: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast band for episode L + lead under smooth drift (CSV).
    Forecast {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo coverage and width sweep over sample sizes (CSV).
    Coverage {
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a CDF, band or sweep CSV as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    run_with(std::env::args().collect())
}

/// Runs the CLI on explicit arguments (the first is the program name).
pub fn run_with(args: Vec<String>) -> i32 {
    let (args, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::BudgetExceeded { .. }
        | Error::EpisodeIndex(_)
        | Error::InsufficientReplicates { .. }
        | Error::SupportViolation { .. } => 2,
        _ => 1,
    }
}

/// Pulls `--section.key=value` arguments out of `args`.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        if let Some(body) = a.strip_prefix("--") {
            if let Some((path, value)) = body.split_once('=') {
                if let Some((section, key)) = path.split_once('.') {
                    if SECTIONS.contains(&section) {
                        overrides.push((section.to_string(), key.to_string(), value.to_string()));
                        continue;
                    }
                }
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}

fn execute(cli: Cli, overrides: &[(String, String, String)]) -> Result<()> {
    let config = Config::load(cli.config.as_deref(), overrides)?;
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command, &config))
}

fn dispatch(command: Command, cfg: &Config) -> Result<()> {
    match command {
        Command::Gen { out, trajectories } => cmd_gen(cfg, &out, trajectories),
        Command::Estimate { data, out_cdf, out_params, parameters } => {
            cmd_estimate(cfg, &data, &out_cdf, &out_params, &parameters)
        }
        Command::Band { data, out } => cmd_band(cfg, &data, &out),
        Command::Bound { data, band, parameters, out } => cmd_bound(cfg, data.as_deref(), band.as_deref(), &parameters, &out),
        Command::Boot { data, parameters, out } => cmd_boot(cfg, &data, &parameters, &out),
        Command::Forecast { data, out } => cmd_forecast(cfg, &data, &out),
        Command::Coverage { out } => cmd_coverage(cfg, &out),
        Command::Plot { input, out } => cmd_plot(&input, &out),
    }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// `chain`, `gridworld` or `recommender`.
    pub kind: String,
    pub depth: usize,
    pub noise: f64,
    pub items: usize,
    pub speed: f64,
    /// Recommender drift phase in radians.
    pub phase: f64,
    pub gamma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { kind: "chain".into(), depth: 3, noise: 0.1, items: 5, speed: 0.0, phase: 0.0, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PoliciesConfig {
    /// Behavior policies as mixtures `alpha * pi + (1 - alpha) * uniform`,
    /// assigned round-robin. Empty means the environment's default.
    pub behavior_mixtures: Vec<f64>,
    /// Inverse temperature of the gridworld evaluation policy.
    pub gridworld_beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// `is` or `wis`.
    pub kind: String,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { kind: "is".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub delta: f64,
    pub train_fraction: f64,
    /// `area` or `<parameter>:lower|upper`, e.g. `cvar@0.1:lower`.
    pub objective: String,
    pub search_budget: usize,
    /// `truncated_empirical_bernstein` or `hoeffding_with_cap`.
    pub ci: String,
    /// Widen the band for a shift of at most this KS distance.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            train_fraction: 0.05,
            objective: "area".into(),
            search_budget: 64,
            ci: "truncated_empirical_bernstein".into(),
            epsilon: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { delta: 0.1, replicates: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonstatConfig {
    pub basis_order: usize,
    pub lead: usize,
    pub delta: f64,
    pub replicates: usize,
    /// 0 means `ceil(ln L)`.
    pub key_points: usize,
    pub seed: u64,
}

impl Default for NonstatConfig {
    fn default() -> Self {
        Self { basis_order: 3, lead: 1, delta: 0.1, replicates: 1000, key_points: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required by `gen` and `coverage`.
    pub seed: Option<u64>,
    pub episodes: usize,
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub parameters: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            episodes: 1000,
            trials: 100,
            sizes: vec![100, 1000],
            parameters: vec!["mean".into(), "median".into(), "variance".into(), "cvar@0.1".into()],
        }
    }
}

/// Full configuration with every default filled in.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub env: EnvConfig,
    pub policies: PoliciesConfig,
    pub estimator: EstimatorConfig,
    pub band: BandConfig,
    pub bootstrap: BootstrapConfig,
    pub nonstat: NonstatConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    /// Reads `path` (if any) and applies `(section, key, value)` overrides.
    /// Values are parsed as TOML literals, falling back to strings.
    pub fn load(path: Option<&Path>, overrides: &[(String, String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::invalid(format!("config: {e}")))?;
        for (section, key, value) in overrides {
            let v = parse_toml_value(value);
            let entry = doc.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => {
                    t.insert(key.clone(), v);
                }
                _ => return Err(Error::invalid(format!("config: '{section}' is not a section"))),
            }
        }
        toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| Error::invalid(format!("config: {e}")))
    }

    fn ci_kind(&self) -> Result<CiKind> {
        match self.band.ci.as_str() {
            "truncated_empirical_bernstein" | "eb" => Ok(CiKind::TruncatedEmpiricalBernstein),
            "hoeffding_with_cap" | "hoeffding" => Ok(CiKind::HoeffdingWithCap),
            other => Err(Error::invalid(format!("unknown interval method '{other}'"))),
        }
    }

    fn objective(&self) -> Result<PlanObjective> {
        let s = self.band.objective.trim();
        if s == "area" {
            return Ok(PlanObjective::Area);
        }
        let (p, side) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::invalid(format!("objective must be 'area' or '<parameter>:lower|upper', got '{s}'")))?;
        let side = match side {
            "lower" => Side::Lower,
            "upper" => Side::Upper,
            _ => return Err(Error::invalid(format!("objective side must be lower or upper, got '{side}'"))),
        };
        Ok(PlanObjective::Specialize(p.parse()?, side))
    }

    fn fit_options(&self) -> Result<FitOptions> {
        Ok(FitOptions {
            delta: self.band.delta,
            train_fraction: self.band.train_fraction,
            objective: self.objective()?,
            search_budget: self.band.search_budget,
            ci_kind: self.ci_kind()?,
            seed: self.band.seed,
        })
    }

    fn experiment_seed(&self) -> Result<u64> {
        self.experiment.seed.ok_or_else(|| Error::invalid("experiment.seed is required"))
    }
}

fn parse_toml_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

// ----------------------------------------------------------- environments

enum EnvChoice {
    Chain(envs::PomdpSpec),
    Grid(envs::Gridworld),
    Rec(envs::Recommender),
}

struct Setup {
    env: EnvChoice,
    behaviors: Vec<TabularPolicy>,
    pi: TabularPolicy,
    gamma: f64,
}

macro_rules! with_env {
    ($setup:expr, $e:ident => $body:expr) => {
        match &$setup.env {
            EnvChoice::Chain($e) => $body,
            EnvChoice::Grid($e) => $body,
            EnvChoice::Rec($e) => $body,
        }
    };
}

fn mixtures(pi: &TabularPolicy, alphas: &[f64]) -> Result<Vec<TabularPolicy>> {
    alphas.iter().map(|&a| envs::mixture_policy(pi, a)).collect()
}

fn build_setup(cfg: &Config) -> Result<Setup> {
    let e = &cfg.env;
    if !(0.0..=1.0).contains(&e.gamma) {
        return Err(Error::invalid(format!("env.gamma must lie in [0, 1], got {}", e.gamma)));
    }
    let mix = &cfg.policies.behavior_mixtures;
    let (env, behaviors, pi) = match e.kind.as_str() {
        "chain" => {
            if !mix.is_empty() {
                return Err(Error::invalid("the chain environment has a fixed behavior policy; remove policies.behavior_mixtures"));
            }
            (EnvChoice::Chain(envs::chain_pomdp(e.depth, e.noise)?), vec![envs::chain_behavior_policy()], envs::chain_eval_policy())
        }
        "gridworld" => {
            let g = envs::gridworld();
            let pi = g.goal_seeking_policy(cfg.policies.gridworld_beta.unwrap_or(3.0));
            let alphas = if mix.is_empty() { vec![0.5, 0.75] } else { mix.clone() };
            (EnvChoice::Grid(g), mixtures(&pi, &alphas)?, pi)
        }
        "recommender" => {
            let r = envs::recommender(e.items, e.speed)?.with_phase(e.phase);
            let pi = r.eval_policy();
            let alphas = if mix.is_empty() { vec![0.5] } else { mix.clone() };
            (EnvChoice::Rec(r), mixtures(&pi, &alphas)?, pi)
        }
        other => return Err(Error::invalid(format!("unknown env.kind '{other}'"))),
    };
    Ok(Setup { env, behaviors, pi, gamma: e.gamma })
}

// ------------------------------------------------------------- data files

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn json_num(x: f64) -> String {
    if x.is_finite() { format!("{x:.16e}") } else { "null".into() }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn json_list<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    let items: Vec<String> = xs.iter().map(f).collect();
    format!("[{}]", items.join(","))
}

/// Header line of a dataset file.
pub fn dataset_header(g_min: f64, g_max: f64, gamma: f64) -> String {
    format!("{{\"g_min\":{},\"g_max\":{},\"gamma\":{}}}", json_num(g_min), json_num(g_max), json_num(gamma))
}

fn record_line(s: &ReturnSample, t: Option<&Trajectory>) -> String {
    let mut line = format!("{{\"episode\":{},\"return\":{},\"rho\":{}", s.episode, json_num(s.g), json_num(s.rho));
    if let Some(t) = t {
        let _ = write!(
            line,
            ",\"obs\":{},\"behavior_obs\":{},\"actions\":{},\"beta_probs\":{},\"pi_probs\":{},\"rewards\":{}",
            json_list(&t.eval_obs, |v| v.to_string()),
            json_list(&t.behavior_obs, |v| v.to_string()),
            json_list(&t.actions, |v| v.to_string()),
            json_list(&t.beta_probs, |&v| json_num(v)),
            json_list(&t.pi_probs, |&v| json_num(v)),
            json_list(&t.rewards, |&v| json_num(v)),
        );
    }
    line.push('}');
    line
}

/// Serializes a dataset as JSONL: a header, then one record per episode.
pub fn write_dataset(data: &ReturnDataset, gamma: f64, trajectories: Option<&[Trajectory]>) -> String {
    let mut out = dataset_header(data.g_min(), data.g_max(), gamma);
    out.push('\n');
    for (i, s) in data.samples().iter().enumerate() {
        out.push_str(&record_line(s, trajectories.map(|t| &t[i])));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn get_f64(v: &serde_json::Value, key: &str, line: usize) -> Result<Option<f64>> {
    match v.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(x) => x.as_f64().map(Some).ok_or_else(|| parse_err(line, format!("'{key}' must be a number"))),
    }
}

fn get_vec<T>(v: &serde_json::Value, key: &str, line: usize, f: impl Fn(&serde_json::Value) -> Option<T>) -> Result<Option<Vec<T>>> {
    match v.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::Array(a)) => a
            .iter()
            .map(|x| f(x).ok_or_else(|| parse_err(line, format!("bad element in '{key}'"))))
            .collect::<Result<Vec<T>>>()
            .map(Some),
        Some(_) => Err(parse_err(line, format!("'{key}' must be an array"))),
    }
}

/// Parses a JSONL dataset. Records without `return`/`rho` are reduced from
/// their trajectory fields (`rewards`, `beta_probs`, and `pi_probs` or
/// `obs` + `actions` looked up in `pi`).
pub fn parse_dataset(text: &str, pi: Option<&TabularPolicy>) -> Result<(ReturnDataset, f64)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty dataset file"))?;
    let header: serde_json::Value = serde_json::from_str(header).map_err(|e| parse_err(hl + 1, e.to_string()))?;
    let g_min = get_f64(&header, "g_min", hl + 1)?.ok_or_else(|| parse_err(hl + 1, "header needs g_min"))?;
    let g_max = get_f64(&header, "g_max", hl + 1)?.ok_or_else(|| parse_err(hl + 1, "header needs g_max"))?;
    let gamma = get_f64(&header, "gamma", hl + 1)?.unwrap_or(1.0);
    let mut samples = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let v: serde_json::Value = serde_json::from_str(l).map_err(|e| parse_err(line, e.to_string()))?;
        let episode = v
            .get("episode")
            .and_then(|e| e.as_u64())
            .ok_or_else(|| parse_err(line, "record needs a nonnegative integer 'episode'"))?;
        let (g, rho) = match (get_f64(&v, "return", line)?, get_f64(&v, "rho", line)?) {
            (Some(g), Some(r)) => (g, r),
            _ => {
                let rewards = get_vec(&v, "rewards", line, |x| x.as_f64())?
                    .ok_or_else(|| parse_err(line, "record needs 'return' and 'rho' or trajectory fields"))?;
                let beta = get_vec(&v, "beta_probs", line, |x| x.as_f64())?
                    .ok_or_else(|| parse_err(line, "trajectory record needs 'beta_probs'"))?;
                let pis = match get_vec(&v, "pi_probs", line, |x| x.as_f64())? {
                    Some(p) => p,
                    None => {
                        let pi = pi.ok_or_else(|| parse_err(line, "trajectory record needs 'pi_probs' or a configured policy"))?;
                        let obs = get_vec(&v, "obs", line, |x| x.as_u64().map(|u| u as usize))?
                            .ok_or_else(|| parse_err(line, "trajectory record needs 'obs'"))?;
                        let actions = get_vec(&v, "actions", line, |x| x.as_u64().map(|u| u as usize))?
                            .ok_or_else(|| parse_err(line, "trajectory record needs 'actions'"))?;
                        if obs.len() != actions.len() {
                            return Err(parse_err(line, "'obs' and 'actions' differ in length"));
                        }
                        obs.iter()
                            .zip(&actions)
                            .map(|(&o, &a)| {
                                if o < pi.num_observations() && a < pi.num_actions() {
                                    Ok(pi.prob(o, a))
                                } else {
                                    Err(parse_err(line, "observation or action out of range for the policy"))
                                }
                            })
                            .collect::<Result<Vec<f64>>>()?
                    }
                };
                if pis.len() != beta.len() || beta.len() != rewards.len() {
                    return Err(parse_err(line, "trajectory fields differ in length"));
                }
                if let Some(step) = beta.iter().zip(&pis).position(|(&b, &p)| p > 0.0 && !(b > 0.0)) {
                    return Err(Error::SupportViolation { episode, step });
                }
                let t = Trajectory {
                    episode,
                    behavior_obs: Vec::new(),
                    eval_obs: Vec::new(),
                    actions: Vec::new(),
                    beta_probs: beta,
                    pi_probs: pis,
                    rewards,
                };
                (t.discounted_return(gamma), t.importance_ratio())
            }
        };
        samples.push(ReturnSample::new(g, rho, episode));
    }
    let data = ReturnDataset::new(samples, g_min, g_max).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::invalid(format!("dataset: {m}")),
        other => other,
    })?;
    Ok((data, gamma))
}

fn read_dataset(cfg: &Config, path: &Path) -> Result<ReturnDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let pi = build_setup(cfg).ok().map(|s| s.pi);
    Ok(parse_dataset(&text, pi.as_ref())?.0)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, content)?;
    Ok(())
}

fn parse_parameters(list: &str) -> Result<Vec<Parameter>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// CDF CSV with columns `nu,cdf`, one row per breakpoint.
pub fn cdf_csv(cdf: &StepCdf) -> String {
    let mut out = String::from("nu,cdf\n");
    for (&b, &v) in cdf.breakpoints().iter().zip(cdf.values()) {
        let _ = writeln!(out, "{},{}", fmt_num(b), fmt_num(v));
    }
    out
}

/// Band CSV with columns `nu,f_lower,f_upper`; both columns hold the
/// right-continuous value at `nu`.
pub fn band_csv(band: &ConfidenceBand) -> String {
    let mut out = String::from("nu,f_lower,f_upper\n");
    for p in band.breakpoints() {
        let _ = writeln!(out, "{},{},{}", fmt_num(p), fmt_num(band.lower().eval(p)), fmt_num(band.upper().eval(p)));
    }
    out
}

fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty CSV file"))?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, l) in lines {
        let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != cols.len() {
            return Err(parse_err(i + 1, format!("expected {} columns, found {}", cols.len(), row.len())));
        }
        rows.push(row);
    }
    Ok((cols, rows))
}

fn parse_f64_cell(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| parse_err(line, format!("not a number: '{s}'")))
}

/// Reads a band written by [`band_csv`]; the first and last rows are taken
/// as `g_min` and `g_max`.
pub fn parse_band_csv(text: &str, delta: f64) -> Result<ConfidenceBand> {
    let (cols, rows) = parse_csv(text)?;
    if cols != ["nu", "f_lower", "f_upper"] {
        return Err(parse_err(1, "band CSV needs columns nu,f_lower,f_upper"));
    }
    let mut nu = Vec::new();
    let mut lo = Vec::new();
    let mut up = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        nu.push(parse_f64_cell(&r[0], i + 2)?);
        lo.push(parse_f64_cell(&r[1], i + 2)?);
        up.push(parse_f64_cell(&r[2], i + 2)?);
    }
    if nu.len() < 2 {
        return Err(parse_err(1, "band CSV needs at least two rows"));
    }
    let (g_min, g_max) = (nu[0], nu[nu.len() - 1]);
    let lower = StepCdf::from_steps(nu.clone(), lo, 0.0)?.compact()?;
    let upper = StepCdf::from_steps(nu, up, 0.0)?.compact()?;
    ConfidenceBand::new(lower, upper, delta, g_min, g_max)
}

struct ParamRow {
    name: String,
    estimate: Option<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
    delta: Option<f64>,
    method: String,
}

fn params_json(rows: &[ParamRow]) -> String {
    let opt = |x: Option<f64>| x.map(json_num).unwrap_or_else(|| "null".into());
    let mut out = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = write!(
            out,
            "  {{\"name\":{},\"estimate\":{},\"lower\":{},\"upper\":{},\"delta\":{},\"method\":{}}}",
            json_str(&r.name),
            opt(r.estimate),
            opt(r.lower),
            opt(r.upper),
            opt(r.delta),
            json_str(&r.method)
        );
        out.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    out
}

// ------------------------------------------------------------ subcommands

fn cmd_gen(cfg: &Config, out: &Path, with_trajectories: bool) -> Result<()> {
    let seed = cfg.experiment_seed()?;
    let setup = build_setup(cfg)?;
    let n = cfg.experiment.episodes;
    let (trajectories, (g_min, g_max)) = with_env!(setup, e => (
        envs::generate_trajectories(e, &setup.behaviors, n, &setup.pi, seed)?,
        e.return_bounds(setup.gamma)
    ));
    let data = envs::dataset_from_trajectories(&trajectories, setup.gamma, g_min, g_max)?;
    let text = write_dataset(&data, setup.gamma, with_trajectories.then_some(&trajectories[..]));
    write_file(out, &text)
}

fn estimate(cfg: &Config, data: &ReturnDataset) -> Result<StepCdf> {
    match cfg.estimator.kind.as_str() {
        "is" => estimate_cdf_is(data),
        "wis" => estimate_cdf_wis(data),
        other => Err(Error::invalid(format!("unknown estimator.kind '{other}'"))),
    }
}

fn cmd_estimate(cfg: &Config, data: &Path, out_cdf: &Path, out_params: &Path, parameters: &str) -> Result<()> {
    let params = parse_parameters(parameters)?;
    let data = read_dataset(cfg, data)?;
    let cdf = estimate(cfg, &data)?;
    let rows = params
        .iter()
        .map(|p| {
            Ok(ParamRow {
                name: p.to_string(),
                estimate: Some(p.evaluate(&cdf)?),
                lower: None,
                upper: None,
                delta: None,
                method: cfg.estimator.kind.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_file(out_cdf, &cdf_csv(&cdf))?;
    write_file(out_params, &params_json(&rows))
}

fn fitted_band(cfg: &Config, data: &ReturnDataset) -> Result<ConfidenceBand> {
    let fit = band::fit_band(data, &cfg.fit_options()?)?;
    if cfg.band.epsilon > 0.0 {
        band::shift_band(&fit.band, cfg.band.epsilon)
    } else {
        Ok(fit.band)
    }
}

fn cmd_band(cfg: &Config, data: &Path, out: &Path) -> Result<()> {
    let data = read_dataset(cfg, data)?;
    write_file(out, &band_csv(&fitted_band(cfg, &data)?))
}

fn cmd_bound(cfg: &Config, data: Option<&Path>, band_path: Option<&Path>, parameters: &str, out: &Path) -> Result<()> {
    let params = parse_parameters(parameters)?;
    let data = data.map(|p| read_dataset(cfg, p)).transpose()?;
    let band = match band_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
            parse_band_csv(&text, cfg.band.delta)?
        }
        None => fitted_band(cfg, data.as_ref().expect("clap requires data or band"))?,
    };
    let plug = data.as_ref().map(estimate_cdf_wis).transpose()?;
    let rows = params
        .iter()
        .map(|&p| {
            let (lo, hi) = bounds::parameter_bounds(&band, p)?;
            Ok(ParamRow {
                name: p.to_string(),
                // discrete plug-in entropy is not on the scale of the differential bound
                estimate: plug.as_ref().filter(|_| p != Parameter::Entropy).map(|c| p.evaluate(c)).transpose()?,
                lower: Some(lo),
                upper: Some(hi),
                delta: Some(band.delta()),
                method: "band".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_file(out, &params_json(&rows))
}

fn cmd_boot(cfg: &Config, data: &Path, parameters: &str, out: &Path) -> Result<()> {
    let params = parse_parameters(parameters)?;
    let data = read_dataset(cfg, data)?;
    let b = &cfg.bootstrap;
    let rows = params
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let seed = substream(b.seed, i as u64).random::<u64>();
            let r = bootstrap::bca_bounds(&data, |f| p.evaluate(f), b.delta, b.replicates, seed)?;
            Ok(ParamRow {
                name: p.to_string(),
                estimate: Some(r.estimate),
                lower: Some(r.lower),
                upper: Some(r.upper),
                delta: Some(b.delta),
                method: "bca".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_file(out, &params_json(&rows))
}

fn cmd_forecast(cfg: &Config, data: &Path, out: &Path) -> Result<()> {
    let data = read_dataset(cfg, data)?;
    let ns = &cfg.nonstat;
    let k = if ns.key_points == 0 { band::key_point_count(data.len()) } else { ns.key_points };
    let plan = KeyPointPlan::uniform(k, data.g_min(), data.g_max(), ns.delta, CiMethod::hoeffding(1.0)?);
    let band = nonstat::forecast_band(&data, &plan, ns.basis_order, ns.lead, ns.delta, ns.replicates, ns.seed)?;
    write_file(out, &band_csv(&band))
}

fn cmd_coverage(cfg: &Config, out: &Path) -> Result<()> {
    let seed = cfg.experiment_seed()?;
    let setup = build_setup(cfg)?;
    let EnvChoice::Chain(spec) = &setup.env else {
        return Err(Error::invalid("coverage needs an enumerable environment (env.kind = \"chain\")"));
    };
    let truth = oracle::enumerate_return_cdf(spec, &setup.pi, setup.gamma)?;
    let params: Vec<Parameter> = cfg.experiment.parameters.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let true_values: Vec<f64> = params.iter().map(|&p| oracle::true_parameter(&truth, p)).collect::<Result<_>>()?;
    let opts = cfg.fit_options()?;
    let trials = cfg.experiment.trials;
    if trials == 0 {
        return Err(Error::invalid("experiment.trials must be positive"));
    }

    let mut csv = String::from("n,target,trials,failure_rate,mean_width\n");
    for (si, &n) in cfg.experiment.sizes.iter().enumerate() {
        // per trial: (band miss, per-parameter miss, band area, widths)
        let results: Vec<(bool, Vec<bool>, f64, Vec<f64>)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let trial_seed = substream(seed, ((si as u64) << 32) | t as u64).random::<u64>();
                let data = envs::generate_dataset(spec, &setup.behaviors, n, &setup.pi, setup.gamma, trial_seed)?;
                let band = band::fit_band(&data, &FitOptions { seed: trial_seed, ..opts })?.band;
                let mut misses = Vec::with_capacity(params.len());
                let mut widths = Vec::with_capacity(params.len());
                for (&p, &v) in params.iter().zip(&true_values) {
                    let (lo, hi) = bounds::parameter_bounds(&band, p)?;
                    misses.push(!(lo <= v + 1e-12 && v <= hi + 1e-12));
                    widths.push(hi - lo);
                }
                Ok((!band.contains(&truth), misses, band.area(), widths))
            })
            .collect::<Result<_>>()?;
        let rate = |f: &dyn Fn(&(bool, Vec<bool>, f64, Vec<f64>)) -> bool| {
            results.iter().filter(|r| f(r)).count() as f64 / trials as f64
        };
        let mean = |f: &dyn Fn(&(bool, Vec<bool>, f64, Vec<f64>)) -> f64| {
            crate::numeric::sum(results.iter().map(f)) / trials as f64
        };
        let _ = writeln!(csv, "{n},band,{trials},{},{}", fmt_num(rate(&|r| r.0)), fmt_num(mean(&|r| r.2)));
        for (j, p) in params.iter().enumerate() {
            let _ = writeln!(csv, "{n},{p},{trials},{},{}", fmt_num(rate(&|r| r.1[j])), fmt_num(mean(&|r| r.3[j])));
        }
        let _ = writeln!(csv, "{n},joint,{trials},{},", fmt_num(rate(&|r| r.1.iter().any(|&m| m))));
    }
    write_file(out, &csv)
}

// ------------------------------------------------------------------- plots

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0).max(1e-300) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0).max(1e-300) * (H - 2.0 * MARGIN)
    }

    fn path(&self, pts: &[(f64, f64)]) -> String {
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, self.px(x), self.py(y));
        }
        d.trim_end().to_string()
    }
}

fn svg_document(frame: &Frame, title: &str, body: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, "<path d=\"M{l},{t} L{l},{b} L{r},{b}\" stroke=\"black\" fill=\"none\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"25\" font-size=\"14\" text-anchor=\"middle\">{}</text>", W / 2.0, xml_escape(title));
    for (v, x) in [(frame.x0, l), (frame.x1, r)] {
        let _ = writeln!(s, "<text x=\"{x:.2}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{v:.4}</text>", b + 16.0);
    }
    for (v, y) in [(frame.y0, b), (frame.y1, t)] {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{y:.2}\" font-size=\"11\" text-anchor=\"end\">{v:.4}</text>", l - 4.0);
    }
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Vertices of a right-continuous step function over `[x0, x1]`.
fn step_points(xs: &[f64], ys: &[f64], x0: f64, x1: f64, before: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(x0, before)];
    let mut prev = before;
    for (&x, &y) in xs.iter().zip(ys) {
        pts.push((x, prev));
        pts.push((x, y));
        prev = y;
    }
    pts.push((x1, prev));
    pts
}

fn plot_step(frame: &Frame, xs: &[f64], ys: &[f64], color: &str) -> String {
    format!(
        "<path d=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>\n",
        frame.path(&step_points(xs, ys, frame.x0, frame.x1, 0.0))
    )
}

/// Renders a CSV written by `estimate`, `band`/`forecast` or `coverage`.
pub fn render_svg(csv: &str) -> Result<String> {
    let (cols, rows) = parse_csv(csv)?;
    let col = |name: &str| cols.iter().position(|c| c == name);
    let num = |r: &Vec<String>, j: usize, i: usize| parse_f64_cell(&r[j], i + 2);
    if let (Some(a), Some(b)) = (col("nu"), col("cdf")) {
        let xs: Vec<f64> = rows.iter().enumerate().map(|(i, r)| num(r, a, i)).collect::<Result<_>>()?;
        let ys: Vec<f64> = rows.iter().enumerate().map(|(i, r)| num(r, b, i)).collect::<Result<_>>()?;
        if xs.is_empty() {
            return Err(parse_err(2, "no rows to plot"));
        }
        let pad = ((xs[xs.len() - 1] - xs[0]) * 0.05).max(1e-9);
        let y1 = ys.iter().copied().fold(1.0, f64::max);
        let frame = Frame { x0: xs[0] - pad, x1: xs[xs.len() - 1] + pad, y0: 0.0, y1 };
        return Ok(svg_document(&frame, "CDF estimate", &plot_step(&frame, &xs, &ys, "#1f4e99")));
    }
    if let (Some(a), Some(b), Some(c)) = (col("nu"), col("f_lower"), col("f_upper")) {
        let xs: Vec<f64> = rows.iter().enumerate().map(|(i, r)| num(r, a, i)).collect::<Result<_>>()?;
        let lo: Vec<f64> = rows.iter().enumerate().map(|(i, r)| num(r, b, i)).collect::<Result<_>>()?;
        let up: Vec<f64> = rows.iter().enumerate().map(|(i, r)| num(r, c, i)).collect::<Result<_>>()?;
        if xs.is_empty() {
            return Err(parse_err(2, "no rows to plot"));
        }
        let pad = ((xs[xs.len() - 1] - xs[0]) * 0.05).max(1e-9);
        let frame = Frame { x0: xs[0] - pad, x1: xs[xs.len() - 1] + pad, y0: 0.0, y1: 1.0 };
        let upper_pts = step_points(&xs, &up, frame.x0, frame.x1, 0.0);
        let mut lower_pts = step_points(&xs, &lo, frame.x0, frame.x1, 0.0);
        lower_pts.reverse();
        let mut area = upper_pts.clone();
        area.extend(lower_pts);
        let body = format!(
            "<path d=\"{} Z\" fill=\"#9ab8e6\" fill-opacity=\"0.5\" stroke=\"none\"/>\n{}{}",
            frame.path(&area),
            plot_step(&frame, &xs, &lo, "#1f4e99"),
            plot_step(&frame, &xs, &up, "#b22222")
        );
        return Ok(svg_document(&frame, "Confidence band", &body));
    }
    if let (Some(a), Some(b), Some(c)) = (col("n"), col("target"), col("mean_width")) {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r[c].is_empty() {
                continue;
            }
            let n = num(r, a, i)?;
            if !(n > 0.0) {
                return Err(parse_err(i + 2, "sample sizes must be positive"));
            }
            let w = num(r, c, i)?;
            match series.iter_mut().find(|s| s.0 == r[b]) {
                Some(s) => s.1.push((n.log10(), w)),
                None => series.push((r[b].clone(), vec![(n.log10(), w)])),
            }
        }
        let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
        if all.is_empty() {
            return Err(parse_err(2, "no rows to plot"));
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y1 = 0.0f64;
        for &(x, y) in &all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        let frame = Frame { x0, x1, y0: 0.0, y1: if y1 > 0.0 { y1 } else { 1.0 } };
        let palette = ["#1f4e99", "#b22222", "#2e8b57", "#8b6914", "#6a3d9a", "#ff7f00", "#333333"];
        let mut body = String::new();
        for (k, (name, pts)) in series.iter().enumerate() {
            let color = palette[k % palette.len()];
            let _ = writeln!(body, "<path d=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>", frame.path(pts));
            let _ = writeln!(
                body,
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>",
                W - MARGIN + 4.0,
                MARGIN + 14.0 * k as f64,
                xml_escape(name)
            );
        }
        return Ok(svg_document(&frame, "Mean width vs log10(n)", &body));
    }
    Err(parse_err(1, "unrecognized CSV columns"))
}

fn cmd_plot(input: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).map_err(|e| Error::invalid(format!("{}: {e}", input.display())))?;
    write_file(out, &render_svg(&text)?)
}
