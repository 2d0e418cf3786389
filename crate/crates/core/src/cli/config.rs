//! Command-line flags, the flat TOML configuration file and their merge into
//! a validated [`RunConfig`].

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity, SpinOperatorKind};
use crate::quench::TimeGrid;
use crate::spectra::StateSelector;

pub const OUTPUT_DIR_ENV: &str = "ALMG_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "almg-out";

pub const DEFAULT_N: usize = 300;
pub const DEFAULT_XI: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = -0.6;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 1e4;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SIGMA: f64 = 0.01;

#[derive(Parser, Debug)]
#[command(name = "almg", version, about = "Spectra, quenches, echoes and OTOCs of the anharmonic LMG model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Full spectrum at one (N, ξ, α)
    Spectrum,
    /// Survival probability after a quench ξ₁ → ξ₂
    Quench,
    /// Local density of states after a quench ξ₁ → ξ₂
    Ldos,
    /// Loschmidt echoes and their time averages
    Echo,
    /// Microcanonical OTOCs and steady-state values
    Otoc,
    /// Steady-state OTOC over a ξ grid
    Diagram,
    /// Tangent construction for the critical quench ξ₂
    Critical,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Quench => "quench",
            CommandKind::Ldos => "ldos",
            CommandKind::Echo => "echo",
            CommandKind::Otoc => "otoc",
            CommandKind::Diagram => "diagram",
            CommandKind::Critical => "critical",
        }
    }

    /// Configuration keys this command reads, besides `command`, `N`,
    /// `alpha` and `output_dir`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            CommandKind::Spectrum => &["xi", "cache"],
            CommandKind::Quench => &["xi1", "xi2", "from", "eps0", "t_max", "n_points", "cache"],
            CommandKind::Ldos => &["xi1", "xi2", "from", "eps0", "sigma", "cache"],
            CommandKind::Echo => &["xi", "delta", "states", "t_max", "n_points"],
            CommandKind::Otoc => &[
                "xi",
                "W",
                "V",
                "normalized",
                "states",
                "parity",
                "horizon",
                "samples",
                "steady",
                "commutator",
                "t_max",
                "n_points",
                "cache",
            ],
            CommandKind::Diagram => &["xi_grid", "W", "V", "normalized", "parity", "horizon", "samples", "steady"],
            CommandKind::Critical => &["xi1", "from", "eps0"],
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CommandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            CommandKind::Spectrum,
            CommandKind::Quench,
            CommandKind::Ldos,
            CommandKind::Echo,
            CommandKind::Otoc,
            CommandKind::Diagram,
            CommandKind::Critical,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown command `{s}`")))
    }
}

/// Flags shared by every subcommand. Each one overrides the key of the same
/// name in the configuration file.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Number of particles (even)
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Control parameter ξ ∈ [0, 1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xi: Option<f64>,
    /// Anharmonicity α
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Initial control parameter of a quench
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xi1: Option<f64>,
    /// Final control parameter of a quench, or `critical`
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xi2: Option<String>,
    /// Initial state: ground, highest-even, highest, even:J, odd:J, near-eps:E, near-energy:E
    #[arg(long, global = true)]
    pub from: Option<String>,
    /// Target energy of the flat critical line (default 1 + α)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eps0: Option<f64>,
    /// Echo perturbation of ξ
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// State list, e.g. `even:0,20,48`, `odd:3..6`, `near-eps:0.3`
    #[arg(long, global = true)]
    pub states: Option<String>,
    /// OTOC operator W: sz, sp, sm, sx, sy, sx2, n, nsq, parity
    #[arg(long = "W", global = true)]
    pub w: Option<String>,
    /// OTOC operator V
    #[arg(long = "V", global = true)]
    pub v: Option<String>,
    /// Use the bare operators instead of dividing by S
    #[arg(long, global = true)]
    pub unnormalized: bool,
    /// Also write the squared commutator C and the two-point part A
    #[arg(long, global = true)]
    pub commutator: bool,
    /// Averaging horizon of the numeric steady state
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Sample count of the numeric steady state
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Steady-state evaluation: exact or numeric
    #[arg(long, global = true)]
    pub steady: Option<String>,
    /// ξ grid as start:stop:step
    #[arg(long = "xi-grid", global = true)]
    pub xi_grid: Option<String>,
    /// Parity sector (even or odd)
    #[arg(long, global = true)]
    pub parity: Option<String>,
    /// End of the time grid
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
    /// Number of time points
    #[arg(long = "n-points", global = true)]
    pub n_points: Option<usize>,
    /// Gaussian width (energy per site) of the broadened LDOS
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Output directory (default: $ALMG_OUTPUT_DIR, then ./almg-out)
    #[arg(long = "output-dir", global = true)]
    pub output_dir: Option<PathBuf>,
    /// Directory of the on-disk spectral cache
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Flat TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Recompute and compare against the manifest in the output directory
    #[arg(long, global = true)]
    pub verify: bool,
}

/// Either a number or a word, as accepted by `xi2`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NumberOrWord {
    Number(f64),
    Word(String),
}

/// Contents of a configuration file. Keys mirror the long flags with `-`
/// replaced by `_`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub xi: Option<f64>,
    pub alpha: Option<f64>,
    pub xi1: Option<f64>,
    pub xi2: Option<NumberOrWord>,
    pub from: Option<String>,
    pub eps0: Option<f64>,
    pub delta: Option<f64>,
    pub states: Option<String>,
    #[serde(rename = "W")]
    pub w: Option<String>,
    #[serde(rename = "V")]
    pub v: Option<String>,
    pub normalized: Option<bool>,
    pub commutator: Option<bool>,
    pub horizon: Option<f64>,
    pub samples: Option<usize>,
    pub steady: Option<String>,
    pub xi_grid: Option<String>,
    pub parity: Option<String>,
    pub t_max: Option<f64>,
    pub n_points: Option<usize>,
    pub sigma: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("{}: {e}", origin.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FileConfig::parse(&text, path)
    }

    fn present(&self) -> Vec<&'static str> {
        let mut k = Vec::new();
        macro_rules! key {
            ($field:ident, $name:literal) => {
                if self.$field.is_some() {
                    k.push($name);
                }
            };
        }
        key!(xi, "xi");
        key!(xi1, "xi1");
        key!(xi2, "xi2");
        key!(from, "from");
        key!(eps0, "eps0");
        key!(delta, "delta");
        key!(states, "states");
        key!(w, "W");
        key!(v, "V");
        key!(normalized, "normalized");
        key!(commutator, "commutator");
        key!(horizon, "horizon");
        key!(samples, "samples");
        key!(steady, "steady");
        key!(xi_grid, "xi_grid");
        key!(parity, "parity");
        key!(t_max, "t_max");
        key!(n_points, "n_points");
        key!(sigma, "sigma");
        key!(cache, "cache");
        k
    }
}

impl Flags {
    fn present(&self) -> Vec<(&'static str, &'static str)> {
        let mut k = Vec::new();
        macro_rules! flag {
            ($cond:expr, $key:literal, $flag:literal) => {
                if $cond {
                    k.push(($key, $flag));
                }
            };
        }
        flag!(self.xi.is_some(), "xi", "--xi");
        flag!(self.xi1.is_some(), "xi1", "--xi1");
        flag!(self.xi2.is_some(), "xi2", "--xi2");
        flag!(self.from.is_some(), "from", "--from");
        flag!(self.eps0.is_some(), "eps0", "--eps0");
        flag!(self.delta.is_some(), "delta", "--delta");
        flag!(self.states.is_some(), "states", "--states");
        flag!(self.w.is_some(), "W", "--W");
        flag!(self.v.is_some(), "V", "--V");
        flag!(self.unnormalized, "normalized", "--unnormalized");
        flag!(self.commutator, "commutator", "--commutator");
        flag!(self.horizon.is_some(), "horizon", "--horizon");
        flag!(self.samples.is_some(), "samples", "--samples");
        flag!(self.steady.is_some(), "steady", "--steady");
        flag!(self.xi_grid.is_some(), "xi_grid", "--xi-grid");
        flag!(self.parity.is_some(), "parity", "--parity");
        flag!(self.t_max.is_some(), "t_max", "--t-max");
        flag!(self.n_points.is_some(), "n_points", "--n-points");
        flag!(self.sigma.is_some(), "sigma", "--sigma");
        flag!(self.cache.is_some(), "cache", "--cache");
        k
    }
}

/// Target of a quench.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Xi2Target {
    Value(f64),
    /// Solve the tangent construction for the initial state.
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMode {
    Exact,
    Numeric,
}

impl FromStr for SteadyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SteadyMode::Exact),
            "numeric" => Ok(SteadyMode::Numeric),
            _ => Err(Error::invalid(format!("steady must be `exact` or `numeric`, got `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteadyBlock {
    pub mode: SteadyMode,
    pub horizon: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatorPair {
    pub w: SpinOperatorKind,
    pub v: SpinOperatorKind,
    pub normalized: bool,
}

/// Command-specific settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandBlock {
    Spectrum,
    Quench { xi1: f64, xi2: Xi2Target, from: StateSelector, eps0: Option<f64> },
    Ldos { xi1: f64, xi2: Xi2Target, from: StateSelector, eps0: Option<f64>, sigma: f64 },
    Echo { delta: f64, states: Vec<StateSelector> },
    Otoc { ops: OperatorPair, states: Vec<StateSelector>, parity: Parity, steady: SteadyBlock, commutator: bool },
    Diagram { xi_grid: Vec<f64>, ops: OperatorPair, parity: Parity, steady: SteadyBlock },
    Critical { xi1: f64, from: StateSelector, eps0: Option<f64> },
}

/// Validated run configuration. `model.xi` is `ξ₁` for quench, ldos and
/// critical runs and the default `ξ` for diagram runs, whose grid supersedes
/// it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelParams,
    pub block: CommandBlock,
    pub grid: TimeGrid,
    pub output_dir: PathBuf,
    pub cache: Option<PathBuf>,
    #[serde(skip)]
    pub verify: bool,
}

/// Parses `from` values: `ground`, `highest-even`, `highest`, `even:J`,
/// `odd:J`, `[parity:]near-eps:E`, `[parity:]near-energy:E`.
pub fn parse_selector(s: &str) -> Result<StateSelector> {
    match s.trim() {
        "ground" => return Ok(StateSelector::Ground),
        "highest-even" => return Ok(StateSelector::HighestEven),
        "highest" => return Ok(StateSelector::Highest),
        _ => {}
    }
    let items = parse_states(s)?;
    match items.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::invalid(format!("`{s}` does not name a single state"))),
    }
}

/// Parses a state list such as `even:0,20,48`, `odd:3..6,even:1..=2` or
/// `near-eps:0.3`. A parity prefix applies to the items after it; the
/// default parity is even. Ranges are `a..b` (exclusive) and `a..=b`.
pub fn parse_states(s: &str) -> Result<Vec<StateSelector>> {
    let mut parity = Parity::Even;
    let mut out = Vec::new();
    for raw in s.split(',') {
        let mut item = raw.trim();
        for (prefix, p) in [("even:", Parity::Even), ("odd:", Parity::Odd)] {
            if let Some(rest) = item.strip_prefix(prefix) {
                parity = p;
                item = rest.trim();
            }
        }
        let bad = |what: &str| Error::invalid(format!("state list `{s}`: {what} in `{}`", raw.trim()));
        if item.is_empty() {
            return Err(bad("empty item"));
        }
        if let Some(v) = item.strip_prefix("near-eps:") {
            let eps = v.parse::<f64>().map_err(|_| bad("bad number"))?;
            out.push(StateSelector::NearestEps { parity, eps });
        } else if let Some(v) = item.strip_prefix("near-energy:") {
            let energy = v.parse::<f64>().map_err(|_| bad("bad number"))?;
            out.push(StateSelector::NearestEnergyPerSite { parity, energy });
        } else if let Some((a, b)) = item.split_once("..") {
            let (b, inclusive) = match b.strip_prefix('=') {
                Some(b) => (b, true),
                None => (b, false),
            };
            let a = a.trim().parse::<usize>().map_err(|_| bad("bad range start"))?;
            let b = b.trim().parse::<usize>().map_err(|_| bad("bad range end"))?;
            let end = if inclusive { b + 1 } else { b };
            if end <= a {
                return Err(bad("empty range"));
            }
            out.extend((a..end).map(|j| StateSelector::Index { parity, j }));
        } else {
            let j = item.parse::<usize>().map_err(|_| bad("bad index"))?;
            out.push(StateSelector::Index { parity, j });
        }
    }
    Ok(out)
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_xi_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::invalid(format!("xi-grid `{s}`: {why}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("expected start:stop:step"))?;
    let [start, stop, step] = parts[..] else {
        return Err(bad("expected start:stop:step"));
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(bad("step must be positive and stop >= start"));
    }
    if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&stop) {
        return Err(bad("ξ values must lie in [0, 1]"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| (start + k as f64 * step).min(stop)).collect())
}

fn env_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn check_keys(command: CommandKind, file: Option<(&FileConfig, &Path)>, flags: &Flags) -> Result<()> {
    let allowed: BTreeSet<&str> = command.keys().iter().copied().collect();
    if let Some((file, path)) = file {
        if let Some(key) = file.present().into_iter().find(|k| !allowed.contains(k)) {
            return Err(Error::invalid(format!(
                "{}: key `{key}` is not used by the `{command}` command",
                path.display()
            )));
        }
    }
    if let Some((_, flag)) = flags.present().into_iter().find(|(k, _)| !allowed.contains(k)) {
        return Err(Error::invalid(format!("{flag} is not used by the `{command}` command")));
    }
    Ok(())
}

fn parse_xi2(v: &NumberOrWord) -> Result<Xi2Target> {
    match v {
        NumberOrWord::Number(x) => Ok(Xi2Target::Value(*x)),
        NumberOrWord::Word(w) if w == "critical" => Ok(Xi2Target::Critical),
        NumberOrWord::Word(w) => w
            .parse::<f64>()
            .map(Xi2Target::Value)
            .map_err(|_| Error::invalid(format!("xi2 must be a number or `critical`, got `{w}`"))),
    }
}

fn check_xi(name: &str, xi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::invalid(format!("{name} = {xi} is outside [0, 1]")));
    }
    Ok(xi)
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid(format!("{name} must be positive, got {x}")));
    }
    Ok(x)
}

impl RunConfig {
    /// Builds the configuration from parsed flags, reading `--config` if given.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.flags.config {
            Some(path) => Some((FileConfig::load(path)?, path.clone())),
            None => None,
        };
        RunConfig::merge(cli.command, file.as_ref().map(|(f, p)| (f, p.as_path())), &cli.flags)
    }

    /// Flags override file values; unset values fall back to the defaults.
    pub fn merge(command: CommandKind, file: Option<(&FileConfig, &Path)>, flags: &Flags) -> Result<Self> {
        let empty = FileConfig::default();
        let f = file.map(|(f, _)| f).unwrap_or(&empty);
        if let (Some(name), Some((_, path))) = (&f.command, file) {
            let in_file: CommandKind =
                name.parse().map_err(|e: Error| Error::invalid(format!("{}: {e}", path.display())))?;
            if in_file != command {
                return Err(Error::invalid(format!(
                    "{}: configures command `{in_file}` but `{command}` was requested",
                    path.display()
                )));
            }
        }
        check_keys(command, file, flags)?;

        let n = flags.n.or(f.n).unwrap_or(DEFAULT_N);
        let alpha = flags.alpha.or(f.alpha).unwrap_or(DEFAULT_ALPHA);
        let xi = check_xi("xi", flags.xi.or(f.xi).unwrap_or(DEFAULT_XI))?;
        let xi1 = flags.xi1.or(f.xi1);
        let xi2 = match (&flags.xi2, &f.xi2) {
            (Some(s), _) => Some(parse_xi2(&NumberOrWord::Word(s.clone()))?),
            (None, Some(v)) => Some(parse_xi2(v)?),
            (None, None) => None,
        };
        let from = match flags.from.as_ref().or(f.from.as_ref()) {
            Some(s) => parse_selector(s)?,
            None => StateSelector::Ground,
        };
        let eps0 = flags.eps0.or(f.eps0);
        let states = match flags.states.as_ref().or(f.states.as_ref()) {
            Some(s) => parse_states(s)?,
            None => Vec::new(),
        };
        let parity = match flags.parity.as_ref().or(f.parity.as_ref()) {
            Some(s) => s.parse::<Parity>()?,
            None => Parity::Even,
        };
        let ops = OperatorPair {
            w: flags.w.as_ref().or(f.w.as_ref()).map_or(Ok(SpinOperatorKind::Sp), |s| s.parse())?,
            v: flags.v.as_ref().or(f.v.as_ref()).map_or(Ok(SpinOperatorKind::Sm), |s| s.parse())?,
            normalized: if flags.unnormalized { false } else { f.normalized.unwrap_or(true) },
        };
        let steady = SteadyBlock {
            mode: flags.steady.as_ref().or(f.steady.as_ref()).map_or(Ok(SteadyMode::Exact), |s| s.parse())?,
            horizon: positive("horizon", flags.horizon.or(f.horizon).unwrap_or(DEFAULT_HORIZON))?,
            samples: flags.samples.or(f.samples).unwrap_or(DEFAULT_SAMPLES),
        };
        if steady.samples < 1000 {
            return Err(Error::invalid(format!("samples must be at least 1000, got {}", steady.samples)));
        }
        let grid = TimeGrid::new(
            flags.t_max.or(f.t_max).unwrap_or(TimeGrid::default().t_max),
            flags.n_points.or(f.n_points).unwrap_or(TimeGrid::default().n_points),
        )?;
        let commutator = flags.commutator || f.commutator.unwrap_or(false);
        let sigma = positive("sigma", flags.sigma.or(f.sigma).unwrap_or(DEFAULT_SIGMA))?;
        let delta = flags.delta.or(f.delta).unwrap_or(DEFAULT_DELTA);

        let need_xi1 =
            || xi1.ok_or_else(|| Error::invalid(format!("`{command}` needs --xi1"))).and_then(|x| check_xi("xi1", x));
        let need_xi2 = || {
            let t = xi2.ok_or_else(|| Error::invalid(format!("`{command}` needs --xi2 (a value or `critical`)")))?;
            if let Xi2Target::Value(x) = t {
                check_xi("xi2", x)?;
            }
            if t == Xi2Target::Critical && !matches!(from, StateSelector::Ground | StateSelector::HighestEven) {
                return Err(Error::invalid("xi2 = critical needs --from ground or --from highest-even"));
            }
            Ok(t)
        };

        let (model_xi, block) = match command {
            CommandKind::Spectrum => (xi, CommandBlock::Spectrum),
            CommandKind::Quench => {
                let xi1 = need_xi1()?;
                (xi1, CommandBlock::Quench { xi1, xi2: need_xi2()?, from, eps0 })
            }
            CommandKind::Ldos => {
                let xi1 = need_xi1()?;
                (xi1, CommandBlock::Ldos { xi1, xi2: need_xi2()?, from, eps0, sigma })
            }
            CommandKind::Echo => {
                check_xi("xi + delta", xi + delta)?;
                (xi, CommandBlock::Echo { delta, states })
            }
            CommandKind::Otoc => (xi, CommandBlock::Otoc { ops, states, parity, steady, commutator }),
            CommandKind::Diagram => {
                let spec = flags.xi_grid.as_ref().or(f.xi_grid.as_ref());
                let xi_grid = parse_xi_grid(spec.map_or("0:1:0.01", String::as_str))?;
                (xi, CommandBlock::Diagram { xi_grid, ops, parity, steady })
            }
            CommandKind::Critical => {
                let xi1 = need_xi1()?;
                if !matches!(from, StateSelector::Ground | StateSelector::HighestEven) {
                    return Err(Error::invalid("critical needs --from ground or --from highest-even"));
                }
                (xi1, CommandBlock::Critical { xi1, from, eps0 })
            }
        };
        let model = ModelParams::new(n, model_xi, alpha)?;
        let output_dir = flags.output_dir.clone().or_else(|| f.output_dir.clone()).unwrap_or_else(env_output_dir);
        let cache = flags.cache.clone().or_else(|| f.cache.clone());
        Ok(RunConfig { command, model, block, grid, output_dir, cache, verify: flags.verify })
    }
}
