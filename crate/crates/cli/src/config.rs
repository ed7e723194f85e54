//! Command-line flags, the optional config file, and their merge into one
//! validated [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kitaev_ness::spatial::ScanGrid;
use kitaev_ness::ModelParams;
use serde::Deserialize;

use crate::grid::{parse_axis, parse_int_axis};

pub const DEFAULT_MU: f64 = 0.4;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_Q: f64 = 0.5;
pub const DEFAULT_L: usize = 64;

#[derive(Parser, Debug)]
#[command(
    name = "kitaev-ness",
    version,
    about = "Steady states of a lossy Kitaev chain with partially postselected detector clicks",
    after_help = "Exit codes: 0 success, 1 invalid input, 2 numerical failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Steady,
    Xi,
    Negativity,
    Gap,
    Oracle,
    Sweep,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Real-space correlation blocks Γ(x): x, g11, g12, g21, g22.
    Steady(Flags),
    /// Correlation-length bound and fit: mu, gamma, q, L, xi_up, xi_fit, alpha, r2.
    Xi(Flags),
    /// Negativity profile of a block of ell sites: ell, chord, negativity.
    Negativity(Flags),
    /// Liouvillian gap from the rapidities: mu, gamma, q, L, gap.
    Gap(Flags),
    /// JSON report comparing the solution with brute-force checks (L <= 6).
    Oracle(Flags),
    /// Overview map: mu, gamma, q, L, xi_up, gap.
    Sweep(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Steady(f) => (CommandKind::Steady, f),
            Command::Xi(f) => (CommandKind::Xi, f),
            Command::Negativity(f) => (CommandKind::Negativity, f),
            Command::Gap(f) => (CommandKind::Gap, f),
            Command::Oracle(f) => (CommandKind::Oracle, f),
            Command::Sweep(f) => (CommandKind::Sweep, f),
        }
    }
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Steady => "steady",
            CommandKind::Xi => "xi",
            CommandKind::Negativity => "negativity",
            CommandKind::Gap => "gap",
            CommandKind::Oracle => "oracle",
            CommandKind::Sweep => "sweep",
        }
    }

    fn sweepable(self) -> bool {
        matches!(self, CommandKind::Xi | CommandKind::Gap | CommandKind::Sweep)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Default)]
pub struct Flags {
    /// Chemical potential [default: 0.4]
    #[arg(long, allow_negative_numbers = true, conflicts_with = "sweep_mu")]
    pub mu: Option<f64>,
    /// Loss rate, >= 0 [default: 1]
    #[arg(long, conflicts_with = "sweep_gamma")]
    pub gamma: Option<f64>,
    /// Postselected fraction of click trajectories, in [0, 1] [default: 0.5]
    #[arg(long, allow_negative_numbers = true, conflicts_with = "sweep_q")]
    pub q: Option<f64>,
    /// Chain length, even [default: 64]
    #[arg(long = "L", conflicts_with = "sweep_l")]
    pub l: Option<usize>,
    /// Sweep of q as START:STOP:STEP or a comma list
    #[arg(long, value_name = "AXIS", allow_hyphen_values = true)]
    pub sweep_q: Option<String>,
    /// Sweep of gamma as START:STOP:STEP or a comma list
    #[arg(long, value_name = "AXIS", allow_hyphen_values = true)]
    pub sweep_gamma: Option<String>,
    /// Sweep of mu as START:STOP:STEP or a comma list
    #[arg(long, value_name = "AXIS", allow_hyphen_values = true)]
    pub sweep_mu: Option<String>,
    /// Sweep of L as START:STOP:STEP or a comma list
    #[arg(long = "sweep-L", value_name = "AXIS")]
    pub sweep_l: Option<String>,
    /// Block lengths for `negativity` [default: powers of two below L/2, then L/2]
    #[arg(long, value_name = "AXIS")]
    pub ell: Option<String>,
    /// Output file [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: csv; json for `oracle`]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Seed of the trajectory sampler [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with flat keys named like the long flags (dashes become underscores)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Omit the timestamp so identical runs give identical bytes
    #[arg(long)]
    pub reproducible: bool,
    /// Largest Im k of the singularity scan [default: 3]
    #[arg(long)]
    pub im_max: Option<f64>,
    /// Real-axis cells of the singularity scan [default: 2048]
    #[arg(long)]
    pub n_re: Option<usize>,
    /// Imaginary-axis rows of the singularity scan [default: 512]
    #[arg(long)]
    pub n_im: Option<usize>,
    /// Trajectories per unraveling in `oracle`, 0 to skip sampling [default: 0]
    #[arg(long)]
    pub n_traj: Option<usize>,
    /// Duration of each trajectory run in `oracle` [default: 40]
    #[arg(long)]
    pub traj_time: Option<f64>,
    /// Print the resolved configuration and the number of points, compute nothing
    #[arg(long)]
    pub dry_run: bool,
}

/// Keys accepted in a config file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub sweep_q: Option<String>,
    pub sweep_gamma: Option<String>,
    pub sweep_mu: Option<String>,
    #[serde(rename = "sweep_L")]
    pub sweep_l: Option<String>,
    pub ell: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub reproducible: Option<bool>,
    pub im_max: Option<f64>,
    pub n_re: Option<usize>,
    pub n_im: Option<usize>,
    pub n_traj: Option<usize>,
    pub traj_time: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {}", path.display(), e.message()))
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<usize>,
    pub ell: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub reproducible: bool,
    pub scan: ScanGrid,
    pub n_traj: usize,
    pub traj_time: f64,
    pub dry_run: bool,
}

fn axis(flag: &Option<f64>, sweep: &Option<String>, file_v: Option<f64>, file_s: &Option<String>, default: f64, name: &str) -> Result<Vec<f64>, String> {
    if let Some(s) = sweep {
        return parse_axis(s).map_err(|e| format!("--sweep-{name}: {e}"));
    }
    if let Some(v) = flag {
        return Ok(vec![*v]);
    }
    if let Some(s) = file_s {
        return parse_axis(s).map_err(|e| format!("sweep_{name}: {e}"));
    }
    Ok(vec![file_v.unwrap_or(default)])
}

impl RunConfig {
    pub fn resolve(command: CommandKind, f: Flags) -> Result<Self, String> {
        let file = match &f.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mu = axis(&f.mu, &f.sweep_mu, file.mu, &file.sweep_mu, DEFAULT_MU, "mu")?;
        let gamma = axis(&f.gamma, &f.sweep_gamma, file.gamma, &file.sweep_gamma, DEFAULT_GAMMA, "gamma")?;
        let q = axis(&f.q, &f.sweep_q, file.q, &file.sweep_q, DEFAULT_Q, "q")?;
        let l = if let Some(s) = &f.sweep_l {
            parse_int_axis(s).map_err(|e| format!("--sweep-L: {e}"))?
        } else if let Some(v) = f.l {
            vec![v]
        } else if let Some(s) = &file.sweep_l {
            parse_int_axis(s).map_err(|e| format!("sweep_L: {e}"))?
        } else {
            vec![file.l.unwrap_or(DEFAULT_L)]
        };
        let ell = match f.ell.as_ref().or(file.ell.as_ref()) {
            Some(s) => Some(parse_int_axis(s).map_err(|e| format!("--ell: {e}"))?),
            None => None,
        };
        let default_format = if command == CommandKind::Oracle { Format::Json } else { Format::Csv };
        let defaults = ScanGrid::default();
        let cfg = RunConfig {
            command,
            mu,
            gamma,
            q,
            l,
            ell,
            out: f.out.or(file.out),
            format: f.format.or(file.format).unwrap_or(default_format),
            seed: f.seed.or(file.seed).unwrap_or(0),
            reproducible: f.reproducible || file.reproducible.unwrap_or(false),
            scan: ScanGrid {
                im_max: f.im_max.or(file.im_max).unwrap_or(defaults.im_max),
                n_re: f.n_re.or(file.n_re).unwrap_or(defaults.n_re),
                n_im: f.n_im.or(file.n_im).unwrap_or(defaults.n_im),
            },
            n_traj: f.n_traj.or(file.n_traj).unwrap_or(0),
            traj_time: f.traj_time.or(file.traj_time).unwrap_or(40.0),
            dry_run: f.dry_run,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        for p in self.points() {
            p.map_err(|e| e.to_string())?;
        }
        if !self.command.sweepable() && self.n_points() > 1 {
            return Err(format!("`{}` runs a single parameter point; sweeps are for xi, gap and sweep", self.command.name()));
        }
        if let Some(ell) = &self.ell {
            if self.command != CommandKind::Negativity {
                return Err("--ell only applies to `negativity`".into());
            }
            let l = self.l[0];
            if let Some(bad) = ell.iter().find(|&&e| e > l) {
                return Err(format!("block length {bad} exceeds L = {l}"));
            }
        }
        if !(self.scan.im_max > 0.0) || self.scan.n_re < 8 || self.scan.n_im < 4 {
            return Err("scan grid needs im_max > 0, n_re >= 8, n_im >= 4".into());
        }
        if !(self.traj_time > 0.0) {
            return Err(format!("traj_time must be positive, got {}", self.traj_time));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.mu.len() * self.gamma.len() * self.q.len() * self.l.len()
    }

    /// Parameter points in output order: `mu` outermost, then `gamma`, `q`,
    /// and `L` innermost.
    pub fn points(&self) -> Vec<kitaev_ness::Result<ModelParams>> {
        let mut out = Vec::with_capacity(self.n_points());
        for &mu in &self.mu {
            for &gamma in &self.gamma {
                for &q in &self.q {
                    for &l in &self.l {
                        out.push(ModelParams::new(mu, gamma, q, l));
                    }
                }
            }
        }
        out
    }

    /// One-line description of every resolved setting.
    pub fn describe(&self) -> String {
        fn list<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = format!(
            "command={} mu={} gamma={} q={} L={} seed={} format={} im_max={} n_re={} n_im={}",
            self.command.name(),
            list(&self.mu),
            list(&self.gamma),
            list(&self.q),
            list(&self.l),
            self.seed,
            self.format.to_possible_value().expect("named").get_name(),
            self.scan.im_max,
            self.scan.n_re,
            self.scan.n_im,
        );
        if let Some(ell) = &self.ell {
            s += &format!(" ell={}", list(ell));
        }
        if self.command == CommandKind::Oracle {
            s += &format!(" n_traj={} traj_time={}", self.n_traj, self.traj_time);
        }
        s
    }
}
