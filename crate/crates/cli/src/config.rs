use crate::CliError;
use neseek::{ConstraintSet64, Game64, Matrix64, TimerSchedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Fb,
    ZoSync,
    AsyncFi,
    AsyncZo,
}

impl Algorithm {
    pub fn is_async(self) -> bool {
        matches!(self, Algorithm::AsyncFi | Algorithm::AsyncZo)
    }

    pub fn is_zeroth_order(self) -> bool {
        matches!(self, Algorithm::ZoSync | Algorithm::AsyncZo)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Fb => "fb",
            Algorithm::ZoSync => "zo-sync",
            Algorithm::AsyncFi => "async-fi",
            Algorithm::AsyncZo => "async-zo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    WholeSpace,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl SetSpec {
    fn build(&self) -> neseek::Result<ConstraintSet64> {
        match self {
            SetSpec::WholeSpace => Ok(ConstraintSet64::WholeSpace),
            SetSpec::Box { lo, hi } => ConstraintSet64::new_box(lo.clone(), hi.clone()),
            SetSpec::Ball { center, radius } => ConstraintSet64::new_ball(center.clone(), *radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSpec {
    /// `J_i = ‖x_i − s_i‖² + c Σ_{j≠i} ‖x_i − x_j‖²`.
    Connectivity {
        sources: Vec<Vec<f64>>,
        coupling: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constraints: Option<Vec<SetSpec>>,
    },
    /// `F(x) = Qx + q`.
    Quadratic {
        dims: Vec<usize>,
        q: Vec<Vec<f64>>,
        offset: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constraints: Option<Vec<SetSpec>>,
    },
}

impl GameSpec {
    pub fn build(&self) -> Result<Game64, CliError> {
        let (game, sets) = match self {
            GameSpec::Connectivity {
                sources,
                coupling,
                constraints,
            } => (Game64::connectivity(sources.clone(), *coupling)?, constraints),
            GameSpec::Quadratic {
                dims,
                q,
                offset,
                constraints,
            } => (
                Game64::quadratic(dims.clone(), Matrix64::from_rows(q)?, offset.clone())?,
                constraints,
            ),
        };
        match sets {
            None => Ok(game),
            Some(sets) => {
                let sets = sets.iter().map(SetSpec::build).collect::<neseek::Result<_>>()?;
                Ok(game.with_constraints(sets)?)
            }
        }
    }

    pub fn sources(&self) -> Option<&[Vec<f64>]> {
        match self {
            GameSpec::Connectivity { sources, .. } => Some(sources),
            GameSpec::Quadratic { .. } => None,
        }
    }
}

/// One amplitude for every agent, or one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitudes {
    Common(f64),
    PerAgent(Vec<f64>),
}

impl Amplitudes {
    pub fn per_agent(&self, agents: usize) -> Result<Vec<f64>, CliError> {
        match self {
            Amplitudes::Common(a) => Ok(vec![*a; agents]),
            Amplitudes::PerAgent(v) if v.len() == agents => Ok(v.clone()),
            Amplitudes::PerAgent(v) => Err(CliError::Config(format!(
                "{} amplitudes given for {agents} agents",
                v.len()
            ))),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Amplitudes::Common(a) => *a,
            Amplitudes::PerAgent(v) => v.iter().sum::<f64>() / v.len().max(1) as f64,
        }
    }
}

impl Default for Amplitudes {
    fn default() -> Self {
        Amplitudes::Common(0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub kind: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub amplitudes: Amplitudes,
    /// Explicit per-coordinate frequencies; generated from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    /// Overrides `run.seed` for frequency generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_seed: Option<u64>,
    #[serde(default = "default_freq_tol")]
    pub frequency_tol: f64,
    /// Smallest allowed distance of any per-jump frequency to `2πZ`.
    #[serde(default)]
    pub alias_margin: f64,
}

fn default_freq_tol() -> f64 {
    neseek::sync::FREQ_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Sampling periods in seconds.
    pub periods: Vec<f64>,
    /// Initial timer values in seconds, each in `[0, T_i)`.
    pub tau0: Vec<f64>,
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<TimerSchedule, CliError> {
        Ok(TimerSchedule::build(&self.periods, &self.tau0)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Number of jumps.
    pub horizon: u64,
    /// Jumps between logged rows; defaults to `r` for asynchronous runs and 1 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Radius of the ball excluded from Lyapunov checks; defaults to `10·ā`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Grids for the `avg` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvgSpec {
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_amp_sweep")]
    pub amplitude_sweep: Vec<f64>,
    /// Frozen point for the estimator study; `x*` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_fixed: Option<Vec<f64>>,
}

fn default_n_list() -> Vec<usize> {
    vec![100, 1000, 10_000]
}

fn default_eps_list() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

fn default_amp_sweep() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

impl Default for AvgSpec {
    fn default() -> Self {
        Self {
            n_list: default_n_list(),
            eps_list: default_eps_list(),
            amplitude_sweep: default_amp_sweep(),
            x_fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg: Option<AvgSpec>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub horizon: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(out) = &o.out {
            self.run.out = out.clone();
        }
        if let Some(h) = o.horizon {
            self.run.horizon = h;
        }
        self.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization with `run.out` cleared, hex encoded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.out = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        let a = &self.algorithm;
        let positive = |v: Option<f64>| v.is_none_or(|x| x > 0.0 && x.is_finite());
        if !positive(a.alpha) || !positive(a.beta) || !positive(a.gamma) || !positive(a.lambda) {
            return bad("tunings must be positive");
        }
        if self.run.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        if self.run.cadence == Some(0) {
            return bad("cadence must be at least 1");
        }
        if !(a.alias_margin >= 0.0 && a.frequency_tol >= 0.0) {
            return bad("frequency tolerances must be nonnegative");
        }
        match a.kind {
            Algorithm::Fb => {
                if a.gamma.is_none() {
                    return bad("fb needs algorithm.gamma");
                }
            }
            Algorithm::ZoSync => {
                if a.alpha.is_none() || a.beta.is_none() || a.gamma.is_none() {
                    return bad("zo-sync needs algorithm.alpha, beta and gamma");
                }
            }
            Algorithm::AsyncFi => {
                if a.alpha.is_none() {
                    return bad("async-fi needs algorithm.alpha");
                }
            }
            Algorithm::AsyncZo => {
                if a.alpha.is_none() || a.beta.is_none() {
                    return bad("async-zo needs algorithm.alpha and beta");
                }
            }
        }
        if let Some(avg) = &self.avg {
            if avg.n_list.is_empty() || avg.eps_list.is_empty() || avg.amplitude_sweep.is_empty() {
                return bad("avg grids must be nonempty");
            }
            if avg.eps_list.iter().chain(&avg.amplitude_sweep).any(|&v| !(v > 0.0)) {
                return bad("avg.eps_list and avg.amplitude_sweep must be positive");
            }
        }
        if a.kind.is_async() && self.schedule.is_none() {
            return bad("asynchronous algorithms need a [schedule] section");
        }
        if a.kind.is_zeroth_order() {
            let amps = match &a.amplitudes {
                Amplitudes::Common(v) => vec![*v],
                Amplitudes::PerAgent(v) => v.clone(),
            };
            if amps.iter().any(|&v| !(v > 0.0)) {
                return bad("amplitudes must be positive");
            }
        }
        Ok(())
    }

    /// Radius for Lyapunov checks, `10·ā` unless configured.
    pub fn rho(&self) -> f64 {
        self.run.rho.unwrap_or(10.0 * self.algorithm.amplitudes.mean())
    }

    pub fn avg(&self) -> AvgSpec {
        self.avg.clone().unwrap_or_default()
    }
}
