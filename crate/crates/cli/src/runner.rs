use crate::config::{Algorithm, ExperimentConfig};
use crate::log::{format_vec, TrajectoryLog};
use crate::CliError;
use neseek::async_seek::{async_fi_step, async_zo_step_in_place, coordinate_weights, gamma_inv_norm_sq};
use neseek::linalg::{dist, sub};
use neseek::sync::{
    fb_step, generate_frequencies_with_margin, validate_weighted_frequencies,
    zo_sync_step_in_place, FrequencyViolation,
};
use neseek::{AsyncState, Game64, GradientSource, OscillatorBank, SyncState, SyncZoParams, TimerSchedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

/// Distance to `x*` at which a run is declared divergent.
pub const DIVERGENCE_RADIUS: f64 = 1e6;

/// Everything derived from a config before stepping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub game: Game64,
    pub x_star: Vec<f64>,
    pub schedule: Option<TimerSchedule>,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let game = cfg.game.build()?;
        let x_star = game.solve_ne_oracle(1e-13)?;
        let schedule = match &cfg.schedule {
            Some(s) => {
                let s = s.build()?;
                if s.agent_count() != game.agent_count() {
                    return Err(CliError::Config(format!(
                        "schedule has {} agents, game has {}",
                        s.agent_count(),
                        game.agent_count()
                    )));
                }
                Some(s)
            }
            None => None,
        };
        let mut warnings = Vec::new();
        let kind = cfg.algorithm.kind;
        if kind.is_async() && cfg.algorithm.gamma.is_some() {
            warnings.push(format!(
                "algorithm.gamma is ignored by {kind}: the asynchronous update has no projection"
            ));
        }
        if kind.is_async() && !game.is_unconstrained() {
            warnings.push(format!("constraints are ignored by {kind}"));
        }
        if kind == Algorithm::AsyncFi {
            if let Some(s) = &schedule {
                if let Ok(b) = neseek::async_seek::max_stepsize(game.mu_f(), game.lip_l(), s) {
                    let alpha = cfg.algorithm.alpha.unwrap_or(0.0);
                    if alpha >= b.alpha {
                        warnings.push(format!(
                            "alpha = {alpha} is not below the certified bound {:.6e}",
                            b.alpha
                        ));
                    }
                }
            }
        }
        Ok(Self {
            game,
            x_star,
            schedule,
            warnings,
        })
    }

    /// Per-coordinate resonance weights: `r_i` for asynchronous runs, one otherwise.
    pub fn weights(&self, cfg: &ExperimentConfig) -> Vec<usize> {
        match (&self.schedule, cfg.algorithm.kind.is_async()) {
            (Some(s), true) => coordinate_weights(&self.game, s),
            _ => vec![1; self.game.dim()],
        }
    }
}

/// Violations of the resonance conditions, plus an aliasing-margin breach as a
/// `Single` entry.
pub fn frequency_violations(freqs: &[f64], weights: &[usize], tol: f64, margin: f64) -> Vec<FrequencyViolation> {
    let mut v = validate_weighted_frequencies(freqs, weights, tol);
    if margin > 0.0 {
        for (j, &w) in freqs.iter().enumerate() {
            let d = neseek::Scalar::dist_to_two_pi_lattice(w);
            if d < margin {
                v.push(FrequencyViolation {
                    first: j,
                    second: j,
                    combination: neseek::sync::Combination::Single,
                    value: w,
                    distance: d,
                });
            }
        }
    }
    v
}

pub fn describe(v: &FrequencyViolation) -> String {
    format!(
        "coordinates ({}, {}) {:?}: value {:.12} at distance {:.3e} from 2πZ",
        v.first, v.second, v.combination, v.value, v.distance
    )
}

/// Configured or generated dither frequencies, checked against the resonance conditions.
pub fn frequencies(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<f64>, CliError> {
    let a = &cfg.algorithm;
    let weights = prep.weights(cfg);
    match &a.frequencies {
        Some(f) => {
            if f.len() != prep.game.dim() {
                return Err(CliError::Config(format!(
                    "{} frequencies given for {} coordinates",
                    f.len(),
                    prep.game.dim()
                )));
            }
            let v = frequency_violations(f, &weights, a.frequency_tol, a.alias_margin);
            if let Some(first) = v.first() {
                return Err(CliError::Resonant(describe(first)));
            }
            Ok(f.clone())
        }
        None => {
            let seed = a.frequency_seed.unwrap_or(cfg.run.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(generate_frequencies_with_margin(&weights, a.frequency_tol, a.alias_margin, &mut rng)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub jumps: u64,
    pub final_dist: f64,
    /// Largest distance to `x*` over the final 10% of jumps.
    pub tail_max_dist: f64,
    /// Radius outside of which logged `V` should not rise.
    pub rho: f64,
    /// Consecutive logged rows starting outside `rho`, and how many of them had `V` rise.
    pub v_checked: usize,
    pub v_increases: usize,
    pub wall: Duration,
}

impl RunSummary {
    pub fn render(&self) -> String {
        format!(
            "algorithm = {}\njumps = {}\nfinal_dist = {:.6e}\ntail_max_dist = {:.6e}\nrho = {:.6e}\nv_increases = {} / {}\nwall_time_s = {:.3}\n",
            self.algorithm,
            self.jumps,
            self.final_dist,
            self.tail_max_dist,
            self.rho,
            self.v_increases,
            self.v_checked,
            self.wall.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub summary: RunSummary,
    pub warnings: Vec<String>,
}

/// Stepping state shared by the four algorithms.
enum Stepper {
    Fb { x: Vec<f64>, lambda: f64, gamma: f64 },
    ZoSync { state: SyncState<f64>, params: SyncZoParams<f64> },
    AsyncFi { x: Vec<f64>, alpha: f64 },
    AsyncZo { state: AsyncState<f64>, params: SyncZoParams<f64> },
}

impl Stepper {
    fn x(&self) -> &[f64] {
        match self {
            Stepper::Fb { x, .. } | Stepper::AsyncFi { x, .. } => x,
            Stepper::ZoSync { state, .. } => &state.x,
            Stepper::AsyncZo { state, .. } => &state.x,
        }
    }

    /// Filter state for zeroth-order runs, `F(x)` otherwise.
    fn xi(&self, game: &Game64) -> Vec<f64> {
        match self {
            Stepper::Fb { x, .. } | Stepper::AsyncFi { x, .. } => game.pseudogradient_unchecked(x),
            Stepper::ZoSync { state, .. } => state.xi.clone(),
            Stepper::AsyncZo { state, .. } => state.xi.clone(),
        }
    }

    fn step(&mut self, game: &Game64, schedule: Option<&TimerSchedule>, k: u64) -> neseek::Result<()> {
        match self {
            Stepper::Fb { x, lambda, gamma } => *x = fb_step(game, x, *lambda, *gamma)?,
            Stepper::ZoSync { state, params } => {
                zo_sync_step_in_place(game, state, params, GradientSource::Dither)?
            }
            Stepper::AsyncFi { x, alpha } => {
                *x = async_fi_step(game, x, schedule.expect("validated"), k, *alpha)?
            }
            Stepper::AsyncZo { state, params } => async_zo_step_in_place(
                game,
                state,
                schedule.expect("validated"),
                params,
                GradientSource::Dither,
            )?,
        }
        Ok(())
    }
}

/// Runs the configured experiment and returns its log. Deterministic for a given config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let prep = Prepared::new(cfg)?;
    let game = &prep.game;
    let m = game.dim();
    let a = &cfg.algorithm;
    let x0 = match &cfg.run.x0 {
        Some(x) if x.len() != m => {
            return Err(CliError::Config(format!("x0 has {} entries, game has {m}", x.len())))
        }
        Some(x) => x.clone(),
        None => game.project(&vec![0.0; m]),
    };
    let schedule = if a.kind.is_async() { prep.schedule.as_ref() } else { None };

    let mut meta = vec![
        ("config_sha256".to_string(), cfg.hash()),
        ("algorithm".to_string(), a.kind.to_string()),
        ("dims".to_string(), format!("{:?}", game.dims())),
        ("x_star".to_string(), format_vec(&prep.x_star)),
        ("seed".to_string(), cfg.run.seed.to_string()),
    ];
    if let Some(src) = cfg.game.sources() {
        let flat: Vec<f64> = src.iter().flatten().copied().collect();
        meta.push(("sources".to_string(), format_vec(&flat)));
    }

    let mut stepper = match a.kind {
        Algorithm::Fb => Stepper::Fb {
            x: x0,
            lambda: a.lambda.unwrap_or(1.0),
            gamma: a.gamma.expect("validated"),
        },
        Algorithm::AsyncFi => Stepper::AsyncFi {
            x: x0,
            alpha: a.alpha.expect("validated"),
        },
        Algorithm::ZoSync | Algorithm::AsyncZo => {
            let freqs = frequencies(cfg, &prep)?;
            let amps = a.amplitudes.per_agent(game.agent_count())?;
            meta.push(("frequencies".to_string(), format_vec(&freqs)));
            meta.push(("amplitudes".to_string(), format_vec(&amps)));
            let bank = OscillatorBank::for_game(game, freqs, &amps)?;
            // async steppers never read gamma
            let gamma = a.gamma.unwrap_or(1.0);
            let params = SyncZoParams::new(a.alpha.expect("validated"), a.beta.expect("validated"), gamma)?;
            if a.kind == Algorithm::ZoSync {
                Stepper::ZoSync {
                    state: SyncState::new(x0, bank)?,
                    params,
                }
            } else {
                Stepper::AsyncZo {
                    state: AsyncState::new(x0, bank, game.agent_count())?,
                    params,
                }
            }
        }
    };

    let weights: Vec<f64> = match schedule {
        Some(s) => {
            meta.push(("r".to_string(), s.r().to_string()));
            coordinate_weights(game, s).into_iter().map(|r| r as f64).collect()
        }
        None => vec![1.0; m],
    };
    let cadence = cfg
        .run
        .cadence
        .unwrap_or_else(|| schedule.map_or(1, |s| s.r() as u64));
    meta.push(("cadence".to_string(), cadence.to_string()));

    let mut log = TrajectoryLog::new(meta, m);
    let horizon = cfg.run.horizon;
    let tail_start = horizon - horizon / 10;
    let mut tail_max: f64 = 0.0;
    let push_row = |log: &mut TrajectoryLog, k: u64, st: &Stepper| {
        let x = st.x();
        let t = match schedule {
            Some(s) if k > 0 => s.time_of(k - 1),
            Some(_) => 0.0,
            None => k as f64,
        };
        let mut row = Vec::with_capacity(2 * m + 4);
        row.push(k as f64);
        row.push(t);
        row.extend_from_slice(x);
        row.extend(st.xi(game));
        row.push(dist(x, &prep.x_star));
        row.push(gamma_inv_norm_sq(&sub(x, &prep.x_star), &weights));
        log.rows.push(row);
    };
    push_row(&mut log, 0, &stepper);
    for k in 0..horizon {
        stepper.step(game, schedule, k)?;
        let done = k + 1;
        let d = dist(stepper.x(), &prep.x_star);
        if !(d <= DIVERGENCE_RADIUS) {
            return Err(CliError::Diverged { jump: done, dist: d });
        }
        if done > tail_start {
            tail_max = tail_max.max(d);
        }
        if done % cadence == 0 {
            push_row(&mut log, done, &stepper);
        }
    }
    let rho = cfg.rho();
    let (dcol, vcol) = (2 * m + 2, 2 * m + 3);
    let outside: Vec<&[Vec<f64>]> = log.rows.windows(2).filter(|w| w[0][dcol] > rho).collect();
    let v_increases = outside.iter().filter(|w| w[1][vcol] > w[0][vcol]).count();
    let summary = RunSummary {
        algorithm: a.kind,
        jumps: horizon,
        final_dist: dist(stepper.x(), &prep.x_star),
        tail_max_dist: tail_max,
        rho,
        v_checked: outside.len(),
        v_increases,
        wall: start.elapsed(),
    };
    Ok(RunOutput {
        log,
        summary,
        warnings: prep.warnings,
    })
}
