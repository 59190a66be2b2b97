use crate::config::ExperimentConfig;
use crate::runner::{frequencies, Prepared};
use crate::{io_at, CliError};
use neseek::averaging::{
    amplitude_sweep, estimator_residual, eta_rollout, filter_residual, fit_sigma, EtaRow, Envelope,
    FilterResidual, ResidualCurve, SystemPair,
};
use neseek::OscillatorBank;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Frozen slow states used for the `σ̂` fit: points on the segment from `x*` to `x0`.
const SIGMA_STATES: usize = 4;
/// Oscillator phase offsets per frozen state.
const SIGMA_PHASES: usize = 4;
const SIGMA_HORIZON: usize = 2000;
/// Slow-time horizon `ε·steps` of each `η` rollout, capped at `MAX_ETA_STEPS` jumps.
const ETA_SLOW_TIME: f64 = 20.0;
const MAX_ETA_STEPS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct AvgReport {
    pub estimator: ResidualCurve,
    /// `(ā, residual)` at the largest `N`.
    pub amplitudes: Vec<(f64, f64)>,
    pub filter: FilterResidual,
    pub eta: Result<Vec<EtaRow>, String>,
}

impl AvgReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("[estimator]\n");
        s.push_str(&self.estimator.summary());
        s.push_str("\n[amplitude]\n");
        for (a, r) in &self.amplitudes {
            let _ = writeln!(s, "a = {a:.6e}  residual = {r:.6e}");
        }
        s.push_str("\n[filter]\n");
        let _ = writeln!(s, "worst_excess = {:.6e}", self.filter.worst_excess());
        s.push_str("\n[eta]\n");
        match &self.eta {
            Ok(rows) => {
                for r in rows {
                    let _ = writeln!(
                        s,
                        "eps = {:.4e}  sup_eta = {:.6e}  bound = {:.6e}  window = {}",
                        r.eps, r.sup_eta, r.bound, r.window
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(s, "skipped: {e}");
            }
        }
        s
    }
}

/// Averaging study at a frozen point: estimator and filter residuals, the amplitude
/// sweep and the `η` table for the configured game and dither.
pub fn run_study(cfg: &ExperimentConfig) -> Result<AvgReport, CliError> {
    let prep = Prepared::new(cfg)?;
    let game = &prep.game;
    let spec = cfg.avg();
    let a = &cfg.algorithm;
    let m = game.dim();
    let x = spec.x_fixed.clone().unwrap_or_else(|| prep.x_star.clone());
    if x.len() != m {
        return Err(CliError::Config(format!("avg.x_fixed has {} entries, game has {m}", x.len())));
    }
    let freqs = frequencies(cfg, &prep)?;
    let amps = a.amplitudes.per_agent(game.agent_count())?;
    let bank = OscillatorBank::for_game(game, freqs.clone(), &amps)?;

    let estimator = estimator_residual(game, &x, &bank, &spec.n_list, Envelope::Dyadic)?;
    let n_last = *spec.n_list.last().expect("checked by the residual");
    let phases = vec![0.0; m];
    let amplitudes = amplitude_sweep(game, &x, &freqs, &phases, &spec.amplitude_sweep, n_last)?;

    let alpha = a.alpha.unwrap_or(0.1).min(1.0);
    let gamma = a.gamma.unwrap_or(1.0);
    let filter = filter_residual(game, &x, &vec![0.0; m], alpha, gamma, &spec.n_list)?;

    let coord_amps = bank.amps().to_vec();
    let pair = SystemPair::zeroth_order(game, freqs, coord_amps, spec.eps_list[0])?;
    let eta = eta_table(cfg, &prep, &pair, &spec.eps_list);
    Ok(AvgReport {
        estimator,
        amplitudes,
        filter,
        eta,
    })
}

fn eta_table(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    pair: &SystemPair<f64>,
    eps_list: &[f64],
) -> Result<Vec<EtaRow>, String> {
    let m = prep.game.dim();
    let x0 = cfg.run.x0.clone().unwrap_or_else(|| vec![0.0; m]);
    let mut samples = Vec::new();
    for s in 0..SIGMA_STATES {
        let w = s as f64 / (SIGMA_STATES - 1) as f64;
        let u: Vec<f64> = prep.x_star.iter().zip(&x0).map(|(a, b)| a + w * (b - a)).collect();
        for p in 0..SIGMA_PHASES {
            let phi = std::f64::consts::TAU * p as f64 / SIGMA_PHASES as f64;
            let mu: Vec<f64> = (0..m).flat_map(|j| {
                let t = phi * (j + 1) as f64;
                [t.sin(), t.cos()]
            }).collect();
            samples.push((u.clone(), mu));
        }
    }
    let sigma = fit_sigma(pair, &samples, SIGMA_HORIZON).map_err(|e| e.to_string())?;
    let mu0: Vec<f64> = (0..m).flat_map(|_| [0.0, 1.0]).collect();
    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let steps = ((ETA_SLOW_TIME / eps_min).ceil() as usize).min(MAX_ETA_STEPS);
    eta_rollout(pair, &prep.x_star, &mu0, steps, eps_list, &sigma)
        .map_err(|e| format!("{e}; the slow state diverged, reduce avg.eps_list"))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

/// Writes `estimator.csv`, `amplitude.csv`, `filter.csv`, `eta.csv` and `summary.txt`.
pub fn write_report(report: &AvgReport, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_at(dir))?;
    report.estimator.write_csv(create(&dir.join("estimator.csv"))?)?;

    let mut w = csv::Writer::from_writer(create(&dir.join("amplitude.csv"))?);
    w.write_record(["a", "residual"])?;
    for (a, r) in &report.amplitudes {
        w.write_record([format!("{a:.16e}"), format!("{r:.16e}")])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(&dir.join("filter.csv"))?);
    w.write_record(["N", "residual", "bound"])?;
    for ((n, r), b) in report.filter.curve.points.iter().zip(&report.filter.bounds) {
        w.write_record([n.to_string(), format!("{r:.16e}"), format!("{b:.16e}")])?;
    }
    w.flush()?;

    if let Ok(rows) = &report.eta {
        let mut w = csv::Writer::from_writer(create(&dir.join("eta.csv"))?);
        w.write_record(["eps", "sup_eta", "bound", "window"])?;
        for r in rows {
            w.write_record([
                format!("{:.16e}", r.eps),
                format!("{:.16e}", r.sup_eta),
                format!("{:.16e}", r.bound),
                r.window.to_string(),
            ])?;
        }
        w.flush()?;
    }

    let path = dir.join("summary.txt");
    let mut f = create(&path)?;
    f.write_all(report.render().as_bytes()).map_err(io_at(&path))?;
    f.flush().map_err(io_at(&path))?;
    Ok(())
}
