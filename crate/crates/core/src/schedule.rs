//! Periodic sampling timers.
//!
//! Agent `i` samples every `T_i` seconds. Its timer starts at the normalized phase
//! `τ̂_i = τ_i(0) / T_i ∈ [0, 1)`, so its `n`-th jump (`n ≥ 1`) happens at
//! `(n − τ̂_i) T_i`. When the periods are commensurate, `T_1 : … : T_N = p_1 : … : p_N`,
//! the merged jump sequence repeats every `T = r_i T_i` seconds, `r_i = lcm(p) / p_i`,
//! and one such epoch holds `r = Σ r_i` jumps.
//!
//! Times are bookkeeping and kept in `f64` regardless of the scalar the dynamics use.

use std::io::{self, Write};

use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};

/// Largest denominator accepted by the rational fit of a period ratio.
pub const MAX_DENOMINATOR: i64 = 10_000;
/// Relative tolerance of the rational fit.
pub const RATIO_TOL: f64 = 1e-9;

/// Best continued-fraction approximation of `x > 0` with denominator at most `cap`
/// whose relative error is at most `tol`.
fn rational_fit(x: f64, tol: f64, cap: i64) -> Option<Ratio<i64>> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a > i64::MAX as f64 / 4.0 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > cap {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= tol * x {
            return Some(Ratio::new(h1, k1));
        }
        let frac = rest - a as f64;
        if frac <= 0.0 {
            return None;
        }
        rest = 1.0 / frac;
    }
    None
}

/// Smallest natural numbers `p_i` with `T_i / T_j = p_i / p_j`, `gcd(p) = 1`.
pub fn ratio_to_integers(periods: &[f64], tol: f64) -> Result<Vec<u64>> {
    if periods.is_empty() {
        return Err(Error::InvalidArgument("no sampling periods".into()));
    }
    if periods.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("sampling periods must be positive".into()));
    }
    let base = periods.iter().copied().fold(f64::INFINITY, f64::min);
    let mut fits = Vec::with_capacity(periods.len());
    for (agent, &t) in periods.iter().enumerate() {
        let ratio = t / base;
        let fit = rational_fit(ratio, tol, MAX_DENOMINATOR)
            .ok_or(Error::IrrationalPeriods { agent, ratio })?;
        fits.push(fit);
    }
    let den = fits.iter().fold(1i64, |acc, f| acc.lcm(f.denom()));
    let mut p: Vec<u64> = fits
        .iter()
        .map(|f| (f * Ratio::from_integer(den)).to_integer() as u64)
        .collect();
    let g = p.iter().fold(0u64, |acc, &v| acc.gcd(&v));
    for v in &mut p {
        *v /= g;
    }
    Ok(p)
}

/// One jump of the merged sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Agent that samples at this jump.
    pub agent: usize,
    /// Time since the start of the epoch, in `(0, T]`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimerSchedule {
    periods: Vec<f64>,
    ratios: Vec<u64>,
    lcm_p: u64,
    r_i: Vec<usize>,
    r: usize,
    tau_hat: Vec<f64>,
    epoch: f64,
    events: Vec<Event>,
}

/// Diagonal selection masks at one jump, stored as their diagonals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMasks {
    /// Decision coordinates, length `m`.
    pub x: Vec<bool>,
    /// Timers, length `N`.
    pub tau: Vec<bool>,
    /// Oscillator slots, length `2m`.
    pub mu: Vec<bool>,
}

/// Jump times of every agent's first `count(i)` jumps, merged and sorted.
fn merged_jumps(
    periods: &[f64],
    tau_hat: &[f64],
    count: impl Fn(usize) -> usize,
) -> Vec<(f64, usize)> {
    let mut jumps: Vec<(f64, usize)> = periods
        .iter()
        .zip(tau_hat)
        .enumerate()
        .flat_map(|(i, (&t, &tau))| (1..=count(i)).map(move |n| ((n as f64 - tau) * t, i)))
        .collect();
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    jumps
}

impl TimerSchedule {
    /// Builds the schedule from periods (seconds) and initial timer values `τ_i(0) ∈ [0, T_i)`
    /// (seconds). Rejects initial values that make two agents jump at the same instant.
    pub fn build(periods: &[f64], tau0: &[f64]) -> Result<Self> {
        if tau0.len() != periods.len() {
            return Err(Error::DimensionMismatch {
                expected: periods.len(),
                got: tau0.len(),
            });
        }
        let ratios = ratio_to_integers(periods, RATIO_TOL)?;
        for (i, (&tau, &t)) in tau0.iter().zip(periods).enumerate() {
            if !(0.0..t).contains(&tau) {
                return Err(Error::InvalidArgument(format!(
                    "initial timer {tau} of agent {i} is outside [0, {t})"
                )));
            }
        }
        let tau_hat: Vec<f64> = tau0.iter().zip(periods).map(|(&a, &t)| a / t).collect();
        let lcm_p = ratios.iter().fold(1u64, |acc, &v| acc.lcm(&v));
        let r_i: Vec<usize> = ratios.iter().map(|&p| (lcm_p / p) as usize).collect();
        let r = r_i.iter().sum();
        let epoch = periods
            .iter()
            .zip(&r_i)
            .map(|(&t, &ri)| t * ri as f64)
            .sum::<f64>()
            / periods.len() as f64;
        let jumps = merged_jumps(periods, &tau_hat, |i| r_i[i]);
        let same_instant = 1e-9 * periods.iter().copied().fold(f64::INFINITY, f64::min);
        for w in jumps.windows(2) {
            if w[1].0 - w[0].0 <= same_instant {
                return Err(Error::SimultaneousJump {
                    first: w[0].1,
                    second: w[1].1,
                    time: w[0].0,
                });
            }
        }
        // wrap-around: the last jump of one epoch against the first of the next
        if let (Some(first), Some(last)) = (jumps.first(), jumps.last()) {
            if jumps.len() > 1 && first.0 + epoch - last.0 <= same_instant {
                return Err(Error::SimultaneousJump {
                    first: last.1,
                    second: first.1,
                    time: last.0,
                });
            }
        }
        let events = jumps
            .into_iter()
            .map(|(offset, agent)| Event { agent, offset })
            .collect();
        let schedule = Self {
            periods: periods.to_vec(),
            ratios,
            lcm_p,
            r_i,
            r,
            tau_hat,
            epoch,
            events,
        };
        schedule.verify_window_counts()?;
        Ok(schedule)
    }

    /// Checks, from the raw arithmetic progressions, that every window `[t, t + T)` that
    /// starts at a jump holds exactly `r` jumps, `r_i` of them by agent `i`.
    pub fn verify_window_counts(&self) -> Result<()> {
        let jumps = merged_jumps(&self.periods, &self.tau_hat, |i| 3 * self.r_i[i]);
        let slack = 1e-9 * self.epoch;
        for start in 0..self.r {
            let t0 = jumps[start].0;
            let mut per_agent = vec![0usize; self.agent_count()];
            for &(t, i) in jumps.iter().skip(start) {
                if t >= t0 + self.epoch - slack {
                    break;
                }
                per_agent[i] += 1;
            }
            if per_agent != self.r_i {
                return Err(Error::InvalidArgument(format!(
                    "window starting at t = {t0} holds {per_agent:?} jumps, expected {:?}",
                    self.r_i
                )));
            }
        }
        Ok(())
    }

    pub fn agent_count(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// `p_i`.
    pub fn ratios(&self) -> &[u64] {
        &self.ratios
    }

    /// `p = lcm(p_i)`.
    pub fn lcm_p(&self) -> u64 {
        self.lcm_p
    }

    /// Jumps per epoch of each agent.
    pub fn r_i(&self) -> &[usize] {
        &self.r_i
    }

    /// Jumps per epoch.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn r_min(&self) -> usize {
        self.r_i.iter().copied().min().unwrap_or(0)
    }

    pub fn r_max(&self) -> usize {
        self.r_i.iter().copied().max().unwrap_or(0)
    }

    /// Normalized initial timer phases `τ̂_i ∈ [0, 1)`.
    pub fn tau_hat(&self) -> &[f64] {
        &self.tau_hat
    }

    /// Epoch length `T` in seconds.
    pub fn epoch_period(&self) -> f64 {
        self.epoch
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Agent jumping at global jump `k` (zero-based).
    pub fn agent_at(&self, k: u64) -> usize {
        self.events[(k % self.r as u64) as usize].agent
    }

    /// Physical time of global jump `k`.
    pub fn time_of(&self, k: u64) -> f64 {
        let r = self.r as u64;
        (k / r) as f64 * self.epoch + self.events[(k % r) as usize].offset
    }

    /// Masks for jump `k` of a game whose agents own `dims[i]` coordinates.
    pub fn selection_at(&self, k: u64, dims: &[usize]) -> SelectionMasks {
        let agent = self.agent_at(k);
        let tau: Vec<bool> = (0..self.agent_count()).map(|i| i == agent).collect();
        let x: Vec<bool> = dims
            .iter()
            .enumerate()
            .flat_map(|(i, &d)| std::iter::repeat_n(i == agent, d))
            .collect();
        let mu = x.iter().flat_map(|&b| [b, b]).collect();
        SelectionMasks { x, tau, mu }
    }

    /// Number of jumps agent `j` has made when agent `i` makes its `v`-th jump, from the
    /// closed form `⌊Δ + (p_i / p_j) v⌋` with `Δ = τ̂_j − τ̂_i p_i / p_j`.
    pub fn cross_agent_counter(&self, v: u64, i: usize, j: usize) -> u64 {
        if i == j {
            return v;
        }
        let ratio = self.ratios[i] as f64 / self.ratios[j] as f64;
        let delta = self.tau_hat[j] - self.tau_hat[i] * ratio;
        (delta + ratio * v as f64).floor().max(0.0) as u64
    }

    /// Writes `epochs · r` rows of `k,t,agent_mask` where the mask has one `0`/`1` digit
    /// per agent.
    pub fn write_csv<W: Write>(&self, mut out: W, epochs: usize) -> io::Result<()> {
        writeln!(out, "k,t,agent_mask")?;
        for k in 0..(epochs * self.r) as u64 {
            let agent = self.agent_at(k);
            let mask: String = (0..self.agent_count())
                .map(|i| if i == agent { '1' } else { '0' })
                .collect();
            writeln!(out, "{k},{:.16e},{mask}", self.time_of(k))?;
        }
        Ok(())
    }
}

/// Free-function form of [`TimerSchedule::build`].
pub fn build_schedule(periods: &[f64], tau0: &[f64]) -> Result<TimerSchedule> {
    TimerSchedule::build(periods, tau0)
}
