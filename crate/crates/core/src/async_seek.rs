//! Asynchronous seeking: only the agent whose timer fires updates its block.
//!
//! Everything runs in event-indexed time. The global jump counter `k` is the loop
//! variable and the physical time `t` of the last jump is derived from the schedule.

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg;
use crate::scalar::Scalar;
use crate::schedule::TimerSchedule;
use crate::sync::{
    estimate_agents, validate_weighted_frequencies, FrequencyViolation, GradientSource,
    OscillatorBank, SyncZoParams,
};

/// State of the asynchronous algorithms. `xi` and `bank` are only advanced by the
/// zeroth-order stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncState<S> {
    pub x: Vec<S>,
    pub xi: Vec<S>,
    pub bank: OscillatorBank<S>,
    /// Private jump counters `κ_i`.
    pub kappa: Vec<u64>,
    /// Global jump counter.
    pub k: u64,
    /// Time of the last jump (zero before the first).
    pub t: f64,
}

impl<S: Scalar> AsyncState<S> {
    /// Initial state with `ξ = 0` and zeroed counters.
    pub fn new(x: Vec<S>, bank: OscillatorBank<S>, agents: usize) -> Result<Self> {
        if x.len() != bank.len() {
            return Err(Error::DimensionMismatch {
                expected: bank.len(),
                got: x.len(),
            });
        }
        Ok(Self {
            xi: vec![S::zero(); x.len()],
            x,
            bank,
            kappa: vec![0; agents],
            k: 0,
            t: 0.0,
        })
    }
}

fn check_schedule<S: Scalar>(game: &Game<S>, schedule: &TimerSchedule) -> Result<()> {
    if schedule.agent_count() != game.agent_count() {
        return Err(Error::DimensionMismatch {
            expected: game.agent_count(),
            got: schedule.agent_count(),
        });
    }
    Ok(())
}

/// `x(k + 1) = x(k) − α S_x(k) F(x(k))`: the agent jumping at `k` takes a partial
/// gradient step, every other coordinate is left untouched.
pub fn async_fi_step<S: Scalar>(
    game: &Game<S>,
    x: &[S],
    schedule: &TimerSchedule,
    k: u64,
    alpha: S,
) -> Result<Vec<S>> {
    check_schedule(game, schedule)?;
    let mut out = x.to_vec();
    masked_fi_step_in_place(game, &mut out, schedule.agent_at(k), alpha)?;
    Ok(out)
}

fn masked_fi_step_in_place<S: Scalar>(
    game: &Game<S>,
    x: &mut [S],
    agent: usize,
    alpha: S,
) -> Result<()> {
    if x.len() != game.dim() {
        return Err(Error::DimensionMismatch {
            expected: game.dim(),
            got: x.len(),
        });
    }
    let g = game.partial_gradient(agent, x);
    for (c, gi) in game.agent_range(agent).zip(g) {
        x[c] = x[c] - alpha * gi;
    }
    if !linalg::all_finite(x) {
        return Err(Error::NonFinite("asynchronous iterate"));
    }
    Ok(())
}

/// One zeroth-order jump for the agent scheduled at `state.k`:
/// `x_i ← x_i − αβ ξ_i`, `ξ_i ← ξ_i + α(2/a_i · J_i(x + ADμ) D_iμ_i − ξ_i)`, `μ_i ← R_i μ_i`.
/// Other agents' blocks are unchanged. `params.gamma` has no role here.
pub fn async_zo_step<S: Scalar>(
    game: &Game<S>,
    state: &AsyncState<S>,
    schedule: &TimerSchedule,
    params: &SyncZoParams<S>,
    source: GradientSource,
) -> Result<AsyncState<S>> {
    let mut next = state.clone();
    async_zo_step_in_place(game, &mut next, schedule, params, source)?;
    Ok(next)
}

pub fn async_zo_step_in_place<S: Scalar>(
    game: &Game<S>,
    state: &mut AsyncState<S>,
    schedule: &TimerSchedule,
    params: &SyncZoParams<S>,
    source: GradientSource,
) -> Result<()> {
    check_schedule(game, schedule)?;
    let agent = schedule.agent_at(state.k);
    let mut mask = vec![false; game.agent_count()];
    mask[agent] = true;
    let t = schedule.time_of(state.k);
    masked_zo_step_in_place(game, state, &mask, params, source)?;
    state.t = t;
    Ok(())
}

/// Zeroth-order jump for an arbitrary set of agents (`mask[i]` true when agent `i`
/// samples). An all-false mask only advances `k`; an all-true mask is the synchronous
/// step without projection and with `γ = 1`.
pub fn masked_zo_step_in_place<S: Scalar>(
    game: &Game<S>,
    state: &mut AsyncState<S>,
    mask: &[bool],
    params: &SyncZoParams<S>,
    source: GradientSource,
) -> Result<()> {
    if mask.len() != game.agent_count() || state.kappa.len() != game.agent_count() {
        return Err(Error::DimensionMismatch {
            expected: game.agent_count(),
            got: mask.len(),
        });
    }
    let active: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if !active.is_empty() {
        let mut sample = vec![S::zero(); game.dim()];
        match source {
            GradientSource::Dither => {
                if let Some(c) = active
                    .iter()
                    .flat_map(|&i| game.agent_range(i))
                    .find(|&c| state.bank.amps()[c] == S::zero())
                {
                    return Err(Error::ZeroAmplitude { coordinate: c });
                }
                let d = state.bank.dither();
                let probe: Vec<S> = state
                    .x
                    .iter()
                    .zip(state.bank.amps())
                    .zip(&d)
                    .map(|((&x, &a), &di)| x + a * di)
                    .collect();
                estimate_agents(game, &probe, &d, state.bank.amps(), active.iter().copied(), &mut sample)?;
            }
            GradientSource::Oracle => {
                for &i in &active {
                    let g = game.partial_gradient(i, &state.x);
                    for (c, gi) in game.agent_range(i).zip(g) {
                        sample[c] = gi;
                        state.xi[c] = gi;
                    }
                }
            }
        }
        let ab = params.alpha * params.beta;
        for &i in &active {
            for c in game.agent_range(i) {
                state.x[c] = state.x[c] - ab * state.xi[c];
                state.xi[c] = state.xi[c] + params.alpha * (sample[c] - state.xi[c]);
            }
            state.bank.rotate_range(game.agent_range(i));
            state.kappa[i] += 1;
        }
        if !linalg::all_finite(&state.x) || !linalg::all_finite(&state.xi) {
            return Err(Error::NonFinite("asynchronous zeroth-order state"));
        }
    }
    state.k += 1;
    Ok(())
}

/// Resonance check with each coordinate's frequency scaled by its agent's `r_i`.
pub fn validate_frequencies_async<S: Scalar>(
    game: &Game<S>,
    freqs: &[S],
    schedule: &TimerSchedule,
    tol: S,
) -> Vec<FrequencyViolation> {
    validate_weighted_frequencies(freqs, &coordinate_weights(game, schedule), tol)
}

/// `r_i` repeated over agent `i`'s coordinates.
pub fn coordinate_weights<S: Scalar>(game: &Game<S>, schedule: &TimerSchedule) -> Vec<usize> {
    game.dims()
        .iter()
        .zip(schedule.r_i())
        .flat_map(|(&d, &r)| std::iter::repeat_n(r, d))
        .collect()
}

/// Full update `T`, epoch map `E` and error `R = (T − E)/α` of the asynchronous
/// full-information iteration.
#[derive(Debug, Clone)]
pub struct EpochOperators<'a, S: Scalar> {
    game: &'a Game<S>,
    schedule: &'a TimerSchedule,
    alpha: S,
    weights: Vec<S>,
}

impl<'a, S: Scalar> EpochOperators<'a, S> {
    pub fn new(game: &'a Game<S>, schedule: &'a TimerSchedule, alpha: S) -> Result<Self> {
        check_schedule(game, schedule)?;
        if !game.is_unconstrained() {
            return Err(Error::InvalidArgument(
                "epoch operators are defined for unconstrained games".into(),
            ));
        }
        let weights = coordinate_weights(game, schedule)
            .into_iter()
            .map(S::from_usize_lossy)
            .collect();
        Ok(Self {
            game,
            schedule,
            alpha,
            weights,
        })
    }

    /// Diagonal of `Γ = diag(r_i I_{m_i})`.
    pub fn gamma_diag(&self) -> &[S] {
        &self.weights
    }

    /// `T(x) = x − αΓF(x)`.
    pub fn full(&self, x: &[S]) -> Result<Vec<S>> {
        let f = self.game.pseudogradient(x)?;
        Ok(x.iter()
            .zip(&f)
            .zip(&self.weights)
            .map(|((&xi, &fi), &w)| xi - self.alpha * w * fi)
            .collect())
    }

    /// One epoch: the per-jump maps `I − αS_jF` applied in schedule order, jump 0 first.
    pub fn epoch(&self, x: &[S]) -> Result<Vec<S>> {
        let mut out = x.to_vec();
        for ev in self.schedule.events() {
            masked_fi_step_in_place(self.game, &mut out, ev.agent, self.alpha)?;
        }
        Ok(out)
    }

    /// `R(x) = (T(x) − E(x)) / α`.
    pub fn error(&self, x: &[S]) -> Result<Vec<S>> {
        let t = self.full(x)?;
        let e = self.epoch(x)?;
        Ok(t.iter().zip(&e).map(|(&a, &b)| (a - b) / self.alpha).collect())
    }

    /// `(T(x), E(x), R(x))`.
    pub fn evaluate(&self, x: &[S]) -> Result<(Vec<S>, Vec<S>, Vec<S>)> {
        let t = self.full(x)?;
        let e = self.epoch(x)?;
        let r = t.iter().zip(&e).map(|(&a, &b)| (a - b) / self.alpha).collect();
        Ok((t, e, r))
    }
}

/// Free-function form of [`EpochOperators::new`].
pub fn epoch_operators<'a, S: Scalar>(
    game: &'a Game<S>,
    schedule: &'a TimerSchedule,
    alpha: S,
) -> Result<EpochOperators<'a, S>> {
    EpochOperators::new(game, schedule, alpha)
}

/// `‖v‖²_{Γ⁻¹} = Σ v_c² / r_{agent(c)}`.
pub fn gamma_inv_norm_sq<S: Scalar>(v: &[S], weights: &[S]) -> S {
    v.iter().zip(weights).map(|(&a, &w)| a * a / w).sum()
}

/// Constants entering the step-size inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeProblem {
    pub mu_f: f64,
    pub lip_l: f64,
    /// Jumps per epoch.
    pub r: f64,
    /// Largest `r_i`.
    pub r_max: f64,
}

impl StepsizeProblem {
    pub fn from_schedule(mu_f: f64, lip_l: f64, schedule: &TimerSchedule) -> Self {
        Self {
            mu_f,
            lip_l,
            r: schedule.r() as f64,
            r_max: schedule.r_max() as f64,
        }
    }

    /// `½ + r̄η/μ² − (1 − αη)(1 − α − (αLr r̄ (1 + αL)^r)² / (2η))`.
    pub fn lhs(&self, alpha: f64, eta: f64) -> f64 {
        let coupling = alpha * self.lip_l * self.r * self.r_max * (1.0 + alpha * self.lip_l).powf(self.r);
        0.5 + self.r_max * eta / (self.mu_f * self.mu_f)
            - (1.0 - alpha * eta) * (1.0 - alpha - coupling * coupling / (2.0 * eta))
    }

    /// Whether `(α, η)` lies where the inequality is meaningful: `α ≤ η/10` and both
    /// factors of the product positive. For `αη > 1` the product flips sign and the
    /// inequality holds for spurious large steps.
    pub fn admissible(&self, alpha: f64, eta: f64) -> bool {
        let coupling = alpha * self.lip_l * self.r * self.r_max * (1.0 + alpha * self.lip_l).powf(self.r);
        alpha <= eta / 10.0
            && alpha * eta < 1.0
            && 1.0 - alpha - coupling * coupling / (2.0 * eta) > 0.0
    }

    /// Admissible `η` from the log grid minimizing the left-hand side.
    pub fn best_eta(&self, alpha: f64) -> (f64, f64) {
        eta_grid()
            .filter(|&eta| self.admissible(alpha, eta))
            .map(|eta| (eta, self.lhs(alpha, eta)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((f64::NAN, f64::INFINITY))
    }

    pub fn feasible(&self, alpha: f64) -> Option<f64> {
        let (eta, v) = self.best_eta(alpha);
        (v <= 0.0).then_some(eta)
    }
}

/// Points in the `η` scan.
pub const ETA_POINTS: usize = 200;

fn eta_grid() -> impl Iterator<Item = f64> {
    let (lo, hi) = (1e-4f64.ln(), 10f64.ln());
    (0..ETA_POINTS).map(move |i| (lo + (hi - lo) * i as f64 / (ETA_POINTS - 1) as f64).exp())
}

/// Step size with its `η` witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeBound {
    pub alpha: f64,
    pub eta: f64,
    /// Left-hand side of the inequality at `(alpha, eta)`; nonpositive.
    pub lhs: f64,
}

/// Largest `α` for which some grid `η` satisfies the step-size inequality, located by a
/// logarithmic scan followed by bisection to `1e-6` relative width.
pub fn max_stepsize(mu_f: f64, lip_l: f64, schedule: &TimerSchedule) -> Result<StepsizeBound> {
    max_stepsize_for(StepsizeProblem::from_schedule(mu_f, lip_l, schedule))
}

pub fn max_stepsize_for(problem: StepsizeProblem) -> Result<StepsizeBound> {
    if !(problem.mu_f > 0.0) || !(problem.lip_l > 0.0) || !(problem.r >= 1.0) {
        return Err(Error::InvalidArgument("constants must be positive".into()));
    }
    // α ≤ η/10 ≤ 1 bounds the scan from above
    let scan: Vec<f64> = (0..=400)
        .map(|i| (1e-12f64.ln() + (1f64.ln() - 1e-12f64.ln()) * i as f64 / 400.0).exp())
        .collect();
    let mut lo = None;
    let mut hi = None;
    for w in scan.windows(2) {
        if problem.feasible(w[0]).is_some() {
            lo = Some(w[0]);
            if problem.feasible(w[1]).is_none() {
                hi = Some(w[1]);
            }
        }
    }
    let mut lo = lo.ok_or(Error::InfeasibleStepsize)?;
    let mut hi = hi.unwrap_or(*scan.last().unwrap());
    if problem.feasible(hi).is_some() {
        lo = hi;
    }
    while (hi - lo) > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if problem.feasible(mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (eta, lhs) = problem.best_eta(lo);
    Ok(StepsizeBound { alpha: lo, eta, lhs })
}

/// Per-epoch contraction factor `1 − αμ²r̲²/2` claimed for `α` below the step-size bound.
///
/// Not a valid bound in general: the slowest mode of the epoch map decays like
/// `1 − 2αλ_min(Γ∇F)`, which is slower whenever `λ_min(Γ∇F) < μ²r̲²/4`.
pub fn epoch_contraction_bound(alpha: f64, mu_f: f64, r_min: usize) -> f64 {
    1.0 - alpha * mu_f * mu_f * (r_min * r_min) as f64 / 2.0
}

/// `V = ‖x − x*‖²_{Γ⁻¹}` at the epoch boundaries of an asynchronous full-information run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub values: Vec<f64>,
    pub bound: f64,
}

impl EpochTrace {
    /// `V(n + 1) / V(n)` for every epoch with `V(n) > 0`.
    pub fn ratios(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }

    pub fn worst_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(0.0, f64::max)
    }

    /// First epoch whose ratio exceeds the bound.
    pub fn check(&self) -> Result<()> {
        for (n, w) in self.values.windows(2).enumerate() {
            if w[0] > 0.0 && w[1] > self.bound * w[0] {
                return Err(Error::ContractionViolated {
                    epoch: n,
                    ratio: w[1] / w[0],
                    bound: self.bound,
                });
            }
        }
        Ok(())
    }
}

/// Runs `epochs` epochs from `x0` and records `V` at every boundary. The contraction
/// bound is attached; call [`EpochTrace::check`] to test it.
pub fn epoch_contraction_check<S: Scalar>(
    game: &Game<S>,
    schedule: &TimerSchedule,
    alpha: S,
    x0: &[S],
    x_star: &[S],
    epochs: usize,
) -> Result<EpochTrace> {
    let ops = EpochOperators::new(game, schedule, alpha)?;
    let mut x = x0.to_vec();
    let v = |x: &[S]| gamma_inv_norm_sq(&linalg::sub(x, x_star), ops.gamma_diag()).to_f64_lossy();
    let mut values = Vec::with_capacity(epochs + 1);
    values.push(v(&x));
    for _ in 0..epochs {
        x = ops.epoch(&x)?;
        values.push(v(&x));
    }
    Ok(EpochTrace {
        values,
        bound: epoch_contraction_bound(
            alpha.to_f64_lossy(),
            game.mu_f().to_f64_lossy(),
            schedule.r_min(),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::schedule::build_schedule;
    use std::f64::consts::PI;

    fn pair_game() -> Game<f64> {
        Game::connectivity(vec![vec![1.0, -2.0], vec![3.0, 0.5]], 0.1).unwrap()
    }

    #[test]
    fn only_jumping_agent_moves() {
        let g = pair_game();
        let s = build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        let x = vec![0.3, 0.4, -0.2, 0.9];
        let y = async_fi_step(&g, &x, &s, 0, 0.1).unwrap();
        // agent 1 jumps first
        assert_eq!(&y[..2], &x[..2]);
        assert_ne!(&y[2..], &x[2..]);
    }

    #[test]
    fn single_agent_is_gradient_step() {
        let g = Game::connectivity(vec![vec![1.0, -2.0]], 0.0).unwrap();
        let s = build_schedule(&[1.0], &[0.0]).unwrap();
        let x = vec![0.5, 0.5];
        let y = async_fi_step(&g, &x, &s, 5, 0.1).unwrap();
        let f = g.pseudogradient(&x).unwrap();
        assert_eq!(y, vec![0.5 - 0.1 * f[0], 0.5 - 0.1 * f[1]]);
    }

    #[test]
    fn ne_is_fixed() {
        let g = pair_game();
        let s = build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        let xs = g.solve_ne_oracle(1e-14).unwrap();
        for k in 0..4 {
            assert!(linalg::dist(&async_fi_step(&g, &xs, &s, k, 0.2).unwrap(), &xs) < 1e-14);
        }
    }

    #[test]
    fn epoch_of_linear_game_is_matrix_product() {
        // F(x) = Ax; agent 1 jumps first, then agent 0
        let a = Matrix::from_rows(&[vec![2.0, 0.5], vec![-0.3, 3.0]]).unwrap();
        let g = Game::quadratic(vec![1, 1], a.clone(), vec![0.0, 0.0]).unwrap();
        let s = build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        let alpha = 0.1;
        let ops = epoch_operators(&g, &s, alpha).unwrap();
        let step = |row: usize| {
            let mut m = Matrix::identity(2);
            for j in 0..2 {
                m[(row, j)] -= alpha * a[(row, j)];
            }
            m
        };
        let e = step(0).matmul(&step(1));
        let x = [0.7, -1.3];
        let got = ops.epoch(&x).unwrap();
        let want = e.mul_vec(&x);
        assert!(linalg::dist(&got, &want) < 1e-15);
    }

    #[test]
    fn one_agent_epoch_equals_full_update() {
        let g = Game::connectivity(vec![vec![1.0, -2.0]], 0.0).unwrap();
        let s = build_schedule(&[1.0], &[0.0]).unwrap();
        let ops = epoch_operators(&g, &s, 0.1).unwrap();
        let (t, e, r) = ops.evaluate(&[0.4, 0.1]).unwrap();
        assert_eq!(t, e);
        assert!(linalg::norm(&r) == 0.0);
    }

    #[test]
    fn error_operator_is_order_alpha() {
        let g = Game::connectivity(
            vec![vec![-4.0, -8.0], vec![-12.0, -3.0], vec![1.0, 7.0], vec![16.0, 8.0]],
            0.04,
        )
        .unwrap();
        let s = build_schedule(&[0.01, 0.015, 0.02, 0.01], &[0.0, 0.002, 0.004, 0.006]).unwrap();
        let x = vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0, 0.0, 1.0];
        let norms: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&a| linalg::norm(&epoch_operators(&g, &s, a).unwrap().error(&x).unwrap()))
            .collect();
        for w in norms.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.05, "{norms:?}");
        }
    }

    #[test]
    fn stepsize_witness_satisfies_inequality() {
        let s = build_schedule(&[0.01, 0.015, 0.02, 0.01], &[0.0, 0.002, 0.004, 0.006]).unwrap();
        let b = max_stepsize(2.0, 2.32, &s).unwrap();
        let p = StepsizeProblem::from_schedule(2.0, 2.32, &s);
        assert!(b.alpha > 0.0 && p.admissible(b.alpha, b.eta));
        assert!(p.lhs(b.alpha, b.eta) <= 0.0);
        assert!(p.feasible(b.alpha * (1.0 + 1e-5)).is_none());
    }

    #[test]
    fn stepsize_exists_for_unit_constants() {
        let s = build_schedule(&[1.0], &[0.0]).unwrap();
        assert!(max_stepsize(1.0, 1.0, &s).unwrap().alpha > 0.0);
    }

    #[test]
    fn stepsize_shrinks_with_lipschitz_constant() {
        let s = build_schedule(&[1.0, 1.5], &[0.0, 0.7]).unwrap();
        let mut prev = f64::INFINITY;
        for l in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let a = max_stepsize(1.0, l, &s).unwrap().alpha;
            assert!(a < prev, "L = {l}: {a} !< {prev}");
            prev = a;
        }
    }

    #[test]
    fn trace_from_equilibrium_is_zero() {
        let g = pair_game();
        let s = build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        let xs = g.solve_ne_oracle(1e-14).unwrap();
        let t = epoch_contraction_check(&g, &s, 0.05, &xs, &xs, 10).unwrap();
        assert!(t.values.iter().all(|&v| v < 1e-28));
        t.check().unwrap();
    }

    #[test]
    fn async_frequency_examples() {
        let g = Game::connectivity(vec![vec![0.0], vec![1.0]], 0.1).unwrap();
        let s = build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        assert_eq!(
            validate_frequencies_async(&g, &[1.0, 2.0], &s, 1e-6),
            crate::sync::validate_frequencies_sync(&[1.0, 2.0], 1e-6)
        );
        // ω = (π/3, π/2) with weights (6, 4): the sum lands on 4π
        let v = validate_weighted_frequencies(&[PI / 3.0, PI / 2.0], &[6, 4], 1e-6);
        assert!(v
            .iter()
            .any(|v| v.combination == crate::sync::Combination::Sum && v.first == 0 && v.second == 1));
    }

    #[test]
    fn empty_mask_only_counts() {
        let g = pair_game();
        let bank = OscillatorBank::new(vec![1.1, 2.2, 3.3, 4.4], vec![0.1; 4]).unwrap();
        let mut st = AsyncState::new(vec![0.1; 4], bank, 2).unwrap();
        let before = st.clone();
        let p = SyncZoParams::new(0.5, 0.5, 1.0).unwrap();
        masked_zo_step_in_place(&g, &mut st, &[false, false], &p, GradientSource::Dither).unwrap();
        assert_eq!(st.k, 1);
        assert_eq!((st.x, st.xi, st.bank, st.kappa), (before.x, before.xi, before.bank, before.kappa));
    }

    #[test]
    fn full_mask_is_unprojected_sync_step() {
        use crate::sync::{zo_sync_step, SyncState};
        let g = pair_game();
        let bank = OscillatorBank::new(vec![1.1, 2.2, 3.3, 4.4], vec![0.1; 4]).unwrap();
        let p = SyncZoParams::new(0.2, 0.05, 1.0).unwrap();
        let mut a = AsyncState::new(vec![0.1, 0.2, 0.3, 0.4], bank.clone(), 2).unwrap();
        let mut s = SyncState::new(vec![0.1, 0.2, 0.3, 0.4], bank).unwrap();
        for _ in 0..50 {
            masked_zo_step_in_place(&g, &mut a, &[true, true], &p, GradientSource::Dither).unwrap();
            s = zo_sync_step(&g, &s, &p, GradientSource::Dither).unwrap();
            // same update up to the order of floating point operations
            assert!(linalg::dist(&a.x, &s.x) < 1e-12 * (1.0 + linalg::norm(&s.x)));
            assert!(linalg::dist(&a.xi, &s.xi) < 1e-12 * (1.0 + linalg::norm(&s.xi)));
        }
    }

    #[test]
    fn counters_and_time_advance() {
        let g = pair_game();
        let s = build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        let bank = OscillatorBank::new(vec![1.1, 2.2, 3.3, 4.4], vec![0.1; 4]).unwrap();
        let p = SyncZoParams::new(0.5, 0.3, 1.0).unwrap();
        let mut st = AsyncState::new(vec![0.0; 4], bank, 2).unwrap();
        let mut last_t = 0.0;
        for _ in 0..9 {
            async_zo_step_in_place(&g, &mut st, &s, &p, GradientSource::Dither).unwrap();
            assert!(st.t > last_t);
            last_t = st.t;
            assert_eq!(st.kappa.iter().sum::<u64>(), st.k);
        }
        assert_eq!(st.kappa, vec![4, 5]);
        assert!((st.t - 4.5).abs() < 1e-12);
    }
}
