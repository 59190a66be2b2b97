//! Synchronous seeking: the relaxed forward-backward iteration with full information and
//! its zeroth-order counterpart driven by sinusoidal dithers, a low-pass filter state and
//! unit-circle oscillators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg;
use crate::scalar::Scalar;

/// Oscillator pairs are pulled back onto the unit circle after this many rotations.
pub const RENORMALIZE_EVERY: u64 = 1000;

/// Default tolerance for frequency resonance checks (distance from `2πZ`).
pub const FREQ_TOL: f64 = 1e-6;

/// Feasibility slack used when a step requires a point inside the constraint set.
pub(crate) fn feasibility_tol<S: Scalar>(x: &[S]) -> S {
    S::lit(1e-9) * linalg::norm(x).max(S::one())
}

/// Dither frequencies, amplitudes and oscillator states, one `(sin, cos)` pair per scalar
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorBank<S> {
    freqs: Vec<S>,
    amps: Vec<S>,
    states: Vec<S>,
    cos_w: Vec<S>,
    sin_w: Vec<S>,
    rotations: Vec<u64>,
}

impl<S: Scalar> OscillatorBank<S> {
    /// Bank with every pair at phase zero, `(sin 0, cos 0) = (0, 1)`.
    ///
    /// `amps` is per coordinate. Zero amplitudes are accepted here and rejected by the
    /// estimator, which divides by them.
    pub fn new(freqs: Vec<S>, amps: Vec<S>) -> Result<Self> {
        let phases = vec![S::zero(); freqs.len()];
        Self::with_phases(freqs, amps, &phases)
    }

    /// Bank whose pair `j` starts at `(sin φ_j, cos φ_j)`.
    pub fn with_phases(freqs: Vec<S>, amps: Vec<S>, phases: &[S]) -> Result<Self> {
        let m = freqs.len();
        if amps.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: amps.len(),
            });
        }
        if phases.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: phases.len(),
            });
        }
        if freqs.iter().any(|w| !(*w > S::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument("frequencies must be positive and finite".into()));
        }
        if amps.iter().any(|a| *a < S::zero() || !a.is_finite()) {
            return Err(Error::InvalidArgument("amplitudes must be nonnegative and finite".into()));
        }
        let states = phases.iter().flat_map(|p| [p.sin(), p.cos()]).collect();
        Ok(Self {
            cos_w: freqs.iter().map(|w| w.cos()).collect(),
            sin_w: freqs.iter().map(|w| w.sin()).collect(),
            rotations: vec![0; m],
            freqs,
            amps,
            states,
        })
    }

    /// Bank for `game` with one amplitude per agent, repeated over that agent's coordinates.
    pub fn for_game(game: &Game<S>, freqs: Vec<S>, agent_amps: &[S]) -> Result<Self> {
        if agent_amps.len() != game.agent_count() {
            return Err(Error::DimensionMismatch {
                expected: game.agent_count(),
                got: agent_amps.len(),
            });
        }
        if freqs.len() != game.dim() {
            return Err(Error::DimensionMismatch {
                expected: game.dim(),
                got: freqs.len(),
            });
        }
        let amps = game
            .dims()
            .iter()
            .zip(agent_amps)
            .flat_map(|(&d, &a)| std::iter::repeat_n(a, d))
            .collect();
        Self::new(freqs, amps)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn freqs(&self) -> &[S] {
        &self.freqs
    }

    pub fn amps(&self) -> &[S] {
        &self.amps
    }

    /// Raw `μ ∈ R^{2m}`, `(sin, cos)` interleaved.
    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn pair(&self, j: usize) -> (S, S) {
        (self.states[2 * j], self.states[2 * j + 1])
    }

    /// Mean amplitude `ā`.
    pub fn mean_amplitude(&self) -> S {
        self.amps.iter().copied().sum::<S>() / S::from_usize_lossy(self.amps.len().max(1))
    }

    /// Rotates pair `j` once by its frequency with `[[cos ω, −sin ω], [sin ω, cos ω]]`.
    pub fn rotate_pair(&mut self, j: usize) {
        let (s, c) = self.pair(j);
        let (cw, sw) = (self.cos_w[j], self.sin_w[j]);
        let mut ns = cw * s - sw * c;
        let mut nc = sw * s + cw * c;
        self.rotations[j] += 1;
        if self.rotations[j].is_multiple_of(RENORMALIZE_EVERY) {
            let n = (ns * ns + nc * nc).sqrt();
            ns = ns / n;
            nc = nc / n;
        }
        self.states[2 * j] = ns;
        self.states[2 * j + 1] = nc;
    }

    /// Rotates every pair (`μ⁺ = Rμ`).
    pub fn rotate_all(&mut self) {
        for j in 0..self.len() {
            self.rotate_pair(j);
        }
    }

    /// Rotates the pairs of the coordinates in `range` only.
    pub fn rotate_range(&mut self, range: std::ops::Range<usize>) {
        for j in range {
            self.rotate_pair(j);
        }
    }

    /// `Dμ`: the sin slot of each pair, in coordinate order.
    pub fn dither(&self) -> Vec<S> {
        self.states.iter().step_by(2).copied().collect()
    }

    /// Largest `| ‖pair‖ − 1 |` over all pairs.
    pub fn norm_drift(&self) -> S {
        self.states
            .chunks_exact(2)
            .map(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - S::one()).abs())
            .fold(S::zero(), S::max)
    }
}

/// Pure form of [`OscillatorBank::rotate_all`].
pub fn rotate<S: Scalar>(bank: &OscillatorBank<S>) -> OscillatorBank<S> {
    let mut out = bank.clone();
    out.rotate_all();
    out
}

pub fn dither_vector<S: Scalar>(bank: &OscillatorBank<S>) -> Vec<S> {
    bank.dither()
}

/// Gains of the zeroth-order step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncZoParams<S> {
    /// Filter gain `α ∈ (0, 1]`.
    pub alpha: S,
    /// Slow gain `β ∈ (0, 1]`.
    pub beta: S,
    /// Projection step `γ > 0`.
    pub gamma: S,
}

impl<S: Scalar> SyncZoParams<S> {
    pub fn new(alpha: S, beta: S, gamma: S) -> Result<Self> {
        let p = Self { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: S| v > S::zero() && v <= S::one();
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(Error::InvalidArgument("alpha and beta must lie in (0, 1]".into()));
        }
        if !(self.gamma > S::zero()) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        Ok(())
    }
}

/// Where the `ξ` update takes its pseudogradient sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientSource {
    /// Cost measurements at the dithered point.
    #[default]
    Dither,
    /// `ξ` is pinned to the exact `F(x)` before each update.
    Oracle,
}

/// `(x, ξ, μ)` plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncState<S> {
    pub x: Vec<S>,
    pub xi: Vec<S>,
    pub bank: OscillatorBank<S>,
    pub k: u64,
}

impl<S: Scalar> SyncState<S> {
    /// Initial state with `ξ = 0`.
    pub fn new(x: Vec<S>, bank: OscillatorBank<S>) -> Result<Self> {
        if x.len() != bank.len() {
            return Err(Error::DimensionMismatch {
                expected: bank.len(),
                got: x.len(),
            });
        }
        let xi = vec![S::zero(); x.len()];
        Ok(Self { x, xi, bank, k: 0 })
    }
}

/// `c = √(1 + γ²L²) / (1 + γμ_F)`.
pub fn fb_contraction_constant<S: Scalar>(gamma: S, mu_f: S, lip_l: S) -> S {
    (S::one() + gamma * gamma * lip_l * lip_l).sqrt() / (S::one() + gamma * mu_f)
}

/// Squared-distance contraction factor `1 − λ(1 − c)(2 − λc)` of the relaxed
/// forward-backward step.
pub fn fb_contraction_factor<S: Scalar>(gamma: S, mu_f: S, lip_l: S, lambda: S) -> Result<S> {
    if !(gamma > S::zero()) || !(mu_f > S::zero()) || !(lip_l > S::zero()) || lambda < S::zero()
    {
        return Err(Error::InvalidArgument(
            "gamma, mu_f and L must be positive and lambda nonnegative".into(),
        ));
    }
    let c = fb_contraction_constant(gamma, mu_f, lip_l);
    if c >= S::one() {
        return Err(Error::NotContractive { c: c.to_f64_lossy() });
    }
    let two = S::lit(2.0);
    Ok(S::one() - lambda * (S::one() - c) * (two - lambda * c))
}

/// `(1 − λ)x + λ proj_C(x − γF(x))`.
pub fn fb_step<S: Scalar>(game: &Game<S>, x: &[S], lambda: S, gamma: S) -> Result<Vec<S>> {
    let v = game.violation(x);
    if v > feasibility_tol(x) {
        return Err(Error::Infeasible {
            violation: v.to_f64_lossy(),
        });
    }
    let f = game.pseudogradient(x)?;
    Ok(relaxed_projection(game, x, &f, lambda, gamma))
}

fn relaxed_projection<S: Scalar>(game: &Game<S>, x: &[S], dir: &[S], lambda: S, gamma: S) -> Vec<S> {
    let mut p: Vec<S> = x.iter().zip(dir).map(|(&xi, &d)| xi - gamma * d).collect();
    game.project_in_place(&mut p);
    x.iter()
        .zip(&p)
        .map(|(&xi, &pi)| (S::one() - lambda) * xi + lambda * pi)
        .collect()
}

/// `2A⁻¹ J(x + ADμ) Dμ`, where agent `i`'s cost multiplies its own dither entries.
/// Uses cost evaluations only.
pub fn estimate_pseudogradient<S: Scalar>(
    game: &Game<S>,
    x: &[S],
    bank: &OscillatorBank<S>,
) -> Result<Vec<S>> {
    if bank.len() != game.dim() {
        return Err(Error::DimensionMismatch {
            expected: game.dim(),
            got: bank.len(),
        });
    }
    if let Some(c) = bank.amps().iter().position(|a| *a == S::zero()) {
        return Err(Error::ZeroAmplitude { coordinate: c });
    }
    let d = bank.dither();
    let probe: Vec<S> = x
        .iter()
        .zip(bank.amps())
        .zip(&d)
        .map(|((&xi, &a), &di)| xi + a * di)
        .collect();
    let mut out = vec![S::zero(); game.dim()];
    estimate_agents(game, &probe, &d, bank.amps(), 0..game.agent_count(), &mut out)?;
    Ok(out)
}

/// Writes the estimator entries of the listed agents into `out`.
pub(crate) fn estimate_agents<S: Scalar>(
    game: &Game<S>,
    probe: &[S],
    dither: &[S],
    amps: &[S],
    agents: impl IntoIterator<Item = usize>,
    out: &mut [S],
) -> Result<()> {
    let two = S::lit(2.0);
    for i in agents {
        let j = game.eval_cost(i, probe)?;
        for c in game.agent_range(i) {
            out[c] = two / amps[c] * j * dither[c];
        }
    }
    Ok(())
}

/// One synchronous zeroth-order step:
/// `x⁺ = (1 − αβ)x + αβ proj_C(x − γξ)`,
/// `ξ⁺ = (1 − α)ξ + α·2A⁻¹J(x + ADμ)Dμ`, `μ⁺ = Rμ`.
/// The `x` update uses the pre-update `ξ`.
pub fn zo_sync_step<S: Scalar>(
    game: &Game<S>,
    state: &SyncState<S>,
    params: &SyncZoParams<S>,
    source: GradientSource,
) -> Result<SyncState<S>> {
    let mut next = state.clone();
    zo_sync_step_in_place(game, &mut next, params, source)?;
    Ok(next)
}

pub fn zo_sync_step_in_place<S: Scalar>(
    game: &Game<S>,
    state: &mut SyncState<S>,
    params: &SyncZoParams<S>,
    source: GradientSource,
) -> Result<()> {
    let v = game.violation(&state.x);
    if v > feasibility_tol(&state.x) {
        return Err(Error::Infeasible {
            violation: v.to_f64_lossy(),
        });
    }
    let sample = match source {
        GradientSource::Dither => estimate_pseudogradient(game, &state.x, &state.bank)?,
        GradientSource::Oracle => {
            let f = game.pseudogradient(&state.x)?;
            state.xi.clone_from(&f);
            f
        }
    };
    let ab = params.alpha * params.beta;
    let x_next = relaxed_projection(game, &state.x, &state.xi, ab, params.gamma);
    for (xi, s) in state.xi.iter_mut().zip(&sample) {
        *xi = (S::one() - params.alpha) * *xi + params.alpha * *s;
    }
    if !linalg::all_finite(&x_next) || !linalg::all_finite(&state.xi) {
        return Err(Error::NonFinite("zeroth-order state"));
    }
    state.x = x_next;
    state.bank.rotate_all();
    state.k += 1;
    Ok(())
}

/// Which resonance a frequency combination hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    Sum,
    Difference,
    /// A single weighted frequency on `2πZ`: that coordinate's dither never moves.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyViolation {
    pub first: usize,
    pub second: usize,
    pub combination: Combination,
    pub value: f64,
    pub distance: f64,
}

/// Checks `w_a ω_a ± w_b ω_b ∉ 2πZ` (up to `tol`) for every pair `a < b`, and
/// `w_a ω_a ∉ 2πZ`. Returns all violations; an empty list means the set is valid.
pub fn validate_weighted_frequencies<S: Scalar>(
    freqs: &[S],
    weights: &[usize],
    tol: S,
) -> Vec<FrequencyViolation> {
    let scaled: Vec<S> = freqs
        .iter()
        .zip(weights)
        .map(|(&w, &r)| w * S::from_usize_lossy(r))
        .collect();
    let mut out = Vec::new();
    let mut check = |first, second, combination, value: S| {
        let d = value.dist_to_two_pi_lattice();
        if d <= tol {
            out.push(FrequencyViolation {
                first,
                second,
                combination,
                value: value.to_f64_lossy(),
                distance: d.to_f64_lossy(),
            });
        }
    };
    for a in 0..scaled.len() {
        check(a, a, Combination::Single, scaled[a]);
        for b in a + 1..scaled.len() {
            check(a, b, Combination::Sum, scaled[a] + scaled[b]);
            check(a, b, Combination::Difference, scaled[a] - scaled[b]);
        }
    }
    out
}

/// Resonance check for the synchronous algorithm (all weights one).
pub fn validate_frequencies_sync<S: Scalar>(freqs: &[S], tol: S) -> Vec<FrequencyViolation> {
    validate_weighted_frequencies(freqs, &vec![1; freqs.len()], tol)
}

/// Attempts allowed by [`generate_frequencies`] before giving up.
pub const FREQ_ATTEMPTS: usize = 100;

/// Frequencies `j + U[0, 0.5]` for `j = 1..=m`, redrawn until they pass the weighted
/// resonance check.
pub fn generate_frequencies<S: Scalar, R: Rng + ?Sized>(
    weights: &[usize],
    tol: S,
    rng: &mut R,
) -> Result<Vec<S>> {
    generate_frequencies_with_margin(weights, tol, S::zero(), rng)
}

/// Smallest distance of any single per-jump frequency to `2πZ`.
///
/// A frequency close to a multiple of `2π` rotates its oscillator slowly, so the
/// estimator ripple it injects is filtered and integrated poorly.
pub fn aliasing_margin<S: Scalar>(freqs: &[S]) -> S {
    freqs
        .iter()
        .map(|w| w.dist_to_two_pi_lattice())
        .fold(S::infinity(), S::min)
}

/// Like [`generate_frequencies`], but also redraws while [`aliasing_margin`] is
/// below `margin`. A zero margin reproduces [`generate_frequencies`] exactly.
pub fn generate_frequencies_with_margin<S: Scalar, R: Rng + ?Sized>(
    weights: &[usize],
    tol: S,
    margin: S,
    rng: &mut R,
) -> Result<Vec<S>> {
    if !(margin >= S::zero()) || margin >= S::PI() {
        return Err(Error::InvalidArgument("aliasing margin must lie in [0, π)".into()));
    }
    for _ in 0..FREQ_ATTEMPTS {
        let freqs: Vec<S> = (1..=weights.len())
            .map(|j| S::lit(j as f64 + 0.5 * rng.random::<f64>()))
            .collect();
        if validate_weighted_frequencies(&freqs, weights, tol).is_empty()
            && aliasing_margin(&freqs) >= margin
        {
            return Ok(freqs);
        }
    }
    Err(Error::NoConvergence {
        what: "frequency generation",
        iterations: FREQ_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ConstraintSet;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn shifted_square() -> Game<f64> {
        Game::new(
            vec![1],
            Arc::new(|_, x: &[f64]| (x[0] - 3.0) * (x[0] - 3.0)),
            2.0,
            2.0,
        )
        .unwrap()
    }

    fn square() -> Game<f64> {
        Game::new(vec![1], Arc::new(|_, x: &[f64]| x[0] * x[0]), 2.0, 2.0).unwrap()
    }

    #[test]
    fn fb_step_by_hand() {
        let g = shifted_square();
        let x = fb_step(&g, &[0.0], 1.0, 0.25).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-8);
        assert_eq!(fb_step(&g, &[0.7], 0.0, 0.25).unwrap(), vec![0.7]);
    }

    #[test]
    fn fb_step_fixes_ne() {
        let g = Game::connectivity(vec![vec![1.0, 2.0], vec![-3.0, 0.5]], 0.2).unwrap();
        let xs = g.solve_ne_oracle(1e-14).unwrap();
        let x = fb_step(&g, &xs, 0.6, 0.1).unwrap();
        assert!(linalg::dist(&x, &xs) < 1e-13);
    }

    #[test]
    fn fb_step_rejects_infeasible() {
        let g = shifted_square()
            .with_constraints(vec![ConstraintSet::new_box(vec![0.0], vec![1.0]).unwrap()])
            .unwrap();
        assert!(matches!(fb_step(&g, &[2.0], 1.0, 0.1), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn contraction_factor_by_hand() {
        let f = fb_contraction_factor(0.1, 1.0, 1.0, 1.0).unwrap();
        let c = 1.01f64.sqrt() / 1.1;
        assert!((f - (1.0 - (1.0 - c) * (2.0 - c))).abs() < 1e-15);
        // c = 0.913625…, factor = 0.906165…
        assert!((f - 0.906165).abs() < 1e-6);
        assert_eq!(fb_contraction_factor(0.1, 1.0, 1.0, 0.0).unwrap(), 1.0);
        let tiny = fb_contraction_factor(1e-9, 1.0, 1.0, 1.0).unwrap();
        assert!(tiny < 1.0 && tiny > 1.0 - 1e-8);
    }

    #[test]
    fn non_contractive_gamma() {
        // c >= 1 once γ(L² − μ²) >= 2μ
        assert!(matches!(
            fb_contraction_factor(10.0, 1.0, 2.0, 1.0),
            Err(Error::NotContractive { .. })
        ));
    }

    #[test]
    fn quarter_turn() {
        let b = OscillatorBank::new(vec![PI / 2.0], vec![0.1]).unwrap();
        let r = rotate(&b);
        let (s, c) = r.pair(0);
        assert!((s + 1.0).abs() < 1e-12 && c.abs() < 1e-12);
    }

    #[test]
    fn full_turn_is_identity() {
        let b = OscillatorBank::with_phases(vec![2.0 * PI], vec![0.1], &[0.3]).unwrap();
        let r = rotate(&b);
        assert!((r.pair(0).0 - b.pair(0).0).abs() < 1e-9);
        assert!((r.pair(0).1 - b.pair(0).1).abs() < 1e-9);
    }

    #[test]
    fn rotation_orbit_closed_form() {
        // the rotation matrix runs phase backwards: sin slot after k steps is sin(φ − ωk)
        let w = 0.37;
        let mut b = OscillatorBank::with_phases(vec![w], vec![1.0], &[0.2]).unwrap();
        for k in 1..=500 {
            b.rotate_all();
            assert!((b.dither()[0] - (0.2 - w * k as f64).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn dither_selects_sin_slots() {
        let b = OscillatorBank::with_phases(vec![1.0, 2.0], vec![1.0, 1.0], &[0.0, PI / 2.0])
            .unwrap();
        let d = dither_vector(&b);
        assert!(d[0].abs() < 1e-15 && (d[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn renormalization_bounds_drift() {
        let mut b = OscillatorBank::new(vec![0.123_456_789, 2.5, 1.1], vec![1.0; 3]).unwrap();
        for _ in 0..1_000_000 {
            b.rotate_all();
        }
        assert!(b.norm_drift() < 1e-6, "{}", b.norm_drift());
    }

    #[test]
    fn estimator_by_hand() {
        let g = square();
        let b = OscillatorBank::with_phases(vec![1.0], vec![0.1], &[PI / 2.0]).unwrap();
        let e = estimate_pseudogradient(&g, &[1.0], &b).unwrap();
        assert!((e[0] - 24.2).abs() < 1e-10);
    }

    #[test]
    fn estimator_zero_dither() {
        let g = square();
        let b = OscillatorBank::new(vec![1.0], vec![0.1]).unwrap();
        assert_eq!(estimate_pseudogradient(&g, &[1.0], &b).unwrap(), vec![0.0]);
    }

    #[test]
    fn estimator_rejects_zero_amplitude() {
        let g = square();
        let b = OscillatorBank::new(vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(
            estimate_pseudogradient(&g, &[1.0], &b),
            Err(Error::ZeroAmplitude { coordinate: 0 })
        ));
    }

    #[test]
    fn estimator_time_average() {
        let g = square();
        let mut b = OscillatorBank::new(vec![1.0], vec![0.01]).unwrap();
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += estimate_pseudogradient(&g, &[1.0], &b).unwrap()[0];
            b.rotate_all();
        }
        let avg = acc / n as f64;
        // the (2/a)J(x)·sin term averages out at rate (2/a)·c1/N ≈ 0.042
        let c1 = 2.0 / (2.0 * (0.5f64).sin());
        assert!((avg - 2.0).abs() < (2.0 / 0.01) * c1 / n as f64 + 1e-3, "{avg}");
    }

    #[test]
    fn frozen_filter_only_rotates() {
        let g = square();
        let b = OscillatorBank::new(vec![1.0], vec![0.1]).unwrap();
        let mut s = SyncState::new(vec![0.5], b).unwrap();
        s.xi = vec![0.3];
        // α = 0 is outside the admissible gains but the update formula itself is well defined
        let p = SyncZoParams { alpha: 0.0, beta: 1.0, gamma: 0.1 };
        let n = zo_sync_step(&g, &s, &p, GradientSource::Dither).unwrap();
        assert_eq!(n.x, s.x);
        assert_eq!(n.xi, s.xi);
        assert_eq!(n.bank, rotate(&s.bank));
    }

    #[test]
    fn oracle_mode_is_fb_step() {
        let g = Game::connectivity(vec![vec![1.0, 2.0], vec![-3.0, 0.5]], 0.2).unwrap();
        let b = OscillatorBank::new(vec![1.1, 2.2, 3.3, 4.4], vec![0.1; 4]).unwrap();
        let p = SyncZoParams::new(0.5, 0.4, 0.2).unwrap();
        let mut s = SyncState::new(vec![0.0; 4], b).unwrap();
        let mut x = vec![0.0; 4];
        for _ in 0..100 {
            s = zo_sync_step(&g, &s, &p, GradientSource::Oracle).unwrap();
            x = fb_step(&g, &x, 0.2, 0.2).unwrap();
            assert_eq!(s.x, x);
        }
    }

    #[test]
    fn params_validation() {
        assert!(SyncZoParams::new(0.0, 0.5, 0.1).is_err());
        assert!(SyncZoParams::new(0.5, 1.5, 0.1).is_err());
        assert!(SyncZoParams::new(0.5, 0.5, 0.0).is_err());
        assert!(SyncZoParams::new(1.0, 1.0, 0.1).is_ok());
    }

    #[test]
    fn frequency_validation_examples() {
        assert!(validate_frequencies_sync(&[1.0, 2.0], FREQ_TOL).is_empty());
        let v = validate_frequencies_sync(&[PI, PI], FREQ_TOL);
        assert!(v.iter().any(|v| v.combination == Combination::Difference));
        let v = validate_frequencies_sync(&[1.0, 2.0 * PI - 1.0], FREQ_TOL);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].combination, Combination::Sum);
        let v = validate_frequencies_sync(&[2.0 * PI], FREQ_TOL);
        assert_eq!(v[0].combination, Combination::Single);
    }

    #[test]
    fn generated_frequencies_are_valid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let w: Vec<f64> = generate_frequencies(&[1; 8], FREQ_TOL, &mut rng).unwrap();
        for (j, f) in w.iter().enumerate() {
            assert!(*f >= (j + 1) as f64 && *f <= j as f64 + 1.5);
        }
        assert!(validate_frequencies_sync(&w, FREQ_TOL).is_empty());
    }

    #[test]
    fn aliasing_margin_is_enforced() {
        use rand::SeedableRng;
        let weights = [6, 6, 4, 4, 3, 3, 6, 6];
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> =
                generate_frequencies_with_margin(&weights, FREQ_TOL, 0.2, &mut rng).unwrap();
            assert!(aliasing_margin(&w) >= 0.2);
            assert!(validate_weighted_frequencies(&w, &weights, FREQ_TOL).is_empty());
        }
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = generate_frequencies(&weights, FREQ_TOL, &mut a).unwrap();
        let y: Vec<f64> = generate_frequencies_with_margin(&weights, FREQ_TOL, 0.0, &mut b).unwrap();
        assert_eq!(x, y);
        assert!((aliasing_margin(&[2.0 * PI + 0.1, 1.0]) - 0.1).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert!(generate_frequencies_with_margin::<f64, _>(&weights, FREQ_TOL, 4.0, &mut rng).is_err());
    }
}
