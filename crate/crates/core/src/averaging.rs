//! Numerical checks for discrete-time averaging: boundary-layer rollouts, averaging
//! residuals and their class-L fits, sine-sum constants, the filter residual, the
//! `η` perturbation bound and Lyapunov traces.
//!
//! Dynamics run in the generic scalar; reports are `f64`.

use std::f64::consts::E;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg;
use crate::scalar::Scalar;
use crate::schedule::TimerSchedule;
use crate::sync::{estimate_pseudogradient, OscillatorBank};

/// `(u, μ) -> vector`.
pub type MapFn<S> = Arc<dyn Fn(&[S], &[S]) -> Vec<S> + Send + Sync>;

/// Compact set the fast state must stay in.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaSet<S> {
    /// `μ ∈ R^{2n}` made of `n` unit-norm pairs.
    UnitCircles,
    Box { lo: Vec<S>, hi: Vec<S> },
}

impl<S: Scalar> OmegaSet<S> {
    pub fn contains(&self, mu: &[S], tol: S) -> bool {
        match self {
            OmegaSet::UnitCircles => {
                mu.len().is_multiple_of(2)
                    && mu
                        .chunks_exact(2)
                        .all(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - S::one()).abs() <= tol)
            }
            OmegaSet::Box { lo, hi } => mu
                .iter()
                .zip(lo)
                .zip(hi)
                .all(|((&m, &l), &h)| m >= l - tol && m <= h + tol),
        }
    }
}

/// Slow map `G`, its average `G_avg` and the fast map `M` of
/// `u⁺ = u + εG(u, μ)`, `μ⁺ = M(u, μ)`.
#[derive(Clone)]
pub struct SystemPair<S: Scalar> {
    pub g: MapFn<S>,
    pub g_avg: MapFn<S>,
    pub m: MapFn<S>,
    pub eps: S,
    pub omega: OmegaSet<S>,
}

impl<S: Scalar> fmt::Debug for SystemPair<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemPair")
            .field("eps", &self.eps)
            .field("omega", &self.omega)
            .finish_non_exhaustive()
    }
}

/// Fast map rotating each `(sin, cos)` pair of `μ` by its own angle.
pub fn rotation_map<S: Scalar>(freqs: Vec<S>) -> MapFn<S> {
    let cs: Vec<(S, S)> = freqs.iter().map(|w| (w.cos(), w.sin())).collect();
    Arc::new(move |_u, mu| {
        mu.chunks_exact(2)
            .zip(&cs)
            .flat_map(|(p, &(c, s))| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
            .collect()
    })
}

impl SystemPair<f64> {
    /// One-dimensional extremum seeking on `J(u) = (u − u*)²`:
    /// `G(u, μ) = −(2/a) J(u + a μ_s) μ_s` with `μ_s` the sin slot, `G_avg(u) = −J'(u)`,
    /// and `M` a rotation by `ω`.
    pub fn dither_example(a: f64, omega: f64, u_star: f64, eps: f64) -> Self {
        let g: MapFn<f64> = Arc::new(move |u, mu| {
            let d = u[0] + a * mu[0] - u_star;
            vec![-(2.0 / a) * d * d * mu[0]]
        });
        let g_avg: MapFn<f64> = Arc::new(move |u, _| vec![-2.0 * (u[0] - u_star)]);
        Self {
            g,
            g_avg,
            m: rotation_map(vec![omega]),
            eps,
            omega: OmegaSet::UnitCircles,
        }
    }
}

impl<S: Scalar> SystemPair<S> {
    /// Dither-based descent on `game`: `G(u, μ) = −2A⁻¹J(u + ADμ)Dμ` with `D` picking the
    /// sin slots, `G_avg(u) = −F(u)`, and `M` rotating pair `j` by `freqs[j]`.
    /// `amps` is per coordinate.
    pub fn zeroth_order(game: &Game<S>, freqs: Vec<S>, amps: Vec<S>, eps: S) -> Result<Self> {
        let m = game.dim();
        for v in [freqs.len(), amps.len()] {
            if v != m {
                return Err(Error::DimensionMismatch { expected: m, got: v });
            }
        }
        if let Some(c) = amps.iter().position(|a| !(*a > S::zero())) {
            return Err(Error::ZeroAmplitude { coordinate: c });
        }
        let g_game = game.clone();
        let g: MapFn<S> = Arc::new(move |u, mu| {
            let d: Vec<S> = mu.iter().step_by(2).copied().collect();
            let probe: Vec<S> = u.iter().zip(&amps).zip(&d).map(|((&x, &a), &di)| x + a * di).collect();
            let mut out = vec![S::zero(); u.len()];
            for i in 0..g_game.agent_count() {
                let j = g_game.cost_unchecked(i, &probe);
                for c in g_game.agent_range(i) {
                    out[c] = -(S::lit(2.0) / amps[c]) * j * d[c];
                }
            }
            out
        });
        let avg_game = game.clone();
        let g_avg: MapFn<S> = Arc::new(move |u, _| {
            avg_game.pseudogradient_unchecked(u).into_iter().map(|v| -v).collect()
        });
        Ok(Self {
            g,
            g_avg,
            m: rotation_map(freqs),
            eps,
            omega: OmegaSet::UnitCircles,
        })
    }
}

/// Boundary layer `μ(k + 1) = M(u, μ(k))` with `u` frozen; returns `μ(0..=n)`.
pub fn boundary_layer_rollout<S: Scalar>(
    pair: &SystemPair<S>,
    u_fixed: &[S],
    mu0: &[S],
    n: usize,
) -> Result<Vec<Vec<S>>> {
    let tol = S::lit(1e-9);
    if !pair.omega.contains(mu0, tol) {
        return Err(Error::EscapedOmega { step: 0 });
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(mu0.to_vec());
    for k in 1..=n {
        let next = (pair.m)(u_fixed, &out[k - 1]);
        if !pair.omega.contains(&next, tol) {
            return Err(Error::EscapedOmega { step: k });
        }
        out.push(next);
    }
    Ok(out)
}

/// Least-squares fit `value ≈ C·N^exponent` in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub c: f64,
    pub exponent: f64,
    pub r2: f64,
}

impl PowerFit {
    /// `None` with fewer than two positive points.
    pub fn fit(points: &[(usize, f64)]) -> Option<Self> {
        let logs: Vec<(f64, f64)> = points
            .iter()
            .filter(|(n, v)| *n > 0 && *v > 0.0)
            .map(|&(n, v)| ((n as f64).ln(), v.ln()))
            .collect();
        if logs.len() < 2 {
            return None;
        }
        let len = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / len;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / len;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
        Some(Self {
            c: intercept.exp(),
            exponent: slope,
            r2,
        })
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.c * n.powf(self.exponent)
    }
}

/// `(N, residual)` samples with their power-law fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCurve {
    pub points: Vec<(usize, f64)>,
    pub fit: Option<PowerFit>,
}

impl ResidualCurve {
    pub fn new(points: Vec<(usize, f64)>) -> Self {
        let fit = PowerFit::fit(&points);
        Self { points, fit }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 < w[0].1)
    }

    /// Strictly decreasing over the grid with a negative fitted exponent.
    pub fn looks_class_l(&self) -> bool {
        self.is_strictly_decreasing() && self.fit.is_some_and(|f| f.exponent < 0.0)
    }

    /// `N,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "N,value")?;
        for (n, v) in &self.points {
            writeln!(out, "{n},{v:.16e}")?;
        }
        Ok(())
    }

    /// `key = value` summary of the fit.
    pub fn summary(&self) -> String {
        match self.fit {
            Some(f) => format!("C = {:.6e}\nexponent = {:.6}\nr2 = {:.6}\n", f.c, f.exponent, f.r2),
            None => "C = nan\nexponent = nan\nr2 = nan\n".to_string(),
        }
    }
}

/// How a residual at `N` is read off the running average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Envelope {
    /// The value at exactly `N`.
    #[default]
    Point,
    /// The largest value over `N' ∈ [N, 2N)`. Partial sums of sinusoids can cancel at
    /// isolated `N`; the envelope tracks the decay rate without those dips.
    Dyadic,
}

/// Residuals of running averages of `terms(i)` for each `N` in `n_list`.
fn running_average_residuals<S: Scalar>(
    n_list: &[usize],
    envelope: Envelope,
    mut term: impl FnMut(usize) -> Result<Vec<S>>,
) -> Result<Vec<(usize, f64)>> {
    let horizon = match envelope {
        Envelope::Point => n_list.iter().copied().max().unwrap_or(0),
        Envelope::Dyadic => 2 * n_list.iter().copied().max().unwrap_or(0),
    };
    let mut sum: Vec<S> = Vec::new();
    let mut norms = Vec::with_capacity(horizon + 1);
    norms.push(0.0);
    for i in 0..horizon {
        let t = term(i)?;
        if sum.is_empty() {
            sum = vec![S::zero(); t.len()];
        }
        for (s, v) in sum.iter_mut().zip(&t) {
            *s = *s + *v;
        }
        norms.push(linalg::norm(&sum).to_f64_lossy() / (i + 1) as f64);
    }
    Ok(n_list
        .iter()
        .map(|&n| {
            let v = match envelope {
                Envelope::Point => norms[n],
                Envelope::Dyadic => norms[n..2 * n].iter().copied().fold(0.0, f64::max),
            };
            (n, v)
        })
        .collect())
}

/// `‖(1/N) Σ_{i<N} [G − G_avg](u, μ_bl(i))‖` along the boundary layer from `μ0`.
pub fn averaging_residual<S: Scalar>(
    pair: &SystemPair<S>,
    u_fixed: &[S],
    mu0: &[S],
    n_list: &[usize],
    envelope: Envelope,
) -> Result<ResidualCurve> {
    check_grid(n_list)?;
    let mut mu = mu0.to_vec();
    let tol = S::lit(1e-9);
    let points = running_average_residuals(n_list, envelope, |i| {
        if !pair.omega.contains(&mu, tol) {
            return Err(Error::EscapedOmega { step: i });
        }
        let g = (pair.g)(u_fixed, &mu);
        let ga = (pair.g_avg)(u_fixed, &mu);
        mu = (pair.m)(u_fixed, &mu);
        Ok(linalg::sub(&g, &ga))
    })?;
    Ok(ResidualCurve::new(points))
}

fn check_grid(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "N grid must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Closed-form bounds on partial sums of sinusoids:
/// `|Σ cos(φk)| ≤ c1`, `|Σ sin(φk)| ≤ c2`, `|Σ sin(φ_i k) sin(φ_l k)| ≤ c3` and
/// `|Σ (sin²(φk) − ½)| ≤ c4`, each the largest over the set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSumConstants {
    pub c1: f64,
    pub c2: f64,
    /// `None` for a single frequency (no pairs).
    pub c3: Option<f64>,
    /// `None` when some `2φ ∈ 2πZ`.
    pub c4: Option<f64>,
}

fn chord(phi: f64) -> f64 {
    // |e^{jφ} − 1| = 2|sin(φ/2)|
    2.0 * (phi / 2.0).sin().abs()
}

/// Resonance threshold below which a constant is reported as undefined.
const RESONANCE_TOL: f64 = 1e-12;

pub fn sine_sum_constants(phis: &[f64]) -> Result<SineSumConstants> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("no frequencies".into()));
    }
    let mut c1: f64 = 0.0;
    let mut c4: Option<f64> = Some(0.0);
    for &phi in phis {
        let d = chord(phi);
        if d <= RESONANCE_TOL {
            return Err(Error::Resonant {
                value: phi,
                distance: phi.dist_to_two_pi_lattice(),
            });
        }
        c1 = c1.max(2.0 / d);
        let d2 = chord(2.0 * phi);
        c4 = match (c4, d2 > RESONANCE_TOL) {
            (Some(c), true) => Some(c.max(1.0 / d2)),
            _ => None,
        };
    }
    let mut c3: Option<f64> = None;
    for a in 0..phis.len() {
        for b in a + 1..phis.len() {
            for v in [phis[a] + phis[b], phis[a] - phis[b]] {
                let d = chord(v);
                if d <= RESONANCE_TOL {
                    return Err(Error::Resonant {
                        value: v,
                        distance: v.dist_to_two_pi_lattice(),
                    });
                }
                c3 = Some(c3.unwrap_or(0.0).max(2.0 / d));
            }
        }
    }
    Ok(SineSumConstants { c1, c2: c1, c3, c4 })
}

/// Largest absolute partial sums over `N ≤ n_max`, in the order of the constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSumMaxima {
    pub cos: f64,
    pub sin: f64,
    pub sin_sin: Option<f64>,
    pub sin_sq: f64,
}

/// Brute-force maxima of the partial sums bounded by [`sine_sum_constants`].
pub fn sine_sum_maxima(phis: &[f64], n_max: usize) -> SineSumMaxima {
    let n = phis.len();
    let mut cos_sum = vec![0.0; n];
    let mut sin_sum = vec![0.0; n];
    let mut sq_sum = vec![0.0; n];
    let mut cross = vec![0.0; n * n];
    let mut out = SineSumMaxima {
        cos: 0.0,
        sin: 0.0,
        sin_sin: (n > 1).then_some(0.0),
        sin_sq: 0.0,
    };
    let mut s = vec![0.0; n];
    for k in 0..n_max {
        for (j, &phi) in phis.iter().enumerate() {
            let (sv, cv) = (phi * k as f64).sin_cos();
            s[j] = sv;
            cos_sum[j] += cv;
            sin_sum[j] += sv;
            sq_sum[j] += sv * sv - 0.5;
            out.cos = out.cos.max(cos_sum[j].abs());
            out.sin = out.sin.max(sin_sum[j].abs());
            out.sin_sq = out.sin_sq.max(sq_sum[j].abs());
        }
        for a in 0..n {
            for b in a + 1..n {
                let c = &mut cross[a * n + b];
                *c += s[a] * s[b];
                if let Some(m) = out.sin_sin.as_mut() {
                    *m = m.max(c.abs());
                }
            }
        }
    }
    out
}

/// Residual of the dither estimator averaged along the oscillator orbit at frozen `x`:
/// `‖(1/N) Σ_{k<N} 2A⁻¹J(x + ADμ(k))Dμ(k) − F(x)‖`.
pub fn estimator_residual<S: Scalar>(
    game: &Game<S>,
    x_fixed: &[S],
    bank: &OscillatorBank<S>,
    n_list: &[usize],
    envelope: Envelope,
) -> Result<ResidualCurve> {
    check_grid(n_list)?;
    let f = game.pseudogradient(x_fixed)?;
    let mut b = bank.clone();
    let points = running_average_residuals(n_list, envelope, |_| {
        let e = estimate_pseudogradient(game, x_fixed, &b)?;
        b.rotate_all();
        Ok(linalg::sub(&e, &f))
    })?;
    Ok(ResidualCurve::new(points))
}

/// Estimator residual at a single `N` for each common amplitude in `amps`.
/// Returns `(ā, residual)` pairs.
pub fn amplitude_sweep<S: Scalar>(
    game: &Game<S>,
    x_fixed: &[S],
    freqs: &[S],
    phases: &[S],
    amps: &[S],
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    amps.iter()
        .map(|&a| {
            let bank =
                OscillatorBank::with_phases(freqs.to_vec(), vec![a; freqs.len()], phases)?;
            let curve = estimator_residual(game, x_fixed, &bank, &[n], Envelope::Point)?;
            Ok((a.to_f64_lossy(), curve.points[0].1))
        })
        .collect()
}

/// Nonnegative least-squares fit of `value ≈ K1/N + K2·ā` over `(N, ā, value)` samples.
pub fn fit_k1_k2(samples: &[(usize, f64, f64)]) -> (f64, f64) {
    let cols: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&(n, a, v)| (1.0 / n as f64, a, v))
        .collect();
    let one = |sel: fn(&(f64, f64, f64)) -> f64| -> f64 {
        let num: f64 = cols.iter().map(|c| sel(c) * c.2).sum();
        let den: f64 = cols.iter().map(|c| sel(c) * sel(c)).sum();
        if den > 0.0 {
            (num / den).max(0.0)
        } else {
            0.0
        }
    };
    let (s11, s12, s22, s1y, s2y) = cols.iter().fold((0.0, 0.0, 0.0, 0.0, 0.0), |acc, c| {
        (
            acc.0 + c.0 * c.0,
            acc.1 + c.0 * c.1,
            acc.2 + c.1 * c.1,
            acc.3 + c.0 * c.2,
            acc.4 + c.1 * c.2,
        )
    });
    let det = s11 * s22 - s12 * s12;
    if det.abs() > 1e-300 {
        let k1 = (s1y * s22 - s2y * s12) / det;
        let k2 = (s11 * s2y - s12 * s1y) / det;
        if k1 >= 0.0 && k2 >= 0.0 {
            return (k1, k2);
        }
    }
    // active set: one coefficient pinned at zero
    let only1 = (one(|c| c.0), 0.0);
    let only2 = (0.0, one(|c| c.1));
    let sse = |k: (f64, f64)| -> f64 {
        cols.iter()
            .map(|c| (k.0 * c.0 + k.1 * c.1 - c.2).powi(2))
            .sum()
    };
    if sse(only1) <= sse(only2) {
        only1
    } else {
        only2
    }
}

/// Filter residual at frozen `x` with its closed-form bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResidual {
    pub curve: ResidualCurve,
    /// `γ‖ξ0 − F(x)‖ / (Nα)` for each grid point.
    pub bounds: Vec<f64>,
}

impl FilterResidual {
    /// Largest `value − bound` over the grid.
    pub fn worst_excess(&self) -> f64 {
        self.curve
            .points
            .iter()
            .zip(&self.bounds)
            .map(|(p, b)| p.1 - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `‖(γ/N) Σ_{i<N} (ξ_bl(i) − F(x))‖` for the filter boundary layer
/// `ξ⁺ = (1 − α)ξ + αF(x)`.
pub fn filter_residual<S: Scalar>(
    game: &Game<S>,
    x_fixed: &[S],
    xi0: &[S],
    alpha: S,
    gamma: S,
    n_list: &[usize],
) -> Result<FilterResidual> {
    let f = game.pseudogradient(x_fixed)?;
    filter_residual_from(&f, xi0, alpha, gamma, n_list)
}

/// [`filter_residual`] with the pseudogradient value supplied directly.
pub fn filter_residual_from<S: Scalar>(
    f: &[S],
    xi0: &[S],
    alpha: S,
    gamma: S,
    n_list: &[usize],
) -> Result<FilterResidual> {
    check_grid(n_list)?;
    if !(alpha > S::zero() && alpha <= S::one()) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1]".into()));
    }
    if f.len() != xi0.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: xi0.len(),
        });
    }
    let mut dev = linalg::sub(xi0, f);
    let init = linalg::norm(&dev).to_f64_lossy();
    let horizon = *n_list.last().unwrap();
    let mut sum = vec![S::zero(); f.len()];
    let mut values = vec![0.0; horizon + 1];
    for i in 0..horizon {
        for (s, d) in sum.iter_mut().zip(&dev) {
            *s = *s + *d;
        }
        values[i + 1] = (gamma * linalg::norm(&sum)).to_f64_lossy() / (i + 1) as f64;
        for d in dev.iter_mut() {
            *d = (S::one() - alpha) * *d;
        }
    }
    let (g, a) = (gamma.to_f64_lossy(), alpha.to_f64_lossy());
    Ok(FilterResidual {
        curve: ResidualCurve::new(n_list.iter().map(|&n| (n, values[n])).collect()),
        bounds: n_list.iter().map(|&n| g * init / (n as f64 * a)).collect(),
    })
}

/// Class-L envelope `σ̂(N) = C/N` fitted to averaging residuals, with `σ̂(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaFit {
    pub c: f64,
    pub sigma0: f64,
}

impl SigmaFit {
    pub fn at(&self, n: usize) -> f64 {
        if n == 0 {
            self.sigma0
        } else {
            (self.c / n as f64).min(self.sigma0)
        }
    }

    /// `min_L (1 + ε + e)σ̂(L) + 3εLσ̂(0)` and the minimizing window `L`.
    pub fn eta_bound(&self, eps: f64) -> (f64, usize) {
        let value = |l: usize| (1.0 + eps + E) * self.at(l) + 3.0 * eps * l as f64 * self.sigma0;
        let guess = (((1.0 + eps + E) * self.c) / (3.0 * eps * self.sigma0)).sqrt();
        let hi = (guess.ceil() as usize).saturating_mul(4).max(4);
        (1..=hi)
            .map(|l| (value(l), l))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    }
}

/// Fits `σ̂` over a set of frozen slow states and boundary-layer initial conditions:
/// `C = max N·residual(N)` over `N ≤ n_max`, `σ̂(0) = max(C, sup ‖G − G_avg‖)`.
pub fn fit_sigma<S: Scalar>(
    pair: &SystemPair<S>,
    samples: &[(Vec<S>, Vec<S>)],
    n_max: usize,
) -> Result<SigmaFit> {
    let mut c: f64 = 0.0;
    let mut single: f64 = 0.0;
    for (u, mu0) in samples {
        let mut mu = mu0.clone();
        let mut sum: Vec<S> = Vec::new();
        for _ in 0..n_max {
            let d = linalg::sub(&(pair.g)(u, &mu), &(pair.g_avg)(u, &mu));
            single = single.max(linalg::norm(&d).to_f64_lossy());
            if sum.is_empty() {
                sum = vec![S::zero(); d.len()];
            }
            for (s, v) in sum.iter_mut().zip(&d) {
                *s = *s + *v;
            }
            // N · (1/N)‖Σ‖ = ‖Σ‖
            c = c.max(linalg::norm(&sum).to_f64_lossy());
            mu = (pair.m)(u, &mu);
        }
    }
    Ok(SigmaFit {
        c,
        sigma0: c.max(single),
    })
}

/// One row of the `η` table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaRow {
    pub eps: f64,
    pub sup_eta: f64,
    pub bound: f64,
    pub window: usize,
}

/// Runs the coupled system `u⁺ = u + εG(u, μ)`, `μ⁺ = M(u, μ)` for each `ε` and tracks
/// `η⁺ = (1 − ε)η + ε[G_avg − G](u, μ)` from `η(0) = 0` over `steps` jumps. The bound
/// column is `min_L (1 + ε + e)σ̂(L) + 3εLσ̂(0)` from `sigma`.
pub fn eta_rollout<S: Scalar>(
    pair: &SystemPair<S>,
    u0: &[S],
    mu0: &[S],
    steps: usize,
    eps_list: &[f64],
    sigma: &SigmaFit,
) -> Result<Vec<EtaRow>> {
    eps_list
        .iter()
        .map(|&eps| {
            let e = S::lit(eps);
            let mut u = u0.to_vec();
            let mut mu = mu0.to_vec();
            let mut eta = vec![S::zero(); u0.len()];
            let mut sup: f64 = 0.0;
            for _ in 0..steps {
                let g = (pair.g)(&u, &mu);
                let ga = (pair.g_avg)(&u, &mu);
                for ((h, &gv), &gav) in eta.iter_mut().zip(&g).zip(&ga) {
                    *h = (S::one() - e) * *h + e * (gav - gv);
                }
                sup = sup.max(linalg::norm(&eta).to_f64_lossy());
                mu = (pair.m)(&u, &mu);
                for (ui, &gv) in u.iter_mut().zip(&g) {
                    *ui = *ui + e * gv;
                }
                if !linalg::all_finite(&u) {
                    return Err(Error::NonFinite("slow state"));
                }
            }
            let (bound, window) = sigma.eta_bound(eps);
            Ok(EtaRow {
                eps,
                sup_eta: sup,
                bound,
                window,
            })
        })
        .collect()
}

/// Lyapunov values along a trajectory and the steps where `V` rose outside the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub values: Vec<f64>,
    /// Indices `k` with `V(k + 1) > V(k)` while the state at `k` lies outside the ball.
    pub violations: Vec<usize>,
    /// Transitions starting outside the ball.
    pub checked: usize,
}

impl LyapunovReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violations.len() as f64 / self.checked as f64
        }
    }
}

/// Evaluates `v` along `trajectory` and flags increases that start at states where
/// `outside` holds. `slack` absorbs rounding in flat stretches.
pub fn lyapunov_trace<S: Scalar>(
    trajectory: &[Vec<S>],
    v: impl Fn(&[S]) -> f64,
    outside: impl Fn(&[S]) -> bool,
    slack: f64,
) -> LyapunovReport {
    let values: Vec<f64> = trajectory.iter().map(|x| v(x)).collect();
    let mut violations = Vec::new();
    let mut checked = 0;
    for k in 0..values.len().saturating_sub(1) {
        if outside(&trajectory[k]) {
            checked += 1;
            if values[k + 1] > values[k] + slack {
                violations.push(k);
            }
        }
    }
    LyapunovReport {
        values,
        violations,
        checked,
    }
}

/// Squared distance to `x*`.
pub fn squared_distance<S: Scalar>(x_star: &[S]) -> impl Fn(&[S]) -> f64 + '_ {
    move |x| {
        let d = linalg::dist(x, x_star).to_f64_lossy();
        d * d
    }
}

/// Exponential sums with the cross-agent floor counter and their closed-form bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncSineSum {
    /// `(l, |sum over r_i·l terms|)`.
    pub curve: ResidualCurve,
    /// `2r_i / |1 − e^{jθ}|` with `θ = ω1 r_i + ω2 r_j`; `None` at resonance.
    pub bound: Option<f64>,
}

impl AsyncSineSum {
    /// Whether the magnitudes grow roughly in proportion to `l`.
    pub fn grows_linearly(&self) -> bool {
        self.curve.fit.is_some_and(|f| f.exponent > 0.9)
    }
}

/// `|Σ_{v<r_i l} e^{j(ω1 v + ω2 ⌊Δ + (p_i/p_j) v⌋)}|` for each `l`.
pub fn async_sine_sum_check(
    schedule: &TimerSchedule,
    omega1: f64,
    omega2: f64,
    i: usize,
    j: usize,
    l_list: &[usize],
) -> Result<AsyncSineSum> {
    check_grid(l_list)?;
    let n = schedule.agent_count();
    if i >= n || j >= n {
        return Err(Error::AgentOutOfRange {
            index: i.max(j),
            agents: n,
        });
    }
    let (r_i, r_j) = (schedule.r_i()[i], schedule.r_i()[j]);
    let ratio = schedule.ratios()[i] as f64 / schedule.ratios()[j] as f64;
    let tau = schedule.tau_hat();
    let delta = if i == j { 0.0 } else { tau[j] - tau[i] * ratio };
    let horizon = r_i * l_list.last().unwrap();
    let (mut re, mut im) = (0.0, 0.0);
    let mut mags = vec![0.0; horizon + 1];
    for v in 0..horizon {
        let kappa = if i == j {
            v as f64
        } else {
            (delta + ratio * v as f64).floor()
        };
        let (s, c) = (omega1 * v as f64 + omega2 * kappa).sin_cos();
        re += c;
        im += s;
        mags[v + 1] = re.hypot(im);
    }
    let theta = omega1 * r_i as f64 + omega2 * r_j as f64;
    let d = chord(theta);
    let bound = (d > RESONANCE_TOL).then(|| 2.0 * r_i as f64 / d);
    Ok(AsyncSineSum {
        curve: ResidualCurve::new(l_list.iter().map(|&l| (l, mags[r_i * l])).collect()),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeroth_order_pair_matches_scalar_example() {
        let cost: crate::game::CostFn<f64> = Arc::new(|_, x| (x[0] - 1.0) * (x[0] - 1.0));
        let game = Game::new(vec![1], cost, 2.0, 2.0).unwrap();
        let a = SystemPair::zeroth_order(&game, vec![1.3], vec![0.2], 0.1).unwrap();
        let b = SystemPair::dither_example(0.2, 1.3, 1.0, 0.1);
        for (u, phi) in [(0.3, 0.1), (-1.0, 2.0), (2.5, 4.0)] {
            let mu = [f64::sin(phi), f64::cos(phi)];
            assert!(((a.g)(&[u], &mu)[0] - (b.g)(&[u], &mu)[0]).abs() < 1e-12);
            assert!(((a.g_avg)(&[u], &mu)[0] - (b.g_avg)(&[u], &mu)[0]).abs() < 1e-6);
            assert_eq!((a.m)(&[u], &mu), (b.m)(&[u], &mu));
        }
    }

    fn identity_pair() -> SystemPair<f64> {
        let z: MapFn<f64> = Arc::new(|_, _| vec![0.0]);
        SystemPair {
            g: z.clone(),
            g_avg: z,
            m: Arc::new(|_, mu| mu.to_vec()),
            eps: 0.1,
            omega: OmegaSet::UnitCircles,
        }
    }

    #[test]
    fn quarter_turn_orbit_closes() {
        let p = SystemPair::dither_example(0.1, PI / 2.0, 0.0, 0.1);
        let traj = boundary_layer_rollout(&p, &[0.0], &[0.0, 1.0], 4).unwrap();
        assert!((traj[4][0]).abs() < 1e-12 && (traj[4][1] - 1.0).abs() < 1e-12);
        for mu in &traj {
            assert!(((mu[0] * mu[0] + mu[1] * mu[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_map_is_constant() {
        let traj = boundary_layer_rollout(&identity_pair(), &[0.0], &[0.6, 0.8], 5).unwrap();
        assert!(traj.iter().all(|m| m == &vec![0.6, 0.8]));
    }

    #[test]
    fn escape_is_reported() {
        let mut p = identity_pair();
        p.m = Arc::new(|_, mu| vec![mu[0] * 2.0, mu[1]]);
        assert!(matches!(
            boundary_layer_rollout(&p, &[0.0], &[0.6, 0.8], 5),
            Err(Error::EscapedOmega { step: 1 })
        ));
    }

    #[test]
    fn equal_maps_have_zero_residual() {
        let c = averaging_residual(&identity_pair(), &[0.0], &[0.0, 1.0], &[1, 10, 100], Envelope::Point)
            .unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_residual_within_c1() {
        let mut p = identity_pair();
        p.g = Arc::new(|_, mu| vec![mu[0]]);
        p.m = rotation_map(vec![1.0]);
        let ns: Vec<usize> = (1..200).collect();
        let c = averaging_residual(&p, &[0.0], &[0.0, 1.0], &ns, Envelope::Point).unwrap();
        let c1 = 2.0 / chord(1.0);
        assert!((c1 - 2.0858).abs() < 1e-4);
        for (n, v) in c.points {
            assert!(v <= c1 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn constants_at_pi() {
        let k = sine_sum_constants(&[PI]).unwrap();
        assert!((k.c1 - 1.0).abs() < 1e-15);
        assert!(k.c3.is_none() && k.c4.is_none());
        let m = sine_sum_maxima(&[PI], 1000);
        assert!(m.sin < 1e-9);
    }

    #[test]
    fn cos_partial_sums_within_c1() {
        let k = sine_sum_constants(&[1.0]).unwrap();
        let m = sine_sum_maxima(&[1.0], 100_000);
        assert!(m.cos <= k.c1 && m.sin <= k.c2 && m.sin_sq <= k.c4.unwrap());
    }

    #[test]
    fn resonant_constants_rejected() {
        assert!(matches!(sine_sum_constants(&[2.0 * PI]), Err(Error::Resonant { .. })));
        assert!(matches!(
            sine_sum_constants(&[1.0, 2.0 * PI - 1.0]),
            Err(Error::Resonant { .. })
        ));
    }

    #[test]
    fn filter_residual_by_hand() {
        let r = filter_residual_from(&[0.0], &[1.0], 0.5, 1.0, &[10]).unwrap();
        let want = (2.0 - 2f64.powi(-9)) / 10.0;
        assert!((r.curve.points[0].1 - want).abs() < 1e-15);
        assert!(r.worst_excess() <= 0.0);
    }

    #[test]
    fn filter_residual_zero_when_started_at_f() {
        let r = filter_residual_from(&[0.3, -0.2], &[0.3, -0.2], 0.3, 0.7, &[1, 5, 50]).unwrap();
        assert!(r.curve.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filter_residual_alpha_one() {
        let r = filter_residual_from(&[0.0], &[2.0], 1.0, 1.0, &[1, 4, 9]).unwrap();
        for ((n, v), b) in r.curve.points.iter().zip(&r.bounds) {
            assert!((v - 2.0 / *n as f64).abs() < 1e-15);
            assert!((v - b).abs() < 1e-15);
        }
    }

    #[test]
    fn power_fit_recovers_inverse() {
        let pts: Vec<(usize, f64)> = [10, 100, 1000].iter().map(|&n| (n, 3.0 / n as f64)).collect();
        let f = PowerFit::fit(&pts).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-12 && (f.c - 3.0).abs() < 1e-9 && f.r2 > 0.999);
    }

    #[test]
    fn residual_curve_csv() {
        let c = ResidualCurve::new(vec![(1, 0.5), (2, 0.25)]);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("N,value"));
        assert_eq!(s.lines().count(), 3);
        assert!(c.looks_class_l());
    }

    #[test]
    fn k_fit_recovers_coefficients() {
        let mut s = Vec::new();
        for n in [100, 1000] {
            for a in [0.1, 0.05] {
                s.push((n, a, 2.0 / n as f64 + 0.5 * a));
            }
        }
        let (k1, k2) = fit_k1_k2(&s);
        assert!((k1 - 2.0).abs() < 1e-9 && (k2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn eta_of_exact_average_stays_zero() {
        let mut p = SystemPair::dither_example(0.1, 1.0, 0.0, 0.1);
        p.g = p.g_avg.clone();
        let sigma = SigmaFit { c: 1.0, sigma0: 1.0 };
        let rows = eta_rollout(&p, &[1.0], &[0.0, 1.0], 100, &[0.1], &sigma).unwrap();
        assert_eq!(rows[0].sup_eta, 0.0);
    }

    #[test]
    fn lyapunov_flags_increase_only_outside() {
        let traj = vec![vec![2.0], vec![1.0], vec![1.5], vec![0.1], vec![0.2]];
        let r = lyapunov_trace(&traj, |x| x[0] * x[0], |x| x[0].abs() >= 0.5, 0.0);
        assert_eq!(r.violations, vec![1]);
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn async_sum_equal_periods_is_plain_sum() {
        let s = crate::schedule::build_schedule(&[1.0, 1.0], &[0.0, 0.5]).unwrap();
        let r = async_sine_sum_check(&s, 1.0, 2.0, 0, 1, &[10, 100, 1000]).unwrap();
        let b = r.bound.unwrap();
        assert!(r.curve.values().iter().all(|&v| v <= b));
    }

    #[test]
    fn async_sum_resonance_grows() {
        let s = crate::schedule::build_schedule(&[0.02, 0.03], &[0.0, 0.001]).unwrap();
        // r = (3, 2); θ = 3ω1 + 2ω2 = 2π
        let w1 = 0.5;
        let w2 = (2.0 * PI - 3.0 * w1) / 2.0;
        let r = async_sine_sum_check(&s, w1, w2, 0, 1, &[10, 100, 1000]).unwrap();
        assert!(r.bound.is_none());
        assert!(r.grows_linearly());
    }
}
