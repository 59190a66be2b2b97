//! Games: per-agent costs, the pseudogradient, local constraint sets and reference
//! equilibrium solvers.
//!
//! A game with `N` agents stacks the decision variables `x = col(x_1, …, x_N)` into a
//! single vector of length `m = Σ m_i`. Agent `i` owns the coordinate block
//! [`Game::agent_range`]. The pseudogradient is `F(x) = col(∇_{x_i} J_i(x))`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Cost oracle `(agent, x) -> J_agent(x)`.
pub type CostFn<S> = Arc<dyn Fn(usize, &[S]) -> S + Send + Sync>;
/// Analytic partial gradient oracle `(agent, x) -> ∇_{x_agent} J_agent(x)`.
pub type GradFn<S> = Arc<dyn Fn(usize, &[S]) -> Vec<S> + Send + Sync>;

/// Closed convex set onto which one agent (or a whole collective vector) is projected.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet<S> {
    WholeSpace,
    Box { lo: Vec<S>, hi: Vec<S> },
    Ball { center: Vec<S>, radius: S },
}

impl<S: Scalar> ConstraintSet<S> {
    pub fn new_box(lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument("box needs lo <= hi componentwise".into()));
        }
        Ok(ConstraintSet::Box { lo, hi })
    }

    pub fn new_ball(center: Vec<S>, radius: S) -> Result<Self> {
        if !(radius > S::zero()) || !radius.is_finite() {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        Ok(ConstraintSet::Ball { center, radius })
    }

    /// Dimension the set lives in; `None` for the whole space, which fits any dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ConstraintSet::WholeSpace => None,
            ConstraintSet::Box { lo, .. } => Some(lo.len()),
            ConstraintSet::Ball { center, .. } => Some(center.len()),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConstraintSet::WholeSpace => false,
            ConstraintSet::Box { lo, hi } => lo.iter().chain(hi).all(|v| v.is_finite()),
            ConstraintSet::Ball { .. } => true,
        }
    }

    /// Euclidean projection, written into `v`.
    pub fn project_in_place(&self, v: &mut [S]) {
        match self {
            ConstraintSet::WholeSpace => {}
            ConstraintSet::Box { lo, hi } => {
                for ((x, &l), &h) in v.iter_mut().zip(lo).zip(hi) {
                    *x = x.max(l).min(h);
                }
            }
            ConstraintSet::Ball { center, radius } => {
                let d = linalg::dist(v, center);
                if d > *radius {
                    let scale = *radius / d;
                    for (x, &c) in v.iter_mut().zip(center) {
                        *x = c + (*x - c) * scale;
                    }
                }
            }
        }
    }

    pub fn project(&self, v: &[S]) -> Vec<S> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }

    /// How far `v` is outside the set (zero inside).
    pub fn violation(&self, v: &[S]) -> S {
        match self {
            ConstraintSet::WholeSpace => S::zero(),
            ConstraintSet::Box { lo, hi } => v
                .iter()
                .zip(lo)
                .zip(hi)
                .map(|((&x, &l), &h)| (l - x).max(x - h).max(S::zero()))
                .fold(S::zero(), S::max),
            ConstraintSet::Ball { center, radius } => {
                (linalg::dist(v, center) - *radius).max(S::zero())
            }
        }
    }

    pub fn contains(&self, v: &[S], tol: S) -> bool {
        self.violation(v) <= tol
    }

    /// Uniform sample from a bounded set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<S>> {
        match self {
            ConstraintSet::WholeSpace => Err(Error::InvalidArgument(
                "cannot sample from an unbounded region".into(),
            )),
            ConstraintSet::Box { lo, hi } => {
                if !self.is_bounded() {
                    return Err(Error::InvalidArgument(
                        "cannot sample from an unbounded box".into(),
                    ));
                }
                Ok(lo
                    .iter()
                    .zip(hi)
                    .map(|(&l, &h)| l + (h - l) * S::lit(rng.random::<f64>()))
                    .collect())
            }
            ConstraintSet::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let rad = radius.to_f64_lossy() * rng.random::<f64>().powf(1.0 / d as f64);
                Ok(center
                    .iter()
                    .zip(&dir)
                    .map(|(&c, &u)| c + S::lit(u / n * rad))
                    .collect())
            }
        }
    }
}

/// Free-function form of [`ConstraintSet::project`].
pub fn project<S: Scalar>(set: &ConstraintSet<S>, v: &[S]) -> Vec<S> {
    set.project(v)
}

/// What is known about the game's structure beyond the cost oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum GameKind<S> {
    General,
    /// `F(x) = Q x + q` with symmetric diagonal blocks.
    Quadratic,
    /// Source-seeking with pairwise attraction between agents.
    Connectivity { sources: Vec<Vec<S>>, coupling: S },
}

#[derive(Clone)]
pub struct Game<S: Scalar> {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    cost: CostFn<S>,
    grad: Option<GradFn<S>>,
    constraints: Vec<ConstraintSet<S>>,
    mu_f: S,
    lip_l: S,
    affine: Option<(Matrix<S>, Vec<S>)>,
    kind: GameKind<S>,
}

impl<S: Scalar> fmt::Debug for Game<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("dims", &self.dims)
            .field("kind", &self.kind)
            .field("mu_f", &self.mu_f)
            .field("lip_l", &self.lip_l)
            .field("analytic_grad", &self.grad.is_some())
            .field("constraints", &self.constraints)
            .finish()
    }
}

impl<S: Scalar> Game<S> {
    /// A game given only by its cost oracle and regularity constants.
    pub fn new(dims: Vec<usize>, cost: CostFn<S>, mu_f: S, lip_l: S) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "a game needs at least one agent and every agent at least one coordinate".into(),
            ));
        }
        if !(mu_f > S::zero()) || !(lip_l > S::zero()) {
            return Err(Error::InvalidArgument("mu_f and L must be positive".into()));
        }
        if mu_f > lip_l {
            return Err(Error::InvalidArgument(format!(
                "strong monotonicity constant {mu_f} exceeds the Lipschitz constant {lip_l}"
            )));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        let constraints = vec![ConstraintSet::WholeSpace; dims.len()];
        Ok(Self {
            dims,
            offsets,
            cost,
            grad: None,
            constraints,
            mu_f,
            lip_l,
            affine: None,
            kind: GameKind::General,
        })
    }

    pub fn with_gradient(mut self, grad: GradFn<S>) -> Self {
        self.grad = Some(grad);
        self
    }

    /// Per-agent local constraint sets.
    pub fn with_constraints(mut self, constraints: Vec<ConstraintSet<S>>) -> Result<Self> {
        if constraints.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: constraints.len(),
            });
        }
        for (set, &d) in constraints.iter().zip(&self.dims) {
            if let Some(sd) = set.dim() {
                if sd != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: sd,
                    });
                }
            }
        }
        self.constraints = constraints;
        Ok(self)
    }

    /// Quadratic game with pseudogradient `F(x) = Q x + q`:
    /// `J_i(x) = ½ x_iᵀ Q_ii x_i + Σ_{j≠i} x_iᵀ Q_ij x_j + q_iᵀ x_i`.
    ///
    /// The diagonal blocks must be symmetric; `mu_f` and `L` are the smallest eigenvalue
    /// of `(Q + Qᵀ)/2` and the spectral norm of `Q`.
    pub fn quadratic(dims: Vec<usize>, q: Matrix<S>, offset: Vec<S>) -> Result<Self> {
        let m: usize = dims.iter().sum();
        if q.rows() != m || q.cols() != m || offset.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: q.rows(),
            });
        }
        let mut offsets = vec![0];
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        for w in offsets.windows(2) {
            for a in w[0]..w[1] {
                for b in w[0]..w[1] {
                    let tol = S::lit(1e-12) * (S::one() + q[(a, b)].abs());
                    if (q[(a, b)] - q[(b, a)]).abs() > tol {
                        return Err(Error::InvalidArgument(
                            "diagonal blocks of Q must be symmetric".into(),
                        ));
                    }
                }
            }
        }
        let mu = q.symmetric_part().symmetric_eigenvalues()[0];
        if !(mu > S::zero()) {
            return Err(Error::NotMonotone {
                mu_hat: mu.to_f64_lossy(),
                lip_hat: q.spectral_norm().to_f64_lossy(),
            });
        }
        let lip = q.spectral_norm().max(mu);

        let cost_q = q.clone();
        let cost_off = offset.clone();
        let cost_offsets = offsets.clone();
        let cost: CostFn<S> = Arc::new(move |i, x| {
            let r = cost_offsets[i]..cost_offsets[i + 1];
            let half = S::lit(0.5);
            let mut total = S::zero();
            for a in r.clone() {
                let mut row = cost_off[a];
                for (b, &xb) in x.iter().enumerate() {
                    let w = if r.contains(&b) { half } else { S::one() };
                    row = row + w * cost_q[(a, b)] * xb;
                }
                total = total + x[a] * row;
            }
            total
        });
        let grad_q = q.clone();
        let grad_off = offset.clone();
        let grad_offsets = offsets.clone();
        let grad: GradFn<S> = Arc::new(move |i, x| {
            (grad_offsets[i]..grad_offsets[i + 1])
                .map(|a| linalg::dot(grad_q.row(a), x) + grad_off[a])
                .collect()
        });
        let mut game = Self::new(dims, cost, mu, lip)?.with_gradient(grad);
        game.affine = Some((q, offset));
        game.kind = GameKind::Quadratic;
        Ok(game)
    }

    /// Connectivity game `J_i = ‖x_i − s_i‖² + c Σ_{j≠i} ‖x_i − x_j‖²`.
    pub fn connectivity(sources: Vec<Vec<S>>, coupling: S) -> Result<Self> {
        let n = sources.len();
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one source".into()));
        }
        let d = sources[0].len();
        if d == 0 || sources.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidArgument(
                "all sources must share one positive dimension".into(),
            ));
        }
        if coupling < S::zero() || !coupling.is_finite() {
            return Err(Error::InvalidArgument("coupling must be nonnegative".into()));
        }
        let m = n * d;
        let two = S::lit(2.0);
        let two_c = two * coupling;
        let nn = S::from_usize_lossy(n);
        let diag = two + two_c * (nn - S::one());
        let mut q = Matrix::zeros(m, m);
        for a in 0..n {
            for b in 0..n {
                let v = if a == b { diag } else { -two_c };
                for k in 0..d {
                    q[(a * d + k, b * d + k)] = v;
                }
            }
        }
        let offset: Vec<S> = sources.iter().flatten().map(|&s| -two * s).collect();
        // Spectrum of Q is {2, 2 + 2cN} (the latter only when N > 1).
        let mu = two;
        let lip = if n > 1 { two + two_c * nn } else { two };

        let cs = sources.clone();
        let cost: CostFn<S> = Arc::new(move |i, x| {
            let xi = &x[i * d..(i + 1) * d];
            let own = linalg::dist(xi, &cs[i]);
            let mut pair = S::zero();
            for j in 0..cs.len() {
                if j != i {
                    let dj = linalg::dist(xi, &x[j * d..(j + 1) * d]);
                    pair = pair + dj * dj;
                }
            }
            own * own + coupling * pair
        });
        let gs = sources.clone();
        let grad: GradFn<S> = Arc::new(move |i, x| {
            let xi = &x[i * d..(i + 1) * d];
            (0..d)
                .map(|k| {
                    let mut g = two * (xi[k] - gs[i][k]);
                    for j in 0..gs.len() {
                        if j != i {
                            g = g + two_c * (xi[k] - x[j * d + k]);
                        }
                    }
                    g
                })
                .collect()
        });
        let mut game = Self::new(vec![d; n], cost, mu, lip)?.with_gradient(grad);
        game.affine = Some((q, offset));
        game.kind = GameKind::Connectivity { sources, coupling };
        Ok(game)
    }

    pub fn agent_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total dimension `m`.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn agent_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn agent_of_coordinate(&self, c: usize) -> usize {
        self.offsets.partition_point(|&o| o <= c) - 1
    }

    pub fn mu_f(&self) -> S {
        self.mu_f
    }

    pub fn lip_l(&self) -> S {
        self.lip_l
    }

    pub fn kind(&self) -> &GameKind<S> {
        &self.kind
    }

    pub fn constraints(&self) -> &[ConstraintSet<S>] {
        &self.constraints
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// `(Q, q)` when the pseudogradient is known to be affine.
    pub fn affine_map(&self) -> Option<(&Matrix<S>, &[S])> {
        self.affine.as_ref().map(|(q, o)| (q, o.as_slice()))
    }

    pub fn is_unconstrained(&self) -> bool {
        self.constraints
            .iter()
            .all(|c| matches!(c, ConstraintSet::WholeSpace))
    }

    fn check_point(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !linalg::all_finite(x) {
            return Err(Error::NonFinite("decision vector"));
        }
        Ok(())
    }

    fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.agent_count() {
            return Err(Error::AgentOutOfRange {
                index: i,
                agents: self.agent_count(),
            });
        }
        Ok(())
    }

    /// `J_i(x)` (agents are zero-indexed).
    pub fn eval_cost(&self, i: usize, x: &[S]) -> Result<S> {
        self.check_agent(i)?;
        self.check_point(x)?;
        Ok((self.cost)(i, x))
    }

    /// Cost evaluation without argument checks, for inner loops that already validated.
    #[inline]
    pub fn cost_unchecked(&self, i: usize, x: &[S]) -> S {
        (self.cost)(i, x)
    }

    /// Central-difference step used for cost-only games.
    pub fn fd_step(x: &[S]) -> S {
        let base = if S::epsilon() < S::lit(1e-10) {
            S::lit(1e-6)
        } else {
            S::epsilon().sqrt()
        };
        base * linalg::norm(x).max(S::one())
    }

    /// `∇_{x_i} J_i(x)` by central differences of the cost oracle.
    pub fn partial_gradient_fd(&self, i: usize, x: &[S]) -> Vec<S> {
        let h = Self::fd_step(x);
        let two_h = h + h;
        let mut probe = x.to_vec();
        self.agent_range(i)
            .map(|c| {
                let orig = probe[c];
                probe[c] = orig + h;
                let up = (self.cost)(i, &probe);
                probe[c] = orig - h;
                let down = (self.cost)(i, &probe);
                probe[c] = orig;
                (up - down) / two_h
            })
            .collect()
    }

    /// `∇_{x_i} J_i(x)`, analytic when available.
    pub fn partial_gradient(&self, i: usize, x: &[S]) -> Vec<S> {
        match &self.grad {
            Some(g) => g(i, x),
            None => self.partial_gradient_fd(i, x),
        }
    }

    /// `F(x) = col(∇_{x_i} J_i(x))`.
    pub fn pseudogradient(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_point(x)?;
        let f = self.pseudogradient_unchecked(x);
        if !linalg::all_finite(&f) {
            return Err(Error::NonFinite("pseudogradient"));
        }
        Ok(f)
    }

    pub fn pseudogradient_unchecked(&self, x: &[S]) -> Vec<S> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.agent_count() {
            out.extend(self.partial_gradient(i, x));
        }
        out
    }

    /// Pseudogradient from finite differences even when an analytic gradient is supplied.
    pub fn pseudogradient_fd(&self, x: &[S]) -> Vec<S> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.agent_count() {
            out.extend(self.partial_gradient_fd(i, x));
        }
        out
    }

    /// Largest relative mismatch between the analytic gradient and finite differences
    /// over `samples` points drawn from `region`. `None` for cost-only games.
    pub fn gradient_mismatch<R: Rng + ?Sized>(
        &self,
        samples: usize,
        region: &ConstraintSet<S>,
        rng: &mut R,
    ) -> Result<Option<S>> {
        if self.grad.is_none() {
            return Ok(None);
        }
        let mut worst = S::zero();
        for _ in 0..samples {
            let x = region.sample(rng)?;
            self.check_point(&x)?;
            let a = self.pseudogradient_unchecked(&x);
            let n = self.pseudogradient_fd(&x);
            let err = linalg::dist(&a, &n) / linalg::norm(&a).max(S::one());
            worst = worst.max(err);
        }
        Ok(Some(worst))
    }

    /// Collective projection onto `Ω_1 × … × Ω_N`.
    pub fn project(&self, x: &[S]) -> Vec<S> {
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, x: &mut [S]) {
        for (i, set) in self.constraints.iter().enumerate() {
            let r = self.agent_range(i);
            set.project_in_place(&mut x[r]);
        }
    }

    /// Largest per-agent constraint violation.
    pub fn violation(&self, x: &[S]) -> S {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, set)| set.violation(&x[self.agent_range(i)]))
            .fold(S::zero(), S::max)
    }

    pub fn is_feasible(&self, x: &[S], tol: S) -> bool {
        self.violation(x) <= tol
    }

    /// Reference Nash equilibrium.
    ///
    /// Unconstrained games with an affine pseudogradient are solved exactly; everything
    /// else runs the projected pseudogradient iteration with `γ = μ_F / L²`.
    pub fn solve_ne_oracle(&self, tol: S) -> Result<Vec<S>> {
        if self.is_unconstrained() {
            if let Some((q, offset)) = &self.affine {
                let rhs: Vec<S> = offset.iter().map(|&v| -v).collect();
                return q.solve(&rhs);
            }
        }
        self.solve_ne_iterative(tol, 1_000_000)
    }

    /// `x⁺ = proj(x − γ F(x))` with `γ = μ_F / L²` until `‖x⁺ − x‖ ≤ tol`.
    pub fn solve_ne_iterative(&self, tol: S, max_iter: usize) -> Result<Vec<S>> {
        let gamma = self.mu_f / (self.lip_l * self.lip_l);
        let mut x = self.project(&vec![S::zero(); self.dim()]);
        for _ in 0..max_iter {
            let f = self.pseudogradient(&x)?;
            let mut next: Vec<S> = x.iter().zip(&f).map(|(&xi, &fi)| xi - gamma * fi).collect();
            self.project_in_place(&mut next);
            let step = linalg::dist(&next, &x);
            x = next;
            if step <= tol {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence {
            what: "projected pseudogradient iteration",
            iterations: max_iter,
        })
    }

    /// Empirical `(μ̂, L̂)` over all pairs of `sample_count` points drawn from `region`.
    pub fn estimate_constants<R: Rng + ?Sized>(
        &self,
        sample_count: usize,
        region: &ConstraintSet<S>,
        rng: &mut R,
    ) -> Result<(S, S)> {
        if sample_count < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        if let Some(d) = region.dim() {
            if d != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: d,
                });
            }
        }
        let mut points = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let x = region.sample(rng)?;
            let f = self.pseudogradient(&x)?;
            points.push((x, f));
        }
        let mut mu_hat = S::infinity();
        let mut lip_hat = S::zero();
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                let dx = linalg::sub(&points[a].0, &points[b].0);
                let df = linalg::sub(&points[a].1, &points[b].1);
                let nx2 = linalg::dot(&dx, &dx);
                if nx2 <= S::epsilon() {
                    continue;
                }
                mu_hat = mu_hat.min(linalg::dot(&dx, &df) / nx2);
                lip_hat = lip_hat.max(linalg::norm(&df) / nx2.sqrt());
            }
        }
        if !(mu_hat > S::zero()) {
            return Err(Error::NotMonotone {
                mu_hat: mu_hat.to_f64_lossy(),
                lip_hat: lip_hat.to_f64_lossy(),
            });
        }
        Ok((mu_hat, lip_hat))
    }

    /// Describes how the supplied constants disagree with empirical estimates, if they do.
    /// The supplied `μ_F` must not exceed `μ̂` and the supplied `L` must not undercut `L̂`.
    pub fn constants_conflict(&self, mu_hat: S, lip_hat: S, rel_tol: S) -> Option<String> {
        let mut msgs = Vec::new();
        if self.mu_f > mu_hat * (S::one() + rel_tol) {
            msgs.push(format!(
                "supplied mu_f = {} exceeds the sampled monotonicity {}",
                self.mu_f, mu_hat
            ));
        }
        if self.lip_l * (S::one() + rel_tol) < lip_hat {
            msgs.push(format!(
                "supplied L = {} is below the sampled Lipschitz ratio {}",
                self.lip_l, lip_hat
            ));
        }
        (!msgs.is_empty()).then(|| msgs.join("; "))
    }
}
