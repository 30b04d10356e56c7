//! Pseudo-arclength continuation of stationary states, fold detection and
//! refinement, branch switching into bicomplex states and cusp localization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bicomplex::Bicomplex;
use crate::error::{Error, Result};
use crate::gauss::{BicomplexAnsatz, ProblemParams};
use crate::io::Table;
use crate::linalg;
use crate::stationary::{
    chemical_potential_of, find_stationary, stationary_residual, FreeParameterVector, SolveMode, SolverOptions,
    StationaryState,
};

/// How the continuation parameter `λ` enters the problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Axis {
    /// `λ` is `Na`; `γ` is taken from the base parameters.
    Na,
    /// Straight segment in the `(γ, Na)` plane, `λ ∈ [0, 1]`.
    Segment { from: [f64; 2], to: [f64; 2] },
}

impl Axis {
    pub fn params(&self, base: &ProblemParams, lambda: f64) -> ProblemParams {
        match *self {
            Axis::Na => ProblemParams::new(base.potential, lambda),
            Axis::Segment { from, to } => {
                let gamma = from[0] + lambda * (to[0] - from[0]);
                let na = from[1] + lambda * (to[1] - from[1]);
                ProblemParams::new(base.potential.with_gamma(gamma), na)
            }
        }
    }

    fn lambda_of(&self, params: &ProblemParams) -> f64 {
        match *self {
            Axis::Na => params.na,
            Axis::Segment { from, to } => {
                let d = [to[0] - from[0], to[1] - from[1]];
                let p = [params.gamma() - from[0], params.na - from[1]];
                // γ and Na live on very different scales; project in the
                // coordinate that actually moves
                if d[1].abs() > 0.0 {
                    p[1] / d[1]
                } else if d[0].abs() > 0.0 {
                    p[0] / d[0]
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub step0: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_points: usize,
    pub tol: f64,
    pub fd_step: f64,
    pub corrector_iter: usize,
    pub mode: SolveMode,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            step0: 0.01,
            min_step: 1e-9,
            max_step: 0.05,
            max_points: 4000,
            tol: 1e-10,
            fd_step: 1e-7,
            corrector_iter: 8,
            mode: SolveMode::Complex,
        }
    }
}

impl ContinuationOptions {
    pub fn with_mode(self, mode: SolveMode) -> Self {
        Self { mode, ..self }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            fd_step: self.fd_step,
            mode: self.mode,
            ..SolverOptions::default()
        }
    }
}

/// Why a branch stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Boundary,
    StepUnderflow,
    PointBudget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub na: f64,
    pub gamma: f64,
    pub mu: Bicomplex,
    pub ansatz: BicomplexAnsatz,
    pub arclength: f64,
    /// Continuation parameter of the point (equals `na` on an `Na` axis).
    pub lambda: f64,
    pub residual_norm: f64,
}

impl BranchPoint {
    fn params(&self, base: &ProblemParams) -> ProblemParams {
        ProblemParams::new(base.potential.with_gamma(self.gamma), self.na)
    }

    pub fn state(&self, base: &ProblemParams) -> StationaryState {
        StationaryState {
            ansatz: self.ansatz.clone(),
            mu: self.mu,
            residual_norm: self.residual_norm,
            params: self.params(base),
            iterations: 0,
            residual_history: vec![self.residual_norm],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub branch_id: String,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
    pub axis: Axis,
    /// Potential (and `γ` for the `Na` axis) shared by all points.
    pub base: ProblemParams,
    /// `None` for branches that were not produced by the tracker (no
    /// corrector available for refinement).
    pub options: Option<ContinuationOptions>,
}

impl Branch {
    /// Branch from bare `(s, na, μ)` samples, e.g. for analysing external data.
    pub fn from_samples(
        branch_id: &str,
        base: ProblemParams,
        samples: &[(f64, f64, Bicomplex)],
        ansatz: BicomplexAnsatz,
    ) -> Self {
        Self {
            branch_id: branch_id.to_string(),
            points: samples
                .iter()
                .map(|&(s, na, mu)| BranchPoint {
                    na,
                    gamma: base.gamma(),
                    mu,
                    ansatz: ansatz.clone(),
                    arclength: s,
                    lambda: na,
                    residual_norm: 0.0,
                })
                .collect(),
            termination: Termination::Boundary,
            axis: Axis::Na,
            base,
            options: None,
        }
    }

    pub fn last_state(&self) -> Option<StationaryState> {
        self.points.last().map(|p| p.state(&self.base))
    }

    pub fn reversed(&self) -> Branch {
        let mut out = self.clone();
        out.points.reverse();
        let total = self.points.last().map_or(0.0, |p| p.arclength);
        let first = self.points.first().map_or(0.0, |p| p.arclength);
        for p in &mut out.points {
            p.arclength = total + first - p.arclength;
        }
        out
    }
}

/// Relative size of a corrector update regarded as pure round-off.
const STALLED_STEP: f64 = 1e-11;
/// Largest residual, in units of the tolerance, accepted at a round-off floor.
const FLOOR_FACTOR: f64 = 100.0;

/// Newton corrector and predictor machinery on `u = (x, λ)`.
pub(crate) struct Tracker {
    pub base: ProblemParams,
    pub axis: Axis,
    pub opts: ContinuationOptions,
    pub n_gaussians: usize,
}

impl Tracker {
    pub fn new(base: ProblemParams, axis: Axis, opts: ContinuationOptions, n_gaussians: usize) -> Self {
        Self {
            base,
            axis,
            opts,
            n_gaussians,
        }
    }

    fn free(&self, x: &[f64]) -> FreeParameterVector {
        FreeParameterVector {
            values: x.to_vec(),
            n_gaussians: self.n_gaussians,
            mode: self.opts.mode,
        }
    }

    pub fn params(&self, lambda: f64) -> ProblemParams {
        self.axis.params(&self.base, lambda)
    }

    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let m = u.len() - 1;
        stationary_residual(&self.free(&u[..m]), &self.params(u[m]))
    }

    /// Residual and the `m × (m+1)` forward-difference Jacobian.
    pub fn jacobian(&self, u: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let f0 = self.residual(u)?;
        let mut jac = DMatrix::<f64>::zeros(f0.len(), u.len());
        let mut probe = u.to_vec();
        for i in 0..u.len() {
            let h = self.opts.fd_step * u[i].abs().max(1.0);
            probe[i] = u[i] + h;
            let f = self.residual(&probe)?;
            probe[i] = u[i];
            for (r, (fi, f0i)) in f.iter().zip(&f0).enumerate() {
                jac[(r, i)] = (fi - f0i) / h;
            }
        }
        Ok((f0, jac))
    }

    /// Unit tangent of the solution curve at `u`, oriented so that its
    /// `λ`-component has the sign of `direction` (when nonzero).
    pub fn tangent(&self, u: &[f64], direction: f64) -> Result<Vec<f64>> {
        let (_, jac) = self.jacobian(u)?;
        let mut t = linalg::null_vector(&jac);
        let m = u.len() - 1;
        if t[m] * direction < 0.0 {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(t)
    }

    /// Solves `F(u) = 0` together with `t·(u − anchor) = 0`.
    pub fn correct(&self, anchor: &[f64], t: &[f64]) -> Result<(Vec<f64>, f64)> {
        let dim = anchor.len();
        let mut u = anchor.to_vec();
        let mut f = self.residual(&u)?;
        for it in 0..=self.opts.corrector_iter {
            if linalg::max_abs(&f) < self.opts.tol && it > 0 {
                return Ok((u, linalg::max_abs(&f)));
            }
            if it == self.opts.corrector_iter {
                break;
            }
            let (_, jac) = self.jacobian(&u)?;
            let mut aug = DMatrix::<f64>::zeros(dim, dim);
            aug.view_mut((0, 0), (dim - 1, dim)).copy_from(&jac);
            for j in 0..dim {
                aug[(dim - 1, j)] = t[j];
            }
            let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let drift: f64 = t.iter().zip(&u).zip(anchor).map(|((t, u), a)| t * (u - a)).sum();
            rhs.push(-drift);
            let du = linalg::solve(&aug, &rhs).ok_or(Error::SingularJacobian {
                condition: f64::INFINITY,
            })?;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
            f = self.residual(&u)?;
            if !f.iter().all(|v| v.is_finite()) {
                break;
            }
            // round-off floor: the update has stalled, the residual is close
            let r = linalg::max_abs(&f);
            if linalg::norm(&du) <= STALLED_STEP * linalg::norm(&u).max(1.0) && r < FLOOR_FACTOR * self.opts.tol {
                return Ok((u, r));
            }
        }
        Err(Error::NoConvergence {
            iterations: self.opts.corrector_iter,
            residual: linalg::max_abs(&f),
        })
    }

    pub fn point(&self, u: &[f64], arclength: f64, residual_norm: f64) -> Result<BranchPoint> {
        let m = u.len() - 1;
        let ansatz = self.free(&u[..m]).unpack()?;
        let params = self.params(u[m]);
        let mu = chemical_potential_of(&ansatz, &params)?;
        Ok(BranchPoint {
            na: params.na,
            gamma: params.gamma(),
            mu,
            ansatz,
            arclength,
            lambda: u[m],
            residual_norm,
        })
    }

    pub fn vector(&self, ansatz: &BicomplexAnsatz, lambda: f64) -> Vec<f64> {
        let mut u = FreeParameterVector::pack(ansatz, self.opts.mode).values;
        u.push(lambda);
        u
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = linalg::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Traces a branch along `axis` starting from a converged state.
///
/// `direction` is the sign of the initial `λ` increment; `limits` bounds `λ`.
/// Step underflow and the point budget end the branch early; the reason is
/// recorded in [`Branch::termination`].
pub fn continue_branch_along(
    branch_id: &str,
    start: &StationaryState,
    axis: Axis,
    direction: f64,
    limits: (f64, f64),
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let tracker = Tracker::new(start.params, axis, *opts, start.ansatz.n_gaussians());
    let lambda0 = axis.lambda_of(&start.params);
    let (lo, hi) = (limits.0.min(limits.1), limits.0.max(limits.1));
    let mut u = tracker.vector(&start.ansatz, lambda0);
    let r0 = linalg::max_abs(&tracker.residual(&u)?);
    if !(r0 < opts.tol.max(1e-9)) {
        return Err(Error::InitialPointInvalid { residual: r0 });
    }
    let m = u.len() - 1;
    let mut points = vec![tracker.point(&u, 0.0, r0)?];
    let mut t = tracker.tangent(&u, direction)?;
    let mut h = opts.step0;
    let mut successes = 0;
    let mut s = 0.0;
    let termination = loop {
        if points.len() >= opts.max_points {
            break Termination::PointBudget;
        }
        if h < opts.min_step {
            break Termination::StepUnderflow;
        }
        let pred: Vec<f64> = u.iter().zip(&t).map(|(a, b)| a + h * b).collect();
        // clip at the window: solve exactly on the boundary
        let edge_of = |lambda: f64| {
            if lambda > hi && t[m] > 0.0 {
                Some(hi)
            } else if lambda < lo && t[m] < 0.0 {
                Some(lo)
            } else {
                None
            }
        };
        let on_edge = |edge: f64| {
            let frac = (edge - u[m]) / t[m];
            let mut anchor: Vec<f64> = u.iter().zip(&t).map(|(a, b)| a + frac * b).collect();
            anchor[m] = edge;
            let mut e = vec![0.0; m + 1];
            e[m] = 1.0;
            tracker.correct(&anchor, &e).map(|(v, r)| (v, r, frac))
        };
        let mut target = edge_of(pred[m]);
        let mut attempt = match target {
            Some(edge) => on_edge(edge),
            None => tracker.correct(&pred, &t).map(|(v, r)| (v, r, h)),
        };
        if target.is_none() {
            // the corrector itself may leave the window
            if let Some(edge) = attempt.as_ref().ok().and_then(|(v, _, _)| edge_of(v[m])) {
                target = Some(edge);
                attempt = on_edge(edge);
            }
        }
        let accepted = match attempt {
            Ok((v, r, step)) => {
                let moved = distance(&v, &u);
                let secant = unit(v.iter().zip(&u).map(|(a, b)| a - b).collect());
                let aligned = linalg::dot(&secant, &t);
                let strayed = distance(&v, &pred) > step.max(opts.min_step) && target.is_none();
                if moved > 0.0 && aligned > 0.9 && !strayed {
                    Some((v, r, moved, secant))
                } else {
                    None
                }
            }
            Err(_) => None,
        };
        match accepted {
            Some((v, r, moved, secant)) => {
                s += moved;
                points.push(tracker.point(&v, s, r)?);
                u = v;
                t = secant;
                if target.is_some() {
                    break Termination::Boundary;
                }
                successes += 1;
                if successes >= 4 {
                    h = (h * 1.3).min(opts.max_step);
                    successes = 0;
                }
            }
            None => {
                h *= 0.5;
                successes = 0;
            }
        }
    };
    if termination == Termination::StepUnderflow {
        log::warn!(
            "branch {branch_id}: step underflow at na={:.6} after {} points",
            points.last().map_or(f64::NAN, |p| p.na),
            points.len()
        );
    }
    Ok(Branch {
        branch_id: branch_id.to_string(),
        points,
        termination,
        axis,
        base: start.params,
        options: Some(*opts),
    })
}

/// Traces a branch over `Na` at fixed `γ`. `direction` is ±1.
pub fn continue_branch(
    branch_id: &str,
    start: &StationaryState,
    direction: f64,
    na_limits: (f64, f64),
    opts: &ContinuationOptions,
) -> Result<Branch> {
    continue_branch_along(branch_id, start, Axis::Na, direction, na_limits, opts)
}

/// Label of a fold on the double-well spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FoldLabel {
    T1,
    T2,
    T3,
    #[serde(rename = "unlabeled")]
    Unlabeled,
}

impl std::fmt::Display for FoldLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FoldLabel::T1 => "T1",
            FoldLabel::T2 => "T2",
            FoldLabel::T3 => "T3",
            FoldLabel::Unlabeled => "unlabeled",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldPoint {
    pub na: f64,
    pub gamma: f64,
    pub mu: Bicomplex,
    pub label: FoldLabel,
    /// Vertex of the parabola through the three bracketing branch points.
    pub na_bracket: f64,
    /// Arclength of the fold on its branch.
    pub arclength: f64,
    /// `d²Na/ds²`; positive at a minimum of `Na`.
    pub curvature: f64,
    /// Refined state at the fold, when the branch carries a corrector.
    pub state: Option<StationaryState>,
    /// Unit tangent of the branch at the fold in free-parameter space.
    pub tangent: Vec<f64>,
    pub mode: SolveMode,
    pub branch_id: String,
}

impl FoldPoint {
    /// `+1` when `Na` has a minimum at the fold (states exist for larger `Na`).
    pub fn opening(&self) -> f64 {
        if self.curvature >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Vertex `(s*, f(s*), f''(s*))` of the parabola through three points.
fn parabola_vertex(s: [f64; 3], f: [f64; 3]) -> Option<(f64, f64, f64)> {
    let d1 = (f[1] - f[0]) / (s[1] - s[0]);
    let d2 = (f[2] - f[1]) / (s[2] - s[1]);
    let a = (d2 - d1) / (s[2] - s[0]);
    if a == 0.0 || !a.is_finite() {
        return None;
    }
    let b = d1 - a * (s[0] + s[1]);
    let vertex = -b / (2.0 * a);
    let value = f[0] + d1 * (vertex - s[0]) + a * (vertex - s[0]) * (vertex - s[1]);
    Some((vertex, value, 2.0 * a))
}

/// Quadratic Lagrange interpolation of vectors and of their derivative.
fn lagrange(s: [f64; 3], u: [&[f64]; 3], at: f64) -> (Vec<f64>, Vec<f64>) {
    let l = |i: usize| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let den = (s[i] - s[j]) * (s[i] - s[k]);
        let val = (at - s[j]) * (at - s[k]) / den;
        let der = ((at - s[j]) + (at - s[k])) / den;
        (val, der)
    };
    let w = [l(0), l(1), l(2)];
    let n = u[0].len();
    let mut val = vec![0.0; n];
    let mut der = vec![0.0; n];
    for i in 0..3 {
        for c in 0..n {
            val[c] += w[i].0 * u[i][c];
            der[c] += w[i].1 * u[i][c];
        }
    }
    (val, der)
}

/// Finds the local extrema of `Na` along the branch.
///
/// Each sign change of `ΔNa` between consecutive steps is bracketed by three
/// points; the vertex of the parabola `Na(s)` through them is refined by
/// corrector solves on a shrinking stencil around the vertex.
pub fn detect_folds(branch: &Branch) -> Vec<FoldPoint> {
    let pts = &branch.points;
    let mut out = Vec::new();
    if pts.len() < 3 {
        return out;
    }
    for k in 0..pts.len() - 2 {
        let d0 = pts[k + 1].na - pts[k].na;
        let d1 = pts[k + 2].na - pts[k + 1].na;
        if !(d0 * d1 < 0.0) {
            continue;
        }
        let s = [pts[k].arclength, pts[k + 1].arclength, pts[k + 2].arclength];
        let f = [pts[k].na, pts[k + 1].na, pts[k + 2].na];
        let Some((sv, nv, curv)) = parabola_vertex(s, f) else {
            continue;
        };
        let bracket = &pts[k..k + 3];
        let refined = match (branch.options, branch.axis) {
            (Some(opts), Axis::Na) => refine_fold(branch, opts, bracket, sv).ok(),
            _ => None,
        };
        let fold = match refined {
            Some((na, s_fold, curvature, state, tangent)) => FoldPoint {
                na,
                gamma: branch.base.gamma(),
                mu: state.mu,
                label: FoldLabel::Unlabeled,
                na_bracket: nv,
                arclength: s_fold,
                curvature,
                state: Some(state),
                tangent,
                mode: branch.options.map_or(SolveMode::Complex, |o| o.mode),
                branch_id: branch.branch_id.clone(),
            },
            None => {
                let (mu, _) = {
                    let m: [&[f64]; 3] = [&bracket[0].mu.parts(), &bracket[1].mu.parts(), &bracket[2].mu.parts()];
                    lagrange(s, m, sv)
                };
                FoldPoint {
                    na: nv,
                    gamma: branch.base.gamma(),
                    mu: Bicomplex::from_parts(mu[0], mu[1], mu[2], mu[3]),
                    label: FoldLabel::Unlabeled,
                    na_bracket: nv,
                    arclength: sv,
                    curvature: curv,
                    state: None,
                    tangent: Vec::new(),
                    mode: SolveMode::Complex,
                    branch_id: branch.branch_id.clone(),
                }
            }
        };
        out.push(fold);
    }
    out
}

type Refined = (f64, f64, f64, StationaryState, Vec<f64>);

fn refine_fold(branch: &Branch, opts: ContinuationOptions, bracket: &[BranchPoint], s0: f64) -> Result<Refined> {
    let n = bracket[0].ansatz.n_gaussians();
    let tracker = Tracker::new(branch.base, branch.axis, opts, n);
    let mut s = [bracket[0].arclength, bracket[1].arclength, bracket[2].arclength];
    let mut u: Vec<Vec<f64>> = bracket.iter().map(|p| tracker.vector(&p.ansatz, p.lambda)).collect();
    let m = u[0].len() - 1;
    let mut vertex = s0;
    let mut spacing = (s[2] - s[0]) / 4.0;
    let mut result = None;
    for _ in 0..3 {
        // three corrector points centred on the current vertex estimate
        let stencil = [vertex - spacing, vertex, vertex + spacing];
        let mut new_u = Vec::with_capacity(3);
        for &at in &stencil {
            let (pred, der) = lagrange(s, [&u[0], &u[1], &u[2]], at);
            let (v, _) = tracker.correct(&pred, &unit(der))?;
            new_u.push(v);
        }
        let f = [new_u[0][m], new_u[1][m], new_u[2][m]];
        let (sv, nv, curv) = parabola_vertex(stencil, f).ok_or(Error::SingularJacobian {
            condition: f64::INFINITY,
        })?;
        s = stencil;
        u = new_u;
        vertex = sv.clamp(s[0] - spacing, s[2] + spacing);
        result = Some((nv, sv, curv));
        spacing /= 8.0;
    }
    let (na, s_fold, curvature) = result.expect("at least one refinement round");
    let (pred, der) = lagrange(s, [&u[0], &u[1], &u[2]], s_fold);
    let (v, r) = tracker.correct(&pred, &unit(der.clone()))?;
    let point = tracker.point(&v, s_fold, r)?;
    let tangent = unit(der[..m].to_vec());
    let state = point.state(&branch.base);
    Ok((na, s_fold, curvature, state, tangent))
}

/// Converges a bicomplex state just beyond a fold.
///
/// On the far side of a fold the two coalescing real states continue as a
/// `j`-conjugate pair `x* ± j τ v`, where `v` is the fold tangent and
/// `τ = √(2 |δ| / |Na''|)` for a distance `δ` beyond the fold.
pub fn seed_bicomplex_branch(fold: &FoldPoint, offset: f64, opts: &ContinuationOptions) -> Result<StationaryState> {
    let state = fold
        .state
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("fold carries no refined state".into()))?;
    let n = state.ansatz.n_gaussians();
    let na = fold.na - fold.opening() * offset.abs();
    let tau = (2.0 * offset.abs() / fold.curvature.abs().max(1e-12)).sqrt();
    let i = Complex64::new(0.0, 1.0);
    // the tangent is stored in the layout of the (complex-mode) free vector
    let base = FreeParameterVector::pack(&state.ansatz, fold.mode);
    let dim = base.values.len() / fold.mode.channels();
    let tangent_plus = &fold.tangent[..dim];
    let shifted = |sign: f64| {
        let mut ch = state.ansatz.plus.clone();
        for (k, g) in ch.gaussians.iter_mut().enumerate() {
            let v =
                |slot: usize| Complex64::new(tangent_plus[2 * (3 * k + slot)], tangent_plus[2 * (3 * k + slot) + 1]);
            g.a_par += sign * i * tau * v(0);
            g.a_perp += sign * i * tau * v(1);
            g.b += sign * i * tau * v(2);
            if k + 1 < n {
                let dc = Complex64::new(tangent_plus[2 * (3 * n + k)], tangent_plus[2 * (3 * n + k) + 1]);
                g.c += sign * i * tau * dc;
            }
        }
        ch
    };
    // j ↦ (−i, +i) in the idempotent channels
    let guess = BicomplexAnsatz::new(shifted(-1.0), shifted(1.0))?;
    let params = ProblemParams::new(state.params.potential, na);
    let solver = opts.solver().with_mode(SolveMode::Bicomplex);
    find_stationary(&guess, &params, &solver)
}

/// Converged symmetric and antisymmetric seed states (branches `A` and `B`).
///
/// The guesses are two mirror Gaussians centred in the wells of
/// `x²/4 + v₀ exp(−σx²)`, each with the harmonic ground-state width of its
/// well, combined with relative phase `0` and `π`. Without a double well
/// (`v₀σ ≤ 1/4`) the guesses degenerate, and the single harmonic eigenstate of
/// the trap minimum is returned as one-Gaussian state.
pub fn seed_states(params: &ProblemParams, opts: &SolverOptions) -> Result<Vec<StationaryState>> {
    let pot = &params.potential;
    let opts = opts.with_mode(SolveMode::Complex);
    let a_perp = 0.25 * pot.omega;
    let s = pot.barrier_width;
    let coupling = 4.0 * pot.barrier_height * s;
    if coupling <= 1.0 {
        // V''(0) = 1/2 − 2v₀σ ≥ 0: single well at the origin
        let k = 0.5 * (0.5 - 2.0 * pot.barrier_height * s);
        let a = 0.5 * k.max(1e-6).sqrt();
        let guess =
            BicomplexAnsatz::from_complex(crate::gauss::AnsatzChannel::new(vec![crate::gauss::Gaussian::real(
                a, a_perp, 0.0, 0.0,
            )]));
        return Ok(vec![find_stationary(&guess, params, &opts)?]);
    }
    let x0 = (coupling.ln() / s).sqrt();
    // V''(x₀) = σx₀²; ground state of −∂² + ½V''(x − x₀)²
    let a = 0.5 * (0.5 * s * x0 * x0).sqrt();
    let b = 2.0 * a * x0;
    let mut out = Vec::with_capacity(2);
    for phase in [0.0, std::f64::consts::PI] {
        let left = crate::gauss::Gaussian::new(
            Complex64::new(a, 0.0),
            Complex64::new(a_perp, 0.0),
            Complex64::new(-b, 0.0),
            Complex64::new(0.0, phase),
        );
        let right = crate::gauss::Gaussian::real(a, a_perp, b, 0.0);
        let guess = BicomplexAnsatz::from_complex(crate::gauss::AnsatzChannel::new(vec![left, right]));
        out.push(find_stationary(&guess, params, &opts)?);
    }
    Ok(out)
}

/// Positions of one fold over a range of `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldCurve {
    pub label: FoldLabel,
    pub folds: Vec<FoldPoint>,
}

impl FoldCurve {
    /// Whether `Na` of the fold changes strictly monotonically with `γ`.
    pub fn is_monotone(&self) -> bool {
        let d: Vec<f64> = self.folds.windows(2).map(|w| w[1].na - w[0].na).collect();
        d.iter().all(|&v| v > 0.0) || d.iter().all(|&v| v < 0.0)
    }

    pub fn last_gamma(&self) -> Option<f64> {
        self.folds.last().map(|f| f.gamma)
    }
}

/// Half-width of the local window used to re-detect a fold at the next `γ`.
const LOCAL_WINDOW: f64 = 0.02;

/// Largest accepted deviation of a re-detected fold from the extrapolated
/// curve, as a multiple of the previous step in `Na` (with a floor of
/// [`JUMP_FLOOR`]). Guards against hopping onto a neighbouring fold once the
/// traced one has vanished.
const JUMP_FACTOR: f64 = 2.0;
const JUMP_FLOOR: f64 = 1e-3;

/// Follows a fold over `gamma_grid` by re-continuing the branch locally around
/// the previous fold position at every grid value and re-detecting it.
///
/// The curve ends at the first `γ` where no fold of the same orientation is
/// found in the local window close to the extrapolated curve.
pub fn trace_fold_curve(seed: &FoldPoint, gamma_grid: &[f64], opts: &ContinuationOptions) -> Result<FoldCurve> {
    let mut folds = vec![seed.clone()];
    for &gamma in gamma_grid.iter().filter(|&&g| g > seed.gamma) {
        let prev = folds.last().expect("non-empty");
        let (predicted, tol) = match folds.len() {
            1 => (prev.na, JUMP_FLOOR),
            n => {
                let before = &folds[n - 2];
                let slope = (prev.na - before.na) / (prev.gamma - before.gamma);
                let step = (prev.na - before.na).abs() * (gamma - prev.gamma) / (prev.gamma - before.gamma);
                (
                    prev.na + slope * (gamma - prev.gamma),
                    (JUMP_FACTOR * step).max(JUMP_FLOOR),
                )
            }
        };
        let next = redetect_fold(prev, gamma, opts).filter(|f| (f.na - predicted).abs() <= tol);
        let Some(next) = next else {
            if folds.len() == 1 {
                return Err(Error::SeedLost { gamma });
            }
            break;
        };
        folds.push(FoldPoint {
            label: seed.label,
            ..next
        });
    }
    Ok(FoldCurve {
        label: seed.label,
        folds,
    })
}

fn redetect_fold(prev: &FoldPoint, gamma: f64, opts: &ContinuationOptions) -> Option<FoldPoint> {
    let state = prev.state.as_ref()?;
    let potential = state.params.potential.with_gamma(gamma);
    let solver = opts.solver();
    // start on the side where the two states exist, far enough to avoid the
    // near-singular fold itself
    let mut start = None;
    for offset in [2e-3, 5e-3, 1e-2] {
        let params = ProblemParams::new(potential, prev.na + prev.opening() * offset);
        if let Ok(s) = find_stationary(&state.ansatz, &params, &solver) {
            start = Some(s);
            break;
        }
    }
    let start = start?;
    let limits = (prev.na - LOCAL_WINDOW, prev.na + LOCAL_WINDOW);
    let local = ContinuationOptions {
        step0: opts.step0.min(2e-3),
        max_step: opts.max_step.min(5e-3),
        ..*opts
    };
    let branch = continue_branch("local", &start, -prev.opening(), limits, &local).ok()?;
    detect_folds(&branch)
        .into_iter()
        .filter(|f| f.opening() == prev.opening())
        .min_by(|a, b| (a.na - prev.na).abs().total_cmp(&(b.na - prev.na).abs()))
}

/// Location of the cusp where two fold curves meet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspEstimate {
    pub gamma_c: f64,
    pub na_c: f64,
    pub fitted_exponent: f64,
    pub fit_residual: f64,
}

/// Shared `(γ, Na_a, Na_b)` samples of two fold curves.
fn shared_samples(a: &FoldCurve, b: &FoldCurve) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for fa in &a.folds {
        if let Some(fb) = b
            .folds
            .iter()
            .find(|fb| (fb.gamma - fa.gamma).abs() <= 1e-12 * fa.gamma.abs().max(1e-12))
        {
            out.push((fa.gamma, fa.na, fb.na));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Least-squares fit of `ln ΔNa = ln C + p ln(γ_c − γ)` for fixed `γ_c`;
/// returns `(ln C, p, rms of the log residual)`.
fn power_fit(samples: &[(f64, f64)], gamma_c: f64) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(g, d)| ((gamma_c - g).ln(), d.ln())).collect();
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let p = sxy / sxx;
    let lnc = my - p * mx;
    let rms = (pts.iter().map(|(x, y)| (y - lnc - p * x).powi(2)).sum::<f64>() / n).sqrt();
    Some((lnc, p, rms))
}

/// Number of shared samples, counted back from the largest `γ`, that enter
/// the cusp fit.
pub const CUSP_FIT_SAMPLES: usize = 8;

/// Fits the fold spacing `ΔNa(γ) = C (γ_c − γ)^p` of two fold curves.
///
/// The exponent is free; `γ_c` is found by a bracketed golden-section search
/// on the residual of the log-linear fit. `Na_c` is the mean of the two fold
/// curves, linearly extrapolated to `γ_c` from the samples closest to it.
pub fn locate_cusp(curve_a: &FoldCurve, curve_b: &FoldCurve) -> Result<CuspEstimate> {
    let shared = shared_samples(curve_a, curve_b);
    let mut pts: Vec<(f64, f64)> = shared
        .iter()
        .map(|&(g, a, b)| (g, (a - b).abs()))
        .filter(|&(_, d)| d > 0.0)
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientOverlap { shared: pts.len() });
    }
    // the power law is asymptotic: keep only the samples nearest the cusp
    pts.drain(..pts.len().saturating_sub(CUSP_FIT_SAMPLES));
    let g_max = pts.last().expect("non-empty").0;
    let span = (g_max - pts[0].0).max(g_max.abs() * 1e-3).max(1e-12);
    let cost = |gc: f64| power_fit(&pts, gc).map_or(f64::INFINITY, |f| f.2);

    // coarse logarithmic scan of the gap γ_c − γ_max, then golden section
    let gaps: Vec<f64> = (0..=160)
        .map(|k| span * 10f64.powf(-8.0 + 8.5 * k as f64 / 160.0))
        .collect();
    let (best, _) = gaps
        .iter()
        .enumerate()
        .map(|(k, &g)| (k, cost(g_max + g)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let lo_gap = if best == 0 { 0.0 } else { gaps[best - 1] };
    let hi_gap = gaps[(best + 1).min(gaps.len() - 1)];
    let (mut lo, mut hi) = (g_max + lo_gap, g_max + hi_gap);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if (hi - lo) <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = cost(x2);
        }
    }
    let gamma_c = 0.5 * (lo + hi);
    let (_, p, rms) = power_fit(&pts, gamma_c).ok_or(Error::InsufficientOverlap { shared: pts.len() })?;

    // mean of the two folds, extrapolated linearly from the last samples
    let tail = &shared[shared.len().saturating_sub(3)..];
    let means: Vec<(f64, f64)> = tail.iter().map(|&(g, a, b)| (g, 0.5 * (a + b))).collect();
    let na_c = if means.len() >= 2 {
        let n = means.len() as f64;
        let mg = means.iter().map(|m| m.0).sum::<f64>() / n;
        let mm = means.iter().map(|m| m.1).sum::<f64>() / n;
        let sgg: f64 = means.iter().map(|m| (m.0 - mg).powi(2)).sum();
        let sgm: f64 = means.iter().map(|m| (m.0 - mg) * (m.1 - mm)).sum();
        mm + sgm / sgg * (gamma_c - mg)
    } else {
        means[0].1
    };
    Ok(CuspEstimate {
        gamma_c,
        na_c,
        fitted_exponent: p,
        fit_residual: rms,
    })
}

pub const BRANCH_HEADER: [&str; 8] = ["branch_id", "arclength", "na", "gamma", "mu_1", "mu_i", "mu_j", "mu_k"];
pub const FOLD_CURVE_HEADER: [&str; 4] = ["label", "gamma", "na", "mu_1"];

pub fn branch_rows(branch: &Branch) -> Vec<Vec<String>> {
    use crate::io::fmt_f64;
    branch
        .points
        .iter()
        .map(|p| {
            let mut row = vec![
                branch.branch_id.clone(),
                fmt_f64(p.arclength),
                fmt_f64(p.na),
                fmt_f64(p.gamma),
            ];
            row.extend(p.mu.parts().iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect()
}

pub fn branch_table<'a>(branches: impl IntoIterator<Item = &'a Branch>) -> Table {
    let mut table = Table::new(&BRANCH_HEADER);
    table.rows = branches.into_iter().flat_map(branch_rows).collect();
    table
}

pub fn write_branches_csv<W: std::io::Write>(branches: &[Branch], out: W) -> Result<()> {
    branch_table(branches).write_csv(out)
}

pub fn fold_curve_table(curves: &[FoldCurve]) -> Table {
    use crate::io::fmt_f64;
    let mut table = Table::new(&FOLD_CURVE_HEADER);
    table.rows = curves
        .iter()
        .flat_map(|c| {
            c.folds
                .iter()
                .map(move |f| vec![c.label.to_string(), fmt_f64(f.gamma), fmt_f64(f.na), fmt_f64(f.mu.z1())])
        })
        .collect();
    table
}

pub fn write_fold_curves_csv<W: std::io::Write>(curves: &[FoldCurve], out: W) -> Result<()> {
    fold_curve_table(curves).write_csv(out)
}

/// JSON form of a detected fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub label: FoldLabel,
    pub na: f64,
    pub gamma: f64,
    pub mu: Bicomplex,
    pub curvature: f64,
    pub branch_id: String,
}
