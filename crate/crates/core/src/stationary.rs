//! Stationary states of the bicomplex TDVP: packing of the free parameters,
//! normalization and gauge fixing, a damped Newton solver and derived
//! observables (chemical potential, PT-symmetry defect).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bicomplex::Bicomplex;
use crate::error::{Error, Result};
use crate::gauss::{channel_overlap, evaluate_channel, AnsatzChannel, BicomplexAnsatz, Gaussian, ProblemParams};
use crate::linalg;
use crate::quadrature;
use crate::tdvp::{channel_equations_of_motion, GaussianRates};

/// Jacobians with a larger 2-norm condition number are reported as singular.
pub const MAX_JACOBIAN_CONDITION: f64 = 1e13;

const MIN_NORM: f64 = 1e-14;

/// Which unknowns the solver varies.
///
/// `Complex` keeps both idempotent channels identical (no `j`, `k` parts) and
/// solves only the `+` equations; `Bicomplex` varies both channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Complex,
    Bicomplex,
}

impl SolveMode {
    pub fn channels(self) -> usize {
        match self {
            SolveMode::Complex => 1,
            SolveMode::Bicomplex => 2,
        }
    }
}

/// Real coordinates of the free parameters: per channel
/// `{a∥ⁿ, a⊥ⁿ, bⁿ}ₙ` followed by `{cⁿ − cᴺ}ₙ<N`, each as `(re, im)`.
/// The last `cᴺ` of every channel is fixed by normalization and phase.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeParameterVector {
    pub values: Vec<f64>,
    pub n_gaussians: usize,
    pub mode: SolveMode,
}

/// Number of real unknowns per channel for `n` Gaussians.
pub fn channel_dim(n: usize) -> usize {
    2 * (3 * n + n - 1)
}

impl FreeParameterVector {
    pub fn pack(ansatz: &BicomplexAnsatz, mode: SolveMode) -> Self {
        let n = ansatz.n_gaussians();
        let mut values = Vec::with_capacity(mode.channels() * channel_dim(n));
        let channels: &[&AnsatzChannel] = match mode {
            SolveMode::Complex => &[&ansatz.plus],
            SolveMode::Bicomplex => &[&ansatz.plus, &ansatz.minus],
        };
        for ch in channels {
            for g in &ch.gaussians {
                for z in [g.a_par, g.a_perp, g.b] {
                    values.push(z.re);
                    values.push(z.im);
                }
            }
            let last = ch.gaussians[n - 1].c;
            for g in &ch.gaussians[..n - 1] {
                let d = g.c - last;
                values.push(d.re);
                values.push(d.im);
            }
        }
        Self {
            values,
            n_gaussians: n,
            mode,
        }
    }

    /// Rebuilds the ansatz with `cᴺ = 0` in every channel (not normalized).
    pub fn unpack_raw(&self) -> Result<BicomplexAnsatz> {
        let n = self.n_gaussians;
        let dim = channel_dim(n);
        if n == 0 || self.values.len() != self.mode.channels() * dim {
            return Err(Error::InvalidInput(format!(
                "free parameter vector has length {} (expected {})",
                self.values.len(),
                self.mode.channels() * dim
            )));
        }
        let channel = |v: &[f64]| {
            let z = |i: usize| Complex64::new(v[2 * i], v[2 * i + 1]);
            let gaussians = (0..n)
                .map(|k| {
                    let c = if k + 1 < n {
                        z(3 * n + k)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    Gaussian::new(z(3 * k), z(3 * k + 1), z(3 * k + 2), c)
                })
                .collect();
            AnsatzChannel::new(gaussians)
        };
        let plus = channel(&self.values[..dim]);
        let minus = match self.mode {
            SolveMode::Complex => plus.clone(),
            SolveMode::Bicomplex => channel(&self.values[dim..]),
        };
        Ok(BicomplexAnsatz { plus, minus })
    }

    /// Rebuilds and normalizes the ansatz.
    pub fn unpack(&self) -> Result<BicomplexAnsatz> {
        normalize(&self.unpack_raw()?)
    }
}

/// Scales the channels so that `⟨ψ₋|ψ₊⟩ = 1` and fixes the gauge.
///
/// The `+` channel is multiplied by `λ = ⟨ψ₋|ψ₊⟩^(-1/2)` and the `−` channel by
/// `conj(λ)`. A common phase then makes `Im(c₊ᴺ + c₋ᴺ) = 0`, and a `k`-scaling
/// (`ψ₊/r`, `ψ₋ r`, which leaves the norm untouched) makes
/// `Re c₊ᴺ = Re c₋ᴺ`.
pub fn normalize(ansatz: &BicomplexAnsatz) -> Result<BicomplexAnsatz> {
    let s = channel_overlap(&ansatz.minus, &ansatz.plus)?;
    if !(s.norm() >= MIN_NORM) {
        return Err(Error::DegenerateNorm { norm: s.norm() });
    }
    let shift = -0.5 * s.ln();
    let mut out = ansatz.clone();
    out.plus.shift_c(shift);
    out.minus.shift_c(shift.conj());
    let n = out.n_gaussians();
    let cp = out.plus.gaussians[n - 1].c;
    let cm = out.minus.gaussians[n - 1].c;
    let phase = -0.5 * (cp.im + cm.im);
    let balance = 0.5 * (cp.re - cm.re);
    out.plus.shift_c(Complex64::new(-balance, phase));
    out.minus.shift_c(Complex64::new(balance, phase));
    Ok(out)
}

fn push_channel_residual(out: &mut Vec<f64>, rates: &[GaussianRates]) {
    let n = rates.len();
    for r in rates {
        for z in [r.a_par, r.a_perp, r.b] {
            out.push(z.re);
            out.push(z.im);
        }
    }
    let last = rates[n - 1].c;
    for r in &rates[..n - 1] {
        let d = r.c - last;
        out.push(d.re);
        out.push(d.im);
    }
}

/// Residual of the stationarity conditions `Ȧ = 0`, `ḃ = 0`,
/// `ċⁿ − ċᴺ = 0` in the layout of the free parameters.
pub fn stationary_residual(free: &FreeParameterVector, params: &ProblemParams) -> Result<Vec<f64>> {
    let ansatz = free.unpack()?;
    residual_of(&ansatz, params, free.mode)
}

fn residual_of(ansatz: &BicomplexAnsatz, params: &ProblemParams, mode: SolveMode) -> Result<Vec<f64>> {
    if !ansatz.is_normalizable() {
        return Err(Error::NonNormalizable { re_a: min_re_a(ansatz) });
    }
    let mut out = Vec::with_capacity(mode.channels() * channel_dim(ansatz.n_gaussians()));
    match mode {
        SolveMode::Complex => {
            let rates = channel_equations_of_motion(&ansatz.plus, &ansatz.plus, params)?;
            push_channel_residual(&mut out, &rates);
        }
        SolveMode::Bicomplex => {
            let plus = channel_equations_of_motion(&ansatz.plus, &ansatz.minus, params)?;
            push_channel_residual(&mut out, &plus);
            let minus = channel_equations_of_motion(&ansatz.minus, &ansatz.plus, params)?;
            push_channel_residual(&mut out, &minus);
        }
    }
    Ok(out)
}

fn min_re_a(ansatz: &BicomplexAnsatz) -> f64 {
    ansatz
        .plus
        .gaussians
        .iter()
        .chain(&ansatz.minus.gaussians)
        .map(|g| g.a_par.re.min(g.a_perp.re))
        .fold(f64::INFINITY, f64::min)
}

/// Residual and forward-difference Jacobian with respect to the free
/// parameters (`step · max(1, |xᵢ|)` per coordinate).
pub fn residual_and_jacobian(
    free: &FreeParameterVector,
    params: &ProblemParams,
    step: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let f0 = stationary_residual(free, params)?;
    let dim = free.values.len();
    let mut jac = DMatrix::<f64>::zeros(f0.len(), dim);
    let mut probe = free.clone();
    for i in 0..dim {
        let h = step * free.values[i].abs().max(1.0);
        probe.values[i] = free.values[i] + h;
        let f = stationary_residual(&probe, params)?;
        probe.values[i] = free.values[i];
        for (r, (fi, f0i)) in f.iter().zip(&f0).enumerate() {
            jac[(r, i)] = (fi - f0i) / h;
        }
    }
    Ok((f0, jac))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the residual max-norm.
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SolveMode,
    pub fd_step: f64,
    /// Maximum number of step halvings in the line search.
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            mode: SolveMode::Bicomplex,
            fd_step: 1e-7,
            max_halvings: 8,
        }
    }
}

impl SolverOptions {
    pub fn with_mode(self, mode: SolveMode) -> Self {
        Self { mode, ..self }
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }
}

/// A converged stationary solution.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryState {
    pub ansatz: BicomplexAnsatz,
    pub mu: Bicomplex,
    pub residual_norm: f64,
    pub params: ProblemParams,
    pub iterations: usize,
    /// Residual max-norm before each Newton step and after the last one.
    pub residual_history: Vec<f64>,
}

impl StationaryState {
    /// Wraps an already converged (normalized) ansatz, recomputing `μ` and the
    /// residual.
    pub fn from_ansatz(ansatz: BicomplexAnsatz, params: ProblemParams, mode: SolveMode) -> Result<Self> {
        let ansatz = normalize(&ansatz)?;
        let residual = residual_of(&ansatz, &params, mode)?;
        let residual_norm = linalg::max_abs(&residual);
        let mu = chemical_potential_of(&ansatz, &params)?;
        Ok(Self {
            ansatz,
            mu,
            residual_norm,
            params,
            iterations: 0,
            residual_history: vec![residual_norm],
        })
    }

    pub fn free_parameters(&self, mode: SolveMode) -> FreeParameterVector {
        FreeParameterVector::pack(&self.ansatz, mode)
    }

    /// `μ` with `μj` mirrored: the state with every parameter `j`-conjugated.
    pub fn conj_j(&self) -> Self {
        Self {
            ansatz: self.ansatz.conj_j(),
            mu: self.mu.conj_j(),
            ..self.clone()
        }
    }
}

/// Damped Newton iteration on [`stationary_residual`].
pub fn find_stationary(
    guess: &BicomplexAnsatz,
    params: &ProblemParams,
    opts: &SolverOptions,
) -> Result<StationaryState> {
    params.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if !guess.is_normalizable() {
        return Err(Error::NonNormalizable { re_a: min_re_a(guess) });
    }
    let mut x = FreeParameterVector::pack(guess, opts.mode);
    let mut f = stationary_residual(&x, params)?;
    let mut fnorm = linalg::norm(&f);
    let mut history = vec![linalg::max_abs(&f)];
    let mut iterations = 0;
    while linalg::max_abs(&f) >= opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: linalg::max_abs(&f),
            });
        }
        iterations += 1;
        let (_, jac) = residual_and_jacobian(&x, params, opts.fd_step)?;
        let condition = linalg::condition(&jac);
        if !(condition <= MAX_JACOBIAN_CONDITION) {
            return Err(Error::SingularJacobian { condition });
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = linalg::solve(&jac, &rhs).ok_or(Error::SingularJacobian {
            condition: f64::INFINITY,
        })?;

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = x.clone();
            for (t, d) in trial.values.iter_mut().zip(&dx) {
                *t += alpha * d;
            }
            if let Ok(ft) = stationary_residual(&trial, params) {
                let nt = linalg::norm(&ft);
                if nt.is_finite() {
                    if nt <= (1.0 - 1e-4 * alpha) * fnorm {
                        accepted = Some((trial, ft, nt));
                        break;
                    }
                    fallback = Some((trial, ft, nt));
                }
            }
            alpha *= 0.5;
        }
        let (nx, nf, nn) = match accepted.or(fallback) {
            Some(v) => v,
            None => {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: linalg::max_abs(&f),
                })
            }
        };
        x = nx;
        f = nf;
        fnorm = nn;
        history.push(linalg::max_abs(&f));
    }
    let ansatz = x.unpack()?;
    let mu = chemical_potential_of(&ansatz, params)?;
    Ok(StationaryState {
        ansatz,
        mu,
        residual_norm: linalg::max_abs(&f),
        params: *params,
        iterations,
        residual_history: history,
    })
}

/// `μ± = i ċ±ᴺ = 2(a∥ + 2a⊥) − b² + v₀` of the last Gaussian, recombined from
/// the idempotent channels.
pub fn chemical_potential_of(ansatz: &BicomplexAnsatz, params: &ProblemParams) -> Result<Bicomplex> {
    let i = Complex64::new(0.0, 1.0);
    let n = ansatz.n_gaussians();
    let plus = channel_equations_of_motion(&ansatz.plus, &ansatz.minus, params)?;
    let minus = channel_equations_of_motion(&ansatz.minus, &ansatz.plus, params)?;
    Ok(Bicomplex::from_pm(i * plus[n - 1].c, i * minus[n - 1].c))
}

pub fn chemical_potential(state: &StationaryState) -> Result<Bicomplex> {
    chemical_potential_of(&state.ansatz, &state.params)
}

/// Parameters of `PT[ψ]` with `PT[ψ](x) = conj_i(ψ(−x))`: channel `±` is built
/// from the conjugated, mirrored Gaussians of channel `∓`.
pub fn pt_image(ansatz: &BicomplexAnsatz) -> BicomplexAnsatz {
    let mirror = |ch: &AnsatzChannel| {
        AnsatzChannel::new(
            ch.gaussians
                .iter()
                .map(|g| Gaussian::new(g.a_par.conj(), g.a_perp.conj(), -g.b.conj(), g.c.conj()))
                .collect(),
        )
    };
    BicomplexAnsatz {
        plus: mirror(&ansatz.minus),
        minus: mirror(&ansatz.plus),
    }
}

/// Relative distance `‖ψ − α PT[ψ]‖ / ‖ψ‖` with the optimal constant `α` per
/// channel (the global phase is not fixed by PT symmetry). Norms sum both
/// channels.
///
/// The optimal `α` comes from closed-form overlaps; the difference norm is
/// integrated pointwise on a cylindrical Gauss–Legendre grid so that it is not
/// limited by cancellation in `‖ψ‖² − |⟨P|ψ⟩|²/‖P‖²`.
pub fn pt_symmetry_defect(state: &StationaryState) -> Result<f64> {
    pt_defect_of(&state.ansatz)
}

pub fn pt_defect_of(ansatz: &BicomplexAnsatz) -> Result<f64> {
    let image = pt_image(ansatz);
    let (x_lo, x_hi, r_hi) = integration_box(ansatz);
    let xs = quadrature::composite(x_lo, x_hi, 64, 10);
    let rs = quadrature::composite(0.0, r_hi, 24, 10);
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for (own, img) in [(&ansatz.plus, &image.plus), (&ansatz.minus, &image.minus)] {
        let pp = channel_overlap(img, img)?;
        let alpha = if pp.norm() > 0.0 {
            channel_overlap(img, own)? / pp
        } else {
            Complex64::new(0.0, 0.0)
        };
        for &(x, wx) in &xs {
            for &(r, wr) in &rs {
                let p = [x, r, 0.0];
                let a = evaluate_channel(own, p);
                let d = a - alpha * evaluate_channel(img, p);
                let w = wx * wr * 2.0 * std::f64::consts::PI * r;
                diff2 += w * d.norm_sqr();
                norm2 += w * a.norm_sqr();
            }
        }
    }
    if norm2 <= 0.0 {
        return Err(Error::DegenerateNorm { norm: norm2 });
    }
    Ok((diff2 / norm2).sqrt())
}

fn integration_box(ansatz: &BicomplexAnsatz) -> (f64, f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut r_hi = 0.0_f64;
    for g in ansatz.plus.gaussians.iter().chain(&ansatz.minus.gaussians) {
        // |g|² ∝ exp(-2 Re a (x - x₀)²) with x₀ = Re b / (2 Re a)
        let centre = g.b.re / (2.0 * g.a_par.re);
        let width = 7.0 / g.a_par.re.sqrt();
        lo = lo.min(centre - width);
        hi = hi.max(centre + width);
        r_hi = r_hi.max(7.0 / g.a_perp.re.sqrt());
    }
    let half = hi.abs().max(lo.abs());
    (-half, half, r_hi)
}

/// Gauge-independent distance between two states: the maximum absolute
/// difference over all normalized parameters, minimized over relabelings of
/// the Gaussians.
pub fn state_distance(a: &BicomplexAnsatz, b: &BicomplexAnsatz) -> f64 {
    let n = a.n_gaussians();
    if n != b.n_gaussians() {
        return f64::INFINITY;
    }
    let Ok(a) = normalize(a) else {
        return f64::INFINITY;
    };
    let mut best = f64::INFINITY;
    for perm in permutations(n) {
        let relabel = |ch: &AnsatzChannel| AnsatzChannel::new(perm.iter().map(|&p| ch.gaussians[p]).collect());
        let Ok(b) = normalize(&BicomplexAnsatz {
            plus: relabel(&b.plus),
            minus: relabel(&b.minus),
        }) else {
            continue;
        };
        let mut d = 0.0_f64;
        for (ca, cb) in [(&a.plus, &b.plus), (&a.minus, &b.minus)] {
            for (ga, gb) in ca.gaussians.iter().zip(&cb.gaussians) {
                for (u, v) in [(ga.a_par, gb.a_par), (ga.a_perp, gb.a_perp), (ga.b, gb.b)] {
                    d = d.max((u - v).norm());
                }
                d = d.max(phase_distance(ga.c, gb.c));
            }
        }
        best = best.min(d);
    }
    best
}

/// Distance between two `c` values; imaginary parts are compared modulo 2π.
fn phase_distance(a: Complex64, b: Complex64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let dim = (a.im - b.im).rem_euclid(two_pi);
    let dim = dim.min(two_pi - dim);
    Complex64::new(a.re - b.re, dim).norm()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n <= 1 {
        return vec![(0..n).collect()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// JSON form of a stationary state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryStateRecord {
    pub params: ProblemParams,
    pub plus: Vec<[f64; 8]>,
    pub minus: Vec<[f64; 8]>,
    pub mu: Bicomplex,
    pub residual_norm: f64,
    pub pt_defect: f64,
}

fn channel_record(ch: &AnsatzChannel) -> Vec<[f64; 8]> {
    ch.gaussians
        .iter()
        .map(|g| {
            [
                g.a_par.re,
                g.a_par.im,
                g.a_perp.re,
                g.a_perp.im,
                g.b.re,
                g.b.im,
                g.c.re,
                g.c.im,
            ]
        })
        .collect()
}

fn channel_from_record(rows: &[[f64; 8]]) -> AnsatzChannel {
    AnsatzChannel::new(
        rows.iter()
            .map(|r| {
                Gaussian::new(
                    Complex64::new(r[0], r[1]),
                    Complex64::new(r[2], r[3]),
                    Complex64::new(r[4], r[5]),
                    Complex64::new(r[6], r[7]),
                )
            })
            .collect(),
    )
}

impl StationaryStateRecord {
    pub fn from_state(state: &StationaryState) -> Result<Self> {
        Ok(Self {
            params: state.params,
            plus: channel_record(&state.ansatz.plus),
            minus: channel_record(&state.ansatz.minus),
            mu: state.mu,
            residual_norm: state.residual_norm,
            pt_defect: pt_symmetry_defect(state)?,
        })
    }

    pub fn ansatz(&self) -> Result<BicomplexAnsatz> {
        BicomplexAnsatz::new(channel_from_record(&self.plus), channel_from_record(&self.minus))
    }
}
