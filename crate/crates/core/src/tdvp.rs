//! Time-dependent variational principle for the bicomplex coupled-Gaussian
//! ansatz.
//!
//! Each idempotent channel `s` evolves under
//!
//! ```text
//! i Ȧₛⁿ = 4 (Aₛⁿ)² − V₂ₛⁿ,   i ḃₛⁿ = 4 Aₛⁿ bₛⁿ + v₁ₛⁿ,   i ċₛⁿ = 2 tr Aₛⁿ − bₛⁿ·bₛⁿ + v₀ₛⁿ
//! ```
//!
//! where the effective-potential coefficients solve a square projection
//! system. Test functions are the monomials `{x², y², x, 1}` times the
//! Gaussians of the partner channel `s̄`; the potential seen by channel `s` is
//! `V_ext + 8πNa ψₛ conj(ψₛ̄)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauss::{AnsatzChannel, BicomplexAnsatz, Channel, CombinedGaussian, Gaussian, MomentTable, ProblemParams};
use crate::io::{fmt_f64, Table};

/// Projection systems with a (scaled) condition number above this are rejected.
pub const MAX_PROJECTION_CONDITION: f64 = 1e12;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Test monomials `(kx, ky, kz)`: x², y², x, 1.
const TEST_MONOMIALS: [(usize, usize, usize); 4] = [(2, 0, 0), (0, 2, 0), (1, 0, 0), (0, 0, 0)];

/// Fitted quadratic effective potential `x·V₂ⁿ·x + v₁ⁿ x + v₀ⁿ` of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectivePotentialChannel {
    pub v2_par: Vec<Complex64>,
    pub v2_perp: Vec<Complex64>,
    pub v1: Vec<Complex64>,
    pub v0: Vec<Complex64>,
}

impl EffectivePotentialChannel {
    pub fn len(&self) -> usize {
        self.v0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v0.is_empty()
    }
}

/// Time derivatives of one Gaussian's parameters.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GaussianRates {
    pub a_par: Complex64,
    pub a_perp: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzDerivatives {
    pub plus: Vec<GaussianRates>,
    pub minus: Vec<GaussianRates>,
}

impl AnsatzDerivatives {
    pub fn channel(&self, which: Channel) -> &[GaussianRates] {
        match which {
            Channel::Plus => &self.plus,
            Channel::Minus => &self.minus,
        }
    }
}

/// Moment tables shared by the fit and the residual of one channel.
struct ChannelIntegrals {
    n: usize,
    /// `conj(g̅ᵐ) gⁿ`, indexed `m * n + n`.
    pair: Vec<MomentTable>,
    /// Right-hand side `⟨T g̅ᵐ | (V + 8πNa ψ conj(ψ̅)) ψ⟩`, indexed `4 m + t`.
    rhs: Vec<Complex64>,
}

impl ChannelIntegrals {
    fn build(own: &AnsatzChannel, partner: &AnsatzChannel, params: &ProblemParams) -> Result<Self> {
        let n = own.len();
        if n == 0 || partner.len() != n {
            return Err(Error::InvalidInput("channels must have equal, non-zero size".into()));
        }
        let pot = &params.potential;
        let harmonic_perp = 0.25 * pot.omega * pot.omega;
        let coupling = params.coupling();

        let mut pair = Vec::with_capacity(n * n);
        let mut rhs = vec![ZERO; 4 * n];
        for (m, gm) in partner.gaussians.iter().enumerate() {
            for gn in &own.gaussians {
                let base = CombinedGaussian::pair(gm, gn);
                let table = base.moments()?;
                let barrier = base.with_envelope(pot.barrier_width).moments()?;
                let gainloss = base.with_envelope(pot.gainloss_width).moments()?;
                for (t, &(kx, ky, kz)) in TEST_MONOMIALS.iter().enumerate() {
                    let harmonic = 0.25 * table.get(kx + 2, ky, kz)
                        + harmonic_perp * (table.get(kx, ky + 2, kz) + table.get(kx, ky, kz + 2));
                    rhs[4 * m + t] += harmonic
                        + pot.barrier_height * barrier.get(kx, ky, kz)
                        + I * pot.gamma * gainloss.get(kx + 1, ky, kz);
                }
                pair.push(table);
            }
            if coupling != 0.0 {
                for gp in &partner.gaussians {
                    // ψ conj(ψ̅): the partner Gaussian enters conjugated
                    let left = CombinedGaussian::pair(gm, &gp.conj());
                    for gq in &own.gaussians {
                        let lq = left.times(gq);
                        for gn in &own.gaussians {
                            let table = lq.times(gn).moments()?;
                            for (t, &(kx, ky, kz)) in TEST_MONOMIALS.iter().enumerate() {
                                rhs[4 * m + t] += coupling * table.get(kx, ky, kz);
                            }
                        }
                    }
                }
            }
        }
        Ok(Self { n, pair, rhs })
    }

    fn table(&self, m: usize, n: usize) -> &MomentTable {
        &self.pair[m * self.n + n]
    }

    /// `⟨T_t g̅ᵐ | U gⁿ⟩` for the unknown basis `U ∈ {x², y²+z², x, 1}`.
    fn basis_projection(&self, m: usize, t: usize, n: usize, u: usize) -> Complex64 {
        let table = self.table(m, n);
        let (kx, ky, kz) = TEST_MONOMIALS[t];
        match u {
            0 => table.get(kx + 2, ky, kz),
            1 => table.get(kx, ky + 2, kz) + table.get(kx, ky, kz + 2),
            2 => table.get(kx + 1, ky, kz),
            _ => table.get(kx, ky, kz),
        }
    }
}

/// Solves the projection system of `own` against test functions built from
/// `partner`. With `partner == own` this is the ordinary complex TDVP.
pub fn fit_channel(
    own: &AnsatzChannel,
    partner: &AnsatzChannel,
    params: &ProblemParams,
) -> Result<EffectivePotentialChannel> {
    let ints = ChannelIntegrals::build(own, partner, params)?;
    solve_projection(&ints)
}

fn solve_projection(ints: &ChannelIntegrals) -> Result<EffectivePotentialChannel> {
    let n = ints.n;
    let dim = 4 * n;
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    for m in 0..n {
        for t in 0..4 {
            for k in 0..n {
                for u in 0..4 {
                    mat[(4 * m + t, 4 * k + u)] = ints.basis_projection(m, t, k, u);
                }
            }
        }
    }
    // Symmetric diagonal equilibration before the condition estimate.
    let scale: Vec<f64> = (0..dim)
        .map(|i| {
            let d = mat[(i, i)].norm();
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..dim {
        for j in 0..dim {
            mat[(i, j)] *= scale[i] * scale[j];
        }
    }
    let rhs = DVector::from_iterator(dim, (0..dim).map(|i| ints.rhs[i] * scale[i]));

    let norm1 = one_norm(&mat);
    let lu = mat.lu();
    let inverse = lu.try_inverse().ok_or(Error::SingularProjection {
        condition: f64::INFINITY,
    })?;
    let condition = norm1 * one_norm(&inverse);
    if !condition.is_finite() || condition > MAX_PROJECTION_CONDITION {
        return Err(Error::SingularProjection { condition });
    }
    let sol = lu.solve(&rhs).ok_or(Error::SingularProjection {
        condition: f64::INFINITY,
    })?;

    let mut out = EffectivePotentialChannel {
        v2_par: Vec::with_capacity(n),
        v2_perp: Vec::with_capacity(n),
        v1: Vec::with_capacity(n),
        v0: Vec::with_capacity(n),
    };
    for k in 0..n {
        out.v2_par.push(sol[4 * k] * scale[4 * k]);
        out.v2_perp.push(sol[4 * k + 1] * scale[4 * k + 1]);
        out.v1.push(sol[4 * k + 2] * scale[4 * k + 2]);
        out.v0.push(sol[4 * k + 3] * scale[4 * k + 3]);
    }
    Ok(out)
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn fit_effective_potential(
    ansatz: &BicomplexAnsatz,
    params: &ProblemParams,
    channel: Channel,
) -> Result<EffectivePotentialChannel> {
    let (own, partner) = ansatz.channel_pair(channel);
    fit_channel(own, partner, params)
}

fn rates_from_potential(own: &AnsatzChannel, v: &EffectivePotentialChannel) -> Vec<GaussianRates> {
    own.gaussians
        .iter()
        .enumerate()
        .map(|(n, g)| GaussianRates {
            a_par: -I * (4.0 * g.a_par * g.a_par - v.v2_par[n]),
            a_perp: -I * (4.0 * g.a_perp * g.a_perp - v.v2_perp[n]),
            b: -I * (4.0 * g.a_par * g.b + v.v1[n]),
            c: -I * (2.0 * (g.a_par + 2.0 * g.a_perp) - g.b * g.b + v.v0[n]),
        })
        .collect()
}

/// Equations of motion of one channel given its partner.
pub fn channel_equations_of_motion(
    own: &AnsatzChannel,
    partner: &AnsatzChannel,
    params: &ProblemParams,
) -> Result<Vec<GaussianRates>> {
    let v = fit_channel(own, partner, params)?;
    Ok(rates_from_potential(own, &v))
}

pub fn equations_of_motion(ansatz: &BicomplexAnsatz, params: &ProblemParams) -> Result<AnsatzDerivatives> {
    Ok(AnsatzDerivatives {
        plus: channel_equations_of_motion(&ansatz.plus, &ansatz.minus, params)?,
        minus: channel_equations_of_motion(&ansatz.minus, &ansatz.plus, params)?,
    })
}

/// Projections of `i ψ̇ₛ − Hₛ ψₛ` onto `{x², y², x, 1} · g_s̄ᵐ`, channel `+`
/// first, then `−`; `4N` entries per channel.
///
/// The kinetic term is applied in closed form, so the entries vanish only when
/// `derivs` satisfy the Galerkin conditions.
pub fn mclachlan_residual(
    ansatz: &BicomplexAnsatz,
    derivs: &AnsatzDerivatives,
    params: &ProblemParams,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(8 * ansatz.n_gaussians());
    for which in [Channel::Plus, Channel::Minus] {
        let (own, partner) = ansatz.channel_pair(which);
        let rates = derivs.channel(which);
        if rates.len() != own.len() {
            return Err(Error::InvalidInput("derivative shape does not match ansatz".into()));
        }
        let ints = ChannelIntegrals::build(own, partner, params)?;
        for m in 0..ints.n {
            for t in 0..4 {
                let mut r = -ints.rhs[4 * m + t];
                for (n, (g, d)) in own.gaussians.iter().zip(rates).enumerate() {
                    // i ψ̇ + Δψ expressed in the basis {x², y²+z², x, 1}.
                    let coeffs = [
                        -I * d.a_par + 4.0 * g.a_par * g.a_par,
                        -I * d.a_perp + 4.0 * g.a_perp * g.a_perp,
                        I * d.b - 4.0 * g.a_par * g.b,
                        I * d.c + g.b * g.b - 2.0 * g.a_par - 4.0 * g.a_perp,
                    ];
                    for (u, coeff) in coeffs.iter().enumerate() {
                        r += coeff * ints.basis_projection(m, t, n, u);
                    }
                }
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Options for [`propagate`].
#[derive(Clone, Copy, Debug)]
pub struct PropagateOptions {
    /// Absolute local error tolerance per step.
    pub tol: f64,
    /// Spacing of trajectory samples.
    pub stride: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            stride: 0.1,
            initial_step: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

pub const MIN_STEP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<(f64, BicomplexAnsatz)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

fn flatten(ansatz: &BicomplexAnsatz) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(8 * ansatz.n_gaussians());
    for ch in [&ansatz.plus, &ansatz.minus] {
        for g in &ch.gaussians {
            v.extend_from_slice(&[g.a_par, g.a_perp, g.b, g.c]);
        }
    }
    v
}

fn unflatten(v: &[Complex64], n: usize) -> BicomplexAnsatz {
    let channel = |offset: usize| {
        AnsatzChannel::new(
            (0..n)
                .map(|k| {
                    let i = offset + 4 * k;
                    Gaussian::new(v[i], v[i + 1], v[i + 2], v[i + 3])
                })
                .collect(),
        )
    };
    BicomplexAnsatz {
        plus: channel(0),
        minus: channel(4 * n),
    }
}

fn rhs_flat(y: &[Complex64], n: usize, params: &ProblemParams) -> Result<Vec<Complex64>> {
    let ansatz = unflatten(y, n);
    if !ansatz.is_normalizable() {
        return Err(Error::NonNormalizable {
            re_a: ansatz
                .plus
                .gaussians
                .iter()
                .chain(&ansatz.minus.gaussians)
                .map(|g| g.a_par.re.min(g.a_perp.re))
                .fold(f64::INFINITY, f64::min),
        });
    }
    let d = equations_of_motion(&ansatz, params)?;
    let mut out = Vec::with_capacity(y.len());
    for rates in [&d.plus, &d.minus] {
        for r in rates {
            out.extend_from_slice(&[r.a_par, r.a_perp, r.b, r.c]);
        }
    }
    Ok(out)
}

// Dormand–Prince 5(4) tableau; the system is autonomous, so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) -> Vec<Complex64> {
    let mut out = y.to_vec();
    for (coef, k) in terms {
        let s = h * coef;
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += s * ki;
        }
    }
    out
}

/// One Dormand–Prince step; returns the 5th-order solution, its derivative
/// (FSAL) and the embedded error norm (max abs).
fn dopri_step(
    y: &[Complex64],
    k1: &[Complex64],
    h: f64,
    n: usize,
    params: &ProblemParams,
) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
    let k2 = rhs_flat(&axpy(y, h, &[(A21, k1)]), n, params)?;
    let k3 = rhs_flat(&axpy(y, h, &[(A31, k1), (A32, &k2)]), n, params)?;
    let k4 = rhs_flat(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]), n, params)?;
    let k5 = rhs_flat(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]), n, params)?;
    let k6 = rhs_flat(
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        n,
        params,
    )?;
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs_flat(&y_new, n, params)?;
    let mut err = 0.0_f64;
    for i in 0..y.len() {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        err = err.max(e.norm());
    }
    Ok((y_new, k7, err))
}

/// Integrates the equations of motion from `t = 0` to `t_final` with an
/// embedded Runge–Kutta 5(4) pair and PI step control. Samples are taken at
/// multiples of `opts.stride` and at `t_final`.
pub fn propagate(
    ansatz: &BicomplexAnsatz,
    params: &ProblemParams,
    t_final: f64,
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !(opts.tol > 0.0) || !(opts.stride > 0.0) {
        return Err(Error::InvalidInput("t_final, tol and stride must be positive".into()));
    }
    let n = ansatz.n_gaussians();
    let mut y = flatten(ansatz);
    let mut k1 = rhs_flat(&y, n, params)?;
    let mut t = 0.0;
    let mut h = opts.initial_step.min(t_final);
    let mut samples = vec![(0.0, ansatz.clone())];
    let mut next_sample = opts.stride.min(t_final);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut prev_err = 1.0_f64;

    const SAFETY: f64 = 0.9;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;

    while t < t_final {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let mut step = h.min(next_sample - t);
        let hits_sample = step >= next_sample - t;
        if hits_sample {
            step = next_sample - t;
        }
        if step < MIN_STEP && !hits_sample {
            return Err(Error::StepSizeUnderflow { t, h: step });
        }
        match dopri_step(&y, &k1, step, n, params) {
            Ok((y_new, k_new, err)) if err <= opts.tol => {
                t = if hits_sample { next_sample } else { t + step };
                y = y_new;
                k1 = k_new;
                accepted += 1;
                let ratio = (err / opts.tol).max(1e-10);
                let factor = SAFETY * ratio.powf(-ALPHA) * prev_err.powf(BETA);
                prev_err = ratio;
                if !hits_sample || step >= h {
                    h = step * factor.clamp(0.2, 5.0);
                }
                if hits_sample {
                    samples.push((t, unflatten(&y, n)));
                    if t >= t_final {
                        break;
                    }
                    next_sample = (next_sample + opts.stride).min(t_final);
                    if t_final - next_sample < 1e-12 * t_final {
                        next_sample = t_final;
                    }
                }
            }
            Ok((_, _, err)) => {
                rejected += 1;
                let ratio = err / opts.tol;
                h = step * (SAFETY * ratio.powf(-0.2)).clamp(0.1, 0.9);
                if h < MIN_STEP {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
            }
            Err(Error::NonNormalizable { .. }) | Err(Error::SingularProjection { .. }) => {
                rejected += 1;
                h = step * 0.25;
                if h < MIN_STEP {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        samples,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// A trajectory as a table: `t`, then per channel and Gaussian the real and
/// imaginary parts of `a_par`, `a_perp`, `b`, `c`.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let n = traj.samples.first().map(|(_, a)| a.n_gaussians()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for ch in ["plus", "minus"] {
        for g in 1..=n {
            for p in ["a_par", "a_perp", "b", "c"] {
                header.push(format!("{ch}_g{g}_{p}_re"));
                header.push(format!("{ch}_g{g}_{p}_im"));
            }
        }
    }
    let rows = traj
        .samples
        .iter()
        .map(|(t, ansatz)| {
            let mut row = vec![fmt_f64(*t)];
            for z in flatten(ansatz) {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            row
        })
        .collect();
    Table { header, rows }
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    trajectory_table(traj).write_csv(out)
}
