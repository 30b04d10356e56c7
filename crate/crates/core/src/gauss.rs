//! Closed-form Gaussian integrals for the coupled-Gaussian ansatz.
//!
//! Every integrand that appears in the projection equations is a monomial
//! times a single Gaussian `exp(-A∥ x² - A⊥ (y² + z²) + B x + C)`. Products of
//! ansatz Gaussians, conjugated bras and Gaussian envelopes of the potential
//! all reduce to that form, so [`CombinedGaussian`] is the one integral
//! primitive; the remaining functions are conveniences built on it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest power of `x` supported by [`moment1d`].
pub const MAX_MOMENT: usize = 6;

/// External potential
/// `V(x) = [x² + ω²(y² + z²)]/4 + v₀ exp(-σ x²) + iγ x exp(-ρ x²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialConfig {
    pub omega: f64,
    pub barrier_height: f64,
    pub barrier_width: f64,
    pub gainloss_width: f64,
    pub gamma: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            omega: 2.0,
            barrier_height: 4.0,
            barrier_width: 0.5,
            gainloss_width: 0.12,
            gamma: 0.0,
        }
    }
}

impl PotentialConfig {
    /// Pure harmonic trap with the default anisotropy.
    pub fn harmonic() -> Self {
        Self {
            barrier_height: 0.0,
            ..Self::default()
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega,
            self.barrier_height,
            self.barrier_width,
            self.gainloss_width,
            self.gamma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("potential parameters must be finite".into()));
        }
        if self.omega <= 0.0 || self.barrier_width <= 0.0 || self.gainloss_width <= 0.0 {
            return Err(Error::InvalidInput(
                "omega, barrier_width and gainloss_width must be positive".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidInput("gamma must be non-negative".into()));
        }
        Ok(())
    }

    /// Pointwise value of the potential.
    pub fn value(&self, x: [f64; 3]) -> Complex64 {
        let [x, y, z] = x;
        let re = 0.25 * (x * x + self.omega * self.omega * (y * y + z * z))
            + self.barrier_height * (-self.barrier_width * x * x).exp();
        let im = self.gamma * x * (-self.gainloss_width * x * x).exp();
        Complex64::new(re, im)
    }
}

/// Potential plus the contact interaction strength `Na` (entering as `8πNa`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub potential: PotentialConfig,
    pub na: f64,
}

impl ProblemParams {
    pub fn new(potential: PotentialConfig, na: f64) -> Self {
        Self { potential, na }
    }

    pub fn gamma(&self) -> f64 {
        self.potential.gamma
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if !self.na.is_finite() {
            return Err(Error::InvalidInput("na must be finite".into()));
        }
        Ok(())
    }

    /// Prefactor of the nonlinear term.
    pub fn coupling(&self) -> f64 {
        8.0 * PI * self.na
    }
}

/// One Gaussian `exp(-a∥ x² - a⊥ (y² + z²) + b x + c)` of one idempotent
/// channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub a_par: Complex64,
    pub a_perp: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl Gaussian {
    pub fn new(a_par: Complex64, a_perp: Complex64, b: Complex64, c: Complex64) -> Self {
        Self { a_par, a_perp, b, c }
    }

    pub fn real(a_par: f64, a_perp: f64, b: f64, c: f64) -> Self {
        Self::new(
            Complex64::new(a_par, 0.0),
            Complex64::new(a_perp, 0.0),
            Complex64::new(b, 0.0),
            Complex64::new(c, 0.0),
        )
    }

    pub fn is_normalizable(&self) -> bool {
        self.a_par.re > 0.0 && self.a_perp.re > 0.0
    }

    pub fn value(&self, x: [f64; 3]) -> Complex64 {
        let [x, y, z] = x;
        (-self.a_par * x * x - self.a_perp * (y * y + z * z) + self.b * x + self.c).exp()
    }

    /// Parameters of the complex conjugate function.
    pub fn conj(&self) -> Gaussian {
        Gaussian::new(self.a_par.conj(), self.a_perp.conj(), self.b.conj(), self.c.conj())
    }

    fn as_combined(&self) -> CombinedGaussian {
        CombinedGaussian {
            a_par: self.a_par,
            a_perp: self.a_perp,
            b: self.b,
            c: self.c,
        }
    }
}

/// The Gaussians of one idempotent channel, `ψ± = Σₙ g±ⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzChannel {
    pub gaussians: Vec<Gaussian>,
}

impl AnsatzChannel {
    pub fn new(gaussians: Vec<Gaussian>) -> Self {
        Self { gaussians }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn is_normalizable(&self) -> bool {
        !self.gaussians.is_empty() && self.gaussians.iter().all(Gaussian::is_normalizable)
    }

    /// Adds `shift` to every `cⁿ`, i.e. multiplies the channel by `exp(shift)`.
    pub fn shift_c(&mut self, shift: Complex64) {
        for g in &mut self.gaussians {
            g.c += shift;
        }
    }
}

/// Both idempotent channels of the bicomplex ansatz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicomplexAnsatz {
    pub plus: AnsatzChannel,
    pub minus: AnsatzChannel,
}

impl BicomplexAnsatz {
    pub fn new(plus: AnsatzChannel, minus: AnsatzChannel) -> Result<Self> {
        if plus.len() != minus.len() || plus.is_empty() {
            return Err(Error::InvalidInput(format!(
                "channel sizes must be equal and non-zero (got {} and {})",
                plus.len(),
                minus.len()
            )));
        }
        Ok(Self { plus, minus })
    }

    /// An ansatz with no `j`, `k` parts: both channels coincide.
    pub fn from_complex(channel: AnsatzChannel) -> Self {
        Self {
            plus: channel.clone(),
            minus: channel,
        }
    }

    pub fn n_gaussians(&self) -> usize {
        self.plus.len()
    }

    pub fn is_normalizable(&self) -> bool {
        self.plus.is_normalizable() && self.minus.is_normalizable()
    }

    pub fn channel(&self, which: Channel) -> &AnsatzChannel {
        match which {
            Channel::Plus => &self.plus,
            Channel::Minus => &self.minus,
        }
    }

    /// `(own, partner)` for the projection equations of `which`.
    pub fn channel_pair(&self, which: Channel) -> (&AnsatzChannel, &AnsatzChannel) {
        match which {
            Channel::Plus => (&self.plus, &self.minus),
            Channel::Minus => (&self.minus, &self.plus),
        }
    }

    /// Bicomplex value of the wavefunction at `x`.
    pub fn value(&self, x: [f64; 3]) -> crate::Bicomplex {
        crate::Bicomplex::from_pm(evaluate_channel(&self.plus, x), evaluate_channel(&self.minus, x))
    }

    /// Conjugation with respect to `j` of every parameter (channel swap).
    pub fn conj_j(&self) -> Self {
        Self {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    /// Largest `j` or `k` component over all parameters.
    pub fn max_jk_part(&self) -> f64 {
        let mut m = 0.0_f64;
        for (p, q) in self.plus.gaussians.iter().zip(&self.minus.gaussians) {
            for (u, v) in [(p.a_par, q.a_par), (p.a_perp, q.a_perp), (p.b, q.b), (p.c, q.c)] {
                let z = crate::Bicomplex::from_pm(u, v);
                m = m.max(z.zj().abs()).max(z.zk().abs());
            }
        }
        m
    }
}

/// Idempotent channel selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Plus,
    Minus,
}

impl Channel {
    pub fn partner(self) -> Channel {
        match self {
            Channel::Plus => Channel::Minus,
            Channel::Minus => Channel::Plus,
        }
    }
}

/// `∫ xᵏ exp(-a x² + b x) dx` over the real line.
///
/// Uses `M₀ = sqrt(π/a) exp(b²/4a)`, `M₁ = b/(2a) M₀` and
/// `Mₖ = ((k-1) Mₖ₋₂ + b Mₖ₋₁) / (2a)`.
pub fn moment1d(a: Complex64, b: Complex64, k: usize) -> Result<Complex64> {
    if k > MAX_MOMENT {
        return Err(Error::InvalidInput(format!("moment order {k} exceeds {MAX_MOMENT}")));
    }
    let table = moments(a, b)?;
    Ok(table[k])
}

/// All moments `M₀..=M₆` of `exp(-a x² + b x)`.
pub fn moments(a: Complex64, b: Complex64) -> Result<[Complex64; MAX_MOMENT + 1]> {
    if !(a.re > 0.0) {
        return Err(Error::NonNormalizable { re_a: a.re });
    }
    let mut m = [Complex64::new(0.0, 0.0); MAX_MOMENT + 1];
    let inv_2a = 0.5 / a;
    m[0] = (PI / a).sqrt() * (b * b * 0.5 * inv_2a).exp();
    m[1] = b * inv_2a * m[0];
    for k in 2..=MAX_MOMENT {
        m[k] = ((k as f64 - 1.0) * m[k - 2] + b * m[k - 1]) * inv_2a;
    }
    Ok(m)
}

/// Even moments of a centred Gaussian `exp(-a y²)`; odd entries are zero.
fn centred_moments(a: Complex64) -> Result<[Complex64; MAX_MOMENT + 1]> {
    if !(a.re > 0.0) {
        return Err(Error::NonNormalizable { re_a: a.re });
    }
    let mut m = [Complex64::new(0.0, 0.0); MAX_MOMENT + 1];
    let inv_2a = 0.5 / a;
    m[0] = (PI / a).sqrt();
    let mut k = 2;
    while k <= MAX_MOMENT {
        m[k] = (k as f64 - 1.0) * m[k - 2] * inv_2a;
        k += 2;
    }
    Ok(m)
}

/// A single Gaussian integrand `exp(-A∥ x² - A⊥ (y² + z²) + B x + C)` with
/// complex parameters, typically the product of several ansatz Gaussians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedGaussian {
    pub a_par: Complex64,
    pub a_perp: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl CombinedGaussian {
    /// Integrand `conj(bra) · ket`.
    pub fn pair(bra: &Gaussian, ket: &Gaussian) -> Self {
        bra.conj().as_combined().times(ket)
    }

    /// Multiplies by another ansatz Gaussian.
    pub fn times(self, g: &Gaussian) -> Self {
        Self {
            a_par: self.a_par + g.a_par,
            a_perp: self.a_perp + g.a_perp,
            b: self.b + g.b,
            c: self.c + g.c,
        }
    }

    /// Multiplies by the envelope `exp(-w x²)`.
    pub fn with_envelope(self, w: f64) -> Self {
        Self {
            a_par: self.a_par + w,
            ..self
        }
    }

    pub fn moments(&self) -> Result<MomentTable> {
        Ok(MomentTable {
            scale: self.c.exp(),
            x: moments(self.a_par, self.b)?,
            perp: centred_moments(self.a_perp)?,
        })
    }

    pub fn integral(&self, monomial: (usize, usize, usize)) -> Result<Complex64> {
        let (kx, ky, kz) = monomial;
        if kx > MAX_MOMENT || ky > MAX_MOMENT || kz > MAX_MOMENT {
            return Err(Error::InvalidInput(format!(
                "monomial {monomial:?} exceeds order {MAX_MOMENT}"
            )));
        }
        Ok(self.moments()?.get(kx, ky, kz))
    }
}

/// Precomputed one-dimensional moments of a [`CombinedGaussian`].
#[derive(Clone, Copy, Debug)]
pub struct MomentTable {
    scale: Complex64,
    x: [Complex64; MAX_MOMENT + 1],
    perp: [Complex64; MAX_MOMENT + 1],
}

impl MomentTable {
    /// `∫ x^kx y^ky z^kz (integrand) d³x`.
    #[inline]
    pub fn get(&self, kx: usize, ky: usize, kz: usize) -> Complex64 {
        self.scale * self.x[kx] * self.perp[ky] * self.perp[kz]
    }

    /// `∫ x^kx (y² + z²) (integrand) d³x`.
    #[inline]
    pub fn get_rho2(&self, kx: usize) -> Complex64 {
        2.0 * self.get(kx, 2, 0)
    }
}

/// `⟨bra|ket⟩ = ∫ conj(bra) ket d³x`.
pub fn pair_overlap(bra: &Gaussian, ket: &Gaussian) -> Result<Complex64> {
    CombinedGaussian::pair(bra, ket).integral((0, 0, 0))
}

/// `∫ x^(kx + x_power) y^ky z^kz exp(-extra_width x²) conj(bra) ket d³x`.
pub fn weighted_moment(
    bra: &Gaussian,
    ket: &Gaussian,
    extra_width: f64,
    x_power: usize,
    monomial: (usize, usize, usize),
) -> Result<Complex64> {
    let (kx, ky, kz) = monomial;
    CombinedGaussian::pair(bra, ket)
        .with_envelope(extra_width)
        .integral((kx + x_power, ky, kz))
}

/// Pointwise value of one channel wavefunction.
pub fn evaluate_channel(ch: &AnsatzChannel, x: [f64; 3]) -> Complex64 {
    ch.gaussians.iter().map(|g| g.value(x)).sum()
}

/// `⟨ψ_bra|ψ_ket⟩` for two channels.
pub fn channel_overlap(bra: &AnsatzChannel, ket: &AnsatzChannel) -> Result<Complex64> {
    let mut s = Complex64::new(0.0, 0.0);
    for gb in &bra.gaussians {
        for gk in &ket.gaussians {
            s += pair_overlap(gb, gk)?;
        }
    }
    Ok(s)
}
