//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls the closed-form integrals of the library; Gaussians are
//! evaluated pointwise and integrated numerically.
#![allow(dead_code)]

use std::f64::consts::PI;

use bicusp::{AnsatzChannel, BicomplexAnsatz, Gaussian, ProblemParams};
use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::Rng;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

// ---------------------------------------------------------------------------
// one-dimensional adaptive quadrature

/// Real integral by the double-exponential rule, bisected while the rule's
/// own error estimate exceeds the target and the two halves disagree with
/// the whole.
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let whole = quadrature::integrate(f, a, b, tol);
    if whole.error_estimate <= tol || depth == 0 {
        return whole.integral;
    }
    let m = 0.5 * (a + b);
    let left = quadrature::integrate(f, a, m, 0.5 * tol).integral;
    let right = quadrature::integrate(f, m, b, 0.5 * tol).integral;
    if (left + right - whole.integral).abs() <= tol {
        return left + right;
    }
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫ f` over `[a, b]` for a complex integrand, to absolute accuracy `tol`.
pub fn integrate_c(f: impl Fn(f64) -> C, a: f64, b: f64, tol: f64) -> C {
    let re = adaptive(&|x| f(x).re, a, b, tol, 8);
    let im = adaptive(&|x| f(x).im, a, b, tol, 8);
    c(re, im)
}

/// Window outside which `|exp(−a x² + b x)|` is below `e^{−60}` of its peak.
pub fn window(a: C, b: C) -> (f64, f64) {
    let centre = b.re / (2.0 * a.re);
    let half = (60.0 / a.re).sqrt() + 2.0;
    (centre - half, centre + half)
}

/// Quadrature value of `∫ xᵏ exp(−a x² + b x) dx` together with `∫ |integrand|`,
/// which measures how much cancellation the value hides.
pub fn moment_by_quadrature(a: C, b: C, k: i32) -> (C, f64) {
    let f = |x: f64| x.powi(k) * (-a * x * x + b * x).exp();
    let (lo, hi) = window(a, b);
    let mass = adaptive(&|x| f(x).norm(), lo, hi, 1e-15, 8);
    (integrate_c(f, lo, hi, 1e-14 * mass), mass)
}

// ---------------------------------------------------------------------------
// pointwise Gaussians and the potential, written out independently

pub fn gauss_at(g: &Gaussian, x: f64, r2: f64) -> C {
    (-g.a_par * x * x - g.a_perp * r2 + g.b * x + g.c).exp()
}

pub fn channel_at(ch: &AnsatzChannel, x: f64, r2: f64) -> C {
    ch.gaussians.iter().map(|g| gauss_at(g, x, r2)).sum()
}

pub fn potential_at(p: &ProblemParams, x: f64, r2: f64) -> C {
    let v = &p.potential;
    c(
        0.25 * (x * x + v.omega * v.omega * r2) + v.barrier_height * (-v.barrier_width * x * x).exp(),
        v.gamma * x * (-v.gainloss_width * x * x).exp(),
    )
}

/// `∫ x^(kx+p) y^ky z^kz e^{−w x²} conj(bra) ket d³x` as a product of three
/// one-dimensional quadratures of the pointwise integrand along the axes.
/// Returns the value and the product of the absolute masses.
pub fn weighted_by_quadrature(bra: &Gaussian, ket: &Gaussian, w: f64, p: i32, mono: (i32, i32, i32)) -> (C, f64) {
    let along = |axis: usize, power: i32| {
        let f = move |t: f64| {
            let (x, y, z) = match axis {
                0 => (t, 0.0, 0.0),
                1 => (0.0, t, 0.0),
                _ => (0.0, 0.0, t),
            };
            let r2 = y * y + z * z;
            let env = if axis == 0 { (-w * x * x).exp() } else { 1.0 };
            t.powi(power) * env * gauss_at(bra, x, r2).conj() * gauss_at(ket, x, r2)
        };
        let (a, b) = if axis == 0 {
            (bra.a_par.conj() + ket.a_par + w, bra.b.conj() + ket.b)
        } else {
            (bra.a_perp.conj() + ket.a_perp, c(0.0, 0.0))
        };
        let (lo, hi) = window(a, b);
        let mass = adaptive(&|t| f(t).norm(), lo, hi, 1e-15, 8);
        (integrate_c(f, lo, hi, 1e-14 * mass), mass)
    };
    let (ix, mx) = along(0, mono.0 + p);
    let (iy, my) = along(1, mono.1);
    let (iz, mz) = along(2, mono.2);
    // each axis integral carries the value at the origin once
    let f0 = gauss_at(bra, 0.0, 0.0).conj() * gauss_at(ket, 0.0, 0.0);
    (ix * iy * iz / (f0 * f0), mx * my * mz / f0.norm_sqr())
}

// ---------------------------------------------------------------------------
// cylindrical Gauss–Legendre grid

/// Product grid in `(x, r)` with weights including the `2πr` Jacobian.
pub struct CylGrid {
    pub points: Vec<(f64, f64, f64)>,
}

fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(order.try_into().unwrap());
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let (a, b) = (lo + p as f64 * h, lo + (p + 1) as f64 * h);
        for &(t, w) in rule.as_node_weight_pairs() {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * t, 0.5 * (b - a) * w));
        }
    }
    out
}

impl CylGrid {
    /// Box covering every Gaussian of the channels with margin.
    pub fn covering(channels: &[&AnsatzChannel]) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut r_hi = 0.0_f64;
        for g in channels.iter().flat_map(|ch| &ch.gaussians) {
            let (a, b) = window(g.a_par, g.b);
            lo = lo.min(a);
            hi = hi.max(b);
            r_hi = r_hi.max((60.0 / g.a_perp.re).sqrt() + 1.0);
        }
        let xs = composite(lo, hi, 48, 24);
        let rs = composite(0.0, r_hi, 24, 24);
        let mut points = Vec::with_capacity(xs.len() * rs.len());
        for &(x, wx) in &xs {
            for &(r, wr) in &rs {
                points.push((x, r * r, wx * wr * 2.0 * PI * r));
            }
        }
        Self { points }
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> C) -> C {
        self.points.iter().map(|&(x, r2, w)| w * f(x, r2)).sum()
    }
}

/// Effective-potential coefficients `(v2_par, v2_perp, v1, v0)` per Gaussian of
/// `own`, from the projection system assembled on the grid:
/// test functions `{x², y², x, 1}·ḡᵐ` with `ḡ` from `partner`, unknowns
/// multiplying `{x², y²+z², x, 1}·gⁿ`, right side `(V + 8πNa ψ conj(ψ̄))ψ`.
pub fn fit_by_grid(own: &AnsatzChannel, partner: &AnsatzChannel, params: &ProblemParams) -> Vec<[C; 4]> {
    let n = own.len();
    let dim = 4 * n;
    let grid = CylGrid::covering(&[own, partner]);
    let mut mat = DMatrix::<C>::zeros(dim, dim);
    let mut rhs = DVector::<C>::zeros(dim);
    let coupling = 8.0 * PI * params.na;
    for &(x, r2, w) in &grid.points {
        // y² averaged over the angle around the x axis
        let tests = [x * x, 0.5 * r2, x, 1.0];
        let basis = [x * x, r2, x, 1.0];
        let own_g: Vec<C> = own.gaussians.iter().map(|g| gauss_at(g, x, r2)).collect();
        let psi: C = own_g.iter().sum();
        let partner_psi = channel_at(partner, x, r2);
        let v = potential_at(params, x, r2) + coupling * psi * partner_psi.conj();
        for (m, gm) in partner.gaussians.iter().enumerate() {
            let bra = gauss_at(gm, x, r2).conj() * w;
            for t in 0..4 {
                let bt = bra * tests[t];
                rhs[4 * m + t] += bt * v * psi;
                for (k, gk) in own_g.iter().enumerate() {
                    for u in 0..4 {
                        mat[(4 * m + t, 4 * k + u)] += bt * basis[u] * gk;
                    }
                }
            }
        }
    }
    let sol = mat.lu().solve(&rhs).expect("grid projection system is singular");
    (0..n)
        .map(|k| [sol[4 * k], sol[4 * k + 1], sol[4 * k + 2], sol[4 * k + 3]])
        .collect()
}

/// Chemical potential of a complex state from the grid fit of its last
/// Gaussian.
pub fn mu_by_grid(ch: &AnsatzChannel, params: &ProblemParams) -> C {
    let fit = fit_by_grid(ch, ch, params);
    let g = ch.gaussians.last().unwrap();
    2.0 * (g.a_par + 2.0 * g.a_perp) - g.b * g.b + fit.last().unwrap()[3]
}

/// `Δg` of one Gaussian, pointwise.
fn laplacian_at(g: &Gaussian, x: f64, r2: f64) -> C {
    let slope = g.b - 2.0 * g.a_par * x;
    (slope * slope - 2.0 * g.a_par + 4.0 * g.a_perp * g.a_perp * r2 - 4.0 * g.a_perp) * gauss_at(g, x, r2)
}

/// Projections of `μψ + Δψ − (V + 8πNa ψ conj(ψ̄))ψ` onto `{x², y², x, 1}·ḡᵐ`,
/// integrated on the grid. They vanish for a stationary state of the
/// variational equations with chemical potential `μ`.
pub fn stationary_projections_by_grid(
    own: &AnsatzChannel,
    partner: &AnsatzChannel,
    params: &ProblemParams,
    mu: C,
) -> Vec<C> {
    let grid = CylGrid::covering(&[own, partner]);
    let coupling = 8.0 * PI * params.na;
    let mut out = vec![c(0.0, 0.0); 4 * partner.len()];
    for &(x, r2, w) in &grid.points {
        let psi = channel_at(own, x, r2);
        let lap: C = own.gaussians.iter().map(|g| laplacian_at(g, x, r2)).sum();
        let v = potential_at(params, x, r2) + coupling * psi * channel_at(partner, x, r2).conj();
        let r = mu * psi + lap - v * psi;
        let tests = [x * x, 0.5 * r2, x, 1.0];
        for (m, gm) in partner.gaussians.iter().enumerate() {
            let bra = gauss_at(gm, x, r2).conj() * w * r;
            for t in 0..4 {
                out[4 * m + t] += bra * tests[t];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// finite-difference spectra of the linear problem

/// Lowest `count` eigenvalues of `−d²/dx² + V(x)` on `[−half, half]` with
/// Dirichlet walls, second-order differences on `n` interior points.
pub fn fd_levels(v: impl Fn(f64) -> f64, half: f64, n: usize, count: usize) -> Vec<f64> {
    let h = 2.0 * half / (n + 1) as f64;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let x = -half + (i + 1) as f64 * h;
        m[(i, i)] = 2.0 / (h * h) + v(x);
        if i + 1 < n {
            m[(i, i + 1)] = -1.0 / (h * h);
            m[(i + 1, i)] = -1.0 / (h * h);
        }
    }
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e.truncate(count);
    e
}

/// Lowest levels of the linear double-well Hamiltonian at `γ = 0`. The
/// operator separates on the Cartesian product grid, so its spectrum is the
/// sum of the axial levels and twice the transverse ground level.
pub fn linear_levels(params: &ProblemParams, count: usize) -> Vec<f64> {
    let p = params.potential;
    let axial = fd_levels(
        |x| 0.25 * x * x + p.barrier_height * (-p.barrier_width * x * x).exp(),
        12.0,
        1200,
        count,
    );
    let transverse = fd_levels(|y| 0.25 * p.omega * p.omega * y * y, 8.0, 800, 1)[0];
    axial.iter().map(|e| e + 2.0 * transverse).collect()
}

// ---------------------------------------------------------------------------
// cubic roots

/// Roots of `x³ + ρx − σ` as eigenvalues of the companion matrix.
pub fn companion_roots(rho: f64, sigma: f64) -> Vec<C> {
    #[rustfmt::skip]
    let m = Matrix3::new(
        0.0, 0.0, sigma,
        1.0, 0.0, -rho,
        0.0, 1.0, 0.0,
    );
    m.complex_eigenvalues().iter().copied().collect()
}

// ---------------------------------------------------------------------------
// random parameters

pub fn random_gaussian(rng: &mut impl Rng, centre: f64) -> Gaussian {
    Gaussian::new(
        c(rng.gen_range(0.3..1.2), rng.gen_range(-0.3..0.3)),
        c(rng.gen_range(0.4..1.0), rng.gen_range(-0.2..0.2)),
        c(centre + rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
        c(rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)),
    )
}

/// Two well separated Gaussians per channel, channels differing, normalized
/// to `⟨ψ₋|ψ₊⟩ = 1`.
pub fn random_ansatz(rng: &mut impl Rng) -> BicomplexAnsatz {
    let mut channel = || AnsatzChannel::new(vec![random_gaussian(rng, -2.0), random_gaussian(rng, 2.0)]);
    let plus = channel();
    let minus = channel();
    bicusp::stationary::normalize(&BicomplexAnsatz::new(plus, minus).unwrap()).unwrap()
}

pub fn rel_err(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
