//! Closed-form roots of the tangent normal form `ẋ = x² − σ` and the cusp
//! normal form `ẋ = x³ + ρx − σ`, for overlay against computed spectra
//! (`μ1` against `Re x`, `μj` against `Im x`).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, Table};

/// Parameters of the cusp normal form. Unrelated to the potential's own
/// `ρ` and `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormParams {
    pub rho_nf: f64,
    pub sigma_nf: f64,
}

impl NormalFormParams {
    pub fn new(rho_nf: f64, sigma_nf: f64) -> Self {
        Self { rho_nf, sigma_nf }
    }
}

/// Roots `±√σ` of `x² − σ`: real for `σ > 0`, an imaginary conjugate pair for
/// `σ < 0`.
pub fn tangent_roots(sigma_nf: f64) -> [Complex64; 2] {
    let r = Complex64::new(sigma_nf, 0.0).sqrt();
    [r, -r]
}

fn cubic(x: Complex64, p: &NormalFormParams) -> Complex64 {
    x * x * x + p.rho_nf * x - p.sigma_nf
}

/// One guarded Newton step on `x³ + ρx − σ`.
fn polish(x: f64, p: &NormalFormParams) -> f64 {
    let f = |x: f64| x * x * x + p.rho_nf * x - p.sigma_nf;
    let df = 3.0 * x * x + p.rho_nf;
    if df == 0.0 {
        return x;
    }
    let y = x - f(x) / df;
    if y.is_finite() && f(y).abs() < f(x).abs() {
        y
    } else {
        x
    }
}

/// The three roots of `x³ + ρx − σ = 0`, sorted by real part, then imaginary
/// part.
///
/// With three real roots the trigonometric form is used; otherwise Cardano's
/// formula gives the real root, and the conjugate pair follows from the
/// root-sum identities, which keeps it exactly conjugate.
pub fn cusp_roots(p: NormalFormParams) -> [Complex64; 3] {
    let (rho, q) = (p.rho_nf, -p.sigma_nf);
    let disc = q * q / 4.0 + rho * rho * rho / 27.0;
    let mut roots = if disc < 0.0 {
        let m = 2.0 * (-rho / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * rho)) * (-3.0 / rho).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(polish(m * (theta - 2.0 * PI * k / 3.0).cos(), &p), 0.0))
    } else {
        // pick the sign that avoids cancellation
        let u = (-q / 2.0 - q.signum() * disc.sqrt()).cbrt();
        let v = if u == 0.0 { 0.0 } else { -rho / (3.0 * u) };
        let x = polish(u + v, &p);
        // x + 2 Re z = 0 and 2x Re z + |z|² = ρ
        let re = -0.5 * x;
        let im = (rho + 0.75 * x * x).max(0.0).sqrt();
        [Complex64::new(x, 0.0), Complex64::new(re, im), Complex64::new(re, -im)]
    };
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Values of `σ` at which two roots of the cusp normal form coalesce:
/// `±2(−ρ/3)^{3/2}` for `ρ < 0`, none otherwise.
pub fn cusp_fold_sigmas(rho_nf: f64) -> Vec<f64> {
    if rho_nf < 0.0 {
        let s = 2.0 * (-rho_nf / 3.0).powf(1.5);
        vec![-s, s]
    } else {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalFormRow {
    pub rho: f64,
    pub sigma: f64,
    pub root_index: usize,
    pub re_x: f64,
    pub im_x: f64,
}

pub const NORMAL_FORM_HEADER: [&str; 5] = ["rho", "sigma", "root_index", "re_x", "im_x"];

/// All three cusp roots over `samples` equally spaced `σ` in `sigma_range`
/// for every `ρ` in `rho_values`.
pub fn emit_normal_form_spectrum(
    rho_values: &[f64],
    sigma_range: (f64, f64),
    samples: usize,
) -> Result<Vec<NormalFormRow>> {
    if samples < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {samples}")));
    }
    if !sigma_range.0.is_finite() || !sigma_range.1.is_finite() || rho_values.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("non-finite normal-form range".into()));
    }
    let mut rows = Vec::with_capacity(3 * samples * rho_values.len());
    for &rho in rho_values {
        for k in 0..samples {
            let sigma = sigma_range.0 + (sigma_range.1 - sigma_range.0) * k as f64 / (samples - 1) as f64;
            for (root_index, x) in cusp_roots(NormalFormParams::new(rho, sigma)).iter().enumerate() {
                rows.push(NormalFormRow {
                    rho,
                    sigma,
                    root_index,
                    re_x: x.re,
                    im_x: x.im,
                });
            }
        }
    }
    Ok(rows)
}

pub fn normal_form_table(rows: &[NormalFormRow]) -> Table {
    let mut table = Table::new(&NORMAL_FORM_HEADER);
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.rho),
                fmt_f64(r.sigma),
                r.root_index.to_string(),
                fmt_f64(r.re_x),
                fmt_f64(r.im_x),
            ]
        })
        .collect();
    table
}

pub fn write_normal_form_csv<W: std::io::Write>(rows: &[NormalFormRow], out: W) -> Result<()> {
    normal_form_table(rows).write_csv(out)
}

/// Residual of a root, for diagnostics.
pub fn root_residual(p: NormalFormParams, x: Complex64) -> f64 {
    cubic(x, &p).norm()
}
