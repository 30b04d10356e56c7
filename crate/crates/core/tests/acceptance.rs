//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line per criterion and fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use bicusp::continuation::{ContinuationOptions, CuspEstimate, FoldLabel};
use bicusp::gauss::{moment1d, pair_overlap, weighted_moment};
use bicusp::normalform::{cusp_fold_sigmas, cusp_roots, NormalFormParams};
use bicusp::parallel::{with_jobs, Execution};
use bicusp::scenario::{
    census, compute_spectrum, linspace, phase_diagram, states_at, transport_around_cusp, PhaseDiagramConfig, Spectrum,
    SpectrumConfig,
};
use bicusp::stationary::{find_stationary, state_distance, SolveMode, SolverOptions, StationaryState};
use bicusp::tdvp::{channel_equations_of_motion, equations_of_motion, mclachlan_residual, propagate, PropagateOptions};
use bicusp::{AnsatzChannel, Bicomplex, BicomplexAnsatz, Gaussian, PotentialConfig, ProblemParams};
use common::{c, rel_err, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG1_GAMMAS: [f64; 5] = [0.0, 0.0004, 0.0006, 0.0008, 0.001];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = fn(&mut Shared) -> Outcome;

/// Results shared between criteria.
#[derive(Default)]
struct Shared {
    cusp: Option<CuspEstimate>,
    spectra: Vec<Spectrum>,
}

fn main() {
    let mut shared = Shared::default();
    let criteria: [(&str, Criterion); 11] = [
        ("cusp coordinates", cusp_coordinates),
        ("fold census", fold_census),
        ("PT reality", pt_reality),
        ("solution-count conservation", solution_count),
        ("complex-reduction equivalence", complex_reduction),
        ("harmonic closed form", harmonic_closed_form),
        ("quadrature oracle suite", quadrature_suite),
        ("Galerkin residual", galerkin_residual),
        ("normal form", normal_form),
        ("stationarity under propagation", stationarity_under_propagation),
        ("around-the-cusp transport", around_the_cusp),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&mut shared)))
            .unwrap_or_else(|_| outcome(false, "panicked".into()));
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status} {name} ({:.1} s): {}",
            k + 1,
            t.elapsed().as_secs_f64(),
            result.detail
        );
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 11 criteria passed");
}

fn cusp_coordinates(shared: &mut Shared) -> Outcome {
    let t = Instant::now();
    let cfg = PhaseDiagramConfig {
        execution: Execution::Sequential,
        ..PhaseDiagramConfig::default()
    };
    let pd = with_jobs(Some(1), || phase_diagram(&cfg)).expect("phase diagram");
    let elapsed = t.elapsed();
    let cusp = match pd.cusp {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("no cusp: {e}")),
    };
    shared.cusp = Some(cusp);
    let dg = (cusp.gamma_c - 0.000766).abs() / 0.000766;
    let dn = (cusp.na_c + 1.352).abs() / 1.352;
    outcome(
        dg <= 0.02 && dn <= 0.02 && elapsed <= Duration::from_secs(600) && pd.issues.is_empty(),
        format!(
            "gamma_c={:.7} ({:+.2}%), na_c={:.5} ({:+.2}%), single-threaded {:.1} s, issues {}",
            cusp.gamma_c,
            100.0 * (cusp.gamma_c / 0.000766 - 1.0),
            cusp.na_c,
            100.0 * (cusp.na_c / -1.352 - 1.0),
            elapsed.as_secs_f64(),
            pd.issues.len()
        ),
    )
}

fn fold_census(_: &mut Shared) -> Outcome {
    let t = Instant::now();
    let expected = [2, 3, 3, 1, 1];
    let mut counts = Vec::new();
    let mut ordered = true;
    for g in FIG1_GAMMAS {
        let s = compute_spectrum(&SpectrumConfig::default().at_gamma(g)).expect("spectrum");
        counts.push(s.folds.len());
        if let (Some(t2), Some(t3)) = (s.fold(FoldLabel::T2), s.fold(FoldLabel::T3)) {
            ordered &= t2.na < t3.na;
        }
    }
    let elapsed = t.elapsed();
    outcome(
        counts == expected && ordered && elapsed <= Duration::from_secs(300),
        format!(
            "fold counts {counts:?} (expected {expected:?}), Na(T2) < Na(T3): {ordered}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn pt_reality(shared: &mut Shared) -> Outcome {
    let spectra: Vec<Spectrum> = FIG1_GAMMAS
        .iter()
        .map(|&g| {
            compute_spectrum(&SpectrumConfig {
                bicomplex: true,
                ..SpectrumConfig::default().at_gamma(g)
            })
            .expect("spectrum")
        })
        .collect();
    let mut real_worst = 0.0_f64;
    let mut real_points = 0;
    let mut bi_worst = 0.0_f64;
    let mut mirror_worst = 0.0_f64;
    let mut bi_points = 0;
    let mut unpaired = 0;
    let mut issues = 0;
    for s in &spectra {
        issues += s.issues.len();
        for b in &s.branches {
            for p in &b.points {
                real_worst = real_worst
                    .max(p.mu.zi().abs())
                    .max(p.mu.zj().abs())
                    .max(p.mu.zk().abs());
                real_points += 1;
            }
        }
        for b in s.bicomplex.iter().filter(|b| b.branch_id.ends_with(":j+")) {
            let name = b.branch_id.trim_end_matches(":j+");
            if !s.bicomplex.iter().any(|o| o.branch_id == format!("{name}:j-")) {
                unpaired += 1;
            }
            for p in &b.points {
                bi_worst = bi_worst.max(p.mu.zi().abs()).max(p.mu.zk().abs());
                // the partner is re-evaluated from the conjugated parameters
                let params = ProblemParams::new(b.base.potential, p.na);
                let partner = StationaryState::from_ansatz(p.ansatz.conj_j(), params, SolveMode::Bicomplex)
                    .expect("partner state");
                mirror_worst = mirror_worst
                    .max((partner.mu.zj() + p.mu.zj()).abs())
                    .max((partner.mu.z1() - p.mu.z1()).abs())
                    .max(partner.residual_norm.max(1e-9) - 1e-9);
                bi_points += 1;
            }
        }
    }
    shared.spectra = spectra;
    outcome(
        real_worst < 1e-9 && bi_worst < 1e-9 && mirror_worst < 1e-9 && unpaired == 0 && bi_points > 0,
        format!(
            "real points {real_points}: max |mu_i|,|mu_j|,|mu_k| = {real_worst:.1e}; bicomplex points {bi_points}: \
             max |mu_i|,|mu_k| = {bi_worst:.1e}, j-mirror defect {mirror_worst:.1e}, unpaired {unpaired}, issues {issues}"
        ),
    )
}

fn solution_count(_: &mut Shared) -> Outcome {
    let gammas = linspace(0.0, 0.001, 5);
    let nas = linspace(-1.45, -1.15, 5);
    let entries = census(&SpectrumConfig::default(), &gammas, &nas, Execution::Parallel).expect("census");
    let bad: Vec<String> = entries
        .iter()
        .filter(|e| e.total() != 4)
        .map(|e| format!("(gamma={}, na={}): {}+{}", e.gamma, e.na, e.real, e.bicomplex))
        .collect();
    outcome(
        bad.is_empty() && entries.len() == 25,
        if bad.is_empty() {
            "4 distinct states at all 25 grid points".into()
        } else {
            format!("wrong counts at {}", bad.join(", "))
        },
    )
}

fn complex_reduction(shared: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_solver = 0.0_f64;
    let mut worst_direct = 0.0_f64;
    let mut worst_grid = 0.0_f64;
    let mut done = 0;
    let solver = SolverOptions::default();
    while done < 10 {
        let s = &shared.spectra[rng.gen_range(0..shared.spectra.len())];
        let b = &s.branches[rng.gen_range(0..s.branches.len())];
        let p = &b.points[rng.gen_range(0..b.points.len())];
        let params = ProblemParams::new(b.base.potential, p.na);
        // zero all j and k parts: both channels become their mean
        let mean = AnsatzChannel::new(
            p.ansatz
                .plus
                .gaussians
                .iter()
                .zip(&p.ansatz.minus.gaussians)
                .map(|(g, h)| {
                    Gaussian::new(
                        0.5 * (g.a_par + h.a_par),
                        0.5 * (g.a_perp + h.a_perp),
                        0.5 * (g.b + h.b),
                        0.5 * (g.c + h.c),
                    )
                })
                .collect(),
        );
        let guess = BicomplexAnsatz::from_complex(mean);
        let bi = find_stationary(&guess, &params, &solver.with_mode(SolveMode::Bicomplex)).expect("bicomplex solve");
        let cx = find_stationary(&guess, &params, &solver.with_mode(SolveMode::Complex)).expect("complex solve");
        worst_solver =
            worst_solver.max((bi.mu.parts().iter().zip(cx.mu.parts()).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max));
        // μ = i ċ of the last Gaussian, from the ordinary complex equations
        let rates = channel_equations_of_motion(&bi.ansatz.plus, &bi.ansatz.plus, &params).expect("rates");
        let direct = Bicomplex::from_complex(c(0.0, 1.0) * rates.last().unwrap().c);
        worst_direct = worst_direct.max((direct - bi.mu).max_abs());
        let grid = common::mu_by_grid(&bi.ansatz.plus, &params);
        worst_grid = worst_grid.max((grid - bi.mu.plus()).norm());
        done += 1;
    }
    outcome(
        worst_solver < 1e-10 && worst_direct < 1e-10 && worst_grid < 1e-8,
        format!(
            "10 states: bicomplex vs complex solver {worst_solver:.1e}, vs direct complex evaluation {worst_direct:.1e}, \
             vs grid-quadrature fit {worst_grid:.1e}"
        ),
    )
}

fn harmonic_closed_form(_: &mut Shared) -> Outcome {
    let params = ProblemParams::new(PotentialConfig::harmonic(), 0.0);
    let guess = BicomplexAnsatz::from_complex(AnsatzChannel::new(vec![Gaussian::real(0.3, 0.6, 0.0, 0.0)]));
    let s = find_stationary(&guess, &params, &SolverOptions::default()).expect("harmonic state");
    let g = s.ansatz.plus.gaussians[0];
    let err = [
        (g.a_par - 0.25).norm(),
        (g.a_perp - 0.5).norm(),
        g.b.norm(),
        (s.mu - Bicomplex::from_real(2.5)).max_abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    outcome(
        err < 1e-10,
        format!(
            "A_par={:.12}, A_perp={:.12}, mu={}, max error {err:.1e}",
            g.a_par.re, g.a_perp.re, s.mu
        ),
    )
}

fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian {
    Gaussian::new(
        c(rng.gen_range(0.1..2.5), rng.gen_range(-1.0..1.0)),
        c(rng.gen_range(0.1..2.5), rng.gen_range(-1.0..1.0)),
        c(rng.gen_range(-2.0..2.0), rng.gen_range(-1.5..1.5)),
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0)),
    )
}

/// Cases whose integrand cancels so strongly that no quadrature resolves the
/// value to the required relative accuracy are redrawn.
const MAX_CANCELLATION: f64 = 1e4;

fn quadrature_suite(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    let mut redrawn = 0;
    let mut accepted = 0;
    while accepted < 200 {
        let kind = accepted % 3;
        let (value, (oracle, mass)): (C, (C, f64)) = match kind {
            0 => {
                let a = c(rng.gen_range(0.05..5.0), rng.gen_range(-2.0..2.0));
                let r = rng.gen_range(0.0..3.0);
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let b = C::from_polar(r, phi);
                let k = rng.gen_range(0..=6);
                (moment1d(a, b, k).unwrap(), common::moment_by_quadrature(a, b, k as i32))
            }
            1 => {
                let (bra, ket) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
                (
                    pair_overlap(&bra, &ket).unwrap(),
                    common::weighted_by_quadrature(&bra, &ket, 0.0, 0, (0, 0, 0)),
                )
            }
            _ => {
                let (bra, ket) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
                let w = [0.0, 0.5, 0.12][rng.gen_range(0..3)];
                let p = rng.gen_range(0..=1);
                let mono = (rng.gen_range(0..=2), 2 * rng.gen_range(0..=1), 2 * rng.gen_range(0..=1));
                (
                    weighted_moment(&bra, &ket, w, p, mono).unwrap(),
                    common::weighted_by_quadrature(
                        &bra,
                        &ket,
                        w,
                        p as i32,
                        (mono.0 as i32, mono.1 as i32, mono.2 as i32),
                    ),
                )
            }
        };
        if mass > MAX_CANCELLATION * oracle.norm() {
            redrawn += 1;
            continue;
        }
        worst = worst.max(rel_err(value, oracle));
        accepted += 1;
    }
    outcome(
        worst < 1e-10,
        format!("200 cases (moment1d, pair_overlap, weighted_moment): max relative error {worst:.1e}; {redrawn} ill-conditioned draws replaced"),
    )
}

fn galerkin_residual(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let ansatz = common::random_ansatz(&mut rng);
        let params = ProblemParams::new(
            PotentialConfig::default().with_gamma(rng.gen_range(0.0..0.001)),
            rng.gen_range(-1.5..0.0),
        );
        let d = equations_of_motion(&ansatz, &params).expect("equations of motion");
        let r = mclachlan_residual(&ansatz, &d, &params).expect("residual");
        worst = worst.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    outcome(
        worst <= 1e-9,
        format!("100 random normalized ansatz values: max |residual| {worst:.1e}"),
    )
}

fn normal_form(shared: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let (rho, sigma) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let oracle = common::companion_roots(rho, sigma);
        for x in cusp_roots(NormalFormParams::new(rho, sigma)) {
            let d = oracle.iter().map(|o| (o - x).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(d / x.norm().max(1.0));
        }
    }
    let mut double = 0.0_f64;
    for rho in [-3.0, -1.0, -0.3, -0.01] {
        let q = (-rho / 3.0_f64).sqrt();
        for (sigma, at) in cusp_fold_sigmas(rho).into_iter().zip([q, -q]) {
            let r = cusp_roots(NormalFormParams::new(rho, sigma));
            let near: Vec<f64> = r.iter().map(|x| (x - at).norm()).collect();
            let mut near = near.clone();
            near.sort_by(f64::total_cmp);
            double = double.max(near[1]);
        }
    }
    let p = shared.cusp.map(|c| c.fitted_exponent);
    let p_ok = p.is_some_and(|p| (1.3..=1.7).contains(&p));
    outcome(
        worst < 1e-12 && double < 1e-6 && p_ok,
        format!(
            "10^4 inputs vs companion matrix: max error {worst:.1e}; double roots at the fold sigmas within {double:.1e}; \
             fitted fold-spacing exponent {p:?}"
        ),
    )
}

fn stationarity_under_propagation(_: &mut Shared) -> Outcome {
    let spectrum = compute_spectrum(&SpectrumConfig::default().at_gamma(0.0004)).expect("spectrum");
    let states = states_at(&spectrum, -1.3, &ContinuationOptions::default());
    let real: Vec<&StationaryState> = states.iter().filter(|s| s.mu.zj().abs() < 1e-9).collect();
    let mut worst = 0.0_f64;
    for s in &real {
        let traj = propagate(&s.ansatz, &s.params, 10.0, &PropagateOptions::default()).expect("propagation");
        for (_, a) in &traj.samples {
            worst = worst.max(state_distance(a, &s.ansatz));
        }
    }
    outcome(
        !real.is_empty() && worst < 1e-6,
        format!(
            "{} real states at (0.0004, -1.3), t in [0, 10]: max parameter drift {worst:.1e}",
            real.len()
        ),
    )
}

/// Even-odd rule for a point inside a closed polygon.
fn encloses(path: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    for k in 0..path.len() {
        let (a, b) = (path[k], path[(k + 1) % path.len()]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn around_the_cusp(shared: &mut Shared) -> Outcome {
    let report = transport_around_cusp(&SpectrumConfig::default(), 0.0004, 0.001).expect("transport");
    let encircled = shared.cusp.is_some_and(|c| encloses(&report.path, [c.gamma_c, c.na_c]));
    outcome(
        report.distance_to_reference < 1e-6 && report.distance_to_start > 1e-3 && encircled,
        format!(
            "|B> -> distance to |D> {:.1e}, distance to |B> {:.2}, path encloses the cusp: {encircled}",
            report.distance_to_reference, report.distance_to_start
        ),
    )
}
