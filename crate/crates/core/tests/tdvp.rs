mod common;

use bicusp::continuation::seed_states;
use bicusp::gauss::channel_overlap;
use bicusp::stationary::SolverOptions;
use bicusp::tdvp::{equations_of_motion, fit_effective_potential, mclachlan_residual, propagate, PropagateOptions};
use bicusp::{AnsatzChannel, BicomplexAnsatz, Channel, Gaussian, PotentialConfig, ProblemParams};
use common::{c, fit_by_grid, rel_err, C};

fn harmonic() -> ProblemParams {
    ProblemParams::new(PotentialConfig::harmonic(), 0.0)
}

fn single(g: Gaussian) -> BicomplexAnsatz {
    BicomplexAnsatz::from_complex(AnsatzChannel::new(vec![g]))
}

fn max_norm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn assert_fit_matches_grid(ansatz: &BicomplexAnsatz, params: &ProblemParams) {
    for which in [Channel::Plus, Channel::Minus] {
        let fit = fit_effective_potential(ansatz, params, which).unwrap();
        let (own, partner) = ansatz.channel_pair(which);
        let oracle = fit_by_grid(own, partner, params);
        for (k, o) in oracle.iter().enumerate() {
            let got = [fit.v2_par[k], fit.v2_perp[k], fit.v1[k], fit.v0[k]];
            for (g, e) in got.iter().zip(o) {
                let err = (g - e).norm() / e.norm().max(1.0);
                assert!(err < 1e-9, "{which:?} gaussian {k}: {g} vs {e}");
            }
        }
    }
}

#[test]
fn harmonic_fit_is_exact() {
    for g in [
        Gaussian::real(0.3, 0.7, 0.0, 0.0),
        Gaussian::new(c(0.8, 0.2), c(0.4, -0.1), c(0.5, 0.3), c(0.1, 0.0)),
    ] {
        let fit = fit_effective_potential(&single(g), &harmonic(), Channel::Plus).unwrap();
        assert!((fit.v2_par[0] - 0.25).norm() < 1e-12);
        assert!((fit.v2_perp[0] - 1.0).norm() < 1e-12);
        assert!(fit.v1[0].norm() < 1e-12 && fit.v0[0].norm() < 1e-12);
    }
}

#[test]
fn single_gaussian_fit_matches_grid_projection() {
    let params = ProblemParams::new(PotentialConfig::default().with_gamma(0.0004), 0.0);
    assert_fit_matches_grid(&single(Gaussian::real(0.4, 0.5, 0.0, 0.0)), &params);
}

#[test]
fn nonlinear_two_gaussian_fit_matches_grid_projection() {
    let params = ProblemParams::new(PotentialConfig::default().with_gamma(0.0006), -1.0);
    let plus = AnsatzChannel::new(vec![
        Gaussian::new(c(0.6, 0.05), c(0.5, 0.01), c(-1.8, 0.1), c(-1.2, 0.2)),
        Gaussian::new(c(0.55, -0.03), c(0.48, 0.0), c(1.7, -0.05), c(-1.1, 0.0)),
    ]);
    let minus = AnsatzChannel::new(vec![
        Gaussian::new(c(0.58, -0.02), c(0.52, 0.0), c(-1.75, -0.1), c(-1.15, -0.1)),
        Gaussian::new(c(0.6, 0.04), c(0.5, -0.01), c(1.8, 0.07), c(-1.2, 0.05)),
    ]);
    assert_fit_matches_grid(&BicomplexAnsatz::new(plus, minus).unwrap(), &params);
}

#[test]
fn barrier_enters_linearly() {
    let ansatz = single(Gaussian::new(c(0.5, 0.1), c(0.5, 0.0), c(0.3, 0.0), c(0.0, 0.0)));
    let fit = |v0: f64| {
        let pot = PotentialConfig {
            barrier_height: v0,
            ..PotentialConfig::default()
        };
        fit_effective_potential(&ansatz, &ProblemParams::new(pot, -0.5), Channel::Plus).unwrap()
    };
    let (f0, f1, f2) = (fit(0.0), fit(4.0), fit(8.0));
    for (d1, d2) in [
        (f1.v0[0] - f0.v0[0], f2.v0[0] - f1.v0[0]),
        (f1.v2_par[0] - f0.v2_par[0], f2.v2_par[0] - f1.v2_par[0]),
        (f1.v1[0] - f0.v1[0], f2.v1[0] - f1.v1[0]),
    ] {
        assert!((d1 - d2).norm() < 1e-12 * d1.norm().max(1.0), "{d1} vs {d2}");
    }
}

#[test]
fn harmonic_ground_state_only_rotates_its_phase() {
    let d = equations_of_motion(&single(Gaussian::real(0.25, 0.5, 0.0, 0.0)), &harmonic()).unwrap();
    let r = d.plus[0];
    assert!(r.a_par.norm() < 1e-12 && r.a_perp.norm() < 1e-12 && r.b.norm() < 1e-12);
    assert!((r.c - c(0.0, -2.5)).norm() < 1e-12);
    assert_eq!(d.plus, d.minus);
}

#[test]
fn squeezed_gaussian_breathes() {
    let d = equations_of_motion(&single(Gaussian::real(0.5, 0.5, 0.0, 0.0)), &harmonic()).unwrap();
    assert!((d.plus[0].a_par - c(0.0, -0.75)).norm() < 1e-12);
}

#[test]
fn two_gaussian_rates_follow_the_grid_fit() {
    let params = ProblemParams::new(PotentialConfig::default().with_gamma(0.0004), -1.3);
    let ch = AnsatzChannel::new(vec![
        Gaussian::new(c(0.6, 0.02), c(0.5, 0.0), c(-1.8, 0.05), c(-1.2, 0.1)),
        Gaussian::new(c(0.6, -0.02), c(0.5, 0.0), c(1.8, 0.05), c(-1.2, -0.1)),
    ]);
    let d = equations_of_motion(&BicomplexAnsatz::from_complex(ch.clone()), &params).unwrap();
    let fit = fit_by_grid(&ch, &ch, &params);
    let i = c(0.0, 1.0);
    for (k, (g, v)) in ch.gaussians.iter().zip(&fit).enumerate() {
        let expect = [
            -i * (4.0 * g.a_par * g.a_par - v[0]),
            -i * (4.0 * g.a_perp * g.a_perp - v[1]),
            -i * (4.0 * g.a_par * g.b + v[2]),
            -i * (2.0 * (g.a_par + 2.0 * g.a_perp) - g.b * g.b + v[3]),
        ];
        let got = [d.plus[k].a_par, d.plus[k].a_perp, d.plus[k].b, d.plus[k].c];
        for (a, e) in got.iter().zip(expect) {
            assert!((a - e).norm() < 1e-9 * e.norm().max(1.0), "gaussian {k}: {a} vs {e}");
        }
    }
}

#[test]
fn residual_vanishes_only_for_the_true_rates() {
    let ground = single(Gaussian::real(0.25, 0.5, 0.0, 0.0));
    let d = equations_of_motion(&ground, &harmonic()).unwrap();
    assert!(max_norm(&mclachlan_residual(&ground, &d, &harmonic()).unwrap()) <= 1e-12);

    let params = ProblemParams::new(PotentialConfig::default().with_gamma(0.0008), -1.2);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
    let ansatz = common::random_ansatz(&mut rng);
    let mut d = equations_of_motion(&ansatz, &params).unwrap();
    assert!(max_norm(&mclachlan_residual(&ansatz, &d, &params).unwrap()) <= 1e-9);
    d.plus[0].b += 0.1;
    assert!(max_norm(&mclachlan_residual(&ansatz, &d, &params).unwrap()) > 1e-3);
}

#[test]
fn complex_states_stay_complex() {
    let params = ProblemParams::new(PotentialConfig::default().with_gamma(0.001), -1.4);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let ansatz = BicomplexAnsatz::from_complex(common::random_ansatz(&mut rng).plus);
    let d = equations_of_motion(&ansatz, &params).unwrap();
    assert_eq!(d.plus, d.minus);
}

#[test]
fn harmonic_state_propagates_as_a_phase() {
    let start = single(Gaussian::real(0.25, 0.5, 0.0, 0.0));
    let traj = propagate(&start, &harmonic(), 10.0, &PropagateOptions::default()).unwrap();
    let (t, end) = traj.samples.last().unwrap();
    assert!((t - 10.0).abs() < 1e-12);
    let (g0, g) = (start.plus.gaussians[0], end.plus.gaussians[0]);
    assert!((g.a_par - g0.a_par).norm() < 1e-8 && (g.a_perp - g0.a_perp).norm() < 1e-8);
    assert!(g.b.norm() < 1e-8);
    assert!((g.c - g0.c - c(0.0, -25.0)).norm() < 1e-6);
}

#[test]
fn breathing_is_converged_in_the_tolerance() {
    let start = single(Gaussian::real(0.5, 0.5, 0.0, 0.0));
    let tol = 1e-8;
    let run = |tol| {
        propagate(
            &start,
            &harmonic(),
            5.0,
            &PropagateOptions {
                tol,
                stride: 0.5,
                ..PropagateOptions::default()
            },
        )
        .unwrap()
    };
    let (coarse, fine) = (run(tol), run(tol / 100.0));
    assert_eq!(coarse.samples.len(), fine.samples.len());
    let mut dev = 0.0_f64;
    let mut a_values = Vec::new();
    for ((_, a), (_, b)) in coarse.samples.iter().zip(&fine.samples) {
        let (ga, gb) = (a.plus.gaussians[0], b.plus.gaussians[0]);
        for (x, y) in [(ga.a_par, gb.a_par), (ga.a_perp, gb.a_perp), (ga.b, gb.b), (ga.c, gb.c)] {
            dev = dev.max((x - y).norm());
        }
        a_values.push(ga.a_par.re);
    }
    assert!(dev < 10.0 * tol, "deviation {dev}");
    // the width oscillates: Re a_par leaves and comes back towards 1/2
    let min = a_values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min < 0.3, "no breathing: min Re a_par = {min}");
}

#[test]
fn norm_is_conserved_without_gain_loss() {
    let params = ProblemParams::new(PotentialConfig::default(), -0.8);
    let seed = &seed_states(&ProblemParams::new(params.potential, 0.0), &SolverOptions::default()).unwrap()[0];
    let mut start = seed.ansatz.clone();
    for ch in [&mut start.plus, &mut start.minus] {
        ch.gaussians[0].b += 0.05;
    }
    let tol = 1e-9;
    let opts = PropagateOptions {
        tol,
        stride: 0.25,
        ..PropagateOptions::default()
    };
    let traj = propagate(&start, &params, 2.0, &opts).unwrap();
    let n0 = channel_overlap(&start.minus, &start.plus).unwrap();
    for (t, a) in &traj.samples {
        let n = channel_overlap(&a.minus, &a.plus).unwrap();
        assert!(rel_err(n, n0) < 10.0 * tol, "t={t}: {n} vs {n0}");
    }
}
