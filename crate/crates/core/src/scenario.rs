//! Workflows on the double well built from the continuation primitives:
//! spectra with labelled folds and bicomplex branches, the fold phase
//! diagram, a census of stationary states and transport around the cusp.

use serde::{Deserialize, Serialize};

use crate::continuation::{
    continue_branch, continue_branch_along, detect_folds, locate_cusp, seed_bicomplex_branch, seed_states, Axis,
    Branch, ContinuationOptions, CuspEstimate, FoldCurve, FoldLabel, FoldPoint, FoldRecord, Termination,
};
use crate::error::{Error, Result};
use crate::gauss::{PotentialConfig, ProblemParams};
use crate::parallel::{par_map, Execution};
use crate::stationary::{find_stationary, state_distance, FreeParameterVector, SolveMode, StationaryState};

/// `Na` window around the cusp.
pub const DEFAULT_WINDOW: (f64, f64) = (-1.5, -1.1);

/// Two states closer than this (after gauge fixing) are the same state.
pub const SAME_STATE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumConfig {
    /// Potential including `γ`.
    pub potential: PotentialConfig,
    pub window: (f64, f64),
    /// Initial step while moving the seeds from `Na = 0` to the window.
    pub approach_step: f64,
    pub continuation: ContinuationOptions,
    /// Also trace the bicomplex branches born at the folds.
    pub bicomplex: bool,
    /// Distance beyond a fold at which bicomplex branches are seeded.
    pub bicomplex_offset: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            potential: PotentialConfig::default(),
            window: DEFAULT_WINDOW,
            approach_step: 0.05,
            continuation: ContinuationOptions::default(),
            bicomplex: false,
            bicomplex_offset: 1e-3,
        }
    }
}

impl SpectrumConfig {
    pub fn at_gamma(&self, gamma: f64) -> Self {
        Self {
            potential: self.potential.with_gamma(gamma),
            ..self.clone()
        }
    }

    fn window(&self) -> (f64, f64) {
        (self.window.0.min(self.window.1), self.window.0.max(self.window.1))
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub gamma: f64,
    /// Branches of states with real `μ` (`j` and `k` parts zero).
    pub branches: Vec<Branch>,
    pub folds: Vec<FoldPoint>,
    /// Bicomplex branches, each followed by its `j`-conjugate partner.
    pub bicomplex: Vec<Branch>,
    /// Branches that ended early or could not be started.
    pub issues: Vec<String>,
}

impl Spectrum {
    pub fn fold(&self, label: FoldLabel) -> Option<&FoldPoint> {
        self.folds.iter().find(|f| f.label == label)
    }

    pub fn fold_records(&self) -> Vec<FoldRecord> {
        self.folds
            .iter()
            .map(|f| FoldRecord {
                label: f.label,
                na: f.na,
                gamma: f.gamma,
                mu: f.mu,
                curvature: f.curvature,
                branch_id: f.branch_id.clone(),
            })
            .collect()
    }

    pub fn all_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().chain(&self.bicomplex)
    }
}

/// Seeds the symmetric (`A`) and antisymmetric (`B`) states at `Na = 0`,
/// moves them to the top of the window and traces them downwards through the
/// window. When `A` leaves the window as `B` (folds T1, T3, T2 on a single
/// branch) `B` is not traced again.
///
/// Folds are labelled in the order they occur: the first fold of `A` is T1;
/// later minima of `Na` are T2 and maxima T3.
pub fn compute_spectrum(cfg: &SpectrumConfig) -> Result<Spectrum> {
    let (lo, hi) = cfg.window();
    let gamma = cfg.potential.gamma;
    let params0 = ProblemParams::new(cfg.potential, 0.0);
    let solver = cfg.continuation.solver().with_mode(SolveMode::Complex);
    let seeds = seed_states(&params0, &solver)?;
    let labelled = seeds.len() == 2;
    let real_opts = cfg.continuation.with_mode(SolveMode::Complex);
    let approach_opts = ContinuationOptions {
        step0: cfg.approach_step,
        max_step: real_opts.max_step.max(2.0 * cfg.approach_step),
        ..real_opts
    };

    let mut branches: Vec<Branch> = Vec::new();
    let mut issues = Vec::new();
    for (seed, id) in seeds.iter().zip(["A", "B"]) {
        let start = if hi < seed.params.na {
            let approach = continue_branch(id, seed, -1.0, (hi, seed.params.na), &approach_opts)?;
            let last = approach.points.last().expect("branch has a start point");
            if approach.termination != Termination::Boundary || (last.na - hi).abs() > 1e-12 {
                issues.push(format!(
                    "branch {id}: did not reach the window (stopped at na={:.6}, {:?})",
                    last.na, approach.termination
                ));
                continue;
            }
            approach.last_state().expect("non-empty")
        } else {
            seed.clone()
        };
        let connected = branches.iter().any(|b| {
            b.points
                .last()
                .is_some_and(|p| (p.na - hi).abs() < 1e-12 && state_distance(&p.ansatz, &start.ansatz) < SAME_STATE)
        });
        if connected {
            log::debug!("gamma={gamma}: branch {id} is the continuation of an earlier branch");
            continue;
        }
        let branch = continue_branch(id, &start, -1.0, (lo, hi), &real_opts)?;
        if branch.termination != Termination::Boundary {
            issues.push(stall_note(&format!("branch {id}"), &branch));
        }
        branches.push(branch);
    }

    let mut folds = Vec::new();
    for branch in &branches {
        let mut found = detect_folds(branch);
        if labelled {
            for (k, f) in found.iter_mut().enumerate() {
                f.label = if branch.branch_id == "A" && k == 0 {
                    FoldLabel::T1
                } else if f.curvature > 0.0 {
                    FoldLabel::T2
                } else {
                    FoldLabel::T3
                };
            }
        }
        // a branch traced separately may revisit folds already found
        found.retain(|f: &FoldPoint| {
            !folds
                .iter()
                .any(|g: &FoldPoint| (g.na - f.na).abs() < 1e-8 && g.mu.approx_eq(f.mu, 1e-8))
        });
        folds.extend(found);
    }
    log::info!(
        "gamma={gamma}: {} real branch(es), folds {:?}",
        branches.len(),
        folds.iter().map(|f| (f.label, f.na)).collect::<Vec<_>>()
    );

    let mut spectrum = Spectrum {
        gamma,
        branches,
        folds,
        bicomplex: Vec::new(),
        issues,
    };
    if cfg.bicomplex {
        add_bicomplex_branches(cfg, &mut spectrum)?;
    }
    Ok(spectrum)
}

/// Describes where a branch stopped short of the window edge, with the
/// narrowest Gaussian there (branches typically stall as the packets contract).
fn stall_note(what: &str, branch: &Branch) -> String {
    match branch.points.last() {
        Some(p) => {
            let narrowest = p
                .ansatz
                .plus
                .gaussians
                .iter()
                .chain(&p.ansatz.minus.gaussians)
                .map(|g| g.a_par.re)
                .fold(f64::NEG_INFINITY, f64::max);
            format!(
                "{what}: {:?} at na={:.6} (narrowest Gaussian Re a_par={narrowest:.3})",
                branch.termination, p.na
            )
        }
        None => format!("{what}: {:?}", branch.termination),
    }
}

/// The `j`-conjugate partner of a bicomplex branch.
fn conjugate_branch(branch: &Branch, id: String) -> Branch {
    let mut out = branch.clone();
    out.branch_id = id;
    for p in &mut out.points {
        p.ansatz = p.ansatz.conj_j();
        p.mu = p.mu.conj_j();
    }
    out
}

/// Pushes the branch with `μj > 0` first, then its partner.
fn push_pair(out: &mut Vec<Branch>, branch: Branch, name: &str) {
    let positive = branch.points.first().is_some_and(|p| p.mu.zj() >= 0.0);
    let (plus, minus) = if positive {
        let partner = conjugate_branch(&branch, format!("{name}:j-"));
        (
            Branch {
                branch_id: format!("{name}:j+"),
                ..branch
            },
            partner,
        )
    } else {
        let partner = conjugate_branch(&branch, format!("{name}:j+"));
        (
            partner,
            Branch {
                branch_id: format!("{name}:j-"),
                ..branch
            },
        )
    };
    out.push(plus);
    out.push(minus);
}

fn bicomplex_offset(cfg: &SpectrumConfig, fold: &FoldPoint, all: &[FoldPoint]) -> f64 {
    let nearest = all
        .iter()
        .filter(|f| !std::ptr::eq(*f, fold))
        .map(|f| (f.na - fold.na).abs())
        .fold(f64::INFINITY, f64::min);
    cfg.bicomplex_offset.min(0.25 * nearest)
}

fn add_bicomplex_branches(cfg: &SpectrumConfig, spectrum: &mut Spectrum) -> Result<()> {
    let window = cfg.window();
    let opts = cfg.continuation.with_mode(SolveMode::Bicomplex);
    for fold in &spectrum.folds {
        let name = match fold.label {
            FoldLabel::Unlabeled => format!("{}@{:.6}", fold.branch_id, fold.na),
            label => label.to_string(),
        };
        let offset = bicomplex_offset(cfg, fold, &spectrum.folds);
        let seeded = seed_bicomplex_branch(fold, offset, &cfg.continuation)
            .and_then(|s| continue_branch(&name, &s, -fold.opening(), window, &opts));
        match seeded {
            Ok(branch) => {
                if branch.termination != Termination::Boundary {
                    spectrum
                        .issues
                        .push(stall_note(&format!("bicomplex branch {name}"), &branch));
                }
                push_pair(&mut spectrum.bicomplex, branch, &name);
            }
            Err(e) => spectrum.issues.push(format!("bicomplex branch {name}: {e}")),
        }
    }
    let has_t2 = spectrum.folds.iter().any(|f| f.label == FoldLabel::T2);
    let labelled = spectrum.folds.iter().any(|f| f.label == FoldLabel::T1);
    if labelled && !has_t2 && spectrum.gamma > 0.0 {
        match detached_bicomplex_branch(cfg) {
            Ok(branch) => push_pair(&mut spectrum.bicomplex, branch, "detached"),
            Err(e) => spectrum.issues.push(format!("detached bicomplex branch: {e}")),
        }
    }
    Ok(())
}

/// Bicomplex branch of `γ > γ_c`, which no longer touches a real branch.
///
/// It is reached from the bicomplex states below T2 at `γ = 0`: those are
/// continued to the bottom of the window, carried to the target `γ` there and
/// then traced upwards through the window.
pub fn detached_bicomplex_branch(cfg: &SpectrumConfig) -> Result<Branch> {
    let (lo, hi) = cfg.window();
    let gamma = cfg.potential.gamma;
    let base = SpectrumConfig {
        bicomplex: false,
        ..cfg.at_gamma(0.0)
    };
    let spectrum = compute_spectrum(&base)?;
    let t2 = spectrum
        .fold(FoldLabel::T2)
        .ok_or_else(|| Error::InvalidInput("no T2 fold at gamma = 0".into()))?;
    let opts = cfg.continuation.with_mode(SolveMode::Bicomplex);
    let offset = bicomplex_offset(cfg, t2, &spectrum.folds);
    let seed = seed_bicomplex_branch(t2, offset, &cfg.continuation)?;
    let down = continue_branch("detached", &seed, -t2.opening(), (lo, hi), &opts)?;
    let bottom = down.last_state().expect("non-empty");
    if (bottom.params.na - lo).abs() > 1e-12 {
        return Err(Error::StepUnderflow {
            na: bottom.params.na,
            points: down.points.len(),
        });
    }
    let carried = follow_segment(&bottom, [0.0, lo], [gamma, lo], &opts)?;
    continue_branch("detached", &carried, 1.0, (lo, hi), &opts)
}

/// Continues a state along a straight segment of the `(γ, Na)` plane and
/// returns the state at its end.
pub fn follow_segment(
    start: &StationaryState,
    from: [f64; 2],
    to: [f64; 2],
    opts: &ContinuationOptions,
) -> Result<StationaryState> {
    let axis = Axis::Segment { from, to };
    let branch = continue_branch_along("segment", start, axis, 1.0, (0.0, 1.0), opts)?;
    let last = branch.points.last().expect("non-empty");
    if branch.termination != Termination::Boundary || (last.lambda - 1.0).abs() > 1e-12 {
        return Err(Error::StepUnderflow {
            na: last.na,
            points: branch.points.len(),
        });
    }
    Ok(last.state(&branch.base))
}

/// Converged states of `branch` at `na`, one per crossing, optionally only
/// within an arclength interval.
pub fn solve_on_branch(
    branch: &Branch,
    na: f64,
    arclength: Option<(f64, f64)>,
    opts: &ContinuationOptions,
) -> Vec<StationaryState> {
    let Some(cont) = branch.options else {
        return Vec::new();
    };
    let mode = cont.mode;
    let solver = opts.solver().with_mode(mode);
    let params = ProblemParams::new(branch.base.potential, na);
    let mut out: Vec<StationaryState> = Vec::new();
    for w in branch.points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        if let Some((s0, s1)) = arclength {
            if q.arclength < s0 || p.arclength > s1 {
                continue;
            }
        }
        let (dp, dq) = (p.na - na, q.na - na);
        if dp * dq > 0.0 || p.na == q.na {
            continue;
        }
        let t = dp / (dp - dq);
        let xp = FreeParameterVector::pack(&p.ansatz, mode);
        let xq = FreeParameterVector::pack(&q.ansatz, mode);
        let guess = FreeParameterVector {
            values: xp.values.iter().zip(&xq.values).map(|(a, b)| a + t * (b - a)).collect(),
            ..xp
        };
        let Ok(guess) = guess.unpack() else { continue };
        if let Ok(state) = find_stationary(&guess, &params, &solver) {
            if out
                .iter()
                .all(|s| state_distance(&s.ansatz, &state.ansatz) >= SAME_STATE)
            {
                out.push(state);
            }
        }
    }
    out
}

/// All distinct stationary states of the spectrum at `na`: the crossings of
/// every real and bicomplex branch, deduplicated by parameter distance.
pub fn states_at(spectrum: &Spectrum, na: f64, opts: &ContinuationOptions) -> Vec<StationaryState> {
    let mut out: Vec<StationaryState> = Vec::new();
    for branch in spectrum.all_branches() {
        for state in solve_on_branch(branch, na, None, opts) {
            if out
                .iter()
                .all(|s| state_distance(&s.ansatz, &state.ansatz) >= SAME_STATE)
            {
                out.push(state);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub gamma: f64,
    pub na: f64,
    pub real: usize,
    pub bicomplex: usize,
}

impl CensusEntry {
    pub fn total(&self) -> usize {
        self.real + self.bicomplex
    }
}

/// Counts the stationary states on a `(γ, Na)` grid.
pub fn census(cfg: &SpectrumConfig, gammas: &[f64], nas: &[f64], exec: Execution) -> Result<Vec<CensusEntry>> {
    let per_gamma = par_map(gammas, exec, |&gamma| -> Result<Vec<CensusEntry>> {
        let spectrum = compute_spectrum(&SpectrumConfig {
            bicomplex: true,
            ..cfg.at_gamma(gamma)
        })?;
        for issue in &spectrum.issues {
            log::warn!("gamma={gamma}: {issue}");
        }
        Ok(nas
            .iter()
            .map(|&na| {
                let states = states_at(&spectrum, na, &cfg.continuation);
                let bicomplex = states.iter().filter(|s| s.mu.zj().abs() > 1e-9).count();
                CensusEntry {
                    gamma,
                    na,
                    real: states.len() - bicomplex,
                    bicomplex,
                }
            })
            .collect())
    });
    let mut out = Vec::new();
    for entries in per_gamma {
        out.extend(entries?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseDiagramConfig {
    pub spectrum: SpectrumConfig,
    pub gammas: Vec<f64>,
    /// Extra samples inserted in the grid interval where T2 and T3 vanish.
    pub refine: usize,
    pub execution: Execution,
}

/// `n` equally spaced values on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

impl Default for PhaseDiagramConfig {
    fn default() -> Self {
        Self {
            spectrum: SpectrumConfig::default(),
            gammas: linspace(0.0, 1e-3, 33),
            refine: 8,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug)]
pub struct PhaseDiagram {
    /// Fold curves T1, T2, T3 (possibly empty).
    pub curves: Vec<FoldCurve>,
    pub cusp: Result<CuspEstimate>,
    pub issues: Vec<String>,
}

impl PhaseDiagram {
    pub fn curve(&self, label: FoldLabel) -> Option<&FoldCurve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

type FoldSample = (f64, Result<Spectrum>);

fn fold_samples(cfg: &PhaseDiagramConfig, gammas: &[f64]) -> Vec<FoldSample> {
    let spectra = par_map(gammas, cfg.execution, |&gamma| {
        compute_spectrum(&SpectrumConfig {
            bicomplex: false,
            ..cfg.spectrum.at_gamma(gamma)
        })
    });
    gammas.iter().copied().zip(spectra).collect()
}

fn has_pair(sample: &FoldSample) -> bool {
    sample
        .1
        .as_ref()
        .is_ok_and(|s| s.fold(FoldLabel::T2).is_some() && s.fold(FoldLabel::T3).is_some())
}

/// Fold positions over the `γ` grid from independent spectra (fanned out over
/// `γ`), assembled into fold curves by label, and the cusp where T2 and T3
/// meet. The grid interval in which the T2/T3 pair disappears is resampled
/// more finely, since the cusp fit relies on the samples nearest to it.
pub fn phase_diagram(cfg: &PhaseDiagramConfig) -> Result<PhaseDiagram> {
    let mut gammas = cfg.gammas.clone();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut samples = fold_samples(cfg, &gammas);
    if let Some(last) = samples.iter().rposition(has_pair) {
        if last + 1 < samples.len() && cfg.refine > 0 {
            let fine = linspace(samples[last].0, samples[last + 1].0, cfg.refine + 2);
            let extra = fold_samples(cfg, &fine[1..=cfg.refine]);
            samples.extend(extra);
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }

    let mut curves: Vec<FoldCurve> = [FoldLabel::T1, FoldLabel::T2, FoldLabel::T3]
        .into_iter()
        .map(|label| FoldCurve {
            label,
            folds: Vec::new(),
        })
        .collect();
    let mut issues = Vec::new();
    for (gamma, spectrum) in samples {
        let spectrum = match spectrum {
            Ok(s) => s,
            Err(e) => {
                issues.push(format!("gamma={gamma}: {e}"));
                continue;
            }
        };
        issues.extend(spectrum.issues.iter().map(|i| format!("gamma={gamma}: {i}")));
        for curve in &mut curves {
            if let Some(f) = spectrum.fold(curve.label) {
                curve.folds.push(f.clone());
            }
        }
    }
    let cusp = match (curves[1].folds.is_empty(), curves[2].folds.is_empty()) {
        (false, false) => locate_cusp(&curves[2], &curves[1]),
        _ => Err(Error::InsufficientOverlap { shared: 0 }),
    };
    Ok(PhaseDiagram { curves, cusp, issues })
}

#[derive(Clone, Debug)]
pub struct TransportReport {
    /// Corners of the closed path in the `(γ, Na)` plane.
    pub path: Vec<[f64; 2]>,
    /// `|B⟩` at the start of the path.
    pub start: StationaryState,
    pub end: StationaryState,
    /// `|D⟩` at the start point, taken from the spectrum.
    pub reference: StationaryState,
    pub distance_to_reference: f64,
    pub distance_to_start: f64,
}

/// Carries `|B⟩` around the cusp on a closed rectangular path and compares
/// the result with `|D⟩`.
///
/// The path starts between T2 and T3 at `gamma_low`, runs up to the top of
/// the window, across to `gamma_high > γ_c`, down to a level between T1 and
/// T2 and back.
pub fn transport_around_cusp(cfg: &SpectrumConfig, gamma_low: f64, gamma_high: f64) -> Result<TransportReport> {
    let (_, hi) = cfg.window();
    let low = compute_spectrum(&SpectrumConfig {
        bicomplex: false,
        ..cfg.at_gamma(gamma_low)
    })?;
    let high = compute_spectrum(&SpectrumConfig {
        bicomplex: false,
        ..cfg.at_gamma(gamma_high)
    })?;
    let fold = |s: &Spectrum, label| {
        s.fold(label)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no {label} fold at gamma = {}", s.gamma)))
    };
    let (t1, t2, t3) = (
        fold(&low, FoldLabel::T1)?,
        fold(&low, FoldLabel::T2)?,
        fold(&low, FoldLabel::T3)?,
    );
    let t1_high = fold(&high, FoldLabel::T1)?;
    if high.fold(FoldLabel::T2).is_some() {
        return Err(Error::InvalidInput(format!("gamma = {gamma_high} is below the cusp")));
    }
    let branch = low
        .branches
        .iter()
        .find(|b| b.branch_id == t1.branch_id)
        .expect("fold branch present");
    let na_start = 0.5 * (t2.na + t3.na);
    let bottom = 0.5 * (t1.na.max(t1_high.na) + t2.na);
    let pick = |range: (f64, f64)| {
        solve_on_branch(branch, na_start, Some(range), &cfg.continuation)
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("no state on the branch at na = {na_start}")))
    };
    let reference = pick((t1.arclength, t3.arclength))?;
    let start = pick((t2.arclength, f64::INFINITY))?;

    let path = vec![
        [gamma_low, na_start],
        [gamma_low, hi],
        [gamma_high, hi],
        [gamma_high, bottom],
        [gamma_low, bottom],
        [gamma_low, na_start],
    ];
    let opts = cfg.continuation.with_mode(SolveMode::Complex);
    let mut state = start.clone();
    for leg in path.windows(2) {
        state = follow_segment(&state, leg[0], leg[1], &opts)?;
    }
    Ok(TransportReport {
        distance_to_reference: state_distance(&state.ansatz, &reference.ansatz),
        distance_to_start: state_distance(&state.ansatz, &start.ansatz),
        path,
        start,
        end: state,
        reference,
    })
}
