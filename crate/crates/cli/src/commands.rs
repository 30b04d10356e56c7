use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bicusp::continuation::{branch_table, continue_branch, fold_curve_table, seed_states, FoldRecord, Termination};
use bicusp::io::{write_json, Table};
use bicusp::normalform::{emit_normal_form_spectrum, normal_form_table};
use bicusp::parallel::{par_map, Execution};
use bicusp::scenario::{compute_spectrum, phase_diagram as run_phase_diagram, PhaseDiagramConfig, SpectrumConfig};
use bicusp::stationary::{find_stationary, StationaryState, StationaryStateRecord};
use bicusp::tdvp::{propagate as run_propagate, trajectory_table, PropagateOptions};
use bicusp::ProblemParams;
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig, SeedMode};
use crate::{CliError, Status};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    log::info!("writing {}", path.display());
    Ok(BufWriter::new(file))
}

fn write_table(cfg: &RunConfig, stem: &str, table: &Table) -> Result<PathBuf, CliError> {
    let name = match cfg.output.format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    };
    let out = create(&cfg.output.path, &name)?;
    match cfg.output.format {
        Format::Csv => table.write_csv(out)?,
        Format::Json => table.write_json(out)?,
    }
    Ok(cfg.output.path.join(name))
}

fn write_json_file<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<(), CliError> {
    write_json(value, create(&cfg.output.path, name)?)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(StationaryStateRecord),
    Many(Vec<StationaryStateRecord>),
}

fn read_states(path: &Path) -> Result<Vec<StationaryStateRecord>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let records = match serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))? {
        OneOrMany::One(r) => vec![r],
        OneOrMany::Many(v) => v,
    };
    if records.is_empty() {
        return Err(CliError::Config(format!("{}: no states", path.display())));
    }
    Ok(records)
}

/// Seeds from the linear problem, continued in `Na` up to the target.
fn continued_seeds(cfg: &RunConfig, params: &ProblemParams) -> Result<(Vec<StationaryState>, bool), CliError> {
    let solver = cfg.solver_options();
    let seeds = seed_states(&ProblemParams::new(params.potential, 0.0), &solver)?;
    if params.na == 0.0 {
        return Ok((seeds, false));
    }
    let mut reached = Vec::new();
    let mut partial = false;
    for (k, seed) in seeds.iter().enumerate() {
        let branch = continue_branch(
            &format!("seed{k}"),
            seed,
            params.na.signum(),
            (0.0, params.na),
            &cfg.continuation_options(),
        )?;
        match branch.points.last() {
            Some(p) if branch.termination == Termination::Boundary && (p.na - params.na).abs() < 1e-12 => {
                reached.extend(branch.last_state());
            }
            last => {
                log::warn!(
                    "seed {k} did not reach na={} (stopped at na={:?}, {:?})",
                    params.na,
                    last.map(|p| p.na),
                    branch.termination
                );
                partial = true;
            }
        }
    }
    Ok((reached, partial))
}

pub fn state(cfg: &RunConfig) -> Result<Status, CliError> {
    let na = cfg.scalar_na()?;
    let gamma = cfg.scalar_gamma()?;
    let params = ProblemParams::new(cfg.potential.with_gamma(gamma), na);
    let solver = cfg.solver_options();
    let (guesses, mut partial) = match &cfg.seed_mode {
        SeedMode::File(path) => {
            let guesses = read_states(path)?
                .iter()
                .map(|r| r.ansatz())
                .collect::<bicusp::Result<Vec<_>>>()?;
            (guesses, false)
        }
        SeedMode::Linear => {
            let (states, partial) = continued_seeds(cfg, &params)?;
            (states.into_iter().map(|s| s.ansatz).collect(), partial)
        }
    };
    let mut records = Vec::new();
    let mut failure = None;
    for guess in &guesses {
        match find_stationary(guess, &params, &solver) {
            Ok(s) => records.push(StationaryStateRecord::from_state(&s)?),
            Err(e) => {
                log::warn!("state solve failed: {e}");
                partial = true;
                failure = Some(e);
            }
        }
    }
    if records.is_empty() {
        return Err(match failure {
            Some(e) => e.into(),
            None => CliError::Numerical(format!("no state reached na={na}")),
        });
    }
    write_json_file(cfg, "state.json", &records)?;
    Ok(if partial { Status::Partial } else { Status::Complete })
}

#[derive(Serialize)]
struct SpectrumFolds {
    gamma: f64,
    folds: Vec<FoldRecord>,
    issues: Vec<String>,
}

pub fn spectrum(cfg: &RunConfig) -> Result<Status, CliError> {
    let (window, step0) = cfg.na_sweep()?;
    let gammas = cfg.gamma_values()?;
    let mut continuation = cfg.continuation_options();
    if let Some(s) = step0 {
        continuation.step0 = s;
    }
    let base = SpectrumConfig {
        potential: cfg.potential,
        window,
        continuation,
        bicomplex: cfg.bicomplex,
        ..SpectrumConfig::default()
    };
    let results = par_map(&gammas, Execution::Parallel, |&g| compute_spectrum(&base.at_gamma(g)));

    let mut spectra = Vec::new();
    let mut folds = Vec::new();
    let mut first_error = None;
    for (gamma, result) in gammas.iter().zip(results) {
        match result {
            Ok(s) => {
                folds.push(SpectrumFolds {
                    gamma: *gamma,
                    folds: s.fold_records(),
                    issues: s.issues.clone(),
                });
                spectra.push(s);
            }
            Err(e) => {
                log::error!("gamma={gamma}: {e}");
                folds.push(SpectrumFolds {
                    gamma: *gamma,
                    folds: Vec::new(),
                    issues: vec![e.to_string()],
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if spectra.is_empty() {
        return Err(first_error.expect("at least one gamma").into());
    }
    write_table(
        cfg,
        "branches",
        &branch_table(spectra.iter().flat_map(|s| s.all_branches())),
    )?;
    write_json_file(cfg, "folds.json", &folds)?;
    let partial = folds.iter().any(|f| !f.issues.is_empty());
    for f in folds.iter().filter(|f| !f.issues.is_empty()) {
        for issue in &f.issues {
            eprintln!("gamma={}: {issue}", f.gamma);
        }
    }
    Ok(if partial { Status::Partial } else { Status::Complete })
}

pub fn phase_diagram(cfg: &RunConfig) -> Result<Status, CliError> {
    let (window, step0) = cfg.na_sweep()?;
    let mut continuation = cfg.continuation_options();
    if let Some(s) = step0 {
        continuation.step0 = s;
    }
    let defaults = PhaseDiagramConfig::default();
    let pd_cfg = PhaseDiagramConfig {
        spectrum: SpectrumConfig {
            potential: cfg.potential,
            window,
            continuation,
            ..SpectrumConfig::default()
        },
        gammas: match &cfg.gamma {
            Some(_) => cfg.gamma_values()?,
            None => defaults.gammas.clone(),
        },
        ..defaults
    };
    let pd = run_phase_diagram(&pd_cfg)?;
    write_table(cfg, "fold_curves", &fold_curve_table(&pd.curves))?;
    for issue in &pd.issues {
        eprintln!("{issue}");
    }
    let cusp = pd.cusp?;
    write_json_file(cfg, "cusp.json", &cusp)?;
    Ok(if pd.issues.is_empty() {
        Status::Complete
    } else {
        Status::Partial
    })
}

pub fn normal_form(cfg: &RunConfig) -> Result<Status, CliError> {
    let nf = &cfg.normal_form;
    if !(nf.sigma.0 < nf.sigma.1) {
        return Err(CliError::Config(format!(
            "normal_form.sigma must be increasing, got {:?}",
            nf.sigma
        )));
    }
    if nf.rho.is_empty() {
        return Err(CliError::Config("normal_form.rho is empty".into()));
    }
    let rows = emit_normal_form_spectrum(&nf.rho, nf.sigma, nf.samples).map_err(|e| CliError::Config(e.to_string()))?;
    write_table(cfg, "normal_form", &normal_form_table(&rows))?;
    Ok(Status::Complete)
}

pub fn propagate(cfg: &RunConfig) -> Result<Status, CliError> {
    let p = &cfg.propagate;
    let path = p
        .initial
        .as_ref()
        .ok_or_else(|| CliError::Config("propagate.initial (state JSON) is required".into()))?;
    let record = read_states(path)?.swap_remove(0);
    let mut params = record.params;
    if cfg.gamma.is_some() {
        params.potential.gamma = cfg.scalar_gamma()?;
    }
    if cfg.na.is_some() {
        params.na = cfg.scalar_na()?;
    }
    if !(p.t_final > 0.0) || !(p.stride > 0.0) || !(p.tol > 0.0) {
        return Err(CliError::Config(
            "propagate needs positive t_final, stride and tol".into(),
        ));
    }
    let opts = PropagateOptions {
        tol: p.tol,
        stride: p.stride,
        ..PropagateOptions::default()
    };
    let traj = run_propagate(&record.ansatz()?, &params, p.t_final, &opts)?;
    write_table(cfg, "trajectory", &trajectory_table(&traj))?;
    Ok(Status::Complete)
}
