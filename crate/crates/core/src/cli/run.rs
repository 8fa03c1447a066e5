//! Orchestration of a configured run: integrate, evaluate observables at
//! each output time, write CSV files and the manifest.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ConfigError, InitialKind, ObservableKind, ResolvedRun, RunConfig};
use super::output;
use crate::cumulant_state::CumulantState;
use crate::dynamics_rhs::CumulantSystem;
use crate::error::Error;
use crate::observables::{self, Correlations, SpectrumPoint};
use crate::ode_integrator::{integrate, IntegrationStats, Tableau};

/// Tolerance on the Heisenberg margin before a state counts as unphysical.
pub const HEISENBERG_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e)
        } else {
            RunError::Config(e.into())
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

pub fn initial_state(cfg: &RunConfig, run: &ResolvedRun) -> crate::Result<CumulantState> {
    let p = &run.params;
    match cfg.initial {
        InitialKind::Soliton => CumulantState::fundamental_soliton(&run.grid, p.n0, p.n_th, p.s),
        InitialKind::Thermal => CumulantState::thermal_state(&run.grid, p.n_th, p.s),
    }
}

/// Integrates `initial` through the output times of `run`, handing each
/// output state to `on_state`. States failing the Heisenberg bound abort
/// the run.
pub fn simulate<F>(run: &ResolvedRun, initial: &CumulantState, mut on_state: F) -> crate::Result<IntegrationStats>
where
    F: FnMut(CumulantState) -> crate::Result<()>,
{
    let sys = CumulantSystem::new(run.grid, run.coeffs);
    let tab = Tableau::new(run.tableau);
    let m = run.grid.m;
    let s = run.coeffs.s;
    integrate(&sys, &tab, &run.control, 0.0, &initial.to_flat(), &run.times, |t, y| {
        let st = CumulantState::from_flat(m, s, t, y)?;
        check_heisenberg(&st)?;
        on_state(st)
    })
}

pub fn check_heisenberg(st: &CumulantState) -> crate::Result<f64> {
    let rep = st.validate();
    if rep.non_finite > 0 {
        return Err(Error::NonFinite { t: st.t });
    }
    for (j, margin) in rep.heisenberg_margin.iter().enumerate() {
        if !(*margin >= -HEISENBERG_TOL) {
            let e = observables::uncertainty_ellipse(st, j);
            let radicand = (e.major + 0.25 * st.s) * (e.minor + 0.25 * st.s);
            return Err(Error::Unphysical { cell: j, radicand });
        }
    }
    Ok(rep.min_margin())
}

/// Observables evaluated at one output time.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub t: f64,
    pub state: CumulantState,
    pub spectrum: Option<Vec<SpectrumPoint>>,
    pub correlations: Option<Correlations>,
}

fn evaluate(cfg: &RunConfig, run: &ResolvedRun, lo: &[C64], st: CumulantState) -> crate::Result<Evaluated> {
    let spectrum = if cfg.wants(ObservableKind::Spectrum) {
        Some(observables::squeezing_spectrum(
            &st,
            &run.grid,
            lo,
            &run.spectrum_omegas,
            cfg.spectrum_phase.to_phase(),
        )?)
    } else {
        None
    };
    let correlations = if cfg.wants(ObservableKind::Eta) || cfg.wants(ObservableKind::Photons) {
        Some(observables::photon_correlation(&st, &run.grid, &run.eta_omegas, run.eta_delta_omega)?)
    } else {
        None
    };
    Ok(Evaluated {
        t: st.t,
        state: st,
        spectrum,
        correlations,
    })
}

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn write_outputs(cfg: &RunConfig, run: &ResolvedRun, dir: &Path, ev: &Evaluated) -> Result<Vec<String>, RunError> {
    let x = run.grid.positions().to_vec();
    let st = &ev.state;
    let mut files = Vec::new();
    let mut kinds = cfg.observables.clone();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        let name = output::file_name(kind.file_stem(), ev.t);
        let w = create(dir, &name)?;
        match kind {
            ObservableKind::Intensity => output::write_intensity(w, &x, &observables::intensity(st))?,
            ObservableKind::Ellipse => {
                let e: Vec<_> = (0..st.m()).map(|j| observables::uncertainty_ellipse(st, j)).collect();
                output::write_ellipse(w, &x, &e)?
            }
            ObservableKind::SqueezedThermal => {
                let p = (0..st.m())
                    .map(|j| observables::squeezed_thermal_params(st, j))
                    .collect::<crate::Result<Vec<_>>>()?;
                output::write_squeezed_thermal(w, &x, &p)?
            }
            ObservableKind::Spectrum => output::write_spectrum(w, ev.spectrum.as_ref().unwrap())?,
            ObservableKind::Eta => output::write_eta(w, ev.correlations.as_ref().unwrap())?,
            ObservableKind::Photons => output::write_photons(w, ev.correlations.as_ref().unwrap())?,
            ObservableKind::Snapshot => output::write_snapshot(w, st, &x)?,
        }
        files.push(name);
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord {
    s: f64,
    directory: String,
    params: crate::physical_params::ScaledParams,
    coefficients: crate::dynamics_rhs::RhsCoefficients,
    grid: crate::cumulant_state::GridSpec,
    tableau: crate::ode_integrator::TableauKind,
    control: crate::ode_integrator::StepControl,
    output_times: Vec<f64>,
    stats: IntegrationStats,
    min_heisenberg_margin: f64,
    files: Vec<String>,
}

/// Relative agreement between the two orderings at one output time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Consistency {
    pub t: f64,
    pub cumulants: f64,
    pub intensity: f64,
    pub spectrum: Option<f64>,
    pub eta: Option<f64>,
}

fn rel_diff<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in a.zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn compare_orderings(a: &Evaluated, b: &Evaluated) -> crate::Result<Consistency> {
    let shifted = a.state.reorder_s(b.state.s)?;
    let fa = shifted.to_flat();
    let fb = b.state.to_flat();
    let ia = observables::intensity(&a.state);
    let ib = observables::intensity(&b.state);
    let spectrum = match (&a.spectrum, &b.spectrum) {
        (Some(x), Some(y)) => {
            let xs: Vec<f64> = x.iter().flat_map(|p| [p.s, p.s_min]).collect();
            let ys: Vec<f64> = y.iter().flat_map(|p| [p.s, p.s_min]).collect();
            Some(rel_diff(xs.iter(), ys.iter()))
        }
        _ => None,
    };
    let eta = match (&a.correlations, &b.correlations) {
        (Some(x), Some(y)) => {
            if x.eta.iter().zip(y.eta.iter()).any(|(p, q)| p.is_some() != q.is_some()) {
                Some(f64::INFINITY)
            } else {
                let xs: Vec<f64> = x.eta.iter().flatten().copied().collect();
                let ys: Vec<f64> = y.eta.iter().flatten().copied().collect();
                Some(rel_diff(xs.iter(), ys.iter()))
            }
        }
        _ => None,
    };
    Ok(Consistency {
        t: a.t,
        cumulants: rel_diff(fa.iter(), fb.iter()),
        intensity: rel_diff(ia.iter(), ib.iter()),
        spectrum,
        eta,
    })
}

fn write_consistency(path: &Path, rows: &[Consistency]) -> std::io::Result<()> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(fs::File::create(path)?));
    let opt = |v: Option<f64>| v.map(output::fmt_f64).unwrap_or_default();
    let e = |e: csv::Error| std::io::Error::other(e);
    wr.write_record(["t", "cumulants", "intensity", "spectrum", "eta"]).map_err(e)?;
    for r in rows {
        wr.write_record([
            output::fmt_f64(r.t),
            output::fmt_f64(r.cumulants),
            output::fmt_f64(r.intensity),
            opt(r.spectrum),
            opt(r.eta),
        ])
        .map_err(e)?;
    }
    wr.flush()
}

fn ordering_dir(s: f64) -> String {
    format!("s{s}")
}

/// Result of [`execute`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Value,
    pub consistency: Vec<Consistency>,
}

/// Resolves every ordering without running anything.
pub fn validate_config(cfg: &RunConfig) -> Result<Vec<ResolvedRun>, RunError> {
    let runs = cfg
        .orderings()
        .into_iter()
        .map(|s| cfg.resolve(s))
        .collect::<Result<Vec<_>, _>>()?;
    for r in &runs {
        initial_state(cfg, r)?;
    }
    Ok(runs)
}

pub fn execute(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let runs = validate_config(cfg)?;
    let root = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&root)?;
    let paired = runs.len() == 2;
    let mut records = Vec::new();
    let mut kept: Vec<Vec<Evaluated>> = Vec::new();
    for run in &runs {
        let s = run.coeffs.s;
        let rel_dir = if paired { ordering_dir(s) } else { String::new() };
        let dir = root.join(&rel_dir);
        fs::create_dir_all(&dir)?;
        let init = initial_state(cfg, run)?;
        let lo: Vec<C64> = (0..run.grid.m).map(|j| C64::new(init.cu[j], init.cv[j])).collect();
        let mut files = Vec::new();
        let mut evaluated = Vec::new();
        let mut min_margin = f64::INFINITY;
        let mut io_error: Option<RunError> = None;
        let stats = simulate(run, &init, |st| {
            min_margin = min_margin.min(st.validate().min_margin());
            let ev = evaluate(cfg, run, &lo, st)?;
            match write_outputs(cfg, run, &dir, &ev) {
                Ok(f) => files.extend(f),
                Err(e) => {
                    io_error = Some(e);
                    return Err(Error::param("output", "write failed"));
                }
            }
            if paired {
                evaluated.push(ev);
            }
            Ok(())
        });
        if let Some(e) = io_error {
            return Err(e);
        }
        let stats = stats?;
        records.push(RunRecord {
            s,
            directory: rel_dir,
            params: run.params.clone(),
            coefficients: run.coeffs,
            grid: run.grid,
            tableau: run.tableau,
            control: run.control,
            output_times: run.times.clone(),
            stats,
            min_heisenberg_margin: min_margin,
            files,
        });
        kept.push(evaluated);
    }
    let mut consistency = Vec::new();
    if paired {
        for (a, b) in kept[0].iter().zip(&kept[1]) {
            consistency.push(compare_orderings(a, b)?);
        }
        write_consistency(&root.join("s_consistency.csv"), &consistency)?;
    }
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "format_version": 1,
        "config": cfg,
        "runs": records,
        "s_consistency": if paired { json!({"file": "s_consistency.csv", "rows": consistency}) } else { Value::Null },
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    fs::write(root.join("manifest.json"), text + "\n")?;
    Ok(RunSummary {
        output_dir: root,
        manifest,
        consistency,
    })
}
