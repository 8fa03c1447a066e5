//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use soliton_cumulants::cli::run::{execute, initial_state, simulate};
use soliton_cumulants::cli::{parse_config, scenarios, ResolvedRun, RunConfig};
use soliton_cumulants::fock_oracle::{closure_gap, FockConfig, FockInitial};
use soliton_cumulants::observables::{self, SpectrumPhase};
use soliton_cumulants::ode_integrator::integrate_fixed;
use soliton_cumulants::{
    integrate, Boundary, CumulantState, CumulantSystem, GridSpec, RhsCoefficients, Tableau,
};

const HEISENBERG_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(v: Value) -> (RunConfig, ResolvedRun) {
    let cfg = parse_config(&v.to_string(), &[]).expect("config");
    let run = cfg.resolve(cfg.s).expect("resolve");
    (cfg, run)
}

/// Everything the criteria need from one soliton run.
struct Trace {
    run: ResolvedRun,
    lo: Vec<C64>,
    times: Vec<f64>,
    center_amp: Vec<C64>,
    center_b: Vec<f64>,
    kept: Vec<CumulantState>,
    min_margin: f64,
}

fn trace(v: Value, keep: &[f64]) -> Trace {
    let (cfg, run) = config(v);
    let init = initial_state(&cfg, &run).unwrap();
    let lo: Vec<C64> = (0..run.grid.m).map(|j| C64::new(init.cu[j], init.cv[j])).collect();
    let c = run.grid.center();
    let mut tr = Trace {
        lo,
        times: Vec::new(),
        center_amp: Vec::new(),
        center_b: Vec::new(),
        kept: Vec::new(),
        min_margin: f64::INFINITY,
        run: run.clone(),
    };
    simulate(&run, &init, |st| {
        tr.times.push(st.t);
        tr.center_amp.push(C64::new(st.cu[c], st.cv[c]));
        tr.center_b.push(observables::uncertainty_ellipse(&st, c).minor);
        tr.min_margin = tr.min_margin.min(st.validate().min_margin());
        if keep.iter().any(|k| (k - st.t).abs() < 1e-12) {
            tr.kept.push(st);
        }
        Ok(())
    })
    .expect("simulate");
    tr
}

impl Trace {
    fn at(&self, t: f64) -> &CumulantState {
        self.kept.iter().find(|s| (s.t - t).abs() < 1e-12).expect("kept state")
    }
}

fn lossless(extra: Value) -> Value {
    let mut v = json!({"gamma_t": 0.0});
    v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    v
}

fn fibre_2ps(extra: Value) -> Value {
    let mut v = json!({"t0_ps": 2.0, "dispersion_ps_nm_km": 20.0, "loss_db_km": 0.3, "wavelength_um": 1.5});
    v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    v
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn scaling() -> Outcome {
    let base = json!({"dispersion_ps_nm_km": 20.0, "loss_db_km": 0.3, "wavelength_um": 1.5, "t_end": 1.0});
    let get = |t0: f64| {
        let mut v = base.clone();
        v["t0_ps"] = json!(t0);
        let (_, r) = config(v);
        (r.params.x_d_m.unwrap(), r.params.gamma_t)
    };
    let (xd2, g2) = get(2.0);
    let (xd10, g10) = get(10.0);
    let pass = within(xd2, 170.0, 0.03) && within(g2, 5.8e-3, 0.03) && within(xd10, 4200.0, 0.03) && within(g10, 0.14, 0.05);
    outcome(
        pass,
        format!("t0=2ps: x_d={xd2:.1} m, gamma={g2:.3e}; t0=10ps: x_d={:.3} km, gamma={g10:.3e}", xd10 / 1e3),
    )
}

fn fixed_point() -> Outcome {
    let (cfg, run) = config(fibre_2ps(json!({"initial": "thermal", "t_end": 10.0, "observables": []})));
    let init = initial_state(&cfg, &run).unwrap();
    let mut last = None;
    let mut margin = f64::INFINITY;
    simulate(&run, &init, |st| {
        margin = margin.min(st.validate().min_margin());
        last = Some(st);
        Ok(())
    })
    .unwrap();
    let end = last.unwrap();
    let block = |a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>| (a - b).mapv(f64::abs).fold(0.0, |m: f64, v| m.max(*v));
    let vec_d = |a: &ndarray::Array1<f64>, b: &ndarray::Array1<f64>| (a - b).mapv(f64::abs).fold(0.0, |m: f64, v| m.max(*v));
    let d = [
        vec_d(&end.cu, &init.cu),
        vec_d(&end.cv, &init.cv),
        block(&end.cuu, &init.cuu),
        block(&end.cuv, &init.cuv),
        block(&end.cvv, &init.cvv),
    ];
    let worst = d.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 1e-8 && margin >= -HEISENBERG_TOL,
        format!("max drift over t=10 at m={}: {worst:.2e}", run.grid.m),
    )
}

fn s_consistency(dir: &std::path::Path) -> (Outcome, f64) {
    let sc = scenarios::find("fig11-ordering-check").unwrap();
    let mut v = sc.config.clone();
    v["output_dir"] = json!(dir.join("fig11").to_string_lossy());
    let cfg = parse_config(&v.to_string(), &[]).unwrap();
    let summary = execute(&cfg).expect("s-pair run");
    let mut pass = summary.consistency.len() == 3;
    let mut worst = [0.0f64; 4];
    for c in &summary.consistency {
        let (sp, eta) = (c.spectrum.unwrap_or(f64::INFINITY), c.eta.unwrap_or(f64::INFINITY));
        pass &= c.cumulants <= 1e-7 && c.intensity <= 1e-9 && sp <= 1e-9 && eta <= 1e-9;
        worst = [worst[0].max(c.cumulants), worst[1].max(c.intensity), worst[2].max(sp), worst[3].max(eta)];
    }
    let margin = min_manifest_margin(&summary.manifest);
    (
        outcome(
            pass,
            format!(
                "t in {{1,2.5,5}}: cumulants {:.1e}, intensity {:.1e}, S {:.1e}, eta {:.1e}",
                worst[0], worst[1], worst[2], worst[3]
            ),
        ),
        margin,
    )
}

fn min_manifest_margin(manifest: &Value) -> f64 {
    manifest["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["min_heisenberg_margin"].as_f64().unwrap_or(f64::NAN))
        .fold(f64::INFINITY, |a, b| if b.is_nan() { f64::NAN } else { a.min(b) })
}

fn mean_field(r0: &Trace) -> Outcome {
    let st = r0.at(1.0);
    let n0 = r0.run.params.n0;
    let intensity = observables::intensity(st);
    let mut worst = 0.0f64;
    for j in 0..r0.run.grid.m {
        let x = r0.run.grid.x(j);
        if x.abs() <= 2.0 + 1e-12 {
            let exact = n0 / x.cosh().powi(2);
            worst = worst.max((intensity[j] - exact).abs() / exact);
        }
    }
    // unwrapped phase of the central amplitude
    let mut phase = 0.0;
    let mut period = None;
    for i in 1..r0.times.len() {
        let step = (r0.center_amp[i] / r0.center_amp[i - 1]).arg();
        let next = phase + step;
        if next.abs() >= 2.0 * PI {
            let frac = (2.0 * PI - phase.abs()) / (next.abs() - phase.abs());
            period = Some(r0.times[i - 1] + frac * (r0.times[i] - r0.times[i - 1]));
            break;
        }
        phase = next;
    }
    let period_ok = period.is_some_and(|p| within(p, 4.0 * PI, 0.05));
    outcome(
        worst <= 0.01 && period_ok,
        format!(
            "max rel intensity error |x|<=2 at t=1: {worst:.2e}; phase period {} (4pi = {:.3})",
            period.map_or("not reached".into(), |p| format!("{p:.3}")),
            4.0 * PI
        ),
    )
}

fn photon_balance() -> Outcome {
    let (cfg, run) = config(json!({"gamma_t": 0.05, "boundary": "periodic", "t_end": 5.0, "output_step": 0.25}));
    let mut coeffs = run.coeffs;
    coeffs.chi = 0.0;
    let sys = CumulantSystem::new(run.grid, coeffs);
    let init = initial_state(&cfg, &run).unwrap();
    let excess = |st: &CumulantState| observables::intensity(st).iter().map(|i| i - coeffs.n_th).sum::<f64>();
    let e0 = excess(&init);
    let mut worst = 0.0f64;
    integrate(&sys, &Tableau::dop853(), &run.control, 0.0, &init.to_flat(), &run.times, |t, y| {
        let st = CumulantState::from_flat(run.grid.m, coeffs.s, t, y)?;
        let expected = e0 * (-2.0 * coeffs.gamma * t).exp();
        worst = worst.max(((excess(&st) - expected) / expected).abs());
        Ok(())
    })
    .unwrap();
    outcome(worst <= 1e-6, format!("max relative deviation from exp(-2 gamma t) over [0,5]: {worst:.2e}"))
}

fn squeezing(r0: &Trace) -> (Outcome, f64) {
    let upto = |tr: &Trace, t_max: f64| {
        tr.times
            .iter()
            .zip(&tr.center_b)
            .filter(|(t, _)| **t <= t_max + 1e-12)
            .map(|(_, b)| *b)
            .fold(f64::INFINITY, f64::min)
    };
    let early = upto(r0, 1.0);
    let mut mins = vec![upto(r0, 5.0)];
    let mut margin = r0.min_margin;
    for g in [0.05, 0.1] {
        let tr = trace(json!({"gamma_t": g, "t_end": 5.0, "output_step": 0.05}), &[]);
        margin = margin.min(tr.min_margin);
        mins.push(upto(&tr, 5.0));
    }
    let ordered = mins[0] < mins[1] && mins[1] < mins[2];
    (
        outcome(
            early < 0.25 && ordered,
            format!(
                "centre b by t=1: {early:.4}; min b over [0,5] for gamma 0/0.05/0.1: {:.4} / {:.4} / {:.4}",
                mins[0], mins[1], mins[2]
            ),
        ),
        margin,
    )
}

fn spectrum(r0: &Trace) -> (Outcome, f64) {
    let s0 = |tr: &Trace| {
        observables::squeezing_spectrum(tr.at(1.0), &tr.run.grid, &tr.lo, &[0.0], SpectrumPhase::Optimal).unwrap()[0].s_min
    };
    let lossless = s0(r0);
    let damped_tr = trace(fibre_2ps(json!({"t_end": 1.0})), &[1.0]);
    let damped = s0(&damped_tr);

    let grid = r0.run.grid;
    let omegas = observables::frequency_grid(&grid).omegas();
    let mut worst = 0.0f64;
    for s in [-1.0, 0.0, 0.85, 1.0] {
        let vac = CumulantState::thermal_state(&grid, 0.0, s).unwrap();
        let coh = CumulantState::fundamental_soliton(&grid, r0.run.params.n0, 0.0, s).unwrap();
        for st in [vac, coh] {
            for phase in [SpectrumPhase::Optimal, SpectrumPhase::Fixed(0.3)] {
                for p in observables::squeezing_spectrum(&st, &grid, &r0.lo, &omegas, phase).unwrap() {
                    worst = worst.max(p.s.abs()).max(p.s_min.abs());
                }
            }
        }
    }
    (
        outcome(
            lossless < 0.0 && damped < 0.0 && worst <= 1e-12,
            format!(
                "S_min(0) at t=1: {lossless:.4} (gamma 0), {damped:.4} (gamma {:.2e}); vacuum/coherent max |S| {worst:.1e}",
                damped_tr.run.params.gamma_t
            ),
        ),
        damped_tr.min_margin,
    )
}

fn eta_structure() -> (Outcome, f64) {
    // odd grid so that x -> -x maps cells onto cells
    let tr = trace(lossless(json!({"m": 201, "output_times": [2.5]})), &[2.5]);
    let grid = tr.run.grid;
    let fg = observables::frequency_grid(&grid);
    let omegas = fg.sample(5.0, fg.delta_omega_min);
    let c = observables::photon_correlation(tr.at(2.5), &grid, &omegas, fg.delta_omega_min).unwrap();
    let n = omegas.len();
    let mid = n / 2;
    let eta = |a: usize, b: usize| c.eta[[a, b]];
    // contiguous band of negative diagonal values around omega = 0
    let negative = |a: usize| eta(a, a).is_some_and(|v| v < 0.0);
    let mut half = 0;
    while half < mid && negative(mid - half - 1) && negative(mid + half + 1) {
        half += 1;
    }
    let central_negative = negative(mid) && half >= 1;
    let mut positive_pair = false;
    let mut sym = 0.0f64;
    let mut mirror = 0.0f64;
    let mut bound = 0.0f64;
    let mut missing = 0usize;
    for a in 0..n {
        for b in 0..n {
            match (eta(a, b), eta(b, a), eta(n - 1 - a, n - 1 - b)) {
                (Some(x), Some(y), Some(z)) => {
                    sym = sym.max((x - y).abs());
                    mirror = mirror.max((x - z).abs());
                    if a != b {
                        bound = bound.max(x.abs());
                        positive_pair |= x > 0.0;
                    }
                }
                _ => missing += 1,
            }
        }
    }
    let pass = central_negative && positive_pair && sym <= 1e-10 && mirror <= 1e-10 && bound <= 1.0 + 1e-10 && missing == 0;
    (
        outcome(
            pass,
            format!(
                "t=2.5, m=201: eta(0,0)={:.4}, negative for |omega|<={:.3}, positive sideband pair: {positive_pair}, asym {sym:.1e}, mirror {mirror:.1e}, max off-diag |eta| {bound:.4}",
                eta(mid, mid).unwrap_or(f64::NAN),
                omegas[mid + half]
            ),
        ),
        tr.min_margin,
    )
}

fn heisenberg(dir: &std::path::Path, already: &[f64]) -> Outcome {
    let mut worst = already.iter().copied().fold(f64::INFINITY, f64::min);
    let mut count = 0;
    for sc in scenarios::all() {
        if sc.name == "fig11-ordering-check" {
            continue; // executed by the ordering criterion
        }
        let mut v = sc.config.clone();
        v["output_dir"] = json!(dir.join(sc.name).to_string_lossy());
        let cfg = parse_config(&v.to_string(), &[]).unwrap();
        match execute(&cfg) {
            Ok(summary) => {
                let m = min_manifest_margin(&summary.manifest);
                worst = if m.is_nan() { f64::NAN } else { worst.min(m) };
            }
            Err(e) => {
                return outcome(false, format!("scenario {} failed: {e}", sc.name));
            }
        }
        count += 1;
    }
    outcome(
        worst >= -HEISENBERG_TOL,
        format!("min sqrt((B+s/4)(b+s/4)) - 1/4 over {} scenario runs and all checks: {worst:.3e}", count + 1),
    )
}

fn oracle() -> Outcome {
    let run = |chi: f64, s: f64| {
        let cfg = FockConfig {
            modes: 1,
            cutoff: 60,
            coeffs: RhsCoefficients { d2: 0.0, chi, gamma: 0.1, delta_omega: 0.0, n_th: 0.0, s },
            boundary: Boundary::Absorbing,
        };
        let init = FockInitial { alpha: vec![C64::new(10f64.sqrt(), 0.0)], n_th: 0.0 };
        let gaps = closure_gap(&cfg, &init, &[0.25, 0.5, 0.75, 1.0], s).unwrap();
        gaps.iter().fold((0.0f64, 0.0f64), |(a, b), g| (a.max(g.first_order), b.max(g.second_order)))
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for s in [0.0, 0.85] {
        let (f, g) = run(0.01, s);
        pass &= f <= 0.01 && g <= 0.05;
        detail.push(format!("s={s}: first {f:.1e}, second {g:.1e}"));
    }
    let (f, g) = run(0.0, 0.0);
    pass &= f <= 1e-8 && g <= 1e-8;
    detail.push(format!("chi=0: {:.1e}", f.max(g)));
    outcome(pass, format!("|alpha|^2=10, chi=0.01, gamma=0.1, cutoff 60; {}", detail.join("; ")))
}

fn integrator_order() -> Outcome {
    let grid = GridSpec::new(6, 0.5, Boundary::Periodic).unwrap();
    let coeffs = RhsCoefficients { d2: -2.0, chi: 0.0, gamma: 0.1, delta_omega: 0.3, n_th: 0.02, s: 0.0 };
    let sys = CumulantSystem::new(grid, coeffs);
    let alpha: Vec<C64> = (0..6).map(|j| C64::new(1.0 + 0.3 * j as f64, 0.5 - 0.2 * j as f64)).collect();
    let y0 = CumulantState::displaced_thermal(&grid, &alpha, 0.02, 0.0).unwrap().to_flat();
    let tab = Tableau::dop853();
    let reference = integrate_fixed(&sys, &tab, 0.0, 1.0, &y0, 4096);
    let scale = reference.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut pts = Vec::new();
    for n in [8usize, 16, 32, 64, 128, 256] {
        let y = integrate_fixed(&sys, &tab, 0.0, 1.0, &y0, n);
        let err = y.iter().zip(&reference).fold(0.0f64, |a, (p, q)| a.max((p - q).abs())) / scale;
        if err > 1e-13 {
            pts.push(((1.0 / n as f64).ln(), err.ln()));
        }
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    let slope = num / den;
    outcome(
        pts.len() >= 3 && slope >= 7.5,
        format!("fitted slope {slope:.2} over {} step halvings above the round-off floor", pts.len()),
    )
}

/// Criterion numbers given on the command line restrict the run; none runs all.
fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: u32| selected.is_empty() || selected.contains(&id);
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut margins = Vec::new();
    let record = |id: u32, name: &'static str, o: Outcome, results: &mut Vec<(u32, &str, Outcome)>| {
        println!(
            "criterion {id:>2} {} {name}: {} [{:.0} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };
    let r0_cell = std::cell::OnceCell::new();
    let r0 = || r0_cell.get_or_init(|| trace(lossless(json!({"t_end": 13.5, "output_step": 0.05})), &[1.0]));

    if want(1) {
        record(1, "scaling", scaling(), &mut results);
    }
    if want(2) {
        record(2, "thermal fixed point", fixed_point(), &mut results);
    }
    if want(3) {
        let (o, m) = s_consistency(dir.path());
        margins.push(m);
        record(3, "ordering consistency", o, &mut results);
    }
    if want(4) {
        margins.push(r0().min_margin);
        record(4, "soliton mean field", mean_field(r0()), &mut results);
    }
    if want(5) {
        record(5, "photon balance", photon_balance(), &mut results);
    }
    if want(6) {
        let (o, m) = squeezing(r0());
        margins.push(m);
        record(6, "squeezing", o, &mut results);
    }
    if want(7) {
        let (o, m) = spectrum(r0());
        margins.push(m);
        record(7, "squeezing spectrum", o, &mut results);
    }
    if want(8) {
        let (o, m) = eta_structure();
        margins.push(m);
        record(8, "photon-number correlations", o, &mut results);
    }
    if want(9) {
        record(9, "Heisenberg bound", heisenberg(dir.path(), &margins), &mut results);
    }
    if want(10) {
        record(10, "Fock oracle", oracle(), &mut results);
    }
    if want(11) {
        record(11, "integrator order", integrator_order(), &mut results);
    }

    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.0} s",
        results.len() - failed.len(),
        failed.len(),
        failed,
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
