//! Adaptive embedded Runge-Kutta integration.
//!
//! Two tableaus are provided: Dormand-Prince 8(5,3) with the dual 5th/3rd
//! order error estimate, and Dormand-Prince 5(4). Both use an absolute +
//! relative error norm and a PI step-size controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)` on a flat `f64` vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    /// Constant added to `y` before it enters the relative error weights.
    fn weight_offset(&self) -> Option<&[f64]> {
        None
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableauKind {
    #[default]
    Dop853,
    Dopri5,
}

#[derive(Debug, Clone)]
enum ErrorEstimate {
    /// `err_i = h * sum_s e_s k_s`.
    Embedded(Vec<f64>),
    /// 5th-order estimate `e5` combined with the 3rd-order estimate
    /// `sum b k - sum bhh k`.
    Dual { e5: Vec<f64>, bhh: Vec<(usize, f64)> },
}

#[derive(Debug, Clone)]
pub struct Tableau {
    pub kind: TableauKind,
    c: Vec<f64>,
    /// Row `i` holds the coefficients of stages `0..i`.
    a: Vec<Vec<(usize, f64)>>,
    b: Vec<(usize, f64)>,
    error: ErrorEstimate,
    /// Order used for the step-size exponent.
    order: u32,
    /// Last stage is evaluated at the new solution.
    fsal: bool,
}

fn sparse(row: &[f64]) -> Vec<(usize, f64)> {
    row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect()
}

impl Tableau {
    pub fn new(kind: TableauKind) -> Self {
        match kind {
            TableauKind::Dop853 => Self::dop853(),
            TableauKind::Dopri5 => Self::dopri5(),
        }
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dopri5() -> Self {
        let a: [&[f64]; 7] = [
            &[],
            &[1.0 / 5.0],
            &[3.0 / 40.0, 9.0 / 40.0],
            &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
            &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
            &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
            &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        let b = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
        let e = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        Tableau {
            kind: TableauKind::Dopri5,
            c: vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
            a: a.iter().map(|r| sparse(r)).collect(),
            b: sparse(&b),
            error: ErrorEstimate::Embedded(e.to_vec()),
            order: 5,
            fsal: true,
        }
    }

    #[allow(clippy::excessive_precision)]
    pub fn dop853() -> Self {
        let c = vec![
            0.0,
            0.526001519587677318785587544488e-1,
            0.789002279381515978178381316732e-1,
            0.118350341907227396726757197510,
            0.281649658092772603273242802490,
            1.0 / 3.0,
            0.25,
            0.307692307692307692307692307692,
            0.651282051282051282051282051282,
            0.6,
            0.857142857142857142857142857142,
            1.0,
        ];
        let a: [&[f64]; 12] = [
            &[],
            &[5.26001519587677318785587544488e-2],
            &[1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2],
            &[2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2],
            &[
                2.41365134159266685502369798665e-1,
                0.0,
                -8.84549479328286085344864962717e-1,
                9.24834003261792003115737966543e-1,
            ],
            &[
                3.7037037037037037037037037037e-2,
                0.0,
                0.0,
                1.70828608729473871279604482173e-1,
                1.25467687566822425016691814123e-1,
            ],
            &[
                3.7109375e-2,
                0.0,
                0.0,
                1.70252211019544039314978060272e-1,
                6.02165389804559606850219397283e-2,
                -1.7578125e-2,
            ],
            &[
                3.70920001185047927108779319836e-2,
                0.0,
                0.0,
                1.70383925712239993810214054705e-1,
                1.07262030446373284651809199168e-1,
                -1.53194377486244017527936158236e-2,
                8.27378916381402288758473766002e-3,
            ],
            &[
                6.24110958716075717114429577812e-1,
                0.0,
                0.0,
                -3.36089262944694129406857109825e0,
                -8.68219346841726006818189891453e-1,
                2.75920996994467083049415600797e1,
                2.01540675504778934086186788979e1,
                -4.34898841810699588477366255144e1,
            ],
            &[
                4.77662536438264365890433908527e-1,
                0.0,
                0.0,
                -2.48811461997166764192642586468e0,
                -5.90290826836842996371446475743e-1,
                2.12300514481811942347288949897e1,
                1.52792336328824235832596922938e1,
                -3.32882109689848629194453265587e1,
                -2.03312017085086261358222928593e-2,
            ],
            &[
                -9.3714243008598732571704021658e-1,
                0.0,
                0.0,
                5.18637242884406370830023853209e0,
                1.09143734899672957818500254654e0,
                -8.14978701074692612513997267357e0,
                -1.85200656599969598641566180701e1,
                2.27394870993505042818970056734e1,
                2.49360555267965238987089396762e0,
                -3.0467644718982195003823669022e0,
            ],
            &[
                2.27331014751653820792359768449e0,
                0.0,
                0.0,
                -1.05344954667372501984066689879e1,
                -2.00087205822486249909675718444e0,
                -1.79589318631187989172765950534e1,
                2.79488845294199600508499808837e1,
                -2.85899827713502369474065508674e0,
                -8.87285693353062954433549289258e0,
                1.23605671757943030647266201528e1,
                6.43392746015763530355970484046e-1,
            ],
        ];
        let b = [
            5.42937341165687622380535766363e-2,
            0.0,
            0.0,
            0.0,
            0.0,
            4.45031289275240888144113950566e0,
            1.89151789931450038304281599044e0,
            -5.8012039600105847814672114227e0,
            3.1116436695781989440891606237e-1,
            -1.52160949662516078556178806805e-1,
            2.01365400804030348374776537501e-1,
            4.47106157277725905176885569043e-2,
        ];
        let e5 = [
            0.1312004499419488073250102996e-1,
            0.0,
            0.0,
            0.0,
            0.0,
            -0.1225156446376204440720569753e1,
            -0.4957589496572501915214079952,
            0.1664377182454986536961530415e1,
            -0.3503288487499736816886487290,
            0.3341791187130174790297318841,
            0.8192320648511571246570742613e-1,
            -0.2235530786388629525884427845e-1,
        ];
        let bhh = vec![
            (0, 0.244094488188976377952755905512),
            (8, 0.733846688281611857341361741547),
            (11, 0.220588235294117647058823529412e-1),
        ];
        Tableau {
            kind: TableauKind::Dop853,
            c,
            a: a.iter().map(|r| sparse(r)).collect(),
            b: sparse(&b),
            error: ErrorEstimate::Dual { e5: e5.to_vec(), bhh },
            order: 8,
            fsal: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub safety: f64,
    /// Initial step; estimated from the right-hand side when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    /// Bounds on `h_new / h`.
    pub shrink_limit: f64,
    pub grow_limit: f64,
    /// Weight of the previous error in the PI controller.
    pub beta: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            safety: 0.9,
            h_init: None,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            shrink_limit: 0.333,
            grow_limit: 6.0,
            beta: 0.04,
            max_steps: 10_000_000,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        pos("abs_tol", self.abs_tol)?;
        pos("rel_tol", self.rel_tol)?;
        pos("h_min", self.h_min)?;
        pos("h_max", self.h_max)?;
        if self.h_min > self.h_max {
            return Err(Error::param("h_min", "exceeds h_max"));
        }
        if let Some(h) = self.h_init {
            pos("h_init", h)?;
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::param("safety", "must lie in (0, 1)"));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub h_smallest: f64,
    pub h_largest: f64,
    pub t_final: f64,
}

/// Outcome of a single attempted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// Scaled error norm; the step is accepted when it is at most 1.
    pub error: f64,
    pub h_next: f64,
}

/// Working storage for repeated steps of one system.
pub struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tab: Tableau,
    ctl: StepControl,
    k: Vec<Vec<f64>>,
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    /// `k[0]` holds f(t, y) for the current point.
    k0_valid: bool,
    err_old: f64,
    last_rejected: bool,
    pub rhs_evals: usize,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    pub fn new(sys: &'a S, tab: Tableau, ctl: StepControl) -> Self {
        let n = sys.dim();
        let k = vec![vec![0.0; n]; tab.stages()];
        Stepper {
            sys,
            tab,
            ctl,
            k,
            ytmp: vec![0.0; n],
            ynew: vec![0.0; n],
            k0_valid: false,
            err_old: 1e-4,
            last_rejected: false,
            rhs_evals: 0,
        }
    }

    fn weight(&self, i: usize, a: f64, b: f64) -> f64 {
        let off = self.sys.weight_offset().map_or(0.0, |o| o[i]);
        self.ctl.abs_tol + self.ctl.rel_tol * (a + off).abs().max((b + off).abs())
    }

    fn ensure_k0(&mut self, t: f64, y: &[f64]) {
        if !self.k0_valid {
            self.sys.rhs(t, y, &mut self.k[0]);
            self.rhs_evals += 1;
            self.k0_valid = true;
        }
    }

    /// Starting step from the local scale of the solution and its derivative.
    pub fn initial_step(&mut self, t: f64, y: &[f64], span: f64) -> f64 {
        if let Some(h) = self.ctl.h_init {
            return h.min(span);
        }
        self.ensure_k0(t, y);
        let n = y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..y.len() {
            let sk = self.weight(i, y[i], y[i]);
            d0 += (y[i] / sk).powi(2);
            d1 += (self.k[0][i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let mut h0 = if d0 <= 1e-10 || d1 <= 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.ctl.h_max).min(span);
        for i in 0..y.len() {
            self.ytmp[i] = y[i] + h0 * self.k[0][i];
        }
        let f1 = &mut self.ynew;
        self.sys.rhs(t + h0, &self.ytmp, f1);
        self.rhs_evals += 1;
        let mut d2 = 0.0;
        for i in 0..y.len() {
            let sk = self.ctl.abs_tol + self.ctl.rel_tol * y[i].abs();
            d2 += ((f1[i] - self.k[0][i]) / sk).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(1.0 / self.tab.order as f64)
        };
        (100.0 * h0).min(h1).min(self.ctl.h_max).min(span)
    }

    fn stage_point(&mut self, stage: usize, h: f64, y: &[f64]) {
        let coeffs = &self.tab.a[stage];
        let k = &self.k;
        for (i, out) in self.ytmp.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(s, a) in coeffs {
                acc += a * k[s][i];
            }
            *out = y[i] + h * acc;
        }
    }

    /// Attempts one step of size `h` from `(t, y)`. On acceptance `y` is
    /// overwritten with the new solution.
    pub fn step(&mut self, t: f64, y: &mut [f64], h: f64) -> StepOutcome {
        let ns = self.tab.stages();
        self.ensure_k0(t, y);
        let last_at_new = self.tab.fsal;
        let explicit_stages = if last_at_new { ns - 1 } else { ns };
        for s in 1..explicit_stages {
            self.stage_point(s, h, y);
            let (_, rest) = self.k.split_at_mut(s);
            self.sys.rhs(t + self.tab.c[s] * h, &self.ytmp, &mut rest[0]);
            self.rhs_evals += 1;
        }
        {
            let k = &self.k;
            let b = &self.tab.b;
            for (i, out) in self.ynew.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(s, w) in b {
                    acc += w * k[s][i];
                }
                *out = y[i] + h * acc;
            }
        }
        if last_at_new {
            let (_, rest) = self.k.split_at_mut(ns - 1);
            self.sys.rhs(t + h, &self.ynew, &mut rest[0]);
            self.rhs_evals += 1;
        }

        let err = self.error_norm(h, y);
        let expo = 1.0 / self.tab.order as f64 - 0.75 * self.ctl.beta;
        let finite = err.is_finite() && self.ynew.iter().all(|v| v.is_finite());
        if finite && err <= 1.0 {
            let fac11 = err.powf(expo);
            let mut fac = fac11 / self.err_old.powf(self.ctl.beta);
            fac = (fac / self.ctl.safety)
                .clamp(1.0 / self.ctl.grow_limit, 1.0 / self.ctl.shrink_limit);
            let mut h_next = h / fac;
            if self.last_rejected {
                h_next = h_next.min(h);
            }
            self.err_old = err.max(1e-4);
            self.last_rejected = false;
            y.copy_from_slice(&self.ynew);
            if last_at_new {
                self.k.swap(0, ns - 1);
            } else {
                self.k0_valid = false;
            }
            StepOutcome {
                accepted: true,
                error: err,
                h_next: h_next.min(self.ctl.h_max),
            }
        } else {
            self.last_rejected = true;
            let h_next = if finite {
                h / (err.powf(expo) / self.ctl.safety).min(1.0 / self.ctl.shrink_limit)
            } else {
                0.1 * h
            };
            StepOutcome {
                accepted: false,
                error: if finite { err } else { f64::NAN },
                h_next,
            }
        }
    }

    fn error_norm(&self, h: f64, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let k = &self.k;
        match &self.tab.error {
            ErrorEstimate::Embedded(e) => {
                let mut sum = 0.0;
                for i in 0..y.len() {
                    let mut acc = 0.0;
                    for (s, w) in e.iter().enumerate() {
                        acc += w * k[s][i];
                    }
                    let sk = self.weight(i, y[i], self.ynew[i]);
                    sum += (h * acc / sk).powi(2);
                }
                (sum / n).sqrt()
            }
            ErrorEstimate::Dual { e5, bhh } => {
                let mut err5 = 0.0;
                let mut err3 = 0.0;
                for i in 0..y.len() {
                    let sk = self.weight(i, y[i], self.ynew[i]);
                    let mut a5 = 0.0;
                    for (s, w) in e5.iter().enumerate() {
                        if *w != 0.0 {
                            a5 += w * k[s][i];
                        }
                    }
                    let mut a3 = 0.0;
                    for &(s, w) in &self.tab.b {
                        a3 += w * k[s][i];
                    }
                    for &(s, w) in bhh {
                        a3 -= w * k[s][i];
                    }
                    err5 += (a5 / sk).powi(2);
                    err3 += (a3 / sk).powi(2);
                }
                let mut deno = err5 + 0.01 * err3;
                if deno <= 0.0 {
                    deno = 1.0;
                }
                h.abs() * err5 * (1.0 / (n * deno)).sqrt()
            }
        }
    }
}

/// Integrates from `t0` through every time in `output_times` (sorted,
/// not before `t0`), calling `observer` with the exact state at each.
pub fn integrate<S, F>(
    sys: &S,
    tableau: &Tableau,
    control: &StepControl,
    t0: f64,
    y0: &[f64],
    output_times: &[f64],
    mut observer: F,
) -> Result<IntegrationStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    control.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::GridMismatch { expected: sys.dim(), got: y0.len() });
    }
    let mut prev = t0;
    for &t in output_times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::param("output_times", "must be finite, sorted and not before the start time"));
        }
        prev = t;
    }
    let mut stats = IntegrationStats {
        h_smallest: f64::INFINITY,
        h_largest: 0.0,
        t_final: t0,
        ..Default::default()
    };
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stepper = Stepper::new(sys, tableau.clone(), *control);
    let t_end = output_times.last().copied().unwrap_or(t0);
    let mut h = f64::NAN;
    let mut steps = 0usize;
    for &t_out in output_times {
        while t < t_out {
            if h.is_nan() {
                h = stepper.initial_step(t, &y, t_end - t);
            }
            let remaining = t_out - t;
            // land exactly on the output time, avoiding a sliver step after it
            let (h_try, clipped) = if h >= remaining * (1.0 - 1e-12) || h * 1.01 >= remaining {
                (remaining, true)
            } else {
                (h, false)
            };
            if h_try < control.h_min && !clipped {
                return Err(Error::StepUnderflow { t, h: h_try, h_min: control.h_min });
            }
            steps += 1;
            if steps > control.max_steps {
                return Err(Error::TooManySteps { t, max_steps: control.max_steps });
            }
            let out = stepper.step(t, &mut y, h_try);
            if out.accepted {
                stats.accepted += 1;
                stats.h_smallest = stats.h_smallest.min(h_try);
                stats.h_largest = stats.h_largest.max(h_try);
                t = if clipped { t_out } else { t + h_try };
                h = if clipped { out.h_next.max(h) } else { out.h_next };
            } else {
                stats.rejected += 1;
                if out.error.is_nan() && out.h_next < control.h_min {
                    return Err(Error::NonFinite { t });
                }
                h = out.h_next;
                if h < control.h_min {
                    return Err(Error::StepUnderflow { t, h, h_min: control.h_min });
                }
            }
        }
        observer(t_out, &y)?;
    }
    stats.t_final = t;
    stats.rhs_evals = stepper.rhs_evals;
    if stats.accepted == 0 {
        stats.h_smallest = 0.0;
    }
    Ok(stats)
}

/// Fixed-step integration, used for order verification.
pub fn integrate_fixed<S: OdeSystem + ?Sized>(
    sys: &S,
    tableau: &Tableau,
    t0: f64,
    t1: f64,
    y0: &[f64],
    n_steps: usize,
) -> Vec<f64> {
    let ctl = StepControl {
        abs_tol: f64::MAX / 4.0,
        rel_tol: 1.0,
        ..Default::default()
    };
    let mut stepper = Stepper::new(sys, tableau.clone(), ctl);
    let h = (t1 - t0) / n_steps as f64;
    let mut y = y0.to_vec();
    for i in 0..n_steps {
        let out = stepper.step(t0 + i as f64 * h, &mut y, h);
        debug_assert!(out.accepted);
    }
    y
}
