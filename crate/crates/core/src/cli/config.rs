//! Run configuration: a flat JSON object plus `key=value` overrides.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::cumulant_state::{check_ordering, Boundary, GridSpec};
use crate::dynamics_rhs::RhsCoefficients;
use crate::observables::{frequency_grid, SpectrumPhase};
use crate::ode_integrator::{StepControl, TableauKind};
use crate::physical_params::{
    derive_scales, PhysicalInputs, ScaledInputs, ScaledParams, Sign, ThermalSpec, DEFAULT_N_TH,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<crate::error::Error> for ConfigError {
    fn from(e: crate::error::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

fn invalid<T>(msg: impl Into<String>) -> CResult<T> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Soliton,
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Intensity,
    Ellipse,
    SqueezedThermal,
    Spectrum,
    Eta,
    Photons,
    Snapshot,
}

impl ObservableKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            ObservableKind::Intensity => "intensity",
            ObservableKind::Ellipse => "ellipse",
            ObservableKind::SqueezedThermal => "squeezed_thermal",
            ObservableKind::Spectrum => "spectrum",
            ObservableKind::Eta => "eta",
            ObservableKind::Photons => "photons",
            ObservableKind::Snapshot => "snapshot",
        }
    }
}

/// `"optimal"` or a fixed local-oscillator phase in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSetting {
    Fixed(f64),
    Named(NamedPhase),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedPhase {
    Optimal,
}

impl Default for PhaseSetting {
    fn default() -> Self {
        PhaseSetting::Named(NamedPhase::Optimal)
    }
}

impl PhaseSetting {
    pub fn to_phase(self) -> SpectrumPhase {
        match self {
            PhaseSetting::Fixed(p) => SpectrumPhase::Fixed(p),
            PhaseSetting::Named(NamedPhase::Optimal) => SpectrumPhase::Optimal,
        }
    }
}

fn d_m() -> usize {
    200
}
fn d_dx() -> f64 {
    0.1
}
fn d_nbar() -> f64 {
    1e9
}
fn d_plus() -> Sign {
    Sign::Plus
}
fn d_minus() -> Sign {
    Sign::Minus
}
fn d_tol() -> f64 {
    1e-9
}
fn d_h_min() -> f64 {
    1e-12
}
fn d_max_steps() -> usize {
    10_000_000
}
fn d_observables() -> Vec<ObservableKind> {
    vec![ObservableKind::Intensity, ObservableKind::Ellipse]
}
fn d_output_dir() -> String {
    "out".into()
}

/// Flat run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default = "d_dx")]
    pub dx: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub s: f64,
    /// Run twice, at each ordering, and compare.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_pair: Option<[f64; 2]>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion_ps_nm_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_t: Option<f64>,

    #[serde(default = "d_nbar")]
    pub nbar: f64,
    #[serde(default = "d_plus")]
    pub sign_chi: Sign,
    #[serde(default = "d_minus")]
    pub sign_omega2: Sign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(default)]
    pub delta_omega_t: f64,
    #[serde(default)]
    pub initial: InitialKind,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_step: Option<f64>,

    #[serde(default)]
    pub tableau: TableauKind,
    #[serde(default = "d_tol")]
    pub abs_tol: f64,
    #[serde(default = "d_tol")]
    pub rel_tol: f64,
    #[serde(default = "d_h_min")]
    pub h_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,

    #[serde(default = "d_observables")]
    pub observables: Vec<ObservableKind>,
    #[serde(default)]
    pub spectrum_phase: PhaseSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_omega_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_delta_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_omega_max: Option<f64>,

    #[serde(default = "d_output_dir")]
    pub output_dir: String,
}

fn default_boundary() -> Boundary {
    Boundary::Absorbing
}

/// Splits `key=value`; the value is read as JSON when it parses, otherwise
/// taken as a bare string.
pub fn parse_override(text: &str) -> CResult<(String, Value)> {
    let (key, raw) = text.split_once('=').ok_or_else(|| ConfigError::Override(text.to_string()))?;
    let key = key.trim();
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ConfigError::Override(text.to_string()));
    }
    let raw = raw.trim();
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Parses a config document and applies overrides in order.
pub fn parse_config(text: &str, overrides: &[String]) -> CResult<RunConfig> {
    if overrides.is_empty() {
        return Ok(serde_json::from_str(text)?);
    }
    let mut map: Map<String, Value> = serde_json::from_str(text)?;
    for o in overrides {
        let (k, v) = parse_override(o)?;
        map.insert(k, v);
    }
    Ok(serde_json::from_value(Value::Object(map))?)
}

/// Everything needed to run one ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub grid: GridSpec,
    pub params: ScaledParams,
    pub coeffs: RhsCoefficients,
    pub control: StepControl,
    pub tableau: TableauKind,
    pub times: Vec<f64>,
    pub spectrum_omegas: Vec<f64>,
    pub eta_omegas: Vec<f64>,
    pub eta_delta_omega: f64,
}

impl RunConfig {
    pub fn orderings(&self) -> Vec<f64> {
        match self.s_pair {
            Some([a, b]) => vec![a, b],
            None => vec![self.s],
        }
    }

    pub fn wants(&self, kind: ObservableKind) -> bool {
        self.observables.contains(&kind)
    }

    fn physical_inputs(&self, s: f64) -> CResult<Option<PhysicalInputs>> {
        let any_physical = self.t0_ps.is_some()
            || self.dispersion_ps_nm_km.is_some()
            || self.loss_db_km.is_some()
            || self.wavelength_um.is_some()
            || self.temperature_k.is_some();
        if !any_physical {
            return Ok(None);
        }
        if self.gamma_t.is_some() {
            return invalid("gamma_t cannot be combined with physical fibre parameters");
        }
        let (Some(t0), Some(d), Some(loss)) = (self.t0_ps, self.dispersion_ps_nm_km, self.loss_db_km) else {
            return invalid("physical mode needs t0_ps, dispersion_ps_nm_km and loss_db_km");
        };
        let thermal = match (self.n_th, self.temperature_k) {
            (Some(_), Some(_)) => return invalid("give either n_th or temperature_k, not both"),
            (Some(n), None) => ThermalSpec::Occupation(n),
            (None, Some(t)) => ThermalSpec::Temperature(t),
            (None, None) => ThermalSpec::Occupation(DEFAULT_N_TH),
        };
        Ok(Some(PhysicalInputs {
            t0_ps: t0,
            dispersion_ps_nm_km: d,
            loss_db_km: loss,
            wavelength_um: self.wavelength_um.unwrap_or(1.5),
            thermal,
            nbar: self.nbar,
            sign_chi: self.sign_chi,
            sign_omega2: self.sign_omega2,
            delta_omega_t: self.delta_omega_t,
            s,
        }))
    }

    fn output_times(&self) -> CResult<Vec<f64>> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} must be finite and non-negative, got {v}"))
            }
        };
        if let Some(t) = self.t_end {
            finite_nonneg("t_end", t)?;
        }
        let mut times = match (&self.output_times, self.output_step) {
            (Some(_), Some(_)) => return invalid("give either output_times or output_step, not both"),
            (Some(list), None) => {
                if list.is_empty() {
                    return invalid("output_times is empty");
                }
                for &t in list {
                    finite_nonneg("output time", t)?;
                }
                if list.windows(2).any(|w| w[1] < w[0]) {
                    return invalid("output_times must be sorted");
                }
                list.clone()
            }
            (None, Some(step)) => {
                if !(step.is_finite() && step > 0.0) {
                    return invalid("output_step must be positive");
                }
                let Some(t_end) = self.t_end else {
                    return invalid("output_step needs t_end");
                };
                let n = (t_end / step + 1e-9).floor() as usize;
                if n > 100_000 {
                    return invalid("output_step gives too many output times");
                }
                (0..=n).map(|k| round_time(k as f64 * step)).collect()
            }
            (None, None) => {
                let Some(t_end) = self.t_end else {
                    return invalid("t_end or output_times is required");
                };
                if t_end == 0.0 {
                    vec![0.0]
                } else {
                    vec![0.0, t_end]
                }
            }
        };
        if let Some(t_end) = self.t_end {
            let last = *times.last().unwrap();
            if t_end < last {
                return invalid(format!("t_end {t_end} precedes output time {last}"));
            }
            if t_end > last {
                times.push(t_end);
            }
        }
        times.dedup();
        Ok(times)
    }

    /// Validates the whole config and derives run parameters for ordering `s`.
    pub fn resolve(&self, s: f64) -> CResult<ResolvedRun> {
        check_ordering(s)?;
        for v in self.orderings() {
            check_ordering(v)?;
        }
        if let Some([a, b]) = self.s_pair {
            if a == b {
                return invalid("s_pair needs two different orderings");
            }
        }
        let grid = GridSpec::new(self.m, self.dx, self.boundary)?;
        if self.m > 2000 {
            return invalid(format!("m = {} exceeds the supported maximum of 2000", self.m));
        }
        let params = match self.physical_inputs(s)? {
            Some(p) => derive_scales(&p, &grid)?,
            None => {
                let Some(gamma_t) = self.gamma_t else {
                    return invalid("give gamma_t or the physical fibre parameters");
                };
                ScaledParams::from_scaled(
                    &ScaledInputs {
                        gamma_t,
                        nbar: self.nbar,
                        n_th: self.n_th.unwrap_or(DEFAULT_N_TH),
                        sign_chi: self.sign_chi,
                        sign_omega2: self.sign_omega2,
                        delta_omega_t: self.delta_omega_t,
                        s,
                    },
                    &grid,
                )?
            }
        };
        let coeffs = RhsCoefficients::from_params(&params, &grid);
        let control = StepControl {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            h_min: self.h_min,
            h_max: self.h_max.unwrap_or(f64::INFINITY),
            max_steps: self.max_steps,
            ..Default::default()
        };
        control.validate()?;
        let times = self.output_times()?;

        let fg = frequency_grid(&grid);
        let positive_or = |name: &str, v: Option<f64>, default: f64| -> CResult<f64> {
            match v {
                None => Ok(default),
                Some(x) if x.is_finite() && x > 0.0 => Ok(x),
                Some(x) => invalid(format!("{name} must be positive, got {x}")),
            }
        };
        let spectrum_step = positive_or("spectrum_omega_step", self.spectrum_omega_step, fg.delta_omega_min)?;
        let spectrum_max = match self.spectrum_omega_max {
            Some(x) if x.is_finite() && x >= 0.0 => x,
            Some(x) => return invalid(format!("spectrum_omega_max must be non-negative, got {x}")),
            None => fg.omega_max,
        };
        if spectrum_max > fg.omega_max * (1.0 + 1e-12) {
            return invalid(format!("spectrum_omega_max exceeds the grid limit {}", fg.omega_max));
        }
        let eta_delta_omega = positive_or("eta_delta_omega", self.eta_delta_omega, fg.delta_omega_min)?;
        if eta_delta_omega < fg.delta_omega_min * (1.0 - 1e-12) {
            return invalid(format!(
                "eta_delta_omega {eta_delta_omega} is below the grid resolution {}",
                fg.delta_omega_min
            ));
        }
        let eta_max = positive_or("eta_omega_max", self.eta_omega_max, fg.omega_max)?;
        if eta_max > fg.omega_max * (1.0 + 1e-12) {
            return invalid(format!("eta_omega_max exceeds the grid limit {}", fg.omega_max));
        }
        let spectrum_omegas = fg.sample(spectrum_max, spectrum_step);
        let eta_omegas = fg.sample(eta_max, eta_delta_omega);
        if spectrum_omegas.len() > 20_001 || eta_omegas.len() > 4001 {
            return invalid("frequency sampling too dense");
        }
        if self.initial == InitialKind::Thermal && self.wants(ObservableKind::Spectrum) {
            return invalid("the squeezing spectrum needs a soliton initial state for its local oscillator");
        }
        if let PhaseSetting::Fixed(p) = self.spectrum_phase {
            if !p.is_finite() {
                return invalid("spectrum_phase must be finite");
            }
        }
        Ok(ResolvedRun {
            grid,
            params,
            coeffs,
            control,
            tableau: self.tableau,
            times,
            spectrum_omegas,
            eta_omegas,
            eta_delta_omega,
        })
    }
}

/// Rounds to 12 decimals so stepped output times print cleanly.
fn round_time(t: f64) -> f64 {
    (t * 1e12).round() / 1e12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scaled_config() {
        let c = parse_config(r#"{"gamma_t": 0.05, "t_end": 2}"#, &[]).unwrap();
        assert_eq!(c.m, 200);
        let r = c.resolve(c.s).unwrap();
        assert_eq!(r.times, vec![0.0, 2.0]);
        assert_eq!(r.coeffs.gamma, 0.05);
        assert_eq!(r.params.n0, 1e8);
        assert!((r.coeffs.d2 + 50.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = parse_config("{\n  \"gamma_t\": 0.0,\n  \"bogus\": 1\n}", &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = parse_config(
            r#"{"gamma_t": 0.05, "t_end": 2}"#,
            &["gamma_t=0.1".into(), "boundary=periodic".into(), "gamma_t=0.2".into()],
        )
        .unwrap();
        assert_eq!(c.gamma_t, Some(0.2));
        assert_eq!(c.boundary, Boundary::Periodic);
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("=3").is_err());
        assert_eq!(parse_override("tableau=dopri5").unwrap().1, Value::String("dopri5".into()));
    }

    #[test]
    fn mode_conflicts() {
        let both = parse_config(r#"{"gamma_t": 0.05, "t0_ps": 2, "t_end": 1}"#, &[]).unwrap();
        assert!(both.resolve(0.0).is_err());
        let partial = parse_config(r#"{"t0_ps": 2, "t_end": 1}"#, &[]).unwrap();
        assert!(partial.resolve(0.0).is_err());
        let neither = parse_config(r#"{"t_end": 1}"#, &[]).unwrap();
        assert!(neither.resolve(0.0).is_err());
        let temp = parse_config(r#"{"gamma_t": 0.0, "temperature_k": 300, "t_end": 1}"#, &[]).unwrap();
        assert!(temp.resolve(0.0).is_err());
    }

    #[test]
    fn physical_mode_derives_damping() {
        let c = parse_config(
            r#"{"t0_ps": 2, "dispersion_ps_nm_km": 20, "loss_db_km": 0.3, "t_end": 1}"#,
            &[],
        )
        .unwrap();
        let r = c.resolve(0.0).unwrap();
        assert!((r.params.gamma_t - 5.8e-3).abs() < 0.03 * 5.8e-3);
    }

    #[test]
    fn output_time_forms() {
        let c = parse_config(r#"{"gamma_t": 0, "t_end": 1, "output_step": 0.1}"#, &[]).unwrap();
        let t = c.resolve(0.0).unwrap().times;
        assert_eq!(t.len(), 11);
        assert_eq!(t[3], 0.3);
        let z = parse_config(r#"{"gamma_t": 0, "t_end": 0}"#, &[]).unwrap();
        assert_eq!(z.resolve(0.0).unwrap().times, vec![0.0]);
        let bad = parse_config(r#"{"gamma_t": 0, "output_times": [1, 0.5]}"#, &[]).unwrap();
        assert!(bad.resolve(0.0).is_err());
    }

    #[test]
    fn rejects_out_of_range_values() {
        for o in ["m=2", "dx=0", "s=1.5", "abs_tol=0", "eta_delta_omega=0.001", "spectrum_omega_max=100", "s_pair=[0.5,0.5]"] {
            let c = parse_config(r#"{"gamma_t": 0, "t_end": 1}"#, &[o.to_string()]).unwrap();
            assert!(c.resolve(c.s).is_err(), "{o}");
        }
        assert!(parse_config(r#"{"gamma_t": 0, "t_end": 1}"#, &["sign_chi=0".into()]).is_err());
    }

    #[test]
    fn phase_setting_forms() {
        let c = parse_config(r#"{"gamma_t": 0, "t_end": 1, "spectrum_phase": 0.5}"#, &[]).unwrap();
        assert_eq!(c.spectrum_phase, PhaseSetting::Fixed(0.5));
        let c = parse_config(r#"{"gamma_t": 0, "t_end": 1, "spectrum_phase": "optimal"}"#, &[]).unwrap();
        assert_eq!(c.spectrum_phase.to_phase(), SpectrumPhase::Optimal);
        assert!(parse_config(r#"{"gamma_t": 0, "spectrum_phase": "best"}"#, &[]).is_err());
    }
}
