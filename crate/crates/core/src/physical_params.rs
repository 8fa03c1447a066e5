//! Conversion from laboratory fibre parameters to the dimensionless
//! coefficients used by the equations of motion.
//!
//! Lengths are scaled by the dispersion length `x_d = t0^2 / |k''|`, times by
//! `t_d = x_d / v_gr`, and the field by the soliton photon density so that the
//! fundamental soliton has unit amplitude.

use serde::{Deserialize, Serialize};

use crate::cumulant_state::{check_ordering, GridSpec};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Default mean thermal occupation per cell.
pub const DEFAULT_N_TH: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(format!("sign must be +1 or -1, got {v}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalSpec {
    /// Mean occupation given directly.
    Occupation(f64),
    /// Reservoir temperature in kelvin.
    Temperature(f64),
}

/// Laboratory parameters of a fibre experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInputs {
    pub t0_ps: f64,
    /// Dispersion parameter D in ps/(nm km).
    pub dispersion_ps_nm_km: f64,
    /// Power loss in dB/km.
    pub loss_db_km: f64,
    pub wavelength_um: f64,
    pub thermal: ThermalSpec,
    /// Mean photon number of the soliton.
    pub nbar: f64,
    pub sign_chi: Sign,
    pub sign_omega2: Sign,
    /// Detuning, already in units of 1/t_d.
    pub delta_omega_t: f64,
    pub s: f64,
}

/// Parameters given directly in scaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledInputs {
    pub gamma_t: f64,
    pub nbar: f64,
    pub n_th: f64,
    pub sign_chi: Sign,
    pub sign_omega2: Sign,
    pub delta_omega_t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub gamma_t: f64,
    pub nbar: f64,
    /// Photons per cell at unit scaled amplitude, `nbar * dx`.
    pub n0: f64,
    pub n_th: f64,
    pub delta_omega_t: f64,
    pub sign_chi: Sign,
    pub sign_omega2: Sign,
    pub s: f64,
    pub dx: f64,
    /// Dispersion length in metres, when derived from fibre data.
    pub x_d_m: Option<f64>,
    /// Group-velocity dispersion k'' in s^2/m, when derived from fibre data.
    pub k2_s2_per_m: Option<f64>,
}

impl ScaledParams {
    pub fn from_scaled(inp: &ScaledInputs, grid: &GridSpec) -> Result<Self> {
        check_ordering(inp.s)?;
        positive("nbar", inp.nbar)?;
        non_negative("gamma_t", inp.gamma_t)?;
        non_negative("n_th", inp.n_th)?;
        finite("delta_omega_t", inp.delta_omega_t)?;
        let p = ScaledParams {
            gamma_t: inp.gamma_t,
            nbar: inp.nbar,
            n0: inp.nbar * grid.dx,
            n_th: inp.n_th,
            delta_omega_t: inp.delta_omega_t,
            sign_chi: inp.sign_chi,
            sign_omega2: inp.sign_omega2,
            s: inp.s,
            dx: grid.dx,
            x_d_m: None,
            k2_s2_per_m: None,
        };
        p.warn_if_no_soliton();
        Ok(p)
    }

    /// Bright solitons need opposite signs of the Kerr and dispersion terms.
    pub fn supports_solitons(&self) -> bool {
        self.sign_chi.value() * self.sign_omega2.value() < 0.0
    }

    fn warn_if_no_soliton(&self) {
        if !self.supports_solitons() {
            log::warn!(
                "sign_chi = {:+} and sign_omega2 = {:+} do not support a bright soliton",
                self.sign_chi.value(),
                self.sign_omega2.value()
            );
        }
    }
}

/// Carrier angular frequency for a vacuum wavelength in micrometres.
pub fn carrier_frequency(wavelength_um: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (wavelength_um * 1e-6)
}

/// Group-velocity dispersion k'' in s^2/m from D in ps/(nm km).
pub fn gvd_from_dispersion(dispersion_ps_nm_km: f64, wavelength_um: f64) -> f64 {
    let d_si = dispersion_ps_nm_km * 1e-6;
    let wc = carrier_frequency(wavelength_um);
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * d_si / (wc * wc)
}

/// Bose occupation of a mode at angular frequency `omega` and temperature `t_k`.
pub fn thermal_occupation(omega: f64, t_k: f64) -> Result<f64> {
    non_negative("temperature_k", t_k)?;
    positive("omega", omega)?;
    if t_k == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (BOLTZMANN * t_k)).exp_m1())
}

pub fn derive_scales(inp: &PhysicalInputs, grid: &GridSpec) -> Result<ScaledParams> {
    positive("t0_ps", inp.t0_ps)?;
    positive("wavelength_um", inp.wavelength_um)?;
    non_negative("loss_db_km", inp.loss_db_km)?;
    finite("dispersion_ps_nm_km", inp.dispersion_ps_nm_km)?;
    if inp.dispersion_ps_nm_km == 0.0 {
        return Err(Error::param(
            "dispersion_ps_nm_km",
            "zero dispersion leaves the dispersion length undefined",
        ));
    }
    let k2 = gvd_from_dispersion(inp.dispersion_ps_nm_km, inp.wavelength_um);
    let t0 = inp.t0_ps * 1e-12;
    let x_d = t0 * t0 / k2.abs();
    // dB/km power loss -> amplitude damping per km, times x_d in km
    let gamma_t = 0.05 * std::f64::consts::LN_10 * inp.loss_db_km * (x_d * 1e-3);
    let n_th = match inp.thermal {
        ThermalSpec::Occupation(n) => n,
        ThermalSpec::Temperature(t) => thermal_occupation(carrier_frequency(inp.wavelength_um), t)?,
    };
    let mut p = ScaledParams::from_scaled(
        &ScaledInputs {
            gamma_t,
            nbar: inp.nbar,
            n_th,
            sign_chi: inp.sign_chi,
            sign_omega2: inp.sign_omega2,
            delta_omega_t: inp.delta_omega_t,
            s: inp.s,
        },
        grid,
    )?;
    p.x_d_m = Some(x_d);
    p.k2_s2_per_m = Some(k2);
    Ok(p)
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::param(name, format!("must be finite, got {v}")));
    }
    Ok(())
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::param(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::param(name, format!("must be non-negative, got {v}")));
    }
    Ok(())
}
