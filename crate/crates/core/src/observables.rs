//! Quantities derived from a cumulant state: intensity, uncertainty
//! ellipses, squeezed-thermal parameters, the homodyne squeezing spectrum
//! and photon-number correlations between spectral windows.
//!
//! Frequencies are in units of `omega_0 = 2 / x_0`, so that on a grid of
//! spacing `dx` the largest resolvable frequency is `pi / (2 dx)`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cumulant_state::{CumulantState, GridSpec};
use crate::error::{Error, Result};

/// Normally ordered photon number per cell.
pub fn intensity(st: &CumulantState) -> Array1<f64> {
    let ord = 0.5 * (st.s - 1.0);
    Array1::from_iter((0..st.m()).map(|j| {
        st.cu[j] * st.cu[j] + st.cv[j] * st.cv[j] + st.cuu[[j, j]] + st.cvv[[j, j]] + ord
    }))
}

/// Principal axes of the single-cell covariance ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    /// Larger eigenvalue `B`.
    pub major: f64,
    /// Smaller eigenvalue `b`.
    pub minor: f64,
    /// Orientation of the major axis in `(-pi/2, pi/2]`.
    pub phi: f64,
}

pub fn uncertainty_ellipse(st: &CumulantState, j: usize) -> Ellipse {
    let (uu, vv, uv) = (st.cuu[[j, j]], st.cvv[[j, j]], st.cuv[[j, j]]);
    let mean = 0.5 * (uu + vv);
    let half = 0.5 * (uu - vv).hypot(2.0 * uv);
    let mut phi = 0.5 * (2.0 * uv).atan2(uu - vv);
    if phi <= -0.5 * PI {
        phi += PI;
    }
    Ellipse {
        major: mean + half,
        minor: mean - half,
        phi,
    }
}

/// Equivalent squeezed thermal state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedThermal {
    pub n: f64,
    pub r: f64,
    pub theta: f64,
    /// `(2n + 1) exp(-2r)`; below 1 means quadrature squeezing.
    pub squeezing_margin: f64,
    pub minor: f64,
    /// Vacuum level of `b` for this ordering, `(1 - s) / 4`.
    pub minor_vacuum: f64,
}

pub fn squeezed_thermal_params(st: &CumulantState, j: usize) -> Result<SqueezedThermal> {
    let e = uncertainty_ellipse(st, j);
    let big = e.major + 0.25 * st.s;
    let small = e.minor + 0.25 * st.s;
    let radicand = big * small;
    if !(big > 0.0 && small > 0.0) {
        return Err(Error::Unphysical { cell: j, radicand });
    }
    let n = 2.0 * radicand.sqrt() - 0.5;
    let r = 0.25 * (big / small).ln();
    let theta = (-2.0 * st.cuv[[j, j]]).atan2(st.cvv[[j, j]] - st.cuu[[j, j]]);
    Ok(SqueezedThermal {
        n,
        r,
        theta,
        squeezing_margin: (2.0 * n + 1.0) * (-2.0 * r).exp(),
        minor: e.minor,
        minor_vacuum: 0.25 * (1.0 - st.s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_max: f64,
    pub delta_omega_min: f64,
}

impl FrequencyGrid {
    /// All multiples of the resolution up to the sampling limit.
    pub fn omegas(&self) -> Vec<f64> {
        let kmax = (self.omega_max / self.delta_omega_min + 1e-9).floor() as i64;
        (-kmax..=kmax).map(|k| k as f64 * self.delta_omega_min).collect()
    }

    /// Multiples of `step` within `[-limit, limit]`.
    pub fn sample(&self, limit: f64, step: f64) -> Vec<f64> {
        let limit = limit.min(self.omega_max);
        let kmax = (limit / step + 1e-9).floor() as i64;
        (-kmax..=kmax).map(|k| k as f64 * step).collect()
    }
}

pub fn frequency_grid(grid: &GridSpec) -> FrequencyGrid {
    FrequencyGrid {
        omega_max: 0.5 * PI / grid.dx,
        delta_omega_min: PI / (grid.m as f64 * grid.dx),
    }
}

fn check_omegas(grid: &GridSpec, omegas: &[f64]) -> Result<()> {
    let limit = frequency_grid(grid).omega_max;
    for &w in omegas {
        if !(w.is_finite() && w.abs() <= limit * (1.0 + 1e-12)) {
            return Err(Error::FrequencyOutOfRange { omega: w, limit });
        }
    }
    Ok(())
}

/// Phase-space matrices of the fluctuations:
/// `n[j][k] = Cuu + Cvv + (s-1)/2 delta + i sign (Cuv[j][k] - Cuv[k][j])` and
/// `g[j][k] = Cuu - Cvv + i sign' (Cuv[j][k] + Cuv[k][j])`.
fn fluctuation_matrices(st: &CumulantState, sign: f64, sign_g: f64) -> (Array2<C64>, Array2<C64>) {
    let m = st.m();
    let ord = 0.5 * (st.s - 1.0);
    let mut n = Array2::zeros((m, m));
    let mut g = Array2::zeros((m, m));
    for j in 0..m {
        for k in 0..m {
            let (u, v) = (st.cuu[[j, k]], st.cvv[[j, k]]);
            let (x, xt) = (st.cuv[[j, k]], st.cuv[[k, j]]);
            let diag = if j == k { ord } else { 0.0 };
            n[[j, k]] = C64::new(u + v + diag, sign * (x - xt));
            g[[j, k]] = C64::new(u - v, sign_g * (x + xt));
        }
    }
    (n, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumPhase {
    /// Local-oscillator phase chosen to minimize the noise at each frequency.
    Optimal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    /// Normalized noise at the requested phase.
    pub s: f64,
    pub s_min: f64,
    pub phi_opt: f64,
}

/// Homodyne squeezing spectrum relative to shot noise, with the local
/// oscillator pulse `lo` given per cell.
pub fn squeezing_spectrum(
    st: &CumulantState,
    grid: &GridSpec,
    lo: &[C64],
    omegas: &[f64],
    phase: SpectrumPhase,
) -> Result<Vec<SpectrumPoint>> {
    let m = grid.m;
    if st.m() != m {
        return Err(Error::GridMismatch { expected: m, got: st.m() });
    }
    if lo.len() != m {
        return Err(Error::GridMismatch { expected: m, got: lo.len() });
    }
    let lo_energy: f64 = lo.iter().map(|a| a.norm_sqr()).sum();
    if !(lo_energy > 0.0) {
        return Err(Error::ZeroLocalOscillator);
    }
    check_omegas(grid, omegas)?;
    let i0 = (lo_energy + intensity(st).sum()) / (2.0 * PI);
    let (nm, gm) = fluctuation_matrices(st, -1.0, -1.0);
    let x = grid.positions();
    let mut out = Vec::with_capacity(omegas.len());
    let mut w = vec![C64::new(0.0, 0.0); m];
    let mut p = vec![C64::new(0.0, 0.0); m];
    for &omega in omegas {
        let k = 2.0 * omega;
        for j in 0..m {
            let ph = C64::from_polar(1.0, k * x[j]);
            w[j] = lo[j] * ph;
            p[j] = lo[j] * ph.conj();
        }
        let mut f = C64::new(0.0, 0.0);
        let mut g = C64::new(0.0, 0.0);
        for j in 0..m {
            let (mut nw, mut gw) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            let (nrow, grow) = (nm.row(j), gm.row(j));
            for l in 0..m {
                nw += nrow[l] * w[l];
                gw += grow[l] * w[l];
            }
            f += w[j].conj() * nw;
            g += p[j] * gw;
        }
        f /= 2.0 * PI;
        g /= 2.0 * PI;
        let phi_opt = if g.norm() == 0.0 { 0.0 } else { 0.5 * (PI - g.arg()) };
        let s_min = 2.0 * (f.re - g.norm()) / i0;
        let s = match phase {
            SpectrumPhase::Optimal => s_min,
            SpectrumPhase::Fixed(phi) => 2.0 * (f + C64::from_polar(1.0, 2.0 * phi) * g).re / i0,
        };
        out.push(SpectrumPoint { omega, s, s_min, phi_opt });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlations {
    pub omegas: Vec<f64>,
    pub delta_omega: f64,
    /// Mean photon number in each window.
    pub photons: Vec<f64>,
    /// Normally ordered covariance between windows.
    pub covariance: Array2<f64>,
    /// Normalized correlation; `None` where a window has zero variance.
    pub eta: Array2<Option<f64>>,
}

/// Window variances at or below this are treated as zero.
const VARIANCE_FLOOR: f64 = 1e-13;

/// Photon-number statistics of spectral windows of width `delta_omega`
/// centred on each of `omegas`.
pub fn photon_correlation(st: &CumulantState, grid: &GridSpec, omegas: &[f64], delta_omega: f64) -> Result<Correlations> {
    let m = grid.m;
    if st.m() != m {
        return Err(Error::GridMismatch { expected: m, got: st.m() });
    }
    let fg = frequency_grid(grid);
    if !(delta_omega >= fg.delta_omega_min * (1.0 - 1e-12)) {
        return Err(Error::WindowTooNarrow { delta: delta_omega, min: fg.delta_omega_min });
    }
    check_omegas(grid, omegas)?;
    let nw = omegas.len();
    // window integrals in units of 1/x0
    let c = grid.dx * 2.0 * delta_omega / (2.0 * PI);
    let x = grid.positions();
    let phi = Array2::from_shape_fn((m, nw), |(j, a)| C64::from_polar(1.0, 2.0 * omegas[a] * x[j]));
    let (nm, gm) = fluctuation_matrices(st, 1.0, 1.0);
    let phi_h = phi.t().mapv(|z| z.conj());
    let f = phi_h.dot(&nm.dot(&phi)) * C64::new(c, 0.0);
    let g = phi.t().dot(&gm.dot(&phi)) * C64::new(c, 0.0);
    let alpha: Array1<C64> = (0..m).map(|j| C64::new(st.cu[j], st.cv[j])).collect();
    let e: Array1<C64> = phi.t().dot(&alpha) * C64::new(c.sqrt(), 0.0);

    let photons: Vec<f64> = (0..nw).map(|a| f[[a, a]].re + e[a].norm_sqr()).collect();
    let covariance = Array2::from_shape_fn((nw, nw), |(a, b)| {
        let (fab, gab) = (f[[a, b]], g[[a, b]]);
        fab.norm_sqr() + gab.norm_sqr() + 2.0 * (fab * e[a] * e[b].conj() + gab * e[a].conj() * e[b].conj()).re
    });
    let variance: Vec<f64> = (0..nw).map(|a| covariance[[a, a]] + photons[a]).collect();
    let eta = Array2::from_shape_fn((nw, nw), |(a, b)| {
        if variance[a] > VARIANCE_FLOOR && variance[b] > VARIANCE_FLOOR {
            Some(covariance[[a, b]] / (variance[a] * variance[b]).sqrt())
        } else {
            None
        }
    });
    Ok(Correlations {
        omegas: omegas.to_vec(),
        delta_omega,
        photons,
        covariance,
        eta,
    })
}
