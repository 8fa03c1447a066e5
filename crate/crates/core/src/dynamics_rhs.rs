//! Equations of motion for first- and second-order cumulants under Gaussian
//! closure.
//!
//! The model Hamiltonian per cell is
//! `dw n_j + d2 (2 n_j - a_j^+ a_{j+1} - a_j^+ a_{j-1}) + (chi/2) a_j^+ a_j^+ a_j a_j`
//! with amplitude damping `gamma` towards a thermal reservoir of occupation
//! `n_th`. Third- and higher-order cumulants are set to zero.
//!
//! Writing `q = (u, v)`, the closed equations take the form
//! `dC/dt = J C + C J^T + D`, with `J` and `D` the expectation values of the
//! drift Jacobian and diffusion matrix of the s-parametrized phase-space
//! equation. The kernel below assembles each covariance element from that
//! structure term by term.

use std::cell::RefCell;

use crate::cumulant_state::{Boundary, CumulantDerivative, CumulantState, GridSpec};
use crate::error::{Error, Result};
use crate::ode_integrator::OdeSystem;
use crate::physical_params::ScaledParams;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RhsCoefficients {
    /// Hopping strength `sign(omega2) / (2 dx^2)`.
    pub d2: f64,
    /// Kerr coefficient per cell `sign(chi) / n0`.
    pub chi: f64,
    pub gamma: f64,
    pub delta_omega: f64,
    pub n_th: f64,
    pub s: f64,
}

impl RhsCoefficients {
    pub fn from_params(p: &ScaledParams, grid: &GridSpec) -> Self {
        RhsCoefficients {
            d2: p.sign_omega2.value() / (2.0 * grid.dx * grid.dx),
            chi: p.sign_chi.value() / p.n0,
            gamma: p.gamma_t,
            delta_omega: p.delta_omega_t,
            n_th: p.n_th,
            s: p.s,
        }
    }

    /// Diagonal diffusion from the reservoir.
    pub fn thermal_source(&self) -> f64 {
        self.gamma * (self.n_th + 0.5 * (1.0 - self.s))
    }
}

/// Cumulant dynamics on a grid, usable as an [`OdeSystem`].
pub struct CumulantSystem {
    grid: GridSpec,
    coeffs: RhsCoefficients,
    prev: Vec<usize>,
    next: Vec<usize>,
    weight_offset: Vec<f64>,
    scratch: RefCell<Scratch>,
}

#[derive(Default)]
struct Scratch {
    xt: Vec<f64>,
    p: Vec<f64>,
    qu: Vec<f64>,
    qv: Vec<f64>,
    r: Vec<f64>,
}

impl CumulantSystem {
    pub fn new(grid: GridSpec, coeffs: RhsCoefficients) -> Self {
        let m = grid.m;
        // index m stands for "outside the grid", where the field is zero
        let (prev, next) = match grid.boundary {
            Boundary::Absorbing => (
                (0..m).map(|j| if j == 0 { m } else { j - 1 }).collect(),
                (0..m).map(|j| if j + 1 == m { m } else { j + 1 }).collect(),
            ),
            Boundary::Periodic => (
                (0..m).map(|j| (j + m - 1) % m).collect(),
                (0..m).map(|j| (j + 1) % m).collect(),
            ),
        };
        // Shifting the diagonal variances by s/4 gives ordering-independent
        // error weights, so runs at different s take identical steps.
        let mut weight_offset = vec![0.0; grid.flat_len()];
        let mm = m * m;
        for j in 0..m {
            weight_offset[2 * m + j * m + j] = 0.25 * coeffs.s;
            weight_offset[2 * m + 2 * mm + j * m + j] = 0.25 * coeffs.s;
        }
        CumulantSystem {
            grid,
            coeffs,
            prev,
            next,
            weight_offset,
            scratch: RefCell::new(Scratch::default()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &RhsCoefficients {
        &self.coeffs
    }

    /// Evaluates the derivative without symmetrizing the `cuu`/`cvv` blocks.
    pub fn eval_raw(&self, y: &[f64], dy: &mut [f64]) {
        let m = self.grid.m;
        let mm = m * m;
        assert_eq!(y.len(), self.grid.flat_len());
        assert_eq!(dy.len(), y.len());
        let c = &self.coeffs;
        let (cu, rest) = y.split_at(m);
        let (cv, rest) = rest.split_at(m);
        let (uu, rest) = rest.split_at(mm);
        let (xx, vv) = rest.split_at(mm);

        let (dcu, drest) = dy.split_at_mut(m);
        let (dcv, drest) = drest.split_at_mut(m);
        let (duu, drest) = drest.split_at_mut(mm);
        let (dxx, dvv) = drest.split_at_mut(mm);

        let mut sc = self.scratch.borrow_mut();
        let Scratch { xt, p, qu, qv, r } = &mut *sc;
        xt.resize(mm, 0.0);
        p.resize(m, 0.0);
        qu.resize(m, 0.0);
        qv.resize(m, 0.0);
        r.resize(m, 0.0);
        for j in 0..m {
            for k in 0..m {
                xt[j * m + k] = xx[k * m + j];
            }
        }
        let sm1 = c.s - 1.0;
        for j in 0..m {
            let d = j * m + j;
            let u2 = cu[j] * cu[j] + uu[d];
            let v2 = cv[j] * cv[j] + vv[d];
            p[j] = cu[j] * cv[j] + xx[d];
            qu[j] = u2 + 3.0 * v2 + sm1;
            qv[j] = 3.0 * u2 + v2 + sm1;
            r[j] = u2 - v2;
        }

        let at = |a: &[f64], v: usize| if v == m { 0.0 } else { a[v] };
        for j in 0..m {
            let (jm, jp) = (self.prev[j], self.next[j]);
            let d = j * m + j;
            let amp2 = cu[j] * cu[j] + cv[j] * cv[j];
            let lap_u = at(cu, jm) + at(cu, jp) - 2.0 * cu[j];
            let lap_v = at(cv, jm) + at(cv, jp) - 2.0 * cv[j];
            dcu[j] = -c.gamma * cu[j] + c.delta_omega * cv[j] - c.d2 * lap_v
                + c.chi * (cv[j] * amp2 + cv[j] * (sm1 + uu[d] + 3.0 * vv[d]) + 2.0 * cu[j] * xx[d]);
            dcv[j] = -c.gamma * cv[j] - c.delta_omega * cu[j] + c.d2 * lap_u
                - c.chi * (cu[j] * amp2 + cu[j] * (sm1 + 3.0 * uu[d] + vv[d]) + 2.0 * cv[j] * xx[d]);
        }

        let mat = |a: &[f64], r: usize, col: usize| {
            if r == m || col == m {
                0.0
            } else {
                a[r * m + col]
            }
        };
        let g2 = 2.0 * c.gamma;
        let dw = c.delta_omega;
        let d2 = c.d2;
        let chi = c.chi;
        for j in 0..m {
            let (jm, jp) = (self.prev[j], self.next[j]);
            for k in 0..m {
                let (km, kp) = (self.prev[k], self.next[k]);
                let i = j * m + k;
                let (u, x, t, v) = (uu[i], xx[i], xt[i], vv[i]);

                let lapk_x = mat(xx, j, km) + mat(xx, j, kp) - 2.0 * x;
                let lapj_t = mat(xt, jm, k) + mat(xt, jp, k) - 2.0 * t;
                duu[i] = -g2 * u + dw * (x + t) - d2 * (lapk_x + lapj_t)
                    + chi * (x * qu[k] + t * qu[j] + 2.0 * u * (p[j] + p[k]));

                let lapk_u = mat(uu, j, km) + mat(uu, j, kp) - 2.0 * u;
                let lapj_v = mat(vv, jm, k) + mat(vv, jp, k) - 2.0 * v;
                dxx[i] = -g2 * x + dw * (v - u) + d2 * (lapk_u - lapj_v)
                    + chi * (v * qu[j] - u * qv[k] + 2.0 * x * (p[j] - p[k]));

                let lapj_x = mat(xx, jm, k) + mat(xx, jp, k) - 2.0 * x;
                let lapk_t = mat(xt, j, km) + mat(xt, j, kp) - 2.0 * t;
                dvv[i] = -g2 * v - dw * (x + t) + d2 * (lapj_x + lapk_t)
                    - chi * (x * qv[j] + t * qv[k] + 2.0 * v * (p[j] + p[k]));
            }
        }

        let src = c.thermal_source();
        for j in 0..m {
            let d = j * m + j;
            duu[d] += src + chi * c.s * p[j];
            dvv[d] += src - chi * c.s * p[j];
            dxx[d] -= 0.5 * chi * c.s * r[j];
        }
    }

    /// Full derivative with `cuu`/`cvv` blocks symmetrized.
    pub fn eval(&self, y: &[f64], dy: &mut [f64]) {
        self.eval_raw(y, dy);
        let m = self.grid.m;
        let mm = m * m;
        for off in [2 * m, 2 * m + 2 * mm] {
            let blk = &mut dy[off..off + mm];
            for j in 0..m {
                for k in j + 1..m {
                    let avg = 0.5 * (blk[j * m + k] + blk[k * m + j]);
                    blk[j * m + k] = avg;
                    blk[k * m + j] = avg;
                }
            }
        }
    }

    /// Largest asymmetry of the unsymmetrized `cuu`/`cvv` derivative blocks,
    /// relative to the largest entry of those blocks.
    pub fn raw_asymmetry(&self, y: &[f64]) -> f64 {
        let m = self.grid.m;
        let mm = m * m;
        let mut dy = vec![0.0; y.len()];
        self.eval_raw(y, &mut dy);
        let mut asym = 0.0f64;
        let mut scale = 0.0f64;
        for off in [2 * m, 2 * m + 2 * mm] {
            let blk = &dy[off..off + mm];
            for j in 0..m {
                for k in 0..m {
                    scale = scale.max(blk[j * m + k].abs());
                    asym = asym.max((blk[j * m + k] - blk[k * m + j]).abs());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            asym / scale
        }
    }
}

impl OdeSystem for CumulantSystem {
    fn dim(&self) -> usize {
        self.grid.flat_len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.eval(y, dy);
    }

    fn weight_offset(&self) -> Option<&[f64]> {
        Some(&self.weight_offset)
    }
}

fn check_state(state: &CumulantState, grid: &GridSpec, coeffs: &RhsCoefficients) -> Result<()> {
    if state.m() != grid.m {
        return Err(Error::GridMismatch { expected: grid.m, got: state.m() });
    }
    if state.s != coeffs.s {
        return Err(Error::param(
            "s",
            format!("state ordering {} differs from coefficient ordering {}", state.s, coeffs.s),
        ));
    }
    Ok(())
}

/// Time derivative of every cumulant block.
pub fn rhs(state: &CumulantState, coeffs: &RhsCoefficients, grid: &GridSpec) -> Result<CumulantDerivative> {
    check_state(state, grid, coeffs)?;
    let sys = CumulantSystem::new(*grid, *coeffs);
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    sys.eval(&y, &mut dy);
    CumulantDerivative::from_flat(grid.m, &dy)
}

/// Derivatives of the mean amplitudes `(dcu, dcv)`.
pub fn rhs_first_order(
    state: &CumulantState,
    coeffs: &RhsCoefficients,
    grid: &GridSpec,
) -> Result<(ndarray::Array1<f64>, ndarray::Array1<f64>)> {
    let d = rhs(state, coeffs, grid)?;
    Ok((d.cu, d.cv))
}

/// Derivatives of the covariance blocks `(dcuu, dcuv, dcvv)`.
pub fn rhs_second_order(
    state: &CumulantState,
    coeffs: &RhsCoefficients,
    grid: &GridSpec,
) -> Result<(ndarray::Array2<f64>, ndarray::Array2<f64>, ndarray::Array2<f64>)> {
    let d = rhs(state, coeffs, grid)?;
    Ok((d.cuu, d.cuv, d.cvv))
}

/// Rate of change of total photon number plus its expected loss,
/// `sum_j dI_j/dt + 2 gamma sum_j (I_j - n_th)`. Vanishes for exact dynamics.
pub fn photon_balance_residual(
    state: &CumulantState,
    deriv: &CumulantDerivative,
    coeffs: &RhsCoefficients,
) -> f64 {
    let m = state.m();
    let ordering = 0.5 * (state.s - 1.0);
    let mut rate = 0.0;
    let mut excess = 0.0;
    for j in 0..m {
        rate += 2.0 * state.cu[j] * deriv.cu[j]
            + 2.0 * state.cv[j] * deriv.cv[j]
            + deriv.cuu[[j, j]]
            + deriv.cvv[[j, j]];
        let intensity = state.cu[j].powi(2) + state.cv[j].powi(2) + state.cuu[[j, j]] + state.cvv[[j, j]] + ordering;
        excess += intensity - coeffs.n_th;
    }
    rate + 2.0 * coeffs.gamma * excess
}
