//! Exact master-equation evolution in a truncated Fock space for one or two
//! cells, used to measure the error introduced by Gaussian closure.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::cumulant_state::{Boundary, CumulantState, GridSpec};
use crate::dynamics_rhs::{CumulantSystem, RhsCoefficients};
use crate::error::{Error, Result};
use crate::ode_integrator::{integrate, OdeSystem, StepControl, Tableau};

/// Largest top-level population tolerated before the cutoff is deemed too small.
pub const CUTOFF_POPULATION_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    /// Number of cells, 1 or 2.
    pub modes: usize,
    /// Highest photon number kept per cell.
    pub cutoff: usize,
    pub coeffs: RhsCoefficients,
    pub boundary: Boundary,
}

impl FockConfig {
    pub fn dim(&self) -> usize {
        (self.cutoff + 1).pow(self.modes as u32)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.modes) {
            return Err(Error::param("modes", format!("must be 1 or 2, got {}", self.modes)));
        }
        if self.cutoff < 2 {
            return Err(Error::param("cutoff", "must be at least 2"));
        }
        Ok(())
    }

    /// Grid that reproduces the same hopping pattern for the cumulant solver.
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            m: self.modes,
            dx: 1.0,
            boundary: self.boundary,
        }
    }

    fn neighbours(&self, k: usize) -> Vec<usize> {
        let m = self.modes;
        let mut out = Vec::new();
        match self.boundary {
            Boundary::Absorbing => {
                if k > 0 {
                    out.push(k - 1);
                }
                if k + 1 < m {
                    out.push(k + 1);
                }
            }
            Boundary::Periodic => {
                out.push((k + m - 1) % m);
                out.push((k + 1) % m);
            }
        }
        out
    }
}

/// Sparse operator as `(row, col, value)` triples.
#[derive(Debug, Clone, Default)]
struct SparseOp(Vec<(usize, usize, C64)>);

impl SparseOp {
    fn from_dense(a: &Array2<C64>) -> Self {
        let mut v = Vec::new();
        for ((r, c), x) in a.indexed_iter() {
            if *x != C64::new(0.0, 0.0) {
                v.push((r, c, *x));
            }
        }
        SparseOp(v)
    }
}

struct Operators {
    dim: usize,
    /// Annihilators per cell, dense for setup.
    a: Vec<Array2<C64>>,
}

impl Operators {
    fn new(modes: usize, cutoff: usize) -> Self {
        let c1 = cutoff + 1;
        let dim = c1.pow(modes as u32);
        let mut a = Vec::new();
        for k in 0..modes {
            let mut op = Array2::zeros((dim, dim));
            for idx in 0..dim {
                let n = occupation(idx, k, modes, c1);
                if n > 0 {
                    let stride = c1.pow((modes - 1 - k) as u32);
                    op[[idx - stride, idx]] = C64::new((n as f64).sqrt(), 0.0);
                }
            }
            a.push(op);
        }
        Operators { dim, a }
    }

    fn dag(&self, k: usize) -> Array2<C64> {
        self.a[k].t().mapv(|z| z.conj())
    }
}

/// Photon number of cell `k` in basis state `idx`.
fn occupation(idx: usize, k: usize, modes: usize, c1: usize) -> usize {
    (idx / c1.pow((modes - 1 - k) as u32)) % c1
}

/// Density matrix in the product Fock basis, cell 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub modes: usize,
    pub cutoff: usize,
    pub rho: Array2<C64>,
}

impl DensityMatrix {
    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|z| z.re).sum()
    }

    /// Largest population among states with any cell at the cutoff.
    pub fn top_population(&self) -> f64 {
        let c1 = self.cutoff + 1;
        (0..self.rho.nrows())
            .filter(|&i| (0..self.modes).any(|k| occupation(i, k, self.modes, c1) == self.cutoff))
            .map(|i| self.rho[[i, i]].re)
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.rho.nrows();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let z = 0.5 * (self.rho[[i, j]] + self.rho[[j, i]].conj());
            nalgebra::Complex::new(z.re, z.im)
        });
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn expect(&self, op: &Array2<C64>) -> C64 {
        // Tr(rho O)
        let mut acc = C64::new(0.0, 0.0);
        for ((r, c), o) in op.indexed_iter() {
            if *o != C64::new(0.0, 0.0) {
                acc += o * self.rho[[c, r]];
            }
        }
        acc
    }
}

/// Initial condition: coherent amplitudes on top of a thermal occupation.
#[derive(Debug, Clone, PartialEq)]
pub struct FockInitial {
    pub alpha: Vec<C64>,
    pub n_th: f64,
}

fn single_mode_density(alpha: C64, n_th: f64, cutoff: usize) -> Result<Array2<C64>> {
    let c1 = cutoff + 1;
    if n_th == 0.0 {
        let mut psi = vec![C64::new(0.0, 0.0); c1];
        psi[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 1..c1 {
            psi[n] = psi[n - 1] * alpha / (n as f64).sqrt();
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        return Ok(Array2::from_shape_fn((c1, c1), |(i, j)| psi[i] * psi[j].conj() / norm));
    }
    let q = n_th / (1.0 + n_th);
    let mut rho = Array2::zeros((c1, c1));
    for n in 0..c1 {
        rho[[n, n]] = C64::new((1.0 - q) * q.powi(n as i32), 0.0);
    }
    let tr: f64 = rho.diag().iter().map(|z| z.re).sum();
    rho.mapv_inplace(|z| z / tr);
    if alpha == C64::new(0.0, 0.0) {
        return Ok(rho);
    }
    // D(alpha) rho D(alpha)^+ via d rho / d tau = [G, rho], G = alpha a^+ - alpha* a
    let ops = Operators::new(1, cutoff);
    let g = ops.dag(0).mapv(|z| z * alpha) - ops.a[0].mapv(|z| z * alpha.conj());
    let sys = CommutatorFlow { g: SparseOp::from_dense(&g), dim: c1 };
    let ctl = StepControl { abs_tol: 1e-14, rel_tol: 1e-12, ..Default::default() };
    let y0 = bytemuck::cast_slice::<C64, f64>(rho.as_slice().unwrap()).to_vec();
    let mut out = y0.clone();
    integrate(&sys, &Tableau::dop853(), &ctl, 0.0, &y0, &[1.0], |_, y| {
        out.copy_from_slice(y);
        Ok(())
    })?;
    let data = bytemuck::cast_slice::<f64, C64>(&out).to_vec();
    Ok(Array2::from_shape_vec((c1, c1), data).unwrap())
}

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (na, nb) = (a.nrows(), b.nrows());
    Array2::from_shape_fn((na * nb, na * nb), |(i, j)| a[[i / nb, j / nb]] * b[[i % nb, j % nb]])
}

pub fn initial_density(cfg: &FockConfig, init: &FockInitial) -> Result<DensityMatrix> {
    cfg.validate()?;
    if init.alpha.len() != cfg.modes {
        return Err(Error::GridMismatch { expected: cfg.modes, got: init.alpha.len() });
    }
    if !(init.n_th.is_finite() && init.n_th >= 0.0) {
        return Err(Error::param("n_th", "must be non-negative"));
    }
    let mut rho = single_mode_density(init.alpha[0], init.n_th, cfg.cutoff)?;
    for k in 1..cfg.modes {
        rho = kron(&rho, &single_mode_density(init.alpha[k], init.n_th, cfg.cutoff)?);
    }
    let dm = DensityMatrix { modes: cfg.modes, cutoff: cfg.cutoff, rho };
    check_cutoff(&dm)?;
    Ok(dm)
}

fn check_cutoff(dm: &DensityMatrix) -> Result<()> {
    let top = dm.top_population();
    if top > CUTOFF_POPULATION_LIMIT {
        return Err(Error::CutoffOverflow { cutoff: dm.cutoff, population: top });
    }
    Ok(())
}

/// `d rho / d tau = G rho - rho G` for anti-Hermitian `G`.
struct CommutatorFlow {
    g: SparseOp,
    dim: usize,
}

impl OdeSystem for CommutatorFlow {
    fn dim(&self) -> usize {
        2 * self.dim * self.dim
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.dim;
        let rho: &[C64] = bytemuck::cast_slice(y);
        let out: &mut [C64] = bytemuck::cast_slice_mut(dy);
        out.fill(C64::new(0.0, 0.0));
        for &(r, c, v) in &self.g.0 {
            for j in 0..n {
                out[r * n + j] += v * rho[c * n + j];
            }
        }
        for &(r, c, v) in &self.g.0 {
            // (rho G)_{j c} += rho_{j r} G_{r c}
            for j in 0..n {
                out[j * n + c] -= rho[j * n + r] * v;
            }
        }
    }
}

/// Lindblad generator written as `K rho + (K rho)^+ + jumps`.
pub struct LindbladSystem {
    dim: usize,
    k_eff: SparseOp,
    jumps: Vec<(f64, SparseOp)>,
}

impl LindbladSystem {
    pub fn new(cfg: &FockConfig) -> Result<Self> {
        cfg.validate()?;
        let ops = Operators::new(cfg.modes, cfg.cutoff);
        let dim = ops.dim;
        let c = &cfg.coeffs;
        let mut h: Array2<C64> = Array2::zeros((dim, dim));
        let mut decay: Array2<C64> = Array2::zeros((dim, dim));
        let mut jumps = Vec::new();
        for k in 0..cfg.modes {
            let a = &ops.a[k];
            let ad = ops.dag(k);
            let n = ad.dot(a);
            let aad = a.dot(&ad);
            h = h + n.mapv(|z| z * (c.delta_omega + 2.0 * c.d2)) + ad.dot(&ad).dot(a).dot(a).mapv(|z| z * 0.5 * c.chi);
            for l in cfg.neighbours(k) {
                h = h - ad.dot(&ops.a[l]).mapv(|z| z * c.d2);
            }
            decay = decay + aad.mapv(|z| z * c.gamma * c.n_th) + n.mapv(|z| z * c.gamma * (c.n_th + 1.0));
            if c.gamma > 0.0 {
                if c.n_th > 0.0 {
                    jumps.push((2.0 * c.gamma * c.n_th, SparseOp::from_dense(&ad)));
                }
                jumps.push((2.0 * c.gamma * (c.n_th + 1.0), SparseOp::from_dense(a)));
            }
        }
        let k_eff = h.mapv(|z| z * C64::new(0.0, -1.0)) - decay;
        Ok(LindbladSystem {
            dim,
            k_eff: SparseOp::from_dense(&k_eff),
            jumps,
        })
    }
}

impl OdeSystem for LindbladSystem {
    fn dim(&self) -> usize {
        2 * self.dim * self.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.dim;
        let rho: &[C64] = bytemuck::cast_slice(y);
        let out: &mut [C64] = bytemuck::cast_slice_mut(dy);
        out.fill(C64::new(0.0, 0.0));
        for &(r, c, v) in &self.k_eff.0 {
            for j in 0..n {
                out[r * n + j] += v * rho[c * n + j];
            }
        }
        // add the Hermitian conjugate of K rho
        for i in 0..n {
            for j in i..n {
                let a = out[i * n + j];
                let b = out[j * n + i];
                let s = a + b.conj();
                out[i * n + j] = s;
                out[j * n + i] = s.conj();
            }
        }
        for (rate, l) in &self.jumps {
            for &(r1, c1, v1) in &l.0 {
                for &(r2, c2, v2) in &l.0 {
                    out[r1 * n + r2] += *rate * v1 * v2.conj() * rho[c1 * n + c2];
                }
            }
        }
    }
}

/// Evolves `rho0` and reports the state at each of `times`.
pub fn evolve_density_at(cfg: &FockConfig, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    let sys = LindbladSystem::new(cfg)?;
    let n = sys.dim;
    if rho0.rho.nrows() != n {
        return Err(Error::GridMismatch { expected: n, got: rho0.rho.nrows() });
    }
    let ctl = StepControl { abs_tol: 1e-13, rel_tol: 1e-11, ..Default::default() };
    let y0 = bytemuck::cast_slice::<C64, f64>(rho0.rho.as_standard_layout().as_slice().unwrap()).to_vec();
    let mut out = Vec::with_capacity(times.len());
    integrate(&sys, &Tableau::dop853(), &ctl, 0.0, &y0, times, |_, y| {
        let data = bytemuck::cast_slice::<f64, C64>(y).to_vec();
        let dm = DensityMatrix {
            modes: cfg.modes,
            cutoff: cfg.cutoff,
            rho: Array2::from_shape_vec((n, n), data).unwrap(),
        };
        let tr = dm.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::TraceDrift { trace: tr });
        }
        check_cutoff(&dm)?;
        out.push(dm);
        Ok(())
    })?;
    Ok(out)
}

pub fn evolve_density(cfg: &FockConfig, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    Ok(evolve_density_at(cfg, rho0, &[t])?.pop().unwrap())
}

/// First- and second-order cumulants of `rho` in ordering `s`.
pub fn cumulants_from_density(dm: &DensityMatrix, s: f64) -> Result<CumulantState> {
    crate::cumulant_state::check_ordering(s)?;
    let m = dm.modes;
    let ops = Operators::new(m, dm.cutoff);
    let ad: Vec<Array2<C64>> = (0..m).map(|k| ops.dag(k)).collect();
    let mean: Vec<C64> = (0..m).map(|k| dm.expect(&ops.a[k])).collect();
    let mut st = CumulantState::zeros(m, s);
    for k in 0..m {
        st.cu[k] = mean[k].re;
        st.cv[k] = mean[k].im;
    }
    for k in 0..m {
        for l in 0..m {
            // N = <da_k^+ da_l>, M = <da_k da_l>
            let nkl = dm.expect(&ad[k].dot(&ops.a[l])) - mean[k].conj() * mean[l];
            let mkl = dm.expect(&ops.a[k].dot(&ops.a[l])) - mean[k] * mean[l];
            let diag = if k == l { 0.25 * (1.0 - s) } else { 0.0 };
            st.cuu[[k, l]] = 0.5 * (nkl.re + mkl.re) + diag;
            st.cvv[[k, l]] = 0.5 * (nkl.re - mkl.re) + diag;
            st.cuv[[k, l]] = 0.5 * (nkl.im + mkl.im);
        }
    }
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureGap {
    pub t: f64,
    /// Largest first-order deviation relative to the largest exact amplitude.
    pub first_order: f64,
    /// Largest covariance deviation relative to the largest exact covariance.
    pub second_order: f64,
}

/// Compares Gaussian-closed cumulant evolution with exact evolution.
pub fn closure_gap(cfg: &FockConfig, init: &FockInitial, times: &[f64], s: f64) -> Result<Vec<ClosureGap>> {
    let rho0 = initial_density(cfg, init)?;
    let exact = evolve_density_at(cfg, &rho0, times)?;
    let c0 = cumulants_from_density(&rho0, s)?;
    let mut coeffs = cfg.coeffs;
    coeffs.s = s;
    let sys = CumulantSystem::new(cfg.grid(), coeffs);
    let ctl = StepControl { abs_tol: 1e-13, rel_tol: 1e-11, ..Default::default() };
    let mut approx = Vec::with_capacity(times.len());
    integrate(&sys, &Tableau::dop853(), &ctl, 0.0, &c0.to_flat(), times, |t, y| {
        approx.push(CumulantState::from_flat(cfg.modes, s, t, y)?);
        Ok(())
    })?;
    let mut out = Vec::with_capacity(times.len());
    for ((t, rho), ap) in times.iter().zip(&exact).zip(&approx) {
        let ex = cumulants_from_density(rho, s)?;
        out.push(ClosureGap {
            t: *t,
            first_order: relative_gap(
                ex.cu.iter().chain(ex.cv.iter()),
                ap.cu.iter().chain(ap.cv.iter()),
            ),
            second_order: relative_gap(
                ex.cuu.iter().chain(ex.cuv.iter()).chain(ex.cvv.iter()),
                ap.cuu.iter().chain(ap.cuv.iter()).chain(ap.cvv.iter()),
            ),
        });
    }
    Ok(out)
}

fn relative_gap<'a>(exact: impl Iterator<Item = &'a f64> + Clone, approx: impl Iterator<Item = &'a f64>) -> f64 {
    let scale = exact.clone().map(|v| v.abs()).fold(0.0, f64::max);
    let diff = exact.zip(approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
