//! Grid description and the truncated cumulant state.
//!
//! The field operator in cell `j` is `a_j = u_j + i v_j`. The state holds the
//! first-order cumulants `cu, cv` and the three covariance blocks
//! `cuu[j][k] = C(u_j, u_k)`, `cuv[j][k] = C(u_j, v_k)`, `cvv[j][k] = C(v_j, v_k)`,
//! all taken with respect to the s-parametrized quasi-distribution.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Field vanishes outside the grid.
    Absorbing,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Absorbing => "absorbing",
            Boundary::Periodic => "periodic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    /// Cell width in units of the soliton width.
    pub dx: f64,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(m: usize, dx: f64, boundary: Boundary) -> Result<Self> {
        if m < 3 {
            return Err(Error::param("m", format!("need at least 3 cells, got {m}")));
        }
        Self::oracle(m, dx, boundary)
    }

    /// Grid with one or more cells, used for comparisons against exact
    /// few-mode evolution where the 3-cell minimum does not apply.
    pub fn oracle(m: usize, dx: f64, boundary: Boundary) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m", "grid must have at least one cell"));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::param("dx", format!("must be positive, got {dx}")));
        }
        Ok(GridSpec { m, dx, boundary })
    }

    /// Position of cell `j`; the cell at `m / 2` sits at the origin.
    pub fn x(&self, j: usize) -> f64 {
        self.dx * (j as f64 - (self.m / 2) as f64)
    }

    pub fn positions(&self) -> Array1<f64> {
        Array1::from_iter((0..self.m).map(|j| self.x(j)))
    }

    pub fn center(&self) -> usize {
        self.m / 2
    }

    /// Length of the flattened state vector.
    pub fn flat_len(&self) -> usize {
        2 * self.m + 3 * self.m * self.m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantState {
    pub s: f64,
    pub t: f64,
    pub cu: Array1<f64>,
    pub cv: Array1<f64>,
    pub cuu: Array2<f64>,
    pub cuv: Array2<f64>,
    pub cvv: Array2<f64>,
}

/// Time derivative of a [`CumulantState`], same block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantDerivative {
    pub cu: Array1<f64>,
    pub cv: Array1<f64>,
    pub cuu: Array2<f64>,
    pub cuv: Array2<f64>,
    pub cvv: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Largest |C(j,k) - C(k,j)| over the `cuu` and `cvv` blocks.
    pub max_asymmetry: f64,
    pub non_finite: usize,
    /// Per-cell margin `sqrt((B + s/4)(b + s/4)) - 1/4`; NaN where undefined.
    pub heisenberg_margin: Vec<f64>,
    /// Cells where `B + s/4` or `b + s/4` is not positive.
    pub unphysical_cells: Vec<usize>,
}

impl ValidationReport {
    pub fn min_margin(&self) -> f64 {
        let mut out = f64::INFINITY;
        for &v in &self.heisenberg_margin {
            if v.is_nan() {
                return f64::NAN;
            }
            out = out.min(v);
        }
        out
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.non_finite == 0
            && self.unphysical_cells.is_empty()
            && self.max_asymmetry <= tol
            && self.min_margin() >= -tol
    }
}

impl CumulantState {
    pub fn zeros(m: usize, s: f64) -> Self {
        CumulantState {
            s,
            t: 0.0,
            cu: Array1::zeros(m),
            cv: Array1::zeros(m),
            cuu: Array2::zeros((m, m)),
            cuv: Array2::zeros((m, m)),
            cvv: Array2::zeros((m, m)),
        }
    }

    pub fn m(&self) -> usize {
        self.cu.len()
    }

    /// Uncorrelated thermal background with mean occupation `n_th` per cell.
    pub fn thermal_state(grid: &GridSpec, n_th: f64, s: f64) -> Result<Self> {
        check_ordering(s)?;
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::param("n_th", format!("must be non-negative, got {n_th}")));
        }
        let mut st = Self::zeros(grid.m, s);
        let var = 0.5 * (n_th + 0.5 * (1.0 - s));
        for j in 0..grid.m {
            st.cuu[[j, j]] = var;
            st.cvv[[j, j]] = var;
        }
        Ok(st)
    }

    /// Coherent amplitudes `alpha_j` on top of a thermal background.
    pub fn displaced_thermal(grid: &GridSpec, alpha: &[C64], n_th: f64, s: f64) -> Result<Self> {
        if alpha.len() != grid.m {
            return Err(Error::GridMismatch { expected: grid.m, got: alpha.len() });
        }
        let mut st = Self::thermal_state(grid, n_th, s)?;
        for (j, a) in alpha.iter().enumerate() {
            st.cu[j] = a.re;
            st.cv[j] = a.im;
        }
        Ok(st)
    }

    /// Fundamental soliton `sqrt(n0) sech(x_j)` in a thermal background.
    pub fn fundamental_soliton(grid: &GridSpec, n0: f64, n_th: f64, s: f64) -> Result<Self> {
        if !(n0.is_finite() && n0 > 0.0) {
            return Err(Error::param("n0", format!("must be positive, got {n0}")));
        }
        let amp = n0.sqrt();
        let alpha: Vec<C64> = (0..grid.m)
            .map(|j| C64::new(amp / grid.x(j).cosh(), 0.0))
            .collect();
        Self::displaced_thermal(grid, &alpha, n_th, s)
    }

    /// Same physical state expressed in a different operator ordering.
    pub fn reorder_s(&self, s_new: f64) -> Result<Self> {
        check_ordering(s_new)?;
        let mut out = self.clone();
        let shift = -0.25 * (s_new - self.s);
        for j in 0..self.m() {
            out.cuu[[j, j]] += shift;
            out.cvv[[j, j]] += shift;
        }
        out.s = s_new;
        Ok(out)
    }

    pub fn validate(&self) -> ValidationReport {
        let m = self.m();
        let mut max_asymmetry = 0.0f64;
        for j in 0..m {
            for k in j + 1..m {
                max_asymmetry = max_asymmetry
                    .max((self.cuu[[j, k]] - self.cuu[[k, j]]).abs())
                    .max((self.cvv[[j, k]] - self.cvv[[k, j]]).abs());
            }
        }
        let non_finite = self
            .cu
            .iter()
            .chain(self.cv.iter())
            .chain(self.cuu.iter())
            .chain(self.cuv.iter())
            .chain(self.cvv.iter())
            .filter(|v| !v.is_finite())
            .count();
        let mut heisenberg_margin = Vec::with_capacity(m);
        let mut unphysical_cells = Vec::new();
        for j in 0..m {
            let e = observables::uncertainty_ellipse(self, j);
            let big = e.major + 0.25 * self.s;
            let small = e.minor + 0.25 * self.s;
            if !(big > 0.0 && small > 0.0) {
                unphysical_cells.push(j);
                heisenberg_margin.push(f64::NAN);
            } else {
                heisenberg_margin.push((big * small).sqrt() - 0.25);
            }
        }
        ValidationReport {
            max_asymmetry,
            non_finite,
            heisenberg_margin,
            unphysical_cells,
        }
    }

    /// Flattened layout `[cu | cv | cuu | cuv | cvv]`, matrices row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let m = self.m();
        let mut y = Vec::with_capacity(2 * m + 3 * m * m);
        y.extend(self.cu.iter());
        y.extend(self.cv.iter());
        y.extend(self.cuu.iter());
        y.extend(self.cuv.iter());
        y.extend(self.cvv.iter());
        y
    }

    pub fn from_flat(m: usize, s: f64, t: f64, y: &[f64]) -> Result<Self> {
        let n = 2 * m + 3 * m * m;
        if y.len() != n {
            return Err(Error::GridMismatch { expected: n, got: y.len() });
        }
        let mm = m * m;
        let mat = |off: usize| Array2::from_shape_vec((m, m), y[off..off + mm].to_vec()).unwrap();
        Ok(CumulantState {
            s,
            t,
            cu: Array1::from(y[..m].to_vec()),
            cv: Array1::from(y[m..2 * m].to_vec()),
            cuu: mat(2 * m),
            cuv: mat(2 * m + mm),
            cvv: mat(2 * m + 2 * mm),
        })
    }

    /// Largest absolute difference over all blocks.
    pub fn max_abs_diff(&self, other: &CumulantState) -> f64 {
        let a = self.to_flat();
        let b = other.to_flat();
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

impl CumulantDerivative {
    pub fn from_flat(m: usize, dy: &[f64]) -> Result<Self> {
        let st = CumulantState::from_flat(m, 0.0, 0.0, dy)?;
        Ok(CumulantDerivative {
            cu: st.cu,
            cv: st.cv,
            cuu: st.cuu,
            cuv: st.cuv,
            cvv: st.cvv,
        })
    }
}

pub(crate) fn check_ordering(s: f64) -> Result<()> {
    if !(s.is_finite() && (-1.0..=1.0).contains(&s)) {
        return Err(Error::param("s", format!("ordering parameter must lie in [-1, 1], got {s}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(9, 0.5, Boundary::Absorbing).unwrap()
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(GridSpec::new(2, 0.1, Boundary::Absorbing).is_err());
        assert!(GridSpec::new(5, 0.0, Boundary::Absorbing).is_err());
        assert!(GridSpec::new(5, f64::NAN, Boundary::Periodic).is_err());
        assert!(GridSpec::oracle(1, 0.1, Boundary::Absorbing).is_ok());
    }

    #[test]
    fn center_cell_at_origin() {
        let g = GridSpec::new(200, 0.1, Boundary::Absorbing).unwrap();
        assert_eq!(g.x(100), 0.0);
        assert!((g.x(0) + 10.0).abs() < 1e-12);
        assert!((g.x(199) - 9.9).abs() < 1e-12);
    }

    #[test]
    fn thermal_variances() {
        let st = CumulantState::thermal_state(&grid(), 0.3, 0.0).unwrap();
        assert!((st.cuu[[4, 4]] - 0.5 * (0.3 + 0.25 * 2.0)).abs() < 1e-15);
        assert_eq!(st.cuu[[3, 4]], 0.0);
        let vac = CumulantState::thermal_state(&grid(), 0.0, 1.0).unwrap();
        assert_eq!(vac.cuu[[2, 2]], 0.0);
    }

    #[test]
    fn thermal_margin_is_half_occupation() {
        let st = CumulantState::thermal_state(&grid(), 0.2, 0.4).unwrap();
        let rep = st.validate();
        assert!(rep.is_valid(1e-12));
        for m in &rep.heisenberg_margin {
            assert!((m - 0.1).abs() < 1e-14);
        }
    }

    #[test]
    fn soliton_amplitude() {
        let st = CumulantState::fundamental_soliton(&grid(), 4.0, 0.0, 0.0).unwrap();
        assert_eq!(st.cu[4], 2.0);
        assert!((st.cu[6] - 2.0 / 1.0f64.cosh()).abs() < 1e-15);
        assert!(st.cv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reorder_round_trip() {
        let st = CumulantState::fundamental_soliton(&grid(), 4.0, 1e-3, 0.0).unwrap();
        let back = st.reorder_s(0.85).unwrap().reorder_s(0.0).unwrap();
        assert!(st.max_abs_diff(&back) < 1e-15);
        let r = st.reorder_s(1.0).unwrap();
        assert!((r.cuu[[0, 0]] - 0.5e-3).abs() < 1e-15);
    }

    #[test]
    fn flat_round_trip() {
        let mut st = CumulantState::fundamental_soliton(&grid(), 4.0, 0.1, 0.3).unwrap();
        st.cuv[[1, 2]] = 0.7;
        let y = st.to_flat();
        assert_eq!(y.len(), grid().flat_len());
        let back = CumulantState::from_flat(9, 0.3, 0.0, &y).unwrap();
        assert_eq!(back, st);
        assert!(CumulantState::from_flat(8, 0.3, 0.0, &y).is_err());
    }

    #[test]
    fn validation_flags_problems() {
        let mut st = CumulantState::thermal_state(&grid(), 0.0, 0.0).unwrap();
        st.cuu[[0, 1]] = 1e-3;
        st.cvv[[3, 3]] = -0.1;
        st.cu[5] = f64::NAN;
        let rep = st.validate();
        assert!(rep.max_asymmetry >= 1e-3);
        assert_eq!(rep.non_finite, 1);
        assert_eq!(rep.unphysical_cells, vec![3]);
        assert!(!rep.is_valid(1e-10));
    }
}
