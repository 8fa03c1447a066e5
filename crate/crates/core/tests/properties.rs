use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use soliton_cumulants::cli::output::{load_snapshot, write_snapshot};
use soliton_cumulants::cli::parse_override;
use soliton_cumulants::dynamics_rhs::{photon_balance_residual, rhs};
use soliton_cumulants::observables::{self, frequency_grid, photon_correlation};
use soliton_cumulants::{Boundary, CumulantState, GridSpec, RhsCoefficients};

/// Physical Gaussian state: thermal noise, a random squeeze on each cell and
/// random displacements.
fn gaussian_state(grid: &GridSpec, alpha: &[(f64, f64)], r: &[f64], n_th: f64, s: f64) -> CumulantState {
    let a: Vec<C64> = alpha.iter().map(|&(re, im)| C64::new(re, im)).collect();
    let mut st = CumulantState::displaced_thermal(grid, &a, n_th, 0.0).unwrap();
    for (j, rj) in r.iter().enumerate() {
        let var = st.cuu[[j, j]];
        st.cuu[[j, j]] = var * (2.0 * rj).exp();
        st.cvv[[j, j]] = var * (-2.0 * rj).exp();
    }
    // weak nearest-neighbour correlations keep the matrix positive
    for j in 0..grid.m - 1 {
        let c = 0.01 * (j as f64 + 1.0).sin();
        st.cuv[[j, j + 1]] = c;
        st.cuv[[j + 1, j]] = -c;
    }
    st.reorder_s(s).unwrap()
}

fn state_strategy() -> impl Strategy<Value = (GridSpec, CumulantState, RhsCoefficients)> {
    (3usize..7, prop::bool::ANY).prop_flat_map(|(m, periodic)| {
        let boundary = if periodic { Boundary::Periodic } else { Boundary::Absorbing };
        (
            prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), m),
            prop::collection::vec(-0.5..0.5f64, m),
            0.0..0.5f64,
            -1.0..1.0f64,
            (-2.0..2.0f64, -0.5..0.5f64, 0.0..0.3f64, -1.0..1.0f64),
        )
            .prop_map(move |(alpha, r, n_th, s, (d2, chi, gamma, dw))| {
                let grid = GridSpec::new(m, 0.5, boundary).unwrap();
                let st = gaussian_state(&grid, &alpha, &r, n_th, s);
                let coeffs = RhsCoefficients { d2, chi, gamma, delta_omega: dw, n_th, s };
                (grid, st, coeffs)
            })
    })
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_independent_of_ordering((grid, st, coeffs) in state_strategy(), s2 in -1.0..1.0f64) {
        let d1 = rhs(&st, &coeffs, &grid).unwrap();
        let st2 = st.reorder_s(s2).unwrap();
        let d2 = rhs(&st2, &RhsCoefficients { s: s2, ..coeffs }, &grid).unwrap();
        let scale = 1.0 + max_abs(&d1.cuu).max(max_abs(&d1.cvv)).max(max_abs(&d1.cuv));
        for (a, b) in [(&d1.cuu, &d2.cuu), (&d1.cuv, &d2.cuv), (&d1.cvv, &d2.cvv)] {
            prop_assert!(max_abs(&(a - b)) <= 1e-12 * scale);
        }
        for (a, b) in d1.cu.iter().chain(d1.cv.iter()).zip(d2.cu.iter().chain(d2.cv.iter())) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn derivative_keeps_symmetry((grid, st, coeffs) in state_strategy()) {
        let d = rhs(&st, &coeffs, &grid).unwrap();
        prop_assert!(max_abs(&(&d.cuu - &d.cuu.t())) == 0.0);
        prop_assert!(max_abs(&(&d.cvv - &d.cvv.t())) == 0.0);
    }

    #[test]
    fn photons_lost_only_to_reservoir((grid, st, coeffs) in state_strategy()) {
        let d = rhs(&st, &coeffs, &grid).unwrap();
        let total: f64 = observables::intensity(&st).sum() + grid.m as f64;
        prop_assert!(photon_balance_residual(&st, &d, &coeffs).abs() <= 1e-10 * total.max(1.0) * (1.0 + coeffs.chi.abs()));
    }

    #[test]
    fn ordering_change_round_trips((_, st, _) in state_strategy(), s2 in -1.0..1.0f64) {
        let back = st.reorder_s(s2).unwrap().reorder_s(st.s).unwrap();
        prop_assert!(back.max_abs_diff(&st) <= 1e-15);
        let i1 = observables::intensity(&st);
        let i2 = observables::intensity(&st.reorder_s(s2).unwrap());
        for (a, b) in i1.iter().zip(&i2) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn physical_states_respect_heisenberg((_, st, _) in state_strategy()) {
        let rep = st.validate();
        prop_assert!(rep.min_margin() >= -1e-12, "margin {}", rep.min_margin());
        for j in 0..st.m() {
            let e = observables::uncertainty_ellipse(&st, j);
            prop_assert!(e.major >= e.minor);
            prop_assert!((e.major + e.minor - st.cuu[[j, j]] - st.cvv[[j, j]]).abs() <= 1e-12);
            prop_assert!(e.phi > -std::f64::consts::FRAC_PI_2 - 1e-15 && e.phi <= std::f64::consts::FRAC_PI_2 + 1e-15);
        }
    }

    #[test]
    fn eta_symmetric_and_bounded((grid, st, _) in state_strategy()) {
        let fg = frequency_grid(&grid);
        let omegas = fg.omegas();
        let c = photon_correlation(&st, &grid, &omegas, fg.delta_omega_min).unwrap();
        for a in 0..omegas.len() {
            for b in 0..omegas.len() {
                if let (Some(x), Some(y)) = (c.eta[[a, b]], c.eta[[b, a]]) {
                    prop_assert!((x - y).abs() <= 1e-12);
                    prop_assert!(x.abs() <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn snapshot_round_trip((grid, st, _) in state_strategy(), t in 0.0..100.0f64) {
        let st = CumulantState { t, ..st };
        let x = grid.positions().to_vec();
        let mut a = Vec::new();
        write_snapshot(&mut a, &st, &x).unwrap();
        let snap = load_snapshot(a.as_slice()).unwrap();
        prop_assert_eq!(&snap.state, &st);
        let mut b = Vec::new();
        write_snapshot(&mut b, &snap.state, &snap.x).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn override_parser_total(text in "\\PC{0,40}") {
        if let Ok((key, _)) = parse_override(&text) {
            prop_assert!(!key.is_empty());
            prop_assert!(text.contains('='));
        }
    }

    #[test]
    fn snapshot_loader_total(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = load_snapshot(bytes.as_slice());
    }
}
