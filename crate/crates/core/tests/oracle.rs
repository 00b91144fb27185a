mod support;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};

use bellsim_core::{FockBasisState, ModeLabel, StateVector};
use num_complex::Complex64;

use support::oracle::*;

fn m(s: &str) -> ModeLabel {
    s.parse().unwrap()
}

fn state(terms: &[(&[&str], Complex64)]) -> StateVector {
    StateVector::from_terms(terms.iter().map(|(modes, a)| {
        let mut occ = [0u32; 8];
        for s in modes.iter() {
            occ[m(s).index()] += 1;
        }
        (FockBasisState::from_occupations(occ), *a)
    }))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn orthogonal_pair_gives_singlet_plus_phi() {
    let out = oracle_bs_expand(&FockBasisState::from_modes([(m("aH"), 1), (m("bV"), 1)])).unwrap();
    let expected = state(&[
        (&["cH", "dV"], c(0.5, 0.0)),
        (&["cV", "dH"], c(-0.5, 0.0)),
        (&["cH", "cV"], c(0.0, 0.5)),
        (&["dH", "dV"], c(0.0, 0.5)),
    ]);
    assert!(max_state_diff(&out, &expected) < 1e-14);
}

#[test]
fn parallel_pair_bunches() {
    let out = oracle_bs_expand(&FockBasisState::from_modes([(m("aH"), 1), (m("bH"), 1)])).unwrap();
    let expected = state(&[
        (&["cH", "cH"], c(0.0, FRAC_1_SQRT_2)),
        (&["dH", "dH"], c(0.0, FRAC_1_SQRT_2)),
    ]);
    assert!(max_state_diff(&out, &expected) < 1e-14);
}

#[test]
fn two_photons_in_one_arm() {
    let out = oracle_bs_expand(&FockBasisState::from_modes([(m("aH"), 2)])).unwrap();
    let expected = state(&[
        (&["cH", "cH"], c(0.5, 0.0)),
        (&["dH", "dH"], c(-0.5, 0.0)),
        (&["cH", "dH"], c(0.0, FRAC_1_SQRT_2)),
    ]);
    assert!(max_state_diff(&out, &expected) < 1e-14);
    assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
}

#[test]
fn rejects_out_of_scope_inputs() {
    assert!(oracle_bs_expand(&FockBasisState::from_modes([(m("aH"), 3), (m("bV"), 2)])).is_err());
    assert!(oracle_bs_expand(&FockBasisState::from_modes([(m("cH"), 1)])).is_err());
}

#[test]
fn expansion_is_normalized_for_all_small_states() {
    for b in two_port_basis() {
        let out = oracle_bs_expand(&b).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12, "{b}");
    }
}

#[test]
fn singlet_law_examples() {
    assert_eq!(oracle_singlet_e(0.3, 0.3), -1.0);
    assert!(oracle_singlet_e(FRAC_PI_4, 0.0).abs() < 1e-15);
    assert!((oracle_singlet_e(FRAC_PI_8, 0.0) + FRAC_1_SQRT_2).abs() < 1e-15);
}

#[test]
fn oracle_singlet_from_one_one_input() {
    let out = oracle_bs_expand(&FockBasisState::from_modes([(m("aH"), 1), (m("bV"), 1)])).unwrap();
    for k in 0..16 {
        let (alpha, beta) = (k as f64 * PI / 16.0, 0.2 * k as f64);
        let p = oracle_coincidences(&out, alpha, beta);
        assert!((p.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        assert!((oracle_correlation(&p) - oracle_singlet_e(alpha, beta)).abs() < 1e-12);
    }
}
