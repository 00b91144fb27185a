//! Strategies and property checks shared by the proptest suite and the
//! acceptance harness.

use std::f64::consts::PI;

use bellsim_core::{FockBasisState, ModeLabel, ModeTransform, Polarization, Port, StateVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::oracle::{max_state_diff, oracle_bs_expand, two_port_basis};

fn port() -> impl Strategy<Value = Port> {
    prop::sample::select(Port::ALL.to_vec())
}

fn polarization() -> impl Strategy<Value = Polarization> {
    prop::sample::select(Polarization::ALL.to_vec())
}

fn four_ports() -> impl Strategy<Value = Vec<Port>> {
    Just(Port::ALL.to_vec()).prop_shuffle()
}

pub fn element() -> impl Strategy<Value = ModeTransform> {
    let angle = 0.0..2.0 * PI;
    prop_oneof![
        (port(), angle.clone()).prop_map(|(p, t)| ModeTransform::polarization_rotator(p, t)),
        (port(), angle.clone()).prop_map(|(p, t)| ModeTransform::phase_shift(p, t)),
        (four_ports(), angle.clone())
            .prop_map(|(p, t)| ModeTransform::beam_splitter((p[0], p[1]), (p[0], p[1]), t).unwrap()),
        (four_ports(), angle)
            .prop_map(|(p, t)| ModeTransform::beam_splitter((p[0], p[1]), (p[2], p[3]), t).unwrap()),
    ]
}

pub fn transform() -> impl Strategy<Value = ModeTransform> {
    prop::collection::vec(element(), 1..6).prop_map(|chain| {
        chain
            .iter()
            .fold(ModeTransform::identity(), |acc, e| ModeTransform::compose(&acc, e).unwrap())
    })
}

fn basis_state(max_photons: u32) -> impl Strategy<Value = FockBasisState> {
    prop::collection::vec(0..ModeLabel::all().len(), 0..=max_photons as usize).prop_map(|picks| {
        let mut occ = [0u32; 8];
        for k in picks {
            occ[k] += 1;
        }
        FockBasisState::from_occupations(occ)
    })
}

/// Normalized superposition of up to five basis states with at most four
/// photons each.
pub fn state() -> impl Strategy<Value = StateVector> {
    prop::collection::vec((basis_state(4), -1.0..1.0f64, -1.0..1.0f64), 1..5)
        .prop_map(|terms| {
            StateVector::from_terms(terms.into_iter().map(|(b, re, im)| (b, Complex64::new(re, im))))
        })
        .prop_filter("non-degenerate", |s| s.norm() > 1e-3)
        .prop_map(|s| s.normalize().unwrap())
}

pub fn check_unitarity(t: &ModeTransform) -> Result<(), TestCaseError> {
    let dev = t.unitarity_deviation();
    prop_assert!(dev < 1e-9, "deviation {dev}");
    Ok(())
}

/// Every photon-number sector keeps its weight.
pub fn check_conservation(t: &ModeTransform, psi: &StateVector) -> Result<(), TestCaseError> {
    let out = t.apply(psi).unwrap();
    prop_assert!(out.photon_numbers().is_subset(&psi.photon_numbers()));
    for n in psi.photon_numbers() {
        let before = psi.photon_sector(n).norm_sqr();
        let after = out.photon_sector(n).norm_sqr();
        prop_assert!((before - after).abs() < 1e-10, "sector {n}: {before} -> {after}");
    }
    Ok(())
}

/// Two identically polarized photons split with probability `cos² 2t`, and
/// never at `t = π/4`.
pub fn check_hom(pol: Polarization, angle: f64) -> Result<(), TestCaseError> {
    let bs = ModeTransform::beam_splitter((Port::A, Port::B), (Port::C, Port::D), angle).unwrap();
    let input = StateVector::basis(FockBasisState::from_modes([
        (ModeLabel::new(Port::A, pol), 1),
        (ModeLabel::new(Port::B, pol), 1),
    ]));
    let split = FockBasisState::from_modes([(ModeLabel::new(Port::C, pol), 1), (ModeLabel::new(Port::D, pol), 1)]);
    let p = bs.apply(&input).unwrap().amplitude(&split).norm_sqr();
    prop_assert!((p - (2.0 * angle).cos().powi(2)).abs() < 1e-12);
    let balanced = ModeTransform::secondary_beam_splitter().apply(&input).unwrap();
    prop_assert!(balanced.amplitude(&split).norm() < 1e-12);
    Ok(())
}

pub fn check_composition(
    first: &ModeTransform,
    second: &ModeTransform,
    psi: &StateVector,
) -> Result<(), TestCaseError> {
    let composed = ModeTransform::compose(first, second).unwrap().apply(psi).unwrap();
    let stepwise = second.apply(&first.apply(psi).unwrap()).unwrap();
    let diff = max_state_diff(&composed, &stepwise);
    prop_assert!(diff < 1e-10, "diff {diff}");
    Ok(())
}

/// Largest deviation between the library beam splitter and the oracle over
/// all two-port inputs with at most four photons.
pub fn oracle_equivalence_residual() -> (usize, f64) {
    let bs = ModeTransform::secondary_beam_splitter();
    let basis = two_port_basis();
    let worst = basis
        .iter()
        .map(|b| {
            let input = StateVector::basis(*b);
            max_state_diff(&bs.apply(&input).unwrap(), &oracle_bs_expand(b).unwrap())
        })
        .fold(0.0, f64::max);
    (basis.len(), worst)
}

pub fn hom_angle() -> impl Strategy<Value = (Polarization, f64)> {
    (polarization(), 0.0..PI)
}
