mod support;

use std::f64::consts::{PI, SQRT_2};

use bellsim_core::chsh::{bell_angle_s, chsh_s};
use bellsim_core::config::{BellQuad, Mode};
use bellsim_core::measurement::{AnalyzerSetting, DetectorModel};
use bellsim_core::protocol::{run_chsh_with, sweep_correlation, ProtocolTables, RunPlan};
use bellsim_core::source::SourceSpec;
use bellsim_core::{fit_visibility, ideal_correlation};
use proptest::prelude::*;

use support::oracle::oracle_rates;

fn exact_e(mu_a: f64, mu_b: f64, setting: AnalyzerSetting, detector: &DetectorModel) -> f64 {
    let spec = SourceSpec::new(mu_a, mu_b).unwrap();
    ProtocolTables::run(&spec, &setting, detector, &RunPlan::exact(), 0, 0)
        .unwrap()
        .correlation()
        .unwrap()
        .0
        .e_value
}

#[test]
fn subtracted_correlation_does_not_depend_on_mu() {
    let setting = AnalyzerSetting::new(0.4, 1.3);
    let reference = exact_e(0.05, 0.05, setting, &DetectorModel::default());
    for (mu_a, mu_b) in [(0.01, 0.01), (0.1, 0.1), (0.02, 0.08), (0.1, 0.03)] {
        let e = exact_e(mu_a, mu_b, setting, &DetectorModel::default());
        assert!((e - reference).abs() < 1e-6, "mu = ({mu_a}, {mu_b}): {e} vs {reference}");
    }
}

#[test]
fn visibility_scales_correlations_linearly() {
    let thetas: Vec<f64> = (0..16).map(|k| k as f64 * PI / 16.0).collect();
    let spec = SourceSpec::new(0.05, 0.05).unwrap();
    let ideal = sweep_correlation(&spec, &DetectorModel::default(), &thetas, &RunPlan::exact(), 1).unwrap();
    let noisy =
        sweep_correlation(&spec, &DetectorModel::default().with_visibility(0.7), &thetas, &RunPlan::exact(), 1)
            .unwrap();
    for (a, b) in ideal.iter().zip(&noisy) {
        assert!((b.e_mean - 0.7 * a.e_mean).abs() < 1e-9);
    }
}

#[test]
fn raw_tables_agree_with_oracle() {
    let spec = SourceSpec::new(0.05, 0.08).unwrap();
    for k in 0..8 {
        let setting = AnalyzerSetting::new(k as f64 * 0.4, 0.3);
        let tables = ProtocolTables::run(&spec, &setting, &DetectorModel::default(), &RunPlan::exact(), 0, 0).unwrap();
        let oracle = oracle_rates(0.05, 0.08, setting.alpha, setting.beta);
        let rates = tables.full.rates();
        for i in 0..4 {
            assert!((rates[i] - oracle[i]).abs() < 1e-12, "{rates:?} vs {oracle:?}");
        }
    }
}

#[test]
fn bell_angle_form_matches_full_quad() {
    let spec = SourceSpec::new(0.05, 0.05).unwrap();
    let report =
        run_chsh_with(&spec, &DetectorModel::default(), &BellQuad::BELL_TEST, &RunPlan::exact(), 1).unwrap();
    let theta = PI / 8.0;
    let corr = |d: f64| {
        ProtocolTables::run(&spec, &AnalyzerSetting::new(d, 0.0), &DetectorModel::default(), &RunPlan::exact(), 0, 0)
            .unwrap()
            .correlation()
            .unwrap()
            .0
    };
    let short = bell_angle_s(&corr(theta), &corr(3.0 * theta));
    assert!((short.s_value - report.result.s_value).abs() < 1e-12);
}

#[test]
fn exact_sweep_over_half_period() {
    let spec = SourceSpec::new(0.05, 0.05).unwrap();
    let thetas: Vec<f64> = (0..17).map(|k| k as f64 * PI / 16.0).collect();
    let points = sweep_correlation(&spec, &DetectorModel::default(), &thetas, &RunPlan::exact(), 10).unwrap();
    assert!(points.iter().all(|p| (p.e_mean - ideal_correlation(p.theta)).abs() < 1e-9));
    assert!((fit_visibility(&points).unwrap().eta - 1.0).abs() < 1e-9);
}

#[test]
fn monte_carlo_sweep_recovers_visibility() {
    let spec = SourceSpec::new(0.05, 0.05).unwrap();
    let detector = DetectorModel::default().with_visibility(0.964);
    let thetas: Vec<f64> = (0..9).map(|k| k as f64 * PI / 8.0).collect();
    let plan = RunPlan {
        mode: Mode::McCoherent,
        trials: 2_000_000,
        seed: 4,
    };
    let points = sweep_correlation(&spec, &detector, &thetas, &plan, 3).unwrap();
    assert!(points.iter().all(|p| p.e_std > 0.0 && p.repetitions == 3));
    let fit = fit_visibility(&points).unwrap();
    assert!((fit.eta - 0.964).abs() < 4.0 * fit.std_error, "{fit:?}");
}

#[test]
fn single_repetition_keeps_propagated_errors() {
    let spec = SourceSpec::new(0.05, 0.05).unwrap();
    let plan = RunPlan {
        mode: Mode::McFock,
        trials: 500_000,
        seed: 1,
    };
    let report = run_chsh_with(&spec, &DetectorModel::default(), &BellQuad::BELL_TEST, &plan, 1).unwrap();
    assert!(report.result.e_errors.iter().all(|e| *e > 0.0));
    let quad: Vec<_> = report.tables[0].iter().map(|t| t.correlation().unwrap().0).collect();
    let direct = chsh_s(&[quad[0].clone(), quad[1].clone(), quad[2].clone(), quad[3].clone()]);
    assert_eq!(direct, report.result);
    assert!((report.result.s_value - 2.0 * SQRT_2).abs() < 5.0 * report.result.s_error);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn never_exceeds_tsirelson(a in 0.0..PI, a2 in 0.0..PI, b in 0.0..PI, b2 in 0.0..PI) {
        let spec = SourceSpec::new(0.05, 0.05).unwrap();
        let quad = BellQuad { alpha: a, alpha_prime: a2, beta: b, beta_prime: b2 };
        let s = run_chsh_with(&spec, &DetectorModel::default(), &quad, &RunPlan::exact(), 1).unwrap().result.s_value;
        prop_assert!(s <= 2.0 * SQRT_2 + 1e-9);
    }

    #[test]
    fn singlet_law_at_random_settings(a in -PI..PI, b in -PI..PI, mu in 0.001..0.1f64) {
        let e = exact_e(mu, mu, AnalyzerSetting::new(a, b), &DetectorModel::default());
        prop_assert!((e - ideal_correlation(a - b)).abs() < 1e-9);
    }
}
