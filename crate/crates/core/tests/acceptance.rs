//! Acceptance suite. Each test prints one PASS/FAIL line and fails when its
//! criterion does not hold. Run with `--nocapture` to see the lines.

use pdfrelay::acceptance::{self, AcceptanceSizes, CriterionOutcome};

const SEED: u64 = 20_240_601;

fn report(outcome: CriterionOutcome) {
    println!("{outcome}");
    assert!(outcome.pass, "{outcome}");
}

fn sizes() -> AcceptanceSizes {
    AcceptanceSizes::standard()
}

#[test]
fn criterion_1_distance_laws() {
    report(acceptance::criterion_1(SEED, &sizes()).unwrap());
}

#[test]
fn criterion_2_cooperation_probability() {
    report(acceptance::criterion_2(SEED, &sizes()).unwrap());
}

#[test]
fn criterion_3_moment_laplace_consistency() {
    report(acceptance::criterion_3().unwrap());
}

#[test]
fn criterion_4_analytic_vs_simulated_interference() {
    report(acceptance::criterion_4(SEED, &sizes()).unwrap());
}

#[test]
fn criterion_5_model_validity_boundaries() {
    report(acceptance::criterion_5(SEED, &sizes()).unwrap());
}

#[test]
fn criterion_6_optimal_relay_position() {
    report(acceptance::criterion_6(SEED, &sizes()).unwrap());
}

#[test]
fn criterion_7_rate_gain_trends() {
    report(acceptance::criterion_7(SEED, &sizes()).unwrap());
}

#[test]
fn criterion_8_determinism() {
    report(acceptance::criterion_8(SEED).unwrap());
}
