//! Acceptance suite: one test per criterion, printing one pass/fail line per
//! check (run with `--nocapture` to see them). The checks and tolerances live
//! in `exitsbm::validate`, which is also what `exitsbm validate` executes.

use exitsbm::validate;

const SEED: u64 = 20240901;

fn report(checks: &[validate::CheckResult]) -> bool {
    let mut all = true;
    for c in checks {
        println!("{}", c.line());
        all &= c.passed;
    }
    all
}

#[test]
fn criterion_1_de_exit_representation_equivalence() {
    let checks = validate::criterion_1_equivalence().expect("criterion 1 runs");
    assert!(report(&checks), "criterion 1 failed");
}

#[test]
fn criterion_2_trivial_symmetry_point() {
    let checks = validate::criterion_2_trivial_point(100_000, SEED).expect("criterion 2 runs");
    assert!(report(&checks), "criterion 2 failed");
}

#[test]
fn criterion_3_asymptotic_error_prediction() {
    let check = validate::criterion_3_error_prediction(
        100_000,
        &[SEED, SEED + 1, SEED + 2, SEED + 3, SEED + 4],
    )
    .expect("criterion 3 runs");
    println!("{}", check.line());
    assert!(check.passed, "criterion 3 failed: {}", check.measured);
}

#[test]
fn criterion_4_tree_oracle_consistency() {
    let check = validate::criterion_4_tree_oracle(100, SEED).expect("criterion 4 runs");
    println!("{}", check.line());
    assert!(check.passed, "criterion 4 failed: {}", check.measured);
}

#[test]
fn criteria_5_and_6_gaussianity_and_change_of_measure() {
    // one shared 1e5-sample tree ensemble feeds both criteria
    let rep = validate::gaussianity_report(100_000, SEED).expect("sampling runs");
    let mut checks = validate::criterion_5_gaussianity(&rep);
    checks.extend(validate::criterion_6_change_of_measure(&rep).expect("criterion 6 runs"));
    assert!(report(&checks), "criterion 5/6 failed");
}

#[test]
fn criterion_7_phase_transition_detection() {
    let checks = validate::criterion_7_phase_transition().expect("criterion 7 runs");
    assert!(report(&checks), "criterion 7 failed");
}

#[test]
fn criterion_8_figure_data_reproduction() {
    let checks = validate::criterion_8_figure_data().expect("criterion 8 runs");
    assert!(report(&checks), "criterion 8 failed");
}

#[test]
fn criterion_9_property_suites() {
    let checks = validate::criterion_9_properties(SEED, false).expect("criterion 9 runs");
    assert!(report(&checks), "criterion 9 failed");
}
