//! Acceptance suite: every criterion runs at its pinned tolerance and
//! prints one pass/fail line. `cargo test --test acceptance -- --nocapture`
//! shows the lines; the `verify` subcommand runs the same checks.

use std::path::Path;

use slowfast::verify::{self, CriterionReport};

fn check(report: CriterionReport) {
    println!("{}", verify::render_line(&report));
    assert!(
        report.passed,
        "criterion {} failed: {}",
        report.id, report.detail
    );
}

#[test]
fn criterion_1_center_manifold_golden() {
    check(verify::criterion_1());
}

#[test]
fn criterion_2_singular_actions() {
    check(verify::criterion_2());
}

#[test]
fn criterion_3_action_eps2_coefficient() {
    check(verify::criterion_3());
}

#[test]
fn criterion_4_prediction_column() {
    check(verify::criterion_4());
}

#[test]
fn criterion_5_monte_carlo_slope() {
    check(verify::criterion_5());
}

#[test]
fn criterion_6_stiffness_demonstration() {
    check(verify::criterion_6());
}

#[test]
fn criterion_7_hamiltonian_conservation() {
    check(verify::criterion_7());
}

#[test]
fn criterion_8_exponential_escape_statistics() {
    check(verify::criterion_8());
}

#[test]
fn criterion_9_worker_determinism() {
    let bin = Path::new(env!("CARGO_BIN_EXE_slowfast"));
    check(verify::criterion_9(Some(bin)));
}
