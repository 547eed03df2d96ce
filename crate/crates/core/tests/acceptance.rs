//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! Criterion 3 contains the sub-check `Var(Y1 Y2) >= 1 + 2 rho^2`, which is
//! false (`Var` of the centred product is `1 + rho^2`), so it is expected to
//! stay red; criterion 10 requires a fully green `validate` run and is
//! therefore red with it. Every other outcome must be green.

use std::io::Write;

use crossmoments::validation::{run_check, run_validation, CheckResult, Scale, ValidationConfig};

const KNOWN_RED: [u32; 2] = [3, 10];
const DESK_LIMIT_SECONDS: f64 = 900.0;

fn emit(line: &str) {
    // bypasses the test harness capture so the table shows in plain `cargo test`
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance_criteria() {
    let desk = run_validation(&ValidationConfig::default());
    let mut results: Vec<CheckResult> = desk.checks.iter().filter(|c| c.id <= 6).cloned().collect();
    let full = ValidationConfig { scale: Scale::Full, ..Default::default() };
    results.extend((7..=9).map(|id| run_check(&full, id).unwrap()));

    let desk_ok = desk.passed && desk.seconds < DESK_LIMIT_SECONDS;
    let failing: Vec<String> = desk.checks.iter().filter(|c| !c.passed).map(|c| c.id.to_string()).collect();
    let detail = format!(
        "validate at desk size: {} checks, {:.1} s (limit {DESK_LIMIT_SECONDS} s), exit {}{}",
        desk.checks.len(),
        desk.seconds,
        if desk.passed { 0 } else { 1 },
        if failing.is_empty() { String::new() } else { format!("; failing criteria {}", failing.join(", ")) }
    );
    results.push(CheckResult {
        id: 10,
        group: "validate",
        title: "desk-size validate run",
        passed: desk_ok,
        seconds: desk.seconds,
        subchecks: vec![crossmoments::validation::SubCheck { label: "validate".into(), passed: desk_ok, detail }],
    });

    emit("");
    for r in &results {
        emit(&r.line());
    }

    for r in &results {
        let expected = !KNOWN_RED.contains(&r.id);
        assert_eq!(r.passed, expected, "criterion {} changed status:\n{}", r.id, r.line());
    }
    // criterion 3 is red only through the false bound
    let c3 = results.iter().find(|r| r.id == 3).unwrap();
    let red: Vec<&str> = c3.subchecks.iter().filter(|s| !s.passed).map(|s| s.label.as_str()).collect();
    assert_eq!(red, ["Var >= 1 + 2 rho^2 - 3 SE"]);
    // and criterion 10 only through criterion 3
    assert_eq!(failing, ["3"]);
    assert!(desk.seconds < DESK_LIMIT_SECONDS);
}
