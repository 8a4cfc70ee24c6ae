use ccrflow::suite;

fn assert_all_pass(checks: Vec<suite::Check>) {
    for c in &checks {
        println!("{:<6} {:<34} {:.3e}", c.status(), c.name, c.statistic);
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed && !c.informational).map(|c| c.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

#[test]
fn star_linalg_suite() {
    assert_all_pass(suite::star_linalg(7).unwrap());
}

#[test]
fn pw_calculus_suite() {
    assert_all_pass(suite::pw_calculus(7).unwrap());
}

#[test]
fn scaling_flow_suite() {
    assert_all_pass(suite::scaling_flow(7).unwrap());
}

#[test]
fn ccr_gaussian_suite() {
    assert_all_pass(suite::ccr_gaussian(7).unwrap());
}

#[test]
fn fermion_suite() {
    assert_all_pass(suite::fermion_flow(7).unwrap());
}

