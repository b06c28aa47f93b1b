use std::time::Instant;

use umom::selftest::identity_suite;

#[test]
fn identity_suite_passes() {
    let start = Instant::now();
    let report = identity_suite().unwrap();
    for c in &report.checks {
        println!("{:<52} cases={:<4} max={:.3e} ({})", c.name, c.cases, c.max_residual, c.worst_case);
    }
    println!("elapsed {:?}", start.elapsed());
    assert!(report.passed);
}
