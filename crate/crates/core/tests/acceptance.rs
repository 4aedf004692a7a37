//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria that cannot pass (printed θ of example 1, the example 3 Loewner
//! solution as printed) are computed faithfully and reported, but excluded
//! from the assertion below. Every other criterion must pass.

use riemann_kit::report::{run_suite, to_json, SuiteReport};
use riemann_kit::superpose::Status;
use std::io::Write;
use std::time::Instant;

const SEED: u64 = 20240917;

/// Criteria whose failure is the documented state of the printed formulas.
fn known_failing(id: &str) -> bool {
    id.starts_with("5.printed.rotation") || id.starts_with("3.example3.")
}

/// Written straight to stderr so the lines show without `--nocapture`.
fn say(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn print(rep: &SuiteReport) {
    for c in &rep.criteria {
        say(&c.line());
    }
    for e in &rep.errata {
        say(&format!("ERRATUM [{}] {}: {:.3e}", e.id, e.description, e.value));
    }
}

#[test]
fn acceptance_suite() {
    let t0 = Instant::now();
    let a = run_suite(SEED).expect("suite runs");
    let t1 = t0.elapsed();
    let b = run_suite(SEED).expect("suite runs");
    print(&a);
    let (ja, jb) = (to_json(&a), to_json(&b));
    let same = ja == jb;
    say(&format!("{} [9] determinism: two suite runs give byte-identical JSON ({} bytes)", if same { "PASS" } else { "FAIL" }, ja.len()));
    say(&format!("suite time {:.1} s", t1.as_secs_f64()));

    let unexpected: Vec<_> = a.criteria.iter().filter(|c| c.status != Status::Pass && !known_failing(&c.id)).map(|c| c.line()).collect();
    assert!(unexpected.is_empty(), "failing criteria:\n{}", unexpected.join("\n"));
    // the known failures must still be measured, not skipped
    assert!(a.criteria.iter().any(|c| c.id == "5.printed.rotation" && c.value.is_finite()));
    assert!(same);
}
