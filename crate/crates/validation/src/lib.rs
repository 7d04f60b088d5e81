//! Acceptance criteria for `swarmsync`. The suite lives in `tests/acceptance.rs`
//! and prints one PASS/FAIL line per criterion.
