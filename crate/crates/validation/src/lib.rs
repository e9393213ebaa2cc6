//! Shared helpers for the acceptance suite in `tests/acceptance.rs`.

use std::io::Write;

/// Worker threads for the suite's parallel runs.
pub fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Prints the one-line verdict for a criterion. Goes straight to the stdout
/// handle so the line shows up even when the test harness captures output.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id} ({name}): {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}
