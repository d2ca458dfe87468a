//! Pass/fail bookkeeping for the acceptance run.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of one criterion: whether it held and a one-line detail.
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Prints an extra line that does not affect any verdict.
pub fn note(text: &str) {
    println!("       note: {text}");
}

#[derive(Default)]
pub struct Report {
    lines: Vec<(usize, String, bool)>,
}

impl Report {
    /// Runs `check`, treating a panic as failure, and prints its line.
    pub fn run(&mut self, id: usize, name: &str, check: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let line = format!(
            "[{}] {id}. {name}: {} ({:.1}s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        self.lines.push((id, line, outcome.pass));
    }

    pub fn failures(&self) -> Vec<usize> {
        self.lines.iter().filter(|(_, _, p)| !p).map(|(id, _, _)| *id).collect()
    }

    /// Summary line; `true` when every criterion passed.
    pub fn finish(&self) -> bool {
        let failed = self.failures();
        println!(
            "acceptance: {} passed, {} failed{}",
            self.lines.len() - failed.len(),
            failed.len(),
            if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
        );
        failed.is_empty()
    }
}
