//! Minimal runner for the acceptance criteria: one `[PASS]` or `[FAIL]` line
//! per criterion, nonzero exit when any fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

#[derive(Debug, Default)]
pub struct Suite {
    results: Vec<(String, bool)>,
}

/// What a criterion reports: a one-line summary, or why it failed.
pub type Verdict = Result<String, String>;

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `f`, printing its verdict and wall time. Panics count as failures.
    pub fn criterion(&mut self, name: &str, f: impl FnOnce() -> Verdict) {
        let started = Instant::now();
        let verdict = match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(payload) => Err(panic_message(payload.as_ref())),
        };
        let elapsed = format_duration(started.elapsed());
        let passed = verdict.is_ok();
        match verdict {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed})"),
            Err(detail) => println!("[FAIL] {name}: {detail} ({elapsed})"),
        }
        self.results.push((name.to_owned(), passed));
    }

    pub fn failed(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect()
    }

    pub fn finish(self) -> ExitCode {
        let failed = self.failed();
        println!("{} of {} criteria passed", self.results.len() - failed.len(), self.results.len());
        if failed.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_owned()
    }
}

pub fn format_duration(d: Duration) -> String {
    if d < Duration::from_millis(1) {
        format!("{} µs", d.as_micros())
    } else if d < Duration::from_secs(1) {
        format!("{:.1} ms", d.as_secs_f64() * 1e3)
    } else {
        format!("{:.2} s", d.as_secs_f64())
    }
}

/// Fails with `message` unless `cond` holds.
pub fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}
