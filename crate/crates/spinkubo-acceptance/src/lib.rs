//! Shared helpers for the acceptance runs.

use std::time::{Duration, Instant};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects checks for one criterion; every check contributes one detail line.
pub struct Criterion {
    id: u32,
    title: &'static str,
    passed: bool,
    details: Vec<String>,
    start: Instant,
}

impl Criterion {
    pub fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            passed: true,
            details: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn check(&mut self, ok: bool, detail: impl Into<String>) -> &mut Self {
        self.passed &= ok;
        self.details.push(format!(
            "{} {}",
            if ok { "ok  " } else { "FAIL" },
            detail.into()
        ));
        self
    }

    /// Any error ends the criterion as failed.
    pub fn fail(&mut self, detail: impl Into<String>) -> &mut Self {
        self.check(false, detail)
    }

    pub fn finish(self) -> Outcome {
        Outcome {
            id: self.id,
            title: self.title,
            passed: self.passed,
            details: self.details,
            elapsed: self.start.elapsed(),
        }
    }
}
