//! Statistical verifiers for the limit theorems and rate lemmas.
//!
//! Each verifier is a pure function of ensemble data and returns a
//! [`TestReport`]: one or more checks of the form `statistic <= threshold`.

mod identity;
mod ks;
mod verifiers;

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::dist::Dist;

pub use identity::identity_fuzz;
pub use ks::{kolmogorov_cdf, kolmogorov_quantile, ks_statistic, normal_cdf};
pub use verifiers::{
    atom_scan, clt_statistics, clt_test, dn_growth_check, dominance_test, normality_report,
    rate_check, series_diagnostics, tail_sum_check, CltInput,
};

/// Two means count as equal within this absolute tolerance.
pub const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("empty sample")]
    EmptySample,
    #[error("reinforcement means differ: m_mu = {m_mu}, m_nu = {m_nu}")]
    MeanMismatch { m_mu: f64, m_nu: f64 },
    #[error("common mean must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("only {retained} paths retained, need at least {required}")]
    TooFewPaths { retained: usize, required: usize },
    #[error("{got} samples, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("tail too short: N / n = {n_final} / {n} < 100")]
    TailTooShort { n: u64, n_final: u64 },
    #[error("checkpoint {0} not recorded")]
    MissingCheckpoint(u64),
    #[error("need at least 3 checkpoints, got {0}")]
    TooFewCheckpoints(usize),
}

/// Theoretical limits for an equal-means pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryTargets {
    pub m: f64,
    /// `E R_X^2`
    pub second_mu: f64,
    /// `E R_Y^2`
    pub second_nu: f64,
    pub h_x: f64,
    pub h_y: f64,
    /// `E R_X^2 / (E R_X)^2`, the variance factor when both laws are `mu`.
    pub crimaldi_h: f64,
}

impl TheoryTargets {
    pub fn new(mu: &Dist, nu: &Dist) -> Result<Self, AnalyticsError> {
        let (m_mu, m_nu) = (mu.mean(), nu.mean());
        if (m_mu - m_nu).abs() > MEAN_TOLERANCE {
            return Err(AnalyticsError::MeanMismatch { m_mu, m_nu });
        }
        if !(m_mu > 0.0) {
            return Err(AnalyticsError::NonPositiveMean(m_mu));
        }
        let m = m_mu;
        let second_mu = mu.moments().second_moment;
        let second_nu = nu.moments().second_moment;
        Ok(Self {
            m,
            second_mu,
            second_nu,
            h_x: second_mu / (m * m),
            h_y: second_nu / (m * m),
            crimaldi_h: second_mu / (m * m),
        })
    }

    /// CLT variance factor `m^-2 (z E R_Y^2 + (1 - z) E R_X^2)` at limit
    /// proportion `z`.
    pub fn h(&self, z: f64) -> f64 {
        (z * self.second_nu + (1.0 - z) * self.second_mu) / (self.m * self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
        }
    }

    pub fn pass(&self) -> bool {
        self.statistic <= self.threshold
    }

    /// `test=<name> stat=<v> threshold=<t> pass=<0|1>`
    pub fn machine_line(&self) -> String {
        format!(
            "test={} stat={} threshold={} pass={}",
            self.name,
            self.statistic,
            self.threshold,
            u8::from(self.pass())
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub sample_size: usize,
    /// Named diagnostic values that are reported but not thresholded.
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, sample_size: usize) -> Self {
        Self {
            name: name.into(),
            checks: Vec::new(),
            sample_size,
            metrics: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(mut self, name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        self.checks.push(Check::new(name, statistic, threshold));
        self
    }

    pub fn metric(mut self, name: impl Into<String>, value: f64) -> Self {
        self.metrics.push((name.into(), value));
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn metric_value(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn machine_lines(&self) -> Vec<String> {
        self.checks.iter().map(Check::machine_line).collect()
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "[{}] {verdict} (sample size {})", self.name, self.sample_size);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  {:<32} {:>14.6e} <= {:<12.6e} {}",
                c.name,
                c.statistic,
                c.threshold,
                if c.pass() { "ok" } else { "FAILED" }
            );
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "  {k:<32} {v:>14.6e}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        for line in self.machine_lines() {
            let _ = writeln!(s, "{line}");
        }
        f.write_str(s.trim_end())
    }
}
