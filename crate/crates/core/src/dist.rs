//! Reinforcement distributions on `[0, beta]`.
//!
//! A [`Dist`] is built from a [`ReinforcementSpec`] and exposes the quantile
//! function used for inverse-transform sampling, exact moments, and the
//! expectation `E[R / (R + d)]` that drives the analytic compensator.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Tolerance on the total mass of a finite discrete law.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Nodes of the composite Gauss-Legendre rule used for `uniform_interval`:
/// 32 equal panels of 8 nodes each.
pub const QUADRATURE_NODES: usize = 256;
const QUADRATURE_PANELS: usize = 32;

// 8-point Gauss-Legendre abscissae / weights on [-1, 1] (positive half).
const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("support point {value} lies outside [0, {beta}]")]
    SupportOutOfRange { value: f64, beta: f64 },
    #[error("mean {mean} of two_point law exceeds beta {beta}")]
    MeanAboveBeta { mean: f64, beta: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("negative or non-finite probability {0}")]
    InvalidProbability(f64),
    #[error("values and probs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("finite_discrete law needs at least one support point")]
    EmptySupport,
    #[error("interval [{lo}, {hi}] is empty")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("quantile level {0} outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("offset d must be positive, got {0}")]
    NonPositiveOffset(f64),
    #[error("unknown distribution kind `{0}`")]
    UnknownKind(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("cannot parse `{key}={value}`")]
    BadValue { key: String, value: String },
    #[error("unknown coupling mode `{0}`")]
    UnknownCouplingMode(String),
}

/// Parameterisation of a reinforcement law.
#[derive(Debug, Clone, PartialEq)]
pub enum ReinforcementSpec {
    /// Degenerate law at `value`.
    PointMass { value: f64, beta: f64 },
    /// Law of `beta * zeta` with `zeta ~ Bernoulli(mean / beta)`.
    TwoPoint { beta: f64, mean: f64 },
    FiniteDiscrete {
        values: Vec<f64>,
        probs: Vec<f64>,
        beta: f64,
    },
    UniformInterval { lo: f64, hi: f64, beta: f64 },
}

impl ReinforcementSpec {
    pub fn point_mass(value: f64, beta: f64) -> Self {
        Self::PointMass { value, beta }
    }

    pub fn two_point(beta: f64, mean: f64) -> Self {
        Self::TwoPoint { beta, mean }
    }

    pub fn finite_discrete(values: Vec<f64>, probs: Vec<f64>, beta: f64) -> Self {
        Self::FiniteDiscrete {
            values,
            probs,
            beta,
        }
    }

    pub fn uniform_interval(lo: f64, hi: f64, beta: f64) -> Self {
        Self::UniformInterval { lo, hi, beta }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::PointMass { .. } => "point_mass",
            Self::TwoPoint { .. } => "two_point",
            Self::FiniteDiscrete { .. } => "finite_discrete",
            Self::UniformInterval { .. } => "uniform_interval",
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Self::PointMass { beta, .. }
            | Self::TwoPoint { beta, .. }
            | Self::FiniteDiscrete { beta, .. }
            | Self::UniformInterval { beta, .. } => *beta,
        }
    }

    /// Key/value pairs in the canonical text order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("kind", self.kind().to_string())];
        match self {
            Self::PointMass { value, beta } => {
                out.push(("beta", fmt_real(*beta)));
                out.push(("value", fmt_real(*value)));
            }
            Self::TwoPoint { beta, mean } => {
                out.push(("beta", fmt_real(*beta)));
                out.push(("mean", fmt_real(*mean)));
            }
            Self::FiniteDiscrete {
                values,
                probs,
                beta,
            } => {
                out.push(("beta", fmt_real(*beta)));
                out.push(("values", join_reals(values)));
                out.push(("probs", join_reals(probs)));
            }
            Self::UniformInterval { lo, hi, beta } => {
                out.push(("beta", fmt_real(*beta)));
                out.push(("lo", fmt_real(*lo)));
                out.push(("hi", fmt_real(*hi)));
            }
        }
        out
    }

    /// Builds a spec from `key -> value` lookups; `lookup` returns `None` for
    /// absent keys. `keys` lists every key that was supplied so unknown ones
    /// can be rejected. Key names in errors carry `prefix`.
    pub fn from_lookup<'a>(
        prefix: &str,
        keys: impl IntoIterator<Item = &'a str>,
        lookup: impl Fn(&str) -> Option<&'a str>,
    ) -> Result<Self, DistError> {
        let full = |k: &str| format!("{prefix}{k}");
        let get = |k: &str| lookup(k).ok_or_else(|| DistError::MissingKey(full(k)));
        let real = |k: &str| -> Result<f64, DistError> {
            let raw = get(k)?;
            raw.trim().parse::<f64>().map_err(|_| DistError::BadValue {
                key: full(k),
                value: raw.to_string(),
            })
        };
        let reals = |k: &str| -> Result<Vec<f64>, DistError> {
            let raw = get(k)?;
            raw.split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| DistError::BadValue {
                        key: full(k),
                        value: raw.to_string(),
                    })
                })
                .collect()
        };
        let kind = get("kind")?.trim();
        let (spec, allowed): (Self, &[&str]) = match kind {
            "point_mass" => {
                let value = real("value")?;
                let beta = if lookup("beta").is_some() { real("beta")? } else { value };
                (Self::PointMass { value, beta }, &["kind", "beta", "value"])
            }
            "two_point" => (
                Self::TwoPoint {
                    beta: real("beta")?,
                    mean: real("mean")?,
                },
                &["kind", "beta", "mean"],
            ),
            "finite_discrete" => (
                Self::FiniteDiscrete {
                    values: reals("values")?,
                    probs: reals("probs")?,
                    beta: real("beta")?,
                },
                &["kind", "beta", "values", "probs"],
            ),
            "uniform_interval" => {
                let lo = real("lo")?;
                let hi = real("hi")?;
                let beta = if lookup("beta").is_some() { real("beta")? } else { hi };
                (Self::UniformInterval { lo, hi, beta }, &["kind", "beta", "lo", "hi"])
            }
            other => return Err(DistError::UnknownKind(other.to_string())),
        };
        for k in keys {
            if !allowed.contains(&k) {
                return Err(DistError::UnknownKey(full(k)));
            }
        }
        Ok(spec)
    }
}

/// Shortest representation that round-trips through `f64::from_str`.
fn fmt_real(x: f64) -> String {
    format!("{x}")
}

fn join_reals(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(",")
}

/// `kind=two_point beta=4 mean=1`
impl fmt::Display for ReinforcementSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for ReinforcementSpec {
    type Err = DistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for token in s.split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| DistError::BadValue {
                key: token.to_string(),
                value: String::new(),
            })?;
            pairs.push((k, v));
        }
        Self::from_lookup(
            "",
            pairs.iter().map(|(k, _)| *k),
            |key| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v),
        )
    }
}

/// How the pair `(V, W)` feeding the two quantile functions is formed from
/// two independent uniforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    #[default]
    Independent,
    Comonotone,
    Antithetic,
}

impl CouplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Independent => "independent",
            Self::Comonotone => "comonotone",
            Self::Antithetic => "antithetic",
        }
    }
}

impl fmt::Display for CouplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CouplingMode {
    type Err = DistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "independent" => Ok(Self::Independent),
            "comonotone" => Ok(Self::Comonotone),
            "antithetic" => Ok(Self::Antithetic),
            other => Err(DistError::UnknownCouplingMode(other.to_string())),
        }
    }
}

#[inline]
pub fn sample_pair(mode: CouplingMode, u1: f64, u2: f64) -> (f64, f64) {
    match mode {
        CouplingMode::Independent => (u1, u2),
        CouplingMode::Comonotone => (u1, u1),
        CouplingMode::Antithetic => (u1, 1.0 - u1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Point(f64),
    /// Atom at 0 with probability `p0`, atom at `beta` otherwise.
    TwoPoint { p0: f64, mean: f64 },
    /// Sorted distinct atoms with positive mass; `cdf` ends at exactly 1.
    Atoms { values: Vec<f64>, probs: Vec<f64>, cdf: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

/// A validated reinforcement distribution. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    spec: ReinforcementSpec,
    beta: f64,
    law: Law,
    moments: Moments,
}

fn check_support(value: f64, beta: f64) -> Result<(), DistError> {
    if !(value.is_finite() && (0.0..=beta).contains(&value)) {
        return Err(DistError::SupportOutOfRange { value, beta });
    }
    Ok(())
}

impl Dist {
    pub fn new(spec: ReinforcementSpec) -> Result<Self, DistError> {
        let beta = spec.beta();
        if !(beta.is_finite() && beta > 0.0) {
            return Err(DistError::NonPositiveBeta(beta));
        }
        let law = match &spec {
            ReinforcementSpec::PointMass { value, .. } => {
                check_support(*value, beta)?;
                Law::Point(*value)
            }
            ReinforcementSpec::TwoPoint { mean, .. } => {
                if !mean.is_finite() || *mean < 0.0 {
                    return Err(DistError::SupportOutOfRange { value: *mean, beta });
                }
                if *mean > beta {
                    return Err(DistError::MeanAboveBeta { mean: *mean, beta });
                }
                Self::two_point_law(*mean, beta)
            }
            ReinforcementSpec::FiniteDiscrete { values, probs, .. } => {
                Self::discrete_law(values, probs, beta)?
            }
            ReinforcementSpec::UniformInterval { lo, hi, .. } => {
                check_support(*lo, beta)?;
                check_support(*hi, beta)?;
                if lo > hi {
                    return Err(DistError::EmptyInterval { lo: *lo, hi: *hi });
                }
                if lo == hi {
                    Law::Point(*lo)
                } else {
                    Law::Uniform { lo: *lo, hi: *hi }
                }
            }
        };
        let moments = Self::compute_moments(&law, beta);
        Ok(Self {
            spec,
            beta,
            law,
            moments,
        })
    }

    fn two_point_law(mean: f64, beta: f64) -> Law {
        if mean == 0.0 {
            Law::Point(0.0)
        } else if mean == beta {
            Law::Point(beta)
        } else {
            Law::TwoPoint {
                p0: 1.0 - mean / beta,
                mean,
            }
        }
    }

    fn discrete_law(values: &[f64], probs: &[f64], beta: f64) -> Result<Law, DistError> {
        if values.len() != probs.len() {
            return Err(DistError::LengthMismatch(values.len(), probs.len()));
        }
        if values.is_empty() {
            return Err(DistError::EmptySupport);
        }
        for &v in values {
            check_support(v, beta)?;
        }
        for &p in probs {
            if !(p.is_finite() && p >= 0.0) {
                return Err(DistError::InvalidProbability(p));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(DistError::ProbabilitySum(total));
        }
        let mut atoms: Vec<(f64, f64)> = values
            .iter()
            .zip(probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(v, p)| (*v, *p))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        // Canonical forms keep the degenerate and extremal cases on the same
        // arithmetic path as the closed-form bounds.
        if merged.len() == 1 {
            return Ok(Law::Point(merged[0].0));
        }
        if merged.len() == 2 && merged[0].0 == 0.0 && merged[1].0 == beta {
            return Ok(Self::two_point_law(merged[1].1 * beta, beta));
        }
        let values: Vec<f64> = merged.iter().map(|a| a.0).collect();
        let probs: Vec<f64> = merged.iter().map(|a| a.1).collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(Law::Atoms { values, probs, cdf })
    }

    fn compute_moments(law: &Law, beta: f64) -> Moments {
        let (mean, second_moment, variance) = match law {
            Law::Point(v) => (*v, v * v, 0.0),
            Law::TwoPoint { mean, .. } => (*mean, mean * beta, mean * beta - mean * mean),
            Law::Atoms { values, probs, .. } => {
                let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                let second: f64 = values.iter().zip(probs).map(|(v, p)| v * v * p).sum();
                let var: f64 = values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| (v - mean) * (v - mean) * p)
                    .sum();
                (mean, second, var)
            }
            Law::Uniform { lo, hi } => {
                let mean = 0.5 * (lo + hi);
                let var = (hi - lo) * (hi - lo) / 12.0;
                (mean, var + mean * mean, var)
            }
        };
        Moments {
            mean,
            second_moment,
            variance,
        }
    }

    pub fn spec(&self) -> &ReinforcementSpec {
        &self.spec
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn moments(&self) -> Moments {
        self.moments
    }

    pub fn mean(&self) -> f64 {
        self.moments.mean
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.law, Law::Point(_))
    }

    /// Left-continuous generalized inverse `inf { x : F(x) >= u }`.
    pub fn quantile(&self, u: f64) -> Result<f64, DistError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(DistError::LevelOutOfRange(u));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Quantile without the range check; `u` must lie in `[0, 1]`.
    #[inline]
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        match &self.law {
            Law::Point(v) => *v,
            Law::TwoPoint { p0, .. } => {
                if u <= *p0 {
                    0.0
                } else {
                    self.beta
                }
            }
            Law::Atoms { values, cdf, .. } => {
                let idx = cdf.partition_point(|&c| c < u);
                values[idx.min(values.len() - 1)]
            }
            Law::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }

    /// `E[R / (R + d)]` for `d > 0`.
    pub fn expect_fraction(&self, d: f64) -> Result<f64, DistError> {
        if !(d > 0.0) {
            return Err(DistError::NonPositiveOffset(d));
        }
        Ok(self.expect_fraction_unchecked(d))
    }

    /// As [`Dist::expect_fraction`] without validating `d`.
    ///
    /// Discrete kinds are exact finite sums. `uniform_interval` uses the
    /// fixed 256-node composite Gauss-Legendre rule on the quantile domain;
    /// its absolute error is below 1e-10 whenever `d >= (hi - lo) / 32`,
    /// which always holds for urn sizes once `D_0` is at least one panel wide.
    #[inline]
    pub fn expect_fraction_unchecked(&self, d: f64) -> f64 {
        let raw = match &self.law {
            Law::Point(v) => v / (v + d),
            Law::TwoPoint { mean, .. } => mean / (self.beta + d),
            Law::Atoms { values, probs, .. } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| p * (v / (v + d)))
                .sum(),
            Law::Uniform { lo, hi } => {
                let width = hi - lo;
                let h = 1.0 / QUADRATURE_PANELS as f64;
                let mut total = 0.0;
                for panel in 0..QUADRATURE_PANELS {
                    let mid = (panel as f64 + 0.5) * h;
                    let mut acc = 0.0;
                    for (x, w) in GL8_X.iter().zip(GL8_W) {
                        for u in [mid - 0.5 * h * x, mid + 0.5 * h * x] {
                            let r = lo + width * u;
                            acc += w * (r / (r + d));
                        }
                    }
                    total += 0.5 * h * acc;
                }
                total
            }
        };
        raw.clamp(0.0, self.beta / (self.beta + d))
    }
}
