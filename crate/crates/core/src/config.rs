//! Experiment configuration: a flat `key=value` text file.
//!
//! ```text
//! x=1
//! y=1
//! mu.kind=two_point
//! mu.beta=2
//! mu.mean=1
//! nu.kind=point_mass
//! nu.value=1
//! coupling_mode=independent
//! N=10000
//! checkpoints=2000
//! num_paths=1000
//! master_seed=7
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys that are not
//! recognised are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::dist::{CouplingMode, Dist, DistError, ReinforcementSpec};
use crate::urn::{UrnError, UrnLaw, UrnState};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("cannot parse `{key}={value}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Urn(#[from] UrnError),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Tolerances and parameters for the verifiers. Every threshold is a
/// config key with the default shown.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    /// `clt.n`: checkpoint for the CLT statistic; defaults to `N / 25`.
    pub clt_n: Option<u64>,
    /// `clt.eps`
    pub clt_eps: f64,
    /// `clt.threshold`
    pub clt_threshold: f64,
    /// `atoms.bins`
    pub atoms_bins: usize,
    /// `atoms.max_mass`
    pub atoms_max_mass: f64,
    /// `atoms.max_dup`
    pub atoms_max_dup: u64,
    /// `dominance.z_star`
    pub dominance_z_star: f64,
    /// `dominance.min_mean`
    pub dominance_min_mean: f64,
    /// `dominance.window`: trailing geometric checkpoints that must be
    /// nondecreasing in mean.
    pub dominance_window: usize,
    /// `rates.n`: defaults to `N`.
    pub rates_n: Option<u64>,
    /// `rates.tolerance`
    pub rates_tolerance: f64,
    /// `tails.n`: defaults to the largest checkpoint with `N / n >= 100`.
    pub tails_n: Option<u64>,
    /// `tails.tolerance`
    pub tails_tolerance: f64,
    /// `series.max_last_gap`
    pub series_max_last_gap: f64,
    /// `couple.paths`: defaults to `min(num_paths, 1000)`.
    pub couple_paths: Option<u64>,
    /// `couple.steps`: defaults to `N`.
    pub couple_steps: Option<u64>,
    /// `identity.steps`
    pub identity_steps: u64,
    /// `identity.tolerance`
    pub identity_tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            clt_n: None,
            clt_eps: 1e-3,
            clt_threshold: 0.03,
            atoms_bins: 50,
            atoms_max_mass: 0.08,
            atoms_max_dup: 3,
            dominance_z_star: 0.5,
            dominance_min_mean: 0.95,
            dominance_window: 5,
            rates_n: None,
            rates_tolerance: 0.1,
            tails_n: None,
            tails_tolerance: 0.1,
            series_max_last_gap: 0.1,
            couple_paths: None,
            couple_steps: None,
            identity_steps: 1_000_000,
            identity_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub x: f64,
    pub y: f64,
    pub mu_spec: ReinforcementSpec,
    pub nu_spec: ReinforcementSpec,
    pub coupling_mode: CouplingMode,
    /// Final step count `N`.
    pub n_steps: u64,
    /// Extra checkpoints on top of the geometric schedule.
    pub checkpoints: Vec<u64>,
    pub num_paths: u64,
    pub master_seed: u64,
    /// `hist_bins`: histogram bins for `Z_n` in the summary.
    pub hist_bins: usize,
    /// `moments`: `(c, alpha)` pairs aggregated as `E (c + D_n)^-alpha`.
    pub moments: Vec<(f64, f64)>,
    pub verify: VerifySettings,
}

const DEFAULT_MOMENTS: [(f64, f64); 3] = [(0.0, 1.0), (1.0, 1.0), (1.0, 2.0)];

impl ExperimentConfig {
    /// A config with default checkpoints, histogram and verifier settings.
    pub fn new(
        x: f64,
        y: f64,
        mu_spec: ReinforcementSpec,
        nu_spec: ReinforcementSpec,
        n_steps: u64,
        num_paths: u64,
        master_seed: u64,
    ) -> Self {
        Self {
            x,
            y,
            mu_spec,
            nu_spec,
            coupling_mode: CouplingMode::Independent,
            n_steps,
            checkpoints: Vec::new(),
            num_paths,
            master_seed,
            hist_bins: 50,
            moments: DEFAULT_MOMENTS.to_vec(),
            verify: VerifySettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        UrnState::new(self.x, self.y)?;
        self.law()?;
        if self.num_paths == 0 {
            return Err(ConfigError::Invalid("num_paths must be at least 1".into()));
        }
        if let Some(&max) = self.checkpoints.iter().max() {
            if max > self.n_steps {
                return Err(ConfigError::Invalid(format!(
                    "checkpoint {max} exceeds N = {}",
                    self.n_steps
                )));
            }
        }
        if self.hist_bins == 0 {
            return Err(ConfigError::Invalid("hist_bins must be positive".into()));
        }
        for &(c, alpha) in &self.moments {
            if !(c >= 0.0 && alpha >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "moment ({c}, {alpha}) needs c >= 0 and alpha >= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn law(&self) -> Result<UrnLaw, DistError> {
        Ok(UrnLaw::new(
            Dist::new(self.mu_spec.clone())?,
            Dist::new(self.nu_spec.clone())?,
            self.coupling_mode,
        ))
    }

    /// Geometric checkpoints `ceil(N / 2^j)` down to 1, merged with the
    /// extra checkpoints; sorted, deduplicated, always ending at `N`.
    pub fn checkpoint_schedule(&self) -> Vec<u64> {
        let mut out = geometric_schedule(self.n_steps);
        out.extend(self.checkpoints.iter().copied().filter(|&c| c <= self.n_steps));
        out.extend(
            [self.clt_checkpoint(), self.rates_checkpoint(), self.tails_checkpoint()]
                .into_iter()
                .filter(|&c| c <= self.n_steps),
        );
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Checkpoint used by the CLT verifier.
    pub fn clt_checkpoint(&self) -> u64 {
        self.verify.clt_n.unwrap_or((self.n_steps / 25).max(1))
    }

    /// Checkpoint used by the moment-rate verifier.
    pub fn rates_checkpoint(&self) -> u64 {
        self.verify.rates_n.unwrap_or(self.n_steps)
    }

    /// Checkpoint used by the tail-sum verifier.
    pub fn tails_checkpoint(&self) -> u64 {
        self.verify.tails_n.unwrap_or_else(|| {
            geometric_schedule(self.n_steps)
                .into_iter()
                .filter(|&c| c > 0 && self.n_steps / c >= 100)
                .max()
                .unwrap_or(1)
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        text.parse()
    }

    /// Canonical `key=value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        line("x", self.x.to_string());
        line("y", self.y.to_string());
        for (k, v) in self.mu_spec.to_pairs() {
            line(&format!("mu.{k}"), v);
        }
        for (k, v) in self.nu_spec.to_pairs() {
            line(&format!("nu.{k}"), v);
        }
        line("coupling_mode", self.coupling_mode.to_string());
        line("N", self.n_steps.to_string());
        if !self.checkpoints.is_empty() {
            line("checkpoints", join(&self.checkpoints));
        }
        line("num_paths", self.num_paths.to_string());
        line("master_seed", self.master_seed.to_string());
        line("hist_bins", self.hist_bins.to_string());
        let moments: Vec<String> = self.moments.iter().map(|(c, a)| format!("{c}:{a}")).collect();
        line("moments", moments.join(","));
        let v = &self.verify;
        if let Some(n) = v.clt_n {
            line("clt.n", n.to_string());
        }
        line("clt.eps", v.clt_eps.to_string());
        line("clt.threshold", v.clt_threshold.to_string());
        line("atoms.bins", v.atoms_bins.to_string());
        line("atoms.max_mass", v.atoms_max_mass.to_string());
        line("atoms.max_dup", v.atoms_max_dup.to_string());
        line("dominance.z_star", v.dominance_z_star.to_string());
        line("dominance.min_mean", v.dominance_min_mean.to_string());
        line("dominance.window", v.dominance_window.to_string());
        if let Some(n) = v.rates_n {
            line("rates.n", n.to_string());
        }
        line("rates.tolerance", v.rates_tolerance.to_string());
        if let Some(n) = v.tails_n {
            line("tails.n", n.to_string());
        }
        line("tails.tolerance", v.tails_tolerance.to_string());
        line("series.max_last_gap", v.series_max_last_gap.to_string());
        if let Some(n) = v.couple_paths {
            line("couple.paths", n.to_string());
        }
        if let Some(n) = v.couple_steps {
            line("couple.steps", n.to_string());
        }
        line("identity.steps", v.identity_steps.to_string());
        line("identity.tolerance", v.identity_tolerance.to_string());
        s
    }
}

pub fn geometric_schedule(n_steps: u64) -> Vec<u64> {
    if n_steps == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut j = 0u32;
    loop {
        let c = n_steps.div_ceil(1u64 << j);
        out.push(c);
        if c == 1 {
            break;
        }
        j += 1;
    }
    out.reverse();
    out
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

struct Entries<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Entries<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.trim().parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: raw.to_string(),
            }),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.parse(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(raw) = self.take(key) else {
            return Ok(None);
        };
        raw.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim().parse::<T>().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: raw.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn dist(&mut self, prefix: &str) -> Result<ReinforcementSpec, ConfigError> {
        let keys: Vec<&'a str> = self
            .map
            .keys()
            .filter_map(|k| k.strip_prefix(prefix))
            .collect();
        let spec = {
            let map = &self.map;
            ReinforcementSpec::from_lookup(prefix, keys.iter().copied(), |k| {
                map.get(format!("{prefix}{k}").as_str()).copied()
            })?
        };
        self.map.retain(|k, _| !k.starts_with(prefix));
        Ok(spec)
    }
}

impl std::str::FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let k = k.trim();
            if map.insert(k, v.trim()).is_some() {
                return Err(ConfigError::DuplicateKey(k.to_string()));
            }
        }
        let mut e = Entries { map };

        let x = e.required("x")?;
        let y = e.required("y")?;
        let mu_spec = e.dist("mu.")?;
        let nu_spec = e.dist("nu.")?;
        let coupling_mode = e.parse("coupling_mode")?.unwrap_or_default();
        let n_steps = e.required("N")?;
        let checkpoints = e.list("checkpoints")?.unwrap_or_default();
        let num_paths = e.required("num_paths")?;
        let master_seed = e.required("master_seed")?;
        let mut cfg = ExperimentConfig::new(x, y, mu_spec, nu_spec, n_steps, num_paths, master_seed);
        cfg.coupling_mode = coupling_mode;
        cfg.checkpoints = checkpoints;
        if let Some(b) = e.parse("hist_bins")? {
            cfg.hist_bins = b;
        }
        if let Some(raw) = e.take("moments") {
            let mut moments = Vec::new();
            for item in raw.split(',').filter(|s| !s.trim().is_empty()) {
                let bad = || ConfigError::BadValue {
                    key: "moments".into(),
                    value: raw.to_string(),
                };
                let (c, a) = item.split_once(':').ok_or_else(bad)?;
                let c: f64 = c.trim().parse().map_err(|_| bad())?;
                let a: f64 = a.trim().parse().map_err(|_| bad())?;
                moments.push((c, a));
            }
            cfg.moments = moments;
        }

        let v = &mut cfg.verify;
        v.clt_n = e.parse("clt.n")?;
        if let Some(x) = e.parse("clt.eps")? {
            v.clt_eps = x;
        }
        if let Some(x) = e.parse("clt.threshold")? {
            v.clt_threshold = x;
        }
        if let Some(x) = e.parse("atoms.bins")? {
            v.atoms_bins = x;
        }
        if let Some(x) = e.parse("atoms.max_mass")? {
            v.atoms_max_mass = x;
        }
        if let Some(x) = e.parse("atoms.max_dup")? {
            v.atoms_max_dup = x;
        }
        if let Some(x) = e.parse("dominance.z_star")? {
            v.dominance_z_star = x;
        }
        if let Some(x) = e.parse("dominance.min_mean")? {
            v.dominance_min_mean = x;
        }
        if let Some(x) = e.parse("dominance.window")? {
            v.dominance_window = x;
        }
        v.rates_n = e.parse("rates.n")?;
        if let Some(x) = e.parse("rates.tolerance")? {
            v.rates_tolerance = x;
        }
        v.tails_n = e.parse("tails.n")?;
        if let Some(x) = e.parse("tails.tolerance")? {
            v.tails_tolerance = x;
        }
        if let Some(x) = e.parse("series.max_last_gap")? {
            v.series_max_last_gap = x;
        }
        v.couple_paths = e.parse("couple.paths")?;
        v.couple_steps = e.parse("couple.steps")?;
        if let Some(x) = e.parse("identity.steps")? {
            v.identity_steps = x;
        }
        if let Some(x) = e.parse("identity.tolerance")? {
            v.identity_tolerance = x;
        }

        if let Some(k) = e.map.keys().next() {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# equal-means baseline
x=1
y=1
mu.kind=two_point
mu.beta=2
mu.mean=1
nu.kind=point_mass
nu.value=1
N=1000
checkpoints=100,250
num_paths=10
master_seed=42
clt.threshold=0.05
";

    #[test]
    fn parses_and_roundtrips() {
        let cfg: ExperimentConfig = BASE.parse().unwrap();
        assert_eq!(cfg.mu_spec, ReinforcementSpec::two_point(2.0, 1.0));
        assert_eq!(cfg.nu_spec, ReinforcementSpec::point_mass(1.0, 1.0));
        assert_eq!(cfg.n_steps, 1000);
        assert_eq!(cfg.verify.clt_threshold, 0.05);
        assert_eq!(cfg.coupling_mode, CouplingMode::Independent);
        let again: ExperimentConfig = cfg.to_text().parse().unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn missing_mu_kind_names_key() {
        let text = BASE.replace("mu.kind=two_point\n", "");
        let err = text.parse::<ExperimentConfig>().unwrap_err();
        assert!(err.to_string().contains("mu.kind"), "{err}");
    }

    #[test]
    fn rejects_unknown_and_bad_keys() {
        let err = format!("{BASE}colour=red\n").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "colour"));
        let err = format!("{BASE}mu.shape=3\n").parse::<ExperimentConfig>().unwrap_err();
        assert!(err.to_string().contains("mu.shape"));
        let err = BASE.replace("N=1000", "N=ten").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
        let err = BASE.replace("N=1000", "N=200").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        let err = BASE.replace("num_paths=10", "num_paths=0").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        let err = BASE.replace("x=1", "x=-1").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::Urn(_)));
        let err = format!("{BASE}x=2\n").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey(_)));
        let err = format!("{BASE}garbage\n").parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { .. }));
    }

    #[test]
    fn schedule_is_geometric_plus_extras() {
        assert_eq!(geometric_schedule(10), vec![1, 2, 3, 5, 10]);
        assert_eq!(geometric_schedule(1), vec![1]);
        assert_eq!(geometric_schedule(0), vec![0]);
        let cfg: ExperimentConfig = BASE.parse().unwrap();
        let s = cfg.checkpoint_schedule();
        assert!(s.contains(&100) && s.contains(&250) && s.contains(&500));
        assert_eq!(*s.last().unwrap(), 1000);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
