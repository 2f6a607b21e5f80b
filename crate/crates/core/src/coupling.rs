//! Two urns driven by the same streams.
//!
//! The primary urn follows the ordinary dynamics. The shadow urn starts from
//! the same composition, draws with the same `U`, reinforces black draws with
//! the same `R_X`, and reinforces white draws with `R_Y + (m_mu - m_nu)`, so
//! both of its reinforcement laws have mean `m_mu`. When `m_mu >= m_nu` the
//! shadow urn is pathwise dominated: `X' <= X`, `Y' >= Y`, `Z' <= Z`.

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::TestReport;
use crate::config::ExperimentConfig;
use crate::dist::{sample_pair, Dist, DistError, ReinforcementSpec};
use crate::rng::PathStream;
use crate::urn::{step, UrnError, UrnLaw, UrnState};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("coupling needs m_mu >= m_nu, got m_mu = {m_mu}, m_nu = {m_nu}")]
    MeansOrder { m_mu: f64, m_nu: f64 },
    #[error(transparent)]
    Urn(#[from] UrnError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DominanceFlags {
    /// `X'_n <= X_n`
    pub x_dominated: bool,
    /// `Y'_n >= Y_n`
    pub y_dominated: bool,
    /// `Z_n >= Z'_n`
    pub z_ordered: bool,
    /// `delta_n >= delta'_n`
    pub delta_ordered: bool,
}

impl DominanceFlags {
    pub fn all(&self) -> bool {
        self.x_dominated && self.y_dominated && self.z_ordered && self.delta_ordered
    }
}

/// State of both urns after draw `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledStep {
    pub step: u64,
    pub z: f64,
    pub z_shadow: f64,
    pub delta: bool,
    pub delta_shadow: bool,
    pub flags: DominanceFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrace {
    pub path_index: u64,
    pub seed: u64,
    /// `m_mu - m_nu`
    pub shift: f64,
    /// Primary trajectory including the initial state.
    pub primary: Vec<UrnState>,
    /// Shadow trajectory including the initial state.
    pub shadow: Vec<UrnState>,
    pub steps: Vec<CoupledStep>,
    /// Sum and count of the shadow white reinforcements `R_Y + shift`
    /// drawn at every step (used or not).
    pub shadow_ry_sum: f64,
    pub shadow_ry_count: u64,
}

impl CoupledTrace {
    pub fn violations(&self) -> u64 {
        self.steps.iter().filter(|s| !s.flags.all()).count() as u64
    }

    pub fn shadow_ry_mean(&self) -> f64 {
        self.shadow_ry_sum / self.shadow_ry_count.max(1) as f64
    }
}

/// White reinforcement law of the shadow urn: `nu` shifted by `shift`, with
/// support bound `beta + shift`.
pub fn shifted_spec(spec: &ReinforcementSpec, shift: f64) -> ReinforcementSpec {
    match spec {
        ReinforcementSpec::PointMass { value, beta } => {
            ReinforcementSpec::point_mass(value + shift, beta + shift)
        }
        ReinforcementSpec::TwoPoint { beta, mean } => ReinforcementSpec::finite_discrete(
            vec![shift, beta + shift],
            vec![1.0 - mean / beta, mean / beta],
            beta + shift,
        ),
        ReinforcementSpec::FiniteDiscrete {
            values,
            probs,
            beta,
        } => ReinforcementSpec::finite_discrete(
            values.iter().map(|v| v + shift).collect(),
            probs.clone(),
            beta + shift,
        ),
        ReinforcementSpec::UniformInterval { lo, hi, beta } => {
            ReinforcementSpec::uniform_interval(lo + shift, hi + shift, beta + shift)
        }
    }
}

/// The shadow urn as an ordinary (equal-means) urn law.
pub fn shadow_law(law: &UrnLaw) -> Result<UrnLaw, CouplingError> {
    let shift = mean_shift(law)?;
    let nu = Dist::new(shifted_spec(law.nu.spec(), shift))?;
    Ok(UrnLaw::new(law.mu.clone(), nu, law.mode))
}

fn mean_shift(law: &UrnLaw) -> Result<f64, CouplingError> {
    let (m_mu, m_nu) = (law.mu.mean(), law.nu.mean());
    if m_mu < m_nu {
        return Err(CouplingError::MeansOrder { m_mu, m_nu });
    }
    Ok(m_mu - m_nu)
}

/// Runs the coupled pair for path `path_index` over `n_steps` draws.
pub fn run_coupled(
    cfg: &ExperimentConfig,
    path_index: u64,
    n_steps: u64,
) -> Result<CoupledTrace, CouplingError> {
    let law = cfg.law()?;
    run_coupled_with(cfg, &law, path_index, n_steps)
}

pub fn run_coupled_with(
    cfg: &ExperimentConfig,
    law: &UrnLaw,
    path_index: u64,
    n_steps: u64,
) -> Result<CoupledTrace, CouplingError> {
    let shift = mean_shift(law)?;
    let mut primary = UrnState::new(cfg.x, cfg.y)?;
    let mut shadow = primary;
    let mut stream = PathStream::new(cfg.master_seed, path_index);
    let cap = n_steps as usize + 1;
    let mut primary_path = Vec::with_capacity(cap);
    let mut shadow_path = Vec::with_capacity(cap);
    let mut steps = Vec::with_capacity(cap - 1);
    primary_path.push(primary);
    shadow_path.push(shadow);
    let mut sum_r = 0.0;
    let mut shadow_ry_sum = 0.0;

    for _ in 0..n_steps {
        let draws = stream.next_step();
        let (next, rec) = step(&primary, draws, law, sum_r);
        sum_r = rec.sum_r;

        let z_shadow = shadow.proportion();
        let delta_shadow = draws.u <= z_shadow;
        // Same uniforms, same quantiles: R_X and R_Y are shared.
        let (_, w) = sample_pair(law.mode, draws.v, draws.w);
        debug_assert_eq!(law.nu.quantile_unchecked(w), rec.r_y);
        let ry_shadow = rec.r_y + shift;
        shadow_ry_sum += ry_shadow;
        let next_shadow = if delta_shadow {
            UrnState {
                x: shadow.x + rec.r_x,
                y: shadow.y,
                n: shadow.n + 1,
            }
        } else {
            UrnState {
                x: shadow.x,
                y: shadow.y + ry_shadow,
                n: shadow.n + 1,
            }
        };
        primary = next;
        shadow = next_shadow;
        let z = primary.proportion();
        let zs = shadow.proportion();
        steps.push(CoupledStep {
            step: primary.n,
            z,
            z_shadow: zs,
            delta: rec.delta,
            delta_shadow,
            flags: DominanceFlags {
                x_dominated: shadow.x <= primary.x,
                y_dominated: shadow.y >= primary.y,
                z_ordered: z >= zs,
                delta_ordered: rec.delta >= delta_shadow,
            },
        });
        primary_path.push(primary);
        shadow_path.push(shadow);
    }
    Ok(CoupledTrace {
        path_index,
        seed: cfg.master_seed,
        shift,
        primary: primary_path,
        shadow: shadow_path,
        steps,
        shadow_ry_sum,
        shadow_ry_count: n_steps,
    })
}

/// Aggregate over many coupled paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSummary {
    pub paths: u64,
    pub steps_per_path: u64,
    pub total_steps: u64,
    pub x_violations: u64,
    pub y_violations: u64,
    pub z_violations: u64,
    pub delta_violations: u64,
    /// Pooled mean of the shadow white reinforcement over every step.
    pub shadow_ry_mean: f64,
    /// `|shadow_ry_mean - m_mu|` in standard errors; 0 when `nu` is degenerate
    /// and the difference is pure rounding.
    pub shadow_mean_z: f64,
}

impl CouplingSummary {
    pub fn total_violations(&self) -> u64 {
        self.x_violations + self.y_violations + self.z_violations + self.delta_violations
    }

    /// Zero dominance violations, and the shadow white mean within
    /// `max_z` standard errors of `m_mu`.
    pub fn report(&self, max_z: f64) -> TestReport {
        TestReport::new("couple", self.total_steps as usize)
            .check("couple.violations", self.total_violations() as f64, 0.0)
            .check("couple.shadow_mean_z", self.shadow_mean_z, max_z)
            .metric("paths", self.paths as f64)
            .metric("steps_per_path", self.steps_per_path as f64)
            .metric("x_violations", self.x_violations as f64)
            .metric("y_violations", self.y_violations as f64)
            .metric("z_violations", self.z_violations as f64)
            .metric("delta_violations", self.delta_violations as f64)
            .metric("shadow_ry_mean", self.shadow_ry_mean)
    }
}

#[derive(Default)]
struct PathTally {
    x: u64,
    y: u64,
    z: u64,
    delta: u64,
    ry_sum: f64,
}

/// Runs `paths` coupled paths of `n_steps` draws on `workers` threads.
pub fn run_coupled_ensemble(
    cfg: &ExperimentConfig,
    paths: u64,
    n_steps: u64,
    workers: usize,
) -> Result<CouplingSummary, CouplingError> {
    let law = cfg.law()?;
    mean_shift(&law)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let tallies = pool.install(|| {
        (0..paths)
            .into_par_iter()
            .map(|i| {
                let t = run_coupled_with(cfg, &law, i, n_steps)?;
                let mut tally = PathTally {
                    ry_sum: t.shadow_ry_sum,
                    ..PathTally::default()
                };
                for s in &t.steps {
                    tally.x += u64::from(!s.flags.x_dominated);
                    tally.y += u64::from(!s.flags.y_dominated);
                    tally.z += u64::from(!s.flags.z_ordered);
                    tally.delta += u64::from(!s.flags.delta_ordered);
                }
                Ok::<_, CouplingError>(tally)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let total_steps = paths * n_steps;
    let mut s = CouplingSummary {
        paths,
        steps_per_path: n_steps,
        total_steps,
        x_violations: 0,
        y_violations: 0,
        z_violations: 0,
        delta_violations: 0,
        shadow_ry_mean: 0.0,
        shadow_mean_z: 0.0,
    };
    let mut ry_sum = 0.0;
    for t in tallies {
        s.x_violations += t.x;
        s.y_violations += t.y;
        s.z_violations += t.z;
        s.delta_violations += t.delta;
        ry_sum += t.ry_sum;
    }
    let m_mu = law.mu.mean();
    s.shadow_ry_mean = ry_sum / total_steps.max(1) as f64;
    let gap = (s.shadow_ry_mean - m_mu).abs();
    let sd_nu = law.nu.moments().variance.sqrt();
    s.shadow_mean_z = if sd_nu > 0.0 {
        gap / (sd_nu / (total_steps.max(1) as f64).sqrt())
    } else if gap <= 1e-12 * m_mu.max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urn::{astar, astar_bounds, equal_means_bound};

    fn cfg(mu: ReinforcementSpec, nu: ReinforcementSpec, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(1.0, 1.0, mu, nu, 100, 1, seed)
    }

    #[test]
    fn equal_means_urns_coincide() {
        let c = cfg(
            ReinforcementSpec::two_point(2.0, 1.0),
            ReinforcementSpec::point_mass(1.0, 2.0),
            4,
        );
        let t = run_coupled(&c, 0, 2000).unwrap();
        assert_eq!(t.shift, 0.0);
        assert_eq!(t.primary, t.shadow);
        assert!(t.steps.iter().all(|s| s.delta == s.delta_shadow));
    }

    #[test]
    fn point_mass_dominance_holds_on_every_step() {
        let c = cfg(
            ReinforcementSpec::point_mass(2.0, 2.0),
            ReinforcementSpec::point_mass(1.0, 2.0),
            17,
        );
        let t = run_coupled(&c, 0, 10_000).unwrap();
        assert_eq!(t.violations(), 0);
        assert!(t.steps.iter().all(|s| s.z >= s.z_shadow));
        // Shadow white reinforcement is exactly 2.
        assert_eq!(t.shadow_ry_mean(), 2.0);
        // The shadow urn is the symmetric point-mass urn.
        for w in t.shadow.windows(2) {
            assert_eq!(w[1].size() - w[0].size(), 2.0);
        }
    }

    #[test]
    fn first_black_draw_updates_equally() {
        let c = cfg(
            ReinforcementSpec::point_mass(2.0, 2.0),
            ReinforcementSpec::point_mass(1.0, 2.0),
            0,
        );
        // Find a path whose first U falls below Z_0 = 1/2.
        let t = (0..64)
            .map(|i| run_coupled(&c, i, 1).unwrap())
            .find(|t| t.steps[0].delta)
            .expect("some path starts with a black draw");
        let s = t.steps[0];
        assert!(s.delta && s.delta_shadow);
        assert_eq!(t.primary[1], t.shadow[1]);
        assert!(s.flags.all());
    }

    #[test]
    fn refuses_reversed_means() {
        let c = cfg(
            ReinforcementSpec::point_mass(1.0, 2.0),
            ReinforcementSpec::point_mass(2.0, 2.0),
            0,
        );
        assert!(matches!(
            run_coupled(&c, 0, 10),
            Err(CouplingError::MeansOrder { .. })
        ));
    }

    #[test]
    fn shadow_law_has_equal_means_and_shifted_beta() {
        let law = cfg(
            ReinforcementSpec::two_point(4.0, 3.0),
            ReinforcementSpec::two_point(4.0, 1.0),
            0,
        )
        .law()
        .unwrap();
        let shadow = shadow_law(&law).unwrap();
        assert!((shadow.nu.mean() - 3.0).abs() < 1e-15);
        assert_eq!(shadow.beta(), 6.0);
        let m = shadow.mu.mean();
        for d in [1.0, 5.0, 50.0, 1e4] {
            let a = astar(&shadow.mu, &shadow.nu, d).unwrap();
            let b = astar_bounds(&shadow.mu, &shadow.nu, d).unwrap();
            assert!(b.lo <= a && a <= b.hi);
            assert!(a.abs() <= equal_means_bound(m, shadow.beta(), d) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ensemble_has_no_violations() {
        let c = cfg(
            ReinforcementSpec::two_point(3.0, 2.0),
            ReinforcementSpec::uniform_interval(0.0, 2.0, 3.0),
            8,
        );
        let s = run_coupled_ensemble(&c, 20, 2000, 2).unwrap();
        assert_eq!(s.total_violations(), 0);
        assert_eq!(s.total_steps, 40_000);
        assert!(s.shadow_mean_z <= 4.0);
    }
}
