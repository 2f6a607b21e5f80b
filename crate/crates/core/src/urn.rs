//! Exact simulation of one randomly reinforced urn path together with its
//! Doob decomposition `Z_n = Z_0 + M_n + A_n`.

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::dist::{sample_pair, CouplingMode, Dist, DistError};
use crate::rng::{PathStream, StepUniforms};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UrnError {
    #[error("initial masses must be non-negative and finite, got ({0}, {1})")]
    NegativeMass(f64, f64),
    #[error("initial urn is empty: x + y = {0}")]
    EmptyUrn(f64),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Composition `(X_n, Y_n)` before draw `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrnState {
    pub x: f64,
    pub y: f64,
    pub n: u64,
}

/// `X / (X + Y)` evaluated as `1 / (1 + Y / X)`.
///
/// Every operation in this form is monotone under IEEE rounding, so if
/// `X >= X'` and `Y <= Y'` then the computed proportions satisfy `Z >= Z'`
/// exactly. `X = 0` gives `1 / inf = 0`.
#[inline]
pub fn proportion(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + y / x)
}

impl UrnState {
    pub fn new(x: f64, y: f64) -> Result<Self, UrnError> {
        if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0) {
            return Err(UrnError::NegativeMass(x, y));
        }
        if !(x + y > 0.0) {
            return Err(UrnError::EmptyUrn(x + y));
        }
        Ok(Self { x, y, n: 0 })
    }

    /// Urn size `D_n`.
    #[inline]
    pub fn size(&self) -> f64 {
        self.x + self.y
    }

    /// Proportion of black mass `Z_n`.
    #[inline]
    pub fn proportion(&self) -> f64 {
        proportion(self.x, self.y)
    }
}

/// The pair of reinforcement laws together with the dependence between the
/// two uniforms feeding them.
#[derive(Debug, Clone)]
pub struct UrnLaw {
    pub mu: Dist,
    pub nu: Dist,
    pub mode: CouplingMode,
}

impl UrnLaw {
    pub fn new(mu: Dist, nu: Dist, mode: CouplingMode) -> Self {
        Self { mu, nu, mode }
    }

    /// Common support bound of the pair.
    pub fn beta(&self) -> f64 {
        self.mu.beta().max(self.nu.beta())
    }
}

/// Everything produced by one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub delta: bool,
    pub r_x: f64,
    pub r_y: f64,
    /// Realized reinforcement `R_{n+1}`.
    pub r: f64,
    pub q: f64,
    pub q_x: f64,
    pub q_y: f64,
    /// Compensator increment `Z_n (1 - Z_n) A*_{n+1}`.
    pub d_a: f64,
    pub d_m: f64,
    pub z_before: f64,
    pub z_after: f64,
    /// Running total of realized reinforcements after this step.
    pub sum_r: f64,
}

/// Normalized compensator increment `E[R_X/(R_X+d)] - E[R_Y/(R_Y+d)]`.
pub fn astar(mu: &Dist, nu: &Dist, d: f64) -> Result<f64, DistError> {
    if !(d > 0.0) {
        return Err(DistError::NonPositiveOffset(d));
    }
    Ok(astar_unchecked(mu, nu, d))
}

#[inline]
fn astar_unchecked(mu: &Dist, nu: &Dist, d: f64) -> f64 {
    mu.expect_fraction_unchecked(d) - nu.expect_fraction_unchecked(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AStarBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Jensen / chord sandwich for `astar` with the concave map `x -> x/(x+d)`.
///
/// `beta` defaults to the pair's common support bound.
pub fn astar_bounds(mu: &Dist, nu: &Dist, d: f64) -> Result<AStarBounds, DistError> {
    astar_bounds_with_beta(mu, nu, d, mu.beta().max(nu.beta()))
}

pub fn astar_bounds_with_beta(
    mu: &Dist,
    nu: &Dist,
    d: f64,
    beta: f64,
) -> Result<AStarBounds, DistError> {
    if !(d > 0.0) {
        return Err(DistError::NonPositiveOffset(d));
    }
    let (m_mu, m_nu) = (mu.mean(), nu.mean());
    Ok(AStarBounds {
        lo: m_mu / (beta + d) - m_nu / (m_nu + d),
        hi: m_mu / (m_mu + d) - m_nu / (beta + d),
    })
}

/// `m (beta - m) / ((beta + d)(m + d))`, the bound on `|astar|` for equal means.
///
/// Evaluated as `m/(m+d) - m/(beta+d)`, the same expression as the upper
/// end of [`astar_bounds`], so extremal laws meet it exactly.
pub fn equal_means_bound(m: f64, beta: f64, d: f64) -> f64 {
    m / (m + d) - m / (beta + d)
}

/// One draw from `state`.
///
/// `sum_r` is the running total of realized reinforcements before the draw.
/// `draws.v` and `draws.w` are combined through the law's coupling mode.
#[inline]
pub fn step(
    state: &UrnState,
    draws: StepUniforms,
    law: &UrnLaw,
    sum_r: f64,
) -> (UrnState, StepRecord) {
    debug_assert!((0.0..=1.0).contains(&draws.u));
    let d = state.size();
    let z = state.proportion();
    let delta = draws.u <= z;
    let (v, w) = sample_pair(law.mode, draws.v, draws.w);
    let r_x = law.mu.quantile_unchecked(v);
    let r_y = law.nu.quantile_unchecked(w);
    let (next, r) = if delta {
        (
            UrnState {
                x: state.x + r_x,
                y: state.y,
                n: state.n + 1,
            },
            r_x,
        )
    } else {
        (
            UrnState {
                x: state.x,
                y: state.y + r_y,
                n: state.n + 1,
            },
            r_y,
        )
    };
    let sum_r = sum_r + r;
    let (q, q_x, q_y) = if sum_r > 0.0 {
        (r / sum_r, r_x / sum_r, r_y / sum_r)
    } else {
        (1.0, 1.0, 1.0)
    };
    let z_after = next.proportion();
    let d_a = z * (1.0 - z) * astar_unchecked(&law.mu, &law.nu, d);
    let d_m = (z_after - z) - d_a;
    (
        next,
        StepRecord {
            delta,
            r_x,
            r_y,
            r,
            q,
            q_x,
            q_y,
            d_a,
            d_m,
            z_before: z,
            z_after,
            sum_r,
        },
    )
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Path statistics recorded after `n` draws.
///
/// Prefix sums run over the quantities available after `n` draws:
/// `(Q^X_k)^2`, `(Q^Y_k)^2` and `k^2 Q_k^4` for `k < n`, and
/// `sqrt(k) |dA_k|` for `k <= n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub n: u64,
    pub z: f64,
    pub d: f64,
    pub a: f64,
    pub m: f64,
    pub prefix_sq_qx: f64,
    pub prefix_sq_qy: f64,
    pub prefix_sqrtk_abs_da: f64,
    pub prefix_k2_q4: f64,
}

impl Checkpoint {
    /// `|Z_n - Z_0 - A_n - M_n|`.
    pub fn decomposition_residual(&self, z0: f64) -> f64 {
        (self.z - z0 - self.a - self.m).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub path_index: u64,
    pub seed: u64,
    pub z0: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_n: u64,
    pub final_z: f64,
    pub final_d: f64,
    /// Largest `|Z_n - Z_0 - A_n - M_n|` over every step of the path.
    pub max_identity_residual: f64,
}

impl PathTrace {
    pub fn checkpoint(&self, n: u64) -> Option<&Checkpoint> {
        self.checkpoints
            .binary_search_by_key(&n, |c| c.n)
            .ok()
            .map(|i| &self.checkpoints[i])
    }

    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("trace has at least the final checkpoint")
    }
}

/// Simulates path `path_index` of `cfg`.
pub fn run_path(cfg: &ExperimentConfig, path_index: u64) -> Result<PathTrace, UrnError> {
    let law = cfg.law()?;
    let schedule = cfg.checkpoint_schedule();
    run_path_with(cfg, &law, &schedule, path_index)
}

/// As [`run_path`] with a prebuilt law and checkpoint schedule (sorted,
/// ending at `cfg.n_steps`).
pub fn run_path_with(
    cfg: &ExperimentConfig,
    law: &UrnLaw,
    schedule: &[u64],
    path_index: u64,
) -> Result<PathTrace, UrnError> {
    let mut state = UrnState::new(cfg.x, cfg.y)?;
    let z0 = state.proportion();
    let mut stream = PathStream::new(cfg.master_seed, path_index);
    let mut sum_r = 0.0;
    let mut a = CompensatedSum::default();
    let mut m = CompensatedSum::default();
    let mut sq_qx = CompensatedSum::default();
    let mut sq_qy = CompensatedSum::default();
    let mut sqrtk_da = CompensatedSum::default();
    let mut k2_q4 = CompensatedSum::default();
    let mut max_residual = 0.0f64;
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut next_cp = schedule.iter().copied().peekable();

    let snapshot = |state: &UrnState,
                        a: &CompensatedSum,
                        m: &CompensatedSum,
                        sums: [&CompensatedSum; 4]| Checkpoint {
        n: state.n,
        z: state.proportion(),
        d: state.size(),
        a: a.value(),
        m: m.value(),
        prefix_sq_qx: sums[0].value(),
        prefix_sq_qy: sums[1].value(),
        prefix_sqrtk_abs_da: sums[2].value(),
        prefix_k2_q4: sums[3].value(),
    };

    while next_cp.peek() == Some(&0) {
        next_cp.next();
        checkpoints.push(snapshot(&state, &a, &m, [&sq_qx, &sq_qy, &sqrtk_da, &k2_q4]));
    }
    for k in 0..cfg.n_steps {
        let draws = stream.next_step();
        let (next, rec) = step(&state, draws, law, sum_r);
        sum_r = rec.sum_r;
        a.add(rec.d_a);
        m.add(rec.d_m);
        sq_qx.add(rec.q_x * rec.q_x);
        sq_qy.add(rec.q_y * rec.q_y);
        let k_after = (k + 1) as f64;
        sqrtk_da.add(k_after.sqrt() * rec.d_a.abs());
        let kf = k as f64;
        let q2 = rec.q * rec.q;
        k2_q4.add(kf * kf * q2 * q2);
        state = next;
        let residual = (rec.z_after - z0 - a.value() - m.value()).abs();
        max_residual = max_residual.max(residual);
        if next_cp.peek() == Some(&state.n) {
            next_cp.next();
            checkpoints.push(snapshot(&state, &a, &m, [&sq_qx, &sq_qy, &sqrtk_da, &k2_q4]));
        }
    }
    Ok(PathTrace {
        path_index,
        seed: cfg.master_seed,
        z0,
        checkpoints,
        final_n: state.n,
        final_z: state.proportion(),
        final_d: state.size(),
        max_identity_residual: max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ReinforcementSpec;

    fn pm(v: f64) -> Dist {
        Dist::new(ReinforcementSpec::point_mass(v, v.max(1.0))).unwrap()
    }

    fn tp(beta: f64, m: f64) -> Dist {
        Dist::new(ReinforcementSpec::two_point(beta, m)).unwrap()
    }

    #[test]
    fn init_examples() {
        assert_eq!(UrnState::new(1.0, 1.0).unwrap().proportion(), 0.5);
        assert_eq!(UrnState::new(0.0, 3.0).unwrap().proportion(), 0.0);
        assert_eq!(UrnState::new(3.0, 0.0).unwrap().proportion(), 1.0);
        assert!(matches!(UrnState::new(-1.0, 2.0), Err(UrnError::NegativeMass(..))));
        assert!(matches!(UrnState::new(0.0, 0.0), Err(UrnError::EmptyUrn(_))));
    }

    #[test]
    fn step_black_draw() {
        let law = UrnLaw::new(pm(2.0), pm(1.0), CouplingMode::Independent);
        let s = UrnState::new(1.0, 1.0).unwrap();
        let draws = StepUniforms { u: 0.3, v: 0.5, w: 0.5 };
        let (next, rec) = step(&s, draws, &law, 0.0);
        assert!(rec.delta);
        assert_eq!((next.x, next.y, next.n), (3.0, 1.0, 1));
        assert_eq!(rec.z_after, 0.75);
        // Z_n - Z_{n+1} = (R/D_{n+1}) (Z_n - delta)
        assert_eq!(0.5 - 0.75, (2.0 / 4.0) * (0.5 - 1.0));
        assert_eq!(rec.q, 1.0); // R_1 / R_1
    }

    #[test]
    fn step_white_draw() {
        let law = UrnLaw::new(pm(1.0), pm(1.0), CouplingMode::Independent);
        let s = UrnState::new(1.0, 1.0).unwrap();
        let (next, rec) = step(&s, StepUniforms { u: 0.8, v: 0.1, w: 0.1 }, &law, 0.0);
        assert!(!rec.delta);
        assert_eq!((next.x, next.y), (1.0, 2.0));
        assert!((rec.z_after - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(rec.r, rec.r_y);
    }

    #[test]
    fn delta_tie_is_inclusive() {
        let law = UrnLaw::new(pm(1.0), pm(1.0), CouplingMode::Independent);
        let s = UrnState::new(1.0, 1.0).unwrap();
        let (_, rec) = step(&s, StepUniforms { u: 0.5, v: 0.0, w: 0.0 }, &law, 0.0);
        assert!(rec.delta);
    }

    #[test]
    fn zero_reinforcement_convention() {
        let zero = Dist::new(ReinforcementSpec::point_mass(0.0, 1.0)).unwrap();
        let law = UrnLaw::new(zero.clone(), zero, CouplingMode::Independent);
        let s = UrnState::new(1.0, 1.0).unwrap();
        let (_, rec) = step(&s, StepUniforms { u: 0.1, v: 0.1, w: 0.1 }, &law, 0.0);
        assert_eq!((rec.q, rec.q_x, rec.q_y), (1.0, 1.0, 1.0));
    }

    #[test]
    fn astar_examples() {
        assert_eq!(astar(&pm(1.0), &pm(1.0), 6.0).unwrap(), 0.0);
        let v = astar(&pm(1.0), &tp(4.0, 1.0), 6.0).unwrap();
        assert!((v - 3.0 / 70.0).abs() < 1e-16);
        let v = astar(&pm(2.0), &pm(1.0), 8.0).unwrap();
        assert!((v - 4.0 / 45.0).abs() < 1e-16);
        assert!(astar(&pm(1.0), &pm(1.0), 0.0).is_err());
    }

    #[test]
    fn extremal_laws_meet_equal_means_bound() {
        for i in 1..200 {
            let m = i as f64 * 0.0173;
            let beta = m * (1.0 + i as f64 * 0.37);
            for d in [1e-3, 0.7, 3.3, 1e4] {
                let bound = equal_means_bound(m, beta, d);
                let up = astar(&pm(m), &tp(beta, m), d).unwrap();
                let down = astar(&tp(beta, m), &pm(m), d).unwrap();
                assert!(up.abs() <= bound && down.abs() <= bound, "m={m} beta={beta} d={d}");
            }
        }
    }

    #[test]
    fn astar_bounds_examples() {
        let b = astar_bounds(&tp(4.0, 1.0), &tp(4.0, 1.0), 6.0).unwrap();
        assert!((b.lo + 3.0 / 70.0).abs() < 1e-16);
        assert!((b.hi - 3.0 / 70.0).abs() < 1e-16);
        assert!((equal_means_bound(1.0, 4.0, 6.0) - 3.0 / 70.0).abs() < 1e-16);

        let b = astar_bounds(&pm(2.0), &pm(2.0), 5.0).unwrap();
        let a = astar(&pm(2.0), &pm(2.0), 5.0).unwrap();
        assert!(b.lo <= a && a <= b.hi);

        // lo * d -> m_mu - m_nu
        let mu = Dist::new(ReinforcementSpec::point_mass(2.0, 4.0)).unwrap();
        let nu = Dist::new(ReinforcementSpec::point_mass(1.0, 4.0)).unwrap();
        let d = 1e4;
        let b = astar_bounds(&mu, &nu, d).unwrap();
        assert!(b.lo > 0.0);
        // lo * d = (d^2 - 2d) / ((1 + d)(4 + d)) * ... exact value below
        let exact = d * (d * (2.0 - 1.0) - 1.0 * (4.0 - 2.0)) / ((1.0 + d) * (4.0 + d));
        assert!((b.lo * d - exact).abs() < 1e-12);
        assert!((b.lo * d - 1.0).abs() < 1e-3);
        assert!(astar_bounds(&mu, &nu, -1.0).is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut c = CompensatedSum::default();
        let mut naive = 0.0;
        c.add(1.0);
        naive += 1.0;
        for _ in 0..1_000_000 {
            c.add(1e-16);
            naive += 1e-16;
        }
        assert_eq!(naive, 1.0);
        assert!((c.value() - (1.0 + 1e-10)).abs() < 1e-22);
    }

    #[test]
    fn proportion_is_monotone_at_the_ulp() {
        let x: f64 = 0.1 + 0.2;
        let y = 0.7;
        let up = proportion(f64::from_bits(x.to_bits() + 1), y);
        assert!(up >= proportion(x, y));
        let down = proportion(x, f64::from_bits(y.to_bits() + 1));
        assert!(down <= proportion(x, y));
    }
}
