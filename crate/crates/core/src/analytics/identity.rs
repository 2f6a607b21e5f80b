use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::TestReport;
use crate::dist::{CouplingMode, Dist, ReinforcementSpec};
use crate::rng::{bits_to_unit, StepUniforms};
use crate::urn::{step, UrnLaw, UrnState};

struct Fuzz(ChaCha8Rng);

impl Fuzz {
    fn unit(&mut self) -> f64 {
        bits_to_unit(self.0.next_u64())
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Log-uniform on `[lo, hi]`.
    fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * self.unit()).exp()
    }

    fn dist(&mut self, kind: usize) -> Dist {
        let beta = self.log_range(0.1, 50.0);
        let spec = match kind % 4 {
            0 => ReinforcementSpec::point_mass(self.range(0.0, beta), beta),
            1 => ReinforcementSpec::two_point(beta, self.range(0.0, beta)),
            2 => {
                let k = 2 + (self.0.next_u64() % 5) as usize;
                let values: Vec<f64> = (0..k).map(|_| self.range(0.0, beta)).collect();
                let raw: Vec<f64> = (0..k).map(|_| self.range(0.05, 1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
                let head: f64 = probs[..k - 1].iter().sum();
                probs[k - 1] = 1.0 - head;
                ReinforcementSpec::finite_discrete(values, probs, beta)
            }
            _ => {
                let a = self.range(0.0, beta);
                let b = self.range(a, beta);
                ReinforcementSpec::uniform_interval(a, b, beta)
            }
        };
        Dist::new(spec).expect("fuzzed law is valid")
    }
}

/// Checks `Z_n - Z_{n+1} = (R_{n+1} / D_{n+1}) (Z_n - delta_{n+1})` and
/// `|Z_{n+1} - Z_n| <= R_{n+1} / D_{n+1}` on `steps` single steps from random
/// states under random laws of every kind.
pub fn identity_fuzz(seed: u64, steps: u64, tolerance: f64) -> TestReport {
    let mut fz = Fuzz(ChaCha8Rng::seed_from_u64(seed));
    let modes = [
        CouplingMode::Independent,
        CouplingMode::Comonotone,
        CouplingMode::Antithetic,
    ];
    let mut worst = 0.0f64;
    let mut worst_excess = 0.0f64;
    let mut law = None;
    for i in 0..steps {
        if i % 64 == 0 {
            let k = (i / 64) as usize;
            law = Some(UrnLaw::new(fz.dist(k), fz.dist(k / 4), modes[k % 3]));
        }
        let law = law.as_ref().expect("law set on first step");
        let state = UrnState {
            x: fz.log_range(1e-3, 1e6),
            y: fz.log_range(1e-3, 1e6),
            n: 0,
        };
        let draws = StepUniforms {
            u: fz.unit(),
            v: fz.unit(),
            w: fz.unit(),
        };
        let (next, rec) = step(&state, draws, law, fz.range(0.0, 1e3));
        let z0 = state.proportion();
        let z1 = next.proportion();
        let q = rec.r / next.size();
        let delta = if rec.delta { 1.0 } else { 0.0 };
        worst = worst.max(((z0 - z1) - q * (z0 - delta)).abs());
        worst_excess = worst_excess.max((z1 - z0).abs() - q);
    }
    TestReport::new("identity", steps as usize)
        .check("identity.max_residual", worst, tolerance)
        .check("identity.increment_excess", worst_excess, tolerance)
        .metric("seed", seed as f64)
}
