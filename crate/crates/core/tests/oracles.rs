//! Library results checked against independently computed values.

use proptest::prelude::*;
use rru_core::analytics::{ks_statistic, normal_cdf, TheoryTargets};
use rru_core::config::ExperimentConfig;
use rru_core::dist::{CouplingMode, Dist, ReinforcementSpec};
use rru_core::rng::StepUniforms;
use rru_core::urn::{astar, astar_bounds, proportion, step, UrnLaw, UrnState};

fn dist(spec: ReinforcementSpec) -> Dist {
    Dist::new(spec).unwrap()
}

fn zoo() -> Vec<Dist> {
    vec![
        dist(ReinforcementSpec::point_mass(1.5, 3.0)),
        dist(ReinforcementSpec::two_point(4.0, 1.0)),
        dist(ReinforcementSpec::finite_discrete(
            vec![0.0, 1.0, 2.5],
            vec![0.25, 0.5, 0.25],
            3.0,
        )),
        dist(ReinforcementSpec::uniform_interval(0.5, 2.5, 3.0)),
        dist(ReinforcementSpec::uniform_interval(0.0, 2.0, 2.0)),
    ]
}

/// Midpoint rule over `u` in (0, 1) of `f(q(u))`.
fn integrate_quantile(d: &Dist, points: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / points as f64;
    let mut s = 0.0;
    let mut c = 0.0;
    for i in 0..points {
        let u = (i as f64 + 0.5) * h;
        // Kahan: a million terms of similar size.
        let y = f(d.quantile(u).unwrap()) * h - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

#[test]
fn moments_match_quantile_integrals() {
    for d in zoo() {
        let mean = integrate_quantile(&d, 1_000_000, |r| r);
        let second = integrate_quantile(&d, 1_000_000, |r| r * r);
        let m = d.moments();
        assert!((m.mean - mean).abs() < 1e-9, "{:?}: {} vs {mean}", d.spec(), m.mean);
        assert!((m.second_moment - second).abs() < 1e-9, "{:?}", d.spec());
        assert!((m.variance - (second - mean * mean)).abs() < 1e-9);
    }
}

#[test]
fn uniform_sample_moments_within_standard_errors() {
    // Plain Monte Carlo on the quantile with a fixed stream.
    let d = dist(ReinforcementSpec::uniform_interval(1.0, 3.0, 4.0));
    let n = 200_000u64;
    let draws: Vec<f64> = (0..n)
        .map(|i| d.quantile(rru_core::rng::uniform_at(5, 0, i, rru_core::rng::Substream::V)).unwrap())
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // U(1, 3): mean 2, variance 1/3.
    assert!((mean - 2.0).abs() < 4.0 * (1.0f64 / 3.0 / n as f64).sqrt());
    assert!((var - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn expect_fraction_matches_riemann_oracle() {
    for d in zoo() {
        for &off in &[0.5, 2.0, 7.0, 40.0] {
            let oracle = integrate_quantile(&d, 10_000_000, |r| r / (r + off));
            let got = d.expect_fraction(off).unwrap();
            assert!((got - oracle).abs() < 1e-8, "{:?} d={off}: {got} vs {oracle}", d.spec());
        }
    }
}

#[test]
fn one_step_mean_increment_equals_compensator() {
    // E[Z_{n+1} - Z_n | state] by direct integration over the colour draw
    // and both reinforcement uniforms, against the step's dA.
    let mu = dist(ReinforcementSpec::finite_discrete(vec![0.5, 2.0], vec![0.5, 0.5], 2.0));
    let nu = dist(ReinforcementSpec::uniform_interval(0.0, 1.5, 2.0));
    let law = UrnLaw::new(mu.clone(), nu.clone(), CouplingMode::Independent);
    let state = UrnState::new(3.0, 2.0).unwrap();
    let z = state.proportion();
    let points = 200_000;
    let black = integrate_quantile(&mu, points, |r| (state.x + r) / (state.size() + r) - z);
    let white = integrate_quantile(&nu, points, |r| state.x / (state.size() + r) - z);
    let oracle = z * black + (1.0 - z) * white;
    let (_, rec) = step(&state, StepUniforms { u: 0.1, v: 0.3, w: 0.7 }, &law, 0.0);
    assert!((rec.d_a - oracle).abs() < 1e-10, "{} vs {oracle}", rec.d_a);
}

#[test]
fn crimaldi_factor_for_two_point() {
    let tp = dist(ReinforcementSpec::two_point(2.0, 1.0));
    let t = TheoryTargets::new(&tp, &tp).unwrap();
    assert_eq!(t.crimaldi_h, 2.0);
}

#[test]
fn ks_of_normal_quantiles_is_small() {
    // Stratified normal sample: quantiles at (i - 1/2)/n give KS = 1/(2n).
    let n = 1000;
    let inv = |p: f64| {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let xs: Vec<f64> = (0..n).map(|i| inv((i as f64 + 0.5) / n as f64)).collect();
    let d = ks_statistic(&xs, normal_cdf).unwrap();
    assert!((d - 0.5 / n as f64).abs() < 1e-9);
}

fn arb_spec() -> impl Strategy<Value = ReinforcementSpec> {
    let beta = 0.1f64..20.0;
    prop_oneof![
        (beta.clone(), 0.0f64..1.0).prop_map(|(b, f)| ReinforcementSpec::point_mass(b * f, b)),
        (beta.clone(), 0.0f64..1.0).prop_map(|(b, f)| ReinforcementSpec::two_point(b, b * f)),
        (beta.clone(), prop::collection::vec((0.0f64..1.0, 0.05f64..1.0), 1..6)).prop_map(
            |(b, atoms)| {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let values = atoms.iter().map(|a| a.0 * b).collect();
                let mut probs: Vec<f64> = atoms.iter().map(|a| a.1 / total).collect();
                let head: f64 = probs[..probs.len() - 1].iter().sum();
                let last = probs.len() - 1;
                probs[last] = 1.0 - head;
                ReinforcementSpec::finite_discrete(values, probs, b)
            }
        ),
        (beta, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(b, f, g)| {
            let lo = b * f.min(g);
            let hi = b * f.max(g);
            ReinforcementSpec::uniform_interval(lo, hi, b)
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantile_is_monotone_and_bounded(spec in arb_spec(), u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let d = Dist::new(spec).unwrap();
        let (a, b) = (u.min(v), u.max(v));
        let (qa, qb) = (d.quantile(a).unwrap(), d.quantile(b).unwrap());
        prop_assert!(qa <= qb);
        prop_assert!(qa >= 0.0 && qb <= d.beta());
    }

    #[test]
    fn expect_fraction_within_jensen_range(spec in arb_spec(), off in 0.5f64..100.0) {
        let d = Dist::new(spec).unwrap();
        let e = d.expect_fraction(off).unwrap();
        let m = d.mean();
        prop_assert!(e <= m / (m + off) + 1e-12);
        prop_assert!(e >= m / (d.beta() + off) - 1e-12);
    }

    #[test]
    fn astar_sandwich_holds(mu in arb_spec(), nu in arb_spec(), off in 0.01f64..1e4) {
        let (mu, nu) = (Dist::new(mu).unwrap(), Dist::new(nu).unwrap());
        let a = astar(&mu, &nu, off).unwrap();
        let b = astar_bounds(&mu, &nu, off).unwrap();
        prop_assert!(b.lo <= a && a <= b.hi, "{} <= {a} <= {}", b.lo, b.hi);
    }

    #[test]
    fn step_identity_and_range(
        x in 1e-3f64..1e5, y in 1e-3f64..1e5,
        u in 0.0f64..1.0, v in 0.0f64..1.0, w in 0.0f64..1.0,
        mu in arb_spec(), nu in arb_spec(),
    ) {
        let law = UrnLaw::new(Dist::new(mu).unwrap(), Dist::new(nu).unwrap(), CouplingMode::Independent);
        let s = UrnState::new(x, y).unwrap();
        let (next, rec) = step(&s, StepUniforms { u, v, w }, &law, 0.0);
        let z1 = next.proportion();
        prop_assert!((0.0..=1.0).contains(&z1));
        let delta = if rec.delta { 1.0 } else { 0.0 };
        let rhs = rec.r / next.size() * (s.proportion() - delta);
        prop_assert!(((s.proportion() - z1) - rhs).abs() <= 1e-12);
        prop_assert_eq!(rec.delta, u <= proportion(x, y));
    }

    #[test]
    fn ks_invariant_under_permutation_and_monotone_map(
        mut xs in prop::collection::vec(0.0f64..1.0, 1..200),
        seed in any::<u64>(),
    ) {
        let cdf = |x: f64| x.clamp(0.0, 1.0);
        let base = ks_statistic(&xs, cdf).unwrap();
        // Deterministic shuffle.
        let mut s = seed | 1;
        for i in (1..xs.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            xs.swap(i, (s % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(ks_statistic(&xs, cdf).unwrap(), base);
        // g(x) = x^3 + x is strictly increasing; the cdf of g(X) is cdf(g^-1(y)).
        let g = |x: f64| x * x * x + x;
        let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let ginv = |y: f64| {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < y { lo = mid } else { hi = mid }
            }
            0.5 * (lo + hi)
        };
        let mapped = ks_statistic(&ys, |y| cdf(ginv(y))).unwrap();
        prop_assert!((mapped - base).abs() < 1e-12);
    }

    #[test]
    fn config_text_roundtrip(mu in arb_spec(), nu in arb_spec(), n in 1u64..10_000, seed in any::<u64>()) {
        let mut cfg = ExperimentConfig::new(1.0, 2.5, mu, nu, n, 3, seed);
        cfg.checkpoints = vec![n / 2];
        let back: ExperimentConfig = cfg.to_text().parse().unwrap();
        prop_assert_eq!(back, cfg);
    }
}
