use super::{ks_statistic, normal_cdf, AnalyticsError, TestReport, TheoryTargets, MEAN_TOLERANCE};
use crate::config::geometric_schedule;
use crate::dist::Dist;
use crate::ensemble::{CheckpointSummary, EnsembleSummary};
use crate::urn::PathTrace;

/// Fewest retained paths for which the CLT statistic is reported.
pub const MIN_CLT_PATHS: usize = 100;
pub const MIN_ATOM_SAMPLES: usize = 1000;
pub const MIN_ATOM_BINS: usize = 10;
/// Smallest admissible `N / n` for tail sums.
pub const MIN_TAIL_RATIO: u64 = 100;

/// `Z_n` and `Z_N` of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltInput {
    pub z_n: f64,
    pub z_final: f64,
}

/// Standardized statistics `sqrt(n) (Z_n - Z_N) / sqrt(H(Z_N) Z_N (1 - Z_N))`
/// over the paths with `Z_N (1 - Z_N) >= eps`.
pub fn clt_statistics(
    inputs: &[CltInput],
    targets: &TheoryTargets,
    n: u64,
    n_final: u64,
    eps: f64,
) -> Result<Vec<f64>, AnalyticsError> {
    if n == 0 || n.saturating_mul(10) > n_final {
        return Err(AnalyticsError::Precondition(format!(
            "need 0 < n <= N/10, got n={n}, N={n_final}"
        )));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(AnalyticsError::Precondition(format!(
            "eps must lie in (0, 0.5), got {eps}"
        )));
    }
    let root_n = (n as f64).sqrt();
    let stats: Vec<f64> = inputs
        .iter()
        .filter_map(|p| {
            let v = p.z_final * (1.0 - p.z_final);
            (v >= eps).then(|| root_n * (p.z_n - p.z_final) / (targets.h(p.z_final) * v).sqrt())
        })
        .collect();
    if stats.len() < MIN_CLT_PATHS {
        return Err(AnalyticsError::TooFewPaths {
            retained: stats.len(),
            required: MIN_CLT_PATHS,
        });
    }
    Ok(stats)
}

/// KS distance of `stats` from the standard normal.
pub fn normality_report(
    name: &str,
    stats: &[f64],
    threshold: f64,
) -> Result<TestReport, AnalyticsError> {
    let d = ks_statistic(stats, normal_cdf)?;
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let var = stats.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(TestReport::new(name, stats.len())
        .check(format!("{name}.ks"), d, threshold)
        .metric("mean_T", mean)
        .metric("var_T", var))
}

/// KS test of the standardized fluctuations `T_i` at checkpoint `n` against
/// the standard normal, with `Z_N` standing in for the limit.
pub fn clt_test(
    traces: &[PathTrace],
    targets: &TheoryTargets,
    n: u64,
    n_final: u64,
    eps: f64,
    threshold: f64,
) -> Result<TestReport, AnalyticsError> {
    let inputs = traces
        .iter()
        .map(|t| {
            let cp = t.checkpoint(n).ok_or(AnalyticsError::MissingCheckpoint(n))?;
            let last = t
                .checkpoint(n_final)
                .ok_or(AnalyticsError::MissingCheckpoint(n_final))?;
            Ok(CltInput {
                z_n: cp.z,
                z_final: last.z,
            })
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    let stats = clt_statistics(&inputs, targets, n, n_final, eps)?;
    Ok(normality_report("clt", &stats, threshold)?
        .metric("n", n as f64)
        .metric("N", n_final as f64)
        .metric("paths", traces.len() as f64)
        .metric("retained", stats.len() as f64)
        .note(format!("paths with Z_N(1-Z_N) < {eps} excluded")))
}

/// Largest equal-width bin mass on `[0, 1]` and largest multiplicity of an
/// exactly repeated value.
pub fn atom_scan(
    samples: &[f64],
    bins: usize,
    max_mass: f64,
    max_dup: u64,
) -> Result<TestReport, AnalyticsError> {
    if samples.len() < MIN_ATOM_SAMPLES {
        return Err(AnalyticsError::InsufficientSamples {
            got: samples.len(),
            need: MIN_ATOM_SAMPLES,
        });
    }
    if bins < MIN_ATOM_BINS {
        return Err(AnalyticsError::Precondition(format!(
            "need at least {MIN_ATOM_BINS} bins, got {bins}"
        )));
    }
    let masses = crate::ensemble::histogram(samples.iter().copied(), bins);
    let top_mass = masses.iter().copied().fold(0.0, f64::max);

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut top_dup = 1u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            top_dup = top_dup.max(run);
        } else {
            run = 1;
        }
    }
    Ok(TestReport::new("atoms", samples.len())
        .check("atoms.max_bin_mass", top_mass, max_mass)
        .check("atoms.max_duplicates", top_dup as f64, max_dup as f64)
        .metric("bins", bins as f64))
}

/// Dominance when `m_mu > m_nu`: the mean of `Z_N` must reach `min_mean`
/// and the mean of `Z_n` must not decrease across the last `window`
/// geometric checkpoints.
///
/// `checkpoint_means` holds `(n, mean Z_n)`; only geometric checkpoints of
/// the largest `n` are used.
pub fn dominance_test(
    mu: &Dist,
    nu: &Dist,
    final_samples: &[f64],
    checkpoint_means: &[(u64, f64)],
    z_star: f64,
    min_mean: f64,
    window: usize,
) -> Result<TestReport, AnalyticsError> {
    let (m_mu, m_nu) = (mu.mean(), nu.mean());
    if !(m_mu - m_nu > MEAN_TOLERANCE) {
        return Err(AnalyticsError::Precondition(format!(
            "dominance needs m_mu > m_nu, got m_mu={m_mu}, m_nu={m_nu}"
        )));
    }
    if final_samples.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let k = final_samples.len() as f64;
    let mean = final_samples.iter().sum::<f64>() / k;
    let above = final_samples.iter().filter(|&&z| z > z_star).count() as f64 / k;

    let n_max = checkpoint_means.iter().map(|c| c.0).max().unwrap_or(0);
    let geometric = geometric_schedule(n_max);
    let mut series: Vec<(u64, f64)> = checkpoint_means
        .iter()
        .copied()
        .filter(|(n, _)| geometric.binary_search(n).is_ok())
        .collect();
    series.sort_by_key(|c| c.0);
    let tail = &series[series.len().saturating_sub(window)..];
    let worst_drop = tail
        .windows(2)
        .map(|w| w[0].1 - w[1].1)
        .fold(0.0f64, f64::max);

    Ok(TestReport::new("dominance", final_samples.len())
        .check("dominance.mean_shortfall", 1.0 - mean, 1.0 - min_mean)
        .check("dominance.max_decrease", worst_drop, 0.0)
        .metric("mean_Z_N", mean)
        .metric("fraction_above_z_star", above)
        .metric("z_star", z_star)
        .note(format!(
            "monotonicity over checkpoints {:?}",
            tail.iter().map(|c| c.0).collect::<Vec<_>>()
        )))
}

/// Cross-path means of `n * sum_{n <= k < N} Q_k^2` for both colours,
/// compared with `H_X` and `H_Y` in relative terms.
pub fn tail_sum_check(
    traces: &[PathTrace],
    targets: &TheoryTargets,
    n: u64,
    tolerance: f64,
) -> Result<TestReport, AnalyticsError> {
    if traces.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let n_final = traces[0].last().n;
    if n == 0 || n_final / n < MIN_TAIL_RATIO {
        return Err(AnalyticsError::TailTooShort { n, n_final });
    }
    let nf = n as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for t in traces {
        let cp = t.checkpoint(n).ok_or(AnalyticsError::MissingCheckpoint(n))?;
        let last = t.last();
        sx += nf * (last.prefix_sq_qx - cp.prefix_sq_qx);
        sy += nf * (last.prefix_sq_qy - cp.prefix_sq_qy);
    }
    let k = traces.len() as f64;
    let (mx, my) = (sx / k, sy / k);
    Ok(TestReport::new("tails", traces.len())
        .check("tails.rel_dev_x", (mx / targets.h_x - 1.0).abs(), tolerance)
        .check("tails.rel_dev_y", (my / targets.h_y - 1.0).abs(), tolerance)
        .metric("mean_tail_x", mx)
        .metric("mean_tail_y", my)
        .metric("H_X", targets.h_x)
        .metric("H_Y", targets.h_y)
        .metric("truncation_ratio_n_over_N", nf / n_final as f64))
}

/// `(S(N) - S(ceil(N/2))) / S(N)`, zero when `S(N) = 0`.
fn last_gap(prev: f64, last: f64) -> f64 {
    if last == 0.0 {
        0.0
    } else {
        ((last - prev) / last).abs()
    }
}

/// Mean partial sums of `sqrt(k) |dA_k|` and `k^2 Q_k^4` along the
/// geometric checkpoints, with the relative increment between the last two
/// held to `max_last_gap`.
pub fn series_diagnostics(
    summary: &EnsembleSummary,
    max_last_gap: f64,
) -> Result<TestReport, AnalyticsError> {
    let geometric = geometric_schedule(summary.n_steps);
    let cps: Vec<&CheckpointSummary> = summary
        .checkpoints
        .iter()
        .filter(|c| geometric.binary_search(&c.n).is_ok())
        .collect();
    if cps.len() < 3 {
        return Err(AnalyticsError::TooFewCheckpoints(cps.len()));
    }
    let (prev, last) = (cps[cps.len() - 2], cps[cps.len() - 1]);
    let mut report = TestReport::new("series", summary.num_paths as usize)
        .check(
            "series.sqrtk_abs_da.last_gap",
            last_gap(prev.mean_sqrtk_abs_da, last.mean_sqrtk_abs_da),
            max_last_gap,
        )
        .check(
            "series.k2_q4.last_gap",
            last_gap(prev.mean_k2_q4, last.mean_k2_q4),
            max_last_gap,
        );
    for c in &cps {
        report = report
            .metric(format!("sqrtk_abs_da@{}", c.n), c.mean_sqrtk_abs_da)
            .metric(format!("k2_q4@{}", c.n), c.mean_k2_q4);
    }
    Ok(report)
}

/// `|mean(D_N)/N - m|` against four standard errors plus `(beta + D_0)/N`.
pub fn dn_growth_check(
    summary: &EnsembleSummary,
    targets: &TheoryTargets,
    beta: f64,
    d0: f64,
) -> Result<TestReport, AnalyticsError> {
    let n = summary.n_steps;
    if n == 0 {
        return Err(AnalyticsError::Precondition("N must be positive".into()));
    }
    let last = summary.last();
    let nf = n as f64;
    let dev = (last.mean_d / nf - targets.m).abs();
    let se = (last.var_d / last.count.max(1) as f64).sqrt() / nf;
    let allowance = 4.0 * se + (beta + d0) / nf;
    Ok(TestReport::new("growth", last.count as usize)
        .check("growth.dn_over_n", dev, allowance)
        .metric("mean_D_N_over_N", last.mean_d / nf)
        .metric("m", targets.m)
        .metric("standard_error", se))
}

/// Ratio of the estimated `E (c + D_n)^-alpha` to `(c + D_0 + m n)^-alpha`
/// for each `(c, alpha)`.
pub fn rate_check(
    summary: &EnsembleSummary,
    targets: &TheoryTargets,
    n: u64,
    d0: f64,
    pairs: &[(f64, f64)],
    tolerance: f64,
) -> Result<TestReport, AnalyticsError> {
    let cp = summary
        .checkpoints
        .iter()
        .find(|c| c.n == n)
        .ok_or(AnalyticsError::MissingCheckpoint(n))?;
    if pairs.is_empty() {
        return Err(AnalyticsError::Precondition("no (c, alpha) pairs".into()));
    }
    let mut report = TestReport::new("rates", cp.count as usize).metric("n", n as f64);
    for &(c, alpha) in pairs {
        let est = cp
            .moments
            .iter()
            .find(|e| e.c == c && e.alpha == alpha)
            .ok_or_else(|| {
                AnalyticsError::Precondition(format!("moment c={c}, alpha={alpha} not aggregated"))
            })?
            .mean;
        let theory = (c + d0 + targets.m * n as f64).powf(-alpha);
        let ratio = est / theory;
        report = report
            .check(format!("rates.c{c}_alpha{alpha}"), (ratio - 1.0).abs(), tolerance)
            .metric(format!("ratio.c{c}_alpha{alpha}"), ratio);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ReinforcementSpec;

    fn pm(v: f64) -> Dist {
        Dist::new(ReinforcementSpec::point_mass(v, v)).unwrap()
    }

    #[test]
    fn clt_preconditions() {
        let t = TheoryTargets::new(&pm(1.0), &pm(1.0)).unwrap();
        let inputs = vec![CltInput { z_n: 0.5, z_final: 0.5 }; 200];
        assert!(matches!(
            clt_statistics(&inputs, &t, 200, 1000, 1e-3),
            Err(AnalyticsError::Precondition(_))
        ));
        assert!(matches!(
            clt_statistics(&inputs, &t, 100, 1000, 0.5),
            Err(AnalyticsError::Precondition(_))
        ));
        assert!(matches!(
            clt_statistics(&inputs[..50], &t, 100, 1000, 1e-3),
            Err(AnalyticsError::TooFewPaths { retained: 50, .. })
        ));
        let edge = vec![CltInput { z_n: 0.5, z_final: 1.0 }; 500];
        assert!(matches!(
            clt_statistics(&edge, &t, 100, 1000, 1e-3),
            Err(AnalyticsError::TooFewPaths { retained: 0, .. })
        ));
    }

    #[test]
    fn clt_statistic_formula() {
        let t = TheoryTargets::new(&pm(1.0), &pm(1.0)).unwrap();
        let inputs = vec![CltInput { z_n: 0.6, z_final: 0.5 }; 100];
        let s = clt_statistics(&inputs, &t, 100, 1000, 1e-3).unwrap();
        // sqrt(100) * 0.1 / sqrt(0.25) = 2
        assert!((s[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn atom_scan_examples() {
        let grid: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let r = atom_scan(&grid, 50, 0.08, 3).unwrap();
        assert!((r.find_check("atoms.max_bin_mass").unwrap().statistic - 0.02).abs() < 1e-12);
        assert!(r.pass());

        let r = atom_scan(&vec![0.5; 2000], 50, 0.08, 3).unwrap();
        assert_eq!(r.find_check("atoms.max_bin_mass").unwrap().statistic, 1.0);
        assert!(!r.pass());

        assert!(matches!(
            atom_scan(&grid[..999], 50, 0.08, 3),
            Err(AnalyticsError::InsufficientSamples { got: 999, .. })
        ));
        assert!(atom_scan(&grid, 9, 0.08, 3).is_err());
    }

    #[test]
    fn atom_scan_flags_planted_atom() {
        let mut xs: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        for x in xs.iter_mut().take(500) {
            *x = 0.123_456_789;
        }
        let r = atom_scan(&xs, 50, 0.08, 3).unwrap();
        assert!(!r.find_check("atoms.max_duplicates").unwrap().pass());
        assert!(!r.pass());
    }

    #[test]
    fn dominance_examples() {
        let ones = vec![1.0; 100];
        let means = [(1, 0.6), (2, 0.7), (4, 0.8), (8, 0.9), (16, 1.0)];
        let r = dominance_test(&pm(2.0), &pm(1.0), &ones, &means, 0.5, 0.95, 5).unwrap();
        assert!(r.pass());
        assert_eq!(r.metric_value("fraction_above_z_star"), Some(1.0));

        let dip = [(1, 0.6), (2, 0.7), (4, 0.9), (8, 0.8), (16, 1.0)];
        let r = dominance_test(&pm(2.0), &pm(1.0), &ones, &dip, 0.5, 0.95, 5).unwrap();
        assert!(!r.pass());

        assert!(matches!(
            dominance_test(&pm(1.0), &pm(1.0), &ones, &means, 0.5, 0.95, 5),
            Err(AnalyticsError::Precondition(_))
        ));
    }

    #[test]
    fn last_gap_cases() {
        assert_eq!(last_gap(0.0, 0.0), 0.0);
        assert!((last_gap(0.9, 1.0) - 0.1).abs() < 1e-15);
    }
}
