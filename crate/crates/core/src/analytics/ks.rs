use super::AnalyticsError;

/// Standard normal CDF through `erfc`; accurate to a few ulps in relative
/// terms, including the far tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`.
///
/// Both one-sided gaps are evaluated at every order statistic.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, AnalyticsError> {
    if samples.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Limiting CDF of `sqrt(n) D_n`: `1 - 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 0.3 {
        // Alternating series converges slowly here; use the theta-function
        // form sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)).
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * pi2 / (8.0 * x * x)).exp();
        }
        return (2.0 * std::f64::consts::PI).sqrt() / x * s;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (1.0 - 2.0 * s).clamp(0.0, 1.0)
}

/// `x` with `kolmogorov_cdf(x) = p`, by bisection.
pub fn kolmogorov_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // Table value Phi(1.96) = 0.9750021048517795
        assert!((normal_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-12);
        assert!((normal_cdf(1.96) - 0.9750).abs() < 1e-4);
        // Mills-ratio tail bound exp(-x^2/2) / (x sqrt(2 pi)) at x = 8.
        let bound = (-32.0f64).exp() / (8.0 * (2.0 * std::f64::consts::PI).sqrt());
        let tail = normal_cdf(-8.0);
        assert!(tail < 1e-14 && tail <= bound && tail > 0.0);
        assert!((normal_cdf(-1.0) + normal_cdf(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_matches_quadrature() {
        // Composite Simpson on the density from -12 to x.
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &x in &[-3.0, -1.2, -0.1, 0.4, 1.0, 2.5] {
            let (a, n) = (-12.0, 200_000);
            let h = (x - a) / n as f64;
            let mut s = pdf(a) + pdf(x);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * pdf(a + i as f64 * h);
            }
            let oracle = s * h / 3.0;
            assert!((normal_cdf(x) - oracle).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn ks_examples() {
        let id = |x: f64| x.clamp(0.0, 1.0);
        let d = ks_statistic(&[0.1, 0.5, 0.9], id).unwrap();
        assert!((d - 7.0 / 30.0).abs() < 1e-15);
        assert_eq!(ks_statistic(&[0.5], id).unwrap(), 0.5);
        assert!(matches!(ks_statistic(&[], id), Err(AnalyticsError::EmptySample)));
    }

    #[test]
    fn ks_brute_force_agrees() {
        // Oracle: evaluate |F_n - F| just left and right of each point on a
        // dense sorted sample.
        let xs = [0.3, 0.05, 0.3, 0.71, 0.99, 0.42];
        let f = |x: f64| x * x;
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mut oracle = 0.0f64;
        for &x in &sorted {
            let right = sorted.iter().filter(|&&y| y <= x).count() as f64 / n;
            let left = sorted.iter().filter(|&&y| y < x).count() as f64 / n;
            oracle = oracle.max((right - f(x)).abs()).max((left - f(x)).abs());
        }
        assert!((ks_statistic(&xs, f).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_quantile_values() {
        // Standard tables: K^{-1}(0.95) = 1.3581, K^{-1}(0.999) = 1.9495.
        assert!((kolmogorov_quantile(0.95) - 1.3581).abs() < 1e-4);
        assert!((kolmogorov_quantile(0.999) - 1.9495).abs() < 1e-4);
        // The two series agree where they meet.
        let a = kolmogorov_cdf(0.3 - 1e-12);
        let b = kolmogorov_cdf(0.3);
        assert!((a - b).abs() < 1e-10);
    }
}
