//! Small statistics kernel used by the verification machinery: sample
//! summaries, chi-square goodness-of-fit with an exact-tail binning rule, and
//! the special functions both need.

/// Log-gamma by the Lanczos approximation (g = 7, 9 coefficients).
///
/// Relative error is below 1e-13 on the positive reals, which is far inside
/// every tolerance used by the samplers and fit tests.
pub fn lgamma(x: f64) -> f64 {
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().abs().ln() - lgamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut sum = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            sum += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
    }
}

/// Lower regularized incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p domain");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q domain");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - lgamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    // Lentz's continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (-x + a * x.ln() - lgamma(a)).exp() * h
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom, i.e. the p-value of a goodness-of-fit statistic.
pub fn chi_square_p_value(statistic: f64, df: u32) -> f64 {
    if df == 0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, statistic / 2.0)
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Clone, Debug)]
pub struct GofResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    /// Number of bins after tail merging.
    pub bins: usize,
}

/// Chi-square fit of observed counts for values `0, 1, 2, ...` against the
/// probability mass function `pmf`.
///
/// `counts[k]` is the number of observations equal to `k`; everything at or
/// beyond `counts.len()` must have been tallied into the last entry by the
/// caller, or not occur. Bins are accumulated left to right and merged until
/// each holds expected mass at least `min_expected`; the final bin absorbs
/// the analytic tail mass so the expected column sums to the sample size
/// exactly.
pub fn chi_square_fit(counts: &[u64], pmf: impl Fn(u64) -> f64, min_expected: f64) -> GofResult {
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    assert!(total > 0, "chi_square_fit: empty sample");

    let mut bin_obs: Vec<f64> = Vec::new();
    let mut bin_exp: Vec<f64> = Vec::new();
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    let mut cum_prob = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let p = pmf(k as u64);
        cum_prob += p;
        acc_obs += c as f64;
        acc_exp += p * n;
        if acc_exp >= min_expected {
            bin_obs.push(acc_obs);
            bin_exp.push(acc_exp);
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    // Tail bin: everything beyond the listed values plus any unflushed bin.
    let tail_exp = acc_exp + (1.0 - cum_prob).max(0.0) * n;
    if tail_exp > 0.0 || acc_obs > 0.0 {
        if tail_exp >= min_expected || bin_exp.is_empty() {
            bin_obs.push(acc_obs);
            bin_exp.push(tail_exp);
        } else {
            let last = bin_exp.len() - 1;
            bin_obs[last] += acc_obs;
            bin_exp[last] += tail_exp;
        }
    }

    let statistic: f64 = bin_obs
        .iter()
        .zip(&bin_exp)
        .map(|(&o, &e)| {
            debug_assert!(e > 0.0);
            (o - e) * (o - e) / e
        })
        .sum();
    let df = bin_obs.len().saturating_sub(1) as u32;
    GofResult {
        statistic,
        df,
        p_value: chi_square_p_value(statistic, df),
        bins: bin_obs.len(),
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    assert!(!xs.is_empty());
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of a Bernoulli proportion estimate.
pub fn proportion_stderr(p_hat: f64, n: u64) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Poisson pmf table `P(X = k)` for `k = 0..=k_max`, by the stable recurrence.
pub fn poisson_pmf_table(lambda: f64, k_max: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(k_max as usize + 1);
    let mut p = (-lambda).exp();
    table.push(p);
    for k in 1..=k_max {
        p *= lambda / k as f64;
        table.push(p);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lgamma_matches_factorials() {
        for (n, expect) in [(1u64, 1.0f64), (5, 24.0), (10, 362880.0)] {
            assert!((lgamma(n as f64) - expect.ln()).abs() < 1e-10);
        }
        // Gamma(0.5) = sqrt(pi)
        assert!((lgamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn gamma_p_q_complement() {
        for &(a, x) in &[(0.5, 0.3), (2.0, 2.0), (7.5, 3.0), (10.0, 20.0)] {
            let p = gamma_p(a, x);
            let q = gamma_q(a, x);
            assert!((p + q - 1.0).abs() < 1e-12, "a={a} x={x}");
        }
    }

    #[test]
    fn chi_square_p_value_known_points() {
        // P(chi2_1 > 3.841) ~ 0.05, P(chi2_5 > 11.07) ~ 0.05
        assert!((chi_square_p_value(3.841, 1) - 0.05).abs() < 2e-3);
        assert!((chi_square_p_value(11.0705, 5) - 0.05).abs() < 2e-3);
    }

    #[test]
    fn chi_square_fit_exact_match_is_insensitive() {
        // Counts exactly proportional to the pmf give statistic 0, p = 1.
        let probs = [0.5, 0.25, 0.25];
        let counts = [500u64, 250, 250];
        let r = chi_square_fit(&counts, |k| probs[k as usize], 5.0);
        assert!(r.statistic < 1e-9);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn poisson_table_sums_to_one() {
        let t = poisson_pmf_table(4.0, 60);
        let s: f64 = t.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
