//! Small binomial helpers for accuracy reporting.

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn ln_choose(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let (lp, lq) = (libm::log(p), libm::log(1.0 - p));
    let sum: f64 = (k..=n).map(|i| libm::exp(ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq)).sum();
    sum.min(1.0)
}

/// One-sided exact sign test on paired outcomes: probability of at least
/// `wins` wins among `wins + losses` discordant pairs under a fair coin.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    binomial_upper_tail(wins, wins + losses, 0.5)
}
