use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Wilson score interval for `k` successes out of `n` at two-sided
/// `confidence`. `n = 0` gives `[0, 1]`.
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * confidence.clamp(0.0, 1.0 - 1e-12));
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    match Binomial::new(p.clamp(0.0, 1.0), n) {
        Ok(b) => b.sf(k - 1),
        Err(_) => f64::NAN,
    }
}

/// One-sided sign test on paired outcomes: the probability of at least
/// `wins` wins among `wins + losses` discordant pairs under a fair coin.
pub fn sign_test(wins: u64, losses: u64) -> f64 {
    binomial_upper_tail(wins, wins + losses, 0.5)
}
