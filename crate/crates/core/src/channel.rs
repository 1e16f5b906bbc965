//! Nakagami-m links and the Gamma-distributed effective power gains seen after
//! MRT (downlink) or MRC (uplink) over i.i.d. antennas.

use rand::Rng;

use crate::error::{domain, Result};
use crate::specfun::{ln_gamma, poisson_tail_sum};

/// One Nakagami-m hop, replicated over `n_antennas` i.i.d. branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiLink {
    /// Fading severity (integer shape); 1 is Rayleigh.
    pub m: u32,
    pub n_antennas: u32,
    /// Mean per-branch power gain, linear units (path loss and antenna gains included).
    pub mean_gain: f64,
}

impl NakagamiLink {
    pub fn new(m: u32, n_antennas: u32, mean_gain: f64) -> Result<Self> {
        if m < 1 || n_antennas < 1 {
            return Err(domain("Nakagami shape and antenna count must be >= 1"));
        }
        if !(mean_gain > 0.0) || !mean_gain.is_finite() {
            return Err(domain(format!(
                "mean gain must be positive, got {mean_gain}"
            )));
        }
        Ok(Self {
            m,
            n_antennas,
            mean_gain,
        })
    }

    pub fn rate(&self) -> f64 {
        self.m as f64 / self.mean_gain
    }
}

/// Gamma(shape, rate) law of the combined channel power gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel {
    pub shape: u32,
    pub rate: f64,
}

impl EffectiveChannel {
    pub fn new(shape: u32, rate: f64) -> Result<Self> {
        if shape < 1 {
            return Err(domain("effective channel shape must be >= 1"));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(domain(format!(
                "effective channel rate must be positive, got {rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape as f64 / self.rate
    }
}

/// Effective channel after combining: shape m·N, rate m/μ.
pub fn effective(link: &NakagamiLink) -> EffectiveChannel {
    EffectiveChannel {
        shape: link.m * link.n_antennas,
        rate: link.rate(),
    }
}

/// Probability density λ^s x^{s-1} e^{-λx} / Γ(s), evaluated in log space.
pub fn pdf(ch: &EffectiveChannel, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("pdf needs x >= 0, got {x}")));
    }
    let s = ch.shape as f64;
    if x == 0.0 {
        return Ok(if ch.shape == 1 { ch.rate } else { 0.0 });
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log = s * ch.rate.ln() + (s - 1.0) * x.ln() - ch.rate * x - ln_gamma(s)?;
    Ok(log.exp())
}

/// Complementary CDF e^{-λx} Σ_{k<s} (λx)^k/k!.
pub fn ccdf(ch: &EffectiveChannel, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("ccdf needs x >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(poisson_tail_sum(ch.shape, ch.rate * x).min(1.0))
}

/// One draw, as the sum of `shape` exponential(rate) variates obtained by
/// inverting uniforms on (0, 1].
pub fn sample<R: Rng + ?Sized>(ch: &EffectiveChannel, rng: &mut R) -> f64 {
    let mut acc = 0.0;
    for _ in 0..ch.shape {
        let u = 1.0 - rng.gen::<f64>();
        acc -= u.ln();
    }
    acc / ch.rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_01;
    use crate::specfun::{gamma, gamma_upper_int};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ch(shape: u32, rate: f64) -> EffectiveChannel {
        EffectiveChannel::new(shape, rate).unwrap()
    }

    #[test]
    fn effective_shapes_and_rates() {
        let e = effective(&NakagamiLink::new(2, 3, 1.0).unwrap());
        assert_eq!((e.shape, e.rate), (6, 2.0));
        let e = effective(&NakagamiLink::new(1, 1, 0.5).unwrap());
        assert_eq!((e.shape, e.rate), (1, 2.0));
        let e = effective(&NakagamiLink::new(5, 2, 3.012e-5).unwrap());
        assert_eq!(e.shape, 10);
        assert!((e.rate - 166_003.0).abs() < 1.0);
        assert!((e.mean() - 2.0 * 3.012e-5).abs() < 1e-18);
    }

    #[test]
    fn invalid_links_rejected() {
        assert!(NakagamiLink::new(0, 1, 1.0).is_err());
        assert!(NakagamiLink::new(1, 0, 1.0).is_err());
        assert!(NakagamiLink::new(1, 1, 0.0).is_err());
        assert!(EffectiveChannel::new(1, -2.0).is_err());
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(pdf(&ch(1, 2.0), 0.0).unwrap(), 2.0);
        assert_eq!(pdf(&ch(3, 2.0), 0.0).unwrap(), 0.0);
        assert!((pdf(&ch(2, 1.0), 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(pdf(&ch(2, 1.0), -1.0).is_err());
    }

    #[test]
    fn pdf_normalizes() {
        let c = ch(6, 2.0);
        let q = integrate_01(
            |u: f64| {
                let x = u / (1.0 - u);
                pdf(&c, x).unwrap() / ((1.0 - u) * (1.0 - u))
            },
            1e-12,
            0.0,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn ccdf_examples() {
        for s in 1..10 {
            assert_eq!(ccdf(&ch(s, 3.3), 0.0).unwrap(), 1.0);
        }
        assert!((ccdf(&ch(1, 2.0), 1.0).unwrap() - 0.135335).abs() < 1e-6);
        let v = ccdf(&ch(2, 66_400.0), 1.7154e-6).unwrap();
        let xt: f64 = 66_400.0 * 1.7154e-6;
        assert!((v - (-xt).exp() * (1.0 + xt)).abs() < 1e-15);
        assert!((v - 0.993_985).abs() < 1e-6);
        assert!(ccdf(&ch(2, 1.0), -0.5).is_err());
    }

    #[test]
    fn ccdf_matches_incomplete_gamma() {
        for s in 1..12u32 {
            for &x in &[0.01, 0.3, 1.0, 4.0, 17.0] {
                let c = ch(s, 1.7);
                let via_gamma = gamma_upper_int(s, 1.7 * x).unwrap() / gamma(s as f64).unwrap();
                let v = ccdf(&c, x).unwrap();
                assert!((v - via_gamma).abs() <= 1e-14 * via_gamma.max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn rayleigh_ccdf_is_plain_exponential() {
        let c = ch(1, 0.37);
        for &x in &[0.0, 0.2, 3.0, 50.0] {
            assert_eq!(ccdf(&c, x).unwrap(), (-0.37 * x).exp());
        }
    }

    #[test]
    fn ccdf_derivative_is_minus_pdf() {
        for &(s, rate) in &[(1u32, 2.0), (4, 0.5), (10, 30.0)] {
            let c = ch(s, rate);
            let mut x = 1e-3 / rate;
            while x <= 10.0 / rate {
                let h = 1e-6 * x.max(1.0 / rate);
                let d = (ccdf(&c, x + h).unwrap() - ccdf(&c, x - h).unwrap()) / (2.0 * h);
                let p = pdf(&c, x).unwrap();
                assert!(
                    (d + p).abs() <= 1e-6 * rate.max(1.0),
                    "s={s} x={x}: {d} vs {p}"
                );
                x *= 1.7;
            }
        }
    }

    #[test]
    fn exponential_sample_is_inverse_cdf() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let u = 1.0 - b.gen::<f64>();
            assert_eq!(sample(&ch(1, 1.0), &mut a), -u.ln());
        }
    }

    #[test]
    fn sample_mean_and_tail() {
        let c = ch(6, 2.0);
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws: Vec<f64> = (0..n).map(|_| sample(&c, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (c.shape as f64).sqrt() / c.rate / (n as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}");

        let p = ccdf(&c, 3.0).unwrap();
        let emp = draws.iter().filter(|&&x| x > 3.0).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((emp - p).abs() < 3.0 * se, "{emp} vs {p}");
    }

    #[test]
    fn kolmogorov_smirnov_against_analytic_cdf() {
        let c = ch(4, 0.8);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut draws: Vec<f64> = (0..n).map(|_| sample(&c, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let cdf = 1.0 - ccdf(&c, x).unwrap();
            d = d
                .max((cdf - i as f64 / n as f64).abs())
                .max(((i + 1) as f64 / n as f64 - cdf).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS {d} >= {critical}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ccdf_non_increasing_pdf_non_negative(s in 1u32..30, rate in 1e-3f64..1e5, x in 0.0f64..50.0, dx in 0.0f64..5.0) {
                let c = ch(s, rate);
                let (x0, x1) = (x / rate, (x + dx) / rate);
                // Summed series: allow a few ulps of rounding near 1.
                prop_assert!(ccdf(&c, x1).unwrap() <= ccdf(&c, x0).unwrap() + 4.0 * f64::EPSILON);
                prop_assert!(pdf(&c, x0).unwrap() >= 0.0);
            }
        }
    }
}
