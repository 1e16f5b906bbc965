//! Seeded Monte Carlo simulation of the harvest-then-transmit slot.
//!
//! Sample `i` draws from its own ChaCha8 stream (stream number `i`, keyed by
//! the seed), so the result does not depend on how samples are split across
//! threads. Batches are reduced in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::SystemParams;
use crate::channel::sample;
use crate::error::{domain, Result};

/// Default samples per parallel work unit.
pub const DEFAULT_BATCH: u64 = 1 << 16;

/// Below this many samples the normal-approximation interval is flagged.
pub const MIN_CI_SAMPLES: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub batch: u64,
}

impl SimConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            batch: DEFAULT_BATCH,
        }
    }

    pub fn with_batch(mut self, batch: u64) -> Self {
        self.batch = batch;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub n_samples: u64,
    pub outage: f64,
    /// 1.96·√(p(1−p)/n).
    pub ci95_halfwidth: f64,
    /// Mean harvested DC power, W.
    pub mean_harvested: f64,
    /// Mean uplink SNR (linear average), in dB.
    pub mean_snr_db: f64,
    pub throughput: f64,
    /// True when n·min(p, 1−p) < 20 or n < 1000, where the normal
    /// approximation behind `ci95_halfwidth` is unreliable.
    pub ci_warning: bool,
}

impl SimResult {
    pub fn std_error(&self) -> f64 {
        self.ci95_halfwidth / 1.96
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    outages: u64,
    sum_harvested: f64,
    sum_snr: f64,
}

fn run_batch(p: &SystemParams, base: &ChaCha8Rng, start: u64, end: u64, gamma_thr: f64) -> Tally {
    let mut rng = base.clone();
    let mut t = Tally::default();
    let scale = p.theta * p.tau / ((1.0 - p.tau) * p.sigma2);
    for i in start..end {
        rng.set_stream(i);
        rng.set_word_pos(0);
        let v1 = sample(&p.dl, &mut rng);
        let v2 = sample(&p.ul, &mut rng);
        let p_eh = p.eh.harvested_unchecked(p.p_t * v1);
        let snr = scale * p_eh * v2;
        if snr < gamma_thr {
            t.outages += 1;
        }
        t.sum_harvested += p_eh;
        t.sum_snr += snr;
    }
    t
}

/// Estimates outage, throughput and mean harvested power from
/// `cfg.n_samples` independent slots. Works with every EH model.
pub fn simulate(p: &SystemParams, cfg: SimConfig) -> Result<SimResult> {
    p.validate()?;
    if cfg.n_samples == 0 || cfg.batch == 0 {
        return Err(domain("sample count and batch size must be positive"));
    }
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma_thr = p.gamma_thr();
    let n_batches = cfg.n_samples.div_ceil(cfg.batch);

    let tallies: Vec<Tally> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let start = b * cfg.batch;
            let end = (start + cfg.batch).min(cfg.n_samples);
            run_batch(p, &base, start, end, gamma_thr)
        })
        .collect();

    let total = tallies.iter().fold(Tally::default(), |acc, t| Tally {
        outages: acc.outages + t.outages,
        sum_harvested: acc.sum_harvested + t.sum_harvested,
        sum_snr: acc.sum_snr + t.sum_snr,
    });

    let n = cfg.n_samples as f64;
    let outage = total.outages as f64 / n;
    let minority = total.outages.min(cfg.n_samples - total.outages);
    Ok(SimResult {
        n_samples: cfg.n_samples,
        outage,
        ci95_halfwidth: 1.96 * (outage * (1.0 - outage) / n).sqrt(),
        mean_harvested: total.sum_harvested / n,
        mean_snr_db: 10.0 * (total.sum_snr / n).log10(),
        throughput: p.rate * (1.0 - p.tau) * (1.0 - outage),
        ci_warning: minority < 20 || cfg.n_samples < MIN_CI_SAMPLES,
    })
}
