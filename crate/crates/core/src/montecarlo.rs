//! Channel-realization sampler and protocol replay for empirical outage.
//!
//! A link fails when its drawn power gain `g` satisfies
//! `g d^{-β} p < (2^{α0/B} - 1) N0 B`, which is the capacity condition
//! rearranged so that no logarithm is taken per trial. Trials are split
//! into fixed chunks, each with its own position in the random stream, so
//! results do not depend on how chunks are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{total_energy, LinkParams, Policy, ScenarioConfig};
use crate::numeric::wilson_interval;

/// Trials per independently seeded chunk.
pub const CHUNK_TRIALS: u64 = 1 << 16;

/// Normal quantile of the reported 95% intervals.
pub const Z_95: f64 = 1.959963984540054;

const CHUNK_BITS: u32 = 20;
const CHUNK_WORDS_BITS: u32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Generator for one chunk of one period, positioned in a disjoint
    /// region of the stream for this seed and stream id.
    fn chunk_rng(&self, period: usize, chunk: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        let block = ((period as u128) << CHUNK_BITS) | chunk as u128;
        rng.set_word_pos(block << CHUNK_WORDS_BITS);
        rng
    }
}

fn gain_distribution(omega: f64, m: f64) -> Result<Gamma<f64>> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "omega must be positive, got {omega}"
        )));
    }
    if !(m >= 0.5 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fading parameter m must be >= 0.5, got {m}"
        )));
    }
    Gamma::new(m, omega / m).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// One draw of `|h|^2` for Nakagami-m fading with mean power `omega`.
pub fn sample_channel_power_gain<R: Rng + ?Sized>(omega: f64, m: f64, rng: &mut R) -> Result<f64> {
    Ok(gain_distribution(omega, m)?.sample(rng))
}

/// Result of one two-hop transmission. Bit j of a set marks relay j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Relays that decoded every user's message.
    pub decoded_set: u32,
    /// Decoding relays whose forward reached the destination.
    pub forwarded_set: u32,
    /// At least as many forwards as users, so all messages are recovered.
    pub success: bool,
}

impl TrialOutcome {
    pub fn decoded_relays(&self) -> Vec<usize> {
        crate::outage::members(self.decoded_set).collect()
    }

    pub fn forwarded_relays(&self) -> Vec<usize> {
        crate::outage::members(self.forwarded_set).collect()
    }
}

struct SimLink {
    gain: Gamma<f64>,
    /// Smallest gain that clears the rate at the link's power; infinite for
    /// a silent transmitter.
    threshold: f64,
}

impl SimLink {
    fn new(link: &LinkParams, p: f64) -> Result<Self> {
        let required = (link.alpha0 / link.bandwidth * std::f64::consts::LN_2).exp_m1()
            * link.n0
            * link.bandwidth;
        let threshold = if p > 0.0 {
            required / (link.distance.powf(-link.exponent) * p)
        } else {
            f64::INFINITY
        };
        Ok(SimLink {
            gain: gain_distribution(link.omega, link.m)?,
            threshold,
        })
    }

    fn succeeds<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.gain.sample(rng) >= self.threshold
    }
}

/// Links of one period with the powers already applied.
struct PeriodSim {
    users: usize,
    uplinks: Vec<Vec<SimLink>>,
    downlinks: Vec<SimLink>,
}

impl PeriodSim {
    fn new(config: &ScenarioConfig, p_u: &[f64], p_r: &[f64]) -> Result<Self> {
        if p_u.len() != config.users {
            return Err(Error::dims("user power vector", config.users, p_u.len()));
        }
        if p_r.len() != config.relays {
            return Err(Error::dims("relay power vector", config.relays, p_r.len()));
        }
        if config.relays > 32 {
            return Err(Error::TooManyRelays {
                relays: config.relays,
                limit: 32,
            });
        }
        let uplinks = (0..config.relays)
            .map(|j| {
                (0..config.users)
                    .map(|i| SimLink::new(&config.user_link(i, j), p_u[i]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let downlinks = (0..config.relays)
            .map(|j| SimLink::new(&config.relay_link(j), p_r[j]))
            .collect::<Result<Vec<_>>>()?;
        Ok(PeriodSim {
            users: config.users,
            uplinks,
            downlinks,
        })
    }

    fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialOutcome {
        let mut decoded = 0u32;
        let mut forwarded = 0u32;
        for (j, links) in self.uplinks.iter().enumerate() {
            // every link is drawn so the stream use per trial is fixed
            let mut all = true;
            for link in links {
                all &= link.succeeds(rng);
            }
            let forward_ok = self.downlinks[j].succeeds(rng);
            if all {
                decoded |= 1 << j;
                if forward_ok {
                    forwarded |= 1 << j;
                }
            }
        }
        TrialOutcome {
            decoded_set: decoded,
            forwarded_set: forwarded,
            success: forwarded.count_ones() as usize >= self.users,
        }
    }
}

/// Replays one period of the protocol under one channel realization.
pub fn simulate_period<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    p_u: &[f64],
    p_r: &[f64],
    rng: &mut R,
) -> Result<TrialOutcome> {
    Ok(PeriodSim::new(config, p_u, p_r)?.run(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub failures: u64,
    pub pr_out: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub trials: u64,
    pub rng: RngSpec,
    pub periods: Vec<PeriodEstimate>,
    /// Delivered bits per trial averaged over trials, divided by the
    /// policy's total energy, bits/J.
    pub ee_empirical: f64,
}

fn count_failures(
    sim: &PeriodSim,
    rng: RngSpec,
    period: usize,
    trials: u64,
    parallel: bool,
) -> u64 {
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let run_chunk = |c: u64| -> u64 {
        let mut r = rng.chunk_rng(period, c);
        let n = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
        (0..n).filter(|_| !sim.run(&mut r).success).count() as u64
    };
    if parallel {
        (0..chunks).into_par_iter().map(run_chunk).sum()
    } else {
        (0..chunks).map(run_chunk).sum()
    }
}

fn estimate(
    config: &ScenarioConfig,
    policy: &Policy,
    trials: u64,
    rng: RngSpec,
    parallel: bool,
) -> Result<OutageEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    config.validate()?;
    policy.check_dims(config)?;
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    if chunks >= 1 << CHUNK_BITS || config.periods >= 1 << (68 - CHUNK_BITS - CHUNK_WORDS_BITS) {
        return Err(Error::InvalidArgument(
            "too many trials or periods for one random stream".into(),
        ));
    }
    let mut periods = Vec::with_capacity(config.periods);
    for k in 0..config.periods {
        let sim = PeriodSim::new(config, &policy.user_powers(k), &policy.relay_powers(k))?;
        let failures = count_failures(&sim, rng, k, trials, parallel);
        let (ci_low, ci_high) = wilson_interval(failures, trials, Z_95);
        periods.push(PeriodEstimate {
            failures,
            pr_out: failures as f64 / trials as f64,
            ci_low,
            ci_high,
        });
    }
    let energy = total_energy(config, policy)?;
    let delivered: f64 = periods
        .iter()
        .map(|p| (trials - p.failures) as f64 / trials as f64 * config.bits_per_period())
        .sum();
    let ee_empirical = if energy > 0.0 {
        delivered / energy
    } else {
        0.0
    };
    Ok(OutageEstimate {
        trials,
        rng,
        periods,
        ee_empirical,
    })
}

/// Empirical per-period outage of a network-coded policy with Wilson 95%
/// intervals. Chunks run in parallel; counts are exact integers, so the
/// result is the same for any thread count.
pub fn estimate_outage(
    config: &ScenarioConfig,
    policy: &Policy,
    trials: u64,
    rng: RngSpec,
) -> Result<OutageEstimate> {
    estimate(config, policy, trials, rng, true)
}

/// Same as [`estimate_outage`] on the calling thread only.
pub fn estimate_outage_serial(
    config: &ScenarioConfig,
    policy: &Policy,
    trials: u64,
    rng: RngSpec,
) -> Result<OutageEstimate> {
    estimate(config, policy, trials, rng, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::regularized_lower_gamma;

    #[test]
    fn rayleigh_gain_has_mean_omega() {
        let mut rng = RngSpec::new(7, 0).rng();
        let n = 1_000_000;
        let (omega, m) = (2.5, 1.0);
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_channel_power_gain(omega, m, &mut rng).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sigma = omega / (n as f64).sqrt();
        assert!((mean - omega).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn gain_variance_and_cdf_match_gamma() {
        let mut rng = RngSpec::new(11, 3).rng();
        let n = 1_000_000u64;
        let (omega, m) = (1.7, 3.0);
        let b = 1.2;
        let t = b * omega / m;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_channel_power_gain(omega, m, &mut rng).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // fourth central moment of a gamma variable: 3 k (k + 2) θ^4
        let theta = omega / m;
        let mu4 = 3.0 * m * (m + 2.0) * theta.powi(4);
        let target = omega * omega / m;
        let var_sigma = ((mu4 - target * target) / n as f64).sqrt();
        assert!((var - target).abs() < 3.0 * var_sigma, "{var} vs {target}");
        let below = xs.iter().filter(|x| **x < t).count() as f64 / n as f64;
        let p = regularized_lower_gamma(m, b);
        assert!((below - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn invalid_sampler_parameters() {
        let mut rng = RngSpec::new(0, 0).rng();
        assert!(sample_channel_power_gain(0.0, 1.0, &mut rng).is_err());
        assert!(sample_channel_power_gain(1.0, 0.4, &mut rng).is_err());
    }

    #[test]
    fn extreme_powers() {
        let c = ScenarioConfig::bundled();
        let mut rng = RngSpec::new(1, 0).rng();
        for _ in 0..1000 {
            assert!(
                simulate_period(&c, &[1e12; 2], &[1e12; 4], &mut rng)
                    .unwrap()
                    .success
            );
            assert!(
                !simulate_period(&c, &[1e-9; 2], &[1e-9; 4], &mut rng)
                    .unwrap()
                    .success
            );
        }
    }

    #[test]
    fn forwarded_is_subset_of_decoded() {
        let c = ScenarioConfig::bundled();
        let mut rng = RngSpec::new(5, 0).rng();
        for _ in 0..10_000 {
            let t = simulate_period(&c, &[0.002, 0.002], &[0.0005; 4], &mut rng).unwrap();
            assert_eq!(t.forwarded_set & !t.decoded_set, 0);
            assert_eq!(t.success, t.forwarded_relays().len() >= 2);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let c = ScenarioConfig::bundled();
        let p = Policy::for_config(&c);
        assert!(estimate_outage(&c, &p, 0, RngSpec::new(0, 0)).is_err());
    }
}
