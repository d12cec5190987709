//! Sampling oracle of the physical link: draws `(θ, d)`, applies the FOV
//! clipping, forms `h²` (or the best of two LEDs) and simulates OOK bits.
//!
//! Work is split in fixed chunks, chunk `k` drawing from substream `k` of
//! the caller's stream, so results do not depend on the number of threads.

use std::thread;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::distributions::{DistributionSpec, RandomStream};
use crate::error::{Error, Result};
use crate::law::SquareChannelLaw;
use crate::metrics::snr_linear;
use crate::scenario::Scenario;

const CHUNK: usize = 1 << 16;

/// Sorted samples of `h²` with the fraction of exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    sorted: Vec<f64>,
    zero_fraction: f64,
}

impl EmpiricalLaw {
    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.zero_fraction
    }

    /// Fraction of samples `<= x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// Fraction of samples `< x`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v < x) as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_law(mut samples: Vec<f64>) -> Result<EmpiricalLaw> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if let Some(bad) = samples.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("samples", format!("{bad} is not a finite h² value")));
    }
    samples.sort_by(f64::total_cmp);
    let zeros = samples.partition_point(|v| *v == 0.0);
    Ok(EmpiricalLaw {
        zero_fraction: zeros as f64 / samples.len() as f64,
        sorted: samples,
    })
}

/// Anything with a right-continuous cdf and its left limits.
pub trait CdfSource {
    fn cdf(&self, x: f64) -> f64;
    fn cdf_minus(&self, x: f64) -> f64;
}

impl CdfSource for SquareChannelLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.cdf_fast(x).unwrap_or_else(|_| self.cdf_at(x))
    }

    fn cdf_minus(&self, x: f64) -> f64 {
        if x <= 0.0 || self.point_mass_location() == Some(x) {
            self.cdf_left(x)
        } else {
            self.cdf(x)
        }
    }
}

impl CdfSource for EmpiricalLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.cdf_at(x)
    }

    fn cdf_minus(&self, x: f64) -> f64 {
        self.cdf_left(x)
    }
}

/// Kolmogorov–Smirnov statistic between a reference cdf and a sample,
/// checked on both sides of every distinct sample value so that atoms count.
pub fn ks_distance<L: CdfSource + ?Sized>(law: &L, empirical: &EmpiricalLaw) -> f64 {
    let s = &empirical.sorted;
    let n = s.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        let below = i as f64 / n;
        let upto = j as f64 / n;
        worst = worst
            .max((law.cdf_minus(v) - below).abs())
            .max((law.cdf(v) - upto).abs());
        i = j;
    }
    worst
}

/// Runs `work(chunk_index, len)` over `n` items in fixed chunks, in parallel,
/// and returns the per-chunk results in order.
fn chunked<T: Send>(n: usize, work: impl Fn(u64, usize) -> T + Sync) -> Vec<T> {
    let chunks: Vec<(u64, usize)> = (0..n.div_ceil(CHUNK))
        .map(|k| (k as u64, CHUNK.min(n - k * CHUNK)))
        .collect();
    let threads = thread::available_parallelism().map_or(1, |p| p.get()).min(chunks.len().max(1));
    let mut out: Vec<Option<T>> = (0..chunks.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let work = &work;
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let mine: Vec<(u64, usize)> =
                    chunks.iter().copied().skip(t).step_by(threads).collect();
                scope.spawn(move || {
                    mine.into_iter()
                        .map(|(k, len)| (k, work(k, len)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, v) in h.join().expect("sampling thread panicked") {
                out[k as usize] = Some(v);
            }
        }
    });
    out.into_iter().map(|v| v.expect("every chunk ran")).collect()
}

fn check_count(n: usize, min: usize, field: &'static str) -> Result<()> {
    if n < min {
        Err(Error::invalid(field, format!("need at least {min}, got {n}")))
    } else {
        Ok(())
    }
}

/// `n` independent draws of the physical squared channel.
pub fn sample_sq_channel(
    scenario: &Scenario,
    n: usize,
    stream: &RandomStream,
) -> Result<EmpiricalLaw> {
    check_count(n, 1000, "n")?;
    let location = scenario.location()?;
    let parts = chunked(n, |k, len| {
        let mut sub = stream.substream(k);
        let rng = sub.rng();
        (0..len)
            .map(|_| scenario.draw_gain_sq(rng, &location))
            .collect::<Vec<f64>>()
    });
    empirical_law(parts.concat())
}

/// Bit error rate of OOK measured over `n_bits` simulated bits. Each bit
/// redraws the channel; symbols are `0` and `A = sqrt(2 E_s)` (average
/// energy `E_s`), noise is `N(0, N_0/2)` with `N_0 = 1`, and the receiver
/// knows `h` and slices at `A h / 2`.
pub fn mc_ber(
    scenario: &Scenario,
    snr_db: f64,
    n_bits: usize,
    stream: &RandomStream,
) -> Result<f64> {
    check_count(n_bits, 10_000, "n_bits")?;
    let location = scenario.location()?;
    let amplitude = (2.0 * snr_linear(snr_db)).sqrt();
    let noise = Normal::new(0.0, 0.5f64.sqrt()).expect("fixed noise law");
    let errors: usize = chunked(n_bits, |k, len| {
        let mut sub = stream.substream(k);
        let rng = sub.rng();
        let mut errs = 0usize;
        for _ in 0..len {
            let h = scenario.draw_gain_sq(rng, &location).sqrt();
            let bit: bool = rng.random();
            let sent = if bit { amplitude * h } else { 0.0 };
            let y = sent + noise.sample(rng);
            let decided = y > 0.5 * amplitude * h;
            errs += usize::from(decided != bit);
        }
        errs
    })
    .into_iter()
    .sum();
    Ok(errors as f64 / n_bits as f64)
}

/// Samples of a generator law; used to feed empirical laws.
pub fn draw_many(dist: &DistributionSpec, n: usize, stream: &RandomStream) -> Vec<f64> {
    chunked(n, |k, len| {
        let mut sub = stream.substream(k);
        let rng = sub.rng();
        (0..len).map(|_| dist.draw(rng)).collect::<Vec<f64>>()
    })
    .concat()
}

/// Standard error of a binomial proportion.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{FovMode, LinkGeometry};

    fn single(theta: DistributionSpec, fov: f64) -> Scenario {
        Scenario::SingleFixed {
            theta,
            geometry: LinkGeometry::reference(2.5, fov).unwrap(),
            fov_mode: FovMode::Narrow,
        }
    }

    #[test]
    fn empirical_examples() {
        let e = empirical_law(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(e.zero_fraction(), 0.5);
        assert_eq!(e.cdf_at(0.0), 0.5);
        assert_eq!(e.cdf_at(1.0), 1.0);
        let one = empirical_law(vec![3.0]).unwrap();
        assert_eq!(one.cdf_at(2.999), 0.0);
        assert_eq!(one.cdf_at(3.0), 1.0);
        assert!(matches!(empirical_law(vec![]), Err(Error::Empty(_))));
        assert!(empirical_law(vec![-1.0]).is_err());
    }

    #[test]
    fn uniform_sample_is_close_to_identity() {
        struct Identity;
        impl CdfSource for Identity {
            fn cdf(&self, x: f64) -> f64 {
                x.clamp(0.0, 1.0)
            }
            fn cdf_minus(&self, x: f64) -> f64 {
                self.cdf(x)
            }
        }
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let e = empirical_law(draw_many(&u, 1_000_000, &RandomStream::new(3, 0))).unwrap();
        assert!(ks_distance(&Identity, &e) < 0.002);
    }

    #[test]
    fn identical_step_laws_have_zero_distance() {
        let e = empirical_law(vec![0.0, 1.0, 1.0, 2.5]).unwrap();
        assert_eq!(ks_distance(&e, &e), 0.0);
    }

    #[test]
    fn upright_user_under_the_led() {
        let s = Scenario::SingleFixed {
            theta: DistributionSpec::point(0.0).unwrap(),
            geometry: LinkGeometry::reference(0.0, 60.0).unwrap(),
            fov_mode: FovMode::Narrow,
        };
        let e = sample_sq_channel(&s, 1000, &RandomStream::new(1, 0)).unwrap();
        let want = s.geometry().gain_sq_at(0.0, 0.0);
        assert!(e.samples().iter().all(|v| *v == want));
        assert!((want.sqrt() / 3.5368e-6 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn atom_fraction_and_ks() {
        let s = single(DistributionSpec::uniform(20.0, 40.0).unwrap(), 35.0);
        let e = sample_sq_channel(&s, 1_000_000, &RandomStream::new(11, 0)).unwrap();
        assert!((e.zero_fraction() - 0.25).abs() < 0.0013);
        let law = s.law().unwrap();
        assert!(ks_distance(&law, &e) < 0.005);
        let other = single(DistributionSpec::uniform(20.0, 40.0).unwrap(), 60.0);
        assert!(ks_distance(&other.law().unwrap(), &e) > 0.05);
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = single(DistributionSpec::gaussian(30.0, 20.0).unwrap(), 35.0);
        let a = sample_sq_channel(&s, 200_000, &RandomStream::new(5, 2)).unwrap();
        let b = sample_sq_channel(&s, 200_000, &RandomStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
        let c = sample_sq_channel(&s, 200_000, &RandomStream::new(5, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_dominates_at_low_snr() {
        let s = single(DistributionSpec::uniform(20.0, 40.0).unwrap(), 60.0);
        let n = 100_000;
        let b = mc_ber(&s, -100.0, n, &RandomStream::new(9, 0)).unwrap();
        assert!((b - 0.5).abs() < 3.0 * binomial_sigma(0.5, n));
        assert!(mc_ber(&s, 0.0, 10, &RandomStream::new(9, 0)).is_err());
    }
}
