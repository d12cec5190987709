//! One-dimensional laws for the receiver orientation angle and the
//! horizontal user distance, together with the interval-probability
//! primitives `Δ` ([`interval_prob`]) and `∇` ([`joint_interval_prob`]).
//!
//! Orientation laws are expressed in degrees and location laws in meters;
//! a [`DistributionSpec`] itself is unit-agnostic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardUniform};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{Estimate, Integrator};

/// Number of standard deviations kept when an unbounded support is
/// truncated for numerical integration.
pub const TRUNCATION_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Uniform,
    Gaussian,
    Rayleigh,
    #[serde(rename = "point")]
    PointMass,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, variance: f64 },
    Rayleigh { scale: f64 },
    PointMass { value: f64 },
    /// Sorted sample with a step cdf.
    Empirical { sorted: Vec<f64> },
}

/// A validated one-dimensional law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionLiteral", into = "DistributionLiteral")]
pub struct DistributionSpec {
    law: Law,
}

/// JSON literal form, e.g. `{"kind":"gaussian","mean":30,"variance":20}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionLiteral {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, variance: f64 },
    Rayleigh { scale: f64 },
    Point { value: f64 },
    Empirical { samples: Vec<f64> },
}

impl TryFrom<DistributionLiteral> for DistributionSpec {
    type Error = Error;

    fn try_from(lit: DistributionLiteral) -> Result<Self> {
        match lit {
            DistributionLiteral::Uniform { lo, hi } => Self::uniform(lo, hi),
            DistributionLiteral::Gaussian { mean, variance } => Self::gaussian(mean, variance),
            DistributionLiteral::Rayleigh { scale } => Self::rayleigh(scale),
            DistributionLiteral::Point { value } => Self::point(value),
            DistributionLiteral::Empirical { samples } => Self::empirical(samples),
        }
    }
}

impl From<DistributionSpec> for DistributionLiteral {
    fn from(spec: DistributionSpec) -> Self {
        match spec.law {
            Law::Uniform { lo, hi } => DistributionLiteral::Uniform { lo, hi },
            Law::Gaussian { mean, variance } => DistributionLiteral::Gaussian { mean, variance },
            Law::Rayleigh { scale } => DistributionLiteral::Rayleigh { scale },
            Law::PointMass { value } => DistributionLiteral::Point { value },
            Law::Empirical { sorted } => DistributionLiteral::Empirical { samples: sorted },
        }
    }
}

/// Builds a law from a kind tag and its positional parameters:
/// uniform `[lo, hi]`, gaussian `[mean, variance]`, rayleigh `[scale]`,
/// point `[value]`, empirical `[samples...]`.
pub fn make_distribution(kind: DistributionKind, params: &[f64]) -> Result<DistributionSpec> {
    let need = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::invalid(
                "params",
                format!("{kind:?} takes {n} parameter(s), got {}", params.len()),
            ))
        }
    };
    match kind {
        DistributionKind::Uniform => {
            need(2)?;
            DistributionSpec::uniform(params[0], params[1])
        }
        DistributionKind::Gaussian => {
            need(2)?;
            DistributionSpec::gaussian(params[0], params[1])
        }
        DistributionKind::Rayleigh => {
            need(1)?;
            DistributionSpec::rayleigh(params[0])
        }
        DistributionKind::PointMass => {
            need(1)?;
            DistributionSpec::point(params[0])
        }
        DistributionKind::Empirical => DistributionSpec::empirical(params.to_vec()),
    }
}

fn finite(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {v}")))
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl DistributionSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let lo = finite("lo", lo)?;
        let hi = finite("hi", hi)?;
        if !(lo < hi) {
            return Err(Error::invalid("hi", format!("uniform requires lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { law: Law::Uniform { lo, hi } })
    }

    /// Gaussian law parameterised by its mean and its *variance*.
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        let mean = finite("mean", mean)?;
        let variance = finite("variance", variance)?;
        if !(variance > 0.0) {
            return Err(Error::invalid("variance", format!("must be > 0, got {variance}")));
        }
        Ok(Self { law: Law::Gaussian { mean, variance } })
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        let scale = finite("scale", scale)?;
        if !(scale > 0.0) {
            return Err(Error::invalid("scale", format!("must be > 0, got {scale}")));
        }
        Ok(Self { law: Law::Rayleigh { scale } })
    }

    pub fn point(value: f64) -> Result<Self> {
        let value = finite("value", value)?;
        Ok(Self { law: Law::PointMass { value } })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "empirical law needs at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "samples must be finite"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { law: Law::Empirical { sorted: samples } })
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn kind(&self) -> DistributionKind {
        match self.law {
            Law::Uniform { .. } => DistributionKind::Uniform,
            Law::Gaussian { .. } => DistributionKind::Gaussian,
            Law::Rayleigh { .. } => DistributionKind::Rayleigh,
            Law::PointMass { .. } => DistributionKind::PointMass,
            Law::Empirical { .. } => DistributionKind::Empirical,
        }
    }

    /// Location of the atom for a point-mass law.
    pub fn atom(&self) -> Option<f64> {
        match self.law {
            Law::PointMass { value } => Some(value),
            _ => None,
        }
    }

    /// True for laws with a density (uniform, gaussian, rayleigh).
    pub fn is_continuous(&self) -> bool {
        matches!(
            self.law,
            Law::Uniform { .. } | Law::Gaussian { .. } | Law::Rayleigh { .. }
        )
    }

    /// Closed support `[lo, hi]`; infinite ends for unbounded laws.
    pub fn support(&self) -> (f64, f64) {
        match &self.law {
            Law::Uniform { lo, hi } => (*lo, *hi),
            Law::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Law::Rayleigh { .. } => (0.0, f64::INFINITY),
            Law::PointMass { value } => (*value, *value),
            Law::Empirical { sorted } => (sorted[0], sorted[sorted.len() - 1]),
        }
    }

    /// Support truncated at `TRUNCATION_SIGMAS` for numerical integration.
    pub fn integration_support(&self) -> (f64, f64) {
        match self.law {
            Law::Gaussian { mean, variance } => {
                let s = TRUNCATION_SIGMAS * variance.sqrt();
                (mean - s, mean + s)
            }
            Law::Rayleigh { scale } => (0.0, TRUNCATION_SIGMAS * scale),
            _ => self.support(),
        }
    }

    /// Points where the density is discontinuous or the cdf jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.law {
            Law::Uniform { lo, hi } => vec![*lo, *hi],
            Law::Gaussian { .. } => vec![],
            Law::Rayleigh { .. } => vec![0.0],
            Law::PointMass { value } => vec![*value],
            Law::Empirical { sorted } => sorted.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.law {
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Gaussian { mean, .. } => *mean,
            Law::Rayleigh { scale } => scale * (std::f64::consts::PI / 2.0).sqrt(),
            Law::PointMass { value } => *value,
            Law::Empirical { sorted } => sorted.iter().sum::<f64>() / sorted.len() as f64,
        }
    }

    /// `P{X <= x}`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match &self.law {
            Law::Uniform { lo, hi } => {
                if x <= *lo {
                    0.0
                } else if x >= *hi {
                    1.0
                } else {
                    (x - lo) / (hi - lo)
                }
            }
            Law::Gaussian { mean, variance } => {
                if x == f64::INFINITY {
                    1.0
                } else if x == f64::NEG_INFINITY {
                    0.0
                } else {
                    std_normal_cdf((x - mean) / variance.sqrt())
                }
            }
            Law::Rayleigh { scale } => {
                if x <= 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    1.0
                } else {
                    -(-x * x / (2.0 * scale * scale)).exp_m1()
                }
            }
            Law::PointMass { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Empirical { sorted } => {
                sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
            }
        }
    }

    /// `P{X < x}`; differs from [`cdf_at`](Self::cdf_at) only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.law {
            Law::PointMass { value } => {
                if x > *value {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Empirical { sorted } => {
                sorted.partition_point(|v| *v < x) as f64 / sorted.len() as f64
            }
            _ => self.cdf_at(x),
        }
    }

    /// Density at `x`. A point mass has density 0 off its atom (see
    /// [`atom`](Self::atom)); empirical laws carry no density.
    pub fn pdf_at(&self, x: f64) -> Result<f64> {
        match self.law {
            Law::Empirical { .. } => Err(Error::invalid(
                "kind",
                "empirical laws have a step cdf and no density",
            )),
            _ => Ok(self.density(x)),
        }
    }

    /// Density of the continuous kinds; 0 for point masses and empirical laws.
    pub(crate) fn density(&self, x: f64) -> f64 {
        match self.law {
            Law::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Law::Gaussian { mean, variance } => {
                let z = (x - mean) / variance.sqrt();
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            Law::Rayleigh { scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    let s2 = scale * scale;
                    x / s2 * (-x * x / (2.0 * s2)).exp()
                }
            }
            Law::PointMass { .. } | Law::Empirical { .. } => 0.0,
        }
    }

    /// `Δ(a, b) = P{a < X <= b}`.
    pub fn interval_prob(&self, a: f64, b: f64) -> f64 {
        interval_prob(self, a, b)
    }

    /// `∇(a, b, c, d) = P{a < X <= b, c < X <= d}`.
    pub fn joint_interval_prob(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        joint_interval_prob(self, a, b, c, d)
    }

    /// Draws one value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Uniform { lo, hi } => {
                let u: f64 = rng.sample(StandardUniform);
                lo + (hi - lo) * u
            }
            Law::Gaussian { mean, variance } => {
                // Parameters were validated at construction.
                Normal::new(*mean, variance.sqrt()).map_or(*mean, |n| n.sample(rng))
            }
            Law::Rayleigh { scale } => {
                let u: f64 = rng.sample(StandardUniform);
                scale * (-2.0 * (-u).ln_1p()).sqrt()
            }
            Law::PointMass { value } => *value,
            Law::Empirical { sorted } => sorted[rng.random_range(0..sorted.len())],
        }
    }

    /// Draws `n` values from `stream`.
    pub fn sample(&self, stream: &mut RandomStream, n: usize) -> Vec<f64> {
        let rng = stream.rng();
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// `E[g(X)]`. Continuous laws are integrated over their (truncated)
    /// support split at `breaks` and at the law's own breakpoints; each
    /// panel tolerates `1/sqrt` endpoint singularities of `g`.
    pub fn expect<G: Fn(f64) -> f64>(
        &self,
        g: G,
        breaks: &[f64],
        integrator: &Integrator,
    ) -> Estimate {
        match &self.law {
            Law::PointMass { value } => Estimate {
                value: g(*value),
                error: 0.0,
                converged: true,
                evaluations: 1,
            },
            Law::Empirical { sorted } => Estimate {
                value: sorted.iter().map(|v| g(*v)).sum::<f64>() / sorted.len() as f64,
                error: 0.0,
                converged: true,
                evaluations: sorted.len(),
            },
            _ => {
                let (lo, hi) = self.integration_support();
                let mut all: Vec<f64> = breaks.to_vec();
                all.extend(self.breakpoints());
                if let Law::Gaussian { mean, .. } = self.law {
                    all.push(mean);
                }
                integrator.integrate_singular_breaks(|x| g(x) * self.density(x), lo, hi, &all)
            }
        }
    }
}

/// `Δ(a, b) = P{a < X <= b}`: `F(b) - F(a)` when `a <= b`, else 0.
pub fn interval_prob(dist: &DistributionSpec, a: f64, b: f64) -> f64 {
    if a <= b {
        (dist.cdf_at(b) - dist.cdf_at(a)).max(0.0)
    } else {
        0.0
    }
}

/// `∇(a, b, c, d) = P{a < X <= b, c < X <= d}`.
///
/// Empty intervals and disjoint pairs yield 0; otherwise the intersection is
/// one of `(a,b]`, `(c,d]`, `(a,d]` or `(c,b]` depending on how the ends
/// compare.
pub fn joint_interval_prob(dist: &DistributionSpec, a: f64, b: f64, c: f64, d: f64) -> f64 {
    if a > b || c > d || d <= a || b <= c {
        return 0.0;
    }
    let (lo, hi) = match (c <= a, d > b) {
        (true, true) => (a, b),
        (false, false) => (c, d),
        (true, false) => (a, d),
        (false, true) => (c, b),
    };
    (dist.cdf_at(hi) - dist.cdf_at(lo)).max(0.0)
}

/// Reproducible source of random numbers: one `(seed, stream_id)` pair maps
/// to one ChaCha8 key stream.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream; the same `(self, index)` always yields the
    /// same child regardless of how much `self` has been consumed.
    pub fn substream(&self, index: u64) -> RandomStream {
        let id = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1)));
        RandomStream::new(self.seed, id)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u2040() -> DistributionSpec {
        DistributionSpec::uniform(20.0, 40.0).unwrap()
    }

    fn n3020() -> DistributionSpec {
        DistributionSpec::gaussian(30.0, 20.0).unwrap()
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            DistributionSpec::uniform(40.0, 20.0),
            Err(Error::InvalidParameter { field: "hi", .. })
        ));
        assert!(matches!(
            DistributionSpec::gaussian(0.0, 0.0),
            Err(Error::InvalidParameter { field: "variance", .. })
        ));
        assert!(matches!(
            DistributionSpec::rayleigh(-1.0),
            Err(Error::InvalidParameter { field: "scale", .. })
        ));
        assert!(make_distribution(DistributionKind::Uniform, &[1.0]).is_err());
        assert!(DistributionSpec::empirical(vec![]).is_err());
    }

    #[test]
    fn make_distribution_examples() {
        let u = make_distribution(DistributionKind::Uniform, &[20.0, 40.0]).unwrap();
        assert_eq!(u.support(), (20.0, 40.0));
        let g = make_distribution(DistributionKind::Gaussian, &[30.0, 20.0]).unwrap();
        assert!((1.0 - g.cdf_at(35.0) - 0.1318).abs() < 5e-5);
        let p = make_distribution(DistributionKind::PointMass, &[30.0]).unwrap();
        assert_eq!(p.cdf_at(29.999), 0.0);
        assert_eq!(p.cdf_at(30.0), 1.0);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(u2040().cdf_at(30.0), 0.5);
        // 1 - Q(5/sqrt(20)); Q(1.118034) = 0.131776 from the normal table.
        assert!((n3020().cdf_at(35.0) - 0.868224).abs() < 1e-6);
        for d in [u2040(), n3020(), DistributionSpec::rayleigh(1.0).unwrap()] {
            assert_eq!(d.cdf_at(f64::NEG_INFINITY), 0.0);
            assert_eq!(d.cdf_at(f64::INFINITY), 1.0);
        }
    }

    #[test]
    fn pdf_examples() {
        assert!((u2040().pdf_at(30.0).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(u2040().pdf_at(50.0).unwrap(), 0.0);
        let r = DistributionSpec::rayleigh(1.0).unwrap();
        assert!((r.pdf_at(1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((r.pdf_at(1.0).unwrap() - 0.6065).abs() < 1e-4);
        let e = DistributionSpec::empirical(vec![1.0, 2.0]).unwrap();
        assert!(e.pdf_at(1.0).is_err());
        assert_eq!(DistributionSpec::point(3.0).unwrap().pdf_at(3.0).unwrap(), 0.0);
    }

    #[test]
    fn pdf_matches_cdf_finite_differences() {
        let h = 1e-5;
        for d in [u2040(), n3020(), DistributionSpec::rayleigh(2.0).unwrap()] {
            for x in [0.7, 1.9, 25.0, 31.3, 38.0] {
                let fd = (d.cdf_at(x + h) - d.cdf_at(x - h)) / (2.0 * h);
                let pdf = d.pdf_at(x).unwrap();
                assert!((fd - pdf).abs() <= 1e-6 * pdf.max(1e-3), "{d:?} at {x}: {fd} vs {pdf}");
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let q = Integrator::default().with_tolerance(1e-14, 1e-12);
        for d in [u2040(), n3020(), DistributionSpec::rayleigh(1.0).unwrap()] {
            let mass = d.expect(|_| 1.0, &[], &q).value;
            assert!((mass - 1.0).abs() < 1e-9, "{d:?}: {mass}");
        }
    }

    #[test]
    fn interval_prob_examples() {
        let u = u2040();
        assert_eq!(u.interval_prob(25.0, 35.0), 0.5);
        assert_eq!(u.interval_prob(35.0, 25.0), 0.0);
        let tail = n3020().interval_prob(35.0, f64::INFINITY);
        assert!((tail - 0.1318).abs() < 5e-5);
    }

    #[test]
    fn joint_interval_prob_examples() {
        let u = u2040();
        assert!((u.joint_interval_prob(0.0, 30.0, 20.0, 40.0) - 0.5).abs() < 1e-15);
        assert_eq!(n3020().joint_interval_prob(0.0, 10.0, 20.0, 30.0), 0.0);
        assert!((u.joint_interval_prob(20.0, 40.0, 25.0, 35.0) - 0.5).abs() < 1e-15);
        // each branch of the case table
        assert!((u.joint_interval_prob(22.0, 30.0, 20.0, 35.0) - 0.4).abs() < 1e-15);
        assert!((u.joint_interval_prob(22.0, 30.0, 20.0, 26.0) - 0.2).abs() < 1e-15);
        assert!((u.joint_interval_prob(22.0, 30.0, 24.0, 35.0) - 0.3).abs() < 1e-15);
        assert_eq!(u.joint_interval_prob(30.0, 22.0, 20.0, 40.0), 0.0);
    }

    #[test]
    fn json_literals_round_trip() {
        let lits = [
            r#"{"kind":"uniform","lo":20,"hi":40}"#,
            r#"{"kind":"gaussian","mean":30,"variance":20}"#,
            r#"{"kind":"rayleigh","scale":1}"#,
            r#"{"kind":"point","value":30}"#,
        ];
        for lit in lits {
            let d: DistributionSpec = serde_json::from_str(lit).unwrap();
            let back: DistributionSpec =
                serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
            assert_eq!(d, back);
        }
        let bad: std::result::Result<DistributionSpec, _> =
            serde_json::from_str(r#"{"kind":"uniform","lo":40,"hi":20}"#);
        assert!(bad.unwrap_err().to_string().contains("hi"));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let d = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let a = d.sample(&mut RandomStream::new(7, 0), 16);
        let b = d.sample(&mut RandomStream::new(7, 0), 16);
        let c = d.sample(&mut RandomStream::new(7, 1), 16);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let root = RandomStream::new(7, 3);
        let mut consumed = root.clone();
        consumed.rng().random::<u64>();
        assert_eq!(
            d.sample(&mut root.substream(5), 4),
            d.sample(&mut consumed.substream(5), 4)
        );
    }

    #[test]
    fn point_mass_samples_are_constant() {
        let p = DistributionSpec::point(30.0).unwrap();
        assert_eq!(p.sample(&mut RandomStream::new(1, 0), 5), vec![30.0; 5]);
    }

    #[test]
    fn gaussian_sample_mean() {
        let g = n3020();
        let xs = g.sample(&mut RandomStream::new(11, 0), 1_000_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // 3 sigma / sqrt(n) = 3 * 4.472 / 1000
        assert!((mean - 30.0).abs() < 0.0135, "{mean}");
    }
}
