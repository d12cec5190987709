//! Average bit error rate of OOK and outage probability for any law of the
//! squared channel.
//!
//! With `s = E_s/N_0` the BER is `E[Q(sqrt(s h²))]`. Rather than
//! integrating against the density, which carries inverse square-root
//! singularities and an atom, we integrate by parts against the cdf in
//! `t = sqrt(x)`:
//!
//! ```text
//! P_e = Q(sqrt(s x_hi)) + sqrt(s / 2π) ∫₀^sqrt(x_hi) F(t²) exp(-s t² / 2) dt
//! ```
//!
//! The integrand is bounded, the atom is picked up through `F(0) = c_δ`, and
//! at high SNR the Gaussian factor confines the work to `t ≲ 40/sqrt(s)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::law::SquareChannelLaw;
use crate::quadrature::{Integrator, Rule, Tolerance};
use crate::scenario::Scenario;

/// Relative accuracy of a BER value.
pub const BER_REL_TOL: f64 = 1e-9;

/// Absolute floor below which BER values are not refined.
pub const BER_ABS_FLOOR: f64 = 1e-300;

/// `Q(x) = P{N(0,1) > x}`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn snr_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub snr_db: Vec<f64>,
    pub ber: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCurve {
    pub thresholds: Vec<f64>,
    pub outage: Vec<f64>,
}

fn ber_integrator() -> Integrator {
    Integrator::new(Rule::Gk21, Tolerance::new(BER_ABS_FLOOR, BER_REL_TOL))
}

/// Average BER of OOK with coherent detection over the law of `h²`.
pub fn ber_of_law(law: &SquareChannelLaw, snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() {
        return Err(Error::Domain("SNR is NaN".into()));
    }
    let s = snr_linear(snr_db);
    if let Some(x0) = law.point_mass_location() {
        return Ok(q_function((s * x0).sqrt()));
    }
    let x_hi = law.upper();
    let t_hi = x_hi.sqrt();
    let mut breaks: Vec<f64> = law.singular_points().iter().map(|x| x.sqrt()).collect();
    breaks.extend([1.0, 4.0, 8.0, 16.0, 38.0].map(|c| c / s.sqrt()));
    breaks.retain(|t| *t > 0.0 && *t < t_hi);
    let cdf_error = std::cell::Cell::new(None);
    let est = ber_integrator().integrate_breaks(
        |t| {
            let w = (-0.5 * s * t * t).exp();
            if w == 0.0 {
                return 0.0;
            }
            match law.cdf_fast(t * t) {
                Ok(f) => f * w,
                Err(e) => {
                    cdf_error.set(Some(e.to_string()));
                    0.0
                }
            }
        },
        0.0,
        t_hi,
        &breaks,
    );
    if let Some(msg) = cdf_error.take() {
        return Err(Error::Numeric(msg));
    }
    let tail = (s / (2.0 * PI)).sqrt() * est.require(BER_REL_TOL * 10.0)?;
    Ok((q_function((s * x_hi).sqrt()) + tail).clamp(0.0, 0.5))
}

/// BER over a grid; the curve must come out non-increasing.
pub fn ber_curve(law: &SquareChannelLaw, snr_db_grid: &[f64]) -> Result<BerCurve> {
    if snr_db_grid.is_empty() {
        return Err(Error::Empty("SNR grid"));
    }
    if snr_db_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("snr_db", "grid must be strictly increasing"));
    }
    let ber = snr_db_grid
        .iter()
        .map(|&snr| ber_of_law(law, snr))
        .collect::<Result<Vec<_>>>()?;
    for (w, snr) in ber.windows(2).zip(snr_db_grid) {
        if w[1] > w[0] * (1.0 + 1e-7) + 1e-300 {
            return Err(Error::Numeric(format!(
                "BER rises from {:.6e} to {:.6e} after {snr} dB",
                w[0], w[1]
            )));
        }
    }
    Ok(BerCurve {
        snr_db: snr_db_grid.to_vec(),
        ber,
    })
}

/// SNR in dB at which the BER falls to `target`, by bisection on
/// `[lo_db, hi_db]`.
pub fn snr_for_ber(law: &SquareChannelLaw, target: f64, lo_db: f64, hi_db: f64) -> Result<f64> {
    let f = |snr: f64| ber_of_law(law, snr).map(|b| b - target);
    let (mut a, mut b) = (lo_db, hi_db);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::Domain(format!(
            "BER {target:e} is not crossed on [{lo_db}, {hi_db}] dB"
        )));
    }
    while b - a > 1e-9 {
        let mid = 0.5 * (a + b);
        if f(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// BER averaged over `θ` and `d` directly, without the law of `h²`.
pub fn ber_over_generators(scenario: &Scenario, snr_db: f64) -> Result<f64> {
    let s = snr_linear(snr_db);
    let q = Integrator::new(Rule::Gk21, Tolerance::new(1e-300, 1e-10));
    let est = scenario.expect_over_generators(|h2| q_function((s * h2).sqrt()), &q)?;
    est.require(1e-8)
}

/// `P{h² <= t}` on a grid of thresholds.
pub fn outage_of_law(law: &SquareChannelLaw, threshold_grid: &[f64]) -> Result<OutageCurve> {
    if threshold_grid.is_empty() {
        return Err(Error::Empty("threshold grid"));
    }
    if let Some(bad) = threshold_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::invalid("threshold", format!("{bad} is negative")));
    }
    let outage = threshold_grid
        .iter()
        .map(|&t| law.try_cdf_at(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutageCurve {
        thresholds: threshold_grid.to_vec(),
        outage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{FovMode, LinkGeometry};
    use crate::distributions::DistributionSpec;
    use crate::single_led::law_fixed_location;

    #[test]
    fn q_examples() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        assert!((q_function(5.0 / 20f64.sqrt()) - 0.131_776).abs() < 1e-5);
        assert!((q_function(1.1180) - 0.13178).abs() < 1e-5);
        for x in [0.3, 1.0, 2.5, 7.0] {
            assert!((q_function(-x) - (1.0 - q_function(x))).abs() < 1e-15);
            assert!(q_function(x) < q_function(x - 0.01));
        }
    }

    fn fixed(theta: DistributionSpec, fov: f64) -> SquareChannelLaw {
        let g = LinkGeometry::reference(2.5, fov).unwrap();
        law_fixed_location(&theta, &g, FovMode::Narrow).unwrap()
    }

    #[test]
    fn ber_limits() {
        let law = fixed(DistributionSpec::uniform(20.0, 40.0).unwrap(), 35.0);
        assert!((ber_of_law(&law, -200.0).unwrap() - 0.5).abs() < 1e-12);
        let floor = ber_of_law(&law, 150.0).unwrap();
        assert!((floor - 0.125).abs() < 1e-3, "{floor}");
        assert!(floor >= 0.125);
    }

    #[test]
    fn point_law_ber_is_a_q_value() {
        let law = fixed(DistributionSpec::point(30.0).unwrap(), 35.0);
        let x0 = law.point_mass_location().unwrap();
        for snr in [100.0, 120.0, 130.0] {
            let want = q_function((snr_linear(snr) * x0).sqrt());
            assert_eq!(ber_of_law(&law, snr).unwrap(), want);
        }
    }

    #[test]
    fn ber_matches_the_density_form() {
        // Direct E[Q(sqrt(s x))] against the density plus the atom.
        let law = fixed(DistributionSpec::gaussian(30.0, 20.0).unwrap(), 35.0);
        let q = Integrator::new(Rule::Gk21, Tolerance::new(0.0, 1e-12));
        let (lo, hi) = law.support();
        for snr in [110.0, 120.0, 125.0, 130.0] {
            let s = snr_linear(snr);
            let cont = q
                .integrate_singular_breaks(
                    |x| q_function((s * x).sqrt()) * law.pdf_at(x),
                    lo,
                    hi,
                    law.singular_points(),
                )
                .value;
            let want = 0.5 * law.atom_mass() + cont;
            let got = ber_of_law(&law, snr).unwrap();
            assert!((got / want - 1.0).abs() < 1e-8, "{snr}: {got} vs {want}");
        }
    }

    #[test]
    fn curve_is_monotone_and_floored() {
        let law = fixed(DistributionSpec::uniform(20.0, 40.0).unwrap(), 35.0);
        let grid: Vec<f64> = (0..=30).map(|k| 5.0 * k as f64).collect();
        let curve = ber_curve(&law, &grid).unwrap();
        assert!(curve.ber.iter().all(|b| *b >= 0.125 - 1e-15 && *b <= 0.5));
        assert!(ber_curve(&law, &[]).is_err());
        assert!(ber_curve(&law, &[3.0, 1.0]).is_err());
    }

    #[test]
    fn wide_fov_curve_keeps_falling() {
        let law = fixed(DistributionSpec::uniform(20.0, 40.0).unwrap(), 60.0);
        let grid: Vec<f64> = (0..=26).map(|k| 5.0 * k as f64).collect();
        let curve = ber_curve(&law, &grid).unwrap();
        assert!(curve.ber.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn upright_user_under_the_led_is_best() {
        let g0 = LinkGeometry::reference(0.0, 60.0).unwrap();
        let best = law_fixed_location(&DistributionSpec::point(0.0).unwrap(), &g0, FovMode::Narrow)
            .unwrap();
        for (t, d) in [(10.0, 0.0), (0.0, 1.0), (30.0, 2.5)] {
            let g = LinkGeometry::reference(d, 60.0).unwrap();
            let other =
                law_fixed_location(&DistributionSpec::point(t).unwrap(), &g, FovMode::Narrow)
                    .unwrap();
            for snr in [100.0, 115.0, 130.0] {
                assert!(ber_of_law(&best, snr).unwrap() < ber_of_law(&other, snr).unwrap());
            }
        }
    }

    #[test]
    fn outage_examples() {
        let law = fixed(DistributionSpec::uniform(20.0, 40.0).unwrap(), 35.0);
        let hi = law.upper();
        let o = outage_of_law(&law, &[0.0, hi, 2.0 * hi]).unwrap();
        assert_eq!(o.outage, vec![0.25, 1.0, 1.0]);
        assert!(outage_of_law(&law, &[-1.0]).is_err());
        assert!(outage_of_law(&law, &[]).is_err());
    }

    #[test]
    fn low_fov_outage_is_much_higher() {
        let th = DistributionSpec::gaussian(30.0, 20.0).unwrap();
        let narrow = fixed(th.clone(), 35.0);
        let wide = fixed(th, 60.0);
        let hi = narrow.upper();
        let ratio = (1..200)
            .map(|k| {
                let t = hi * k as f64 / 200.0;
                narrow.cdf_at(t) / wide.cdf_at(t).max(1e-300)
            })
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max);
        assert!(ratio >= 5.0, "{ratio}");
    }
}
