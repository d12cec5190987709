//! A link scenario bundles the geometry with the generator laws of `θ` and
//! `d`. It can build the analytical law of the squared channel, draw the
//! physical channel, and average a function of `h²` over the generators
//! directly.

use std::cell::Cell;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{FovMode, LinkGeometry};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::law::SquareChannelLaw;
use crate::multi_led::{elevations, incidence};
use crate::quadrature::{Estimate, Integrator};
use crate::single_led::{law_fixed_location, law_random_location};
use crate::two_led::{law_fixed_location_two, law_random_location_two};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    /// One LED, user at `geometry.d()`.
    SingleFixed {
        theta: DistributionSpec,
        geometry: LinkGeometry,
        fov_mode: FovMode,
    },
    /// One LED, random horizontal distance.
    SingleRandom {
        theta: DistributionSpec,
        d: DistributionSpec,
        geometry: LinkGeometry,
    },
    /// Two LEDs `geometry.spacing()` apart, user at `geometry.d()` from LED 1.
    TwoLedFixed {
        theta: DistributionSpec,
        geometry: LinkGeometry,
    },
    /// Two LEDs, random location between them.
    TwoLedRandom {
        theta: DistributionSpec,
        d: DistributionSpec,
        geometry: LinkGeometry,
    },
}

impl Scenario {
    pub fn geometry(&self) -> &LinkGeometry {
        match self {
            Scenario::SingleFixed { geometry, .. }
            | Scenario::SingleRandom { geometry, .. }
            | Scenario::TwoLedFixed { geometry, .. }
            | Scenario::TwoLedRandom { geometry, .. } => geometry,
        }
    }

    pub fn theta(&self) -> &DistributionSpec {
        match self {
            Scenario::SingleFixed { theta, .. }
            | Scenario::SingleRandom { theta, .. }
            | Scenario::TwoLedFixed { theta, .. }
            | Scenario::TwoLedRandom { theta, .. } => theta,
        }
    }

    /// Location law; a point at `geometry.d()` for the fixed scenarios.
    pub fn location(&self) -> Result<DistributionSpec> {
        match self {
            Scenario::SingleRandom { d, .. } | Scenario::TwoLedRandom { d, .. } => Ok(d.clone()),
            _ => DistributionSpec::point(self.geometry().d()),
        }
    }

    pub fn is_two_led(&self) -> bool {
        matches!(self, Scenario::TwoLedFixed { .. } | Scenario::TwoLedRandom { .. })
    }

    /// Analytical law of `h²` (or `h²_eff`).
    pub fn law(&self) -> Result<SquareChannelLaw> {
        match self {
            Scenario::SingleFixed {
                theta,
                geometry,
                fov_mode,
            } => law_fixed_location(theta, geometry, *fov_mode),
            Scenario::SingleRandom { theta, d, geometry } => {
                law_random_location(theta, d, geometry)
            }
            Scenario::TwoLedFixed { theta, geometry } => {
                law_fixed_location_two(theta, geometry, geometry.d())
            }
            Scenario::TwoLedRandom { theta, d, geometry } => {
                law_random_location_two(theta, d, geometry)
            }
        }
    }

    /// Physical squared channel for one orientation and location. With two
    /// LEDs the receiver normal sits at `θ` from the direction of LED 1 and
    /// leans towards LED 2, and the stronger LED serves the user.
    pub fn gain_sq(&self, theta: f64, d: f64) -> f64 {
        let g = self.geometry();
        if !self.is_two_led() {
            return g.gain_sq_at(d, theta);
        }
        let spacing = g.spacing().unwrap_or(0.0);
        let alpha = elevations(&[0.0, spacing], d, g.ell());
        let phi = alpha[0] + theta;
        let h1 = g.gain_sq_at(d, incidence(alpha[0], phi));
        let h2 = g.gain_sq_at(spacing - d, incidence(alpha[1], phi));
        h1.max(h2)
    }

    /// One independent draw of the physical squared channel.
    pub fn draw_gain_sq<R: Rng + ?Sized>(&self, rng: &mut R, location: &DistributionSpec) -> f64 {
        let theta = self.theta().draw(rng);
        let d = location.draw(rng);
        self.gain_sq(theta, d)
    }

    /// `E[g(h²)]` by integrating over the generators `θ` and `d` rather than
    /// through the law of `h²`.
    pub fn expect_over_generators(
        &self,
        g: impl Fn(f64) -> f64,
        integrator: &Integrator,
    ) -> Result<Estimate> {
        let geometry = self.geometry();
        let fov = geometry.theta_fov();
        let location = self.location()?;
        let theta = self.theta();
        let inner = |s: f64| {
            let mut breaks = vec![-fov, fov];
            if self.is_two_led() {
                let spacing = geometry.spacing().unwrap_or(0.0);
                let alpha = elevations(&[0.0, spacing], s, geometry.ell());
                let phi = alpha[1] - alpha[0];
                breaks.extend([phi - fov, phi + fov, phi / 2.0]);
            }
            theta.expect(|t| g(self.gain_sq(t, s)), &breaks, integrator)
        };
        let converged = Cell::new(true);
        let evaluations = Cell::new(0);
        let outer = location.expect(
            |s| {
                let e = inner(s);
                converged.set(converged.get() && e.converged);
                evaluations.set(evaluations.get() + e.evaluations);
                e.value
            },
            &[],
            integrator,
        );
        if !converged.get() {
            return Err(Error::Numeric("inner generator integral did not converge".into()));
        }
        Ok(Estimate {
            evaluations: outer.evaluations + evaluations.get(),
            ..outer
        })
    }
}
