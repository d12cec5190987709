//! Square-channel laws for one LED.
//!
//! With `u = cos²θ` the normalised squared gain, a fixed location gives
//! `h² = c · u` for the deterministic `c = h_c² h_d²`. Writing
//! `z(u) = ½ acos(2u - 1)`,
//!
//! ```text
//! F_U(u) = 1 - F_θ(Θ) + c_θ Δ_θ(z(u), Θ)
//! f_U(u) = c_θ f_θ(z(u)) / sqrt(4u(1 - u)),    cos²Θ <= u < 1
//! ```
//!
//! A random location multiplies `U` by the independent `Y = h_d²(d)`; that
//! product is averaged over `d` directly, so no `1/y` kernel appears.

use std::f64::consts::PI;

use crate::channel::{FovMode, LinkGeometry};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::law::{LawModel, LawParts, SquareChannelLaw};
use crate::quadrature::{Estimate, Integrator, Rule, Tolerance};

/// Probability below which the wide-FOV and non-negative-angle assumptions
/// are accepted.
pub const ASSUMPTION_SLACK: f64 = 1e-6;

const DEG: f64 = 180.0 / PI;

pub(crate) fn cos_sq_deg(theta: f64) -> f64 {
    0.5 * (1.0 + (2.0 * theta).to_radians().cos())
}

/// `z(u) = ½ acos(2u - 1)` in degrees, with `u` clamped to `[0, 1]`.
pub(crate) fn z_of(u: f64) -> f64 {
    0.5 * (2.0 * u.clamp(0.0, 1.0) - 1.0).acos() * DEG
}

pub(crate) fn require_analytic(dist: &DistributionSpec, field: &'static str) -> Result<()> {
    if dist.is_continuous() || dist.atom().is_some() {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            "empirical laws are only accepted by the Monte Carlo oracle",
        ))
    }
}

pub(crate) fn negative_angle_warning(theta: &DistributionSpec) -> Vec<String> {
    let neg = theta.cdf_left(0.0);
    if neg > ASSUMPTION_SLACK {
        vec![format!(
            "P{{theta < 0}} = {neg:.3e}; the single-LED formulas assume non-negative angles"
        )]
    } else {
        Vec::new()
    }
}

/// Law of the normalised squared gain `U = cos²θ · rect(θ/Θ)`.
#[derive(Debug, Clone)]
pub(crate) struct OrientationLaw {
    theta: DistributionSpec,
    limit: f64,
    atom: f64,
    c_theta: f64,
    u_range: (f64, f64),
}

impl OrientationLaw {
    pub(crate) fn new(theta: &DistributionSpec, fov: f64, mode: FovMode) -> Result<Self> {
        let limit = match mode {
            FovMode::Narrow => fov,
            FovMode::Wide => 90.0,
        };
        let atom = match mode {
            FovMode::Narrow => 1.0 - theta.cdf_at(fov),
            FovMode::Wide => 0.0,
        };
        let (lo, hi) = theta.integration_support();
        let (a, b) = (lo.max(0.0), hi.min(limit));
        if !(b > a) {
            return Err(Error::Precondition(format!(
                "orientation law puts no mass on [0, {limit}] degrees"
            )));
        }
        let q = Integrator::new(Rule::Gk21, Tolerance::new(1e-16, 1e-13));
        let mass = q
            .integrate_breaks(|t| theta.density(t), a, b, &theta.breakpoints())
            .require(1e-12)?;
        Ok(Self {
            theta: theta.clone(),
            limit,
            atom,
            c_theta: (1.0 - atom) / mass,
            u_range: (cos_sq_deg(b), cos_sq_deg(a)),
        })
    }

    pub(crate) fn atom(&self) -> f64 {
        self.atom
    }

    pub(crate) fn c_theta(&self) -> f64 {
        self.c_theta
    }

    pub(crate) fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    pub(crate) fn cdf(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            let z = z_of(u);
            (self.atom + self.c_theta * self.theta.interval_prob(z, self.limit)).min(1.0)
        }
    }

    pub(crate) fn pdf(&self, u: f64) -> f64 {
        if !(u > 0.0 && u < 1.0) {
            return 0.0;
        }
        let z = z_of(u);
        if z > self.limit {
            return 0.0;
        }
        self.c_theta * self.theta.density(z) * DEG / (4.0 * u * (1.0 - u)).sqrt()
    }

    /// Normalised points where `f_U` jumps or is singular.
    pub(crate) fn singular_u(&self) -> Vec<f64> {
        let mut pts = vec![self.u_range.0, self.u_range.1, 1.0];
        if self.limit < 90.0 {
            pts.push(cos_sq_deg(self.limit));
        }
        pts.extend(
            self.theta
                .breakpoints()
                .into_iter()
                .filter(|t| (0.0..=self.limit).contains(t))
                .map(cos_sq_deg),
        );
        pts
    }
}

#[derive(Debug)]
struct FixedModel {
    u: OrientationLaw,
    scale: f64,
}

impl LawModel for FixedModel {
    fn cdf(&self, x: f64) -> Estimate {
        Estimate::exact(self.u.cdf(x / self.scale))
    }

    fn pdf(&self, x: f64) -> Estimate {
        Estimate::exact(self.u.pdf(x / self.scale) / self.scale)
    }
}

fn fixed_model_name(mode: FovMode) -> String {
    match mode {
        FovMode::Wide => "single-LED fixed-location law, wide FOV".into(),
        FovMode::Narrow => "single-LED fixed-location law, narrow FOV with atom at zero".into(),
    }
}

/// Law of `h²` for a deterministic location `geometry.d()` and random
/// orientation `theta` (degrees).
///
/// In [`FovMode::Wide`] the caller asserts that `|θ| <= Θ` always; a
/// clipping probability above [`ASSUMPTION_SLACK`] is a configuration error.
pub fn law_fixed_location(
    theta: &DistributionSpec,
    geometry: &LinkGeometry,
    mode: FovMode,
) -> Result<SquareChannelLaw> {
    require_analytic(theta, "theta_dist")?;
    let fov = geometry.theta_fov();
    if mode == FovMode::Wide {
        let clipped = theta.cdf_left(-fov) + 1.0 - theta.cdf_at(fov);
        if clipped > ASSUMPTION_SLACK {
            return Err(Error::Config(format!(
                "wide FOV requested but P{{|theta| > {fov}}} = {clipped:.3e}"
            )));
        }
    }
    let scale = geometry.h_c().powi(2) * geometry.h_d_sq(geometry.d());
    let models = vec![fixed_model_name(mode)];
    let warnings = negative_angle_warning(theta);

    if let Some(t0) = theta.atom() {
        let visible = match mode {
            FovMode::Narrow => t0.abs() <= fov,
            FovMode::Wide => true,
        };
        let x0 = if visible { scale * cos_sq_deg(t0) } else { 0.0 };
        return SquareChannelLaw::degenerate_named(x0, models, warnings);
    }

    let u = OrientationLaw::new(theta, fov, mode)?;
    let mut singular: Vec<f64> = u.singular_u().into_iter().map(|v| v * scale).collect();
    singular.push(0.0);
    let (ulo, uhi) = u.u_range();
    Ok(SquareChannelLaw::from_parts(LawParts {
        atom_mass: u.atom(),
        support: (ulo * scale, uhi * scale),
        scale,
        normalization: u.c_theta(),
        singular,
        models,
        warnings,
        integral_backed: false,
        model: Box::new(FixedModel { u, scale }),
    }))
}

/// Law of `Y = h_d² = (ℓ² + d²)^{-(γ+2)}`.
#[derive(Debug, Clone)]
pub(crate) struct DistanceLaw {
    d: DistributionSpec,
    ell_sq: f64,
    k: f64,
    c_d: f64,
}

impl DistanceLaw {
    fn new(d: &DistributionSpec, geometry: &LinkGeometry) -> Result<Self> {
        let ell_sq = geometry.ell().powi(2);
        let k = geometry.gamma() + 2.0;
        let (lo, hi) = d.integration_support();
        let mut law = Self {
            d: d.clone(),
            ell_sq,
            k,
            c_d: 1.0,
        };
        if d.is_continuous() {
            // Raw density pulled back to the distance axis; the 1/s of the
            // density cancels the Jacobian, so the panels stay smooth.
            let q = Integrator::new(Rule::Gk21, Tolerance::new(0.0, 1e-13));
            let raw = q
                .integrate_singular_breaks(
                    |s| {
                        let y = law.y_of(s);
                        2.0 * k * y.powf(-(k + 1.0) / k) * (ell_sq + s * s).powf(-k - 1.0)
                            * d.density(s)
                    },
                    lo,
                    hi,
                    &d.breakpoints(),
                )
                .require(1e-10)?;
            law.c_d = 1.0 / raw;
        }
        Ok(law)
    }

    fn y_of(&self, s: f64) -> f64 {
        (self.ell_sq + s * s).powf(-self.k)
    }

    fn y_max(&self) -> f64 {
        self.ell_sq.powf(-self.k)
    }

    /// Distance at which the factor equals `y`.
    fn s_of(&self, y: f64) -> f64 {
        (y.powf(-1.0 / self.k) - self.ell_sq).max(0.0).sqrt()
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.d.integration_support();
        (self.y_of(hi), self.y_of(lo.max(0.0)))
    }

    fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else if y >= self.y_max() {
            1.0
        } else {
            1.0 - self.d.cdf_left(self.s_of(y))
        }
    }

    fn raw_pdf(&self, y: f64) -> f64 {
        if !(y > 0.0 && y < self.y_max()) {
            return 0.0;
        }
        let r = y.powf(-1.0 / self.k) - self.ell_sq;
        y.powf(-(self.k + 1.0) / self.k) / r.sqrt() * self.d.density(r.sqrt())
    }

    fn pdf(&self, y: f64) -> f64 {
        self.c_d * self.raw_pdf(y)
    }
}

#[derive(Debug)]
struct ScaledDistanceModel {
    law: DistanceLaw,
    factor: f64,
}

impl LawModel for ScaledDistanceModel {
    fn cdf(&self, x: f64) -> Estimate {
        Estimate::exact(self.law.cdf(x / self.factor))
    }

    fn pdf(&self, x: f64) -> Estimate {
        Estimate::exact(self.law.pdf(x / self.factor) / self.factor)
    }
}

fn require_nonnegative(d: &DistributionSpec) -> Result<()> {
    if d.support().0 < 0.0 {
        Err(Error::invalid(
            "d_dist",
            "horizontal distance law must have non-negative support",
        ))
    } else {
        Ok(())
    }
}

fn distance_law_scaled(
    d: &DistributionSpec,
    geometry: &LinkGeometry,
    factor: f64,
    models: Vec<String>,
    warnings: Vec<String>,
) -> Result<SquareChannelLaw> {
    if let Some(d0) = d.atom() {
        return SquareChannelLaw::degenerate_named(factor * geometry.h_d_sq(d0), models, warnings);
    }
    let law = DistanceLaw::new(d, geometry)?;
    let (lo, hi) = law.support();
    let singular: Vec<f64> = d
        .breakpoints()
        .into_iter()
        .filter(|s| *s >= 0.0)
        .map(|s| factor * law.y_of(s))
        .collect();
    Ok(SquareChannelLaw::from_parts(LawParts {
        atom_mass: 0.0,
        support: (factor * lo, factor * hi),
        scale: factor,
        normalization: law.c_d,
        singular,
        models,
        warnings,
        integral_backed: false,
        model: Box::new(ScaledDistanceModel { law, factor }),
    }))
}

/// Law of `h_d² = (ℓ² + d²)^{-(γ+2)}` for a random horizontal distance.
pub fn law_distance_sq(d: &DistributionSpec, geometry: &LinkGeometry) -> Result<SquareChannelLaw> {
    require_analytic(d, "d_dist")?;
    require_nonnegative(d)?;
    distance_law_scaled(d, geometry, 1.0, vec!["distance-factor law".into()], Vec::new())
}

#[derive(Debug)]
struct ProductModel {
    u: OrientationLaw,
    d: DistributionSpec,
    h_c_sq: f64,
    ell_sq: f64,
    k: f64,
    c_h: f64,
    cdf_q: Integrator,
    pdf_q: Integrator,
}

impl ProductModel {
    fn c_of(&self, s: f64) -> f64 {
        self.h_c_sq * (self.ell_sq + s * s).powf(-self.k)
    }

    /// Distances where `x / c(s)` crosses a singular point of `U`.
    fn breaks(&self, x: f64) -> Vec<f64> {
        self.u
            .singular_u()
            .into_iter()
            .filter_map(|uk| {
                let r = (self.h_c_sq * uk / x).powf(1.0 / self.k) - self.ell_sq;
                (r > 0.0).then(|| r.sqrt())
            })
            .collect()
    }

    fn raw_pdf(&self, x: f64) -> Estimate {
        self.d.expect(
            |s| {
                let c = self.c_of(s);
                self.u.pdf(x / c) / c
            },
            &self.breaks(x),
            &self.pdf_q,
        )
    }
}

impl LawModel for ProductModel {
    fn cdf(&self, x: f64) -> Estimate {
        self.d
            .expect(|s| self.u.cdf(x / self.c_of(s)), &self.breaks(x), &self.cdf_q)
    }

    fn pdf(&self, x: f64) -> Estimate {
        let est = self.raw_pdf(x);
        Estimate {
            value: self.c_h * est.value,
            error: self.c_h * est.error,
            ..est
        }
    }
}

/// Law of `h²` when both the orientation `theta` (degrees) and the
/// horizontal distance `d` (meters) are random and independent. The FOV is
/// always treated as narrow, so the atom is `1 - F_θ(Θ)`.
pub fn law_random_location(
    theta: &DistributionSpec,
    d: &DistributionSpec,
    geometry: &LinkGeometry,
) -> Result<SquareChannelLaw> {
    require_analytic(theta, "theta_dist")?;
    require_analytic(d, "d_dist")?;
    require_nonnegative(d)?;
    let fov = geometry.theta_fov();
    let h_c_sq = geometry.h_c().powi(2);
    let warnings = negative_angle_warning(theta);
    let mut models = vec![
        fixed_model_name(FovMode::Narrow),
        "distance-factor law".into(),
        "single-LED random-location product law".into(),
    ];

    if let Some(t0) = theta.atom() {
        if t0.abs() > fov {
            return SquareChannelLaw::degenerate_named(0.0, models, warnings);
        }
        models.remove(0);
        return distance_law_scaled(d, geometry, h_c_sq * cos_sq_deg(t0), models, warnings);
    }

    let u = OrientationLaw::new(theta, fov, FovMode::Narrow)?;
    let (dlo, dhi) = d.integration_support();
    let dlo = dlo.max(0.0);
    let ell_sq = geometry.ell().powi(2);
    let k = geometry.gamma() + 2.0;
    let c_of = |s: f64| h_c_sq * (ell_sq + s * s).powf(-k);
    let (ulo, uhi) = u.u_range();
    let support = (c_of(dhi) * ulo, c_of(dlo) * uhi);

    let mut s_points = d.breakpoints();
    s_points.extend([dlo, dhi]);
    let mut singular = Vec::new();
    for uk in u.singular_u() {
        for &s in s_points.iter().filter(|s| (dlo..=dhi).contains(*s)) {
            singular.push(c_of(s) * uk);
        }
    }
    singular.push(0.0);

    let mut model = ProductModel {
        u,
        d: d.clone(),
        h_c_sq,
        ell_sq,
        k,
        c_h: 1.0,
        cdf_q: Integrator::new(Rule::Gk21, Tolerance::new(1e-15, 1e-12)),
        pdf_q: Integrator::new(Rule::Gk21, Tolerance::new(0.0, 1e-11)),
    };
    let atom = model.u.atom();
    if d.atom().is_none() {
        let outer = Integrator::new(Rule::Gk21, Tolerance::new(0.0, 1e-10));
        let mass = outer
            .integrate_singular_breaks(|x| model.raw_pdf(x).value, support.0, support.1, &singular)
            .require(1e-8)?;
        model.c_h = (1.0 - atom) / mass;
    }
    let c_h = model.c_h;
    Ok(SquareChannelLaw::from_parts(LawParts {
        atom_mass: atom,
        support,
        scale: h_c_sq,
        normalization: c_h,
        singular,
        models,
        warnings,
        integral_backed: d.atom().is_none(),
        model: Box::new(model),
    }))
}
