//! Deterministic Lambertian line-of-sight geometry.
//!
//! The gain of a single LED seen by a receiver at horizontal distance `d`
//! and incidence angle `θ` factors as `h = h_c · h_d(d) · h_θ(θ)` with
//!
//! * `h_c = (γ+1) A_R ℓ^γ g / 2π`
//! * `h_d = (ℓ² + d²)^{-(γ+2)/2}`
//! * `h_θ = cos θ` for `|θ| <= Θ`, else `0`.
//!
//! Angles are in degrees, lengths in meters, `A_R` in m².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Receiver field-of-view handling for single-LED laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovMode {
    /// The receiver never clips the LED; no atom at zero.
    Wide,
    /// Clipping at `Θ` produces an atom at zero.
    Narrow,
}

/// All deterministic link parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryLiteral", into = "GeometryLiteral")]
pub struct LinkGeometry {
    ell: f64,
    d: f64,
    theta_fov: f64,
    gamma: f64,
    area_m2: f64,
    concentrator_gain: f64,
    spacing: Option<f64>,
}

/// Product form of the gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFactors {
    pub h_c: f64,
    pub h_d: f64,
    pub h_theta: f64,
}

impl ChannelFactors {
    pub fn gain(&self) -> f64 {
        self.h_c * self.h_d * self.h_theta
    }
}

/// `γ = -1 / log2(cos Φ½)`.
pub fn lambertian_order(half_power_angle: f64) -> Result<f64> {
    if !(half_power_angle > 0.0 && half_power_angle < 90.0) {
        return Err(Error::Domain(format!(
            "half-power angle must lie in (0, 90) degrees, got {half_power_angle}"
        )));
    }
    let gamma = -1.0 / half_power_angle.to_radians().cos().log2();
    // cos(60°) is not exactly 1/2 in floating point; snap integer orders.
    let nearest = gamma.round();
    if (gamma - nearest).abs() <= 1e-12 * nearest.max(1.0) {
        Ok(nearest)
    } else {
        Ok(gamma)
    }
}

/// `g = n² / sin² Θ`.
pub fn concentrator_gain(n: f64, theta_fov: f64) -> Result<f64> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::Domain(format!("refractive index must be >= 1, got {n}")));
    }
    if !(theta_fov > 0.0 && theta_fov <= 90.0) {
        return Err(Error::Domain(format!(
            "field of view must lie in (0, 90] degrees, got {theta_fov}"
        )));
    }
    let s = theta_fov.to_radians().sin();
    Ok(n * n / (s * s))
}

/// `Φ = atan(d/ℓ) + atan((D-d)/ℓ)` in degrees.
pub fn phi_sum(d: f64, spacing: f64, ell: f64) -> Result<f64> {
    if !(ell > 0.0) || !(spacing > 0.0) {
        return Err(Error::Domain(format!(
            "need ell > 0 and spacing > 0, got ell={ell}, spacing={spacing}"
        )));
    }
    if !(0.0..=spacing).contains(&d) {
        return Err(Error::Domain(format!("d={d} outside [0, {spacing}]")));
    }
    Ok(((d / ell).atan() + ((spacing - d) / ell).atan()).to_degrees())
}

impl LinkGeometry {
    /// Geometry with the Lambertian order and concentrator gain given
    /// directly. `area_cm2` is converted to m².
    pub fn new(
        ell: f64,
        d: f64,
        theta_fov: f64,
        gamma: f64,
        area_cm2: f64,
        concentrator_gain: f64,
    ) -> Result<Self> {
        let g = Self {
            ell,
            d,
            theta_fov,
            gamma,
            area_m2: area_cm2 * 1e-4,
            concentrator_gain,
            spacing: None,
        };
        g.validate()?;
        Ok(g)
    }

    /// The reference link used throughout: `ℓ = 3 m`, `Φ½ = 60°`, `g = 1`,
    /// `A_R = 1 cm²`.
    pub fn reference(d: f64, theta_fov: f64) -> Result<Self> {
        Self::new(3.0, d, theta_fov, 1.0, 1.0, 1.0)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = Some(spacing);
        self.validate()?;
        Ok(self)
    }

    pub fn with_d(mut self, d: f64) -> Result<Self> {
        self.d = d;
        self.validate()?;
        Ok(self)
    }

    pub fn with_fov(mut self, theta_fov: f64) -> Result<Self> {
        self.theta_fov = theta_fov;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &'static str, v: f64, need: &str| {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("{need}, got {v}")))
            }
        };
        check(self.ell > 0.0, "ell", self.ell, "must be > 0")?;
        check(self.d >= 0.0, "d", self.d, "must be >= 0")?;
        check(
            self.theta_fov > 0.0 && self.theta_fov <= 90.0,
            "fov",
            self.theta_fov,
            "must lie in (0, 90]",
        )?;
        check(self.gamma > 0.0, "gamma", self.gamma, "must be > 0")?;
        check(self.area_m2 > 0.0, "area_cm2", self.area_m2 * 1e4, "must be > 0")?;
        check(self.concentrator_gain > 0.0, "g", self.concentrator_gain, "must be > 0")?;
        if let Some(s) = self.spacing {
            check(s > 0.0, "spacing", s, "must be > 0")?;
        }
        Ok(())
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn theta_fov(&self) -> f64 {
        self.theta_fov
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn area_m2(&self) -> f64 {
        self.area_m2
    }
    pub fn concentrator_gain(&self) -> f64 {
        self.concentrator_gain
    }
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn require_spacing(&self) -> Result<f64> {
        self.spacing
            .ok_or_else(|| Error::invalid("spacing", "LED spacing is required for this scenario"))
    }

    /// Constant factor `h_c`.
    pub fn h_c(&self) -> f64 {
        (self.gamma + 1.0) * self.area_m2 * self.ell.powf(self.gamma) * self.concentrator_gain
            / (2.0 * std::f64::consts::PI)
    }

    /// Distance factor `h_d` at horizontal distance `d`.
    pub fn h_d(&self, d: f64) -> f64 {
        (self.ell * self.ell + d * d).powf(-(self.gamma + 2.0) / 2.0)
    }

    /// `h_d² = (ℓ² + d²)^{-(γ+2)}`.
    pub fn h_d_sq(&self, d: f64) -> f64 {
        (self.ell * self.ell + d * d).powf(-(self.gamma + 2.0))
    }

    /// Orientation factor `cos θ · rect(θ/Θ)`; the FOV edge itself is inside.
    pub fn h_theta(&self, theta: f64) -> f64 {
        if theta.abs() <= self.theta_fov {
            theta.to_radians().cos()
        } else {
            0.0
        }
    }

    /// Squared gain `h_c² h_d²(d) cos²θ`, clipped outside the FOV.
    pub fn gain_sq_at(&self, d: f64, theta: f64) -> f64 {
        let h = self.h_c() * self.h_d(d) * self.h_theta(theta);
        h * h
    }
}

/// LOS gain at the geometry's own distance.
pub fn los_gain(geometry: &LinkGeometry, theta: f64) -> f64 {
    channel_factors(geometry, theta).gain()
}

/// LOS gain at an explicit horizontal distance.
pub fn los_gain_at(geometry: &LinkGeometry, d: f64, theta: f64) -> f64 {
    geometry.h_c() * geometry.h_d(d) * geometry.h_theta(theta)
}

pub fn channel_factors(geometry: &LinkGeometry, theta: f64) -> ChannelFactors {
    ChannelFactors {
        h_c: geometry.h_c(),
        h_d: geometry.h_d(geometry.d),
        h_theta: geometry.h_theta(theta),
    }
}

/// JSON geometry block, e.g.
/// `{"ell":3,"d":2.5,"fov":35,"half_power":60,"area_cm2":1,"g":1,"spacing":4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryLiteral {
    pub ell: f64,
    #[serde(default)]
    pub d: f64,
    pub fov: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub area_cm2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

impl TryFrom<GeometryLiteral> for LinkGeometry {
    type Error = Error;

    fn try_from(lit: GeometryLiteral) -> Result<Self> {
        let gamma = match (lit.half_power, lit.gamma) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either half_power or gamma, not both".into()))
            }
            (Some(phi), None) => lambertian_order(phi)?,
            (None, Some(g)) => g,
            (None, None) => return Err(Error::Config("one of half_power or gamma is required".into())),
        };
        let g = match (lit.g, lit.n) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either g or n, not both".into()))
            }
            (Some(g), None) => g,
            (None, Some(n)) => concentrator_gain(n, lit.fov)?,
            (None, None) => return Err(Error::Config("one of g or n is required".into())),
        };
        let geom = LinkGeometry::new(lit.ell, lit.d, lit.fov, gamma, lit.area_cm2, g)?;
        match lit.spacing {
            Some(s) => geom.with_spacing(s),
            None => Ok(geom),
        }
    }
}

impl From<LinkGeometry> for GeometryLiteral {
    fn from(g: LinkGeometry) -> Self {
        GeometryLiteral {
            ell: g.ell,
            d: g.d,
            fov: g.theta_fov,
            half_power: None,
            gamma: Some(g.gamma),
            area_cm2: g.area_m2 * 1e4,
            g: Some(g.concentrator_gain),
            n: None,
            spacing: g.spacing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn lambertian_order_examples() {
        assert_eq!(lambertian_order(60.0).unwrap(), 1.0);
        assert!((lambertian_order(45.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((lambertian_order(30.0).unwrap() - 4.8188).abs() < 1e-4);
        assert!(lambertian_order(90.0).is_err());
        assert!(lambertian_order(0.0).is_err());
    }

    #[test]
    fn concentrator_gain_examples() {
        assert!((concentrator_gain(1.0, 90.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((concentrator_gain(1.0, 30.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((concentrator_gain(1.5, 60.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(concentrator_gain(0.5, 60.0).is_err());
    }

    #[test]
    fn los_gain_examples() {
        let g = LinkGeometry::reference(0.0, 90.0).unwrap();
        // 2 * 1e-4 / (2π · 9)
        assert!(rel(los_gain(&g, 0.0), 3.5368e-6) < 1e-4);
        let g = LinkGeometry::reference(2.5, 35.0).unwrap();
        assert!(rel(los_gain(&g, 30.0), 1.3888e-6) < 1e-4);
        assert_eq!(los_gain(&g, 36.0), 0.0);
        assert_eq!(los_gain(&g, -36.0), 0.0);
        assert!(los_gain(&g, 35.0) > 0.0);
    }

    #[test]
    fn channel_factor_examples() {
        let g = LinkGeometry::reference(0.0, 35.0).unwrap();
        let f = channel_factors(&g, 0.0);
        assert!((f.h_d - 1.0 / 27.0).abs() < 1e-15);
        assert_eq!(f.h_theta, 1.0);
        let g = g.with_d(2.5).unwrap();
        let f = channel_factors(&g, 30.0);
        assert!(rel(f.h_d, 15.25f64.powf(-1.5)) < 1e-15);
        // The quoted 1.6794e-2 is a rounded figure; 15.25^-1.5 = 1.67917e-2.
        assert!(rel(f.h_d, 1.6794e-2) < 2e-4);
        assert!(rel(f.gain(), los_gain(&g, 30.0)) < 1e-15);
        assert!(rel(g.h_d_sq(2.5), f.h_d * f.h_d) < 1e-14);
        assert!(rel(g.h_c(), 9.549e-5) < 1e-4);
    }

    #[test]
    fn phi_sum_examples() {
        assert!((phi_sum(0.0, 4.0, 3.0).unwrap() - 53.130).abs() < 1e-3);
        assert!((phi_sum(2.0, 4.0, 3.0).unwrap() - 67.380).abs() < 1e-3);
        assert!(phi_sum(2.0, 4.0, 1e6).unwrap() < 1e-3);
        assert!(phi_sum(5.0, 4.0, 3.0).is_err());
    }

    #[test]
    fn geometry_validation_names_fields() {
        assert!(matches!(
            LinkGeometry::new(0.0, 0.0, 35.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidParameter { field: "ell", .. })
        ));
        assert!(matches!(
            LinkGeometry::new(3.0, 0.0, 95.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidParameter { field: "fov", .. })
        ));
    }

    #[test]
    fn geometry_literal() {
        let g: LinkGeometry = serde_json::from_str(
            r#"{"ell":3,"d":2.5,"fov":35,"half_power":60,"area_cm2":1,"g":1,"spacing":4}"#,
        )
        .unwrap();
        assert_eq!(g.gamma(), 1.0);
        assert!((g.area_m2() - 1e-4).abs() < 1e-20);
        assert_eq!(g.spacing(), Some(4.0));
        let both: std::result::Result<LinkGeometry, _> = serde_json::from_str(
            r#"{"ell":3,"fov":35,"half_power":60,"area_cm2":1,"g":1,"n":1.5}"#,
        );
        assert!(both.is_err());
        let from_n: LinkGeometry =
            serde_json::from_str(r#"{"ell":3,"fov":30,"gamma":1,"area_cm2":1,"n":1}"#).unwrap();
        assert!((from_n.concentrator_gain() - 4.0).abs() < 1e-12);
    }
}
