//! Effective square channel `h²_eff = max(h₁², h₂²)` of two LEDs spaced `D`
//! apart, with the user at distance `d` from LED 1.
//!
//! The incidence angles are tied by `θ₂ = Φ - θ₁`, so with
//! `c_i = h_c² h_{d_i}²` and `z_i(x) = ½ acos(2x/c_i - 1)` the cdf splits as
//! `P₁ + P₂ + P₃ + P₄` over the four visibility cases (both LEDs seen, only
//! LED 1, only LED 2, neither). Every piece is a `Δ_θ` or `∇_θ` of arguments
//! of the form `u + v·z_i(x)`, possibly inside a `min`/`max`, so the
//! density follows from
//!
//! ```text
//! d/dx F_θ(u + v z_i(x)) = -v f_θ(u + v z_i(x)) / sqrt(4x(c_i - x))
//! ```
//!
//! with a `min`/`max` differentiated through whichever argument is active
//! (the first one on ties).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{phi_sum, LinkGeometry};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::law::{LawModel, LawParts, SquareChannelLaw};
use crate::quadrature::{Estimate, Integrator, Rule, Tolerance};
use crate::single_led::{cos_sq_deg, require_analytic, z_of, ASSUMPTION_SLACK};

const DEG: f64 = 180.0 / PI;

/// Deterministic part of the two-LED channel at one location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLedCoefficients {
    pub c1: f64,
    pub c2: f64,
    /// `Φ = θ₁ + θ₂`, degrees.
    pub phi: f64,
    /// FOV half-angle `Θ`, degrees.
    pub theta_fov: f64,
}

/// The four cdf pieces evaluated at one `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfComponents {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl CdfComponents {
    pub fn total(&self) -> f64 {
        self.p1 + self.p2 + self.p3 + self.p4
    }
}

/// Simplified forms valid under extra assumptions on `θ` and `Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoLedVariant {
    /// General case, all sign and visibility combinations.
    Full,
    /// `0 < θ < Φ`: both incidence angles are non-negative.
    NonnegTheta,
    /// Both LEDs always inside the FOV.
    WideFov,
    /// Both assumptions at once.
    Both,
}

/// `z_i(x) = ½ acos(2x/c_i - 1)` in degrees, `x` clamped to `[0, c_i]`.
pub fn z_transform(x: f64, c: f64) -> f64 {
    z_of(x / c)
}

/// `d z_i / dx` in degrees per unit `x`; zero outside `(0, c_i)`.
fn dz_dx(x: f64, c: f64) -> f64 {
    if x > 0.0 && x < c {
        -DEG / (4.0 * x * (c - x)).sqrt()
    } else {
        0.0
    }
}

/// `c₁`, `c₂` and `Φ` for the user at distance `d` from LED 1.
pub fn coefficients(geometry: &LinkGeometry, d: f64) -> Result<TwoLedCoefficients> {
    let spacing = geometry.require_spacing()?;
    let phi = phi_sum(d, spacing, geometry.ell())?;
    let h_c_sq = geometry.h_c().powi(2);
    Ok(TwoLedCoefficients {
        c1: h_c_sq * geometry.h_d_sq(d),
        c2: h_c_sq * geometry.h_d_sq(spacing - d),
        phi,
        theta_fov: geometry.theta_fov(),
    })
}

/// `u + v·z_i(x)`; `v == 0` encodes a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lin {
    u: f64,
    v: f64,
    i: usize,
}

impl Lin {
    const fn k(u: f64) -> Self {
        Self { u, v: 0.0, i: 0 }
    }

    const fn z(u: f64, v: f64, i: usize) -> Self {
        Self { u, v, i }
    }

    fn eval(&self, z: &[f64; 2]) -> f64 {
        if self.v == 0.0 {
            self.u
        } else {
            self.u + self.v * z[self.i]
        }
    }

    fn slope(&self, dz: &[f64; 2]) -> f64 {
        if self.v == 0.0 {
            0.0
        } else {
            self.v * dz[self.i]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arg {
    L(Lin),
    Min(Lin, Lin),
    Max(Lin, Lin),
}

impl Arg {
    /// Active branch.
    fn pick(&self, z: &[f64; 2]) -> Lin {
        match *self {
            Arg::L(a) => a,
            Arg::Min(a, b) => {
                if a.eval(z) <= b.eval(z) {
                    a
                } else {
                    b
                }
            }
            Arg::Max(a, b) => {
                if a.eval(z) >= b.eval(z) {
                    a
                } else {
                    b
                }
            }
        }
    }

    fn lins(&self) -> [Option<Lin>; 2] {
        match *self {
            Arg::L(a) => [Some(a), None],
            Arg::Min(a, b) | Arg::Max(a, b) => [Some(a), Some(b)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Term {
    /// `Δ_θ(a, b)`
    Delta(Arg, Arg),
    /// `∇_θ(a, b, c, d)`
    Nabla(Arg, Arg, Arg, Arg),
    /// `F_θ(a)`
    Cdf(Arg),
    /// `1 - F_θ(a)`
    Survival(Arg),
}

impl Term {
    fn args(&self) -> ([Arg; 4], usize) {
        match *self {
            Term::Delta(a, b) => ([a, b, a, a], 2),
            Term::Nabla(a, b, c, d) => ([a, b, c, d], 4),
            Term::Cdf(a) | Term::Survival(a) => ([a; 4], 1),
        }
    }
}

/// Lower and upper end of `(a, b] ∩ (c, d]` as indices into `[a, b, c, d]`,
/// following the four non-empty cases of the intersection table.
fn nabla_ends(v: [f64; 4]) -> Option<(usize, usize)> {
    let [a, b, c, d] = v;
    if a > b || c > d || d <= a || b <= c {
        return None;
    }
    Some(match (c <= a, d > b) {
        (true, true) => (0, 1),
        (false, false) => (2, 3),
        (true, false) => (0, 3),
        (false, true) => (2, 1),
    })
}

/// Group index 0..=3 for `P₁..P₄` together with the term.
type Piece = (usize, Term);

const MAX_PIECES: usize = 10;

/// Inline list of pieces; built once per location, so no allocation.
#[derive(Debug, Clone, Copy)]
struct Pieces {
    items: [Piece; MAX_PIECES],
    len: usize,
}

impl Pieces {
    fn from_slice(list: &[Piece]) -> Self {
        let mut items = [(3, Term::Cdf(Arg::L(Lin::k(0.0)))); MAX_PIECES];
        items[..list.len()].copy_from_slice(list);
        Self {
            items,
            len: list.len(),
        }
    }

    fn iter(&self) -> std::slice::Iter<'_, Piece> {
        self.items[..self.len].iter()
    }
}

fn pieces(variant: TwoLedVariant, phi: f64, fov: f64) -> Pieces {
    use Arg::{Max, Min, L};
    let k = |u: f64| L(Lin::k(u));
    let t = fov;
    let z1 = L(Lin::z(0.0, 1.0, 0));
    let neg_z1 = Lin::z(0.0, -1.0, 0);
    let phi_minus_z2 = Lin::z(phi, -1.0, 1);
    let phi_plus_z2 = Lin::z(phi, 1.0, 1);
    match variant {
        TwoLedVariant::Full => Pieces::from_slice(&[
            (0, Term::Nabla(k(-t), L(neg_z1), k(phi - t), L(phi_minus_z2))),
            (0, Term::Nabla(z1, k(t), k((phi - t).max(0.0)), L(phi_minus_z2))),
            (0, Term::Nabla(z1, k(t), L(phi_plus_z2), k(phi + t))),
            (1, Term::Delta(k(-t), Min(neg_z1, Lin::k(phi - t)))),
            (1, Term::Delta(z1, k(t.min(phi - t)))),
            (2, Term::Nabla(k(phi - t), L(phi_minus_z2), k(t), k(phi))),
            (2, Term::Delta(Max(phi_plus_z2, Lin::k(t)), k(phi + t))),
            (3, Term::Delta(k(t), k(phi - t))),
            (3, Term::Cdf(k(-t))),
            (3, Term::Survival(k(phi + t))),
        ]),
        TwoLedVariant::NonnegTheta => Pieces::from_slice(&[
            (0, Term::Nabla(z1, k(t), k((phi - t).max(0.0)), L(phi_minus_z2))),
            (1, Term::Delta(z1, k(t.min(phi - t)))),
            (2, Term::Nabla(k(phi - t), L(phi_minus_z2), k(t), k(phi))),
            (3, Term::Delta(k(t), k(phi - t))),
        ]),
        TwoLedVariant::WideFov => Pieces::from_slice(&[
            (0, Term::Delta(z1, L(phi_minus_z2))),
            (0, Term::Cdf(Min(neg_z1, phi_minus_z2))),
            (0, Term::Survival(Max(Lin::z(0.0, 1.0, 0), phi_plus_z2))),
        ]),
        TwoLedVariant::Both => Pieces::from_slice(&[(0, Term::Delta(z1, L(phi_minus_z2)))]),
    }
}

/// Cdf pieces and their derivatives for one location.
#[derive(Debug, Clone)]
struct Conditional<'a> {
    theta: &'a DistributionSpec,
    /// Points where `f_θ` jumps or kinks.
    theta_breaks: &'a [f64],
    c: [f64; 2],
    pieces: Pieces,
}

impl<'a> Conditional<'a> {
    fn new(
        theta: &'a DistributionSpec,
        theta_breaks: &'a [f64],
        co: &TwoLedCoefficients,
        variant: TwoLedVariant,
    ) -> Self {
        Self {
            theta,
            theta_breaks,
            c: [co.c1, co.c2],
            pieces: pieces(variant, co.phi, co.theta_fov),
        }
    }

    fn zs(&self, x: f64) -> [f64; 2] {
        [z_transform(x, self.c[0]), z_transform(x, self.c[1])]
    }

    fn term_value(&self, term: &Term, z: &[f64; 2]) -> f64 {
        let f = |a: &Arg| a.pick(z).eval(z);
        match term {
            Term::Delta(a, b) => self.theta.interval_prob(f(a), f(b)),
            Term::Nabla(a, b, c, d) => {
                let v = [f(a), f(b), f(c), f(d)];
                match nabla_ends(v) {
                    Some((lo, hi)) => (self.theta.cdf_at(v[hi]) - self.theta.cdf_at(v[lo])).max(0.0),
                    None => 0.0,
                }
            }
            Term::Cdf(a) => self.theta.cdf_at(f(a)),
            Term::Survival(a) => 1.0 - self.theta.cdf_at(f(a)),
        }
    }

    /// `∂/∂x F_θ(arg(x))` through the active branch.
    fn cdf_slope(&self, arg: &Arg, z: &[f64; 2], dz: &[f64; 2]) -> f64 {
        let lin = arg.pick(z);
        let s = lin.slope(dz);
        if s == 0.0 {
            0.0
        } else {
            self.theta.density(lin.eval(z)) * s
        }
    }

    fn term_slope(&self, term: &Term, z: &[f64; 2], dz: &[f64; 2]) -> f64 {
        match term {
            Term::Delta(a, b) => {
                if a.pick(z).eval(z) <= b.pick(z).eval(z) {
                    self.cdf_slope(b, z, dz) - self.cdf_slope(a, z, dz)
                } else {
                    0.0
                }
            }
            Term::Nabla(a, b, c, d) => {
                let args = [a, b, c, d];
                let v = [a, b, c, d].map(|g| g.pick(z).eval(z));
                match nabla_ends(v) {
                    Some((lo, hi)) => self.cdf_slope(args[hi], z, dz) - self.cdf_slope(args[lo], z, dz),
                    None => 0.0,
                }
            }
            Term::Cdf(a) => self.cdf_slope(a, z, dz),
            Term::Survival(a) => -self.cdf_slope(a, z, dz),
        }
    }

    fn components(&self, x: f64) -> CdfComponents {
        let z = self.zs(x.max(0.0));
        let mut p = [0.0; 4];
        for (g, term) in self.pieces.iter() {
            p[*g] += self.term_value(term, &z);
        }
        CdfComponents {
            p1: p[0],
            p2: p[1],
            p3: p[2],
            p4: p[3],
        }
    }

    fn atom(&self) -> f64 {
        self.components(0.0).p4
    }

    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x >= self.c[0].max(self.c[1]) {
            1.0
        } else {
            self.components(x).total().clamp(0.0, 1.0)
        }
    }

    /// Density of the continuous part, before normalisation.
    fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let z = self.zs(x);
        let dz = [dz_dx(x, self.c[0]), dz_dx(x, self.c[1])];
        self.pieces
            .iter()
            .filter(|(g, _)| *g < 3)
            .map(|(_, term)| self.term_slope(term, &z, &dz))
            .sum::<f64>()
            .max(0.0)
    }

    /// Discrete state of the decomposition at `x`: saturation of `z₁`, `z₂`,
    /// active `min`/`max` branches, interval cases and the `θ` cell each
    /// active argument falls in. The density is smooth wherever this stays
    /// constant.
    fn signature(&self, x: f64) -> u64 {
        let z = self.zs(x.max(0.0));
        let mut h: u64 = u64::from(x >= self.c[0]) | (u64::from(x >= self.c[1]) << 1);
        let mut mix = |v: u64| h = (h ^ v.wrapping_add(1)).wrapping_mul(0x0100_0000_01b3);
        for (_, term) in self.pieces.iter() {
            let (args, n) = term.args();
            let mut vals = [0.0; 4];
            for (k, arg) in args[..n].iter().enumerate() {
                let lin = arg.pick(&z);
                vals[k] = lin.eval(&z);
                mix(u64::from(lin != arg.lins()[0].unwrap_or(lin)));
                mix(self.theta_breaks.iter().filter(|b| vals[k] > **b).count() as u64);
            }
            mix(match term {
                Term::Delta(..) => u64::from(vals[0] <= vals[1]),
                Term::Nabla(..) => nabla_ends(vals).map_or(9, |(lo, hi)| (lo * 4 + hi) as u64),
                _ => 0,
            });
        }
        h
    }

    /// Points in `x` where the density can jump, kink or blow up.
    fn singular_points(&self) -> Vec<f64> {
        let mut out = vec![0.0, self.c[0], self.c[1]];
        let mut lins: Vec<Lin> = Vec::new();
        let mut consts = self.theta_breaks.to_vec();
        for (_, term) in self.pieces.iter() {
            let (args, n) = term.args();
            for arg in &args[..n] {
                for lin in arg.lins().into_iter().flatten() {
                    if lin.v == 0.0 {
                        consts.push(lin.u);
                    } else if !lins.contains(&lin) {
                        lins.push(lin);
                    }
                }
            }
        }
        for lin in &lins {
            for &kappa in &consts {
                let z = (kappa - lin.u) / lin.v;
                if (0.0..=90.0).contains(&z) {
                    out.push(self.c[lin.i] * cos_sq_deg(z));
                }
            }
        }
        // Crossings between arguments driven by different LEDs.
        let hi = self.c[0].max(self.c[1]);
        for a in lins.iter().filter(|l| l.i == 0) {
            for b in lins.iter().filter(|l| l.i == 1) {
                let g = |x: f64| {
                    let z = self.zs(x);
                    a.eval(&z) - b.eval(&z)
                };
                out.extend(sign_changes(g, 0.0, hi, 256));
            }
        }
        out.retain(|x| x.is_finite() && *x >= 0.0 && *x <= hi);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Roots of `g` on `[lo, hi]` seen as sign changes on an `n`-cell grid,
/// refined by bisection to machine precision.
fn sign_changes(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut g0 = g(x0);
    for k in 1..=n {
        let x1 = lo + (hi - lo) * k as f64 / n as f64;
        let g1 = g(x1);
        if g0 == 0.0 {
            out.push(x0);
        } else if g0 * g1 < 0.0 {
            out.push(bisect(|x| g(x) * g0 > 0.0, x0, x1));
        }
        x0 = x1;
        g0 = g1;
    }
    out
}

/// Boundary between `left(x) == true` at `a` and false at `b`.
fn bisect(left: impl Fn(f64) -> bool, a: f64, b: f64) -> f64 {
    bisect_to(left, a, b, 0.0)
}

/// As [`bisect`], stopping once the bracket is narrower than `tol`.
fn bisect_to(left: impl Fn(f64) -> bool, mut a: f64, mut b: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) || b - a < tol {
            break;
        }
        if left(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// `P₁..P₄` of the general decomposition at `x`.
pub fn cdf_components(
    theta: &DistributionSpec,
    coeffs: &TwoLedCoefficients,
    x: f64,
) -> CdfComponents {
    cdf_components_variant(theta, coeffs, TwoLedVariant::Full, x)
}

/// Same, for a simplified variant (pieces that the variant drops are 0).
pub fn cdf_components_variant(
    theta: &DistributionSpec,
    coeffs: &TwoLedCoefficients,
    variant: TwoLedVariant,
    x: f64,
) -> CdfComponents {
    let breaks = theta.breakpoints();
    Conditional::new(theta, &breaks, coeffs, variant).components(x)
}

#[derive(Debug)]
struct FixedTwoModel {
    theta: DistributionSpec,
    theta_breaks: Vec<f64>,
    coeffs: TwoLedCoefficients,
    variant: TwoLedVariant,
    c_theta: f64,
}

impl FixedTwoModel {
    fn conditional(&self) -> Conditional<'_> {
        Conditional::new(&self.theta, &self.theta_breaks, &self.coeffs, self.variant)
    }
}

impl LawModel for FixedTwoModel {
    fn cdf(&self, x: f64) -> Estimate {
        Estimate::exact(self.conditional().cdf(x))
    }

    fn pdf(&self, x: f64) -> Estimate {
        Estimate::exact(self.c_theta * self.conditional().pdf(x))
    }
}

fn variant_name(variant: TwoLedVariant) -> &'static str {
    match variant {
        TwoLedVariant::Full => "two-LED fixed-location law, general case decomposition",
        TwoLedVariant::NonnegTheta => "two-LED fixed-location law, non-negative incidence angles",
        TwoLedVariant::WideFov => "two-LED fixed-location law, both LEDs inside the FOV",
        TwoLedVariant::Both => "two-LED fixed-location law, non-negative angles and wide FOV",
    }
}

fn point_gain(theta0: f64, co: &TwoLedCoefficients) -> f64 {
    let seen = |t: f64| t.abs() <= co.theta_fov;
    let h1 = if seen(theta0) { co.c1 * cos_sq_deg(theta0) } else { 0.0 };
    let t2 = co.phi - theta0;
    let h2 = if seen(t2) { co.c2 * cos_sq_deg(t2) } else { 0.0 };
    h1.max(h2)
}

/// Continuous mass of the un-normalised density for one location.
fn conditional_mass(cond: &Conditional<'_>, q: &Integrator) -> Estimate {
    let hi = cond.c[0].max(cond.c[1]);
    q.integrate_singular_breaks(|x| cond.pdf(x), 0.0, hi, &cond.singular_points())
}

fn fixed_two(
    theta: &DistributionSpec,
    geometry: &LinkGeometry,
    d: f64,
    variant: TwoLedVariant,
) -> Result<SquareChannelLaw> {
    require_analytic(theta, "theta_dist")?;
    let coeffs = coefficients(geometry, d)?;
    let mut models = vec![variant_name(variant).to_string()];
    if variant != TwoLedVariant::Full {
        models.push(variant_name(TwoLedVariant::Full).to_string());
    }
    if let Some(t0) = theta.atom() {
        return SquareChannelLaw::degenerate_named(point_gain(t0, &coeffs), models, Vec::new());
    }
    let theta_breaks = theta.breakpoints();
    let cond = Conditional::new(theta, &theta_breaks, &coeffs, variant);
    let atom = cond.atom();
    let singular = cond.singular_points();
    let q = Integrator::new(Rule::Gk21, Tolerance::new(0.0, 1e-13));
    let mass = conditional_mass(&cond, &q).require(1e-10)?;
    let c_theta = if mass > 0.0 { (1.0 - atom) / mass } else { 1.0 };
    Ok(SquareChannelLaw::from_parts(LawParts {
        atom_mass: atom,
        support: (0.0, coeffs.c1.max(coeffs.c2)),
        scale: geometry.h_c().powi(2),
        normalization: c_theta,
        singular,
        models,
        warnings: Vec::new(),
        integral_backed: false,
        model: Box::new(FixedTwoModel {
            theta: theta.clone(),
            theta_breaks,
            coeffs,
            variant,
            c_theta,
        }),
    }))
}

/// Law of `h²_eff` for the user at distance `d` from LED 1 (geometry must
/// carry the spacing `D`).
pub fn law_fixed_location_two(
    theta: &DistributionSpec,
    geometry: &LinkGeometry,
    d: f64,
) -> Result<SquareChannelLaw> {
    fixed_two(theta, geometry, d, TwoLedVariant::Full)
}

/// Probabilities that the two assumptions behind `variant` fail:
/// `(P{θ < 0 or θ > Φ}, P{an LED leaves the FOV})`; 0 when not assumed.
pub fn variant_violation(
    theta: &DistributionSpec,
    coeffs: &TwoLedCoefficients,
    variant: TwoLedVariant,
) -> (f64, f64) {
    let negative = theta.cdf_left(0.0) + 1.0 - theta.cdf_at(coeffs.phi);
    let t = coeffs.theta_fov;
    // Both LEDs are seen iff max(-Θ, Φ-Θ) <= θ <= min(Θ, Φ+Θ).
    let lo = (-t).max(coeffs.phi - t);
    let hi = t.min(coeffs.phi + t);
    let inside = if lo <= hi {
        theta.cdf_at(hi) - theta.cdf_left(lo)
    } else {
        0.0
    };
    let clipped = 1.0 - inside;
    match variant {
        TwoLedVariant::Full => (0.0, 0.0),
        TwoLedVariant::NonnegTheta => (negative, 0.0),
        TwoLedVariant::WideFov => (0.0, clipped),
        TwoLedVariant::Both => (negative, clipped),
    }
}

/// Law under one of the simplifying assumptions. The assumption is checked
/// against `θ` and a violation above [`ASSUMPTION_SLACK`] is an error.
pub fn law_fixed_two_simplified(
    theta: &DistributionSpec,
    geometry: &LinkGeometry,
    d: f64,
    variant: TwoLedVariant,
) -> Result<SquareChannelLaw> {
    let coeffs = coefficients(geometry, d)?;
    let (negative, clipped) = variant_violation(theta, &coeffs, variant);
    if negative > ASSUMPTION_SLACK {
        return Err(Error::Precondition(format!(
            "non-negative incidence angles: P{{theta < 0 or theta > Phi}} = {negative:.3e}"
        )));
    }
    if clipped > ASSUMPTION_SLACK {
        return Err(Error::Precondition(format!(
            "wide FOV: P{{an LED leaves the FOV}} = {clipped:.3e}"
        )));
    }
    fixed_two(theta, geometry, d, variant)
}

/// Cells of the coarse scan used to locate jumps of the integrand in `s`.
const SCAN_CELLS: usize = 128;

#[derive(Debug)]
struct RandomTwoModel {
    theta: DistributionSpec,
    theta_breaks: Vec<f64>,
    d: DistributionSpec,
    geometry: LinkGeometry,
    spacing: f64,
    s_range: (f64, f64),
    h_c_sq: f64,
    ell_sq: f64,
    k: f64,
    c_h: f64,
    cdf_q: Integrator,
    pdf_q: Integrator,
}

impl RandomTwoModel {
    fn coeffs_at(&self, s: f64) -> TwoLedCoefficients {
        let s = s.clamp(0.0, self.spacing);
        let h1 = self.h_c_sq * self.geometry.h_d_sq(s);
        let h2 = self.h_c_sq * self.geometry.h_d_sq(self.spacing - s);
        let ell = self.geometry.ell();
        TwoLedCoefficients {
            c1: h1,
            c2: h2,
            phi: (s / ell).atan().to_degrees() + ((self.spacing - s) / ell).atan().to_degrees(),
            theta_fov: self.geometry.theta_fov(),
        }
    }

    fn with_conditional<T>(&self, s: f64, f: impl FnOnce(&Conditional<'_>) -> T) -> T {
        let co = self.coeffs_at(s);
        f(&Conditional::new(&self.theta, &self.theta_breaks, &co, TwoLedVariant::Full))
    }

    /// Radius at which `h_c² h_d²(r) = y`, if any.
    fn radius_for(&self, y: f64) -> Option<f64> {
        let r = (self.h_c_sq / y).powf(1.0 / self.k) - self.ell_sq;
        (r > 0.0).then(|| r.sqrt())
    }

    /// Locations where the conditional density in `s` is not smooth at this
    /// `x`. Saturation points `c_i(s) = x / cos²κ` are closed form; the rest
    /// come from a scan of the discrete state, refined by bisection.
    fn breaks(&self, x: f64) -> Vec<f64> {
        let (lo, hi) = self.s_range;
        let mut out = Vec::new();
        let mut kappas = vec![0.0, self.geometry.theta_fov()];
        kappas.extend(self.theta_breaks.iter().map(|b| b.abs()));
        for kappa in kappas.into_iter().filter(|k| *k < 90.0) {
            if let Some(r) = self.radius_for(x / cos_sq_deg(kappa)) {
                out.push(r);
                out.push(self.spacing - r);
            }
        }
        let state = |s: f64| self.with_conditional(s, |c| c.signature(x));
        let mut s0 = lo;
        let mut g0 = state(s0);
        for k in 1..=SCAN_CELLS {
            let s1 = lo + (hi - lo) * k as f64 / SCAN_CELLS as f64;
            let g1 = state(s1);
            if g1 != g0 {
                let tol = 1e-11 * self.spacing;
                let b = bisect_to(|s| state(s) == g0, s0, s1, tol);
                if !out.iter().any(|r| (r - b).abs() < tol) {
                    out.push(b);
                }
            }
            s0 = s1;
            g0 = g1;
        }
        out.retain(|s| *s > lo && *s < hi);
        out
    }

    fn raw_pdf(&self, x: f64) -> Estimate {
        self.d.expect(
            |s| self.with_conditional(s, |c| c.pdf(x)),
            &self.breaks(x),
            &self.pdf_q,
        )
    }
}

impl LawModel for RandomTwoModel {
    fn cdf(&self, x: f64) -> Estimate {
        self.d.expect(
            |s| self.with_conditional(s, |c| c.cdf(x)),
            &self.breaks(x),
            &self.cdf_q,
        )
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

/// Law of `h²_eff` when the user location `d ∈ [0, D]` is random as well;
/// the fixed-location law is averaged over `d`, the atom included.
pub fn law_random_location_two(
    theta: &DistributionSpec,
    d: &DistributionSpec,
    geometry: &LinkGeometry,
) -> Result<SquareChannelLaw> {
    require_analytic(theta, "theta_dist")?;
    require_analytic(d, "d_dist")?;
    if theta.atom().is_some() {
        return Err(Error::Precondition(
            "a point-mass orientation needs a fixed location with two LEDs".into(),
        ));
    }
    let spacing = geometry.require_spacing()?;
    let (dlo, dhi) = d.integration_support();
    if dlo < 0.0 || dhi > spacing {
        return Err(Error::Precondition(format!(
            "location law must live on [0, {spacing}], its support is [{dlo}, {dhi}]"
        )));
    }
    let models = vec![
        variant_name(TwoLedVariant::Full).to_string(),
        "two-LED random-location average".to_string(),
    ];
    if let Some(d0) = d.atom() {
        let mut law = law_fixed_location_two(theta, geometry, d0)?;
        if let Some(p) = law.point_mass_location() {
            law = SquareChannelLaw::degenerate_named(p, models, Vec::new())?;
        }
        return Ok(law);
    }
    let h_c_sq = geometry.h_c().powi(2);
    let mut model = RandomTwoModel {
        theta: theta.clone(),
        theta_breaks: theta.breakpoints(),
        d: d.clone(),
        geometry: geometry.clone(),
        spacing,
        s_range: (dlo, dhi),
        h_c_sq,
        ell_sq: geometry.ell().powi(2),
        k: geometry.gamma() + 2.0,
        c_h: 1.0,
        cdf_q: Integrator::new(Rule::Gk61, Tolerance::new(1e-15, 1e-12)),
        pdf_q: Integrator::new(Rule::Gk61, Tolerance::new(0.0, 1e-10)),
    };

    let s_q = Integrator::new(Rule::Gk61, Tolerance::new(1e-300, 1e-10));
    let atom = d
        .expect(|s| model.with_conditional(s, |c| c.atom()), &[], &s_q)
        .require(1e-8)?;

    // Normalisation: the per-location continuous mass averaged over d.
    let inner = Integrator::new(Rule::Gk21, Tolerance::new(0.0, 1e-12));
    let mass = d
        .expect(
            |s| model.with_conditional(s, |c| conditional_mass(c, &inner).value),
            &[],
            &s_q,
        )
        .require(1e-8)?;
    if mass > 0.0 {
        model.c_h = (1.0 - atom) / mass;
    }

    // c₁ is largest at the near end of the location range, c₂ at the far end.
    let c_at = |s: f64| [h_c_sq * geometry.h_d_sq(s), h_c_sq * geometry.h_d_sq(spacing - s)];
    let top = c_at(dlo)[0].max(c_at(dhi)[1]);
    let mut s_points = d.breakpoints();
    s_points.extend([dlo, dhi]);
    s_points.retain(|s| (dlo..=dhi).contains(s));
    let mut kappas = vec![0.0, geometry.theta_fov()];
    kappas.extend(theta.breakpoints().into_iter().map(f64::abs));
    let mut singular = vec![0.0, top];
    for &s in &s_points {
        for c in c_at(s) {
            for &kappa in kappas.iter().filter(|k| **k < 90.0) {
                singular.push(c * cos_sq_deg(kappa));
            }
        }
    }
    let c_h = model.c_h;
    Ok(SquareChannelLaw::from_parts(LawParts {
        atom_mass: atom,
        support: (0.0, top),
        scale: h_c_sq,
        normalization: c_h,
        singular,
        models,
        warnings: Vec::new(),
        integral_backed: true,
        model: Box::new(model),
    }))
}
