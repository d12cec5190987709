//! Mixed laws of squared channel gains: an atom at zero of mass `c_δ` plus a
//! continuous part on a bounded support.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::{Estimate, Integrator};

/// Evaluators behind a [`SquareChannelLaw`]. `cdf` is only queried on
/// `[x_lo, x_hi)` and includes the atom; `pdf` is the continuous part.
pub(crate) trait LawModel: fmt::Debug + Send + Sync {
    fn cdf(&self, x: f64) -> Estimate;
    fn pdf(&self, x: f64) -> Estimate;
}

/// Everything a constructor needs to hand over.
pub(crate) struct LawParts {
    pub model: Box<dyn LawModel>,
    pub atom_mass: f64,
    pub support: (f64, f64),
    pub scale: f64,
    pub normalization: f64,
    pub singular: Vec<f64>,
    pub models: Vec<String>,
    pub warnings: Vec<String>,
    pub integral_backed: bool,
}

#[derive(Debug)]
struct Inner {
    model: Option<Box<dyn LawModel>>,
    atom_mass: f64,
    support: (f64, f64),
    scale: f64,
    normalization: f64,
    point: Option<f64>,
    singular: Vec<f64>,
    models: Vec<String>,
    warnings: Vec<String>,
    integral_backed: bool,
    table: OnceLock<TabulatedCdf>,
}

/// Law of `h²` (or `h²_eff`). Cheap to clone; clones share the lazily built
/// interpolation table.
#[derive(Debug, Clone)]
pub struct SquareChannelLaw {
    inner: Arc<Inner>,
}

/// Points on the linear and on the logarithmic part of the starting table grid.
pub const TABLE_POINTS: usize = 256;

/// Interpolation accuracy the table is refined to.
pub const TABLE_ABS_TOL: f64 = 1e-10;
pub const TABLE_REL_TOL: f64 = 1e-6;

const TABLE_MAX_ROUNDS: usize = 40;
const TABLE_MAX_NODES: usize = 1 << 17;

impl SquareChannelLaw {
    pub(crate) fn from_parts(parts: LawParts) -> Self {
        let mut singular: Vec<f64> = parts
            .singular
            .into_iter()
            .filter(|x| x.is_finite() && *x >= 0.0 && *x <= parts.support.1)
            .collect();
        singular.push(parts.support.0);
        singular.push(parts.support.1);
        singular.sort_by(f64::total_cmp);
        singular.dedup();
        Self {
            inner: Arc::new(Inner {
                model: Some(parts.model),
                atom_mass: parts.atom_mass,
                support: parts.support,
                scale: parts.scale,
                normalization: parts.normalization,
                point: None,
                singular,
                models: parts.models,
                warnings: parts.warnings,
                integral_backed: parts.integral_backed,
                table: OnceLock::new(),
            }),
        }
    }

    /// Law concentrated at `x0 >= 0`. At `x0 = 0` this is a pure atom.
    pub fn degenerate(x0: f64) -> Result<Self> {
        Self::degenerate_named(x0, vec!["degenerate law".into()], Vec::new())
    }

    pub(crate) fn degenerate_named(
        x0: f64,
        models: Vec<String>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        if !(x0 >= 0.0 && x0.is_finite()) {
            return Err(Error::invalid("x0", format!("must be finite and >= 0, got {x0}")));
        }
        let at_zero = x0 == 0.0;
        Ok(Self {
            inner: Arc::new(Inner {
                model: None,
                atom_mass: if at_zero { 1.0 } else { 0.0 },
                support: (x0, x0),
                scale: 1.0,
                normalization: 1.0,
                point: (!at_zero).then_some(x0),
                singular: vec![x0],
                models,
                warnings,
                integral_backed: false,
                table: OnceLock::new(),
            }),
        })
    }

    /// Mass `c_δ` of the atom at zero.
    pub fn atom_mass(&self) -> f64 {
        self.inner.atom_mass
    }

    /// Support `[x_lo, x_hi]` of the continuous part.
    pub fn support(&self) -> (f64, f64) {
        self.inner.support
    }

    /// Upper end of the whole law.
    pub fn upper(&self) -> f64 {
        self.inner.support.1
    }

    /// Factor that maps the normalised variable to channel-gain-squared
    /// units (`h_c² h_d²` for a fixed location, `h_c²` otherwise).
    pub fn scale(&self) -> f64 {
        self.inner.scale
    }

    /// The numerically computed normalisation constant of the continuous part.
    pub fn normalization(&self) -> f64 {
        self.inner.normalization
    }

    /// Location of a unit point mass away from zero, if the law is one.
    pub fn point_mass_location(&self) -> Option<f64> {
        self.inner.point
    }

    /// Points where the pdf is singular, jumps or has a kink. Always contains
    /// both support ends.
    pub fn singular_points(&self) -> &[f64] {
        &self.inner.singular
    }

    /// Descriptive names of the analytical models the law exercises.
    pub fn models(&self) -> &[String] {
        &self.inner.models
    }

    pub fn warnings(&self) -> &[String] {
        &self.inner.warnings
    }

    /// True when cdf and pdf evaluations run a numerical integral.
    pub fn is_integral_backed(&self) -> bool {
        self.inner.integral_backed
    }

    /// `P{X <= x}`, including the atom. Quadrature shortfalls are ignored;
    /// see [`try_cdf_at`](Self::try_cdf_at).
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.cdf_estimate(x).value
    }

    pub fn try_cdf_at(&self, x: f64) -> Result<f64> {
        let est = self.cdf_estimate(x);
        if est.converged {
            Ok(est.value)
        } else {
            Err(Error::Quadrature {
                achieved: est.error,
                requested: 0.0,
            })
        }
    }

    fn cdf_estimate(&self, x: f64) -> Estimate {
        let (lo, hi) = self.inner.support;
        if x.is_nan() {
            return Estimate::exact(f64::NAN);
        }
        if x < 0.0 {
            return Estimate::exact(0.0);
        }
        if let Some(p) = self.inner.point {
            return Estimate::exact(if x >= p { 1.0 } else { 0.0 });
        }
        if x >= hi {
            return Estimate::exact(1.0);
        }
        if x < lo {
            return Estimate::exact(self.inner.atom_mass);
        }
        match &self.inner.model {
            Some(m) => {
                let est = m.cdf(x);
                Estimate {
                    value: est.value.clamp(0.0, 1.0),
                    ..est
                }
            }
            None => Estimate::exact(self.inner.atom_mass),
        }
    }

    /// `P{X < x}`; differs from [`cdf_at`](Self::cdf_at) only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if let Some(p) = self.inner.point {
            return if x > p { 1.0 } else { 0.0 };
        }
        self.cdf_at(x)
    }

    /// Density of the continuous part (the atom is reported separately).
    pub fn pdf_at(&self, x: f64) -> f64 {
        self.pdf_estimate(x).value
    }

    pub fn try_pdf_at(&self, x: f64) -> Result<f64> {
        let est = self.pdf_estimate(x);
        if est.converged {
            Ok(est.value)
        } else {
            Err(Error::Quadrature {
                achieved: est.error,
                requested: 0.0,
            })
        }
    }

    fn pdf_estimate(&self, x: f64) -> Estimate {
        let (lo, hi) = self.inner.support;
        if self.inner.point.is_some() || !(x > 0.0) || x < lo || x > hi {
            return Estimate::exact(0.0);
        }
        match &self.inner.model {
            Some(m) => m.pdf(x),
            None => Estimate::exact(0.0),
        }
    }

    /// Central finite difference of the cdf with step `1e-6` of the support
    /// width; a fallback for checking analytical densities.
    pub fn pdf_finite_difference(&self, x: f64) -> f64 {
        let (lo, hi) = self.inner.support;
        let h = 1e-6 * (hi - lo).max(hi * 1e-3);
        if h == 0.0 {
            return 0.0;
        }
        (self.cdf_at(x + h) - self.cdf_at(x - h)) / (2.0 * h)
    }

    /// `∫ pdf` over the continuous support, split at the singular points.
    pub fn continuous_mass(&self, integrator: &Integrator) -> Estimate {
        if self.inner.point.is_some() || self.inner.model.is_none() {
            return Estimate::exact(0.0);
        }
        let (lo, hi) = self.inner.support;
        integrator.integrate_singular_breaks(|x| self.pdf_at(x), lo, hi, &self.inner.singular)
    }

    /// Monotone interpolation table of the cdf, built on first use. A fixed
    /// grid is refined at interval midpoints until the interpolant matches the
    /// cdf to `TABLE_ABS_TOL + TABLE_REL_TOL * F` there.
    pub fn table(&self) -> Result<&TabulatedCdf> {
        if let Some(t) = self.inner.table.get() {
            return Ok(t);
        }
        let mut grid = table_grid(self.inner.support, &self.inner.singular);
        let mut values = self.cdf_values(&grid)?;
        let mut pending: Vec<usize> = (0..grid.len() - 1).collect();
        for _ in 0..TABLE_MAX_ROUNDS {
            let table = monotone_table(&grid, &values)?;
            let mids: Vec<f64> = pending
                .iter()
                .map(|&k| 0.5 * (grid[k] + grid[k + 1]))
                .filter(|m| *m > 0.0)
                .collect();
            let truth = self.cdf_values(&mids)?;
            let mut fresh: Vec<(f64, f64)> = mids
                .into_iter()
                .zip(truth)
                .filter(|(m, f)| {
                    (table.eval(*m) - f).abs() > TABLE_ABS_TOL + TABLE_REL_TOL * f
                })
                .collect();
            if fresh.is_empty() || grid.len() + fresh.len() > TABLE_MAX_NODES {
                break;
            }
            fresh.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged = Vec::with_capacity(grid.len() + fresh.len());
            let mut inserted = Vec::with_capacity(fresh.len());
            let (mut i, mut j) = (0, 0);
            while i < grid.len() || j < fresh.len() {
                if j < fresh.len() && (i == grid.len() || fresh[j].0 < grid[i]) {
                    inserted.push(merged.len());
                    merged.push(fresh[j]);
                    j += 1;
                } else {
                    merged.push((grid[i], values[i]));
                    i += 1;
                }
            }
            // a new node moves the slopes of its neighbours, so the two
            // intervals on either side get checked again
            pending = inserted
                .iter()
                .flat_map(|&n| n.saturating_sub(2)..(n + 2).min(merged.len() - 1))
                .collect();
            pending.sort_unstable();
            pending.dedup();
            grid = merged.iter().map(|p| p.0).collect();
            values = merged.iter().map(|p| p.1).collect();
        }
        let table = monotone_table(&grid, &values)?;
        Ok(self.inner.table.get_or_init(|| table))
    }

    fn cdf_values(&self, xs: &[f64]) -> Result<Vec<f64>> {
        parallel_map(xs, |x| self.try_cdf_at(x)).into_iter().collect()
    }

    /// Cdf through the interpolation table for integral-backed laws, and the
    /// exact closed form otherwise.
    pub fn cdf_fast(&self, x: f64) -> Result<f64> {
        if !self.inner.integral_backed || x < 0.0 || x >= self.upper() {
            return Ok(self.cdf_at(x));
        }
        Ok(self.table()?.eval(x))
    }
}

/// Running maximum of the values, last one pinned to 1.
fn monotone_table(grid: &[f64], values: &[f64]) -> Result<TabulatedCdf> {
    let mut running = 0.0f64;
    let mut f: Vec<f64> = values
        .iter()
        .map(|v| {
            running = running.max(*v);
            running
        })
        .collect();
    if let Some(last) = f.last_mut() {
        *last = 1.0;
    }
    TabulatedCdf::new(grid.to_vec(), f)
}

fn parallel_map<T: Send>(xs: &[f64], f: impl Fn(f64) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get());
    if xs.len() < 64 || threads == 1 {
        return xs.iter().map(|x| f(*x)).collect();
    }
    let size = xs.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = xs
            .chunks(size)
            .map(|part| scope.spawn(move || part.iter().map(|x| f(*x)).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("table thread panicked"))
            .collect()
    })
}

fn table_grid(support: (f64, f64), singular: &[f64]) -> Vec<f64> {
    let (lo, hi) = support;
    let n = TABLE_POINTS;
    let mut grid = Vec::with_capacity(2 * n + 32 * singular.len() + 2);
    grid.push(0.0);
    grid.push(lo);
    for k in 0..n {
        grid.push(hi * k as f64 / (n - 1) as f64);
    }
    let ratio = 1e-8f64;
    for k in 0..n {
        grid.push(hi * ratio.powf(1.0 - k as f64 / (n - 1) as f64));
    }
    for &p in singular {
        for j in (10..=30).step_by(2) {
            let off = hi * 2f64.powi(-j);
            grid.push(p - off);
            grid.push(p + off);
        }
    }
    grid.retain(|x| x.is_finite() && *x >= 0.0 && *x <= hi);
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Piecewise-cubic monotone (Fritsch-Carlson) interpolant of tabulated
/// nondecreasing values.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    x: Vec<f64>,
    f: Vec<f64>,
    m: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new(x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if x.len() != f.len() {
            return Err(Error::invalid("f", "abscissae and values differ in length"));
        }
        if x.len() < 2 {
            return Err(Error::Empty("interpolation table needs two nodes"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("x", "abscissae must be strictly increasing"));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (f[k + 1] - f[k]) / h[k]).collect();
        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = delta[0];
            m[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (delta[k - 1], delta[k]);
                if d0 * d1 > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, f, m })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// Interpolated value; constant extrapolation outside the nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.f[0];
        }
        if x >= self.x[n - 1] {
            return self.f[n - 1];
        }
        let k = self.x.partition_point(|v| *v <= x) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.f[k] + h10 * h * self.m[k] + h01 * self.f[k + 1] + h11 * h * self.m[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pchip_reproduces_linear_data() {
        let x: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let f: Vec<f64> = x.iter().map(|v| 0.1 * v).collect();
        let t = TabulatedCdf::new(x, f).unwrap();
        for k in 0..90 {
            let v = k as f64 * 0.05;
            assert!((t.eval(v) - 0.1 * v).abs() < 1e-14);
        }
    }

    #[test]
    fn pchip_is_monotone_on_steps() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let f = vec![0.0, 0.0, 0.1, 0.9, 1.0, 1.0];
        let t = TabulatedCdf::new(x, f).unwrap();
        let mut prev = -1.0;
        for k in 0..=500 {
            let v = t.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn pchip_rejects_bad_nodes() {
        assert!(TabulatedCdf::new(vec![0.0], vec![0.0]).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn degenerate_laws() {
        let p = SquareChannelLaw::degenerate(2.0).unwrap();
        assert_eq!(p.cdf_at(1.999), 0.0);
        assert_eq!(p.cdf_at(2.0), 1.0);
        assert_eq!(p.cdf_left(2.0), 0.0);
        assert_eq!(p.pdf_at(2.0), 0.0);
        assert_eq!(p.atom_mass(), 0.0);
        let z = SquareChannelLaw::degenerate(0.0).unwrap();
        assert_eq!(z.atom_mass(), 1.0);
        assert_eq!(z.cdf_at(0.0), 1.0);
        assert_eq!(z.cdf_at(-1e-30), 0.0);
        assert!(SquareChannelLaw::degenerate(-1.0).is_err());
    }
}
