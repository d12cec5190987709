//! Linear LED arrays: per-LED gains as the receiver normal tilts by `φ` in
//! the array plane, and the partition of the `φ` axis by the two strongest
//! LEDs.
//!
//! LED `i` (1-based) hangs at `(i - 1)·D` along the line, `ℓ` above the
//! receiver plane. An LED at horizontal offset `Δp` from the user is seen at
//! elevation `α = atan2(Δp, ℓ)` from the vertical, and the incidence angle
//! for a normal tilted by `φ` is `|α - φ|`.

use serde::{Deserialize, Serialize};

use crate::channel::{los_gain_at, LinkGeometry};
use crate::error::{Error, Result};

/// Width below which a region boundary counts as located, degrees.
const BOUNDARY_TOL: f64 = 1e-7;

/// Elevation of each LED seen from `user` (degrees, signed).
pub fn elevations(positions: &[f64], user: f64, ell: f64) -> Vec<f64> {
    positions
        .iter()
        .map(|p| (p - user).atan2(ell).to_degrees())
        .collect()
}

/// Incidence angle of a normal tilted by `phi` towards an LED at elevation
/// `alpha`.
pub fn incidence(alpha: f64, phi: f64) -> f64 {
    (alpha - phi).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearArrayScenario {
    pub n_leds: usize,
    pub spacing: f64,
    /// Offset of the user from `reference_led`, meters.
    pub user_offset: f64,
    /// 1-based LED the offset is measured from.
    pub reference_led: usize,
    /// Height, FOV and LED/detector parameters; its own `d` is unused.
    pub geometry: LinkGeometry,
}

impl LinearArrayScenario {
    /// Offset measured from the LED just left of the array centre.
    pub fn new(
        n_leds: usize,
        spacing: f64,
        user_offset: f64,
        geometry: LinkGeometry,
    ) -> Result<Self> {
        Self::with_reference(n_leds, spacing, user_offset, (n_leds - 1) / 2 + 1, geometry)
    }

    pub fn with_reference(
        n_leds: usize,
        spacing: f64,
        user_offset: f64,
        reference_led: usize,
        geometry: LinkGeometry,
    ) -> Result<Self> {
        let s = Self {
            n_leds,
            spacing,
            user_offset,
            reference_led,
            geometry,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_leds < 2 {
            return Err(Error::invalid("n_leds", "need at least two LEDs"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        if self.reference_led == 0 || self.reference_led > self.n_leds {
            return Err(Error::invalid("reference_led", "not an LED of the array"));
        }
        let span = (self.n_leds - 1) as f64 * self.spacing;
        let user = self.user_position();
        if !(self.user_offset.is_finite() && (0.0..=span).contains(&user)) {
            return Err(Error::invalid(
                "user_offset",
                format!("user at {user} m is outside the array [0, {span}]"),
            ));
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_leds).map(|i| i as f64 * self.spacing).collect()
    }

    pub fn user_position(&self) -> f64 {
        (self.reference_led - 1) as f64 * self.spacing + self.user_offset
    }

    pub fn elevations(&self) -> Vec<f64> {
        elevations(&self.positions(), self.user_position(), self.geometry.ell())
    }

    /// LOS gain of every LED at tilt `phi`; zero outside the FOV.
    pub fn gains_at(&self, phi: f64) -> Vec<f64> {
        let user = self.user_position();
        self.positions()
            .iter()
            .zip(self.elevations())
            .map(|(p, a)| los_gain_at(&self.geometry, (p - user).abs(), incidence(a, phi)))
            .collect()
    }

    /// 1-based indices of the strongest and second-strongest LED; equal
    /// gains go to the lower index.
    pub fn top_two(&self, phi: f64) -> (usize, usize) {
        let gains = self.gains_at(phi);
        let mut order: Vec<usize> = (0..gains.len()).collect();
        order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
        (order[0] + 1, order[1] + 1)
    }
}

/// Gains per LED: `out[i][k]` is LED `i + 1` at `phi_grid[k]`.
pub fn gain_sweep(scenario: &LinearArrayScenario, phi_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    if let Some(bad) = phi_grid.iter().find(|p| !(-180.0..=180.0).contains(*p)) {
        return Err(Error::Domain(format!("tilt {bad} outside [-180, 180]")));
    }
    let mut out = vec![Vec::with_capacity(phi_grid.len()); scenario.n_leds];
    for &phi in phi_grid {
        for (row, g) in out.iter_mut().zip(scenario.gains_at(phi)) {
            row.push(g);
        }
    }
    Ok(out)
}

/// Segmentation of a tilt range by the two strongest LEDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub range: (f64, f64),
    /// Interior boundaries, increasing.
    pub boundaries: Vec<f64>,
    /// `(strongest, second)` per region, 1-based.
    pub labels: Vec<(usize, usize)>,
}

impl RegionPartition {
    /// Index of the region holding `phi`; a boundary belongs to the region
    /// on its right.
    pub fn region_of(&self, phi: f64) -> usize {
        self.boundaries.partition_point(|b| *b <= phi)
    }

    /// `(lo, hi)` of region `k`.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { self.range.0 } else { self.boundaries[k - 1] };
        let hi = self.boundaries.get(k).copied().unwrap_or(self.range.1);
        (lo, hi)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Scans `phi_range` on `resolution` points and bisects every label change.
pub fn region_partition(
    scenario: &LinearArrayScenario,
    phi_range: (f64, f64),
    resolution: usize,
) -> Result<RegionPartition> {
    let (lo, hi) = phi_range;
    if !(lo < hi) || lo < -180.0 || hi > 180.0 {
        return Err(Error::Domain(format!("bad tilt range [{lo}, {hi}]")));
    }
    if resolution < 1000 {
        return Err(Error::invalid("resolution", "need at least 1000 points"));
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    let mut boundaries = Vec::new();
    let mut labels = vec![scenario.top_two(lo)];
    let mut prev = lo;
    for k in 1..resolution {
        let phi = if k == resolution - 1 { hi } else { lo + k as f64 * step };
        let label = scenario.top_two(phi);
        // a cell can hold more than one change when a region is thinner
        // than the scan step; walk them left to right
        let mut from = prev;
        let mut current = *labels.last().unwrap_or(&label);
        while label != current {
            let (mut a, mut b) = (from, phi);
            while b - a > BOUNDARY_TOL {
                let mid = 0.5 * (a + b);
                if scenario.top_two(mid) == current {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            current = scenario.top_two(b);
            boundaries.push(b);
            labels.push(current);
            from = b;
        }
        prev = phi;
    }
    Ok(RegionPartition {
        range: phi_range,
        boundaries,
        labels,
    })
}

/// Whether one pair of LEDs decides the strongest signal over
/// `phi_region`: the unordered top-two pair is the same in every region the
/// interval touches. Returns the pair (lower index first) when it is.
pub fn two_led_reducible(
    partition: &RegionPartition,
    phi_region: (f64, f64),
) -> (bool, Option<(usize, usize)>) {
    let first = partition.region_of(phi_region.0);
    let last = partition.region_of(phi_region.1);
    let pair = |(a, b): (usize, usize)| (a.min(b), a.max(b));
    let want = pair(partition.labels[first]);
    if partition.labels[first..=last].iter().all(|l| pair(*l) == want) {
        (true, Some(want))
    } else {
        (false, None)
    }
}

/// One row of the joint wide/narrow table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRegion {
    pub lo: f64,
    pub hi: f64,
    pub wide: (usize, usize),
    pub narrow: (usize, usize),
}

/// Common refinement of two partitions of the same range, one row per
/// region of the refinement.
pub fn joint_regions(wide: &RegionPartition, narrow: &RegionPartition) -> Vec<JointRegion> {
    let mut cuts: Vec<f64> = wide
        .boundaries
        .iter()
        .chain(&narrow.boundaries)
        .copied()
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 10.0 * BOUNDARY_TOL);
    let mut edges = vec![wide.range.0];
    edges.extend(cuts);
    edges.push(wide.range.1);
    edges
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            JointRegion {
                lo: w[0],
                hi: w[1],
                wide: wide.labels[wide.region_of(mid)],
                narrow: narrow.labels[narrow.region_of(mid)],
            }
        })
        .collect()
}
