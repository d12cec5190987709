//! JSON scenario configs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlc_orient::channel::{FovMode, LinkGeometry};
use vlc_orient::distributions::DistributionSpec;
use vlc_orient::multi_led::LinearArrayScenario;
use vlc_orient::scenario::Scenario;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleFixed,
    SingleRandom,
    TwoLedFixed,
    TwoLedRandom,
    MultiLed,
}

/// Either explicit values or an evenly stepped range, both ends included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

impl Grid {
    pub fn values(&self, field: &str) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { from, to, step } => {
                if !(*step > 0.0 && from <= to && (to - from) / step <= 1e6) {
                    return Err(CliError::Config(format!("{field}: bad range")));
                }
                let n = ((to - from) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| from + k as f64 * step).collect()
            }
        };
        if v.is_empty() {
            return Err(CliError::Config(format!("{field}: grid is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Config(format!(
                "{field}: grid must be finite and strictly increasing"
            )));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsBlock {
    pub snr_db: Option<Grid>,
    /// Outage thresholds on `h²`.
    pub thresholds: Option<Grid>,
    /// Points of the pdf/cdf grids over the support.
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(default = "default_samples")]
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_samples() -> usize {
    1_000_000
}

fn default_seed() -> u64 {
    1
}

impl Default for McBlock {
    fn default() -> Self {
        Self {
            n: default_samples(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiLedBlock {
    pub n_leds: usize,
    pub spacing: f64,
    pub user_offset: f64,
    /// 1-based; defaults to the LED just left of the centre.
    pub reference_led: Option<usize>,
    #[serde(default = "default_phi_range")]
    pub phi_range: (f64, f64),
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Second FOV for a side-by-side partition.
    pub compare_fov: Option<f64>,
}

fn default_phi_range() -> (f64, f64) {
    (-90.0, 90.0)
}

fn default_resolution() -> usize {
    10_000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    /// Prepended to every artifact name.
    #[serde(default)]
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub geometry: LinkGeometry,
    pub theta_dist: Option<DistributionSpec>,
    pub d_dist: Option<DistributionSpec>,
    pub fov_mode: Option<FovMode>,
    #[serde(default)]
    pub metrics: MetricsBlock,
    #[serde(default)]
    pub mc: McBlock,
    pub multi_led: Option<MultiLedBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        Ok((cfg, bytes))
    }

    fn check(&self) -> Result<(), CliError> {
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "scenario {:?} needs `{field}`",
                    self.scenario
                )))
            }
        };
        match self.scenario {
            ScenarioKind::SingleFixed | ScenarioKind::TwoLedFixed => {
                need(self.theta_dist.is_some(), "theta_dist")?
            }
            ScenarioKind::SingleRandom | ScenarioKind::TwoLedRandom => {
                need(self.theta_dist.is_some(), "theta_dist")?;
                need(self.d_dist.is_some(), "d_dist")?;
            }
            ScenarioKind::MultiLed => need(self.multi_led.is_some(), "multi_led")?,
        }
        if matches!(self.scenario, ScenarioKind::TwoLedFixed | ScenarioKind::TwoLedRandom) {
            need(self.geometry.spacing().is_some(), "geometry.spacing")?;
        }
        if let Some(g) = &self.metrics.snr_db {
            g.values("metrics.snr_db")?;
        }
        if let Some(g) = &self.metrics.thresholds {
            let t = g.values("metrics.thresholds")?;
            if t[0] < 0.0 {
                return Err(CliError::Config("metrics.thresholds: negative threshold".into()));
            }
        }
        Ok(())
    }

    /// The link scenario; `None` for LED arrays.
    pub fn scenario(&self) -> Option<Scenario> {
        let theta = self.theta_dist.clone()?;
        let geometry = self.geometry.clone();
        Some(match self.scenario {
            ScenarioKind::SingleFixed => Scenario::SingleFixed {
                theta,
                geometry,
                fov_mode: self.fov_mode.unwrap_or(FovMode::Narrow),
            },
            ScenarioKind::SingleRandom => Scenario::SingleRandom {
                theta,
                d: self.d_dist.clone()?,
                geometry,
            },
            ScenarioKind::TwoLedFixed => Scenario::TwoLedFixed { theta, geometry },
            ScenarioKind::TwoLedRandom => Scenario::TwoLedRandom {
                theta,
                d: self.d_dist.clone()?,
                geometry,
            },
            ScenarioKind::MultiLed => return None,
        })
    }

    /// The array, with the FOV replaced when `fov` is given.
    pub fn array(&self, fov: Option<f64>) -> Result<Option<LinearArrayScenario>, CliError> {
        let Some(m) = &self.multi_led else {
            return Ok(None);
        };
        let geometry = match fov {
            Some(f) => self.geometry.clone().with_fov(f)?,
            None => self.geometry.clone(),
        };
        let reference = m.reference_led.unwrap_or((m.n_leds.max(1) - 1) / 2 + 1);
        Ok(Some(LinearArrayScenario::with_reference(
            m.n_leds,
            m.spacing,
            m.user_offset,
            reference,
            geometry,
        )?))
    }
}
