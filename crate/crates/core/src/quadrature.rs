//! Adaptive Gauss-Kronrod quadrature with support for integrable endpoint
//! singularities.
//!
//! The engine is a global adaptive scheme: the panel with the largest error
//! estimate is bisected until the summed error falls below the requested
//! tolerance. Integrands with inverse-square-root endpoint behaviour are
//! handled by [`Integrator::integrate_singular`], which maps each panel
//! `[a, b]` through `x = a + (b - a) sin²(t)`. The Jacobian
//! `(b - a) sin(2t)` cancels `1/sqrt((x - a)(b - x))` exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Gauss-Kronrod rule used on each panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Gk21,
    Gk61,
}

/// Stopping tolerance: a panel set is accepted once the total error estimate
/// is below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl Estimate {
    /// A value known in closed form.
    pub const fn exact(value: f64) -> Self {
        Self {
            value,
            error: 0.0,
            converged: true,
            evaluations: 0,
        }
    }

    /// Converts a non-converged estimate into [`Error::Quadrature`].
    pub fn require(self, requested: f64) -> Result<f64> {
        if self.converged || self.error <= requested {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                achieved: self.error,
                requested,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rule: Rule,
    pub tol: Tolerance,
    pub max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            rule: Rule::Gk21,
            tol: Tolerance::new(1e-15, 1e-10),
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

impl Integrator {
    pub fn new(rule: Rule, tol: Tolerance) -> Self {
        Self {
            rule,
            tol,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, abs: f64, rel: f64) -> Self {
        self.tol = Tolerance::new(abs, rel);
        self
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Estimate {
        self.integrate_breaks(f, a, b, &[])
    }

    /// Integrates over `[a, b]` with an initial partition at `breaks`
    /// (values outside the open interval are ignored).
    pub fn integrate_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Estimate {
        if !(b > a) {
            return Estimate {
                value: 0.0,
                error: 0.0,
                converged: true,
                evaluations: 0,
            };
        }
        let nodes = partition(a, b, breaks);
        let per_panel = match self.rule {
            Rule::Gk21 => 21,
            Rule::Gk61 => 61,
        };
        let mut heap = BinaryHeap::with_capacity(nodes.len() + 16);
        let mut evaluations = 0usize;
        let mut value = 0.0;
        let mut error = 0.0;
        for w in nodes.windows(2) {
            let (v, e) = self.apply(&f, w[0], w[1]);
            evaluations += per_panel;
            value += v;
            error += e;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value: v,
                error: e,
            });
        }

        while error > self.tol.target(value) && heap.len() < self.max_panels {
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE)
            {
                // Panel cannot be split further in floating point.
                heap.push(Panel { error: 0.0, ..worst });
                error -= worst.error;
                continue;
            }
            let (v1, e1) = self.apply(&f, worst.a, mid);
            let (v2, e2) = self.apply(&f, mid, worst.b);
            evaluations += 2 * per_panel;
            value += v1 + v2 - worst.value;
            error += e1 + e2 - worst.error;
            heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        }

        // Re-sum to shed the drift of incremental updates.
        let (mut value, mut error) = (0.0, 0.0);
        for p in heap.iter() {
            value += p.value;
            error += p.error;
        }
        Estimate {
            value,
            error,
            converged: error <= self.tol.target(value),
            evaluations,
        }
    }

    /// Integrates `f` over `[a, b]` where `f` may carry integrable
    /// `1/sqrt` singularities at either endpoint.
    pub fn integrate_singular<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Estimate {
        self.integrate_singular_breaks(f, a, b, &[])
    }

    /// As [`Integrator::integrate_singular`], with every break point treated
    /// as a potential singularity of the integrand.
    pub fn integrate_singular_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Estimate {
        if !(b > a) {
            return self.integrate(&f, a, a);
        }
        let nodes = partition(a, b, breaks);
        let panels = nodes.len() - 1;
        let mapped = |tau: f64| {
            let k = ((tau / FRAC_PI_2).floor() as usize).min(panels - 1);
            let t = tau - k as f64 * FRAC_PI_2;
            let (lo, hi) = (nodes[k], nodes[k + 1]);
            let width = hi - lo;
            let s = t.sin();
            let x = lo + width * s * s;
            let jac = width * (2.0 * t).sin();
            if jac == 0.0 {
                0.0
            } else {
                f(x.clamp(lo, hi)) * jac
            }
        };
        let seams: Vec<f64> = (1..panels).map(|k| k as f64 * FRAC_PI_2).collect();
        self.integrate_breaks(mapped, 0.0, panels as f64 * FRAC_PI_2, &seams)
    }

    fn apply<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> (f64, f64) {
        match self.rule {
            Rule::Gk21 => kronrod(f, a, b, &GK21_XGK, &GK21_WG, &GK21_WGK),
            Rule::Gk61 => kronrod(f, a, b, &GK61_XGK, &GK61_WG, &GK61_WGK),
        }
    }
}

fn partition(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(breaks.len() + 2);
    nodes.push(a);
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    nodes.extend(inner);
    nodes.push(b);
    nodes
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One Gauss-Kronrod panel. Gauss nodes sit at the odd positions of `xgk`.
fn kronrod<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    xgk: &[f64],
    wg: &[f64],
    wgk: &[f64],
) -> (f64, f64) {
    let n = xgk.len();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * wgk[n - 1];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0f64; 31];
    let mut fv2 = [0.0f64; 31];
    for j in 0..n - 1 {
        let dx = half * xgk[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += wgk[j] * (f1 + f2);
        res_abs += wgk[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += wg[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = wgk[n - 1] * (fc - mean).abs();
    for j in 0..n - 1 {
        res_asc += wgk[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let h = half.abs();
    (res_k * half, rescale_error(err, res_abs * h, res_asc * h))
}

#[allow(clippy::excessive_precision)]
const GK21_XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const GK21_WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const GK21_WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
#[allow(clippy::excessive_precision)]
const GK61_XGK: [f64; 31] = [
    0.999_484_410_050_490_637_571_325_895_705_811,
    0.996_893_484_074_649_540_271_630_050_918_695,
    0.991_630_996_870_404_594_858_628_366_109_486,
    0.983_668_123_279_747_209_970_032_581_605_663,
    0.973_116_322_501_126_268_374_693_868_423_707,
    0.960_021_864_968_307_512_216_871_025_581_798,
    0.944_374_444_748_559_979_415_831_324_037_439,
    0.926_200_047_429_274_325_879_324_277_080_474,
    0.905_573_307_699_907_798_546_522_558_925_958,
    0.882_560_535_792_052_681_543_116_462_530_226,
    0.857_205_233_546_061_098_958_658_510_658_944,
    0.829_565_762_382_768_397_442_898_119_732_502,
    0.799_727_835_821_839_083_013_668_942_322_683,
    0.767_777_432_104_826_194_917_977_340_974_503,
    0.733_790_062_453_226_804_726_171_131_369_528,
    0.697_850_494_793_315_796_932_292_388_026_640,
    0.660_061_064_126_626_961_370_053_668_149_271,
    0.620_526_182_989_242_861_140_477_556_431_189,
    0.579_345_235_826_361_691_756_024_932_172_540,
    0.536_624_148_142_019_899_264_169_793_311_073,
    0.492_480_467_861_778_574_993_693_061_207_709,
    0.447_033_769_538_089_176_780_609_900_322_854,
    0.400_401_254_830_394_392_535_476_211_542_661,
    0.352_704_725_530_878_113_471_037_207_089_374,
    0.304_073_202_273_625_077_372_677_107_199_257,
    0.254_636_926_167_889_846_439_805_129_817_805,
    0.204_525_116_682_309_891_438_957_671_002_025,
    0.153_869_913_608_583_546_963_794_672_743_256,
    0.102_806_937_966_737_030_147_096_751_318_001,
    0.051_471_842_555_317_695_833_025_213_166_723,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const GK61_WG: [f64; 15] = [
    0.007_968_192_496_166_605_615_465_883_474_674,
    0.018_466_468_311_090_959_142_302_131_912_047,
    0.028_784_707_883_323_369_349_719_179_611_292,
    0.038_799_192_569_627_049_596_801_936_446_348,
    0.048_402_672_830_594_052_902_938_140_422_808,
    0.057_493_156_217_619_066_481_721_689_402_056,
    0.065_974_229_882_180_495_128_128_515_115_962,
    0.073_755_974_737_705_206_268_243_850_022_191,
    0.080_755_895_229_420_215_354_694_938_460_530,
    0.086_899_787_201_082_979_802_387_530_715_126,
    0.092_122_522_237_786_128_717_632_707_087_619,
    0.096_368_737_174_644_259_639_468_626_351_810,
    0.099_593_420_586_795_267_062_780_282_103_569,
    0.101_762_389_748_405_504_596_428_952_168_554,
    0.102_852_652_893_558_840_341_285_636_705_415,
];
#[allow(clippy::excessive_precision)]
const GK61_WGK: [f64; 31] = [
    0.001_389_013_698_677_007_624_551_591_226_760,
    0.003_890_461_127_099_884_051_267_201_844_516,
    0.006_630_703_915_931_292_173_319_826_369_750,
    0.009_273_279_659_517_763_428_441_146_892_024,
    0.011_823_015_253_496_341_742_232_898_853_251,
    0.014_369_729_507_045_804_812_451_432_443_580,
    0.016_920_889_189_053_272_627_572_289_420_322,
    0.019_414_141_193_942_381_173_408_951_050_128,
    0.021_828_035_821_609_192_297_167_485_738_339,
    0.024_191_162_078_080_601_365_686_370_725_232,
    0.026_509_954_882_333_101_610_601_709_335_075,
    0.028_754_048_765_041_292_843_978_785_354_334,
    0.030_907_257_562_387_762_472_884_252_943_092,
    0.032_981_447_057_483_726_031_814_191_016_854,
    0.034_979_338_028_060_024_137_499_670_731_468,
    0.036_882_364_651_821_229_223_911_065_617_136,
    0.038_678_945_624_727_592_950_348_651_532_281,
    0.040_374_538_951_535_959_111_995_279_752_468,
    0.041_969_810_215_164_246_147_147_541_285_970,
    0.043_452_539_701_356_069_316_831_728_117_073,
    0.044_814_800_133_162_663_192_355_551_616_723,
    0.046_059_238_271_006_988_116_271_735_559_374,
    0.047_185_546_569_299_153_945_261_478_181_099,
    0.048_185_861_757_087_129_140_779_492_298_305,
    0.049_055_434_555_029_778_887_528_165_367_238,
    0.049_795_683_427_074_206_357_811_569_379_942,
    0.050_405_921_402_782_346_840_893_085_653_585,
    0.050_881_795_898_749_606_492_297_473_049_805,
    0.051_221_547_849_258_772_170_656_282_604_944,
    0.051_426_128_537_459_025_933_862_879_215_781,
    0.051_494_729_429_451_567_558_340_433_647_099,
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gk_rules_are_exact_on_polynomials() {
        for rule in [Rule::Gk21, Rule::Gk61] {
            let q = Integrator::new(rule, Tolerance::new(0.0, 1e-12));
            let est = q.integrate(|x| 5.0 * x.powi(9) - 2.0 * x.powi(4) + 1.0, -1.0, 2.0);
            let exact = 5.0 * (2f64.powi(10) - 1.0) / 10.0 - 2.0 * (32.0 + 1.0) / 5.0 + 3.0;
            assert!((est.value - exact).abs() < 1e-12, "{rule:?}: {}", est.value);
            assert!(est.converged);
        }
    }

    #[test]
    fn arcsine_kernel_integrates_to_half_pi() {
        let q = Integrator::default();
        let est = q.integrate_singular(|x| 1.0 / (4.0 * x * (1.0 - x)).sqrt(), 0.0, 1.0);
        assert!((est.value - PI / 2.0).abs() < 1e-10, "{}", est.value);
    }

    #[test]
    fn plain_adaptive_handles_sqrt_endpoint() {
        let q = Integrator::default().with_tolerance(0.0, 1e-10);
        let est = q.integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0);
        assert!((est.value - 2.0).abs() < 1e-8, "{}", est.value);
    }

    #[test]
    fn breaks_resolve_jumps() {
        let q = Integrator::default();
        let step = |x: f64| if x < 0.3 { 1.0 } else { 4.0 };
        let est = q.integrate_breaks(step, 0.0, 1.0, &[0.3]);
        assert!((est.value - (0.3 + 4.0 * 0.7)).abs() < 1e-13);
        assert!(est.evaluations <= 42);
    }

    #[test]
    fn singular_breaks_map_each_panel() {
        let q = Integrator::default();
        // 1/sqrt|x - 0.5| on [0, 1] = 2 * 2 * sqrt(0.5)
        let est = q.integrate_singular_breaks(|x| 1.0 / (x - 0.5).abs().sqrt(), 0.0, 1.0, &[0.5]);
        assert!((est.value - 4.0 * 0.5f64.sqrt()).abs() < 1e-10, "{}", est.value);
    }

    #[test]
    fn empty_interval_is_zero() {
        let est = Integrator::default().integrate(|_| 1.0, 1.0, 1.0);
        assert_eq!(est.value, 0.0);
        assert!(est.require(1e-9).is_ok());
    }

    #[test]
    fn require_reports_failure() {
        let q = Integrator {
            max_panels: 2,
            ..Integrator::default()
        };
        let est = q.integrate(|x| (1.0 / x).sin() / x.sqrt(), 1e-6, 1.0);
        assert!(!est.converged);
        assert!(matches!(est.require(1e-12), Err(Error::Quadrature { .. })));
    }
}
