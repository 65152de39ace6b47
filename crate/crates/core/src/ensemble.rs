//! Monte Carlo line shapes: sample crystal-domain orientations and
//! fluctuating anisotropy tensors, accumulate detected stick spectra into a
//! histogram, and quantify the polarization contrast.
//!
//! Each sample adds an independently drawn tensor perturbation
//! H = (mean_shift + δ)·I + ten(Q_static(n̂) + Q_fluct) where n̂ follows the
//! orientation distribution, Q_fluct has five iid Gaussian components in an
//! orthonormal tensor basis (a rotation-invariant distribution), and δ is an
//! iid Gaussian scalar shift. Static and dynamic parts compose additively in
//! tensor space.
//!
//! # Determinism
//!
//! Every sample draws from its own counter-based generator (ChaCha8 keyed by
//! the run seed, stream = sample index). Samples are processed in fixed-size
//! blocks whose partial results are merged in block order, so the output is
//! bit-identical for a given (seed, config) regardless of how many threads
//! rayon uses.

use nalgebra::{Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crystal::{
    self, kramers_unlabeled, tensor_hamiltonian, CrystalError, TracelessTensor,
    DEFAULT_RESOLUTION_FLOOR,
};
use crate::fit::{self, FitOptions, TwoGaussianModel};
use crate::optics::{detected_intensity, excited_populations, Geometry, OpticsError};
use crate::units::AxisUnit;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("Kramers pairing failed at sample {sample}: {source}")]
    Pairing { sample: u64, source: CrystalError },
    #[error("optics failure during sampling: {0}")]
    Optics(#[from] OpticsError),
}

/// Gaussian model of the dynamic perturbation (all in cm⁻¹).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationModel {
    /// Standard deviation of each of the five independent tensor components
    /// in the orthonormal tensor basis.
    pub sigma_aniso: f64,
    /// Standard deviation of the scalar (isotropic) shift.
    pub sigma_iso: f64,
    /// Center of the line; absorbs the static isotropic shift.
    pub mean_shift: f64,
}

/// Distribution of the local symmetry-axis direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationDistribution {
    /// Single-crystal case: every sample uses this axis.
    Fixed(Unit<Vector3<f64>>),
    /// Powder case: axes uniform on the sphere.
    IsotropicRandom,
}

/// Energy histogram layout (cm⁻¹).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub e_min: f64,
    pub e_max: f64,
    pub n_bins: usize,
}

impl HistogramSpec {
    pub fn bin_width(&self) -> f64 {
        (self.e_max - self.e_min) / self.n_bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins)
            .map(|i| self.e_min + (i as f64 + 0.5) * w)
            .collect()
    }
}

/// Full specification of one Monte Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_samples: u64,
    /// RNG seed; mandatory so every published number is reproducible.
    pub seed: u64,
    /// Static axial splitting carried by each domain (cm⁻¹).
    pub static_b: f64,
    pub orientation: OrientationDistribution,
    pub fluctuation: FluctuationModel,
    pub geometry: Geometry,
    /// Histogram layout; when omitted, 2 cm⁻¹ bins over mean_shift ± 600.
    #[serde(default)]
    pub histogram: Option<HistogramSpec>,
    /// Width of the Gaussian kernel used to deposit each stick (cm⁻¹);
    /// 0 deposits into the nearest bin.
    pub kernel_width: f64,
}

impl EnsembleConfig {
    /// The histogram layout actually used by the run.
    pub fn histogram_spec(&self) -> HistogramSpec {
        self.histogram.unwrap_or(HistogramSpec {
            e_min: self.fluctuation.mean_shift - 600.0,
            e_max: self.fluctuation.mean_shift + 600.0,
            n_bins: 600,
        })
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let bad = |msg: String| Err(EnsembleError::InvalidConfig(msg));
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if !self.static_b.is_finite() {
            return bad(format!("static_b must be finite, got {}", self.static_b));
        }
        if self.fluctuation.sigma_aniso < 0.0 || self.fluctuation.sigma_aniso.is_nan() {
            return bad(format!(
                "sigma_aniso must be >= 0, got {}",
                self.fluctuation.sigma_aniso
            ));
        }
        if self.fluctuation.sigma_iso < 0.0 || self.fluctuation.sigma_iso.is_nan() {
            return bad(format!(
                "sigma_iso must be >= 0, got {}",
                self.fluctuation.sigma_iso
            ));
        }
        if !self.fluctuation.mean_shift.is_finite() {
            return bad("mean_shift must be finite".into());
        }
        let hist = self.histogram_spec();
        if hist.e_min >= hist.e_max || hist.e_min.is_nan() || hist.e_max.is_nan() {
            return bad(format!(
                "histogram range is empty: e_min {} >= e_max {}",
                hist.e_min, hist.e_max
            ));
        }
        if hist.n_bins < 2 {
            return bad(format!("need at least 2 bins, got {}", hist.n_bins));
        }
        if self.kernel_width < 0.0 || self.kernel_width.is_nan() {
            return bad(format!(
                "kernel_width must be >= 0, got {}",
                self.kernel_width
            ));
        }
        if let OrientationDistribution::Fixed(axis) = &self.orientation {
            if (axis.norm() - 1.0).abs() > 1e-12 {
                return bad(format!(
                    "fixed orientation axis is not unit length: {:?}",
                    axis
                ));
            }
        }
        self.geometry
            .validate()
            .map_err(|e| EnsembleError::InvalidConfig(e.to_string()))
    }
}

/// Binned intensity versus energy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumHistogram {
    pub axis: AxisUnit,
    pub centers: Vec<f64>,
    pub intensities: Vec<f64>,
}

/// Intensity-weighted and unweighted energy statistics of one component.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ComponentStats {
    /// Total detected intensity (the component area).
    pub area: f64,
    /// Monte Carlo standard error of the area.
    pub area_stderr: f64,
    /// Intensity-weighted mean stick energy; None when the area vanishes.
    pub energy_mean: Option<f64>,
    /// Intensity-weighted stick-energy standard deviation.
    pub energy_std: Option<f64>,
    /// Unweighted mean stick energy (always defined).
    pub energy_mean_unweighted: f64,
    /// Unweighted stick-energy standard deviation.
    pub energy_std_unweighted: f64,
}

/// Aggregate results of one run.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub n_samples: u64,
    pub seed: u64,
    pub lower: ComponentStats,
    pub upper: ComponentStats,
    /// Area ratio upper/lower; None when the lower area vanishes.
    pub ratio_upper_lower: Option<f64>,
    /// Monte Carlo standard error of the ratio (delta method).
    pub ratio_stderr: Option<f64>,
    /// Sum of all detected stick intensities.
    pub total_intensity: f64,
    /// Intensity that landed inside the histogram range.
    pub deposited_weight: f64,
    /// Intensity outside the histogram range.
    pub clipped_weight: f64,
    pub clipped_fraction: f64,
    /// Set when more than 1% of the weight was clipped.
    pub clipping_warning: bool,
    /// Samples whose doublets were unresolved (their weight is split evenly
    /// between the two components).
    pub n_degenerate: u64,
    pub degenerate_weight: f64,
}

/// Histogram plus summary; `config` echoes the input for provenance.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationOutput {
    pub config: EnsembleConfig,
    pub histogram: SpectrumHistogram,
    pub summary: EnsembleSummary,
}

const BLOCK: u64 = 4096;
/// Gaussian deposits are truncated at ±8 kernel widths.
const KERNEL_WINDOW: f64 = 8.0;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn chacha_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Stable derivation of independent sub-run seeds (used by the contrast scan
/// and by calibration loops).
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut s = master ^ salt.wrapping_mul(0xa076_1d64_78bd_642f);
    splitmix64(&mut s)
}

/// Counter-based per-test generator; crate tests share it for reproducible
/// randomness.
#[cfg(test)]
pub(crate) fn test_rng(salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(chacha_key(0xa11ce));
    rng.set_stream(salt);
    rng
}

/// Uniform direction on the unit sphere.
pub fn sample_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Unit<Vector3<f64>> {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    Unit::new_unchecked(Vector3::new(r * phi.cos(), r * phi.sin(), z))
}

/// Rotation-invariant Gaussian tensor: five iid Normal(0, sigma) components
/// over the orthonormal tensor basis.
pub fn sample_traceless_tensor<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> TracelessTensor {
    let basis = crystal::tensor_basis();
    let mut m = nalgebra::Matrix3::zeros();
    for b in basis {
        let g: f64 = rng.sample(StandardNormal);
        m += b * (sigma * g);
    }
    TracelessTensor::new_unchecked(m)
}

#[derive(Clone)]
struct BlockAccumulator {
    hist: Vec<f64>,
    clipped: f64,
    total: f64,
    // per-component sums over samples (lower/upper by energy order)
    w_lo: f64,
    w_up: f64,
    w_lo2: f64,
    w_up2: f64,
    w_cross: f64,
    e_lo_w: f64,
    e_lo2_w: f64,
    e_up_w: f64,
    e_up2_w: f64,
    e_lo: f64,
    e_lo2: f64,
    e_up: f64,
    e_up2: f64,
    n_degenerate: u64,
    degenerate_weight: f64,
}

impl BlockAccumulator {
    fn new(n_bins: usize) -> Self {
        Self {
            hist: vec![0.0; n_bins],
            clipped: 0.0,
            total: 0.0,
            w_lo: 0.0,
            w_up: 0.0,
            w_lo2: 0.0,
            w_up2: 0.0,
            w_cross: 0.0,
            e_lo_w: 0.0,
            e_lo2_w: 0.0,
            e_up_w: 0.0,
            e_up2_w: 0.0,
            e_lo: 0.0,
            e_lo2: 0.0,
            e_up: 0.0,
            e_up2: 0.0,
            n_degenerate: 0,
            degenerate_weight: 0.0,
        }
    }

    fn merge(&mut self, other: &BlockAccumulator) {
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
        self.clipped += other.clipped;
        self.total += other.total;
        self.w_lo += other.w_lo;
        self.w_up += other.w_up;
        self.w_lo2 += other.w_lo2;
        self.w_up2 += other.w_up2;
        self.w_cross += other.w_cross;
        self.e_lo_w += other.e_lo_w;
        self.e_lo2_w += other.e_lo2_w;
        self.e_up_w += other.e_up_w;
        self.e_up2_w += other.e_up2_w;
        self.e_lo += other.e_lo;
        self.e_lo2 += other.e_lo2;
        self.e_up += other.e_up;
        self.e_up2 += other.e_up2;
        self.n_degenerate += other.n_degenerate;
        self.degenerate_weight += other.degenerate_weight;
    }

    fn deposit(&mut self, spec: &HistogramSpec, kernel: f64, energy: f64, weight: f64) {
        if weight == 0.0 {
            return;
        }
        let width = spec.bin_width();
        if kernel <= 0.0 {
            let bin = ((energy - spec.e_min) / width).floor();
            if bin >= 0.0 && (bin as usize) < spec.n_bins {
                self.hist[bin as usize] += weight;
            } else {
                self.clipped += weight;
            }
            return;
        }
        // normalized point-sampled Gaussian over a fixed ±8σ window; bins
        // outside the histogram range count as clipped weight
        let lo = ((energy - KERNEL_WINDOW * kernel - spec.e_min) / width).floor() as i64;
        let hi = ((energy + KERNEL_WINDOW * kernel - spec.e_min) / width).floor() as i64;
        let inv2k2 = 1.0 / (2.0 * kernel * kernel);
        let mut total = 0.0;
        for b in lo..=hi {
            let x = spec.e_min + (b as f64 + 0.5) * width;
            total += (-(x - energy) * (x - energy) * inv2k2).exp();
        }
        if total <= 0.0 {
            // kernel far narrower than a bin: degenerate to nearest-bin
            let bin = ((energy - spec.e_min) / width).floor();
            if bin >= 0.0 && (bin as usize) < spec.n_bins {
                self.hist[bin as usize] += weight;
            } else {
                self.clipped += weight;
            }
            return;
        }
        for b in lo..=hi {
            let x = spec.e_min + (b as f64 + 0.5) * width;
            let v = weight * (-(x - energy) * (x - energy) * inv2k2).exp() / total;
            if b >= 0 && (b as usize) < spec.n_bins {
                self.hist[b as usize] += v;
            } else {
                self.clipped += v;
            }
        }
    }
}

/// Run the Monte Carlo and return histogram plus summary. Deterministic for
/// fixed (seed, config) regardless of thread count.
pub fn simulate_spectrum(cfg: &EnsembleConfig) -> Result<SimulationOutput, EnsembleError> {
    cfg.validate()?;
    let hist_spec = cfg.histogram_spec();
    let key = chacha_key(cfg.seed);
    let pol = cfg.geometry.excitation_pol.into_inner();
    let n_blocks = cfg.n_samples.div_ceil(BLOCK);

    let partials: Result<Vec<BlockAccumulator>, EnsembleError> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut acc = BlockAccumulator::new(hist_spec.n_bins);
            let start = block * BLOCK;
            let end = (start + BLOCK).min(cfg.n_samples);
            let base = ChaCha8Rng::from_seed(key);
            for sample in start..end {
                let mut rng = base.clone();
                rng.set_stream(sample);
                run_sample(cfg, &hist_spec, &pol, &mut rng, sample, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let partials = partials?;

    let mut acc = BlockAccumulator::new(hist_spec.n_bins);
    for p in &partials {
        acc.merge(p);
    }

    let n = cfg.n_samples as f64;
    let stats = |area: f64, w2: f64, ew: f64, e2w: f64, e: f64, e2: f64| -> ComponentStats {
        let (mean_w, std_w) = if area > 0.0 {
            let mean = ew / area;
            (Some(mean), Some((e2w / area - mean * mean).max(0.0).sqrt()))
        } else {
            (None, None)
        };
        let mean_u = e / n;
        let per_sample_mean = area / n;
        let per_sample_var = (w2 / n - per_sample_mean * per_sample_mean).max(0.0);
        ComponentStats {
            area,
            area_stderr: (n * per_sample_var).sqrt(),
            energy_mean: mean_w,
            energy_std: std_w,
            energy_mean_unweighted: mean_u,
            energy_std_unweighted: (e2 / n - mean_u * mean_u).max(0.0).sqrt(),
        }
    };
    let lower = stats(
        acc.w_lo,
        acc.w_lo2,
        acc.e_lo_w,
        acc.e_lo2_w,
        acc.e_lo,
        acc.e_lo2,
    );
    let upper = stats(
        acc.w_up,
        acc.w_up2,
        acc.e_up_w,
        acc.e_up2_w,
        acc.e_up,
        acc.e_up2,
    );

    let (ratio, ratio_stderr) = if acc.w_lo > 0.0 {
        let (u_mean, l_mean) = (acc.w_up / n, acc.w_lo / n);
        let var_u = (acc.w_up2 / n - u_mean * u_mean).max(0.0);
        let var_l = (acc.w_lo2 / n - l_mean * l_mean).max(0.0);
        let cov = acc.w_cross / n - u_mean * l_mean;
        let var_ratio = (var_u / (l_mean * l_mean) + u_mean * u_mean * var_l / l_mean.powi(4)
            - 2.0 * u_mean * cov / l_mean.powi(3))
            / n;
        (Some(u_mean / l_mean), Some(var_ratio.max(0.0).sqrt()))
    } else {
        (None, None)
    };

    let deposited: f64 = acc.hist.iter().sum();
    let clipped_fraction = if acc.total > 0.0 {
        acc.clipped / acc.total
    } else {
        0.0
    };
    let summary = EnsembleSummary {
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        lower,
        upper,
        ratio_upper_lower: ratio,
        ratio_stderr,
        total_intensity: acc.total,
        deposited_weight: deposited,
        clipped_weight: acc.clipped,
        clipped_fraction,
        clipping_warning: clipped_fraction > 0.01,
        n_degenerate: acc.n_degenerate,
        degenerate_weight: acc.degenerate_weight,
    };
    // echo the configuration with the histogram layout made explicit
    let mut config = cfg.clone();
    config.histogram = Some(hist_spec);
    Ok(SimulationOutput {
        config,
        histogram: SpectrumHistogram {
            axis: AxisUnit::Wavenumber,
            centers: hist_spec.centers(),
            intensities: acc.hist,
        },
        summary,
    })
}

fn run_sample(
    cfg: &EnsembleConfig,
    hist_spec: &HistogramSpec,
    pol: &Vector3<f64>,
    rng: &mut ChaCha8Rng,
    sample: u64,
    acc: &mut BlockAccumulator,
) -> Result<(), EnsembleError> {
    let axis = match &cfg.orientation {
        OrientationDistribution::Fixed(a) => *a,
        OrientationDistribution::IsotropicRandom => sample_unit_vector(rng),
    };
    let q = TracelessTensor::axial(cfg.static_b, &axis)
        + sample_traceless_tensor(rng, cfg.fluctuation.sigma_aniso);
    let g: f64 = rng.sample(StandardNormal);
    let shift = cfg.fluctuation.mean_shift + cfg.fluctuation.sigma_iso * g;

    let mut h = tensor_hamiltonian(&q);
    for d in 0..4 {
        h[(d, d)] += crate::angular::C64::new(shift, 0.0);
    }
    let ks = kramers_unlabeled(&h, DEFAULT_RESOLUTION_FLOOR)
        .map_err(|source| EnsembleError::Pairing { sample, source })?;
    let pops = excited_populations(&ks, pol)?;
    let ci = detected_intensity(&ks, &pops, &cfg.geometry.detection)?;

    let (i_lo, i_up) = if ci.degenerate {
        acc.n_degenerate += 1;
        acc.degenerate_weight += ci.lower.intensity;
        // unresolved doublets: split the weight evenly between the components
        let half = 0.5 * ci.lower.intensity;
        (half, half)
    } else {
        (ci.lower.intensity, ci.upper.intensity)
    };
    let (e_lo, e_up) = (ci.lower.energy, ci.upper.energy);

    acc.total += i_lo + i_up;
    acc.w_lo += i_lo;
    acc.w_up += i_up;
    acc.w_lo2 += i_lo * i_lo;
    acc.w_up2 += i_up * i_up;
    acc.w_cross += i_lo * i_up;
    acc.e_lo_w += i_lo * e_lo;
    acc.e_lo2_w += i_lo * e_lo * e_lo;
    acc.e_up_w += i_up * e_up;
    acc.e_up2_w += i_up * e_up * e_up;
    acc.e_lo += e_lo;
    acc.e_lo2 += e_lo * e_lo;
    acc.e_up += e_up;
    acc.e_up2 += e_up * e_up;

    acc.deposit(hist_spec, cfg.kernel_width, e_lo, i_lo);
    acc.deposit(hist_spec, cfg.kernel_width, e_up, i_up);
    Ok(())
}

/// Configuration of a contrast-versus-fluctuation scan. The energy window is
/// derived per sigma (±(B/2 + 8σ + 8·kernel) around the line center) so no
/// significant weight is clipped at any point of the scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastScanConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub static_b: f64,
    /// Fluctuation strengths to scan (cm⁻¹).
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub sigma_iso: f64,
    #[serde(default)]
    pub mean_shift: f64,
    #[serde(default = "default_scan_orientation")]
    pub orientation: OrientationDistribution,
    #[serde(default = "default_scan_kernel")]
    pub kernel_width: f64,
    #[serde(default = "default_scan_bin")]
    pub bin_width: f64,
}

fn default_scan_orientation() -> OrientationDistribution {
    OrientationDistribution::Fixed(Vector3::z_axis())
}

fn default_scan_kernel() -> f64 {
    10.0
}

fn default_scan_bin() -> f64 {
    2.0
}

/// One row of the contrast scan. `w_*` are the fitted upper-component weight
/// fractions A_up/(A_up + A_lo) for the two polarization configurations.
#[derive(Clone, Debug, Serialize)]
pub struct ContrastPoint {
    pub sigma: f64,
    pub w_z_exc_z_analyzer: Option<f64>,
    pub w_y_exc_x_analyzer: Option<f64>,
    /// w(ŷ-exc, x̂-analyzer) − w(ẑ-exc, ẑ-analyzer).
    pub contrast: Option<f64>,
    /// Fit failure description, if any; the scan continues past failures.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContrastScan {
    pub config: ContrastScanConfig,
    pub points: Vec<ContrastPoint>,
    /// True when the successful contrast values never increase along the scan.
    pub monotone_non_increasing: bool,
    /// Largest observed increase between consecutive points (0 when monotone).
    pub max_increase: f64,
}

/// Fitted upper-component weight fraction of one simulated spectrum. The fit
/// is seeded from the per-component stick statistics of the run summary.
pub fn fitted_weight_fraction(out: &SimulationOutput) -> Result<f64, String> {
    let s = &out.summary;
    let spec = out.config.histogram_spec();
    let bin = spec.bin_width();
    let kernel = out.config.kernel_width.max(bin);
    let width_of = |c: &ComponentStats| -> f64 {
        let stick_std = c.energy_std.unwrap_or(c.energy_std_unweighted);
        (stick_std * stick_std + kernel * kernel).sqrt()
    };
    let center_of =
        |c: &ComponentStats| -> f64 { c.energy_mean.unwrap_or(c.energy_mean_unweighted) };
    let sqrt_tau = (2.0 * std::f64::consts::PI).sqrt();
    let (s1, s2) = (width_of(&s.lower), width_of(&s.upper));
    let guess = TwoGaussianModel {
        amp1: s.lower.area * bin / (s1 * sqrt_tau),
        c1: center_of(&s.lower),
        s1,
        amp2: s.upper.area * bin / (s2 * sqrt_tau),
        c2: center_of(&s.upper),
        s2,
    };
    let fit = fit::fit_two_gaussians(
        &out.histogram.centers,
        &out.histogram.intensities,
        Some(guess),
        &FitOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    if !fit.converged {
        return Err(format!(
            "fit did not converge in {} iterations",
            fit.iterations
        ));
    }
    let m = fit.model;
    let (lo, up) = if m.c1 <= m.c2 {
        (m.amp1 * m.s1, m.amp2 * m.s2)
    } else {
        (m.amp2 * m.s2, m.amp1 * m.s1)
    };
    let total = lo + up;
    if total <= 0.0 {
        return Err("fitted total area is not positive".to_string());
    }
    Ok(up / total)
}

/// Mean fitted splitting of the pure-fluctuation isotropic ensemble at a
/// given sigma (two-Gaussian decomposition of the simulated spectrum).
pub fn fitted_splitting_at(sigma: f64, n_samples: u64, seed: u64) -> Result<f64, EnsembleError> {
    let kernel = 4.0;
    let half = 8.0 * sigma + 8.0 * kernel + 50.0;
    let cfg = EnsembleConfig {
        n_samples,
        seed,
        static_b: 0.0,
        orientation: OrientationDistribution::IsotropicRandom,
        fluctuation: FluctuationModel {
            sigma_aniso: sigma,
            sigma_iso: 0.0,
            mean_shift: 0.0,
        },
        geometry: Geometry::y_exc_x_analyzer(),
        histogram: Some(HistogramSpec {
            e_min: -half,
            e_max: half,
            n_bins: ((2.0 * half) / 2.0).ceil() as usize,
        }),
        kernel_width: kernel,
    };
    let out = simulate_spectrum(&cfg)?;
    let fit = fit::fit_two_gaussians(
        &out.histogram.centers,
        &out.histogram.intensities,
        None,
        &FitOptions::default(),
    )
    .map_err(|e| EnsembleError::InvalidConfig(format!("calibration fit failed: {e}")))?;
    if !fit.converged {
        return Err(EnsembleError::InvalidConfig(format!(
            "calibration fit did not converge at sigma {sigma}"
        )));
    }
    Ok(fit.splitting)
}

/// Invert the (monotone) map sigma ↦ mean fitted splitting by bisection:
/// returns the fluctuation strength whose fitted splitting equals `target`
/// cm⁻¹ in the pure-fluctuation isotropic ensemble. All evaluations reuse the
/// same derived seed so the empirical map is a fixed smooth function; no
/// closed form is assumed.
pub fn calibrate_sigma(
    target: f64,
    mut lo: f64,
    mut hi: f64,
    n_samples: u64,
    seed: u64,
) -> Result<f64, EnsembleError> {
    let eval_seed = derive_seed(seed, 0x0ca1);
    let f_lo = fitted_splitting_at(lo, n_samples, eval_seed)?;
    let f_hi = fitted_splitting_at(hi, n_samples, eval_seed)?;
    if !(f_lo < target && target < f_hi) {
        return Err(EnsembleError::InvalidConfig(format!(
            "calibration bracket [{lo}, {hi}] maps to [{f_lo:.1}, {f_hi:.1}], \
             which does not contain the target {target}"
        )));
    }
    let mut sigma = 0.5 * (lo + hi);
    for _ in 0..12 {
        sigma = 0.5 * (lo + hi);
        let s = fitted_splitting_at(sigma, n_samples, eval_seed)?;
        if (s - target).abs() < 1.25e-3 * target {
            break;
        }
        if s < target {
            lo = sigma;
        } else {
            hi = sigma;
        }
    }
    Ok(sigma)
}

/// Scan the polarization contrast against the fluctuation strength.
///
/// For every sigma two independently seeded runs are performed, one per
/// polarization configuration ((ẑ-exc, ẑ-analyzer) and (ŷ-exc, x̂-analyzer));
/// each spectrum is decomposed into two Gaussians and the contrast is the
/// difference of the fitted upper-component weight fractions.
pub fn contrast_scan(cfg: &ContrastScanConfig) -> Result<ContrastScan, EnsembleError> {
    if cfg.sigmas.is_empty() {
        return Err(EnsembleError::InvalidConfig("sigma list is empty".into()));
    }
    let mut points = Vec::with_capacity(cfg.sigmas.len());
    for (i, &sigma) in cfg.sigmas.iter().enumerate() {
        if sigma < 0.0 || sigma.is_nan() {
            return Err(EnsembleError::InvalidConfig(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        let half_span = cfg.static_b.abs() / 2.0
            + 8.0 * sigma
            + 8.0 * cfg.kernel_width
            + 6.0 * cfg.sigma_iso
            + 2.0 * cfg.bin_width;
        let n_bins = ((2.0 * half_span / cfg.bin_width).ceil() as usize).max(24);
        let histogram = HistogramSpec {
            e_min: cfg.mean_shift - half_span,
            e_max: cfg.mean_shift + half_span,
            n_bins,
        };
        let run = |geometry: Geometry, salt: u64| -> Result<SimulationOutput, EnsembleError> {
            simulate_spectrum(&EnsembleConfig {
                n_samples: cfg.n_samples,
                seed: derive_seed(cfg.seed, salt),
                static_b: cfg.static_b,
                orientation: cfg.orientation,
                fluctuation: FluctuationModel {
                    sigma_aniso: sigma,
                    sigma_iso: cfg.sigma_iso,
                    mean_shift: cfg.mean_shift,
                },
                geometry,
                histogram: Some(histogram),
                kernel_width: cfg.kernel_width,
            })
        };
        let out_zz = run(Geometry::z_exc_z_analyzer(), 2 * i as u64)?;
        let out_yx = run(Geometry::y_exc_x_analyzer(), 2 * i as u64 + 1)?;

        let w_zz = fitted_weight_fraction(&out_zz);
        let w_yx = fitted_weight_fraction(&out_yx);
        let point = match (&w_zz, &w_yx) {
            (Ok(z), Ok(y)) => ContrastPoint {
                sigma,
                w_z_exc_z_analyzer: Some(*z),
                w_y_exc_x_analyzer: Some(*y),
                contrast: Some(y - z),
                failure: None,
            },
            _ => ContrastPoint {
                sigma,
                w_z_exc_z_analyzer: w_zz.as_ref().ok().copied(),
                w_y_exc_x_analyzer: w_yx.as_ref().ok().copied(),
                contrast: None,
                failure: Some(format!(
                    "sigma={sigma}: {}",
                    w_zz.err().or(w_yx.err()).unwrap_or_default()
                )),
            },
        };
        points.push(point);
    }

    let contrasts: Vec<f64> = points.iter().filter_map(|p| p.contrast).collect();
    let mut max_increase = 0.0f64;
    for w in contrasts.windows(2) {
        max_increase = max_increase.max(w[1] - w[0]);
    }
    Ok(ContrastScan {
        config: cfg.clone(),
        points,
        monotone_non_increasing: max_increase <= 0.0,
        max_increase,
    })
}
