//! Polarization-resolved absorption strengths and detected fluorescence
//! intensities for the two excited-state components.
//!
//! Lab geometry: the excitation beam propagates along x̂ (so its polarization
//! lies in the y-z plane) and fluorescence is detected along ŷ, optionally
//! through a linear analyzer (which must then be transverse to ŷ). Ground
//! J=1/2 atoms are unpolarized: both sublevels carry population 1/2.
//! Relaxation in the excited state is assumed to preserve the m-populations
//! prior to emission; coherences between the spectrally resolved doublets are
//! dropped, and coherences within a doublet do not enter any of the detection
//! modes implemented here. The "depolarized" mode instead assumes complete
//! depolarization before emission: isotropic unpolarized fluorescence with
//! detected intensity (2/3)·population per doublet, the normalization that
//! reproduces the analyzer-mode intensity scale. All intensities are relative
//! (reduced dipole matrix element set to 1).

use std::sync::OnceLock;

use nalgebra::{DVector, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{CMatrix, DipoleOperator, C64, J_HALF, J_THREE_HALVES};
use crate::crystal::{diagonalize_kramers, CrystalError, DoubletLabel, KramersSpectrum};

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("polarization vector must have unit norm, got |e| = {norm}")]
    NonUnitPolarization { norm: f64 },
    #[error("analyzer must be transverse to the detection direction ŷ (ε·ŷ = {dot})")]
    AnalyzerNotTransverse { dot: f64 },
    #[error("weight ratio undefined: both component intensities are zero")]
    UndefinedRatio,
    #[error(transparent)]
    Crystal(#[from] CrystalError),
}

/// Fluorescence detection configuration, always along ŷ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Linear analyzer in the detection path; must be transverse to ŷ.
    Analyzer(Unit<Vector3<f64>>),
    /// No analyzer: sum of the ẑ- and x̂-analyzer intensities.
    NoAnalyzer,
    /// Complete depolarization before emission; detected intensity is
    /// (2/3)·population per doublet.
    Depolarized,
}

/// Excitation polarization plus detection mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Excitation polarization (the beam runs along x̂, so this normally
    /// lies in the y-z plane).
    pub excitation_pol: Unit<Vector3<f64>>,
    pub detection: DetectionMode,
}

impl Geometry {
    pub fn new(excitation_pol: Unit<Vector3<f64>>, detection: DetectionMode) -> Self {
        Self {
            excitation_pol,
            detection,
        }
    }

    /// ẑ-polarized excitation, ẑ-analyzer: the configuration with expected
    /// static weight ratio 0.
    pub fn z_exc_z_analyzer() -> Self {
        Self::new(
            Vector3::z_axis(),
            DetectionMode::Analyzer(Vector3::z_axis()),
        )
    }

    /// ŷ-polarized excitation, x̂-analyzer: the configuration with expected
    /// static weight ratio 9.
    pub fn y_exc_x_analyzer() -> Self {
        Self::new(
            Vector3::y_axis(),
            DetectionMode::Analyzer(Vector3::x_axis()),
        )
    }

    /// Unit norms (to 1e-12) and analyzer transversality (to 1e-10).
    pub fn validate(&self) -> Result<(), OpticsError> {
        check_unit(&self.excitation_pol.into_inner())?;
        if let DetectionMode::Analyzer(eps) = &self.detection {
            check_unit(&eps.into_inner())?;
            let dot = eps.y;
            if dot.abs() > 1e-10 {
                return Err(OpticsError::AnalyzerNotTransverse { dot });
            }
        }
        Ok(())
    }
}

fn check_unit(v: &Vector3<f64>) -> Result<(), OpticsError> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(OpticsError::NonUnitPolarization { norm });
    }
    Ok(())
}

/// The J=1/2 → J=3/2 dipole operator, built once.
pub fn dipole_d2() -> &'static DipoleOperator {
    static D: OnceLock<DipoleOperator> = OnceLock::new();
    D.get_or_init(|| DipoleOperator::new(J_HALF, J_THREE_HALVES))
}

/// Excited-state populations after absorption from an unpolarized ground
/// state, grouped by doublet.
#[derive(Clone, Copy, Debug)]
pub struct Populations {
    /// Per-state populations of the lower doublet pair.
    pub lower_pair: [f64; 2],
    /// Per-state populations of the upper doublet pair.
    pub upper_pair: [f64; 2],
}

impl Populations {
    pub fn lower(&self) -> f64 {
        self.lower_pair[0] + self.lower_pair[1]
    }

    pub fn upper(&self) -> f64 {
        self.upper_pair[0] + self.upper_pair[1]
    }

    pub fn total(&self) -> f64 {
        self.lower() + self.upper()
    }
}

/// Population absorbed into each eigenstate for excitation polarization
/// `pol`: p_k = Σ_mg (1/2)·|⟨ψ_k| d·pol |1/2 mg⟩|².
pub fn excited_populations(
    ks: &KramersSpectrum,
    pol: &Vector3<f64>,
) -> Result<Populations, OpticsError> {
    check_unit(pol)?;
    let d = dipole_d2().along(pol);
    let p = |state: &DVector<C64>| absorption_strength(state, &d) * 0.5;
    Ok(Populations {
        lower_pair: [p(&ks.lower.states[0]), p(&ks.lower.states[1])],
        upper_pair: [p(&ks.upper.states[0]), p(&ks.upper.states[1])],
    })
}

/// Σ_mg |⟨ψ| d_op |mg⟩|² for a precomputed coupling matrix (4×2).
fn absorption_strength(state: &DVector<C64>, d_op: &CMatrix) -> f64 {
    let mut sum = 0.0;
    for c in 0..d_op.ncols() {
        let mut amp = C64::new(0.0, 0.0);
        for r in 0..d_op.nrows() {
            amp += state[r].conj() * d_op[(r, c)];
        }
        sum += amp.norm_sqr();
    }
    sum
}

/// Emission strength of an excited eigenstate through a linear analyzer:
/// Σ_mg |⟨1/2 mg| d·ε |ψ⟩|². ε may point anywhere (used for rotated-frame
/// consistency checks); the lab ŷ-transversality is enforced only by
/// [`detected_intensity`].
pub fn emission_strength(state: &DVector<C64>, analyzer: &Vector3<f64>) -> f64 {
    // for a real analyzer vector d·ε is Hermitian, so the ground←excited
    // amplitudes are the conjugates of the excited←ground ones
    absorption_strength(state, &dipole_d2().along(analyzer))
}

/// One spectral component: a stick at the doublet energy.
#[derive(Clone, Copy, Debug)]
pub struct Stick {
    /// Doublet energy (cm⁻¹).
    pub energy: f64,
    /// Detected intensity, relative units (reduced dipole element = 1).
    pub intensity: f64,
    pub label: Option<DoubletLabel>,
}

/// Detected intensities of the two components.
#[derive(Clone, Copy, Debug)]
pub struct ComponentIntensities {
    pub lower: Stick,
    pub upper: Stick,
    /// Set when the two doublets are unresolved; the full detected intensity
    /// is then carried by `lower` and `upper` is an empty stick at the same
    /// energy.
    pub degenerate: bool,
}

impl ComponentIntensities {
    pub fn total(&self) -> f64 {
        self.lower.intensity + self.upper.intensity
    }
}

/// Detected intensity per doublet through an arbitrary linear analyzer:
/// I = Σ_{k in pair} p_k · Σ_mg |⟨mg| d·ε |ψ_k⟩|².
pub fn analyzer_intensity(
    ks: &KramersSpectrum,
    populations: &Populations,
    analyzer: &Vector3<f64>,
) -> Result<ComponentIntensities, OpticsError> {
    check_unit(analyzer)?;
    let d = dipole_d2().along(analyzer);
    let strength = |pair: &[DVector<C64>; 2], pops: &[f64; 2]| {
        pops[0] * absorption_strength(&pair[0], &d) + pops[1] * absorption_strength(&pair[1], &d)
    };
    let i_lower = strength(&ks.lower.states, &populations.lower_pair);
    let i_upper = strength(&ks.upper.states, &populations.upper_pair);
    Ok(assemble(ks, i_lower, i_upper))
}

fn assemble(ks: &KramersSpectrum, i_lower: f64, i_upper: f64) -> ComponentIntensities {
    if ks.degenerate {
        ComponentIntensities {
            lower: Stick {
                energy: ks.lower.energy,
                intensity: i_lower + i_upper,
                label: ks.lower.label,
            },
            upper: Stick {
                energy: ks.upper.energy,
                intensity: 0.0,
                label: ks.upper.label,
            },
            degenerate: true,
        }
    } else {
        ComponentIntensities {
            lower: Stick {
                energy: ks.lower.energy,
                intensity: i_lower,
                label: ks.lower.label,
            },
            upper: Stick {
                energy: ks.upper.energy,
                intensity: i_upper,
                label: ks.upper.label,
            },
            degenerate: false,
        }
    }
}

/// Detected intensities of the two components in the lab geometry
/// (fluorescence observed along ŷ).
pub fn detected_intensity(
    ks: &KramersSpectrum,
    populations: &Populations,
    mode: &DetectionMode,
) -> Result<ComponentIntensities, OpticsError> {
    match mode {
        DetectionMode::Analyzer(eps) => {
            let dot = eps.y;
            if dot.abs() > 1e-10 {
                return Err(OpticsError::AnalyzerNotTransverse { dot });
            }
            analyzer_intensity(ks, populations, &eps.into_inner())
        }
        DetectionMode::NoAnalyzer => {
            let z = analyzer_intensity(ks, populations, &Vector3::z())?;
            let x = analyzer_intensity(ks, populations, &Vector3::x())?;
            Ok(assemble(
                ks,
                z.lower.intensity + x.lower.intensity,
                z.upper.intensity + x.upper.intensity,
            ))
        }
        DetectionMode::Depolarized => {
            let factor = 2.0 / 3.0;
            Ok(assemble(
                ks,
                factor * populations.lower(),
                factor * populations.upper(),
            ))
        }
    }
}

/// Ratio of the |m|=3/2-labeled (or upper) component intensity to the
/// |m|=1/2-labeled (or lower) one. Returns +∞ when only the denominator
/// vanishes and an error when both components are zero.
pub fn weight_ratio(ci: &ComponentIntensities) -> Result<f64, OpticsError> {
    let upper_is_three_halves = match (ci.upper.label, ci.lower.label) {
        (Some(DoubletLabel::MThreeHalves), _) => true,
        (_, Some(DoubletLabel::MThreeHalves)) => false,
        _ => true, // unlabeled: report upper/lower
    };
    let (num, den) = if upper_is_three_halves {
        (ci.upper.intensity, ci.lower.intensity)
    } else {
        (ci.lower.intensity, ci.upper.intensity)
    };
    if num == 0.0 && den == 0.0 {
        return Err(OpticsError::UndefinedRatio);
    }
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(num / den)
}

/// Two sticks for a given excited-level Hamiltonian and lab geometry.
pub fn stick_spectrum(
    h: &CMatrix,
    geometry: &Geometry,
) -> Result<ComponentIntensities, OpticsError> {
    geometry.validate()?;
    let ks = diagonalize_kramers(h)?;
    let pops = excited_populations(&ks, &geometry.excitation_pol)?;
    detected_intensity(&ks, &pops, &geometry.detection)
}

/// Row of the intensity table: detection configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionRow {
    ZAnalyzer,
    XAnalyzer,
    NoAnalyzer,
    Depolarized,
}

impl DetectionRow {
    pub const ALL: [DetectionRow; 4] = [
        DetectionRow::ZAnalyzer,
        DetectionRow::XAnalyzer,
        DetectionRow::NoAnalyzer,
        DetectionRow::Depolarized,
    ];

    pub fn mode(self) -> DetectionMode {
        match self {
            DetectionRow::ZAnalyzer => DetectionMode::Analyzer(Vector3::z_axis()),
            DetectionRow::XAnalyzer => DetectionMode::Analyzer(Vector3::x_axis()),
            DetectionRow::NoAnalyzer => DetectionMode::NoAnalyzer,
            DetectionRow::Depolarized => DetectionMode::Depolarized,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DetectionRow::ZAnalyzer => "z-analyzer",
            DetectionRow::XAnalyzer => "x-analyzer",
            DetectionRow::NoAnalyzer => "no analyzer",
            DetectionRow::Depolarized => "depolarized",
        }
    }
}

/// Column of the intensity table: excitation polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExcitationCol {
    Z,
    Y,
}

impl ExcitationCol {
    pub const ALL: [ExcitationCol; 2] = [ExcitationCol::Z, ExcitationCol::Y];

    pub fn polarization(self) -> Unit<Vector3<f64>> {
        match self {
            ExcitationCol::Z => Vector3::z_axis(),
            ExcitationCol::Y => Vector3::y_axis(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExcitationCol::Z => "z",
            ExcitationCol::Y => "y",
        }
    }
}

/// A rational reference value: (numerator, denominator).
pub type Fraction = (u32, u32);

/// Reference fractions for the static single-crystal intensity table, as
/// (I_{3/2}, I_{1/2}) per (row, column).
pub const TABLE1_REFERENCE: [[(Fraction, Fraction); 2]; 4] = [
    [((0, 1), (4, 9)), ((0, 1), (1, 9))],  // z-analyzer
    [((0, 1), (1, 9)), ((1, 4), (1, 36))], // x-analyzer
    [((0, 1), (5, 9)), ((1, 4), (5, 36))], // no analyzer
    [((0, 1), (4, 9)), ((1, 3), (1, 9))],  // depolarized
];

/// The static single-crystal intensity table: (I_{3/2}, I_{1/2}) for
/// {ẑ, ŷ} excitation × {ẑ-analyzer, x̂-analyzer, no analyzer, depolarized},
/// computed from the dipole amplitudes (nothing hard-coded).
#[derive(Clone, Copy, Debug)]
pub struct Table1 {
    /// entries[row][col] = (I_{3/2}, I_{1/2})
    pub entries: [[(f64, f64); 2]; 4],
}

impl Table1 {
    pub fn entry(&self, row: DetectionRow, col: ExcitationCol) -> (f64, f64) {
        let r = DetectionRow::ALL.iter().position(|&x| x == row).unwrap();
        let c = ExcitationCol::ALL.iter().position(|&x| x == col).unwrap();
        self.entries[r][c]
    }

    /// Largest deviation from the reference fractions.
    pub fn max_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (refs, vals) in TABLE1_REFERENCE.iter().zip(&self.entries) {
            for (((n3, d3), (n1, d1)), (i3, i1)) in refs.iter().zip(vals) {
                worst = worst.max((i3 - *n3 as f64 / *d3 as f64).abs());
                worst = worst.max((i1 - *n1 as f64 / *d1 as f64).abs());
            }
        }
        worst
    }
}

/// Compute the full intensity table for a crystal axis along ẑ.
pub fn table1() -> Result<Table1, OpticsError> {
    // any positive splitting gives the same relative intensities
    let h =
        crate::crystal::axial_hamiltonian(&crate::crystal::AxialPerturbation::along_z(0.0, 200.0));
    let ks = diagonalize_kramers(&h)?;
    let mut entries = [[(0.0, 0.0); 2]; 4];
    for (c, col) in ExcitationCol::ALL.iter().enumerate() {
        let pops = excited_populations(&ks, &col.polarization())?;
        for (r, row) in DetectionRow::ALL.iter().enumerate() {
            let ci = detected_intensity(&ks, &pops, &row.mode())?;
            let (three_halves, half) = match ci.upper.label {
                Some(DoubletLabel::MThreeHalves) => (ci.upper.intensity, ci.lower.intensity),
                _ => (ci.lower.intensity, ci.upper.intensity),
            };
            entries[r][c] = (three_halves, half);
        }
    }
    Ok(Table1 { entries })
}
