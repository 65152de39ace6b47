//! Rank-2 tensor perturbations on the J=3/2 manifold and their Kramers
//! doublet structure.
//!
//! An axially symmetric environment with symmetry axis n̂ acts on the excited
//! level as shift·I + splitting·(3J_n² − J(J+1))/6, placing the |m|=3/2
//! doublet (m along n̂) at shift + splitting/2 and the |m|=1/2 doublet at
//! shift − splitting/2. The general anisotropic case is H = Σ_ik Q_ik T_ik
//! with a symmetric traceless coupling tensor Q and
//! T_ik = (J_iJ_k + J_kJ_i)/2 − δ_ik J(J+1)/3; the axial form corresponds to
//! Q = (splitting/6)·(3n̂n̂ᵀ − I). T_ik vanishes identically on J=1/2, so the
//! companion J=1/2 level is broadened but never split by such a tensor.

use std::sync::OnceLock;

use nalgebra::{Matrix3, SymmetricEigen, Unit, Vector3};
use thiserror::Error;

use crate::angular::{self, hermiticity_defect, CMatrix, HalfIntegerJ, C64, J_THREE_HALVES};

#[derive(Debug, Error)]
pub enum CrystalError {
    #[error("tensor is not symmetric (defect {defect:.3e} vs tolerance {tol:.3e})")]
    NotSymmetric { defect: f64, tol: f64 },
    #[error("tensor is not traceless (trace {trace:.3e} vs tolerance {tol:.3e})")]
    NotTraceless { trace: f64, tol: f64 },
    #[error("expected a {expected}x{expected} operator, got {rows}x{cols}")]
    BadDimension {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("Kramers pairing failed: intra-pair gap {gap:.3e} exceeds {tol:.3e}")]
    PairingFailure { gap: f64, tol: f64 },
    #[error("rotation matrix is not special orthogonal (defect {defect:.3e})")]
    NotARotation { defect: f64 },
}

/// Axially symmetric perturbation of the excited level (energies in cm⁻¹).
#[derive(Clone, Debug)]
pub struct AxialPerturbation {
    /// Isotropic shift of the whole multiplet.
    pub shift: f64,
    /// Doublet splitting; positive values put the |m|=3/2 doublet on top.
    pub splitting: f64,
    /// Symmetry axis in the lab frame.
    pub axis: Unit<Vector3<f64>>,
}

impl AxialPerturbation {
    pub fn new(shift: f64, splitting: f64, axis: Unit<Vector3<f64>>) -> Self {
        Self {
            shift,
            splitting,
            axis,
        }
    }

    /// Axial perturbation about ẑ.
    pub fn along_z(shift: f64, splitting: f64) -> Self {
        Self::new(shift, splitting, Vector3::z_axis())
    }
}

/// Symmetric traceless rank-2 coupling tensor (cm⁻¹).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracelessTensor {
    m: Matrix3<f64>,
}

impl TracelessTensor {
    /// Validates symmetry and tracelessness to 1e-9 relative to ‖q‖.
    pub fn new(m: Matrix3<f64>) -> Result<Self, CrystalError> {
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let tol = 1e-9 * scale;
        let defect = (m - m.transpose()).amax();
        if defect > tol {
            return Err(CrystalError::NotSymmetric { defect, tol });
        }
        let trace = m.trace();
        if trace.abs() > tol {
            return Err(CrystalError::NotTraceless { trace, tol });
        }
        Ok(Self { m })
    }

    pub(crate) fn new_unchecked(m: Matrix3<f64>) -> Self {
        Self { m }
    }

    pub fn zero() -> Self {
        Self {
            m: Matrix3::zeros(),
        }
    }

    /// The axial tensor (b/6)·(3n̂n̂ᵀ − I), which reproduces
    /// [`axial_hamiltonian`] with splitting b about n̂.
    pub fn axial(b: f64, axis: &Unit<Vector3<f64>>) -> Self {
        let n = axis.into_inner();
        let m = (n * n.transpose() * 3.0 - Matrix3::identity()) * (b / 6.0);
        Self { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        [ev[0], ev[1], ev[2]]
    }
}

impl std::ops::Add for TracelessTensor {
    type Output = TracelessTensor;
    fn add(self, rhs: TracelessTensor) -> TracelessTensor {
        TracelessTensor { m: self.m + rhs.m }
    }
}

/// Orthonormal basis of the 5-dimensional space of symmetric traceless 3x3
/// tensors, tr(BᵢBⱼ) = δᵢⱼ.
pub fn tensor_basis() -> &'static [Matrix3<f64>; 5] {
    static BASIS: OnceLock<[Matrix3<f64>; 5]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let s6 = 1.0 / 6.0f64.sqrt();
        [
            Matrix3::from_diagonal(&Vector3::new(s2, -s2, 0.0)),
            Matrix3::from_diagonal(&Vector3::new(s6, s6, -2.0 * s6)),
            Matrix3::new(0.0, s2, 0.0, s2, 0.0, 0.0, 0.0, 0.0, 0.0),
            Matrix3::new(0.0, 0.0, s2, 0.0, 0.0, 0.0, s2, 0.0, 0.0),
            Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, s2, 0.0, s2, 0.0),
        ]
    })
}

/// Quadrupole coupling operator T_ik = (J_iJ_k + J_kJ_i)/2 − δ_ik J(J+1)/3.
pub fn quadrupole_operator(j: HalfIntegerJ, i: usize, k: usize) -> CMatrix {
    let jm = angular::j_matrices(j);
    let comp = [&jm.x, &jm.y, &jm.z];
    let mut t = (comp[i] * comp[k] + comp[k] * comp[i]).scale(0.5);
    if i == k {
        let sub = j.j_squared() / 3.0;
        for d in 0..j.dimension() {
            t[(d, d)] -= C64::new(sub, 0.0);
        }
    }
    t
}

/// All nine T_ik for J=3/2, cached; entry [i][k] couples to Q_ik.
fn quadrupole_operators_3_2() -> &'static [[CMatrix; 3]; 3] {
    static OPS: OnceLock<[[CMatrix; 3]; 3]> = OnceLock::new();
    OPS.get_or_init(|| {
        std::array::from_fn(|i| std::array::from_fn(|k| quadrupole_operator(J_THREE_HALVES, i, k)))
    })
}

/// tr(Op(Bₘ)²) for the images of the tensor basis under Q ↦ Σ Q_ik T_ik on
/// J=3/2. The five values coincide (the map intertwines an irreducible
/// rotation action), which makes the inverse a plain projection.
fn quadrupole_gram_3_2() -> &'static [f64; 5] {
    static GRAM: OnceLock<[f64; 5]> = OnceLock::new();
    GRAM.get_or_init(|| {
        std::array::from_fn(|m| {
            let op = tensor_hamiltonian_for(
                J_THREE_HALVES,
                &TracelessTensor::new_unchecked(tensor_basis()[m]),
            );
            op.iter().map(|z| z.norm_sqr()).sum()
        })
    })
}

/// H = Σ_ik Q_ik T_ik on an arbitrary J manifold.
pub fn tensor_hamiltonian_for(j: HalfIntegerJ, q: &TracelessTensor) -> CMatrix {
    let dim = j.dimension();
    let mut h = CMatrix::zeros(dim, dim);
    if j == J_THREE_HALVES {
        for (i, row) in quadrupole_operators_3_2().iter().enumerate() {
            for (k, op) in row.iter().enumerate() {
                let c = q.m[(i, k)];
                if c != 0.0 {
                    h += op * C64::new(c, 0.0);
                }
            }
        }
    } else {
        for i in 0..3 {
            for k in 0..3 {
                let c = q.m[(i, k)];
                if c != 0.0 {
                    h += quadrupole_operator(j, i, k) * C64::new(c, 0.0);
                }
            }
        }
    }
    h
}

/// H = Σ_ik Q_ik T_ik on the J=3/2 manifold.
pub fn tensor_hamiltonian(q: &TracelessTensor) -> CMatrix {
    tensor_hamiltonian_for(J_THREE_HALVES, q)
}

/// H = shift·I + splitting·(3J_n² − J(J+1))/6 on J=3/2, with J_n along the
/// perturbation axis. Exactly diagonal when the axis is ẑ.
pub fn axial_hamiltonian(p: &AxialPerturbation) -> CMatrix {
    let mut h = tensor_hamiltonian(&TracelessTensor::axial(p.splitting, &p.axis));
    for d in 0..4 {
        h[(d, d)] += C64::new(p.shift, 0.0);
    }
    h
}

/// Rotate a tensor into R Q Rᵀ. R must be special orthogonal (checked to
/// 1e-9); eigenvalues are preserved.
pub fn rotate_tensor(
    q: &TracelessTensor,
    r: &Matrix3<f64>,
) -> Result<TracelessTensor, CrystalError> {
    let defect = (r.transpose() * r - Matrix3::identity())
        .amax()
        .max((r.determinant() - 1.0).abs());
    if defect > 1e-9 {
        return Err(CrystalError::NotARotation { defect });
    }
    let rotated = r * q.m * r.transpose();
    // symmetrize away the rounding from the two matrix products
    TracelessTensor::new((rotated + rotated.transpose()) * 0.5)
}

/// Doublet tag in an axial frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DoubletLabel {
    /// |m| = 1/2 with respect to the symmetry axis.
    MHalf,
    /// |m| = 3/2 with respect to the symmetry axis.
    MThreeHalves,
}

impl std::fmt::Display for DoubletLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DoubletLabel::MHalf => write!(f, "|m|=1/2"),
            DoubletLabel::MThreeHalves => write!(f, "|m|=3/2"),
        }
    }
}

/// One Kramers doublet: a degenerate pair of eigenstates.
#[derive(Clone, Debug)]
pub struct Doublet {
    /// Doublet energy (cm⁻¹).
    pub energy: f64,
    /// Two orthonormal eigenvectors in the |J m⟩ basis.
    pub states: [nalgebra::DVector<C64>; 2],
    /// |m| tag, present only when an exact axial frame was detected.
    pub label: Option<DoubletLabel>,
}

/// Eigenstructure of a time-reversal-symmetric J=3/2 Hamiltonian.
#[derive(Clone, Debug)]
pub struct KramersSpectrum {
    pub lower: Doublet,
    pub upper: Doublet,
    /// Set when the two doublets are closer than the resolution floor; the
    /// level is then effectively fourfold degenerate and `lower`/`upper`
    /// carry the same energy.
    pub degenerate: bool,
    /// Detected axial symmetry axis, if any.
    pub axis: Option<Unit<Vector3<f64>>>,
}

impl KramersSpectrum {
    /// Energy gap between the doublets (cm⁻¹).
    pub fn splitting(&self) -> f64 {
        self.upper.energy - self.lower.energy
    }
}

/// Splitting below which a spectrum counts as unsplit (cm⁻¹).
pub const DEFAULT_RESOLUTION_FLOOR: f64 = 1e-6;

/// Decompose a Hermitian 4x4 Hamiltonian into its two Kramers doublets.
///
/// Fails if the spectrum does not consist of two degenerate pairs (gap
/// within each pair must stay below 1e-9 of the spectral scale), which
/// signals an input that is not time-reversal symmetric.
pub fn diagonalize_kramers(h: &CMatrix) -> Result<KramersSpectrum, CrystalError> {
    diagonalize_kramers_with(h, DEFAULT_RESOLUTION_FLOOR)
}

/// [`diagonalize_kramers`] with an explicit resolution floor (cm⁻¹).
pub fn diagonalize_kramers_with(
    h: &CMatrix,
    resolution_floor: f64,
) -> Result<KramersSpectrum, CrystalError> {
    decompose(h, resolution_floor, true)
}

/// Pairing-validated decomposition without the axial-frame search; the
/// ensemble loop calls this on generically biaxial Hamiltonians where label
/// detection always comes up empty.
pub(crate) fn kramers_unlabeled(
    h: &CMatrix,
    resolution_floor: f64,
) -> Result<KramersSpectrum, CrystalError> {
    decompose(h, resolution_floor, false)
}

fn decompose(
    h: &CMatrix,
    resolution_floor: f64,
    want_labels: bool,
) -> Result<KramersSpectrum, CrystalError> {
    if h.nrows() != 4 || h.ncols() != 4 {
        return Err(CrystalError::BadDimension {
            expected: 4,
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let defect = hermiticity_defect(h);
    if defect > 1e-12 * scale.max(1.0) {
        return Err(CrystalError::NotHermitian { defect });
    }

    let exactly_diagonal =
        (0..4).all(|r| (0..4).all(|c| r == c || (h[(r, c)].re == 0.0 && h[(r, c)].im == 0.0)));
    let mut pairs: Vec<(f64, nalgebra::DVector<C64>)> = if exactly_diagonal {
        // The eigenbasis is the coordinate basis; keeps the axial-ẑ case free
        // of eigensolver noise.
        (0..4)
            .map(|k| {
                let mut v = nalgebra::DVector::zeros(4);
                v[k] = C64::new(1.0, 0.0);
                (h[(k, k)].re, v)
            })
            .collect()
    } else {
        let eig = h.clone().symmetric_eigen();
        (0..4)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).clone_owned()))
            .collect()
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let gap = (pairs[1].0 - pairs[0].0).max(pairs[3].0 - pairs[2].0);
    if gap > tol {
        return Err(CrystalError::PairingFailure { gap, tol });
    }

    let e_lower = 0.5 * (pairs[0].0 + pairs[1].0);
    let e_upper = 0.5 * (pairs[2].0 + pairs[3].0);
    let degenerate = e_upper - e_lower < resolution_floor;

    let mut drain = pairs.into_iter().map(|(_, v)| v);
    let lower_states = [drain.next().unwrap(), drain.next().unwrap()];
    let upper_states = [drain.next().unwrap(), drain.next().unwrap()];

    let mut spectrum = KramersSpectrum {
        lower: Doublet {
            energy: e_lower,
            states: lower_states,
            label: None,
        },
        upper: Doublet {
            energy: e_upper,
            states: upper_states,
            label: None,
        },
        degenerate,
        axis: None,
    };

    if want_labels && !degenerate {
        attach_axial_labels(h, &mut spectrum);
    }
    Ok(spectrum)
}

/// Recover the coupling tensor Q of a J=3/2 Hamiltonian (trace part removed)
/// by projecting onto the operator images of the tensor basis. Returns None
/// when H is not in the span of {I, T_ik}.
pub fn extract_tensor(h: &CMatrix) -> Option<TracelessTensor> {
    if h.nrows() != 4 || h.ncols() != 4 {
        return None;
    }
    let shift = (h[(0, 0)] + h[(1, 1)] + h[(2, 2)] + h[(3, 3)]).re / 4.0;
    let mut h0 = h.clone();
    for d in 0..4 {
        h0[(d, d)] -= C64::new(shift, 0.0);
    }
    let mut q = Matrix3::zeros();
    for (basis, gram) in tensor_basis().iter().zip(quadrupole_gram_3_2()) {
        let op = tensor_hamiltonian_for(J_THREE_HALVES, &TracelessTensor::new_unchecked(*basis));
        let inner: f64 = op
            .iter()
            .zip(h0.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        q += basis * (inner / gram);
    }
    // the projection must reproduce H0, else H had parts outside the span
    let recon = tensor_hamiltonian(&TracelessTensor::new_unchecked(q));
    let err = (&recon - &h0)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    let scale = h0.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if err > 1e-9 * scale.max(1.0) {
        return None;
    }
    Some(TracelessTensor::new_unchecked(q))
}

/// Detect an axial frame of H and, if found, attach |m| labels to the
/// doublets. Requires [H, J_n²] to vanish to 1e-10 of the spectral scale.
fn attach_axial_labels(h: &CMatrix, spectrum: &mut KramersSpectrum) {
    let Some(q) = extract_tensor(h) else { return };
    let qnorm = q.norm();
    if qnorm < 1e-14 {
        return;
    }
    let eig = SymmetricEigen::new(*q.matrix());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let ev = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let tol_ax = 1e-10 * qnorm.max(1.0);
    // axial spectra are (a, a, −2a): exactly one close pair
    let axis_col = if (ev[1] - ev[0]).abs() <= tol_ax && (ev[2] - ev[1]).abs() > tol_ax {
        order[2]
    } else if (ev[2] - ev[1]).abs() <= tol_ax && (ev[1] - ev[0]).abs() > tol_ax {
        order[0]
    } else {
        return;
    };
    let axis = Unit::new_normalize(eig.eigenvectors.column(axis_col).into_owned());

    let jm = angular::j_matrices(J_THREE_HALVES);
    let jn = &jm.x * C64::new(axis.x, 0.0)
        + &jm.y * C64::new(axis.y, 0.0)
        + &jm.z * C64::new(axis.z, 0.0);
    let jn2 = &jn * &jn;
    let scale = h.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let comm = (h * &jn2 - &jn2 * h)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if comm > 1e-10 * scale.max(1.0) {
        return;
    }

    let label_of = |d: &Doublet| -> Option<DoubletLabel> {
        let expect = (d.states[0].adjoint() * &jn2 * &d.states[0])[(0, 0)].re;
        if (expect - 2.25).abs() < 1e-6 {
            Some(DoubletLabel::MThreeHalves)
        } else if (expect - 0.25).abs() < 1e-6 {
            Some(DoubletLabel::MHalf)
        } else {
            None
        }
    };
    spectrum.lower.label = label_of(&spectrum.lower);
    spectrum.upper.label = label_of(&spectrum.upper);
    spectrum.axis = Some(axis);
}
