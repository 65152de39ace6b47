//! Exact angular-momentum algebra for small half-integer J.
//!
//! Conventions, fixed throughout the crate:
//!
//! * Basis ordering: |J m⟩ with m = +J, +J−1, …, −J (index 0 is m = +J).
//! * Clebsch–Gordan coefficients in the Condon–Shortley phase convention.
//! * Spherical basis vectors ε₀ = ẑ, ε±₁ = ∓(x̂ ± iŷ)/√2; the spherical
//!   components of the dipole operator are d₀ = d_z, d±₁ = ∓(d_x ± id_y)/√2.
//! * Euler angles (α, β, γ) in the active z-y-z convention:
//!   D^j(α,β,γ) = exp(−iαJ_z)·exp(−iβJ_y)·exp(−iγJ_z), so that
//!   D (n·J) D† = (Rn)·J with R = R_z(α)R_y(β)R_z(γ).
//!
//! All quantum numbers are stored doubled (2J, 2m) to keep half-integers
//! exact. Matrix elements are simple surds; double precision is adequate.

use nalgebra::{Complex, DMatrix, Rotation3, Vector3};
use thiserror::Error;

pub type C64 = Complex<f64>;
/// Operator matrix in the |J m⟩ basis (m descending).
pub type CMatrix = DMatrix<C64>;

#[derive(Debug, Error, PartialEq)]
pub enum AngularError {
    #[error("projection 2m={twice_m} is invalid for 2j={twice_j}")]
    InvalidProjection { twice_j: u32, twice_m: i32 },
    #[error("polarization vector must have unit norm, got |e| = {norm}")]
    NonUnitVector { norm: f64 },
}

/// Total angular momentum quantum number, stored as 2J.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HalfIntegerJ {
    twice_j: u32,
}

/// J = 1/2 (the ground level of the D lines).
pub const J_HALF: HalfIntegerJ = HalfIntegerJ::from_twice(1);
/// J = 1 (photon angular momentum in dipole coupling).
pub const J_ONE: HalfIntegerJ = HalfIntegerJ::from_twice(2);
/// J = 3/2 (the excited level split by an anisotropic matrix).
pub const J_THREE_HALVES: HalfIntegerJ = HalfIntegerJ::from_twice(3);

impl HalfIntegerJ {
    pub const fn from_twice(twice_j: u32) -> Self {
        Self { twice_j }
    }

    pub const fn twice(self) -> u32 {
        self.twice_j
    }

    /// Dimension of the |J m⟩ multiplet, 2J + 1.
    pub const fn dimension(self) -> usize {
        self.twice_j as usize + 1
    }

    pub fn value(self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    /// J(J+1).
    pub fn j_squared(self) -> f64 {
        let j = self.value();
        j * (j + 1.0)
    }

    /// Projections m = +J, +J−1, …, −J in basis order.
    pub fn projections(self) -> impl Iterator<Item = HalfInteger> {
        let tj = self.twice_j as i32;
        (0..=self.twice_j).map(move |k| HalfInteger::from_twice(tj - 2 * k as i32))
    }

    /// Basis index of projection m (0 for m = +J), if m is valid for this J.
    pub fn index_of(self, m: HalfInteger) -> Result<usize, AngularError> {
        let tj = self.twice_j as i32;
        let tm = m.twice();
        if tm.abs() > tj || (tj - tm) % 2 != 0 {
            return Err(AngularError::InvalidProjection {
                twice_j: self.twice_j,
                twice_m: tm,
            });
        }
        Ok(((tj - tm) / 2) as usize)
    }
}

/// A half-integer value (projection quantum number), stored as 2m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HalfInteger {
    twice: i32,
}

impl HalfInteger {
    pub const fn from_twice(twice: i32) -> Self {
        Self { twice }
    }

    pub const fn integer(n: i32) -> Self {
        Self { twice: 2 * n }
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }
}

/// n! as f64; exact for the small arguments used here.
fn fact(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n as i64).map(|k| k as f64).product()
}

/// The three angular-momentum operator matrices for a given J.
pub struct JMatrices {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

/// Build J_x, J_y, J_z in the |J m⟩ basis (ħ = 1). J_z is diagonal.
pub fn j_matrices(j: HalfIntegerJ) -> JMatrices {
    let dim = j.dimension();
    let ms: Vec<f64> = j.projections().map(HalfInteger::value).collect();
    let jj = j.j_squared();

    let mut z = CMatrix::zeros(dim, dim);
    for (k, &m) in ms.iter().enumerate() {
        z[(k, k)] = C64::new(m, 0.0);
    }

    // J₊|j m⟩ = √(J(J+1) − m(m+1)) |j m+1⟩; row k is m = J − k, so the
    // raising operator connects column k+1 to row k.
    let mut plus = CMatrix::zeros(dim, dim);
    for k in 0..dim.saturating_sub(1) {
        let m = ms[k + 1];
        plus[(k, k + 1)] = C64::new((jj - m * (m + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();

    let x = (&plus + &minus).scale(0.5);
    let y = (&plus - &minus) * C64::new(0.0, -0.5);
    JMatrices { x, y, z }
}

/// Clebsch–Gordan coefficient ⟨J M | j1 m1; j2 m2⟩ (Condon–Shortley).
///
/// Returns 0 when the triangle rule fails or M ≠ m1 + m2; projections that
/// are out of range or of the wrong parity for their J are rejected.
pub fn clebsch_gordan(
    j1: HalfIntegerJ,
    m1: HalfInteger,
    j2: HalfIntegerJ,
    m2: HalfInteger,
    j: HalfIntegerJ,
    m: HalfInteger,
) -> Result<f64, AngularError> {
    for (jj, mm) in [(j1, m1), (j2, m2), (j, m)] {
        jj.index_of(mm)?;
    }
    let (tj1, tj2, tj) = (j1.twice() as i32, j2.twice() as i32, j.twice() as i32);
    let (tm1, tm2, tm) = (m1.twice(), m2.twice(), m.twice());
    if tm1 + tm2 != tm || tj < (tj1 - tj2).abs() || tj > tj1 + tj2 {
        return Ok(0.0);
    }

    // Racah's closed form; every factorial argument below is an integer
    // because all the doubled sums are even.
    let f2 = |t: i32| -> f64 {
        debug_assert!(t % 2 == 0);
        fact(t / 2)
    };
    let delta = (f2(tj1 + tj2 - tj) * f2(tj1 - tj2 + tj) * f2(-tj1 + tj2 + tj)
        / f2(tj1 + tj2 + tj + 2))
    .sqrt();
    let pre = ((tj as f64 + 1.0)
        * f2(tj + tm)
        * f2(tj - tm)
        * f2(tj1 + tm1)
        * f2(tj1 - tm1)
        * f2(tj2 + tm2)
        * f2(tj2 - tm2))
    .sqrt();

    let mut sum = 0.0;
    // 2k runs over even values keeping all factorial arguments non-negative.
    let tk_max = (tj1 + tj2 - tj).min(tj1 - tm1).min(tj2 + tm2);
    let tk_min = 0.max(-(tj - tj2 + tm1)).max(-(tj - tj1 - tm2));
    let mut tk = tk_min;
    while tk <= tk_max {
        let denom = f2(tk)
            * f2(tj1 + tj2 - tj - tk)
            * f2(tj1 - tm1 - tk)
            * f2(tj2 + tm2 - tk)
            * f2(tj - tj2 + tm1 + tk)
            * f2(tj - tj1 - tm2 + tk);
        let sign = if (tk / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
        tk += 2;
    }
    Ok(delta * pre * sum)
}

/// Electric-dipole transition amplitudes ⟨Je me| d_q |Jg mg⟩ in units of the
/// reduced matrix element (set to 1).
///
/// By the Wigner–Eckart theorem the amplitude equals the Clebsch–Gordan
/// coefficient ⟨Je me | Jg mg; 1 q⟩; it vanishes unless me = mg + q.
pub struct DipoleOperator {
    jg: HalfIntegerJ,
    je: HalfIntegerJ,
    /// Spherical components indexed by q + 1 ∈ {0, 1, 2}; each matrix is
    /// (dim_e × dim_g), real in the Condon–Shortley convention.
    spherical: [DMatrix<f64>; 3],
}

impl DipoleOperator {
    pub fn new(jg: HalfIntegerJ, je: HalfIntegerJ) -> Self {
        let (de, dg) = (je.dimension(), jg.dimension());
        let build = |q: i32| {
            let mut mat = DMatrix::zeros(de, dg);
            for (r, me) in je.projections().enumerate() {
                for (c, mg) in jg.projections().enumerate() {
                    mat[(r, c)] = clebsch_gordan(jg, mg, J_ONE, HalfInteger::integer(q), je, me)
                        .expect("projections are valid by construction");
                }
            }
            mat
        };
        Self {
            jg,
            je,
            spherical: [build(-1), build(0), build(1)],
        }
    }

    pub fn ground_j(&self) -> HalfIntegerJ {
        self.jg
    }

    pub fn excited_j(&self) -> HalfIntegerJ {
        self.je
    }

    /// The q-th spherical component matrix (q ∈ {−1, 0, +1}), (dim_e × dim_g).
    pub fn spherical(&self, q: i32) -> &DMatrix<f64> {
        &self.spherical[(q + 1) as usize]
    }

    /// Single amplitude ⟨Je me| d_q |Jg mg⟩.
    pub fn amplitude(&self, me: HalfInteger, q: i32, mg: HalfInteger) -> Result<f64, AngularError> {
        let r = self.je.index_of(me)?;
        let c = self.jg.index_of(mg)?;
        Ok(self.spherical[(q + 1) as usize][(r, c)])
    }

    /// Matrix of d·e for a real unit polarization vector e, (dim_e × dim_g):
    /// e_x d_x + e_y d_y + e_z d_z with d_x = (d₋₁ − d₊₁)/√2,
    /// d_y = i(d₋₁ + d₊₁)/√2, d_z = d₀.
    pub fn along(&self, e: &Vector3<f64>) -> CMatrix {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let (dm, d0, dp) = (&self.spherical[0], &self.spherical[1], &self.spherical[2]);
        let mut out = CMatrix::zeros(dm.nrows(), dm.ncols());
        for r in 0..dm.nrows() {
            for c in 0..dm.ncols() {
                let re = e.x * inv_sqrt2 * (dm[(r, c)] - dp[(r, c)]) + e.z * d0[(r, c)];
                let im = e.y * inv_sqrt2 * (dm[(r, c)] + dp[(r, c)]);
                out[(r, c)] = C64::new(re, im);
            }
        }
        out
    }
}

/// Spherical-basis amplitudes of a unit polarization vector,
/// a_q = ε_q*·e with ε₀ = ẑ, ε±₁ = ∓(x̂ ± iŷ)/√2.
#[derive(Clone, Copy, Debug)]
pub struct SphericalPolarization {
    pub a_minus1: C64,
    pub a_zero: C64,
    pub a_plus1: C64,
}

impl SphericalPolarization {
    pub fn norm_squared(&self) -> f64 {
        self.a_minus1.norm_sqr() + self.a_zero.norm_sqr() + self.a_plus1.norm_sqr()
    }
}

/// Decompose a real unit vector over the spherical basis.
pub fn polarization_spherical(e: &Vector3<f64>) -> Result<SphericalPolarization, AngularError> {
    let norm = e.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(AngularError::NonUnitVector { norm });
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    Ok(SphericalPolarization {
        a_minus1: C64::new(e.x, e.y) * inv_sqrt2,
        a_zero: C64::new(e.z, 0.0),
        a_plus1: C64::new(-e.x, e.y) * inv_sqrt2,
    })
}

/// Wigner small-d matrix d^j_{m'm}(β) in the |J m⟩ basis (m descending).
pub fn wigner_small_d(j: HalfIntegerJ, beta: f64) -> DMatrix<f64> {
    let dim = j.dimension();
    let tj = j.twice() as i32;
    let (cos_half, sin_half) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let mut d = DMatrix::zeros(dim, dim);
    for (r, mp) in j.projections().enumerate() {
        for (c, m) in j.projections().enumerate() {
            let (tmp, tm) = (mp.twice(), m.twice());
            let pre = (fact((tj + tmp) / 2)
                * fact((tj - tmp) / 2)
                * fact((tj + tm) / 2)
                * fact((tj - tm) / 2))
            .sqrt();
            // k ranges over integers keeping every factorial argument >= 0.
            let k_lo = 0.max((tm - tmp) / 2);
            let k_hi = ((tj + tm) / 2).min((tj - tmp) / 2);
            let mut sum = 0.0;
            let mut k = k_lo;
            while k <= k_hi {
                let a = (tj + tm) / 2 - k;
                let b = (tj - tmp) / 2 - k;
                let c2 = (tmp - tm) / 2 + k;
                let cos_pow = a + b; // 2j + m − m' − 2k
                let sin_pow = c2 + k; // m' − m + 2k
                let sign = if c2 % 2 == 0 { 1.0 } else { -1.0 }; // (−1)^{m'−m+k}
                sum += sign * cos_half.powi(cos_pow) * sin_half.powi(sin_pow)
                    / (fact(a) * fact(k) * fact(b) * fact(c2));
                k += 1;
            }
            d[(r, c)] = pre * sum;
        }
    }
    d
}

/// Wigner rotation matrix D^j(α,β,γ) = e^{−iαJz} d^j(β) e^{−iγJz}
/// (active z-y-z convention).
pub fn wigner_rotation(j: HalfIntegerJ, alpha: f64, beta: f64, gamma: f64) -> CMatrix {
    let dim = j.dimension();
    let small = wigner_small_d(j, beta);
    let mut d = CMatrix::zeros(dim, dim);
    for (r, mp) in j.projections().enumerate() {
        for (c, m) in j.projections().enumerate() {
            let phase = C64::new(0.0, -(mp.value() * alpha + m.value() * gamma)).exp();
            d[(r, c)] = phase * small[(r, c)];
        }
    }
    d
}

/// Rotation R_z(α)·R_y(β)·R_z(γ), the SO(3) counterpart of [`wigner_rotation`].
pub fn rotation_zyz(alpha: f64, beta: f64, gamma: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), alpha)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), beta)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), gamma)
}

/// Largest absolute deviation from Hermiticity, max |H − H†|.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            worst = worst.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    worst
}
