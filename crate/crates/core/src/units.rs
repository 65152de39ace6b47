//! Energy axis units and conversions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit tag for a spectrum x-axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisUnit {
    /// Wavenumber, cm⁻¹.
    #[serde(rename = "cm-1")]
    Wavenumber,
    /// Wavelength, nm.
    #[serde(rename = "nm")]
    Nanometer,
}

impl std::fmt::Display for AxisUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisUnit::Wavenumber => write!(f, "cm-1"),
            AxisUnit::Nanometer => write!(f, "nm"),
        }
    }
}

impl std::str::FromStr for AxisUnit {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, UnitError> {
        match s {
            "cm-1" => Ok(AxisUnit::Wavenumber),
            "nm" => Ok(AxisUnit::Nanometer),
            other => Err(UnitError::UnknownAxis(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("wavelength/wavenumber must be positive, got {0}")]
    NonPositive(f64),
    #[error("unknown axis unit `{0}` (expected `nm` or `cm-1`)")]
    UnknownAxis(String),
}

/// Convert a wavelength in nm to a wavenumber in cm⁻¹ (E = 10⁷/λ).
pub fn nm_to_wavenumber(lambda_nm: f64) -> Result<f64, UnitError> {
    if lambda_nm <= 0.0 || lambda_nm.is_nan() {
        return Err(UnitError::NonPositive(lambda_nm));
    }
    Ok(1.0e7 / lambda_nm)
}

/// Convert a wavenumber in cm⁻¹ to a wavelength in nm (λ = 10⁷/E).
pub fn wavenumber_to_nm(energy_cm: f64) -> Result<f64, UnitError> {
    if energy_cm <= 0.0 || energy_cm.is_nan() {
        return Err(UnitError::NonPositive(energy_cm));
    }
    Ok(1.0e7 / energy_cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_edges() {
        assert!((nm_to_wavenumber(770.0).unwrap() - 12987.0).abs() < 0.1);
        assert!((nm_to_wavenumber(870.0).unwrap() - 11494.3).abs() < 0.1);
    }

    #[test]
    fn roundtrip() {
        for &nm in &[770.0, 852.3, 870.0, 1.0e-3, 4.2e6] {
            let back = wavenumber_to_nm(nm_to_wavenumber(nm).unwrap()).unwrap();
            assert!((back - nm).abs() <= 1e-10 * nm);
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert_eq!(nm_to_wavenumber(0.0), Err(UnitError::NonPositive(0.0)));
        assert_eq!(nm_to_wavenumber(-3.0), Err(UnitError::NonPositive(-3.0)));
        assert!(wavenumber_to_nm(f64::NAN).is_err());
        assert_eq!("cm-1".parse::<AxisUnit>(), Ok(AxisUnit::Wavenumber));
        assert!("kelvin".parse::<AxisUnit>().is_err());
    }
}
