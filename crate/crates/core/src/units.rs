//! Unit system and electron-beam kinematics.
//!
//! All quantities are exchanged in (eV, nm, dimensionless) with ħ = 1, so
//! energies stand in for angular frequencies and probability densities per
//! unit energy loss carry units of ħ/eV.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coulomb constant e² in eV·nm (Gaussian units).
pub const E_SQUARED: f64 = 1.43996;
/// ħc in eV·nm.
pub const HBAR_C: f64 = 197.327;
/// Electron rest energy m_e c² in eV.
pub const ELECTRON_REST_ENERGY: f64 = 510_999.0;

/// Immutable collection of the physical constants used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// e² in eV·nm.
    pub e_squared: f64,
    /// ħc in eV·nm.
    pub hbar_c: f64,
    /// m_e c² in eV.
    pub electron_rest_energy: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            e_squared: E_SQUARED,
            hbar_c: HBAR_C,
            electron_rest_energy: ELECTRON_REST_ENERGY,
        }
    }
}

impl UnitSystem {
    /// Elementary charge in (eV·nm)^(1/2).
    pub fn e(&self) -> f64 {
        self.e_squared.sqrt()
    }

    /// Speed of light in internal velocity units (nm·eV/ħ).
    pub fn c(&self) -> f64 {
        self.hbar_c
    }

    /// Electron Compton wave number m_e c / ħ in nm⁻¹.
    pub fn compton_wavenumber(&self) -> f64 {
        self.electron_rest_energy / self.hbar_c
    }
}

/// Convention used to convert electron velocity into a wave number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KConvention {
    /// de Broglie wave number k = γ m_e v / ħ.
    #[default]
    Relativistic,
    /// Literal k = m_e v / ħ (rest mass, as written in some references).
    RestMass,
}

/// Beam kinematics plus the aperture geometry of a shaping run.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    pub units: UnitSystem,
    /// Kinetic energy in eV.
    pub kinetic_energy: f64,
    /// Velocity as a fraction of c.
    pub beta: f64,
    /// Electron wave number in nm⁻¹.
    pub wavenumber: f64,
    /// Incidence convergence half-angle in rad.
    pub phi_i: f64,
    /// Collection half-angle in rad.
    pub phi_f: f64,
    /// Requested incident pixel count.
    pub n_pixels_i: usize,
    /// Requested detector pixel count.
    pub n_pixels_f: usize,
    pub k_convention: KConvention,
}

impl BeamConfig {
    /// Builds the kinematics for a beam of kinetic energy `t` (eV).
    pub fn from_energy(
        t: f64,
        phi_i: f64,
        phi_f: f64,
        n_pixels_i: usize,
        n_pixels_f: usize,
        k_convention: KConvention,
    ) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::parameter(format!(
                "kinetic energy must be positive, got {t} eV"
            )));
        }
        if !(phi_i > 0.0) || !(phi_f > 0.0) {
            return Err(Error::parameter(format!(
                "half-angles must be positive, got phi_i={phi_i}, phi_f={phi_f}"
            )));
        }
        let units = UnitSystem::default();
        let gamma = 1.0 + t / units.electron_rest_energy;
        let beta = (1.0 - 1.0 / (gamma * gamma)).sqrt();
        let k_factor = match k_convention {
            KConvention::Relativistic => gamma,
            KConvention::RestMass => 1.0,
        };
        let wavenumber = k_factor * beta * units.compton_wavenumber();
        Ok(Self {
            units,
            kinetic_energy: t,
            beta,
            wavenumber,
            phi_i,
            phi_f,
            n_pixels_i,
            n_pixels_f,
            k_convention,
        })
    }

    /// Electron velocity in internal units (nm·eV/ħ), i.e. β·ħc.
    pub fn velocity(&self) -> f64 {
        self.beta * self.units.hbar_c
    }

    /// Maximum incident transverse wave vector k·sin(φ_i) in nm⁻¹.
    pub fn q_max_i(&self) -> f64 {
        self.wavenumber * self.phi_i.sin()
    }

    /// Maximum collected transverse wave vector k·sin(φ_f) in nm⁻¹.
    pub fn q_max_f(&self) -> f64 {
        self.wavenumber * self.phi_f.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta_100_kev() {
        let beam = BeamConfig::from_energy(1.0e5, 1.5e-3, 0.75e-3, 1257, 49, Default::default())
            .unwrap();
        // gamma = 1 + 100000/510999, beta = sqrt(1 - 1/gamma^2)
        assert_relative_eq!(beam.beta, 0.5482, epsilon = 1e-4);
        assert_relative_eq!(beam.wavenumber, 1697.5, epsilon = 0.5);
        assert_relative_eq!(beam.q_max_i(), 2.546, epsilon = 2e-3);
    }

    #[test]
    fn beta_60_kev() {
        let beam =
            BeamConfig::from_energy(6.0e4, 0.1, 0.1, 1257, 29, Default::default()).unwrap();
        assert_relative_eq!(beam.beta, 0.4462, epsilon = 1e-4);
    }

    #[test]
    fn nonrelativistic_limit() {
        let beam = BeamConfig::from_energy(100.0, 1e-3, 1e-3, 1, 1, Default::default()).unwrap();
        let classical = (2.0 * 100.0 / ELECTRON_REST_ENERGY).sqrt();
        assert_relative_eq!(beam.beta, classical, max_relative = 1e-2);
    }

    #[test]
    fn rest_mass_convention_scales_k_by_gamma() {
        let rel = BeamConfig::from_energy(1.0e5, 1e-3, 1e-3, 1, 1, KConvention::Relativistic)
            .unwrap();
        let rest =
            BeamConfig::from_energy(1.0e5, 1e-3, 1e-3, 1, 1, KConvention::RestMass).unwrap();
        let gamma = 1.0 + 1.0e5 / ELECTRON_REST_ENERGY;
        assert_relative_eq!(rel.wavenumber / rest.wavenumber, gamma, epsilon = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_energy() {
        assert!(BeamConfig::from_energy(0.0, 1e-3, 1e-3, 1, 1, Default::default()).is_err());
        assert!(BeamConfig::from_energy(-5.0, 1e-3, 1e-3, 1, 1, Default::default()).is_err());
    }
}
