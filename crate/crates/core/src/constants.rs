//! CODATA 2018 physical constants (SI).

/// Physical constants entering the torque and thermal-field prefactors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Vacuum permeability (H/m).
    pub mu0: f64,
    /// Elementary charge (C).
    pub e: f64,
    /// Boltzmann constant (J/K).
    pub kb: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    mu0: 1.256_637_062_12e-6,
    e: 1.602_176_634e-19,
    kb: 1.380_649e-23,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA_2018
    }
}

impl PhysicalConstants {
    /// |ħ/(μ0·e)|, the spin-torque field prefactor (A·m).
    pub fn stt_prefactor(&self) -> f64 {
        (self.hbar / (self.mu0 * self.e)).abs()
    }
}
