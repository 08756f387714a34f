//! Single-dipole polarizabilities: bare, radiatively renormalized in free
//! space, and renormalized by an arbitrary radiative potential φ.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VacuaError};
use crate::params::DipoleSpecies;
use crate::phi::phi0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolarizabilityKind {
    Bare,
    FreeSpace,
    Stochastic { phi_sc: C64 },
}

/// α₀(ω) = 2μ²ω₀/(3(ω₀² − ω²)) = 2πg/(1 − ω²).
pub fn alpha_bare(omega: C64, species: &DipoleSpecies) -> Result<C64> {
    let den = 1.0 - omega * omega;
    if den.norm() < 1e-14 {
        return Err(VacuaError::ResonancePole(omega.re));
    }
    Ok(species.alpha_static() / den)
}

/// α₀(iu), real and positive.
pub fn alpha_bare_imag(u: f64, species: &DipoleSpecies) -> f64 {
    species.alpha_static() / (1.0 + u * u)
}

/// α = α₀/(1 + α₀φ⁽⁰⁾).
pub fn alpha_free(omega: C64, species: &DipoleSpecies) -> Result<C64> {
    alpha_stoch(omega, species, phi0(omega))
}

/// α̃ = α₀/(1 + α₀φ).
pub fn alpha_stoch(omega: C64, species: &DipoleSpecies, phi: C64) -> Result<C64> {
    if !(phi.re.is_finite() && phi.im.is_finite()) {
        return Err(VacuaError::InvalidParameter { field: "phi", reason: "must be finite".into() });
    }
    let a0 = alpha_bare(omega, species)?;
    let den = 1.0 + a0 * phi;
    if den.norm() < 1e-12 {
        return Err(VacuaError::DivergentRenormalization(den.norm()));
    }
    Ok(a0 / den)
}

pub fn alpha_of_kind(omega: C64, species: &DipoleSpecies, kind: PolarizabilityKind) -> Result<C64> {
    match kind {
        PolarizabilityKind::Bare => alpha_bare(omega, species),
        PolarizabilityKind::FreeSpace => alpha_free(omega, species),
        PolarizabilityKind::Stochastic { phi_sc } => alpha_stoch(omega, species, phi0(omega) + phi_sc),
    }
}

/// Free-space α(iu) on the imaginary axis, checked against the runaway pole
/// at u ≈ 1/g where 1 + α₀φ⁽⁰⁾ changes sign.
pub fn alpha_free_imag(u: f64, species: &DipoleSpecies) -> Result<f64> {
    let a0 = alpha_bare_imag(u, species);
    let den = 1.0 - a0 * u.powi(3) / (2.0 * std::f64::consts::PI);
    if den <= 1e-12 {
        return Err(VacuaError::DivergentRenormalization(den));
    }
    Ok(a0 / den)
}
