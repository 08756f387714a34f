//! Physical parameters and the dimensionless groups built from them.
//!
//! Internal units: ħ = c = ε₀ = 1, frequencies in units of ω₀ and lengths
//! in units of c/ω₀, so k₀ = 1 and a frequency ω is also a wavenumber.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Upper bound on the linewidth ratio Γ₀/ω₀ accepted by the engine.
pub const G_MAX: f64 = 0.1;

/// How the UV cutoff Λ̄ = Λ/ω₀ was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CutoffPreset {
    /// Λ̄ = m_e c²/ħω₀, supplied by the caller.
    Compton(f64),
    /// Λ̄ = c/(r_e ω₀) with r_e the classical electron radius. Beyond the
    /// non-relativistic regime; kept for comparison only.
    ElectronRadius(f64),
    Custom(f64),
}

impl CutoffPreset {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Compton(v) | Self::ElectronRadius(v) | Self::Custom(v) => v,
        }
    }
}

/// Two-level isotropic dipole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpecies {
    pub omega0: f64,
    pub gamma_ratio: f64,
    pub cutoff: f64,
}

impl DipoleSpecies {
    pub fn new(gamma_ratio: f64, cutoff: f64) -> Result<Self> {
        let s = Self { omega0: 1.0, gamma_ratio, cutoff };
        s.validate()?;
        Ok(s)
    }

    pub fn with_preset(gamma_ratio: f64, preset: CutoffPreset) -> Result<Self> {
        Self::new(gamma_ratio, preset.value())
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gamma_ratio;
        if !(g.is_finite() && g > 0.0) {
            return Err(invalid("g", format!("must be positive, got {g}")));
        }
        if g >= G_MAX {
            return Err(invalid("g", format!("must be below {G_MAX} (perturbative regime), got {g}")));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 1.0) {
            return Err(invalid("cutoff", format!("must exceed 1, got {}", self.cutoff)));
        }
        if self.omega0 != 1.0 {
            return Err(invalid("omega0", "frequencies are measured in units of omega0"));
        }
        Ok(())
    }

    pub fn g(&self) -> f64 {
        self.gamma_ratio
    }

    /// μ²/(ε₀ħ) in ω₀(c/ω₀)³ units, from Γ₀ = k₀³μ²/(3πε₀ħ).
    pub fn mu2(&self) -> f64 {
        3.0 * PI * self.gamma_ratio
    }

    /// Static polarizability α₀(0) = 2μ²/3.
    pub fn alpha_static(&self) -> f64 {
        2.0 * self.mu2() / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Correlation {
    HardSphere,
    /// Hard sphere plus a contact shell C·ξ·δ(r − ξ).
    HardSphereOverdensity { c: f64 },
}

impl Correlation {
    pub fn overdensity(&self) -> f64 {
        match *self {
            Self::HardSphere => 0.0,
            Self::HardSphereOverdensity { c } => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    /// Packing ρξ³.
    pub rho_bar: f64,
    /// ζ₀ = k₀ξ, equal to ξ in internal units.
    pub zeta0: f64,
    pub correlation: Correlation,
}

impl MediumSpec {
    pub fn new(rho_bar: f64, zeta0: f64, correlation: Correlation) -> Result<Self> {
        let m = Self { rho_bar, zeta0, correlation };
        m.validate()?;
        Ok(m)
    }

    pub fn hard_sphere(rho_bar: f64, zeta0: f64) -> Result<Self> {
        Self::new(rho_bar, zeta0, Correlation::HardSphere)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_bar.is_finite() && self.rho_bar > 0.0) {
            return Err(invalid("rho_bar", format!("must be positive, got {}", self.rho_bar)));
        }
        if !(self.zeta0.is_finite() && self.zeta0 > 0.0) {
            return Err(invalid("zeta0", format!("must be positive, got {}", self.zeta0)));
        }
        let c = self.correlation.overdensity();
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid("overdensity_c", format!("must be non-negative, got {c}")));
        }
        Ok(())
    }

    /// Rejects media outside the ζ₀ < 1 regime of the continuum models.
    pub fn require_effective_medium(&self) -> Result<()> {
        if self.zeta0 >= 1.0 {
            return Err(invalid(
                "zeta0",
                format!("effective-medium models need zeta0 < 1, got {}", self.zeta0),
            ));
        }
        Ok(())
    }

    pub fn xi(&self) -> f64 {
        self.zeta0
    }

    /// Number density in (ω₀/c)³ units.
    pub fn rho(&self) -> f64 {
        self.rho_bar / self.zeta0.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessGroups {
    pub g: f64,
    pub zeta0: f64,
    pub rho_bar: f64,
    /// Electrostatic coupling ρμ².
    pub x: f64,
    /// (g/ζ₀³)², the size of one recurrent-scattering round trip.
    pub recur_ratio: f64,
}

impl DimensionlessGroups {
    pub fn recurrence_negligible(&self) -> bool {
        self.recur_ratio < 1.0
    }
}

pub fn derive_groups(species: &DipoleSpecies, medium: &MediumSpec) -> Result<DimensionlessGroups> {
    species.validate()?;
    medium.validate()?;
    let g = species.gamma_ratio;
    let z3 = medium.zeta0.powi(3);
    Ok(DimensionlessGroups {
        g,
        zeta0: medium.zeta0,
        rho_bar: medium.rho_bar,
        x: 3.0 * PI * g * medium.rho_bar / z3,
        recur_ratio: (g / z3).powi(2),
    })
}

/// Flat `key = value` parameter file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub g: Option<f64>,
    pub zeta0: Option<f64>,
    pub rho_bar: Option<f64>,
    pub cutoff: Option<f64>,
    pub correlation: Option<String>,
    pub overdensity_c: Option<f64>,
}

impl ParamFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| invalid("config", format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let num = |field: &'static str| -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| invalid(field, format!("line {}: not a number: {value}", lineno + 1)))
            };
            match key {
                "g" => out.g = Some(num("g")?),
                "zeta0" => out.zeta0 = Some(num("zeta0")?),
                "rho_bar" => out.rho_bar = Some(num("rho_bar")?),
                "cutoff" => out.cutoff = Some(num("cutoff")?),
                "overdensity_c" => out.overdensity_c = Some(num("overdensity_c")?),
                "correlation" => out.correlation = Some(value.to_string()),
                other => {
                    return Err(invalid("config", format!("line {}: unknown key `{other}`", lineno + 1)))
                }
            }
        }
        Ok(out)
    }

    pub fn correlation_model(&self) -> Result<Correlation> {
        let c = self.overdensity_c.unwrap_or(0.0);
        match self.correlation.as_deref() {
            None | Some("hs") | Some("hard_sphere") | Some("hard-sphere") => {
                if c > 0.0 {
                    Ok(Correlation::HardSphereOverdensity { c })
                } else {
                    Ok(Correlation::HardSphere)
                }
            }
            Some("hs_overdensity") | Some("hard_sphere_overdensity") | Some("overdensity") => {
                Ok(Correlation::HardSphereOverdensity { c })
            }
            Some(other) => Err(invalid("correlation", format!("unknown model `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_from_packing() {
        let s = DipoleSpecies::new(1e-6, 10.0).unwrap();
        let m = MediumSpec::hard_sphere(1e-3, 0.1).unwrap();
        let d = derive_groups(&s, &m).unwrap();
        assert!((d.x - 3.0 * PI * 1e-9 / 1e-3).abs() < 1e-18);
        assert!((d.x - 9.4248e-6).abs() < 1e-9);
        assert!((d.recur_ratio - 1e-6).abs() < 1e-18);
        assert!((d.x - m.rho() * s.mu2()).abs() < 1e-15 * d.x);
    }

    #[test]
    fn rejects_large_linewidth() {
        let e = DipoleSpecies::new(0.5, 10.0).unwrap_err();
        assert!(matches!(e, crate::VacuaError::InvalidParameter { field: "g", .. }));
        assert!(DipoleSpecies::new(1e-3, 0.5).is_err());
        assert!(MediumSpec::hard_sphere(-1.0, 0.1).is_err());
        assert!(MediumSpec::hard_sphere(0.1, 0.0).is_err());
    }

    #[test]
    fn static_polarizability_is_two_pi_g() {
        for g in [1e-8, 1e-4, 0.05] {
            let s = DipoleSpecies::new(g, 2.0).unwrap();
            assert!((s.alpha_static() - 2.0 * PI * g).abs() < 1e-15);
        }
    }

    #[test]
    fn effective_medium_regime_is_checked() {
        let m = MediumSpec::hard_sphere(0.1, 1.5).unwrap();
        assert!(m.require_effective_medium().is_err());
    }

    #[test]
    fn parses_flat_file() {
        let p = ParamFile::parse("g = 1e-8\nzeta0=0.02 # near field\n\ncorrelation = hs\noverdensity_c = 0.5\n").unwrap();
        assert_eq!(p.g, Some(1e-8));
        assert_eq!(p.zeta0, Some(0.02));
        assert_eq!(p.correlation_model().unwrap(), Correlation::HardSphereOverdensity { c: 0.5 });
        assert!(ParamFile::parse("gee = 1").is_err());
        assert!(ParamFile::parse("g = abc").is_err());
    }
}
