//! Continuum comparators: the Maxwell-Garnett susceptibility, the
//! Lorentz-Lorenz shift, electrostatic mode sums, Schwinger's bulk energy with
//! and without spatial dispersion, and background-index Lamb shift
//! prescriptions.
//!
//! Frequency integrals are evaluated on the imaginary axis. A real-axis form
//! Re∫dω ω³h(ω) becomes ∫du u³h(iu), and Im∫dω h(ω) becomes ∫du h(iu).
//! Mode sums over ln D(ω) are normalized so that a factor
//! (ω_a² − ω²)/(ω_b² − ω²) contributes ħ(ω_a − ω_b)/2 per dipole.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VacuaError};
use crate::lamb::{EnergyKind, EnergyResult, Provenance, Susceptibility};
use crate::params::DipoleSpecies;
use crate::phi::{radiative_brackets, Polarization};
use crate::polarizability::alpha_bare_imag;
use crate::quadrature::{integrate_fallible, integrate_semi_infinite_fallible, wick_integrate_to, IntegralSpec};

/// Truncated power series Σ cₙyⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn constant(c: f64, len: usize) -> Self {
        let mut v = vec![0.0; len];
        v[0] = c;
        Self(v)
    }

    /// The variable y itself.
    pub fn var(len: usize) -> Self {
        let mut v = vec![0.0; len];
        if len > 1 {
            v[1] = 1.0;
        }
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|a| a * s).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.len();
        let mut v = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                v[i + j] += self.0[i] * o.0[j];
            }
        }
        Self(v)
    }

    pub fn recip(&self) -> Self {
        let n = self.len();
        let mut b = vec![0.0; n];
        b[0] = 1.0 / self.0[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.0[j] * b[k - j]).sum();
            b[k] = -s / self.0[0];
        }
        Self(b)
    }

    pub fn sqrt(&self) -> Self {
        let n = self.len();
        let mut b = vec![0.0; n];
        b[0] = self.0[0].sqrt();
        for k in 1..n {
            let s: f64 = (1..k).map(|j| b[j] * b[k - j]).sum();
            b[k] = (self.0[k] - s) / (2.0 * b[0]);
        }
        Self(b)
    }

    pub fn powi(&self, p: usize) -> Self {
        let mut r = Self::constant(1.0, self.len());
        for _ in 0..p {
            r = r.mul(self);
        }
        r
    }
}

/// χ_MG as a series in y = ρα₀: y/(1 − y/3).
fn mg_chi_series(len: usize) -> Series {
    let y = Series::var(len);
    let den = Series::constant(1.0, len).add(&y.scale(-1.0 / 3.0));
    y.mul(&den.recip())
}

/// Coefficients of n = √(1 + χ_MG) in powers of ρα₀ up to y^order.
pub fn mg_refractive_series(order: usize) -> Vec<f64> {
    let len = order + 1;
    Series::constant(1.0, len).add(&mg_chi_series(len)).sqrt().0
}

/// Coefficients of 1 − n³ for the Maxwell-Garnett index.
pub fn schwinger_series(order: usize) -> Vec<f64> {
    let len = order + 1;
    let n = Series(mg_refractive_series(order));
    Series::constant(1.0, len).add(&n.powi(3).scale(-1.0)).0
}

/// Coefficients of 𝓛²n, the radiative factor of φ_MG in units of −ik³/2π.
pub fn mg_radiative_factor_series(order: usize) -> Vec<f64> {
    let len = order + 1;
    let l = Series::constant(1.0, len).add(&mg_chi_series(len).scale(1.0 / 3.0));
    l.mul(&l).mul(&Series(mg_refractive_series(order))).0
}

/// A real curve on the imaginary frequency axis.
pub trait ImagCurve: Sync {
    fn at(&self, u: f64) -> Result<f64>;
}

impl<F: Fn(f64) -> f64 + Sync> ImagCurve for F {
    fn at(&self, u: f64) -> Result<f64> {
        Ok(self(u))
    }
}

/// Two-column table (u, value) on the imaginary axis, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagAxisTable {
    pub u: Vec<f64>,
    pub values: Vec<f64>,
}

impl ImagAxisTable {
    pub fn new(u: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if u.len() != values.len() || u.len() < 2 {
            return Err(VacuaError::Format("table needs at least two rows of equal length".into()));
        }
        if u.windows(2).any(|w| w[1] <= w[0]) || u[0] < 0.0 {
            return Err(VacuaError::Format("frequencies must be non-negative and increasing".into()));
        }
        if values.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(VacuaError::Format("table contains non-finite values".into()));
        }
        Ok(Self { u, values })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cols.len() < 2 {
                return Err(VacuaError::Format(format!("line {}: expected two columns", no + 1)));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|e| VacuaError::Format(format!("line {}: {e}", no + 1)));
            u.push(p(cols[0])?);
            v.push(p(cols[1])?);
        }
        Self::new(u, v)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VacuaError::Format(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn u_max(&self) -> f64 {
        *self.u.last().expect("non-empty")
    }

    pub fn interpolate(&self, u: f64) -> Result<f64> {
        if !(u >= self.u[0] && u <= self.u_max()) {
            return Err(VacuaError::Precondition(format!(
                "u = {u} outside the tabulated range [{}, {}]",
                self.u[0],
                self.u_max()
            )));
        }
        let i = self.u.partition_point(|&x| x <= u).clamp(1, self.u.len() - 1);
        let (u0, u1) = (self.u[i - 1], self.u[i]);
        let t = (u - u0) / (u1 - u0);
        Ok(self.values[i - 1] * (1.0 - t) + self.values[i] * t)
    }
}

impl ImagCurve for ImagAxisTable {
    fn at(&self, u: f64) -> Result<f64> {
        self.interpolate(u)
    }
}

/// A homogeneous, isotropic, local dielectric.
pub trait EffectiveMedium: Sync {
    fn chi(&self, omega: C64) -> Result<C64>;

    /// χ(iu), real for ground-state media.
    fn chi_imag(&self, u: f64) -> Result<f64> {
        Ok(self.chi(C64::new(0.0, u))?.re)
    }

    fn epsilon(&self, omega: C64) -> Result<C64> {
        Ok(1.0 + self.chi(omega)?)
    }

    /// Principal branch of √ε.
    fn n(&self, omega: C64) -> Result<C64> {
        Ok(self.epsilon(omega)?.sqrt())
    }

    fn n_imag(&self, u: f64) -> Result<f64> {
        let e = 1.0 + self.chi_imag(u)?;
        if e <= 0.0 {
            return Err(VacuaError::Precondition(format!("ε(iu) = {e} is not positive at u = {u}")));
        }
        Ok(e.sqrt())
    }

    fn lorentz_factor(&self, omega: C64) -> Result<C64> {
        Ok((self.chi(omega)? + 3.0) / 3.0)
    }

    /// ρα₀(iu) of the constituents. The default inverts the
    /// Clausius-Mossotti relation χ = ρα₀/(1 − ρα₀/3).
    fn rho_alpha0_imag(&self, u: f64) -> Result<f64> {
        let c = self.chi_imag(u)?;
        Ok(3.0 * c / (c + 3.0))
    }

    /// χ(iu) with the density multiplied by λ, for media whose density
    /// dependence is known.
    fn chi_imag_scaled(&self, _lambda: f64, _u: f64) -> Option<Result<f64>> {
        None
    }
}

/// χ ≡ 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vacuum;

impl EffectiveMedium for Vacuum {
    fn chi(&self, _: C64) -> Result<C64> {
        Ok(C64::new(0.0, 0.0))
    }
    fn chi_imag_scaled(&self, _: f64, _: f64) -> Option<Result<f64>> {
        Some(Ok(0.0))
    }
}

/// x = ρμ²/ħε₀ω₀, the Maxwell-Garnett coupling.
pub fn mg_coupling(rho: f64, species: &DipoleSpecies) -> f64 {
    rho * species.mu2()
}

fn check_density(rho: f64, species: &DipoleSpecies) -> Result<()> {
    species.validate()?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(invalid("rho", format!("must be non-negative, got {rho}")));
    }
    Ok(())
}

/// χ_MG(ω) = (2x/3)/(1 − ω² − 2x/9) with bare polarizabilities.
pub fn chi_mg(omega: C64, rho: f64, species: &DipoleSpecies) -> Result<C64> {
    check_density(rho, species)?;
    let x = mg_coupling(rho, species);
    let den = 1.0 - omega * omega - 2.0 * x / 9.0;
    if den.norm() < 1e-14 {
        return Err(VacuaError::ResonancePole(omega.re));
    }
    Ok(2.0 * x / 3.0 / den)
}

/// Maxwell-Garnett medium of bare two-level dipoles at density ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellGarnett {
    pub rho: f64,
    pub species: DipoleSpecies,
}

impl MaxwellGarnett {
    pub fn new(rho: f64, species: DipoleSpecies) -> Result<Self> {
        check_density(rho, &species)?;
        Ok(Self { rho, species })
    }

    pub fn coupling(&self) -> f64 {
        mg_coupling(self.rho, &self.species)
    }
}

impl EffectiveMedium for MaxwellGarnett {
    fn chi(&self, omega: C64) -> Result<C64> {
        chi_mg(omega, self.rho, &self.species)
    }
    fn chi_imag(&self, u: f64) -> Result<f64> {
        let x = self.coupling();
        Ok(2.0 * x / 3.0 / (1.0 + u * u - 2.0 * x / 9.0))
    }
    fn rho_alpha0_imag(&self, u: f64) -> Result<f64> {
        Ok(self.rho * alpha_bare_imag(u, &self.species))
    }
    fn chi_imag_scaled(&self, lambda: f64, u: f64) -> Option<Result<f64>> {
        let x = lambda * self.coupling();
        Some(Ok(2.0 * x / 3.0 / (1.0 + u * u - 2.0 * x / 9.0)))
    }
}

/// ε(ω) = 1 + fω₀²/(ω₀² − ω²), a single undamped oscillator of strength f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub f: f64,
}

impl EffectiveMedium for Lorentzian {
    fn chi(&self, omega: C64) -> Result<C64> {
        let den = 1.0 - omega * omega;
        if den.norm() < 1e-14 {
            return Err(VacuaError::ResonancePole(omega.re));
        }
        Ok(self.f / den)
    }
    fn chi_imag(&self, u: f64) -> Result<f64> {
        Ok(self.f / (1.0 + u * u))
    }
    fn chi_imag_scaled(&self, lambda: f64, u: f64) -> Option<Result<f64>> {
        Some(Ok(lambda * self.f / (1.0 + u * u)))
    }
}

/// Medium known only through a table of χ(iu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedMedium {
    pub chi: ImagAxisTable,
}

impl TabulatedMedium {
    pub fn from_chi(table: ImagAxisTable) -> Self {
        Self { chi: table }
    }

    /// From a table of n(iu), with χ = n² − 1.
    pub fn from_refractive_index(table: ImagAxisTable) -> Result<Self> {
        if table.values.iter().any(|&n| n <= 0.0) {
            return Err(VacuaError::Format("refractive index must be positive on the imaginary axis".into()));
        }
        let values = table.values.iter().map(|n| n * n - 1.0).collect();
        Ok(Self { chi: ImagAxisTable::new(table.u, values)? })
    }
}

impl EffectiveMedium for TabulatedMedium {
    fn chi(&self, omega: C64) -> Result<C64> {
        if omega.re != 0.0 {
            return Err(VacuaError::Precondition("tabulated media are defined on the imaginary axis only".into()));
        }
        Ok(C64::new(self.chi.interpolate(omega.im)?, 0.0))
    }
    fn chi_imag(&self, u: f64) -> Result<f64> {
        self.chi.interpolate(u)
    }
}

/// Δω_LL = √(1 − 2x/9) − 1 in units of ω₀, read off the pole of χ_MG.
pub fn ll_shift(rho: f64, species: &DipoleSpecies) -> Result<f64> {
    check_density(rho, species)?;
    let x = mg_coupling(rho, species);
    if x >= 4.5 {
        return Err(VacuaError::OverCritical(x));
    }
    // ω_res² solves 1 − ω² − 2x/9 = 0.
    let w2 = 1.0 - 2.0 * x / 9.0;
    Ok((w2 - 1.0) / (w2.sqrt() + 1.0))
}

fn mode_spec() -> IntegralSpec {
    IntegralSpec::relative(1e-13).with_max_subdivisions(4000)
}

/// (ρ/2π)∫₀^∞ ln D(iu) du, the mode sum of ln D under ∫d³q/(2π)³ ↦ ρ.
fn mode_sum<F>(rho: f64, log_d: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = integrate_semi_infinite_fallible(|u| Ok(C64::new(log_d(u)?, 0.0)), 0.0, &mode_spec())?;
    Ok((rho * r.value.re / (2.0 * PI), rho * r.error / (2.0 * PI)))
}

/// ln[χ/(ερα₀)] at iu. With ρα₀ = 3χ/(χ + 3), χ/ρα₀ is the Lorentz factor
/// 1 + χ/3, which keeps the logarithm accurate where χ is tiny.
fn longitudinal_log(medium: &dyn EffectiveMedium, u: f64) -> Result<f64> {
    let c = medium.chi_imag(u)?;
    Ok((c / 3.0).ln_1p() - c.ln_1p())
}

/// 2 ln 𝓛 at iu, the two transverse local-field logarithms.
fn transverse_lff_log(medium: &dyn EffectiveMedium, u: f64) -> Result<f64> {
    Ok(2.0 * (medium.chi_imag(u)? / 3.0).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingMethod {
    ClosedForm,
    ModeSum,
}

/// Energy of the long-wavelength electrostatic modes of a Maxwell-Garnett
/// medium, −(ρħω₀/2)[√(1 + 4x/9) − 1].
pub fn electrostatic_binding_energy(rho: f64, species: &DipoleSpecies, method: BindingMethod) -> Result<EnergyResult> {
    check_density(rho, species)?;
    let x = mg_coupling(rho, species);
    let a = 4.0 * x / 9.0;
    let closed = -rho / 2.0 * a / ((1.0 + a).sqrt() + 1.0);
    let (value, err, how) = match method {
        BindingMethod::ClosedForm => (closed, 0.0, "closed form"),
        BindingMethod::ModeSum => {
            if rho == 0.0 {
                (0.0, 0.0, "mode sum")
            } else {
                let mg = MaxwellGarnett::new(rho, *species)?;
                let (v, e) = mode_sum(rho, |u| longitudinal_log(&mg, u))?;
                (v, e, "mode sum, Wick quadrature")
            }
        }
    };
    let prov = Provenance {
        formula: "electrostatic long-wavelength modes, ln[χ/(ερα₀)]".into(),
        method: how.into(),
        cutoff: None,
        notes: vec!["momentum integral regularized as ρ".into()],
    };
    let mut res = EnergyResult::from_parts(EnergyKind::Density, Some(rho), &[("longitudinal_binding", value, err)], prov)
        .with_comparator("closed_form", closed);
    if x < 4.5 {
        res = res.with_comparator("rho_times_ll_shift", rho * ll_shift(rho, species)?);
    }
    Ok(res)
}

/// Mode sum of ln[χ³/((ρα₀)³ε)] for any medium: the electrostatic logarithm
/// plus two transverse local-field logarithms.
pub fn bullough_obada_mode_sum(medium: &dyn EffectiveMedium, rho: f64) -> Result<EnergyResult> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(invalid("rho", format!("must be non-negative, got {rho}")));
    }
    let (l, le) = mode_sum(rho, |u| longitudinal_log(medium, u))?;
    let (t, te) = mode_sum(rho, |u| transverse_lff_log(medium, u))?;
    let prov = Provenance {
        formula: "ln[χ³/((ρα₀)³ε)], electrostatic plus two transverse local-field logarithms".into(),
        method: "mode sum, Wick quadrature".into(),
        cutoff: None,
        notes: vec!["momentum integral regularized as ρ".into()],
    };
    Ok(EnergyResult::from_parts(
        EnergyKind::Density,
        Some(rho),
        &[("longitudinal_binding", l, le), ("transverse_lff", t, te)],
        prov,
    ))
}

/// The Bullough-Obada energy of a Maxwell-Garnett medium, with the closed
/// mode sum (ρħω₀/2)[3 − 2ω_LL − ω_L] as comparator.
pub fn bullough_obada_energy(rho: f64, species: &DipoleSpecies) -> Result<EnergyResult> {
    check_density(rho, species)?;
    let x = mg_coupling(rho, species);
    if x >= 4.5 {
        return Err(VacuaError::OverCritical(x));
    }
    if rho == 0.0 {
        return bullough_obada_mode_sum(&Vacuum, 0.0);
    }
    let mg = MaxwellGarnett::new(rho, *species)?;
    let w_ll = (1.0 - 2.0 * x / 9.0).sqrt();
    let w_l = (1.0 + 4.0 * x / 9.0).sqrt();
    Ok(bullough_obada_mode_sum(&mg, rho)?.with_comparator("closed_form", rho / 2.0 * (3.0 - 2.0 * w_ll - w_l)))
}

/// Leading coefficient of the Bullough-Obada energy of a Lorentzian medium
/// in ρf²ħω₀, from mode sums at two small strengths extrapolated to f → 0.
pub fn lorentzian_bullough_obada_coefficient(f: f64) -> Result<f64> {
    if !(f > 0.0 && f < 0.1) {
        return Err(invalid("f", format!("must lie in (0, 0.1), got {f}")));
    }
    let c = |f: f64| -> Result<f64> { Ok(bullough_obada_mode_sum(&Lorentzian { f }, 1.0)?.value / (f * f)) };
    Ok(2.0 * c(f / 2.0)? - c(f)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchwingerMethod {
    /// (1/6π²)∫₀^Λ u³[1 − n³] du.
    Plain { cutoff: f64 },
    /// The O(ρ²) part of the integrand only.
    OrderRho2 { cutoff: f64 },
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(invalid("cutoff", format!("must be positive, got {cutoff}")));
    }
    Ok(())
}

fn curve_spec() -> IntegralSpec {
    IntegralSpec::relative(1e-10).with_max_subdivisions(4000)
}

/// ∫₀^Λ f(u) du along the imaginary axis.
fn imag_integral<F>(f: F, cutoff: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = wick_integrate_to(|u| Ok(C64::new(f(u)?, 0.0)), cutoff, &curve_spec())?;
    Ok((r.value.re, r.error))
}

/// 1 − (1 + χ)^{3/2} without cancellation.
fn one_minus_n3(chi: f64) -> f64 {
    -(1.5 * chi.ln_1p()).exp_m1()
}

/// λ² coefficient of 1 − n³(λ) from symmetric differences with step h and
/// h/2, Richardson-combined. The step is set relative to |χ| so that the
/// second difference stays well above roundoff.
fn second_order_part(medium: &dyn EffectiveMedium, u: f64) -> Result<f64> {
    let chi1 = medium.chi_imag(u)?;
    if chi1 == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-2 / chi1.abs();
    let at = |l: f64| -> Result<f64> {
        let c = medium
            .chi_imag_scaled(l, u)
            .ok_or_else(|| VacuaError::Precondition("the O(ρ²) extraction needs a medium with known density dependence".into()))??;
        Ok(one_minus_n3(c))
    };
    let s = |h: f64| -> Result<f64> { Ok((at(h)? + at(-h)?) / (2.0 * h * h)) };
    Ok((4.0 * s(h / 2.0)? - s(h)?) / 3.0)
}

/// Schwinger's bulk vacuum energy (1/6π²)Re∫dω ω³[1 − n³], Wick-rotated.
pub fn schwinger_energy(medium: &dyn EffectiveMedium, method: SchwingerMethod) -> Result<EnergyResult> {
    let pre = 1.0 / (6.0 * PI * PI);
    let (value, err, cutoff, how) = match method {
        SchwingerMethod::Plain { cutoff } => {
            check_cutoff(cutoff)?;
            let (v, e) = imag_integral(|u| Ok(u.powi(3) * one_minus_n3(medium.chi_imag(u)?)), cutoff)?;
            (pre * v, pre * e, cutoff, "plain")
        }
        SchwingerMethod::OrderRho2 { cutoff } => {
            check_cutoff(cutoff)?;
            let (v, e) = imag_integral(|u| Ok(u.powi(3) * second_order_part(medium, u)?), cutoff)?;
            (pre * v, pre * e, cutoff, "O(rho^2) part of the integrand")
        }
    };
    let prov = Provenance {
        formula: "Schwinger bulk energy (1/6π²)∫u³[1 − n³(iu)]du".into(),
        method: format!("Wick quadrature, {how}"),
        cutoff: Some(cutoff),
        notes: vec![],
    };
    let mut res = EnergyResult::from_parts(EnergyKind::Density, None, &[("radiative", value, err)], prov);
    if let SchwingerMethod::OrderRho2 { cutoff } = method {
        if let Ok((r, _)) = imag_integral(|u| Ok(u.powi(3) * medium.rho_alpha0_imag(u)?.powi(2)), cutoff) {
            if r != 0.0 {
                res = res.with_comparator("coefficient", value / r);
            }
        }
    }
    Ok(res)
}

/// Schwinger's energy shift −(1/4π²ρ)Re∫dω ω³ n χ, Wick-rotated.
pub fn schwinger_shift(medium: &dyn EffectiveMedium, rho: f64, cutoff: f64) -> Result<EnergyResult> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    check_cutoff(cutoff)?;
    let pre = -1.0 / (4.0 * PI * PI * rho);
    let (v, e) = imag_integral(|u| Ok(u.powi(3) * medium.n_imag(u)? * medium.chi_imag(u)?), cutoff)?;
    let prov = Provenance {
        formula: "Schwinger energy shift −(1/4π²ρ)∫u³ n χ du".into(),
        method: "Wick quadrature".into(),
        cutoff: Some(cutoff),
        notes: vec!["no self-energy counterterm".into()],
    };
    Ok(EnergyResult::from_parts(EnergyKind::Shift, Some(rho), &[("radiative", pre * v, pre * e)], prov))
}

/// ∫d³q/(2π)³ [u²/(u² + q²)]^s with power divergences dropped.
fn transverse_loop(s: usize, u: f64) -> f64 {
    match s {
        1 => -u.powi(3) / (4.0 * PI),
        2 => u.powi(3) / (8.0 * PI),
        3 => u.powi(3) / (32.0 * PI),
        _ => unreachable!("loop order above 3"),
    }
}

/// Extended Schwinger energy: the O(ρ^order) part of
/// (1/π)∫du∫d³q/(2π)³ ln[1 + χ⊥(q; iu) u²/(u² + q²)], with χ⊥ given order
/// by order through `kernels[n-1]` = χ^(n)_⊥. The constant large-q part of the
/// single-loop term is taken with power divergences dropped; everything else
/// is integrated over q numerically.
pub fn schwinger_extended(kernels: &[&dyn Susceptibility], order: usize, species: &DipoleSpecies) -> Result<EnergyResult> {
    species.validate()?;
    if !(2..=3).contains(&order) {
        return Err(invalid("order", format!("must be 2 or 3, got {order}")));
    }
    if kernels.len() < order {
        return Err(VacuaError::MissingKernel(kernels.len() + 1));
    }
    let pol = Polarization::Perp;
    let len = order + 1;
    // O(ρ^order) coefficient of Σ_s (−1)^{s+1}(Xt)^s/s at fixed q, grouped by
    // loop order s; X = Σ χ^(n) λⁿ.
    let loop_coeffs = |q: f64, u: f64| -> Result<Vec<f64>> {
        let mut x = Series::constant(0.0, len);
        for n in 1..=order {
            x.0[n] = kernels[n - 1].chi(pol, q, u)?;
        }
        Ok((1..=order)
            .map(|s| {
                let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
                sign / s as f64 * x.powi(s).0[order]
            })
            .collect())
    };
    let inner = |u: f64| -> Result<f64> {
        let lim = kernels[order - 1].chi_limit(pol, u)?;
        let spec = IntegralSpec::relative(1e-11).with_scale(u).with_max_subdivisions(4000);
        let r = integrate_semi_infinite_fallible(
            |q| {
                let t = u * u / (u * u + q * q);
                let c = loop_coeffs(q, u)?;
                let mut v = t * kernels[order - 1].chi_excess(pol, q, u)?;
                for (s, cs) in c.iter().enumerate().skip(1) {
                    v += cs * t.powi(s as i32 + 1);
                }
                Ok(C64::new(q * q * v / (2.0 * PI * PI), 0.0))
            },
            0.0,
            &spec,
        )?;
        Ok(lim * transverse_loop(1, u) + r.value.re)
    };
    let cut = species.cutoff;
    let (v, e) = imag_integral(|u| Ok(inner(u)? / PI), cut)?;
    let ra_int = imag_integral(|u| Ok(u.powi(3) * alpha_bare_imag(u, species).powi(order as i32)), cut)?.0;
    let prov = Provenance {
        formula: "transverse bulk logarithm with spatially dispersive χ⊥".into(),
        method: "momentum quadrature inside Wick quadrature; large-q constant of the one-loop term dimensionally regularized".into(),
        cutoff: Some(cut),
        notes: vec![format!("O(rho^{order}) terms only")],
    };
    let mut res = EnergyResult::from_parts(EnergyKind::Density, None, &[("radiative", v, e)], prov);
    // Coefficient per ∫u³(ρα₀)^order when the first kernel is ρα₀ itself.
    let u_ref = 0.5;
    let c1 = kernels[0].chi(pol, 1.0, u_ref)?;
    let rho_eff = c1 / alpha_bare_imag(u_ref, species);
    if rho_eff > 0.0 {
        res.rho = Some(rho_eff);
        res = res.with_comparator("coefficient", v / (rho_eff.powi(order as i32) * ra_int));
    }
    Ok(res)
}

/// χ^(n)_MG = (ρα₀)ⁿ/3ⁿ⁻¹, the n-th order of the Maxwell-Garnett
/// susceptibility, without spatial dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgOrderKernel {
    pub rho: f64,
    pub species: DipoleSpecies,
    pub n: usize,
}

impl Susceptibility for MgOrderKernel {
    fn chi(&self, _: Polarization, _: f64, u: f64) -> Result<f64> {
        let y = self.rho * alpha_bare_imag(u, &self.species);
        Ok(y.powi(self.n as i32) / 3f64.powi(self.n as i32 - 1))
    }
    fn chi_limit(&self, pol: Polarization, u: f64) -> Result<f64> {
        self.chi(pol, 0.0, u)
    }
    fn chi_excess(&self, _: Polarization, _: f64, _: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// Radiative vacuum energy of the microscopic theory at O(ρ^order):
/// (1/order)·(1/2π)∫ρα₀ φ^(order−1)_rad(iu) du, with φ_rad(iu) = −(u³/2π)c(ρα₀)^{order−1}.
/// At O(ρ²) c is the pair-term radiative bracket (transverse + longitudinal);
/// at O(ρ³) c is the y² coefficient of 𝓛²n for the Maxwell-Garnett φ.
pub fn radiative_vacuum_energy_mg(rho: f64, species: &DipoleSpecies, order: usize) -> Result<EnergyResult> {
    check_density(rho, species)?;
    if !(2..=3).contains(&order) {
        return Err(invalid("order", format!("must be 2 or 3, got {order}")));
    }
    let cut = species.cutoff;
    let (base, base_err) = imag_integral(|u| Ok(u.powi(3) * (rho * alpha_bare_imag(u, species)).powi(order as i32)), cut)?;
    let weight = 1.0 / order as f64;
    let pre = -weight / (4.0 * PI * PI);
    let mg_factor = mg_radiative_factor_series(order - 1);
    let (parts, c): (Vec<(&str, f64)>, f64) = if order == 2 {
        let (perp, par) = radiative_brackets();
        (vec![("transverse", perp), ("longitudinal_embedded", par)], perp + par)
    } else {
        (vec![("mg_local_field", mg_factor[2])], mg_factor[2])
    };
    let rows: Vec<(&str, f64, f64)> =
        parts.iter().map(|(n, b)| (*n, pre * b * base, (pre * b * base_err).abs())).collect();
    let prov = Provenance {
        formula: format!("energy weight 1/{order} on the radiative φ at O(rho^{})", order - 1),
        method: if order == 2 {
            "pair-term brackets extracted at ζ → 0".into()
        } else {
            "Maxwell-Garnett φ = −(ik³/2π)𝓛²n expanded in ρα₀".into()
        },
        cutoff: Some(cut),
        notes: vec!["bare polarizabilities".into()],
    };
    Ok(EnergyResult::from_parts(EnergyKind::Density, Some(rho), &rows, prov)
        .with_comparator("coefficient", pre * c)
        .with_comparator("mg_factor_order1", mg_factor[1]))
}

/// ADGLP-type energy with the long-wavelength longitudinal modes,
/// ∫du/2π ∫_{q<q_max} d³q/(2π)³ ln[(u² + q²)²/(ε(εu² + q²)²)], frequencies
/// cut at the species cutoff.
pub fn adglp_energy(medium: &dyn EffectiveMedium, q_max: Option<f64>, species: &DipoleSpecies) -> Result<EnergyResult> {
    species.validate()?;
    let qm = q_max.ok_or(VacuaError::MissingCutoff)?;
    if !(qm.is_finite() && qm > 0.0) {
        return Err(invalid("q_max", format!("must be positive, got {qm}")));
    }
    let cut = species.cutoff;
    let inner = |u: f64| -> Result<f64> {
        let c = medium.chi_imag(u)?;
        if c == 0.0 {
            return Ok(0.0);
        }
        let e = 1.0 + c;
        if e <= 0.0 {
            return Err(VacuaError::Precondition(format!("ε(iu) = {e} is not positive at u = {u}")));
        }
        let spec = IntegralSpec::relative(1e-11).with_max_subdivisions(4000);
        let r = integrate_fallible(
            |q| {
                let a = u * u + q * q;
                let l = -c.ln_1p() - 2.0 * (c * u * u / a).ln_1p();
                Ok(C64::new(q * q * l / (2.0 * PI * PI), 0.0))
            },
            0.0,
            qm,
            &spec,
        )?;
        Ok(r.value.re / (2.0 * PI))
    };
    let (v, e) = imag_integral(inner, cut)?;
    let prov = Provenance {
        formula: "local polarization operator with longitudinal bulk modes".into(),
        method: "momentum quadrature to q_max inside Wick quadrature".into(),
        cutoff: Some(cut),
        notes: vec![format!("q_max = {qm}")],
    };
    Ok(EnergyResult::from_parts(EnergyKind::Density, None, &[("bulk", v, e)], prov))
}

const SHIFT_PRE: f64 = -1.0 / (4.0 * PI * PI);

/// Lamb shift from the variation of the Schwinger energy with the background
/// index, −(1/4π²ρ)Re∫dω ω³ n Δχ.
pub fn ssz_shift(n_medium: &dyn EffectiveMedium, delta_chi: &dyn ImagCurve, rho: f64, cutoff: f64) -> Result<EnergyResult> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    check_cutoff(cutoff)?;
    let (v, e) = imag_integral(|u| Ok(u.powi(3) * n_medium.n_imag(u)? * delta_chi.at(u)?), cutoff)?;
    let prov = Provenance {
        formula: "−(1/4π²ρ)∫u³ n Δχ du".into(),
        method: "Wick quadrature".into(),
        cutoff: Some(cutoff),
        notes: vec!["no self-energy counterterm".into()],
    };
    Ok(EnergyResult::from_parts(EnergyKind::Shift, Some(rho), &[("radiative", SHIFT_PRE / rho * v, (SHIFT_PRE / rho * e).abs())], prov))
}

/// Single-dipole prescription: Δχ = ρ(α_II − α_I) inside a continuum of
/// index n. The background variant with (n − 1) is reported as a comparator.
pub fn mss_shift(
    n_medium: &dyn EffectiveMedium,
    alpha_i: &dyn ImagCurve,
    alpha_ii: &dyn ImagCurve,
    rho: f64,
    cutoff: f64,
) -> Result<EnergyResult> {
    let delta = |u: f64| -> Result<f64> { Ok(rho * (alpha_ii.at(u)? - alpha_i.at(u)?)) };
    let dchi = DeltaChi(&delta);
    let ssz = ssz_shift(n_medium, &dchi, rho, cutoff)?;
    let (bgm, _) = mss_background(n_medium, alpha_i, alpha_ii, cutoff)?;
    let mut res = ssz.with_comparator("background", bgm);
    res.provenance.formula = "−(1/4π²)∫u³ n (α_II − α_I) du".into();
    Ok(res)
}

struct DeltaChi<'a>(&'a (dyn Fn(f64) -> Result<f64> + Sync));

impl ImagCurve for DeltaChi<'_> {
    fn at(&self, u: f64) -> Result<f64> {
        (self.0)(u)
    }
}

/// −(1/4π²)∫u³(n − 1)(α_II − α_I) du.
fn mss_background(
    n_medium: &dyn EffectiveMedium,
    alpha_i: &dyn ImagCurve,
    alpha_ii: &dyn ImagCurve,
    cutoff: f64,
) -> Result<(f64, f64)> {
    check_cutoff(cutoff)?;
    let (v, e) = imag_integral(
        |u| {
            let nm1 = n_medium.chi_imag(u)? / (n_medium.n_imag(u)? + 1.0);
            Ok(u.powi(3) * nm1 * (alpha_ii.at(u)? - alpha_i.at(u)?))
        },
        cutoff,
    )?;
    Ok((SHIFT_PRE * v, (SHIFT_PRE * e).abs()))
}

/// Radiative prefactor of the small-cavity shift relative to the background
/// prescription: the pair-term radiative bracket over the O(ρα₀) coefficient
/// of n − 1.
pub fn onsager_radiative_prefactor() -> f64 {
    let (perp, par) = radiative_brackets();
    (perp + par) / mg_refractive_series(1)[1]
}

/// Lamb-shift difference for a dipole in a small Onsager cavity of radius ξ
/// at leading order in n − 1: the background prescription scaled by the
/// pair-term radiative prefactor, plus the near-field terms
/// −(1/2π²)∫(n − 1)(α_II − α_I)(1/ξ³ − u²/ξ) du.
pub fn onsager_shift(
    n_medium: &dyn EffectiveMedium,
    alpha_i: &dyn ImagCurve,
    alpha_ii: &dyn ImagCurve,
    xi: f64,
    cutoff: f64,
) -> Result<EnergyResult> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid("xi", format!("must be positive, got {xi}")));
    }
    check_cutoff(cutoff)?;
    if cutoff * xi >= 1.0 {
        return Err(VacuaError::BranchOutOfRange(format!(
            "the small-cavity expansion needs |kξ| < 1 up to the cutoff; Λξ = {}",
            cutoff * xi
        )));
    }
    let (bgm, bgm_err) = mss_background(n_medium, alpha_i, alpha_ii, cutoff)?;
    let factor = onsager_radiative_prefactor();
    let (nf, nf_err) = imag_integral(
        |u| {
            let nm1 = n_medium.chi_imag(u)? / (n_medium.n_imag(u)? + 1.0);
            Ok(nm1 * (alpha_ii.at(u)? - alpha_i.at(u)?) * (1.0 / xi.powi(3) - u * u / xi))
        },
        cutoff,
    )?;
    let pre = -1.0 / (2.0 * PI * PI);
    let prov = Provenance {
        formula: "small-cavity pair terms at leading order in n − 1".into(),
        method: "Wick quadrature".into(),
        cutoff: Some(cutoff),
        notes: vec![format!("xi = {xi}")],
    };
    Ok(EnergyResult::from_parts(
        EnergyKind::Shift,
        None,
        &[("radiative", factor * bgm, (factor * bgm_err).abs()), ("near_field", pre * nf, (pre * nf_err).abs())],
        prov,
    )
    .with_comparator("background", bgm)
    .with_comparator("radiative_prefactor", factor))
}
