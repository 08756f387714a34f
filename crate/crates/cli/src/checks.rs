//! Coefficient verification suite run by `vacua coefficients`.

use std::f64::consts::PI;

use vacua_core::effmedium::{
    electrostatic_binding_energy, ll_shift, onsager_radiative_prefactor, radiative_vacuum_energy_mg, schwinger_energy,
    schwinger_extended, BindingMethod, MaxwellGarnett, MgOrderKernel, SchwingerMethod,
};
use vacua_core::lamb::Susceptibility;
use vacua_core::params::DipoleSpecies;
use vacua_core::phi::radiative_brackets;
use vacua_core::Result;

use crate::report::Check;

pub const TOL: f64 = 1e-6;
pub const LL_TOL: f64 = 5e-4;

/// Species and density at Maxwell-Garnett coupling x.
fn medium_at(x: f64) -> Result<(f64, DipoleSpecies)> {
    let s = DipoleSpecies::new(1e-3, 1e3)?;
    Ok((x / s.mu2(), s))
}

pub fn coefficient_checks() -> Result<Vec<Check>> {
    let pi2 = PI * PI;
    let mut out = Vec::new();

    let (perp, par) = radiative_brackets();
    out.push(
        Check::relative("radiative_bracket_7_6", perp + par, 7.0 / 6.0, TOL)
            .with_note(format!("transverse {perp:.12} + longitudinal {par:.12}")),
    );

    let (rho, s) = medium_at(0.05)?;
    let mg = MaxwellGarnett::new(rho, s)?;
    let sch = schwinger_energy(&mg, SchwingerMethod::OrderRho2 { cutoff: s.cutoff })?;
    out.push(Check::relative("schwinger_rho2_7_48pi2", sch.comparators["coefficient"], -7.0 / (48.0 * pi2), TOL));

    let ks: Vec<MgOrderKernel> = (1..=3).map(|n| MgOrderKernel { rho, species: s, n }).collect();
    let refs: Vec<&dyn Susceptibility> = ks.iter().map(|k| k as &dyn Susceptibility).collect();
    let ext = schwinger_extended(&refs, 3, &s)?.comparators["coefficient"];
    out.push(Check::relative("extended_schwinger_17_288pi2", ext, -17.0 / (288.0 * pi2), TOL));

    let rad = radiative_vacuum_energy_mg(rho, &s, 3)?.comparators["coefficient"];
    out.push(
        Check::relative("microscopic_radiative_17_144pi2", rad, -17.0 / (144.0 * pi2), TOL)
            .with_note(format!("ratio to extended Schwinger {:.12} (target 2)", rad / ext)),
    );

    out.push(Check::relative("onsager_prefactor_7_3", onsager_radiative_prefactor(), 7.0 / 3.0, TOL));

    let (rho, s) = medium_at(1e-3)?;
    let e = electrostatic_binding_energy(rho, &s, BindingMethod::ClosedForm)?;
    out.push(
        Check::relative("ll_consistency", e.value / (rho * ll_shift(rho, &s)?), 1.0, LL_TOL)
            .with_note("binding energy over rho times the Lorentz-Lorenz shift at x = 1e-3"),
    );
    Ok(out)
}
