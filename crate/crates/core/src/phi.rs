//! The scalar radiative potential φ = k² Tr G and its pair-correlation
//! corrections, together with the two-body susceptibility kernels χ⁽²⁾.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VacuaError};
use crate::green::{pq_complex_r, pq_radiative, ComplexDyad, PQPair};
use crate::params::MediumSpec;
use crate::quadrature::{integrate, radial_integrate_ray, IntegralSpec, TailMap};
use crate::special::{sph_j012, sph_j1_over_x};

const I: C64 = C64::new(0.0, 1.0);

/// Free-space φ⁽⁰⁾ = −ik³/2π; real and negative at k = iu.
pub fn phi0(k: C64) -> C64 {
    -I * k * k * k / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Closed,
    /// Expansion in ζ = kξ, valid for |ζ| < 1.
    SmallZeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecurrentMode {
    Resummed,
    PartialSum(usize),
}

fn check_k(k: C64) -> Result<()> {
    if !(k.re.is_finite() && k.im.is_finite()) || k.norm() == 0.0 {
        return Err(invalid("k", format!("must be finite and non-zero, got {k}")));
    }
    Ok(())
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid("zeta", format!("correlation length must be positive, got {xi}")));
    }
    Ok(())
}

/// −k³ρα/2π, the common prefactor of the pair terms.
fn prefactor(k: C64, rho_alpha: C64) -> C64 {
    -k * k * k / (2.0 * PI) * rho_alpha
}

/// Hard-sphere two-body term φ^(1,0) for correlation length ξ (so ζ = kξ).
pub fn phi1_hs(k: C64, xi: f64, rho_alpha: C64, branch: Branch) -> Result<C64> {
    check_k(k)?;
    check_xi(xi)?;
    let z = k * xi;
    let pre = prefactor(k, rho_alpha);
    match branch {
        Branch::Closed => {
            let z2 = z * z;
            let bracket = 1.0 / (z2 * z) - 2.0 * I / z2 - 1.0 / z + I / 2.0;
            Ok(pre * (2.0 * I * z).exp() * bracket)
        }
        Branch::SmallZeta => {
            if z.norm() >= 1.0 {
                return Err(VacuaError::BranchOutOfRange(format!("|kξ| = {} is not below 1", z.norm())));
            }
            Ok(pre * (1.0 / (z * z * z) + 1.0 / z + I * (7.0 / 6.0) - z))
        }
    }
}

/// 2 − 2w + eʷ(−2 + 4w − 2w² + w³) with w = iζ. The leading terms cancel, so
/// small arguments use the Taylor series Σ_{n≥2} cₙwⁿ.
fn perp_bracket(z: C64) -> C64 {
    let w = I * z;
    if w.norm() >= 0.1 {
        return 2.0 - 2.0 * w + w.exp() * (-2.0 + 4.0 * w - 2.0 * w * w + w * w * w);
    }
    let poly = [-2.0, 4.0, -2.0, 1.0];
    let mut fact = vec![1.0f64; 40];
    for n in 1..40 {
        fact[n] = fact[n - 1] * n as f64;
    }
    let mut sum = C64::new(0.0, 0.0);
    let mut wn = w * w;
    for n in 2..40usize {
        let c: f64 = (0..=3.min(n)).map(|j| poly[j] / fact[n - j]).sum();
        let t = wn * c;
        sum += t;
        if n > 4 && t.norm() < 1e-18 * sum.norm() {
            break;
        }
        wn *= w;
    }
    sum
}

/// (2φ⊥, φ∥): the pair integral of Tr{G·G_rad} and of Tr{G·G_stat} over r > ξ.
pub fn phi1_hs_split(k: C64, xi: f64, rho_alpha: C64) -> Result<(C64, C64)> {
    check_k(k)?;
    check_xi(xi)?;
    let z = k * xi;
    let pre = prefactor(k, rho_alpha);
    let eiz = (I * z).exp();
    let z2 = z * z;
    let par = pre * eiz * (1.0 / (z2 * z) - I / z2);
    let perp2 = -pre / 2.0 * eiz * perp_bracket(z) / (z2 * z);
    Ok((perp2, par))
}

/// ζ-independent imaginary coefficients (transverse, longitudinal) of the
/// split two-body term in units of −k³ρα/2π, read off at real k by
/// Richardson extrapolation ζ → 0 over ζ, ζ/2, ζ/4.
pub fn radiative_brackets() -> (f64, f64) {
    let k = C64::new(1.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let pre = prefactor(k, one);
    let coef = |z: f64| {
        let (p, q) = phi1_hs_split(k, z, one).expect("positive ζ");
        ((p / pre).im, (q / pre).im)
    };
    let (a1, b1) = coef(0.04);
    let (a2, b2) = coef(0.02);
    let (a3, b3) = coef(0.01);
    let rich = |f1: f64, f2: f64, f3: f64| {
        let g1 = (4.0 * f2 - f1) / 3.0;
        let g2 = (4.0 * f3 - f2) / 3.0;
        (16.0 * g2 - g1) / 15.0
    };
    (rich(a1, a2, a3), rich(b1, b2, b3))
}

/// Contact-shell term from h = Cξδ(r − ξ).
pub fn phi1_overdensity(k: C64, xi: f64, c: f64, rho_alpha: C64) -> Result<C64> {
    check_k(k)?;
    check_xi(xi)?;
    if !(c.is_finite() && c >= 0.0) {
        return Err(invalid("overdensity_c", format!("must be non-negative, got {c}")));
    }
    if c == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let z = k * xi;
    let z2 = z * z;
    let bracket = 3.0 / (z2 * z) - 6.0 * I / z2 - 5.0 / z + 2.0 * I + z;
    Ok(prefactor(k, rho_alpha) * c * (2.0 * I * z).exp() * bracket)
}

fn static_pq_c(r: C64, k: C64) -> (C64, C64) {
    let s = 1.0 / (4.0 * PI * k * k * r * r * r);
    (s, -2.0 * s)
}

/// ∫_{r>ξ} d³r f(r, P(r), Q(r)) for an isotropic kernel. The radial path is
/// the ray from ξ on which e^{ikr} decays monotonically, so real-frequency
/// kernels are not oscillatory.
pub fn pair_integral<F>(k: C64, xi: f64, kernel: F, spec: &IntegralSpec) -> Result<C64>
where
    F: Fn(C64, PQPair) -> C64,
{
    check_k(k)?;
    check_xi(xi)?;
    let theta = PI / 2.0 - k.arg();
    let s = spec.with_scale(xi.min(0.5 / k.norm())).with_map(TailMap::Algebraic);
    let r = radial_integrate_ray(|r| 4.0 * PI * r * r * kernel(r, pq_complex_r(r, k)), xi, theta, &s)?;
    Ok(r.value)
}

fn pair_spec() -> IntegralSpec {
    IntegralSpec::relative(1e-11).with_max_subdivisions(4000)
}

fn ys(k: C64, alpha: C64, pq: PQPair) -> (C64, C64) {
    let a = k * k * alpha;
    ((a * pq.p).powi(2), (a * pq.q).powi(2))
}

fn check_resummable(k: C64, xi: f64, alpha: C64) -> Result<()> {
    let (yp, yq) = ys(k, alpha, pq_complex_r(C64::new(xi, 0.0), k));
    let m = yp.norm().max(yq.norm());
    if m >= 1.0 {
        return Err(VacuaError::ResummationPole(m));
    }
    Ok(())
}

/// The m-th recurrent term, −k⁴ρα ∫_{r>ξ} (k²α)^{2m}[2P^{2m+2} + Q^{2m+2}].
/// m = 0 is the hard-sphere closed form.
pub fn phi1_recurrent_term(k: C64, xi: f64, alpha: C64, rho: f64, m: usize) -> Result<C64> {
    if m == 0 {
        return phi1_hs(k, xi, rho * alpha, Branch::Closed);
    }
    if alpha == C64::new(0.0, 0.0) {
        return Ok(alpha);
    }
    let pre = -k.powi(4) * rho * alpha;
    let v = pair_integral(
        k,
        xi,
        |_, pq| {
            let (yp, yq) = ys(k, alpha, pq);
            2.0 * pq.p * pq.p * yp.powi(m as i32) + pq.q * pq.q * yq.powi(m as i32)
        },
        &pair_spec(),
    )?;
    Ok(pre * v)
}

/// Two-body φ⁽¹⁾ with recurrent scattering between the pair, either fully
/// resummed or truncated after m = M round trips.
pub fn phi1_recurrent(k: C64, xi: f64, alpha: C64, rho: f64, mode: RecurrentMode) -> Result<C64> {
    check_k(k)?;
    check_xi(xi)?;
    let base = phi1_hs(k, xi, rho * alpha, Branch::Closed)?;
    if alpha == C64::new(0.0, 0.0) {
        return Ok(base);
    }
    match mode {
        RecurrentMode::PartialSum(0) => Ok(base),
        RecurrentMode::PartialSum(n) => {
            let pre = -k.powi(4) * rho * alpha;
            let v = pair_integral(
                k,
                xi,
                |_, pq| {
                    let (yp, yq) = ys(k, alpha, pq);
                    let (mut sp, mut sq) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                    let (mut tp, mut tq) = (yp, yq);
                    for _ in 0..n {
                        sp += tp;
                        sq += tq;
                        tp *= yp;
                        tq *= yq;
                    }
                    2.0 * pq.p * pq.p * sp + pq.q * pq.q * sq
                },
                &pair_spec(),
            )?;
            Ok(base + pre * v)
        }
        RecurrentMode::Resummed => {
            check_resummable(k, xi, alpha)?;
            let pre = -k.powi(4) * rho * alpha;
            let v = pair_integral(
                k,
                xi,
                |_, pq| {
                    let (yp, yq) = ys(k, alpha, pq);
                    2.0 * pq.p * pq.p * yp / (1.0 - yp) + pq.q * pq.q * yq / (1.0 - yq)
                },
                &pair_spec(),
            )?;
            Ok(base + pre * v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagramClass {
    Free,
    PairNoRec,
    Overdensity,
    RecurrentPartial(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiComponent {
    pub class: DiagramClass,
    pub perp2: C64,
    pub par: C64,
}

impl PhiComponent {
    pub fn total(&self) -> C64 {
        self.perp2 + self.par
    }
}

/// φ split by diagram class and by the radiative (2φ⊥) and electrostatic
/// (φ∥) character of the outgoing propagator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBreakdown {
    pub total: C64,
    pub perp2: C64,
    pub par: C64,
    pub components: Vec<PhiComponent>,
}

impl PhiBreakdown {
    fn from_components(components: Vec<PhiComponent>) -> Self {
        let perp2 = components.iter().map(|c| c.perp2).sum();
        let par = components.iter().map(|c| c.par).sum();
        let total = components.iter().map(|c| c.total()).sum();
        Self { total, perp2, par, components }
    }

    pub fn component(&self, class: DiagramClass) -> Option<&PhiComponent> {
        self.components.iter().find(|c| c.class == class)
    }
}

/// φ⁽⁰⁾ + φ^(1,0) + overdensity + recurrent terms m = 1..=`recurrent_order`.
/// The free term is purely radiative and is booked under 2φ⊥.
pub fn phi_breakdown(k: C64, medium: &MediumSpec, alpha: C64, recurrent_order: usize) -> Result<PhiBreakdown> {
    medium.validate()?;
    let xi = medium.xi();
    let rho = medium.rho();
    let mut comps = vec![PhiComponent { class: DiagramClass::Free, perp2: phi0(k), par: C64::new(0.0, 0.0) }];
    let (perp2, par) = phi1_hs_split(k, xi, rho * alpha)?;
    comps.push(PhiComponent { class: DiagramClass::PairNoRec, perp2, par });

    let c = medium.correlation.overdensity();
    if c > 0.0 {
        let pq = pq_complex_r(C64::new(xi, 0.0), k);
        let (ps, qs) = static_pq_c(C64::new(xi, 0.0), k);
        let w = -k.powi(4) * rho * alpha * c * xi * 4.0 * PI * xi * xi;
        let par = w * (2.0 * pq.p * ps + pq.q * qs);
        let perp2 = w * (2.0 * pq.p * (pq.p - ps) + pq.q * (pq.q - qs));
        comps.push(PhiComponent { class: DiagramClass::Overdensity, perp2, par });
    }

    for m in 1..=recurrent_order {
        let pre = -k.powi(4) * rho * alpha;
        let split = |stat: bool| {
            pair_integral(
                k,
                xi,
                |r, pq| {
                    let (yp, yq) = ys(k, alpha, pq);
                    let (ps, qs) = static_pq_c(r, k);
                    let (px, qx) = if stat { (ps, qs) } else { (pq.p - ps, pq.q - qs) };
                    2.0 * pq.p * px * yp.powi(m as i32) + pq.q * qx * yq.powi(m as i32)
                },
                &pair_spec(),
            )
        };
        let par = pre * split(true)?;
        let perp2 = pre * split(false)?;
        comps.push(PhiComponent { class: DiagramClass::RecurrentPartial(m), perp2, par });
    }
    Ok(PhiBreakdown::from_components(comps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    Perp,
    Par,
}

/// Angular weights of P and Q in ∫dΩ e^{iq·r} Tr{G·P_p(q̂)}/4π at x = qr.
/// The transverse trace counts both polarizations.
fn angular_weights(pol: Polarization, x: f64) -> (f64, f64) {
    let (j0, _, j2) = sph_j012(x);
    match pol {
        Polarization::Par => (2.0 * (j0 + j2) / 3.0, (j0 - 2.0 * j2) / 3.0),
        Polarization::Perp => (2.0 * (2.0 * j0 - j2) / 3.0, 2.0 * (j0 + j2) / 3.0),
    }
}

/// Evaluator of the two-body susceptibility kernel χ^(2,0)_p(q; ω) for one
/// correlation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Kernel {
    pub rho: f64,
    pub xi: f64,
    pub overdensity: f64,
    /// false for h ≡ 0.
    pub correlated: bool,
}

impl Chi2Kernel {
    pub fn from_medium(medium: &MediumSpec) -> Self {
        Self {
            rho: medium.rho(),
            xi: medium.xi(),
            overdensity: medium.correlation.overdensity(),
            correlated: true,
        }
    }

    pub fn uncorrelated(rho: f64) -> Self {
        Self { rho, xi: 0.0, overdensity: 0.0, correlated: false }
    }

    /// ∫d³r e^{iq·r} h(r) Tr{G(r)·P_p(q̂)}.
    fn correlation_integral(&self, q: f64, k: C64, pol: Polarization, spec: &IntegralSpec) -> Result<C64> {
        let xi = self.xi;
        let x = q * xi;
        // Electrostatic part inside the hole, including the contact term
        // 𝕀δ³/(3k²), integrates in closed form.
        let j1x = sph_j1_over_x(x);
        let hole_static = match pol {
            Polarization::Par => (1.0 - 2.0 * j1x) / (k * k),
            Polarization::Perp => 2.0 * j1x / (k * k),
        };
        // Errors are measured against the contact scale 1/|k|², since the
        // radiative part can vanish through oscillation at large q.
        let mut rspec = *spec;
        rspec.abs_tol = spec.abs_tol.max(1e-3 * spec.rel_tol / (k * k).norm());
        let rad = integrate(
            |r| {
                let pq = pq_radiative(r, k);
                let (wp, wq) = angular_weights(pol, q * r);
                4.0 * PI * r * r * (pq.p * wp + pq.q * wq)
            },
            0.0,
            xi,
            &rspec,
        )?
        .value;
        let mut total = -(hole_static + rad);
        if self.overdensity > 0.0 {
            let pq = pq_complex_r(C64::new(xi, 0.0), k);
            let (wp, wq) = angular_weights(pol, x);
            total += self.overdensity * xi * 4.0 * PI * xi * xi * (pq.p * wp + pq.q * wq);
        }
        Ok(total)
    }

    pub fn eval(&self, q: f64, k: C64, pol: Polarization, alpha0: C64, spec: &IntegralSpec) -> Result<C64> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(invalid("q", format!("must be non-negative, got {q}")));
        }
        check_k(k)?;
        if !self.correlated || self.xi == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let deg = match pol {
            Polarization::Perp => 2.0,
            Polarization::Par => 1.0,
        };
        let j = self.correlation_integral(q, k, pol, spec)?;
        Ok(-k * k * alpha0 * alpha0 * self.rho * self.rho / deg * j)
    }
}

pub fn chi2_q(q: f64, k: C64, pol: Polarization, medium: &MediumSpec, alpha0: C64) -> Result<C64> {
    Chi2Kernel::from_medium(medium).eval(q, k, pol, alpha0, &IntegralSpec::relative(1e-11))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecurrentVariant {
    /// P/(1 − y): the m = 0 term included.
    Inclusive,
    /// P·y/(1 − y): m ≥ 1 only.
    RecurrentOnly,
}

/// Real-space recurrent susceptibility dyad for the hard-sphere model.
pub fn chi2_recurrent(
    r: [f64; 3],
    k: C64,
    alpha: C64,
    medium: &MediumSpec,
    variant: RecurrentVariant,
) -> Result<ComplexDyad> {
    check_k(k)?;
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if !d.is_finite() {
        return Err(invalid("r", "must be finite"));
    }
    if d <= medium.xi() {
        return Ok(ComplexDyad::zeros());
    }
    let n = [r[0] / d, r[1] / d, r[2] / d];
    let pq = pq_complex_r(C64::new(d, 0.0), k);
    let (yp, yq) = ys(k, alpha, pq);
    if yp.norm() >= 1.0 || yq.norm() >= 1.0 {
        return Err(VacuaError::ResummationPole(yp.norm().max(yq.norm())));
    }
    let (fp, fq) = match variant {
        RecurrentVariant::Inclusive => (1.0 / (1.0 - yp), 1.0 / (1.0 - yq)),
        RecurrentVariant::RecurrentOnly => (yp / (1.0 - yp), yq / (1.0 - yq)),
    };
    let pre = -k * k * (medium.rho() * alpha).powi(2);
    Ok(ComplexDyad::from_projectors(n, pre * pq.p * fp, pre * pq.q * fq))
}

/// Leading static estimate (1/3)(ρα̃)²(α̃/4πξ³)² of the recurrent zero mode.
pub fn chi2_recurrent_zero_mode(alpha_t: f64, rho: f64, xi: f64) -> f64 {
    (rho * alpha_t).powi(2) * (alpha_t / (4.0 * PI * xi.powi(3))).powi(2) / 3.0
}

/// Quasicrystalline susceptibility ρα₀/(1 − χ^(2,0)/ρα₀), returned as (⊥, ∥).
pub fn chi_qc(q: f64, k: C64, medium: &MediumSpec, alpha0: C64) -> Result<(C64, C64)> {
    let kernel = Chi2Kernel::from_medium(medium);
    let spec = IntegralSpec::relative(1e-11);
    let ra = medium.rho() * alpha0;
    let one = |pol| -> Result<C64> {
        let c2 = kernel.eval(q, k, pol, alpha0, &spec)?;
        chi_qc_from(ra, c2)
    };
    Ok((one(Polarization::Perp)?, one(Polarization::Par)?))
}

/// Geometric resummation of a given χ^(2,0).
pub fn chi_qc_from(rho_alpha0: C64, chi2: C64) -> Result<C64> {
    if rho_alpha0 == C64::new(0.0, 0.0) {
        return Ok(rho_alpha0);
    }
    let den = 1.0 - chi2 / rho_alpha0;
    if den.norm() < 1e-12 {
        return Err(VacuaError::GeometricPole);
    }
    Ok(rho_alpha0 / den)
}
