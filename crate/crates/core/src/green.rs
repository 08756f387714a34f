//! Free-space dyadic Green functions.
//!
//! Sign convention: G(r) = (𝕀 + ∇⊗∇/k²) e^{ikr}/(−4πr). The electrostatic
//! part is the principal-value dyad ∇⊗∇(−1/4πr)/k²; its contact term 𝕀/(3k²)
//! δ³(r) is never materialized.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;

use crate::error::{Result, VacuaError};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this |kr| the radiative part is summed as a power series.
const SERIES_SWITCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexDyad(pub Matrix3<C64>);

impl ComplexDyad {
    pub fn zeros() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn scaled_identity(s: C64) -> Self {
        Self(Matrix3::identity() * s)
    }

    /// s₁(𝕀 − n̂⊗n̂) + s₂ n̂⊗n̂ for a unit vector n̂.
    pub fn from_projectors(n: [f64; 3], transverse: C64, longitudinal: C64) -> Self {
        let mut m = Matrix3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                let nn = n[a] * n[b];
                let delta = if a == b { 1.0 } else { 0.0 };
                m[(a, b)] = transverse * (delta - nn) + longitudinal * nn;
            }
        }
        Self(m)
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.0[(a, b)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn dot(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0 * s)
    }

    /// Component n̂·D·n̂.
    pub fn longitudinal(&self, n: [f64; 3]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for a in 0..3 {
            for b in 0..3 {
                s += self.0[(a, b)] * n[a] * n[b];
            }
        }
        s
    }

    /// Half the trace of (𝕀 − n̂⊗n̂)·D, i.e. the transverse scalar of an
    /// axially symmetric dyad.
    pub fn transverse(&self, n: [f64; 3]) -> C64 {
        (self.trace() - self.longitudinal(n)) * 0.5
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..3).all(|a| (0..3).all(|b| (self.0[(a, b)] - self.0[(b, a)]).norm() <= tol * scale))
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.0.iter().all(|z| z.im.abs() <= tol * scale)
    }
}

impl Add for ComplexDyad {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for ComplexDyad {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul<C64> for ComplexDyad {
    type Output = Self;
    fn mul(self, rhs: C64) -> Self {
        self.scale(rhs)
    }
}

/// Scalars of G = P(𝕀 − r̂⊗r̂) + Q r̂⊗r̂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PQPair {
    pub p: C64,
    pub q: C64,
}

fn norm_and_unit(r: [f64; 3]) -> Result<(f64, [f64; 3])> {
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(VacuaError::SingularPoint);
    }
    Ok((n, [r[0] / n, r[1] / n, r[2] / n]))
}

fn check_k(k: C64) -> Result<()> {
    if k.norm() == 0.0 || !k.re.is_finite() || !k.im.is_finite() {
        return Err(VacuaError::InvalidParameter { field: "k", reason: format!("must be finite and non-zero, got {k}") });
    }
    Ok(())
}

pub fn pq_decompose(r: f64, k: C64) -> Result<PQPair> {
    if r <= 0.0 || !r.is_finite() {
        return Err(VacuaError::SingularPoint);
    }
    check_k(k)?;
    Ok(pq_unchecked(r, k))
}

pub(crate) fn pq_unchecked(r: f64, k: C64) -> PQPair {
    pq_complex_r(C64::new(r, 0.0), k)
}

/// P and Q at complex distance, used for contour-rotated radial integrals.
pub(crate) fn pq_complex_r(r: C64, k: C64) -> PQPair {
    let x = k * r;
    let pre = -(I * x).exp() / (4.0 * PI * r);
    let ix = I / x;
    let x2 = x * x;
    PQPair {
        p: pre * (1.0 + ix - 1.0 / x2),
        q: pre * (-2.0 * ix + 2.0 / x2),
    }
}

/// Radiative scalars (P, Q minus their electrostatic parts) at r > 0.
pub(crate) fn pq_radiative(r: f64, k: C64) -> PQPair {
    let x = k * r;
    if x.norm() < SERIES_SWITCH {
        // P_rad = −(1/4πr) Σ_{n≥2} iⁿ[−1/(n−2)! + 1/(n−1)! − 1/n!] x^{n−2}
        // Q_rad = −(1/4πr) Σ_{n≥2} iⁿ[2/n! − 2/(n−1)!] x^{n−2}
        let mut p = C64::new(0.0, 0.0);
        let mut q = C64::new(0.0, 0.0);
        let mut ipow = C64::new(-1.0, 0.0); // i²
        let mut xpow = C64::new(1.0, 0.0);
        let mut f_nm2 = 1.0; // (n−2)!
        for n in 2..40usize {
            let f_nm1 = f_nm2 * (n - 1) as f64;
            let f_n = f_nm1 * n as f64;
            let cp = -1.0 / f_nm2 + 1.0 / f_nm1 - 1.0 / f_n;
            let cq = 2.0 / f_n - 2.0 / f_nm1;
            let tp = ipow * xpow * cp;
            let tq = ipow * xpow * cq;
            p += tp;
            q += tq;
            if n > 4 && tp.norm() < 1e-18 * p.norm() && tq.norm() < 1e-18 * q.norm() {
                break;
            }
            ipow *= I;
            xpow *= x;
            f_nm2 = f_nm1;
        }
        let pre = -1.0 / (4.0 * PI * r);
        PQPair { p: p * pre, q: q * pre }
    } else {
        let full = pq_unchecked(r, k);
        let (ps, qs) = static_pq(r, k);
        PQPair { p: full.p - ps, q: full.q - qs }
    }
}

fn static_pq(r: f64, k: C64) -> (C64, C64) {
    let s = 1.0 / (4.0 * PI * k * k * r.powi(3));
    (s, -2.0 * s)
}

/// Principal-value electrostatic dyad −(3r̂⊗r̂ − 𝕀)/(4πk²r³).
pub fn green_static(r: [f64; 3], k: C64) -> Result<ComplexDyad> {
    let (rn, n) = norm_and_unit(r)?;
    check_k(k)?;
    let (ps, qs) = static_pq(rn, k);
    Ok(ComplexDyad::from_projectors(n, ps, qs))
}

/// Coincident-point value of the regularized (primed) radiative dyad,
/// −ik/(6π) per diagonal entry; at k = iu this is u/(6π).
pub fn green_coincident(k: C64) -> C64 {
    -I * k / (6.0 * PI)
}

/// Radiative dyad G − G_stat. At r = 0 returns the regularized coincident
/// dyad; its real part for real k is the divergent self-energy, absorbed in ω₀.
pub fn green_radiative(r: [f64; 3], k: C64) -> Result<ComplexDyad> {
    check_k(k)?;
    let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if rn == 0.0 {
        return Ok(ComplexDyad::scaled_identity(green_coincident(k)));
    }
    let n = [r[0] / rn, r[1] / rn, r[2] / rn];
    let pq = pq_radiative(rn, k);
    Ok(ComplexDyad::from_projectors(n, pq.p, pq.q))
}

/// Full dyad P(𝕀 − r̂⊗r̂) + Q r̂⊗r̂ at r ≠ 0.
pub fn green_total(r: [f64; 3], k: C64) -> Result<ComplexDyad> {
    let (rn, n) = norm_and_unit(r)?;
    check_k(k)?;
    let pq = pq_unchecked(rn, k);
    Ok(ComplexDyad::from_projectors(n, pq.p, pq.q))
}

/// Momentum-space scalars (G⊥, G∥) = (1/(k² − q²), 1/k²).
pub fn green_momentum(q: f64, k: C64) -> Result<(C64, C64)> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(VacuaError::InvalidParameter { field: "q", reason: format!("must be non-negative, got {q}") });
    }
    check_k(k)?;
    let k2 = k * k;
    let den = k2 - q * q;
    if den.norm() <= 1e-14 * (q * q).max(k2.norm()) {
        return Err(VacuaError::OnShellPole(q));
    }
    Ok((1.0 / den, 1.0 / k2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn static_zz_matches_finite_differences() {
        // Central differences of φ(r) = −1/(4π|r|) along z at r = (0,0,d).
        let d = 0.7;
        let h = 1e-4;
        let phi = |z: f64| -1.0 / (4.0 * PI * z.abs());
        let second = (phi(d + h) - 2.0 * phi(d) + phi(d - h)) / (h * h);
        let g = green_static([0.0, 0.0, d], C64::new(1.0, 0.0)).unwrap();
        assert!((g.get(2, 2).re - second).abs() < 1e-6 * second.abs());
        assert!((g.get(2, 2).re + 1.0 / (2.0 * PI * d.powi(3))).abs() < 1e-13);
    }

    #[test]
    fn static_is_traceless_and_scales() {
        let r = [0.3, -0.2, 0.5];
        let k = C64::new(1.0, 0.0);
        let g1 = green_static(r, k).unwrap();
        let g2 = green_static(r, k * 2.0).unwrap();
        assert!(g1.trace().norm() < 1e-12 * g1.max_abs());
        assert!((g1.0 / C64::new(4.0, 0.0) - g2.0).norm() < 1e-14 * g1.max_abs());
        assert_eq!(green_static([0.0; 3], k), Err(VacuaError::SingularPoint));
    }

    #[test]
    fn radiative_coincident_limit() {
        for kk in [0.5, 1.0, 2.0] {
            let g = green_radiative([0.0; 3], C64::new(kk, 0.0)).unwrap();
            assert!((g.trace().im + kk / (2.0 * PI)).abs() < 1e-15);
        }
        let g = green_radiative([0.0; 3], C64::new(0.0, 1.0)).unwrap();
        assert!(g.is_real(0.0));
    }

    #[test]
    fn radiative_series_matches_closed_form_at_switch() {
        let k = C64::new(1.3, 0.2);
        for r in [0.38, 0.3846, 0.39] {
            let s = pq_radiative(r, k);
            let full = pq_unchecked(r, k);
            let (ps, qs) = static_pq(r, k);
            assert!(close(s.p, full.p - ps, 1e-11));
            assert!(close(s.q, full.q - qs, 1e-11));
        }
    }

    #[test]
    fn radiative_far_field_is_transverse() {
        let k = C64::new(1.0, 0.0);
        let r = 400.0;
        let g = green_radiative([0.0, 0.0, r], k).unwrap();
        let lead = -(I * k * r).exp() / (4.0 * PI * r);
        assert!((g.get(0, 0) - lead).norm() < 1e-2 * lead.norm());
        assert!(g.get(2, 2).norm() < 1e-2 * lead.norm());
    }

    #[test]
    fn imaginary_axis_dyads_are_real() {
        let k = C64::new(0.0, 0.8);
        for r in [[0.01, 0.0, 0.02], [1.0, 2.0, -0.5]] {
            assert!(green_radiative(r, k).unwrap().is_real(1e-14));
            assert!(green_static(r, k).unwrap().is_real(1e-14));
            assert!(green_total(r, k).unwrap().is_real(1e-14));
        }
    }

    #[test]
    fn pq_examples() {
        let r = 0.9;
        let k = C64::new(1.0 / r, 0.0);
        let pq = pq_decompose(r, k).unwrap();
        let expect = -I * (I * 1.0).exp() / (4.0 * PI * r);
        assert!(close(pq.p, expect, 1e-14));

        let k = C64::new(1.0, 0.0);
        let r = 1e-4;
        let q = pq_decompose(r, k).unwrap().q;
        let near = -1.0 / (2.0 * PI * r.powi(3));
        assert!((q.re - near).abs() < 1e-7 * near.abs());

        let r = 0.7;
        let k = C64::new(1.3, 0.0);
        let pq = pq_decompose(r, k).unwrap();
        let n = [0.6, 0.0, 0.8];
        let v = [r * n[0], r * n[1], r * n[2]];
        let tr = (green_radiative(v, k).unwrap() + green_static(v, k).unwrap()).trace();
        assert!(close(pq.p * 2.0 + pq.q, tr, 1e-12));
        assert!(pq_decompose(0.0, k).is_err());
    }

    #[test]
    fn momentum_scalars() {
        let (gp, gl) = green_momentum(2.0, C64::new(1.0, 0.0)).unwrap();
        assert!(close(gp, C64::new(-1.0 / 3.0, 0.0), 1e-15));
        assert!(close(gl, C64::new(1.0, 0.0), 1e-15));
        let k = C64::new(0.4, 0.3);
        let (gp, gl) = green_momentum(0.0, k).unwrap();
        assert!(close(gp, 1.0 / (k * k), 1e-15) && close(gl, 1.0 / (k * k), 1e-15));
        assert_eq!(green_momentum(1.0, C64::new(1.0, 0.0)), Err(VacuaError::OnShellPole(1.0)));
    }

    proptest! {
        #[test]
        fn reciprocity_and_symmetry(x in -3.0f64..3.0, y in -3.0f64..3.0, z in 0.05f64..3.0,
                                    kr in 0.1f64..3.0, ki in 0.0f64..2.0) {
            let k = C64::new(kr, ki);
            let g = green_total([x, y, z], k).unwrap();
            let gm = green_total([-x, -y, -z], k).unwrap();
            prop_assert!((g.0 - gm.transpose().0).norm() <= 1e-12 * g.max_abs());
            prop_assert!(g.is_symmetric(1e-14));
            prop_assert!(green_radiative([x, y, z], k).unwrap().is_symmetric(1e-14));
        }

        #[test]
        fn total_splits_into_static_plus_radiative(x in -2.0f64..2.0, z in 0.05f64..2.0,
                                                  kr in 0.2f64..2.0) {
            let k = C64::new(kr, 0.1);
            let r = [x, 0.3, z];
            let sum = green_static(r, k).unwrap() + green_radiative(r, k).unwrap();
            let tot = green_total(r, k).unwrap();
            prop_assert!((sum.0 - tot.0).norm() <= 1e-9 * tot.max_abs());
        }
    }
}
