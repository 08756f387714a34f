//! Adaptive Gauss–Kronrod integration of complex-valued integrands on finite
//! and semi-infinite intervals, with the Wick-rotated frequency and the radial
//! and momentum conveniences built on top.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VacuaError};
use crate::special::gauss_legendre;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_484_340,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailMap {
    /// u = a − s·ln(1 − t)
    Exp,
    /// u = a + s·tan(πt/2)
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail_map: TailMap,
    /// Length scale s of the semi-infinite maps.
    pub scale: f64,
}

impl Default for IntegralSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_subdivisions: 2000, tail_map: TailMap::Algebraic, scale: 1.0 }
    }
}

impl IntegralSpec {
    /// Relative-only control, for integrals whose magnitude is far below 1.
    pub fn relative(rel_tol: f64) -> Self {
        Self { rel_tol, abs_tol: 1e-300, ..Self::default() }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_map(mut self, map: TailMap) -> Self {
        self.tail_map = map;
        self
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(invalid("tolerance", "rel_tol and abs_tol must be positive"));
        }
        if self.max_subdivisions < 16 {
            return Err(invalid("max_subdivisions", "must be at least 16"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid("scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn kronrod<F: FnMut(f64) -> Result<C64>>(f: &mut F, a: f64, b: f64) -> Result<(C64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut resk = fc * WGK[10];
    let mut resg = C64::new(0.0, 0.0);
    let mut fv = [(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); 10];
    let mut resabs = fc.norm() * WGK[10];
    for (j, &x) in XGK[..10].iter().enumerate() {
        let dx = half * x;
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv[j] = (f1, f2);
        resk += (f1 + f2) * WGK[j];
        resabs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            resg += (f1 + f2) * WG[j / 2];
        }
    }
    if !(resk.re.is_finite() && resk.im.is_finite()) {
        return Err(VacuaError::NonDecayingIntegrand(format!("non-finite integrand on [{a:e}, {b:e}]")));
    }
    let mean = resk * 0.5;
    let mut resasc = (fc - mean).norm() * WGK[10];
    for j in 0..10 {
        resasc += ((fv[j].0 - mean).norm() + (fv[j].1 - mean).norm()) * WGK[j];
    }
    let hl = half.abs();
    let value = resk * half;
    resasc *= hl;
    resabs *= hl;
    let mut err = ((resk - resg) * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((value, err))
}

/// Adaptive G10K21 on [a, b] with a fallible complex integrand.
pub fn integrate_fallible<F>(mut f: F, a: f64, b: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<C64>,
{
    spec.validate()?;
    if a == b {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evaluations: 0, intervals: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut heap = BinaryHeap::new();
    let (v, e) = kronrod(&mut f, lo, hi)?;
    heap.push(Panel { a: lo, b: hi, value: v, error: e });
    let mut evals = 21;
    let mut total = v;
    let mut total_err = e;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        if heap.len() >= spec.max_subdivisions {
            return Err(failure(&heap, lo, hi, total, total_err));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            return Err(failure(&heap, lo, hi, total, total_err));
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod(&mut f, mid, worst.b)?;
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum in a fixed left-to-right order so results do not depend on heap history.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap_or(Ordering::Equal));
    let value: C64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Ok(QuadResult { value: value * sign, error, evaluations: evals, intervals: panels.len() })
}

fn failure(heap: &BinaryHeap<Panel>, lo: f64, hi: f64, total: C64, total_err: f64) -> VacuaError {
    if let Some(w) = heap.peek() {
        let width = w.b - w.a;
        let span = hi - lo;
        let at_end = w.a == lo || w.b == hi;
        if at_end && width < 1e-9 * span && w.error > 0.5 * total_err {
            return VacuaError::NonDecayingIntegrand(format!(
                "error concentrates at endpoint [{:e}, {:e}]; integrand not integrable there",
                w.a, w.b
            ));
        }
    }
    VacuaError::ToleranceNotMet { estimate: total.norm(), error: total_err }
}

pub fn integrate<F>(f: F, a: f64, b: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    integrate_fallible(|x| Ok(f(x)), a, b, spec)
}

/// Integral over [a, ∞) through the tail map of `spec`.
pub fn integrate_semi_infinite_fallible<F>(f: F, a: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<C64>,
{
    let s = spec.scale;
    let map = spec.tail_map;
    let g = |t: f64| -> Result<C64> {
        let (u, jac) = match map {
            TailMap::Exp => {
                let om = 1.0 - t;
                (a - s * om.ln(), s / om)
            }
            TailMap::Algebraic => {
                let th = 0.5 * PI * t;
                let c = th.cos();
                (a + s * th.tan(), s * 0.5 * PI / (c * c))
            }
        };
        if !u.is_finite() || !jac.is_finite() {
            return Ok(C64::new(0.0, 0.0));
        }
        let v = f(u)?;
        if v == C64::new(0.0, 0.0) {
            return Ok(v);
        }
        Ok(v * jac)
    };
    let r = integrate_fallible(g, 0.0, 1.0, spec)?;
    if map == TailMap::Exp {
        // The exponential map cannot reach beyond u ≈ a + 36.7s in double
        // precision; a tail still alive there is silently lost.
        let u_end = a + s * (f64::EPSILON).ln().abs();
        let tail = f(u_end)?.norm() * (u_end - a);
        if tail > spec.rel_tol * r.value.norm() + spec.abs_tol {
            return Err(VacuaError::NonDecayingIntegrand(format!(
                "integrand is {:e} at the end of the exponential map (u = {u_end:e}); use the algebraic map",
                tail / (u_end - a)
            )));
        }
    }
    Ok(r)
}

pub fn integrate_semi_infinite<F>(f: F, a: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    integrate_semi_infinite_fallible(|x| Ok(f(x)), a, spec)
}

fn check_real(v: C64, spec: &IntegralSpec, u: f64) -> Result<()> {
    if v.im.abs() > 1e-7 * v.re.abs() + 1e-3 * spec.abs_tol {
        return Err(VacuaError::Precondition(format!(
            "integrand on the imaginary axis must be real; f(i·{u:e}) = {v}"
        )));
    }
    Ok(())
}

/// ∫₀^∞ f(iu) du for an integrand that is real on the imaginary axis.
/// The closure receives u and returns f(iu).
pub fn wick_integrate<F>(f: F, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    integrate_semi_infinite_fallible(
        |u| {
            let v = f(u);
            check_real(v, spec, u)?;
            Ok(v)
        },
        0.0,
        spec,
    )
}

/// Fallible variant of [`wick_integrate`].
pub fn wick_integrate_fallible<F>(f: F, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<C64>,
{
    integrate_semi_infinite_fallible(
        |u| {
            let v = f(u)?;
            check_real(v, spec, u)?;
            Ok(v)
        },
        0.0,
        spec,
    )
}

/// ∫₀^upper f(iu) du, used with the sharp UV cutoff.
pub fn wick_integrate_to<F>(f: F, upper: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<C64>,
{
    // Panels at decades keep the first bisection levels cheap for large cutoffs.
    let mut edges = vec![0.0];
    let mut e = 1.0;
    while e < upper {
        edges.push(e);
        e *= 10.0;
    }
    edges.push(upper);
    let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evaluations: 0, intervals: 0 };
    for w in edges.windows(2) {
        let r = integrate_fallible(
            |u| {
                let v = f(u)?;
                check_real(v, spec, u)?;
                Ok(v)
            },
            w[0],
            w[1],
            spec,
        )?;
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
        total.intervals += r.intervals;
    }
    Ok(total)
}

/// ∫_{r_min}^∞ kernel(r) dr along the real axis.
pub fn radial_integrate<F>(kernel: F, r_min: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> C64,
{
    if !(r_min >= 0.0) {
        return Err(invalid("r_min", "must be non-negative"));
    }
    integrate_semi_infinite(kernel, r_min, spec)
}

/// ∫ kernel(r) dr along the ray r = r_min + t·e^{iθ}, t ∈ [0, ∞). Oscillatory
/// kernels e^{2ikr} with real k become exponentially damped for θ = π/2.
pub fn radial_integrate_ray<F>(kernel: F, r_min: f64, theta: f64, spec: &IntegralSpec) -> Result<QuadResult>
where
    F: Fn(C64) -> C64,
{
    let dir = C64::from_polar(1.0, theta);
    integrate_semi_infinite(|t| kernel(r_min + dir * t) * dir, 0.0, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentumMeasure {
    /// ∫d³q/(2π)³ over an isotropic integrand.
    Continuum,
    /// ∫d³q/(2π)³ ↦ ρ: one mode per dipole, summand taken at q = 0.
    ModeCount { rho: f64 },
}

/// ∫d³q/(2π)³ f(|q|) = (1/2π²)∫₀^∞ q² f(q) dq, or the mode-count regulator.
pub fn momentum_integrate<F>(f: F, measure: MomentumMeasure, spec: &IntegralSpec) -> Result<C64>
where
    F: Fn(f64) -> Result<C64>,
{
    match measure {
        MomentumMeasure::ModeCount { rho } => Ok(f(0.0)? * rho),
        MomentumMeasure::Continuum => {
            let r = integrate_semi_infinite_fallible(|q| Ok(f(q)? * (q * q)), 0.0, spec)?;
            Ok(r.value / (2.0 * PI * PI))
        }
    }
}

/// Fixed Gauss–Legendre rule mapped onto a frequency interval. Shared across
/// samples when results from different configurations must be compared
/// node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedGaussGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MappedGaussGrid {
    /// u = s·t/(1 − t) for t ∈ (0, 1).
    pub fn semi_infinite(n: usize, scale: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (xi + 1.0);
            let om = 1.0 - t;
            nodes.push(scale * t / om);
            weights.push(0.5 * wi * scale / (om * om));
        }
        Self { nodes, weights }
    }

    /// Plain Gauss–Legendre on [a, b].
    pub fn finite(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let h = 0.5 * (b - a);
        Self {
            nodes: x.iter().map(|xi| a + h * (xi + 1.0)).collect(),
            weights: w.iter().map(|wi| wi * h).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(u, w)| w * f(*u)).sum()
    }
}
