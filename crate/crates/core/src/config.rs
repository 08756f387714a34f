//! Finite dipole configurations: exact vacuum energies from the log-determinant
//! of the interaction matrix, per-dipole shifts from its inverse, hard-sphere
//! sampling and Monte Carlo ensemble averages.
//!
//! On the imaginary axis k = iu the interaction matrix 𝕀 + α k²G is real and
//! symmetric, so everything below is real arithmetic.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VacuaError};
use crate::lamb::{free_space_lamb_energy, free_space_lamb_shift, EnergyKind, EnergyResult, Provenance};
use crate::params::{DipoleSpecies, MediumSpec};
use crate::polarizability::{alpha_bare_imag, alpha_free_imag};
use crate::quadrature::{wick_integrate_to, IntegralSpec, MappedGaussGrid};
use crate::C64;

pub const N_MAX: usize = 512;
pub const ENSEMBLE_GRID_NODES: usize = 64;
pub const MIN_SAMPLES: usize = 16;
const MAX_PACKING_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleConfiguration {
    pub positions: Vec<[f64; 3]>,
    pub species: DipoleSpecies,
    /// Hard-sphere exclusion diameter.
    pub xi: f64,
    /// Side of the periodic cell. `None` means open boundaries and unit volume.
    pub cell: Option<f64>,
}

impl DipoleConfiguration {
    pub fn new(positions: Vec<[f64; 3]>, species: DipoleSpecies, xi: f64, cell: Option<f64>) -> Result<Self> {
        let c = Self { positions, species, xi, cell };
        c.validate()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.species.validate()?;
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(invalid("xi", format!("must be positive, got {}", self.xi)));
        }
        if self.len() > N_MAX {
            return Err(invalid("n", format!("{} dipoles exceed the dense limit {N_MAX}", self.len())));
        }
        if let Some(l) = self.cell {
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid("cell", format!("must be positive, got {l}")));
            }
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("positions", "non-finite coordinate"));
        }
        let tol = self.xi * (1.0 - 1e-12);
        for i in 0..self.len() {
            for j in 0..i {
                let d = norm(self.separation(i, j));
                if d < tol {
                    return Err(invalid("positions", format!("dipoles {j} and {i} are {d:e} apart, below xi = {:e}", self.xi)));
                }
            }
        }
        Ok(())
    }

    /// Cell volume for periodic configurations, 1 otherwise.
    pub fn volume(&self) -> f64 {
        self.cell.map_or(1.0, |l| l.powi(3))
    }

    /// R_i − R_j, reduced to the nearest image in a periodic cell.
    pub fn separation(&self, i: usize, j: usize) -> [f64; 3] {
        let (a, b) = (self.positions[i], self.positions[j]);
        let mut r = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        if let Some(l) = self.cell {
            for c in &mut r {
                *c -= l * (*c / l).round();
            }
        }
        r
    }

    pub fn min_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.len() {
            for j in 0..i {
                let d = norm(self.separation(i, j));
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let mut c = self.clone();
        for p in &mut c.positions {
            for k in 0..3 {
                p[k] += shift[k];
            }
        }
        c
    }

    /// Applies a 3×3 matrix to every position.
    pub fn transformed(&self, m: &[[f64; 3]; 3]) -> Self {
        let mut c = self.clone();
        for p in &mut c.positions {
            let q = *p;
            for (k, row) in m.iter().enumerate() {
                p[k] = row[0] * q[0] + row[1] * q[1] + row[2] * q[2];
            }
        }
        c
    }

    /// Same positions with the periodic images dropped.
    pub fn with_open_boundaries(&self) -> Self {
        Self { cell: None, ..self.clone() }
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("# xi={} n={}\n", self.xi, self.len());
        if let Some(l) = self.cell {
            let _ = writeln!(s, "# cell={l}");
        }
        for p in &self.positions {
            let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
        }
        s
    }

    /// Reads the position table written by [`to_table`](Self::to_table).
    pub fn from_table(text: &str, species: DipoleSpecies) -> Result<Self> {
        let mut xi = None;
        let mut n = None;
        let mut cell = None;
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    let Some((k, v)) = tok.split_once('=') else { continue };
                    let bad = || VacuaError::Format(format!("line {}: bad value `{tok}`", lineno + 1));
                    match k {
                        "xi" => xi = Some(v.parse::<f64>().map_err(|_| bad())?),
                        "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                        "cell" => cell = Some(v.parse::<f64>().map_err(|_| bad())?),
                        _ => {}
                    }
                }
                continue;
            }
            let cols: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| VacuaError::Format(format!("line {}: {e}", lineno + 1)))?;
            if cols.len() != 3 {
                return Err(VacuaError::Format(format!("line {}: expected 3 columns, got {}", lineno + 1, cols.len())));
            }
            positions.push([cols[0], cols[1], cols[2]]);
        }
        let xi = xi.ok_or_else(|| VacuaError::Format("missing `# xi=<value> n=<N>` header".into()))?;
        if let Some(n) = n {
            if n != positions.len() {
                return Err(VacuaError::Format(format!("header says n={n}, table has {} rows", positions.len())));
            }
        }
        Self::new(positions, species, xi, cell)
    }

    pub fn read(path: &Path, species: DipoleSpecies) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VacuaError::Format(format!("{}: {e}", path.display())))?;
        Self::from_table(&text, species)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table()).map_err(|e| VacuaError::Format(format!("{}: {e}", path.display())))
    }
}

fn norm(r: [f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// k²G(r; iu) = a(𝕀 − r̂r̂) + b r̂r̂ with
/// a = e^{−ur}(1 + ur + u²r²)/4πr³ and b = −2e^{−ur}(1 + ur)/4πr³.
pub fn coupling_block(r: [f64; 3], u: f64) -> [[f64; 3]; 3] {
    let d = norm(r);
    let ur = u * d;
    let pre = (-ur).exp() / (4.0 * PI * d.powi(3));
    let a = pre * (1.0 + ur + ur * ur);
    let b = -2.0 * pre * (1.0 + ur);
    let n = [r[0] / d, r[1] / d, r[2] / d];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let nn = n[i] * n[j];
            m[i][j] = (b - a) * nn + if i == j { a } else { 0.0 };
        }
    }
    m
}

/// Off-diagonal part A = α(iu)k²G″ of the interaction matrix 𝕀 + A, with
/// α the free-space renormalized polarizability. Diagonal blocks are zero:
/// the coincident propagator is carried by α.
pub fn interaction_offdiag(config: &DipoleConfiguration, u: f64, alpha: f64) -> DMatrix<f64> {
    let n = config.len();
    let mut a = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in 0..i {
            let blk = coupling_block(config.separation(i, j), u);
            for p in 0..3 {
                for q in 0..3 {
                    let v = alpha * blk[p][q];
                    a[(3 * i + p, 3 * j + q)] = v;
                    a[(3 * j + q, 3 * i + p)] = v;
                }
            }
        }
    }
    a
}

/// ln det(𝕀 + A) for symmetric A by a Cholesky factorization that tracks
/// L_jj² − 1 directly, so small couplings keep full relative precision.
/// Returns `None` if 𝕀 + A is not positive definite.
pub fn ln_det_unit_plus(a: &DMatrix<f64>) -> Option<f64> {
    let n = a.nrows();
    // Row-major lower triangle.
    let mut l = vec![0.0; n * n];
    let mut inv_diag = vec![0.0; n];
    let mut ld = 0.0;
    for j in 0..n {
        let (head, rest) = l.split_at_mut(j * n);
        let row_j = &mut rest[..n];
        for i in 0..j {
            let row_i = &head[i * n..i * n + i];
            let s: f64 = row_i.iter().zip(&row_j[..i]).map(|(x, y)| x * y).sum();
            row_j[i] = (a[(j, i)] - s) * inv_diag[i];
        }
        let s: f64 = row_j[..j].iter().map(|x| x * x).sum();
        let delta = a[(j, j)] - s;
        if !(delta > -1.0) {
            return None;
        }
        let d = (1.0 + delta).sqrt();
        row_j[j] = d;
        inv_diag[j] = 1.0 / d;
        ld += delta.ln_1p();
    }
    Some(ld)
}

fn interaction_spec() -> IntegralSpec {
    IntegralSpec::relative(1e-12).with_max_subdivisions(4000)
}

/// Upper end of the interaction integrals: pair terms decay as e^{−2u d_min}.
fn interaction_upper(config: &DipoleConfiguration) -> f64 {
    match config.min_distance() {
        Some(d) => config.species.cutoff.min(60.0 / d),
        None => 0.0,
    }
}

fn ln_det_at(config: &DipoleConfiguration, u: f64) -> Result<f64> {
    let alpha = alpha_free_imag(u, &config.species)?;
    ln_det_unit_plus(&interaction_offdiag(config, u, alpha)).ok_or(VacuaError::MatrixSingular(u))
}

/// (1/2π𝓥)∫ ln det(𝕀 + αk²G″) du: the interaction part of the energy.
pub fn interaction_energy(config: &DipoleConfiguration) -> Result<(f64, f64)> {
    config.validate()?;
    if config.len() < 2 {
        return Ok((0.0, 0.0));
    }
    let scale = 1.0 / (2.0 * PI * config.volume());
    let r = wick_integrate_to(|u| Ok(C64::new(ln_det_at(config, u)? * scale, 0.0)), interaction_upper(config), &interaction_spec())?;
    Ok((r.value.re, r.error))
}

/// Vacuum energy per volume of a fixed configuration. The free-space part is
/// N times the one-dipole logarithm ln(1 + α₀φ⁽⁰⁾) with its counterterm; the
/// interaction part is the log-determinant of the normalized matrix.
pub fn config_vacuum_energy(config: &DipoleConfiguration) -> Result<EnergyResult> {
    config.validate()?;
    let v = config.volume();
    let n = config.len() as f64;
    let free = free_space_lamb_energy(n / v, &config.species)?;
    let (int, int_err) = interaction_energy(config)?;
    let prov = Provenance {
        formula: "log-determinant of the configuration interaction matrix".into(),
        method: "Cholesky log-det under adaptive imaginary-axis quadrature".into(),
        cutoff: Some(config.species.cutoff),
        notes: vec![format!("volume {v:e} ({})", if config.cell.is_some() { "periodic cell" } else { "open, unit volume" })],
    };
    Ok(EnergyResult::from_parts(
        EnergyKind::Density,
        Some(n / v),
        &[("free_space", free.value, free.error_estimate), ("interaction", int, int_err)],
        prov,
    ))
}

/// Lamb shift of dipole i, the derivative of the configuration energy with
/// respect to ln α₀ of that dipole. The interaction part is
/// (1/2π)∫ (α/α₀)·α Tr[(k²G″(𝕀 + αk²G″)⁻¹)_ii] du.
pub fn config_lamb_shift(config: &DipoleConfiguration, i: usize) -> Result<EnergyResult> {
    config.validate()?;
    if i >= config.len() {
        return Err(VacuaError::Precondition(format!("dipole index {i} out of range for N = {}", config.len())));
    }
    let free = free_space_lamb_shift(&config.species)?;
    let (int, int_err) = if config.len() < 2 {
        (0.0, 0.0)
    } else {
        let r = wick_integrate_to(
            |u| {
                let alpha = alpha_free_imag(u, &config.species)?;
                let a0 = alpha_bare_imag(u, &config.species);
                let k = interaction_offdiag(config, u, 1.0);
                let m = DMatrix::identity(k.nrows(), k.nrows()) + &k * alpha;
                let chol = m.cholesky().ok_or(VacuaError::MatrixSingular(u))?;
                let y = chol.solve(&k.columns(3 * i, 3).into_owned());
                let tr = y[(3 * i, 0)] + y[(3 * i + 1, 1)] + y[(3 * i + 2, 2)];
                Ok(C64::new(alpha / a0 * alpha * tr / (2.0 * PI), 0.0))
            },
            interaction_upper(config),
            &interaction_spec(),
        )?;
        (r.value.re, r.error)
    };
    let prov = Provenance {
        formula: "per-dipole shift from the inverse of the interaction matrix".into(),
        method: "Cholesky solve under adaptive imaginary-axis quadrature".into(),
        cutoff: Some(config.species.cutoff),
        notes: vec![],
    };
    Ok(EnergyResult::from_parts(
        EnergyKind::Shift,
        None,
        &[("free_space", free.value, free.error_estimate), ("interaction", int, int_err)],
        prov,
    ))
}

/// Random sequential addition of hard spheres of diameter ξ in a periodic
/// cube of volume N/ρ, ρ = ρ̄/ξ³.
pub fn sample_hard_sphere(n: usize, rho_bar: f64, xi: f64, species: &DipoleSpecies, seed: u64) -> Result<DipoleConfiguration> {
    sample_with_rng(n, rho_bar, xi, species, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sample_with_rng<R: Rng>(n: usize, rho_bar: f64, xi: f64, species: &DipoleSpecies, rng: &mut R) -> Result<DipoleConfiguration> {
    if !(rho_bar.is_finite() && rho_bar > 0.0) {
        return Err(invalid("rho_bar", format!("must be positive, got {rho_bar}")));
    }
    if !(xi.is_finite() && xi > 0.0) {
        return Err(invalid("xi", format!("must be positive, got {xi}")));
    }
    if n > N_MAX {
        return Err(invalid("n", format!("{n} dipoles exceed the dense limit {N_MAX}")));
    }
    let eta = PI * rho_bar / 6.0;
    if eta > MAX_PACKING_FRACTION {
        return Err(VacuaError::PackingTooDense(format!("packing fraction {eta:.3} above {MAX_PACKING_FRACTION}")));
    }
    if n == 0 {
        return DipoleConfiguration::new(vec![], *species, xi, None);
    }
    let side = (n as f64 / rho_bar).cbrt() * xi;
    let xi2 = xi * xi;
    let max_attempts = 1000 * n + 10_000;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut attempts = 0;
    while positions.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(VacuaError::PackingTooDense(format!("placed {} of {n} after {max_attempts} attempts", positions.len())));
        }
        let p = [rng.gen::<f64>() * side, rng.gen::<f64>() * side, rng.gen::<f64>() * side];
        let clear = positions.iter().all(|q| {
            let mut d2 = 0.0;
            for k in 0..3 {
                let mut d = p[k] - q[k];
                d -= side * (d / side).round();
                d2 += d * d;
            }
            d2 >= xi2
        });
        if clear {
            positions.push(p);
        }
    }
    DipoleConfiguration::new(positions, *species, xi, Some(side))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Minimum-image pair vectors in the sampling cube.
    Periodic,
    /// Same positions, no images.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub boundary: Boundary,
    pub grid_nodes: usize,
    /// Scale s of the map u = s·t/(1 − t).
    pub grid_scale: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { boundary: Boundary::Periodic, grid_nodes: ENSEMBLE_GRID_NODES, grid_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// Mean energy density: N/𝓥 times the free-space term plus the mean interaction part.
    pub mean: EnergyResult,
    /// Standard error of the mean interaction part.
    pub stderr: f64,
    /// (ln det of the averaged matrix, average of ln det), both as energy densities.
    pub ln_avg_vs_avg_ln: (f64, f64),
    /// Grid error of the gap, from the 64-node rule against a half-size rule.
    pub gap_quadrature_error: f64,
    /// Interaction energy density of each sample, in sample order.
    pub samples: Vec<f64>,
    pub volume: f64,
}

impl EnsembleResult {
    /// ln det⟨M⟩ − ⟨ln det M⟩ as an energy density; non-negative by concavity.
    pub fn gap(&self) -> f64 {
        self.ln_avg_vs_avg_ln.0 - self.ln_avg_vs_avg_ln.1
    }
}

pub fn ensemble_average(n: usize, medium: &MediumSpec, species: &DipoleSpecies, n_samples: usize, seed: u64) -> Result<EnsembleResult> {
    ensemble_average_with(n, medium, species, n_samples, seed, &EnsembleOptions::default())
}

/// Configuration for one sample, drawn from its own stream of the seed.
pub fn ensemble_sample(n: usize, medium: &MediumSpec, species: &DipoleSpecies, seed: u64, index: usize) -> Result<DipoleConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    sample_with_rng(n, medium.rho_bar, medium.xi(), species, &mut rng)
}

pub fn ensemble_average_with(
    n: usize,
    medium: &MediumSpec,
    species: &DipoleSpecies,
    n_samples: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    medium.validate()?;
    species.validate()?;
    if n_samples < MIN_SAMPLES {
        return Err(VacuaError::InsufficientSamples { need: MIN_SAMPLES, got: n_samples });
    }
    if n < 2 {
        return Err(invalid("n", format!("an ensemble needs at least two dipoles, got {n}")));
    }
    if opts.grid_nodes < 4 || !(opts.grid_scale > 0.0) {
        return Err(invalid("grid", "need at least 4 nodes and a positive scale"));
    }
    let configs: Vec<DipoleConfiguration> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let c = ensemble_sample(n, medium, species, seed, s)?;
            Ok(match opts.boundary {
                Boundary::Periodic => c,
                Boundary::Open => c.with_open_boundaries(),
            })
        })
        .collect::<Result<_>>()?;
    let side = configs[0].cell.unwrap_or_else(|| (n as f64 / medium.rho_bar).cbrt() * medium.xi());
    let volume = side.powi(3);

    let fine = MappedGaussGrid::semi_infinite(opts.grid_nodes, opts.grid_scale);
    let coarse = MappedGaussGrid::semi_infinite(opts.grid_nodes / 2, opts.grid_scale);
    let nodes: Vec<f64> = fine.nodes.iter().chain(&coarse.nodes).copied().collect();
    let cutoff = species.cutoff;

    // Per node: ln det of every sample (in order) and ln det of the mean matrix.
    let per_node: Vec<(Vec<f64>, f64)> = nodes
        .par_iter()
        .map(|&u| {
            if u > cutoff {
                return Ok((vec![0.0; n_samples], 0.0));
            }
            let alpha = alpha_free_imag(u, species)?;
            let mut sum = DMatrix::<f64>::zeros(3 * n, 3 * n);
            let mut lds = Vec::with_capacity(n_samples);
            for c in &configs {
                let a = interaction_offdiag(c, u, alpha);
                lds.push(ln_det_unit_plus(&a).ok_or(VacuaError::MatrixSingular(u))?);
                sum += a;
            }
            sum /= n_samples as f64;
            let ld_mean = ln_det_unit_plus(&sum).ok_or(VacuaError::MatrixSingular(u))?;
            Ok((lds, ld_mean))
        })
        .collect::<Result<_>>()?;
    let (fine_nodes, coarse_nodes) = per_node.split_at(fine.len());
    let scale = 1.0 / (2.0 * PI * volume);

    let integrate = |grid: &MappedGaussGrid, vals: &[(Vec<f64>, f64)]| -> (Vec<f64>, f64) {
        let mut samples = vec![0.0; n_samples];
        let mut mean_matrix = 0.0;
        for (w, (lds, ldm)) in grid.weights.iter().zip(vals) {
            for (s, ld) in samples.iter_mut().zip(lds) {
                *s += w * ld * scale;
            }
            mean_matrix += w * ldm * scale;
        }
        (samples, mean_matrix)
    };
    let (samples, ln_avg) = integrate(&fine, fine_nodes);
    let (samples_c, ln_avg_c) = integrate(&coarse, coarse_nodes);

    let ns = n_samples as f64;
    let mean_int = samples.iter().sum::<f64>() / ns;
    let mean_int_c = samples_c.iter().sum::<f64>() / ns;
    let var = samples.iter().map(|s| (s - mean_int).powi(2)).sum::<f64>() / (ns - 1.0);
    let stderr = (var / ns).sqrt();

    let rho = n as f64 / volume;
    let free = free_space_lamb_energy(rho, species)?;
    let prov = Provenance {
        formula: "ensemble mean of configuration log-determinants".into(),
        method: format!("random sequential addition, {n_samples} samples, {}-node mapped Gauss grid", fine.len()),
        cutoff: Some(cutoff),
        notes: vec![
            format!("seed {seed}, per-sample ChaCha8 stream = sample index"),
            format!("{:?} boundaries, volume {volume:e}", opts.boundary),
        ],
    };
    let mean = EnergyResult::from_parts(
        EnergyKind::Density,
        Some(rho),
        &[("free_space", free.value, free.error_estimate), ("interaction", mean_int, (mean_int - mean_int_c).abs())],
        prov,
    )
    .with_comparator("ln_det_of_mean_matrix", ln_avg);
    let gap_err = ((ln_avg - mean_int) - (ln_avg_c - mean_int_c)).abs();
    Ok(EnsembleResult { mean, stderr, ln_avg_vs_avg_ln: (ln_avg, mean_int), gap_quadrature_error: gap_err, samples, volume })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green_total;
    use crate::lamb::free_space_lamb_shift;
    use proptest::prelude::*;

    fn species(g: f64) -> DipoleSpecies {
        DipoleSpecies::new(g, 1e4).unwrap()
    }

    fn pair(d: f64, g: f64) -> DipoleConfiguration {
        DipoleConfiguration::new(vec![[0.0; 3], [d, 0.0, 0.0]], species(g), d, None).unwrap()
    }

    #[test]
    fn coupling_block_matches_green_dyad() {
        for (r, u) in [([0.3, -0.2, 0.5], 0.7), ([1.0, 2.0, -1.5], 2.5), ([0.01, 0.0, 0.02], 40.0)] {
            let g = green_total(r, C64::new(0.0, u)).unwrap();
            let blk = coupling_block(r, u);
            for i in 0..3 {
                for j in 0..3 {
                    let want = (-u * u) * g.0[(i, j)];
                    assert!(want.im.abs() < 1e-12 * want.re.abs().max(1.0));
                    assert!((blk[i][j] - want.re).abs() < 1e-12 * want.re.abs().max(1e-3), "{i}{j}: {} vs {}", blk[i][j], want.re);
                }
            }
        }
    }

    #[test]
    fn log_det_agrees_with_eigenvalues() {
        let mut a = DMatrix::<f64>::zeros(6, 6);
        for i in 0..6 {
            for j in 0..i {
                let v = 0.1 * ((i * 7 + j * 3) as f64).sin();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = (DMatrix::identity(6, 6) + &a).symmetric_eigenvalues();
        let want: f64 = eig.iter().map(|l| l.ln()).sum();
        assert!((ln_det_unit_plus(&a).unwrap() - want).abs() < 1e-14);
        // Tiny couplings: −Tr(A²)/2 without cancellation.
        let t = &a * 1e-9;
        let want = -0.5 * (&t * &t).trace();
        assert!((ln_det_unit_plus(&t).unwrap() / want - 1.0).abs() < 1e-8);
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 1.5, 0.0]);
        assert!(ln_det_unit_plus(&neg).is_none());
    }

    #[test]
    fn empty_and_single_dipole() {
        let sp = species(1e-6);
        let empty = DipoleConfiguration::new(vec![], sp, 0.1, None).unwrap();
        assert_eq!(config_vacuum_energy(&empty).unwrap().value, 0.0);
        let one = DipoleConfiguration::new(vec![[0.3, 0.1, 0.2]], sp, 0.1, None).unwrap();
        let e = config_vacuum_energy(&one).unwrap();
        let free = free_space_lamb_energy(1.0, &sp).unwrap();
        assert!((e.value - free.value).abs() <= 1e-12 * free.value.abs());
        let s = config_lamb_shift(&one, 0).unwrap();
        assert_eq!(s.value, free_space_lamb_shift(&sp).unwrap().value);
        assert!(config_lamb_shift(&one, 1).is_err());
    }

    fn slope(center: f64, g: f64) -> f64 {
        let pts: Vec<(f64, f64)> = [0.9, 0.95, 1.0, 1.05, 1.1]
            .iter()
            .map(|f| {
                let d = center * f;
                let (e, _) = interaction_energy(&pair(d, g)).unwrap();
                assert!(e < 0.0);
                (d.ln(), (-e).ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn london_and_casimir_polder_slopes() {
        let near = slope(0.01, 1e-8);
        assert!((near + 6.0).abs() < 0.06, "near-field slope {near}");
        let far = slope(20.0, 1e-8);
        assert!((far + 7.0).abs() < 0.14, "far-field slope {far}");
    }

    #[test]
    fn pair_energy_is_two_term_trace_at_leading_order() {
        let c = pair(0.2, 1e-8);
        let (e, _) = interaction_energy(&c).unwrap();
        let sp = &c.species;
        let r = c.separation(1, 0);
        let two = wick_integrate_to(
            |u| {
                let a = alpha_free_imag(u, sp)?;
                let k = coupling_block(r, u);
                let mut tr = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        tr += k[i][j] * k[j][i];
                    }
                }
                Ok(C64::new(-a * a * tr / (2.0 * PI), 0.0))
            },
            interaction_upper(&c),
            &interaction_spec(),
        )
        .unwrap();
        assert!((e / two.value.re - 1.0).abs() < 1e-10, "{e} vs {}", two.value.re);
    }

    #[test]
    fn per_dipole_shifts_are_not_additive() {
        // Leading order: each dipole carries the full pair energy.
        let weak = pair(0.2, 1e-8);
        let (u_pair, _) = interaction_energy(&weak).unwrap();
        let e0 = config_lamb_shift(&weak, 0).unwrap().breakdown["interaction"];
        let e1 = config_lamb_shift(&weak, 1).unwrap().breakdown["interaction"];
        assert!((e0 - e1).abs() < 1e-12 * e0.abs());
        assert!(((e0 + e1) / (2.0 * u_pair) - 1.0).abs() < 1e-8);
        assert!(((e0 + e1) / u_pair - 2.0).abs() < 1e-8);
        // Stronger coupling: the relation picks up higher orders.
        let strong = pair(0.02, 1e-6);
        let (u_pair, u_err) = interaction_energy(&strong).unwrap();
        let s0 = config_lamb_shift(&strong, 0).unwrap();
        let s1 = config_lamb_shift(&strong, 1).unwrap();
        let sum = s0.breakdown["interaction"] + s1.breakdown["interaction"];
        let margin = 10.0 * (u_err + s0.error_estimate + s1.error_estimate);
        assert!((sum - 2.0 * u_pair).abs() > margin, "{sum} vs {}", 2.0 * u_pair);
    }

    #[test]
    fn distant_pair_decouples() {
        let c = pair(100.0, 1e-8);
        let s = config_lamb_shift(&c, 0).unwrap();
        assert!(s.breakdown["interaction"].abs() < 1e-12 * s.breakdown["free_space"].abs());
    }

    #[test]
    fn rigid_motion_invariance() {
        let c = sample_hard_sphere(6, 0.05, 0.1, &species(1e-6), 3).unwrap().with_open_boundaries();
        let e = config_vacuum_energy(&c).unwrap().value;
        let moved = c.translated([0.37, -1.2, 2.5]);
        let (s, co) = (0.6f64.sin(), 0.6f64.cos());
        let rotated = c.transformed(&[[co, -s, 0.0], [s, co, 0.0], [0.0, 0.0, 1.0]]);
        for other in [moved, rotated] {
            let e2 = config_vacuum_energy(&other).unwrap().value;
            assert!((e2 - e).abs() <= 1e-12 * e.abs(), "{e} vs {e2}");
        }
    }

    #[test]
    fn table_round_trip() {
        let c = sample_hard_sphere(5, 0.02, 0.05, &species(1e-6), 9).unwrap();
        let back = DipoleConfiguration::from_table(&c.to_table(), species(1e-6)).unwrap();
        assert_eq!(back, c);
        assert!(c.to_table().starts_with("# xi=0.05 n=5\n"));
        assert!(DipoleConfiguration::from_table("# xi=1 n=2\n0 0 0\n", species(1e-6)).is_err());
        assert!(DipoleConfiguration::from_table("# xi=1 n=2\n0 0 0\n0.5 0 0\n", species(1e-6)).is_err());
    }

    #[test]
    fn sampler_contract() {
        let sp = species(1e-6);
        let c = sample_hard_sphere(64, 0.01, 0.05, &sp, 1).unwrap();
        assert_eq!(c.len(), 64);
        for i in 0..64 {
            for j in 0..i {
                assert!(norm(c.separation(i, j)) >= 0.05);
            }
        }
        assert_eq!(c, sample_hard_sphere(64, 0.01, 0.05, &sp, 1).unwrap());
        assert_ne!(c, sample_hard_sphere(64, 0.01, 0.05, &sp, 2).unwrap());
        let rho_bar = 0.5 * 6.0 / PI;
        assert!(matches!(sample_hard_sphere(64, rho_bar, 0.05, &sp, 1), Err(VacuaError::PackingTooDense(_))));
    }

    #[test]
    fn ensemble_needs_samples() {
        let m = MediumSpec::hard_sphere(0.01, 0.05).unwrap();
        let e = ensemble_average(8, &m, &species(1e-7), 1, 0);
        assert!(matches!(e, Err(VacuaError::InsufficientSamples { need: 16, got: 1 })));
    }

    #[test]
    fn ensemble_is_deterministic_and_ordered() {
        let m = MediumSpec::hard_sphere(0.05, 0.05).unwrap();
        let sp = species(1e-7);
        let a = ensemble_average(8, &m, &sp, 16, 11).unwrap();
        let b = ensemble_average(8, &m, &sp, 16, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.gap() > 0.0);
        assert!(a.mean.breakdown["interaction"] < 0.0);
        // Grid energies agree with adaptive quadrature sample by sample.
        let c = ensemble_sample(8, &m, &sp, 11, 3).unwrap();
        let (exact, _) = interaction_energy(&c).unwrap();
        assert!((a.samples[3] / exact - 1.0).abs() < 1e-6, "{} vs {exact}", a.samples[3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pair_energy_negative_and_monotone(d in 0.02f64..5.0) {
            let (e1, _) = interaction_energy(&pair(d, 1e-7)).unwrap();
            let (e2, _) = interaction_energy(&pair(d * 1.2, 1e-7)).unwrap();
            prop_assert!(e1 < 0.0);
            prop_assert!(e1 < e2);
        }
    }
}
