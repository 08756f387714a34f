mod checks;
mod report;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use vacua_core::config::{config_lamb_shift, config_vacuum_energy, ensemble_average, DipoleConfiguration, ENSEMBLE_GRID_NODES};
use vacua_core::effmedium::{
    bullough_obada_energy, chi_mg, electrostatic_binding_energy, ll_shift, mg_coupling, schwinger_energy, BindingMethod,
    EffectiveMedium, MaxwellGarnett, SchwingerMethod,
};
use vacua_core::lamb::{
    free_space_lamb_energy, free_space_lamb_shift, scattering_lamb_shift_rho1, vacuum_energy_qc, vacuum_energy_rho2, Recurrence,
};
use vacua_core::params::{DipoleSpecies, MediumSpec, ParamFile};
use vacua_core::phi::phi1_hs_split;
use vacua_core::polarizability::alpha_free_imag;
use vacua_core::{VacuaError, C64};

use report::{Format, Manifest, Report, Spectrum};

const DEFAULT_G: f64 = 1e-8;
const DEFAULT_ZETA0: f64 = 0.02;
const DEFAULT_RHO_BAR: f64 = 0.01;
const DEFAULT_CUTOFF: f64 = 1e5;

#[derive(Parser)]
#[command(name = "vacua", version, about = "Lamb shifts and vacuum energies of random dipolar media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Clone, Default)]
struct ParamArgs {
    /// Linewidth ratio Γ₀/ω₀.
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Exclusion diameter in units of c/ω₀.
    #[arg(long, global = true)]
    zeta0: Option<f64>,
    /// Reduced density ρ·(c/ω₀)³·ζ₀³.
    #[arg(long = "rho-bar", global = true)]
    rho_bar: Option<f64>,
    /// UV cutoff Λ/ω₀.
    #[arg(long, global = true)]
    cutoff: Option<f64>,
    /// Pair correlation model: hs or hs_overdensity.
    #[arg(long, global = true)]
    correlation: Option<String>,
    #[arg(long = "overdensity-c", global = true)]
    overdensity_c: Option<f64>,
    /// Flat key = value parameter file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Shorthand for --format json.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Also write the machine-readable report (JSON unless --format csv) here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SpectrumArgs {
    /// Emit the imaginary-frequency integrand as a table.
    #[arg(long)]
    spectrum: bool,
    #[arg(long, default_value_t = 1e-3)]
    u_min: f64,
    #[arg(long)]
    u_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecurrenceArg {
    None,
    Full,
}

impl From<RecurrenceArg> for Recurrence {
    fn from(r: RecurrenceArg) -> Self {
        match r {
            RecurrenceArg::None => Recurrence::NoRec,
            RecurrenceArg::Full => Recurrence::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchwingerArg {
    Plain,
    OrderRho2,
}

#[derive(Subcommand)]
enum Command {
    /// Free-space Lamb shift and energy density.
    LambFree,
    /// O(ρ) scattering Lamb shift of the hard-sphere medium.
    LambRho1 {
        #[arg(long, value_enum, default_value = "none")]
        recurrence: RecurrenceArg,
        #[command(flatten)]
        spectrum: SpectrumArgs,
    },
    /// O(ρ²) vacuum energy density.
    VacuumRho2 {
        #[arg(long, value_enum, default_value = "none")]
        recurrence: RecurrenceArg,
    },
    /// Quasicrystalline vacuum energy density.
    VacuumQc,
    /// Maxwell-Garnett binding, Lorentz-Lorenz and Bullough-Obada energies.
    Effmedium {
        /// Coupling ρμ² (overrides the density from rho_bar and zeta0).
        #[arg(long)]
        x: Option<f64>,
        #[command(flatten)]
        spectrum: SpectrumArgs,
    },
    /// Schwinger energy of the Maxwell-Garnett medium.
    Schwinger {
        #[arg(long, value_enum, default_value = "order-rho2")]
        method: SchwingerArg,
        #[arg(long)]
        x: Option<f64>,
    },
    /// Log-determinant energy of a position table.
    ConfigEnergy {
        #[arg(long)]
        positions: PathBuf,
        /// Also report the Lamb shift of this dipole.
        #[arg(long)]
        shift: Option<usize>,
    },
    /// Monte Carlo average over hard-sphere configurations.
    Ensemble {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Coefficient verification suite.
    Coefficients,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::LambFree => "lamb-free",
            Self::LambRho1 { .. } => "lamb-rho1",
            Self::VacuumRho2 { .. } => "vacuum-rho2",
            Self::VacuumQc => "vacuum-qc",
            Self::Effmedium { .. } => "effmedium",
            Self::Schwinger { .. } => "schwinger",
            Self::ConfigEnergy { .. } => "config-energy",
            Self::Ensemble { .. } => "ensemble",
            Self::Coefficients => "coefficients",
        }
    }
}

struct Resolved {
    file: ParamFile,
    species: DipoleSpecies,
    zeta0: f64,
    rho_bar: f64,
}

impl Resolved {
    fn medium(&self) -> vacua_core::Result<MediumSpec> {
        MediumSpec::new(self.rho_bar, self.zeta0, self.file.correlation_model()?)
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        p.insert("g".into(), json!(self.species.gamma_ratio));
        p.insert("cutoff".into(), json!(self.species.cutoff));
        p.insert("zeta0".into(), json!(self.zeta0));
        p.insert("rho_bar".into(), json!(self.rho_bar));
        p.insert("correlation".into(), json!(self.file.correlation.clone().unwrap_or_else(|| "hs".into())));
        p.insert("overdensity_c".into(), json!(self.file.overdensity_c.unwrap_or(0.0)));
        p
    }
}

fn resolve(args: &ParamArgs) -> vacua_core::Result<Resolved> {
    let mut file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| VacuaError::Format(format!("{}: {e}", path.display())))?;
            ParamFile::parse(&text)?
        }
        None => ParamFile::default(),
    };
    file.g = args.g.or(file.g);
    file.zeta0 = args.zeta0.or(file.zeta0);
    file.rho_bar = args.rho_bar.or(file.rho_bar);
    file.cutoff = args.cutoff.or(file.cutoff);
    file.correlation = args.correlation.clone().or(file.correlation);
    file.overdensity_c = args.overdensity_c.or(file.overdensity_c);
    let species = DipoleSpecies::new(file.g.unwrap_or(DEFAULT_G), file.cutoff.unwrap_or(DEFAULT_CUTOFF))?;
    Ok(Resolved {
        species,
        zeta0: file.zeta0.unwrap_or(DEFAULT_ZETA0),
        rho_bar: file.rho_bar.unwrap_or(DEFAULT_RHO_BAR),
        file,
    })
}

fn log_grid(args: &SpectrumArgs, default_max: f64) -> vacua_core::Result<Vec<f64>> {
    let hi = args.u_max.unwrap_or(default_max);
    if !(args.u_min > 0.0 && hi > args.u_min && args.points >= 2) {
        return Err(VacuaError::InvalidParameter {
            field: "spectrum",
            reason: format!("need 0 < u_min < u_max and at least 2 points, got [{}, {hi}] with {}", args.u_min, args.points),
        });
    }
    let r = (hi / args.u_min).ln() / (args.points - 1) as f64;
    Ok((0..args.points).map(|i| args.u_min * (r * i as f64).exp()).collect())
}

fn run(cli: &Cli) -> vacua_core::Result<Report> {
    let res = resolve(&cli.params)?;
    let mut manifest = Manifest {
        command: cli.command.name().into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        parameters: res.parameters(),
        seed: None,
        tolerances: BTreeMap::new(),
    };
    let sp = res.species;
    match &cli.command {
        Command::LambFree => {
            let mut r = Report::new(manifest);
            r.push("free_space_shift", free_space_lamb_shift(&sp)?);
            r.push("free_space_energy", free_space_lamb_energy(res.medium()?.rho(), &sp)?);
            Ok(r)
        }
        Command::LambRho1 { recurrence, spectrum } => {
            let m = res.medium()?;
            manifest.parameters.insert("recurrence".into(), json!(Recurrence::from(*recurrence)));
            let mut r = Report::new(manifest);
            r.push("shift_rho1", scattering_lamb_shift_rho1(&sp, &m, (*recurrence).into())?);
            if spectrum.spectrum {
                let (xi, rho) = (m.xi(), m.rho());
                let mut rows = Vec::new();
                for u in log_grid(spectrum, 10.0 / xi)? {
                    let a = alpha_free_imag(u, &sp)?;
                    let (p, q) = phi1_hs_split(C64::new(0.0, u), xi, C64::new(rho * a, 0.0))?;
                    let (near, rad) = (q.re * a / (2.0 * PI), p.re * a / (2.0 * PI));
                    rows.push(vec![u, near, rad, near + rad]);
                }
                r.spectrum = Some(Spectrum {
                    columns: vec!["u".into(), "near_field".into(), "radiative".into(), "total".into()],
                    units: vec!["omega0".into(), "hbar".into(), "hbar".into(), "hbar".into()],
                    rows,
                });
            }
            Ok(r)
        }
        Command::VacuumRho2 { recurrence } => {
            manifest.parameters.insert("recurrence".into(), json!(Recurrence::from(*recurrence)));
            let mut r = Report::new(manifest);
            r.push("energy_rho2", vacuum_energy_rho2(&sp, &res.medium()?, (*recurrence).into())?);
            Ok(r)
        }
        Command::VacuumQc => {
            let mut r = Report::new(manifest);
            r.push("energy_qc", vacuum_energy_qc(&sp, &res.medium()?)?);
            Ok(r)
        }
        Command::Effmedium { x, spectrum } => {
            let rho = match x {
                Some(x) => x / sp.mu2(),
                None => res.medium()?.rho(),
            };
            manifest.parameters.insert("rho".into(), json!(rho));
            let mut r = Report::new(manifest);
            r.value("coupling_x", mg_coupling(rho, &sp));
            r.value("ll_shift", ll_shift(rho, &sp)?);
            r.push("electrostatic_binding", electrostatic_binding_energy(rho, &sp, BindingMethod::ClosedForm)?);
            r.push("bullough_obada", bullough_obada_energy(rho, &sp)?);
            if spectrum.spectrum {
                let mg = MaxwellGarnett::new(rho, sp)?;
                let mut rows = Vec::new();
                for u in log_grid(spectrum, 100.0)? {
                    let chi = chi_mg(C64::new(0.0, u), rho, &sp)?.re;
                    rows.push(vec![u, chi, mg.n_imag(u)?, 1.0 + chi / 3.0]);
                }
                r.spectrum = Some(Spectrum {
                    columns: vec!["u".into(), "chi".into(), "n".into(), "lorentz_factor".into()],
                    units: vec!["omega0".into(), "1".into(), "1".into(), "1".into()],
                    rows,
                });
            }
            Ok(r)
        }
        Command::Schwinger { method, x } => {
            let rho = match x {
                Some(x) => x / sp.mu2(),
                None => res.medium()?.rho(),
            };
            manifest.parameters.insert("rho".into(), json!(rho));
            let mg = MaxwellGarnett::new(rho, sp)?;
            let m = match method {
                SchwingerArg::Plain => SchwingerMethod::Plain { cutoff: sp.cutoff },
                SchwingerArg::OrderRho2 => SchwingerMethod::OrderRho2 { cutoff: sp.cutoff },
            };
            let mut r = Report::new(manifest);
            r.push("schwinger", schwinger_energy(&mg, m)?);
            Ok(r)
        }
        Command::ConfigEnergy { positions, shift } => {
            let c = DipoleConfiguration::read(positions, sp)?;
            manifest.parameters.insert("n".into(), json!(c.len()));
            manifest.parameters.insert("xi".into(), json!(c.xi));
            manifest.parameters.insert("positions".into(), json!(positions.display().to_string()));
            let mut r = Report::new(manifest);
            r.push("config_energy", config_vacuum_energy(&c)?);
            if let Some(i) = shift {
                r.push(&format!("lamb_shift_{i}"), config_lamb_shift(&c, *i)?);
            }
            Ok(r)
        }
        Command::Ensemble { n, samples, seed } => {
            let m = res.medium()?;
            manifest.parameters.insert("n".into(), json!(n));
            manifest.parameters.insert("samples".into(), json!(samples));
            manifest.seed = Some(*seed);
            manifest.tolerances.insert("grid_nodes".into(), ENSEMBLE_GRID_NODES as f64);
            let e = ensemble_average(*n, &m, &sp, *samples, *seed)?;
            let mut r = Report::new(manifest);
            r.value("stderr", e.stderr);
            r.value("ln_det_of_mean", e.ln_avg_vs_avg_ln.0);
            r.value("mean_of_ln_det", e.ln_avg_vs_avg_ln.1);
            r.value("gap", e.gap());
            r.value("gap_quadrature_error", e.gap_quadrature_error);
            r.push("ensemble_mean", e.mean);
            Ok(r)
        }
        Command::Coefficients => {
            manifest.tolerances.insert("relative".into(), checks::TOL);
            manifest.tolerances.insert("ll_relative".into(), checks::LL_TOL);
            let mut r = Report::new(manifest);
            r.checks = checks::coefficient_checks()?;
            Ok(r)
        }
    }
}

fn fail(e: &VacuaError) -> ExitCode {
    eprintln!("error[{}]: {e}", e.name());
    ExitCode::from(if e.is_parameter_error() { 2 } else { 3 })
}

fn configure_threads() -> Result<(), VacuaError> {
    let Ok(v) = std::env::var("VACUA_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| VacuaError::InvalidParameter { field: "VACUA_THREADS", reason: format!("expected a positive integer, got `{v}`") })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| VacuaError::InvalidParameter { field: "VACUA_THREADS", reason: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    let format = if cli.output.json { Format::Json } else { cli.output.format.unwrap_or(Format::Text) };
    let start = Instant::now();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    print!("{}", report.render(format));
    if let Some(path) = &cli.output.out {
        let file_format = if format == Format::Csv { Format::Csv } else { Format::Json };
        if let Err(e) = std::fs::write(path, report.render(file_format)) {
            return fail(&VacuaError::Format(format!("{}: {e}", path.display())));
        }
    }
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::SUCCESS
}
