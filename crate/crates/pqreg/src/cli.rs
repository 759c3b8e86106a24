//! Command line surface. Exit codes: 0 when every check passes, 1 when a
//! check fails or a solve does not converge, 2 on usage or configuration
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use pqreg_core::estimates::{exact_schedule, lipschitz_budget, moser_schedule, sobolev_exponent};
use pqreg_core::phase::{check_table1, format_table_text, render_table, Rational, TableCell};
use pqreg_core::Error as CoreError;
use serde::Serialize;

use crate::config::{
    BoundaryConfig, ConfigError, ExperimentConfig, FieldFormat, IntegrandConfig,
};
use crate::experiments::{self, Check, ExperimentError};
use crate::io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pqreg", version, about = "Regularized (p,q)-growth minimizers and their a priori estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One regularized minimization with its checks.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the solution field here (`.bin` selects the binary format).
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// σ-sweep with energy chain, sup-gradient and Cauchy checks.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Caccioppoli and higher-integrability reports over the α and β lists.
    Caccioppoli {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        beta: Option<Vec<f64>>,
        /// Cutoff radii `r,R`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        cutoff: Option<Vec<f64>>,
    },
    /// Moser exponent schedule and Lipschitz budget.
    Moser {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long = "N")]
        n_dim: u32,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        /// Sobolev exponent for N = 2.
        #[arg(long)]
        two_star: Option<f64>,
        #[arg(long = "R0", default_value_t = 1.0)]
        outer_radius: f64,
        #[arg(long, default_value_t = 1.0)]
        sup_u: f64,
        #[arg(long)]
        json: bool,
    },
    /// Admissible ranges of q (Table 1 by default).
    Phase {
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
        /// Compare against the embedded copy of Table 1; exit 1 on mismatch.
        #[arg(long)]
        check_table1: bool,
        #[arg(long, value_delimiter = ',', default_values_t = [2i64, 3, 4])]
        p: Vec<i64>,
        #[arg(long = "N", value_delimiter = ',', default_values_t = [2u32, 3, 4, 5, 6, 7])]
        n_dim: Vec<u32>,
    },
    /// Classification of the (2, 4) Hong integrand, with an N = 2 solve.
    Hong {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", value_delimiter = ',', default_values_t = [2u32, 3, 4, 5, 6, 7])]
        n_dim: Vec<u32>,
    },
    /// Grid refinement study.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegrandArg {
    Anisotropic,
    Hong,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Affine,
    Trig,
    Saddle,
}

/// Flags shared by the grid-based subcommands; each overrides the matching
/// config-file entry.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file (`config_version: 1`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub integrand: Option<IntegrandArg>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub boundary: Option<BoundaryArg>,
    /// Affine slope `a1,a2`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub slope: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub offset: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub amplitude: Option<f64>,
    /// Trigonometric frequencies `w1,w2`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub frequencies: Option<Vec<f64>>,
    /// Nodes per side (odd).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for JSON/CSV reports and field dumps.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Print the JSON report instead of the text summary.
    #[arg(long)]
    pub json: bool,
}

fn two(v: &[f64], what: &str) -> Result<[f64; 2], ConfigError> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(ConfigError::Invalid(format!("{what} needs two values"))),
    }
}

impl Common {
    /// Config file (or defaults) with flag overrides applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(kind) = self.integrand {
            cfg.integrand = match kind {
                IntegrandArg::Anisotropic => IntegrandConfig::AnisotropicPower {
                    p: self.p.unwrap_or(2.0),
                    q: self.q.unwrap_or(3.0),
                },
                IntegrandArg::Hong => IntegrandConfig::Hong,
                IntegrandArg::Quadratic => IntegrandConfig::Quadratic,
            };
        } else if let IntegrandConfig::AnisotropicPower { p, q } = &mut cfg.integrand {
            *p = self.p.unwrap_or(*p);
            *q = self.q.unwrap_or(*q);
        }
        if let Some(kind) = self.boundary {
            cfg.boundary = match kind {
                BoundaryArg::Affine => BoundaryConfig::Affine {
                    slope: [1.0, 0.0],
                    offset: 0.0,
                },
                BoundaryArg::Trig => ExperimentConfig::default().boundary,
                BoundaryArg::Saddle => BoundaryConfig::Saddle,
            };
        }
        match &mut cfg.boundary {
            BoundaryConfig::Affine { slope, offset } => {
                if let Some(s) = &self.slope {
                    *slope = two(s, "--slope")?;
                }
                *offset = self.offset.unwrap_or(*offset);
            }
            BoundaryConfig::Trig {
                amplitude,
                frequencies,
            } => {
                if let Some(f) = &self.frequencies {
                    *frequencies = two(f, "--frequencies")?;
                }
                *amplitude = self.amplitude.unwrap_or(*amplitude);
            }
            BoundaryConfig::Saddle => {}
        }
        cfg.grid.n = self.n.unwrap_or(cfg.grid.n);
        cfg.grid.half_width = self.half_width.unwrap_or(cfg.grid.half_width);
        if let Some(s) = &self.sigma {
            cfg.sigma = s.clone();
        }
        if let Some(e) = &self.epsilon {
            cfg.epsilon = e.clone();
        }
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = Some(dir.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        let core = match self {
            CliError::Config(_) | CliError::Experiment(ExperimentError::Config(_)) => {
                return EXIT_USAGE
            }
            CliError::Core(e) | CliError::Experiment(ExperimentError::Core(e)) => e,
            CliError::Io(_) => return EXIT_CHECK_FAILED,
        };
        match core {
            CoreError::InvalidInput(_) | CoreError::OutOfRange(_) | CoreError::UnsupportedRegime { .. } => {
                EXIT_USAGE
            }
            CoreError::NonConvergence { .. } | CoreError::NumericalBlowup { .. } => {
                EXIT_CHECK_FAILED
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn print_checks(out: &mut dyn Write, checks: &[Check]) -> std::io::Result<()> {
    for c in checks {
        writeln!(
            out,
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::IoError::from)?;
    writeln!(out)?;
    Ok(())
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<Option<PathBuf>, CliError> {
    match &cfg.output.dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.join(name)))
        }
        None => Ok(None),
    }
}

fn save_json<T: Serialize>(cfg: &ExperimentConfig, name: &str, value: &T) -> Result<(), CliError> {
    if let Some(path) = out_path(cfg, name)? {
        io::write_json(value, &path)?;
    }
    Ok(())
}

fn save_csv(cfg: &ExperimentConfig, name: &str, table: &io::CsvTable) -> Result<(), CliError> {
    if let Some(path) = out_path(cfg, name)? {
        table.save(&path)?;
    }
    Ok(())
}

fn execute(command: Command, out: &mut dyn Write) -> Result<bool, CliError> {
    match command {
        Command::Solve { common, field_out } => {
            let cfg = common.resolve()?;
            let (sol, report) = experiments::run_solve(&cfg)?;
            if common.json {
                emit_json(out, &report)?;
            } else {
                writeln!(
                    out,
                    "{} σ={} n={} L={}: energy {:?}, residual {:.3e} after {} iterations",
                    report.integrand,
                    report.sigma,
                    report.n,
                    report.half_width,
                    report.energy,
                    report.residual,
                    report.iterations
                )?;
                if let Some(e) = report.affine_energy {
                    writeln!(out, "area·f_σ(a) = {e:?}")?;
                }
                print_checks(out, &report.checks)?;
            }
            save_json(&cfg, "solve.json", &report)?;
            let binary_default = cfg.output.field_format == FieldFormat::Binary;
            if let Some(path) = field_out {
                let binary = path.extension().is_some_and(|e| e == "bin");
                io::save_field(&sol.field, &path, binary)?;
            } else if let Some(path) =
                out_path(&cfg, if binary_default { "field.bin" } else { "field.csv" })?
            {
                io::save_field(&sol.field, &path, binary_default)?;
            }
            Ok(report.pass())
        }
        Command::Sweep { common } => {
            let cfg = common.resolve()?;
            let mut reports = Vec::new();
            for &eps in &cfg.epsilon {
                reports.push(experiments::run_sigma_sweep(&cfg, eps)?);
            }
            if common.json {
                emit_json(out, &reports)?;
            } else {
                for r in &reports {
                    writeln!(out, "ε = {} ({} on {}² grid)", r.epsilon, r.integrand, r.n)?;
                    write!(out, "{}", r.to_csv().render())?;
                    print_checks(out, &r.checks)?;
                }
            }
            save_json(&cfg, "sweep.json", &reports)?;
            let mut table = io::CsvTable::new(Vec::new());
            for r in &reports {
                let t = r.to_csv();
                table.header = t.header;
                table.rows.extend(t.rows);
            }
            save_csv(&cfg, "sweep.csv", &table)?;
            Ok(reports.iter().all(|r| r.pass()))
        }
        Command::Caccioppoli {
            common,
            alpha,
            beta,
            cutoff,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(b) = beta {
                cfg.beta = b;
            }
            if let Some(c) = cutoff {
                let [inner, outer] = two(&c, "--cutoff")?;
                cfg.radii.inner = inner;
                cfg.radii.outer = outer;
            }
            cfg.validate()?;
            let report = experiments::run_estimates(&cfg)?;
            if common.json {
                emit_json(out, &report)?;
            } else {
                write!(out, "{}", report.to_csv().render())?;
                for row in &report.rows {
                    for h in &row.higher_integrability {
                        writeln!(
                            out,
                            "σ={} β={}: ∫|∇u|^(p+β) = {:.6e}, bracket (unit constant) = {:.6e}",
                            row.sigma, h.beta, h.left, h.bracket
                        )?;
                    }
                }
                if let Some(note) = &report.note {
                    writeln!(out, "{note}")?;
                }
                print_checks(out, &report.checks)?;
            }
            save_json(&cfg, "estimates.json", &report)?;
            save_csv(&cfg, "caccioppoli.csv", &report.to_csv())?;
            Ok(report.pass())
        }
        Command::Moser {
            p,
            q,
            n_dim,
            n_max,
            two_star,
            outer_radius,
            sup_u,
            json,
        } => moser(out, p, q, n_dim, n_max, two_star, outer_radius, sup_u, json),
        Command::Phase {
            format,
            check_table1: check,
            p,
            n_dim,
        } => phase(out, format, check, &p, &n_dim),
        Command::Hong { common, n_dim } => {
            let cfg = common.resolve()?;
            let report = experiments::run_hong_experiment(&n_dim, &cfg)?;
            if common.json {
                emit_json(out, &report)?;
            } else {
                for r in &report.rows {
                    let c = &r.classification;
                    writeln!(
                        out,
                        "N={}: threshold {}, bounded {}, unbounded risk {}, Lipschitz (q < p+2 ∧ bounded) {}",
                        r.n_dim,
                        r.threshold.as_deref().unwrap_or("none"),
                        c.bounded_by_hs,
                        c.unbounded_risk,
                        c.lipschitz_by_paper
                    )?;
                }
                print_checks(out, &report.checks)?;
            }
            save_json(&cfg, "hong.json", &report)?;
            Ok(report.pass())
        }
        Command::Refine { common, sizes } => {
            let cfg = common.resolve()?;
            let sizes = sizes.unwrap_or_else(|| cfg.grid_sizes.clone());
            let report = experiments::run_refinement_study(&cfg, &sizes)?;
            let checks = report.checks();
            if common.json {
                emit_json(out, &report)?;
            } else {
                write!(out, "{}", report.to_csv().render())?;
                print_checks(out, &checks)?;
            }
            save_json(&cfg, "refine.json", &report)?;
            save_csv(&cfg, "refine.csv", &report.to_csv())?;
            Ok(experiments::all_pass(&checks))
        }
    }
}

/// Exact fraction when it is short, otherwise `None`.
fn short_fraction(r: &BigRational) -> Option<String> {
    let s = r.to_string();
    (s.len() <= 12).then_some(s)
}

#[derive(Serialize)]
struct MoserOutput {
    schedule: pqreg_core::MoserSchedule,
    limit_exponent_exact: Option<String>,
    limit_ratio_at_n_max: f64,
    budget: Option<pqreg_core::LipschitzBudget>,
    budget_note: Option<String>,
    checks: Vec<Check>,
}

#[allow(clippy::too_many_arguments)]
fn moser(
    out: &mut dyn Write,
    p: f64,
    q: f64,
    n_dim: u32,
    n_max: usize,
    two_star: Option<f64>,
    outer_radius: f64,
    sup_u: f64,
    json: bool,
) -> Result<bool, CliError> {
    let schedule = moser_schedule(p, q, n_dim, n_max, two_star)?;
    let exact_two_star = match two_star {
        Some(v) if n_dim == 2 => BigRational::from_float(v),
        _ => sobolev_exponent(n_dim, None).ok().map(|r| {
            BigRational::new((*r.numer()).into(), (*r.denom()).into())
        }),
    };
    let limit_exponent_exact = match (
        exact_two_star,
        BigRational::from_float(p),
        BigRational::from_float(q),
    ) {
        (Some(t), Some(p), Some(q)) => {
            let ex = exact_schedule(&p, &q, &t, 0);
            ex.diverges()
                .then(|| short_fraction(&ex.divergence_margin.recip()))
                .flatten()
        }
        _ => None,
    };
    let (budget, budget_note) = match lipschitz_budget(&schedule, outer_radius, sup_u) {
        Ok(b) => (Some(b), None),
        Err(e @ CoreError::UnsupportedRegime { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let limit_ratio_at_n_max = schedule.limit_ratio(n_max).unwrap_or(f64::NAN);
    let checks = vec![Check::new(
        "closed_form_equals_recurrence",
        schedule.exact_identity,
        format!("exact rational comparison for n ≤ {n_max}"),
    )];
    let result = MoserOutput {
        limit_exponent_exact,
        limit_ratio_at_n_max,
        budget,
        budget_note,
        checks,
        schedule,
    };
    if json {
        emit_json(out, &result)?;
    } else {
        let s = &result.schedule;
        writeln!(out, "p = {p}, q = {q}, N = {n_dim}, 2* = {}", s.two_star)?;
        writeln!(out, "α₀ = {}", s.alpha0)?;
        let shown: Vec<String> = s.alphas.iter().take(6).map(|a| a.to_string()).collect();
        writeln!(out, "α_n = {}, ...", shown.join(", "))?;
        match &result.limit_exponent_exact {
            Some(frac) => writeln!(out, "limit exponent = {frac} ({})", s.limit_exponent)?,
            None => writeln!(out, "limit exponent = {}", s.limit_exponent)?,
        }
        writeln!(out, "α_n → ∞: {}", s.diverges)?;
        writeln!(
            out,
            "(2*/2)^n/(α_n+q) at n = {n_max}: {:.12}",
            result.limit_ratio_at_n_max
        )?;
        writeln!(
            out,
            "observations at n = {n_max}: {:.6e}, {:.6e}, {:.6e}",
            s.observations[0], s.observations[1], s.observations[2]
        )?;
        match (&result.budget, &result.budget_note) {
            (Some(b), _) => writeln!(
                out,
                "Γ₁ = {:.6e}, bound (Γ₁+1)^{:.6} = {:.6e} (up to constant)",
                b.gamma1, b.final_exponent, b.bound_up_to_constant
            )?,
            (None, Some(note)) => writeln!(out, "budget: {note}")?,
            _ => {}
        }
        print_checks(out, &result.checks)?;
    }
    Ok(experiments::all_pass(&result.checks))
}

fn table_csv(cells: &[TableCell]) -> String {
    let mut t = io::CsvTable::new(vec!["p", "N", "criterion", "upper", "closed", "text", "shaded"]);
    for c in cells {
        t.push(vec![
            c.p.to_string(),
            c.n_dim.to_string(),
            c.criterion.to_string(),
            c.interval
                .upper
                .value()
                .map_or_else(|| "inf".to_string(), |v| v.to_string()),
            c.interval.upper.is_closed().to_string(),
            c.text.clone(),
            c.shaded.to_string(),
        ]);
    }
    t.render()
}

fn phase(
    out: &mut dyn Write,
    format: TableFormat,
    check: bool,
    p_list: &[i64],
    n_list: &[u32],
) -> Result<bool, CliError> {
    let cells = if check {
        let c = check_table1();
        for m in c.cells.iter().filter(|m| !m.matches) {
            writeln!(
                out,
                "MISMATCH p={} N={} {}: expected {:?}{}, rendered {:?}{}",
                m.expected.p,
                m.expected.n_dim,
                m.expected.criterion,
                m.expected.text,
                if m.expected.shaded { " (shaded)" } else { "" },
                m.actual.text,
                if m.actual.shaded { " (shaded)" } else { "" },
            )?;
        }
        let pass = c.pass();
        let cells: Vec<TableCell> = c.cells.into_iter().map(|m| m.actual).collect();
        write_table(out, format, &cells)?;
        if format == TableFormat::Text {
            writeln!(
                out,
                "{} Table 1: {} cells compared",
                if pass { "PASS" } else { "FAIL" },
                cells.len()
            )?;
        }
        return Ok(pass);
    } else {
        let p: Vec<Rational> = p_list.iter().map(|&v| Rational::from_integer(v)).collect();
        render_table(&p, n_list)?
    };
    write_table(out, format, &cells)?;
    Ok(true)
}

fn write_table(out: &mut dyn Write, format: TableFormat, cells: &[TableCell]) -> Result<(), CliError> {
    match format {
        TableFormat::Text => write!(out, "{}", format_table_text(cells))?,
        TableFormat::Csv => write!(out, "{}", table_csv(cells))?,
        TableFormat::Json => emit_json(out, &cells)?,
    }
    Ok(())
}

/// Default location for field dumps relative to an output directory.
pub fn field_path(dir: &Path, binary: bool) -> PathBuf {
    dir.join(if binary { "field.bin" } else { "field.csv" })
}
