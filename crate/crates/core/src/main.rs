use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phaseless_lattice::cli::{
    converge_table, generate_samples, recover_samples, run_converge, run_suite, suite_table, write_converge_csv,
    write_recovered_csv, Experiment, ExperimentConfig,
};
use phaseless_lattice::dispersion::gamma_of_omega;
use phaseless_lattice::forward::{FreeWaves, IncidentWave};
use phaseless_lattice::green::{default_ladder, green_extrapolated, GreenConfig, GreenEvaluator};
use phaseless_lattice::lattice::{check_energy, Direction, LatticePoint};
use phaseless_lattice::phaseless::{read_samples_csv, write_samples_csv};

#[derive(Parser)]
#[command(
    name = "phaseless",
    version,
    about = "Lattice scattering and phaseless recovery experiments"
)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (directory for `suite`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Fermi-surface point γ(ω, E) and support value μ(ω, E).
    Dispersion {
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        energy: f64,
        /// Direction as comma-separated components; repeatable.
        #[arg(long, required = true, allow_hyphen_values = true)]
        omega: Vec<String>,
    },
    /// Lattice Green's function G(x; E + iε).
    Green {
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        energy: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Lattice point as comma-separated integers; repeatable.
        #[arg(long, required = true, allow_hyphen_values = true)]
        x: Vec<String>,
        /// Approach ε → 0 along an absorption ladder instead.
        #[arg(long)]
        extrapolate: bool,
        /// Comma-separated decreasing ladder for --extrapolate.
        #[arg(long)]
        ladder: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Solves the forward problem of --config and writes its phaseless samples.
    Forward,
    /// Recovers f⁺ from a phaseless-sample CSV, using the geometry of --config.
    Recover {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Runs the convergence study of --config.
    Converge,
    /// Runs every config in a directory; exit code 0 (pass), 1 (fail), 2 (invalid).
    Suite { dir: PathBuf },
}

fn parse_list<T: std::str::FromStr>(s: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("cannot parse {p:?} in {s:?}"))
        })
        .collect()
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| p.display().to_string())?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> anyhow::Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this subcommand");
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct DispersionRow {
    omega: Vec<f64>,
    gamma: Vec<f64>,
    mu: f64,
    kkt_residual: f64,
    outgoing: Vec<f64>,
}

fn dispersion(cli: &Cli, dim: usize, energy: f64, omegas: &[String]) -> anyhow::Result<()> {
    let e = check_energy(energy, dim)?;
    let free = FreeWaves::resolve(e)?;
    eprintln!("{}", free.describe());
    let mut rows = vec![];
    for w in omegas {
        let omega = Direction::new(parse_list(w)?)?;
        let p = gamma_of_omega(&omega, &e)?;
        rows.push(DispersionRow {
            omega: omega.components().to_vec(),
            gamma: p.gamma,
            mu: p.mu,
            kkt_residual: p.kkt_residual,
            outgoing: free.outgoing_point(&omega)?,
        });
    }
    if cli.format == Format::Json {
        return write_json(&cli.out, &rows);
    }
    let mut w = csv::Writer::from_writer(sink(&cli.out)?);
    let mut header: Vec<String> = (0..dim).map(|i| format!("omega_{i}")).collect();
    header.extend((0..dim).map(|i| format!("gamma_{i}")));
    header.extend(["mu".into(), "kkt_residual".into()]);
    header.extend((0..dim).map(|i| format!("outgoing_{i}")));
    w.write_record(&header)?;
    for r in &rows {
        let mut rec: Vec<String> = r.omega.iter().chain(&r.gamma).map(|v| v.to_string()).collect();
        rec.push(r.mu.to_string());
        rec.push(r.kkt_residual.to_string());
        rec.extend(r.outgoing.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GreenRow {
    x: Vec<i64>,
    re: f64,
    im: f64,
    /// Defect at x for direct evaluation, error estimate for extrapolation.
    check: f64,
}

#[allow(clippy::too_many_arguments)]
fn green(
    cli: &Cli,
    dim: usize,
    energy: f64,
    eps: f64,
    xs: &[String],
    extrapolate: bool,
    ladder: &Option<String>,
    tol: f64,
) -> anyhow::Result<()> {
    let e = check_energy(energy, dim)?;
    let config = GreenConfig { verify: true, tol };
    let points: Vec<LatticePoint> = xs
        .iter()
        .map(|x| {
            let c: Vec<i64> = parse_list(x)?;
            if c.len() != dim {
                bail!("{x:?} does not have {dim} coordinates");
            }
            Ok(LatticePoint::new(c))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut rows = vec![];
    if extrapolate {
        let ladder = match ladder {
            Some(l) => parse_list(l)?,
            None => default_ladder(),
        };
        for x in &points {
            let r = green_extrapolated(x, &e, &ladder, &config)?;
            rows.push(GreenRow {
                x: x.coords().to_vec(),
                re: r.value.re,
                im: r.value.im,
                check: r.error_estimate,
            });
        }
    } else {
        let g = GreenEvaluator::new(e, eps, config)?;
        for x in &points {
            let v = g.value(x)?;
            rows.push(GreenRow {
                x: x.coords().to_vec(),
                re: v.re,
                im: v.im,
                check: g.defect(x)?,
            });
        }
    }
    if cli.format == Format::Json {
        return write_json(&cli.out, &rows);
    }
    let mut w = csv::Writer::from_writer(sink(&cli.out)?);
    let mut header: Vec<String> = (0..dim).map(|i| format!("x_{i}")).collect();
    header.extend(
        [
            "re",
            "im",
            if extrapolate {
                "error_estimate"
            } else {
                "defect_residual"
            },
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in &rows {
        let mut rec: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        rec.extend([r.re, r.im, r.check].map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn forward(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let exp = Experiment::setup(&cfg)?;
    eprintln!(
        "{}; linear residual {:e}",
        exp.free.describe(),
        exp.solution.linear_residual()
    );
    let samples = generate_samples(&cfg, &exp)?;
    match cli.format {
        Format::Json => write_json(&cli.out, &samples),
        Format::Csv => Ok(write_samples_csv(sink(&cli.out)?, &samples)?),
    }
}

fn recover(cli: &Cli, samples: &Path) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    cfg.validate()?;
    let tol = cfg.tolerances.with_env()?;
    let free = FreeWaves::resolve(cfg.energy()?)?;
    let incident = IncidentWave::along(&Direction::new(cfg.incident.clone())?, &free)?;
    let file = File::open(samples).with_context(|| samples.display().to_string())?;
    let samples = read_samples_csv(file, incident.k())?;
    let rows = recover_samples(&samples, &free, cfg.method, &tol)?;
    let rejected = rows.iter().filter(|r| r.rejected).count();
    if rejected > 0 {
        eprintln!("{rejected} of {} recoveries rejected", rows.len());
    }
    match cli.format {
        Format::Json => write_json(&cli.out, &rows),
        Format::Csv => Ok(write_recovered_csv(sink(&cli.out)?, cfg.dim, &rows)?),
    }
}

fn converge(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = load_config(cli)?;
    let report = run_converge(&cfg)?;
    eprint!("{}", converge_table(&report));
    match (&cli.out, cli.format) {
        (None, _) if cfg.output.csv.is_some() || cfg.output.json.is_some() => {
            if let Some(p) = &cfg.output.csv {
                write_converge_csv(File::create(p).with_context(|| p.display().to_string())?, &report)?;
            }
            if let Some(p) = &cfg.output.json {
                write_json(&Some(p.clone()), &report)?;
            }
        }
        (_, Format::Json) => write_json(&cli.out, &report)?,
        (_, Format::Csv) => write_converge_csv(sink(&cli.out)?, &report)?,
    }
    Ok(report.passed)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Dispersion { dim, energy, omega } => dispersion(cli, *dim, *energy, omega)?,
        Command::Green {
            dim,
            energy,
            eps,
            x,
            extrapolate,
            ladder,
            tol,
        } => green(cli, *dim, *energy, *eps, x, *extrapolate, ladder, *tol)?,
        Command::Forward => forward(cli)?,
        Command::Recover { samples } => recover(cli, samples)?,
        Command::Converge => {
            if !converge(cli)? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Suite { dir } => {
            let summary = run_suite(dir, cli.out.as_deref());
            print!("{}", suite_table(&summary));
            return Ok(ExitCode::from(summary.exit_code as u8));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
