use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpgstar::acoustics::{AcousticsConfig, Goal, TestNorm};
use dpgstar::experiments;
use dpgstar::lsq;
use dpgstar::solver::{Discretization, Method};
use dpgstar::spaces::TestFamily;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IDENTITY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dpgstar",
    version,
    about = "DPG and DPG* experiments for time-harmonic acoustics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DPG and DPG* errors for dp = 0..dp-max on a fixed mesh.
    Table1(Opts),
    /// Uniform h-refinement study; nx doubles from 2 up to --nx.
    Hconv(Opts),
    /// Random-system identity suite and PDE-level invariant checks (JSON).
    Identities(Opts),
    /// One solve sampled on a uniform grid.
    Solve(Opts),
    /// DPG* with scaled graph norms against weakly conforming least squares.
    LsqCompare(Opts),
}

#[derive(Args, Clone)]
struct Opts {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    dp: Option<usize>,
    #[arg(long)]
    dp_max: Option<usize>,
    #[arg(long)]
    wavelengths: Option<f64>,
    #[arg(long, default_value_t = 40.0)]
    angle_deg: f64,
    /// graph, math or scaled:<alpha>
    #[arg(long, default_value = "graph", value_parser = parse_norm)]
    norm: TestNorm,
    #[arg(long, value_enum, default_value_t = MethodArg::Dpg)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = GoalArg::Manufactured)]
    goal: GoalArg,
    /// Comma-separated, strictly descending.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 101)]
    sample_grid: usize,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Rt)]
    test_family: FamilyArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum MethodArg {
    #[default]
    Dpg,
    Dpgstar,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum GoalArg {
    #[default]
    Manufactured,
    UniformPressure,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum FamilyArg {
    #[default]
    Rt,
    Tensor,
}

fn parse_norm(s: &str) -> Result<TestNorm, String> {
    match s {
        "graph" => Ok(TestNorm::AdjointGraph),
        "math" => Ok(TestNorm::Mathematician),
        _ => {
            let a = s
                .strip_prefix("scaled:")
                .ok_or_else(|| format!("expected graph, math or scaled:<alpha>, got {s:?}"))?;
            let a: f64 = a.parse().map_err(|_| format!("bad alpha in {s:?}"))?;
            if a > 0.0 && a.is_finite() {
                Ok(TestNorm::ScaledGraph(a))
            } else {
                Err(format!("alpha must be positive, got {a}"))
            }
        }
    }
}

enum Failure {
    Validation(String),
    Numerical(String),
    Identity,
    Io(String),
}

impl From<dpgstar::Error> for Failure {
    fn from(e: dpgstar::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn invalid(flag: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Validation(format!("--{flag}: {msg}"))
}

/// Per-command defaults for flags left unset.
struct Defaults {
    p: usize,
    dp: usize,
    wavelengths: f64,
}

impl Opts {
    fn config(&self, d: &Defaults) -> Result<AcousticsConfig, Failure> {
        let wavelengths = self.wavelengths.unwrap_or(d.wavelengths);
        if !(wavelengths > 0.0 && wavelengths.is_finite()) {
            return Err(invalid(
                "wavelengths",
                format!("must be positive, got {wavelengths}"),
            ));
        }
        if !(0.0..360.0).contains(&self.angle_deg) {
            return Err(invalid(
                "angle-deg",
                format!("must lie in [0, 360), got {}", self.angle_deg),
            ));
        }
        let p = self.p.unwrap_or(d.p);
        if p == 0 {
            return Err(invalid("p", "must be at least 1"));
        }
        let family = match self.test_family {
            FamilyArg::Rt => TestFamily::RaviartThomas,
            FamilyArg::Tensor => TestFamily::Tensor,
        };
        Ok(
            AcousticsConfig::new(wavelengths, self.angle_deg, p, self.dp.unwrap_or(d.dp))
                .with_norm(self.norm)
                .with_test_family(family),
        )
    }

    fn mesh(&self, default: usize) -> Result<(usize, usize), Failure> {
        let nx = self.nx.unwrap_or(default);
        let ny = self.ny.unwrap_or(nx);
        if nx == 0 {
            return Err(invalid("nx", "must be at least 1"));
        }
        if ny == 0 {
            return Err(invalid("ny", "must be at least 1"));
        }
        Ok((nx, ny))
    }

    fn dp_range(&self, default_max: usize) -> Vec<usize> {
        match self.dp {
            Some(dp) => vec![dp],
            None => (0..=self.dp_max.unwrap_or(default_max)).collect(),
        }
    }

    fn method(&self) -> Method {
        match self.method {
            MethodArg::Dpg => Method::Dpg,
            MethodArg::Dpgstar => Method::DpgStar,
        }
    }

    fn goal(&self) -> Goal {
        match self.goal {
            GoalArg::Manufactured => Goal::Manufactured,
            GoalArg::UniformPressure => Goal::UniformPressure,
        }
    }

    fn output(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(path) => Box::new(
                File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
            ),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn csv(&self) -> Result<csv::Writer<Box<dyn Write>>, Failure> {
        Ok(csv::Writer::from_writer(self.output()?))
    }
}

fn table1(o: &Opts) -> Result<(), Failure> {
    let cfg = o.config(&Defaults {
        p: 3,
        dp: 0,
        wavelengths: 2.0,
    })?;
    let (nx, ny) = o.mesh(2)?;
    let rows = experiments::table1(cfg, nx, ny, &o.dp_range(6))?;
    let mut w = o.csv()?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn hconv(o: &Opts) -> Result<(), Failure> {
    let cfg = o.config(&Defaults {
        p: 1,
        dp: 1,
        wavelengths: 1.0,
    })?;
    if o.ny.is_some() {
        return Err(invalid("ny", "hconv refines square meshes; use --nx"));
    }
    let finest = o.nx.unwrap_or(16);
    if finest < 2 || !finest.is_power_of_two() {
        return Err(invalid(
            "nx",
            format!("finest mesh must be a power of two >= 2, got {finest}"),
        ));
    }
    let nxs: Vec<usize> = std::iter::successors(Some(2), |n| Some(n * 2))
        .take_while(|&n| n <= finest)
        .collect();
    let ps: Vec<usize> = match o.p {
        Some(p) => vec![p],
        None => vec![1, 2, 3, 4],
    };
    let rows = experiments::hconv(cfg, &ps, &o.dp_range(3), &nxs, o.method(), 40)?;
    let mut w = o.csv()?;
    for r in &rows {
        w.serialize(r)?;
        if let Some(c) = r.condition {
            eprintln!(
                "p={} dp={} nx={} condition_estimate={c:.6e}",
                r.p, r.dp, r.nx
            );
        }
    }
    w.flush()?;
    Ok(())
}

fn identities(o: &Opts) -> Result<(), Failure> {
    let report = experiments::identities(o.seed, 100, 40)?;
    let mut out = o.output()?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    if report.all_passed {
        Ok(())
    } else {
        Err(Failure::Identity)
    }
}

fn solve(o: &Opts) -> Result<(), Failure> {
    let cfg = o.config(&Defaults {
        p: 3,
        dp: 2,
        wavelengths: 10.0,
    })?;
    let (nx, ny) = o.mesh(10)?;
    if o.sample_grid < 2 {
        return Err(invalid(
            "sample-grid",
            format!("must be at least 2, got {}", o.sample_grid),
        ));
    }
    let method = o.method();
    if method == Method::Dpg && o.goal != GoalArg::Manufactured {
        return Err(invalid("goal", "only applies to --method dpgstar"));
    }
    let disc = Discretization::new(cfg, nx, ny)?;
    let (bundle, report) = experiments::solve(&disc, method, &o.goal())?;
    let rows = experiments::sample_solution(&disc, &bundle, o.sample_grid)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(o.output()?);
    w.write_record(experiments::sample_header(method))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    match report.graph_rel_pct {
        Some(g) => eprintln!(
            "method={} l2_rel_pct={:.4} graph_rel_pct={g:.4}",
            method.name(),
            report.l2_rel_pct
        ),
        None => eprintln!(
            "method={} l2_rel_pct={:.4}",
            method.name(),
            report.l2_rel_pct
        ),
    }
    Ok(())
}

fn lsq_compare(o: &Opts) -> Result<(), Failure> {
    let cfg = o.config(&Defaults {
        p: 3,
        dp: 3,
        wavelengths: 2.0,
    })?;
    let (nx, ny) = o.mesh(2)?;
    let alphas = o
        .alphas
        .clone()
        .unwrap_or_else(|| vec![1.0, 0.1, 0.01, 0.001]);
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(invalid("alphas", "values must be positive and finite"));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("alphas", "values must be strictly descending"));
    }
    let disc = Discretization::new(cfg, nx, ny)?;
    let rows = lsq::alpha_sweep(&disc, &alphas)?;
    let mut w = o.csv()?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Table1(o) => table1(o),
        Command::Hconv(o) => hconv(o),
        Command::Identities(o) => identities(o),
        Command::Solve(o) => solve(o),
        Command::LsqCompare(o) => lsq_compare(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Identity) => {
            eprintln!("identity checks failed");
            ExitCode::from(EXIT_IDENTITY)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
