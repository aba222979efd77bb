use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geoclose_cli::config::{ExperimentConfig, ExperimentKind, LogGrid};
use geoclose_cli::experiments::run;
use geoclose_cli::plot::render_svg;
use geoclose_cli::CliError;

/// Numerical experiments on closed geodesics, partner orbits and comparison geometry.
#[derive(Debug, Parser)]
#[command(name = "geoclose", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Triangle laws in the constant-curvature plane.
    Triangles(Common),
    /// Triangle laws on a surface of pinched variable curvature.
    SurfaceTriangles(Common),
    /// Partner orbits over a grid of loop lengths and crossing angles.
    Partner(Orbit),
    /// Scaling of T − T′ against ε at fixed loop lengths.
    PartnerScaling(Orbit),
    /// Pseudo-partner orbits over a grid.
    Pseudo(Orbit),
    /// Closing of almost-periodic orbits.
    Closing(Common),
    /// Cone contraction and length brackets.
    Cones(Common),
    /// Self-crossings of closed geodesics of a discrete group.
    Crossings(Crossings),
    /// Print the bound constants.
    Constants(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kappa1: Option<f64>,
    #[arg(long)]
    kappa2: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG output for experiments that produce a figure.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Orbit {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    #[arg(long)]
    eps_min: Option<f64>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    eps_points: Option<usize>,
    /// Rotate by the mirrored angle at the crossing.
    #[arg(long)]
    mirror: bool,
    /// Allow ε grids beyond ε₀.
    #[arg(long)]
    allow_large_eps: bool,
    /// Override the configured b of the scaling experiment.
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Debug, Args)]
struct Crossings {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    word_length: Option<usize>,
    #[arg(long)]
    cut: Option<usize>,
    /// Generator set as JSON instead of the Schottky preset.
    #[arg(long)]
    generators: Option<PathBuf>,
}

impl Common {
    fn into_config(self, kind: ExperimentKind) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.kind = kind;
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(kappa1, kappa2, t0, seed, samples);
        if self.tolerance.is_some() {
            cfg.tolerance = self.tolerance;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.plot.is_some() {
            cfg.plot = self.plot;
        }
        Ok(cfg)
    }
}

impl Orbit {
    fn into_config(self, kind: ExperimentKind) -> Result<ExperimentConfig, CliError> {
        let mut cfg = self.common.into_config(kind)?;
        if let Some(t) = self.t1 {
            cfg.t1 = geoclose_cli::config::LinearRange::single(t);
        }
        if let Some(t) = self.t2 {
            cfg.t2 = geoclose_cli::config::LinearRange::single(t);
        }
        cfg.eps = LogGrid {
            min: self.eps_min.unwrap_or(cfg.eps.min),
            max: self.eps_max.unwrap_or(cfg.eps.max),
            points: self.eps_points.unwrap_or(cfg.eps.points),
        };
        cfg.mirror |= self.mirror;
        cfg.allow_large_eps |= self.allow_large_eps;
        if self.b.is_some() {
            cfg.b = self.b;
        }
        Ok(cfg)
    }
}

impl Command {
    fn into_config(self) -> Result<ExperimentConfig, CliError> {
        use ExperimentKind as K;
        match self {
            Command::Triangles(c) => c.into_config(K::Triangles),
            Command::SurfaceTriangles(c) => c.into_config(K::SurfaceTriangles),
            Command::Partner(o) => o.into_config(K::Partner),
            Command::PartnerScaling(o) => o.into_config(K::PartnerScaling),
            Command::Pseudo(o) => o.into_config(K::Pseudo),
            Command::Closing(c) => c.into_config(K::Closing),
            Command::Cones(c) => c.into_config(K::Cones),
            Command::Constants(c) => c.into_config(K::Constants),
            Command::Crossings(x) => {
                let mut cfg = x.common.into_config(K::Crossings)?;
                if let Some(n) = x.word_length {
                    cfg.word_length = n;
                }
                if let Some(n) = x.cut {
                    cfg.cut = n;
                }
                if x.generators.is_some() {
                    cfg.schottky.generators = x.generators;
                }
                Ok(cfg)
            }
        }
    }
}

fn execute(command: Command) -> Result<usize, CliError> {
    let cfg = command.into_config()?;
    let report = run(&cfg)?;
    match &cfg.out {
        Some(path) => report.write_csv(BufWriter::new(File::create(path)?))?,
        None => report.write_csv(io::stdout().lock())?,
    }
    let plot_path = cfg
        .plot
        .clone()
        .or_else(|| cfg.out.as_ref().map(|p| p.with_extension("svg")));
    if let (Some(plot), Some(path)) = (&report.plot, plot_path) {
        std::fs::write(&path, render_svg(plot)?)?;
        eprintln!("figure written to {}", path.display());
    }
    eprint!("{}", report.summary_text());
    io::stderr().flush()?;
    Ok(report.violations())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
