//! `npsl`: batch front end. Exit codes are 0 on success, 2 for invalid input
//! and 3 for numerical failures.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npsl_core::config::{RunConfig, SurfaceEntry};
use npsl_core::Error;

#[derive(Parser, Debug)]
#[command(name = "npsl", version, about = "Neumann-Poincare spectra, symbol flows and localization experiments")]
struct Cli {
    /// TOML run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads (falls back to NPSL_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// Surface shorthand such as sphere:1, spheroid:1,1,3 or ellipse:2,1.
    #[arg(long)]
    surface: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Geometry summary and the symbol margin.
    SurfaceInfo(Common),
    /// NP eigenvalues (CSV) and optional binary dumps.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Eigenfunction node values (binary with JSON sidecar).
        #[arg(long)]
        eigenfunctions: Option<PathBuf>,
        /// Single-layer and K* operator dumps, written as PREFIX.single.bin and PREFIX.npstar.bin.
        #[arg(long)]
        operators: Option<PathBuf>,
    },
    /// Log-log decay of the eigenvalues.
    Weyl {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        j_min: Option<usize>,
        #[arg(long)]
        j_max: Option<usize>,
        #[arg(long)]
        coarse_resolution: Option<usize>,
    },
    /// Hamiltonian flow of the squared symbol.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Base point: pole, equator or chart:u1,u2.
        #[arg(long)]
        p: Option<String>,
        /// Initial covector direction, rescaled to H = 1.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        xi: Option<[f64; 2]>,
        /// raw, rho or arctan.
        #[arg(long)]
        hamiltonian: Option<String>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Weighted volume of the characteristic variety at a point.
    Variety {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<String>,
        /// Principal curvatures instead of a surface point.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        kappas: Option<[f64; 2]>,
        #[arg(long)]
        angular_res: Option<usize>,
        /// Use the closed-form density instead of arc length (diagnostic).
        #[arg(long)]
        paper_measure: bool,
    },
    /// Curvature functional F_alpha.
    Falpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        kappas: Option<[f64; 2]>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// paper or corrected.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Band mass ratio between two boundary points (JSON).
    Localize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        band: BandArgs,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// Bump radius in units of the feature size.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Variance of the normalized matrix elements of z over a band (JSON).
    QeVariance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        band: BandArgs,
    },
    /// Resonance drift over a frequency grid (CSV).
    HelmholtzDrift {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        medium: MediumArgs,
        /// Static NP eigenvalue to follow.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        omegas: Option<Vec<f64>>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Scattered field on a circle in the xz-plane (CSV).
    Scatter {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        medium: MediumArgs,
        #[arg(long)]
        omega: Option<f64>,
        /// Plane-wave direction.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        direction: Option<[f64; 3]>,
        /// Point-source position (replaces the plane wave).
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        source: Option<[f64; 3]>,
        /// Radius of the evaluation circle.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Acceptance suite, one line per criterion.
    Selftest {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the full outcome as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default, Clone)]
pub struct BandArgs {
    #[arg(long)]
    band_min: Option<f64>,
    #[arg(long)]
    band_max: Option<f64>,
    /// Use the deepest N converged positive eigenvalues as the band.
    #[arg(long)]
    band_count: Option<usize>,
    #[arg(long)]
    coarse_resolution: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct MediumArgs {
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    /// Inclusion coefficient as re,im.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    mu1: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    eps1: Option<[f64; 2]>,
}

fn parse_list<const N: usize>(text: &str) -> Result<[f64; N], String> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect::<Result<_, _>>()?;
    vals.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_pair(text: &str) -> Result<[f64; 2], String> {
    parse_list::<2>(text)
}

fn parse_triple(text: &str) -> Result<[f64; 3], String> {
    parse_list::<3>(text)
}

impl Common {
    fn into_config(self) -> RunConfig {
        RunConfig {
            surface: self.surface.map(SurfaceEntry::Short),
            resolution: self.resolution,
            out: self.out,
            seed: self.seed,
            ..RunConfig::default()
        }
    }
}

impl BandArgs {
    fn apply(self, c: &mut RunConfig) {
        c.band_min = self.band_min;
        c.band_max = self.band_max;
        c.band_count = self.band_count;
        c.coarse_resolution = self.coarse_resolution;
    }
}

impl MediumArgs {
    fn apply(self, c: &mut RunConfig) {
        c.mu0 = self.mu0;
        c.eps0 = self.eps0;
        c.mu1 = self.mu1;
        c.eps1 = self.eps1;
    }
}

/// Flag values as a config overlay, plus the subcommand and its extra switches.
fn flags(command: Command) -> (commands::Kind, RunConfig) {
    use commands::Kind;
    match command {
        Command::SurfaceInfo(c) => (Kind::SurfaceInfo, c.into_config()),
        Command::Spectrum { common, eigenfunctions, operators } => {
            (Kind::Spectrum { eigenfunctions, operators }, common.into_config())
        }
        Command::Weyl { common, j_min, j_max, coarse_resolution } => {
            let mut c = common.into_config();
            c.j_min = j_min;
            c.j_max = j_max;
            c.coarse_resolution = coarse_resolution;
            (Kind::Weyl, c)
        }
        Command::Flow { common, p, xi, hamiltonian, t_end, tol } => {
            let mut c = common.into_config();
            c.p = p;
            c.xi = xi;
            c.hamiltonian = hamiltonian;
            c.t_end = t_end;
            c.tol = tol;
            (Kind::Flow, c)
        }
        Command::Variety { common, alpha, p, kappas, angular_res, paper_measure } => {
            let mut c = common.into_config();
            c.alpha = alpha;
            c.p = p;
            c.kappas = kappas;
            c.angular_res = angular_res;
            (Kind::Variety { paper_measure }, c)
        }
        Command::Falpha { common, kappas, alpha, variant } => {
            let mut c = common.into_config();
            c.kappas = kappas;
            c.alpha = alpha;
            c.variant = variant;
            (Kind::Falpha, c)
        }
        Command::Localize { common, band, p, q, alpha, delta } => {
            let mut c = common.into_config();
            band.apply(&mut c);
            c.p = p;
            c.q = q;
            c.alpha = alpha;
            c.delta = delta;
            (Kind::Localize, c)
        }
        Command::QeVariance { common, band } => {
            let mut c = common.into_config();
            band.apply(&mut c);
            (Kind::QeVariance, c)
        }
        Command::HelmholtzDrift { common, medium, lambda, omegas, tol } => {
            let mut c = common.into_config();
            medium.apply(&mut c);
            c.lambda = lambda;
            c.omegas = omegas;
            c.tol = tol;
            (Kind::HelmholtzDrift, c)
        }
        Command::Scatter { common, medium, omega, direction, source, radius, samples } => {
            let mut c = common.into_config();
            medium.apply(&mut c);
            c.omega = omega;
            c.direction = direction;
            c.source = source;
            c.radius = radius;
            c.samples = samples;
            (Kind::Scatter, c)
        }
        Command::Selftest { criteria, seed, out } => {
            let c = RunConfig { seed, out, ..RunConfig::default() };
            (Kind::Selftest { criteria }, c)
        }
    }
}

fn thread_cap(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("NPSL_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Validation(format!("NPSL_THREADS must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> Result<String, Error> {
    if let Some(n) = thread_cap(cli.threads)? {
        if n == 0 {
            return Err(Error::Validation("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    }
    let (kind, overlay) = flags(cli.command);
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.merge(overlay);
    config.validate()?;
    commands::execute(&kind, &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Io(_) => 2,
        _ => 3,
    }
}
