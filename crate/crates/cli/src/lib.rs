//! Experiment runner behind the `bergman` binary.
//!
//! Exit codes: 0 all checks pass, 2 an identity check failed, 3 a result was
//! precision-flagged and left inconclusive, 4 usage error, 1 anything else.

pub mod cache_cmd;
pub mod experiments;
pub mod identities;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::experiments::Outcome;
use crate::manifest::{Command, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_IDENTITY_FAILURE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bergman", version, about = "Finite-section experiments for Toeplitz operators on weighted Bergman spaces of the ball")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Cmd,
}

/// Flags shared by every experiment; each overrides the manifest field of the same name.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON experiment manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory (default out/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the compute pool. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub max_degree: Option<u32>,
    #[arg(long, global = true)]
    pub channels: Option<usize>,
    /// Indicator radius of the worked examples.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Exponent of the localization functional.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// 2to2, 2to1 or intersection.
    #[arg(long, global = true)]
    pub norm_kind: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the exact-identity battery.
    IdentitySuite,
    /// Compact diagonal example: four-condition report, singular values, boundary decay.
    E1Diagonal,
    /// Non-compact tau*I example: multiplicity law and flat tail profiles.
    E2Taui,
    /// Localization functionals and BMO norms for the diagonal and tau*I examples.
    E3Localized,
    /// Berezin transform of the manifest symbol on the grid.
    Berezin,
    /// BMO seminorm of the manifest symbol.
    Bmo,
    /// Assemble the manifest symbol and store the matrix.
    Assemble,
    /// Singular values across the degree and channel sweeps.
    Svd,
    /// Manage the quadrature-rule and norm-table cache.
    Cache(cache_cmd::CacheArgs),
}

impl Cmd {
    fn experiment(&self) -> Option<Command> {
        Some(match self {
            Cmd::IdentitySuite => Command::IdentitySuite,
            Cmd::E1Diagonal => Command::E1Diagonal,
            Cmd::E2Taui => Command::E2TauI,
            Cmd::E3Localized => Command::E3Localized,
            Cmd::Berezin => Command::Berezin,
            Cmd::Bmo => Command::Bmo,
            Cmd::Assemble => Command::Assemble,
            Cmd::Svd => Command::Svd,
            Cmd::Cache(_) => return None,
        })
    }
}

/// Usage problems that map to exit code 4.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(UsageError(format!("{e:#}")))
}

/// Merges flags into the manifest and fills defaults.
pub fn build_manifest(common: &CommonArgs, cmd: Command) -> anyhow::Result<Manifest> {
    let mut m = match &common.manifest {
        Some(path) => manifest::load(path).map_err(usage)?,
        None => Manifest::default(),
    };
    if common.out.is_some() {
        m.out = common.out.clone();
    }
    macro_rules! over {
        ($($f:ident),*) => { $( if common.$f.is_some() { m.$f = common.$f; } )* };
    }
    over!(threads, seed, n, alpha, max_degree, channels, radius, p);
    if let Some(k) = &common.norm_kind {
        m.norm_kind = Some(
            serde_json::from_value(serde_json::Value::String(k.clone()))
                .map_err(|_| usage(anyhow::anyhow!("--norm-kind must be 2to2, 2to1 or intersection")))?,
        );
    }
    m.resolve(cmd).map_err(usage)
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<bergman_core::Error>() {
            use bergman_core::Error as E;
            return match e {
                E::OutsideBall { .. }
                | E::DimensionMismatch { .. }
                | E::InvalidAlpha(_)
                | E::UnsupportedDimension(_)
                | E::InvalidArgument(_) => EXIT_USAGE,
                E::Precision(_) => EXIT_INCONCLUSIVE,
                _ => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}

fn run_experiment(common: &CommonArgs, cmd: Command) -> anyhow::Result<i32> {
    let m = build_manifest(common, cmd)?;
    let out_dir = m.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    let threads = m.threads;
    let job = || experiments::run(cmd, &m);
    let result = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build()?.install(job)?,
        None => job()?,
    };
    std::fs::create_dir_all(&out_dir)?;
    for (name, bytes) in &result.files {
        std::fs::write(out_dir.join(name), bytes)?;
    }
    print!("{}", result.summary);
    println!("wrote {} files to {}", result.files.len(), out_dir.display());
    Ok(match result.outcome {
        Outcome::Pass => EXIT_OK,
        o => o.exit_code(),
    })
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match (&cli.command, cli.command.experiment()) {
        (Cmd::Cache(args), _) => cache_cmd::run(args),
        (_, Some(cmd)) => run_experiment(&cli.common, cmd),
        _ => unreachable!(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}
