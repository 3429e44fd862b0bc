//! `bergman cache`: quadrature-rule and basis-norm files on disk.

use std::path::PathBuf;

use bergman_core::basis::{enumerate_basis, rule_for_degree};
use bergman_core::cache;
use bergman_core::SpaceParams;
use clap::{Args, Subcommand};

use crate::{EXIT_IDENTITY_FAILURE, EXIT_OK};

#[derive(Debug, Args)]
pub struct CacheArgs {
    /// Cache directory. Defaults to $XDG_CACHE_HOME/bergman or ~/.cache/bergman.
    #[arg(long, env = "BERGMAN_CACHE_DIR")]
    pub dir: Option<PathBuf>,
    #[command(subcommand)]
    pub action: CacheAction,
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// List cache files.
    List,
    /// Build basis rules and norm tables.
    Build {
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Repeatable; defaults to 0 and 1.
        #[arg(long)]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        max_degree: u32,
    },
    /// Check every file's checksum and structure. Exits 2 if any is corrupt.
    Verify,
    /// Delete every cache file.
    Purge,
}

pub fn default_dir() -> PathBuf {
    if let Some(x) = std::env::var_os("XDG_CACHE_HOME").filter(|v| !v.is_empty()) {
        return PathBuf::from(x).join("bergman");
    }
    if let Some(h) = std::env::var_os("HOME").filter(|v| !v.is_empty()) {
        return PathBuf::from(h).join(".cache").join("bergman");
    }
    PathBuf::from(".bergman-cache")
}

pub fn run(args: &CacheArgs) -> anyhow::Result<i32> {
    let dir = args.dir.clone().unwrap_or_else(default_dir);
    match &args.action {
        CacheAction::List => {
            let entries = cache::list(&dir)?;
            if entries.is_empty() {
                println!("no cache files in {}", dir.display());
            }
            for e in entries {
                println!(
                    "{:<10} {:>10}  {}",
                    e.kind.extension(),
                    e.bytes,
                    e.path.file_name().unwrap_or_default().to_string_lossy()
                );
            }
            Ok(EXIT_OK)
        }
        CacheAction::Build { n, alpha, max_degree } => {
            let alphas = if alpha.is_empty() { vec![0.0, 1.0] } else { alpha.clone() };
            for a in alphas {
                let params = SpaceParams::new(*n, a)?;
                let rule = rule_for_degree(&params, *max_degree)?;
                let table = enumerate_basis(&params, *max_degree, 1, &rule)?;
                let r = cache::write_rule(&dir, &rule)?;
                let t = cache::write_norm_table(&dir, &table)?;
                println!("wrote {}", r.display());
                println!("wrote {}", t.display());
            }
            Ok(EXIT_OK)
        }
        CacheAction::Verify => {
            let entries = cache::list(&dir)?;
            let mut bad = 0;
            for e in &entries {
                match cache::verify(&e.path) {
                    Ok(_) => println!("ok       {}", e.path.display()),
                    Err(err) => {
                        bad += 1;
                        println!("CORRUPT  {}: {err}", e.path.display());
                    }
                }
            }
            println!("{} files, {} corrupt", entries.len(), bad);
            Ok(if bad > 0 { EXIT_IDENTITY_FAILURE } else { EXIT_OK })
        }
        CacheAction::Purge => {
            let removed = cache::purge(&dir)?;
            println!("removed {removed} files from {}", dir.display());
            Ok(EXIT_OK)
        }
    }
}
