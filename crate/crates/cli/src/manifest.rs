//! Experiment manifests: JSON documents whose fields all have defaults, so `{}`
//! is a valid manifest. Command-line flags override manifest fields.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bergman_core::diagnostics::Thresholds;
use bergman_core::norms::SearchConfig;
use bergman_core::quadrature::RulePolicy;
use bergman_core::{NormKind, Point, ScalarFn, SpaceParams, Symbol};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::identities::RuleOverride;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radii: Vec<f64>,
    pub angles: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radii: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95],
            angles: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Manifest {
    /// Free-form label copied into outputs.
    pub experiment: Option<String>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    /// Symbol for the generic commands; the worked examples build their own.
    pub symbol: Option<Symbol>,
    /// Radius of the indicator used by the worked examples.
    pub radius: Option<f64>,
    pub max_degree: Option<u32>,
    pub channels: Option<usize>,
    pub degree_sweep: Option<Vec<u32>>,
    pub channel_sweep: Option<Vec<usize>>,
    pub grid: Option<GridSpec>,
    /// Explicit evaluation points; replaces the grid where given.
    pub points: Option<Vec<Point>>,
    pub boundary_radii: Option<Vec<f64>>,
    pub ring_radii: Option<Vec<f64>>,
    pub rule: Option<RuleOverride>,
    pub policy: Option<RulePolicy>,
    pub thresholds: Option<Thresholds>,
    pub search: Option<SearchConfig>,
    pub norm_kind: Option<NormKind>,
    pub p: Option<f64>,
    pub samples: Option<usize>,
    pub matrix_samples: Option<usize>,
    pub seed: Option<u64>,
    /// Worker threads; excluded from the manifest hash.
    pub threads: Option<usize>,
    /// Output directory; excluded from the manifest hash.
    pub out: Option<PathBuf>,
}

/// Which defaults to fill in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    IdentitySuite,
    E1Diagonal,
    E2TauI,
    E3Localized,
    Berezin,
    Bmo,
    Assemble,
    Svd,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::IdentitySuite => "identity-suite",
            Command::E1Diagonal => "e1-diagonal",
            Command::E2TauI => "e2-taui",
            Command::E3Localized => "e3-localized",
            Command::Berezin => "berezin",
            Command::Bmo => "bmo",
            Command::Assemble => "assemble",
            Command::Svd => "svd",
        }
    }
}

/// Parses a manifest, reporting the offending field path and position.
pub fn parse(text: &str) -> anyhow::Result<Manifest> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        anyhow::anyhow!(
            "manifest field `{}` (line {}, column {}): {}",
            path,
            inner.line(),
            inner.column(),
            inner
        )
    })
}

pub fn load(path: &Path) -> anyhow::Result<Manifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

impl Manifest {
    /// Fills every unset field with the command's default and validates.
    pub fn resolve(mut self, cmd: Command) -> anyhow::Result<Manifest> {
        let (dmax, d) = match cmd {
            Command::IdentitySuite => (16, 3),
            Command::E1Diagonal | Command::E2TauI => (20, 8),
            Command::E3Localized => (12, 8),
            Command::Berezin | Command::Bmo | Command::Assemble | Command::Svd => (16, 3),
        };
        self.experiment.get_or_insert_with(|| cmd.name().to_string());
        let n = *self.n.get_or_insert(1);
        let alpha = *self.alpha.get_or_insert(0.0);
        let params = SpaceParams::new(n, alpha)?;
        let dmax = *self.max_degree.get_or_insert(dmax);
        self.channels.get_or_insert(d);
        let r = *self.radius.get_or_insert(0.5);
        if !(0.0..1.0).contains(&r) {
            bail!("manifest field `radius`: {r} must lie in [0, 1)");
        }
        self.degree_sweep.get_or_insert_with(|| vec![dmax]);
        self.channel_sweep.get_or_insert_with(|| match cmd {
            Command::E1Diagonal | Command::E2TauI | Command::E3Localized => vec![1, 2, 4, 8],
            _ => vec![1, 2, 3],
        });
        self.grid.get_or_insert_with(GridSpec::default);
        self.boundary_radii
            .get_or_insert_with(|| vec![0.2, 0.5, 0.8, 0.9, 0.95, 0.98, 0.99]);
        self.ring_radii.get_or_insert_with(|| vec![0.3, 0.5]);
        self.policy.get_or_insert_with(RulePolicy::default);
        self.thresholds.get_or_insert_with(Thresholds::default);
        self.search.get_or_insert_with(SearchConfig::default);
        self.norm_kind.get_or_insert(NormKind::TwoToTwo);
        self.p.get_or_insert(params.localization_threshold() + 0.5);
        self.samples.get_or_insert(200);
        self.matrix_samples.get_or_insert(100);
        self.seed.get_or_insert(0);
        if self.symbol.is_none() {
            self.symbol = Some(Symbol::DiagonalGeometric {
                tau: ScalarFn::indicator(r),
                d: self.channels.unwrap(),
            });
        }
        self.validate(cmd)?;
        Ok(self)
    }

    fn validate(&self, cmd: Command) -> anyhow::Result<()> {
        if self.degree_sweep.as_ref().is_some_and(|v| v.is_empty()) {
            bail!("manifest field `degree_sweep`: sweep list is empty");
        }
        if self.channel_sweep.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
            bail!("manifest field `channel_sweep`: sweep list is empty or contains 0");
        }
        let g = self.grid.as_ref().unwrap();
        if g.radii.is_empty() || g.angles == 0 {
            bail!("manifest field `grid`: radii and angles must be nonempty");
        }
        if g.radii.iter().any(|r| !(0.0..1.0).contains(r)) {
            bail!("manifest field `grid.radii`: radii must lie in [0, 1)");
        }
        for (name, list) in [("boundary_radii", &self.boundary_radii), ("ring_radii", &self.ring_radii)] {
            let list = list.as_ref().unwrap();
            if list.is_empty() || list.iter().any(|r| !(0.0..1.0).contains(r)) {
                bail!("manifest field `{name}`: need a nonempty list of radii in [0, 1)");
            }
        }
        if self.channels == Some(0) {
            bail!("manifest field `channels`: must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("manifest field `threads`: must be at least 1");
        }
        let n = self.n.unwrap();
        if let Some(points) = &self.points {
            if points.is_empty() {
                bail!("manifest field `points`: list is empty");
            }
            if points.iter().any(|p| p.dim() != n) {
                bail!("manifest field `points`: every point needs {n} coordinates");
            }
        }
        let sym = self.symbol.as_ref().unwrap();
        sym.validate(n).map_err(|e| anyhow::anyhow!("manifest field `symbol`: {e}"))?;
        if matches!(cmd, Command::Berezin | Command::Bmo | Command::Assemble | Command::Svd)
            && self.channels.unwrap() != sym.channels()
            && sym.with_channels(self.channels.unwrap()).is_err()
        {
            bail!(
                "manifest field `channels`: {} does not match the symbol's {} channels",
                self.channels.unwrap(),
                sym.channels()
            );
        }
        Ok(())
    }

    pub fn params(&self) -> SpaceParams {
        SpaceParams::new(self.n.unwrap_or(1), self.alpha.unwrap_or(0.0)).expect("validated in resolve")
    }

    /// SHA-256 of the canonical JSON of the manifest without `threads` and `out`.
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.threads = None;
        m.out = None;
        let bytes = serde_json::to_vec(&m).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
