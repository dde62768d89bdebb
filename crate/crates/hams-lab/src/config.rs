//! Run configuration: sampler/target selection plus the experiment protocol,
//! loadable from a flat `key=value` file (a TOML-compatible subset) with
//! command-line flags taking precedence.

use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Sampler presets exposed by the runner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind {
    HamsA,
    HamsB,
    /// Position friction `eta1 = k eps`.
    HamsK(f64),
    MaBaoab,
    MaAboba,
    MaBp,
}

impl SamplerKind {
    pub fn name(&self) -> String {
        match self {
            SamplerKind::HamsA => "hams-a".into(),
            SamplerKind::HamsB => "hams-b".into(),
            SamplerKind::HamsK(k) => format!("hams-{k:.0}"),
            SamplerKind::MaBaoab => "ma-baoab".into(),
            SamplerKind::MaAboba => "ma-aboba".into(),
            SamplerKind::MaBp => "ma-bp".into(),
        }
    }

    /// The eight presets of the benchmark suite.
    pub fn benchmark_set() -> Vec<SamplerKind> {
        vec![
            SamplerKind::HamsA,
            SamplerKind::HamsB,
            SamplerKind::HamsK(1.0),
            SamplerKind::HamsK(2.0),
            SamplerKind::HamsK(3.0),
            SamplerKind::MaBaoab,
            SamplerKind::MaAboba,
            SamplerKind::MaBp,
        ]
    }
}

impl FromStr for SamplerKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "hams-a" => SamplerKind::HamsA,
            "hams-b" => SamplerKind::HamsB,
            "hams-k" => SamplerKind::HamsK(1.0),
            "ma-baoab" => SamplerKind::MaBaoab,
            "ma-aboba" => SamplerKind::MaAboba,
            "ma-bp" => SamplerKind::MaBp,
            other => {
                if let Some(k) = other.strip_prefix("hams-").and_then(|v| v.parse::<f64>().ok()) {
                    if k < 0.0 {
                        bail!("hams-k needs k >= 0, got {k}");
                    }
                    SamplerKind::HamsK(k)
                } else {
                    bail!(
                        "unknown sampler {other:?} (expected hams-a, hams-b, hams-k/hams-<k>, \
                         ma-baoab, ma-aboba, ma-bp)"
                    );
                }
            }
        })
    }
}

/// Target selection with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    DoubleWell { temperature: f64 },
    Gaussian { gamma: f64, dim: usize },
    Sv { t_len: usize },
    Cox { m: usize },
}

impl TargetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::DoubleWell { .. } => "double-well",
            TargetSpec::Gaussian { .. } => "gaussian",
            TargetSpec::Sv { .. } => "sv",
            TargetSpec::Cox { .. } => "cox",
        }
    }
}

/// Chain-file emission policy; full latent-variable chains are large, so the
/// default keeps only the first repetition's trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteChains {
    All,
    First,
    None,
}

impl FromStr for WriteChains {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "all" => WriteChains::All,
            "first" => WriteChains::First,
            "none" => WriteChains::None,
            other => bail!("write_chains must be all|first|none, got {other:?}"),
        })
    }
}

/// Step size: fixed or tuned to the target acceptance rate during burn-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Fixed(f64),
    Auto,
}

impl FromStr for Epsilon {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Epsilon::Auto);
        }
        let v: f64 = s.parse().with_context(|| format!("bad epsilon {s:?}"))?;
        if !(v > 0.0 && v < 1.0) {
            bail!("fixed epsilon must lie in (0, 1), got {v}");
        }
        Ok(Epsilon::Fixed(v))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sampler: SamplerKind,
    pub target: TargetSpec,
    pub epsilon: Epsilon,
    pub eta: f64,
    pub n_burn: usize,
    pub n_draws: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub precondition: bool,
    pub out_dir: Option<PathBuf>,
    pub write_chains: WriteChains,
    /// Lifts the desk-scale limits (notably the full 64x64 count grid).
    pub full: bool,
    /// Windowed per-coordinate ESS is the dominant diagnostic cost; protocols
    /// that do not report it can switch it off.
    pub compute_ess: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerKind::HamsA,
            target: TargetSpec::DoubleWell { temperature: 1.0 },
            epsilon: Epsilon::Fixed(0.12),
            eta: 1.0,
            n_burn: 5000,
            n_draws: 5000,
            n_reps: 1,
            seed: 0,
            precondition: false,
            out_dir: None,
            write_chains: WriteChains::First,
            full: false,
            compute_ess: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 || self.n_draws == 0 {
            bail!("need at least one repetition and one draw");
        }
        if let TargetSpec::Cox { m } = self.target {
            if m > 16 && !self.full {
                bail!("count grids above 16x16 need --full (requested m = {m})");
            }
        }
        if self.precondition && matches!(self.target, TargetSpec::DoubleWell { .. } | TargetSpec::Gaussian { .. })
        {
            bail!("preconditioning is defined for the latent-variable targets only");
        }
        Ok(())
    }
}

/// Key/value overrides collected from a config file; every key is also a
/// command-line flag, and flags win.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    pub entries: Vec<(String, String)>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected key=value, got {raw:?}", ln + 1))?;
            let value = value.trim().trim_matches('"');
            entries.push((key.trim().to_string(), value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}
