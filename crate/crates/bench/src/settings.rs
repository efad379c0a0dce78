//! Experiment settings: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Every field is optional so that file and command line can be layered;
/// experiment defaults fill whatever is still unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file with the same keys as the long flags (`t_end` for `--t-end`).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// solar, quartic, harmonic or schwinger.
    #[arg(long)]
    pub model: Option<String>,

    /// all, gradient, nongradient, or comma-separated scheme names.
    #[arg(long)]
    pub schemes: Option<String>,

    /// hessian_free, exact_fg or exact_fg_fd.
    #[arg(long)]
    pub mode: Option<String>,

    /// Step sizes.
    #[arg(long, value_delimiter = ',')]
    pub h: Option<Vec<f64>>,

    /// Step counts (efficiency grid, HMC steps per trajectory).
    #[arg(long, value_delimiter = ',')]
    pub nsteps: Option<Vec<usize>>,

    /// Integration time.
    #[arg(long)]
    pub t_end: Option<f64>,

    /// HMC trajectory length.
    #[arg(long)]
    pub tau: Option<f64>,

    /// HMC trajectories per chain.
    #[arg(long)]
    pub ntraj: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Energy sampling interval in steps (drift).
    #[arg(long)]
    pub every: Option<usize>,

    /// Spatial and temporal lattice extent.
    #[arg(long)]
    pub lattice: Option<usize>,

    #[arg(long)]
    pub beta: Option<f64>,

    #[arg(long)]
    pub m0: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Values set in `top` win.
    pub fn overlay(mut self, top: &Settings) -> Self {
        overlay!(self, top, model, schemes, mode, h, nsteps, t_end, tau, ntraj, seed, out, every, lattice, beta, m0);
        self
    }

    /// Command-line settings merged over the optional config file.
    pub fn resolve(cli: Settings) -> Result<Self> {
        let base = match &cli.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let merged = base.overlay(&cli);
        if let Some(h) = &merged.h {
            if h.is_empty() || h.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                bail!("--h needs positive finite step sizes");
            }
        }
        if let Some(n) = &merged.nsteps {
            if n.is_empty() || n.contains(&0) {
                bail!("--nsteps needs positive step counts");
            }
        }
        Ok(merged)
    }
}
