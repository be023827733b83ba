use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use relu_pricer::pricing::{SynthesisMode, Variant};
use relu_pricer::MarketParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Paper,
    Practical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveArg {
    Square,
    Mult,
    Product,
    Price,
}

/// Strike list: a JSON array in config files, a comma list on the command line.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ListArg {
    Values(Vec<f64>),
    Text(String),
}

impl ListArg {
    fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Self::Values(v) => Ok(v.clone()),
            Self::Text(s) => parse_list(s),
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect()
}

fn parse_list_arg(s: &str) -> Result<ListArg, String> {
    parse_list(s).map(ListArg::Values)
}

/// Every setting, from flags or from a JSON config file with the same keys.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// Number of assets.
    #[arg(long)]
    pub d: Option<usize>,
    /// Target accuracy (or the primitive's tolerance for `verify`).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Smoothness order.
    #[arg(long)]
    pub n: Option<usize>,
    /// Lower end of the spot domain.
    #[arg(long)]
    pub a: Option<f64>,
    /// Upper end of the spot domain.
    #[arg(long)]
    pub b: Option<f64>,
    /// Comma-separated strikes; defaults to 1 for every asset.
    #[arg(long, value_parser = parse_list_arg)]
    pub strikes: Option<ListArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest admissible number of nonzero weights.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Output path for artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit timestamps and host information from outputs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub deterministic: Option<bool>,
    /// Network JSON to read.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Comma-separated evaluation point.
    #[arg(long, value_parser = parse_list_arg)]
    pub at: Option<ListArg>,
    #[arg(long, value_enum)]
    pub primitive: Option<PrimitiveArg>,
    /// Number of sample points for verification.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated dimensions for `scale-study`.
    #[arg(long, value_parser = parse_list_arg)]
    pub d_list: Option<ListArg>,
    /// Comma-separated tolerances for `scale-study`.
    #[arg(long, value_parser = parse_list_arg)]
    pub eps_list: Option<ListArg>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
    }

    /// Fill every unset field from `file`.
    pub fn or(mut self, file: &Settings) -> Self {
        overlay!(self, file, d, eps, n, a, b, strikes, mode, seed, budget, out, deterministic, net, at, primitive, samples, d_list, eps_list);
        self
    }

    pub fn deterministic(&self) -> bool {
        self.deterministic.unwrap_or(false)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(100)
    }

    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(0.1)
    }

    pub fn budget(&self) -> f64 {
        self.budget.unwrap_or(relu_pricer::pricing::DEFAULT_BUDGET)
    }

    pub fn variant(&self) -> Variant {
        match self.mode.unwrap_or(ModeArg::Practical) {
            ModeArg::Paper => Variant::PaperConstants,
            ModeArg::Practical => Variant::Practical,
        }
    }

    pub fn synthesis_mode(&self) -> SynthesisMode {
        self.synthesis_mode_at(self.eps())
    }

    pub fn synthesis_mode_at(&self, eps: f64) -> SynthesisMode {
        SynthesisMode { variant: self.variant(), eps }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a.unwrap_or(0.9), self.b.unwrap_or(1.1))
    }

    /// Normalized market parameters with `d` assets (overriding `--d`).
    pub fn params_for(&self, d: usize) -> Result<MarketParams, ConfigError> {
        let strikes = match &self.strikes {
            Some(list) => {
                let v = list.values().map_err(ConfigError::Invalid)?;
                match v.len() {
                    1 => vec![v[0]; d],
                    len if len == d => v,
                    len => return Err(ConfigError::Invalid(format!("{len} strikes for {d} assets"))),
                }
            }
            None => vec![1.0; d],
        };
        MarketParams::normalized(strikes, self.domain(), self.n.unwrap_or(1))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn params(&self) -> Result<MarketParams, ConfigError> {
        let d = match (&self.d, &self.strikes) {
            (Some(d), _) => *d,
            (None, Some(list)) => list.values().map_err(ConfigError::Invalid)?.len(),
            (None, None) => 1,
        };
        self.params_for(d)
    }

    pub fn at(&self) -> Result<Vec<f64>, ConfigError> {
        self.at
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("--at is required".into()))?
            .values()
            .map_err(ConfigError::Invalid)
    }

    pub fn d_list(&self) -> Result<Vec<usize>, ConfigError> {
        let v = match &self.d_list {
            Some(l) => l.values().map_err(ConfigError::Invalid)?,
            None => vec![self.d.unwrap_or(1) as f64],
        };
        v.into_iter()
            .map(|x| {
                if x >= 1.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(ConfigError::Invalid(format!("dimension {x} is not a positive integer")))
                }
            })
            .collect()
    }

    pub fn eps_list(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.eps_list {
            Some(l) => l.values().map_err(ConfigError::Invalid),
            None => Ok(vec![self.eps()]),
        }
    }

    pub fn out(&self) -> Result<&Path, ConfigError> {
        match &self.out {
            Some(p) if !p.as_os_str().is_empty() => Ok(p),
            _ => Err(ConfigError::Invalid("--out is required".into())),
        }
    }

    pub fn net(&self) -> Result<&Path, ConfigError> {
        self.net
            .as_deref()
            .or(self.out.as_deref())
            .ok_or_else(|| ConfigError::Invalid("--net is required".into()))
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Invalid(String),
    Io(String),
}
