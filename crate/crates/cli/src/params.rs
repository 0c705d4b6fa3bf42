use clap::Args;
use ordwalk::density::SurvivalMethod;
use ordwalk::fredholm::{Extreme, KernelSpec, QuadSettings};
use ordwalk::mcsim::SimConfig;
use ordwalk::walkmodel::{KillKind, Rates};
use ordwalk::{Error, Result};
use serde::{Deserialize, Serialize};

/// Flags shared by `eval` and `simulate`. Each command reads the ones it
/// needs and rejects missing required ones.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// rates, comma separated (default: all 1)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rates: Vec<f64>,
    /// start point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    /// end point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Vec<f64>,
    #[arg(long)]
    pub n: Option<u32>,
    /// observation times for extreme-particle laws
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<u32>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Vec<f64>,
    /// tau (leave the chamber) or rho (lose interlacing)
    #[arg(long)]
    pub kill: Option<KillKind>,
    /// largest or smallest
    #[arg(long)]
    pub extreme: Option<Extreme>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, env = "ORDWALK_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub streams: Option<u32>,
    /// starting Gauss-Legendre nodes per panel
    #[arg(long)]
    pub quad_nodes: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// survival method: quadrature, exact or mc
    #[arg(long)]
    pub method: Option<SurvivalMethod>,
    /// kernel specification as JSON
    #[arg(long)]
    pub spec: Option<String>,
    /// file for the CSV dump of `simulate paths`
    #[arg(long)]
    pub csv: Option<std::path::PathBuf>,
}

fn missing<T>(flag: &str) -> Result<T> {
    Err(Error::InvalidInput(format!("--{flag} is required here")))
}

impl Params {
    pub fn x(&self) -> Result<&[f64]> {
        if self.x.is_empty() {
            return missing("x");
        }
        Ok(&self.x)
    }

    pub fn z(&self) -> Result<&[f64]> {
        if self.z.is_empty() {
            return missing("z");
        }
        Ok(&self.z)
    }

    pub fn n(&self) -> Result<u32> {
        self.n.map_or_else(|| missing("n"), Ok)
    }

    pub fn kill(&self) -> KillKind {
        self.kill.unwrap_or(KillKind::Tau)
    }

    /// Dimension from --d, then --rates, then --x.
    pub fn dim(&self) -> Result<usize> {
        if let Some(d) = self.d {
            return Ok(d);
        }
        if !self.rates.is_empty() {
            return Ok(self.rates.len());
        }
        if !self.x.is_empty() {
            return Ok(self.x.len());
        }
        missing("d")
    }

    pub fn rates(&self) -> Result<Rates> {
        if self.rates.is_empty() {
            Rates::equal(self.dim()?, 1.0)
        } else {
            Rates::new(self.rates.clone())
        }
    }

    pub fn sim(&self, seed: u64, default_samples: u64) -> SimConfig {
        let mut cfg = SimConfig::new(seed, self.samples.unwrap_or(default_samples));
        if let Some(s) = self.streams {
            cfg.streams = s;
        }
        cfg
    }

    /// Kernel specification from --spec, or assembled from the flags.
    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let mut spec = match &self.spec {
            Some(json) => serde_json::from_str::<KernelSpec>(json).map_err(|e| Error::InvalidInput(format!("bad --spec: {e}")))?,
            None => {
                let times = if self.times.is_empty() { vec![self.n()?] } else { self.times.clone() };
                KernelSpec::new(self.x()?.to_vec(), times, self.thresholds.clone(), self.extreme.unwrap_or(Extreme::Largest))?
            }
        };
        if let Some(nodes) = self.quad_nodes {
            let quad = QuadSettings { nodes, ..spec.quad };
            spec = spec.with_quad(quad);
        }
        spec.validate()?;
        Ok(spec)
    }
}
