use std::path::{Path, PathBuf};

use dampwave::inversion::InversionConfig;
use dampwave::Profile64;
use serde::Deserialize;

use crate::Failure;

/// Where `invert` takes its trace from.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    /// A trace CSV (`t,v0`), relative to the config file.
    File(PathBuf),
    /// The closed-form trace for constant damping.
    Oracle { oracle: f64 },
    /// A forward solve of `profile` at step `h`.
    Synthetic { profile: Profile64, h: f64 },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub profile: Option<Profile64>,
    pub profile2: Option<Profile64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub h: Option<f64>,
    /// Damping for `oracle` when no constant profile is given.
    pub a: Option<f64>,
    /// Steps for `convergence`, strictly descending.
    pub steps: Option<Vec<f64>>,
    pub inversion: Option<InversionConfig>,
    pub data: Option<DataSource>,
    /// Also write the characteristic-grid field for `forward`.
    #[serde(default)]
    pub write_field: bool,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_plot_script: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("config {}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.out_dir {
            Some(d) => d.clone(),
            None => PathBuf::from("."),
        }
    }

    pub fn horizon(&self) -> Result<f64, Failure> {
        self.horizon.ok_or_else(|| Failure::config("missing field T"))
    }

    pub fn step(&self) -> Result<f64, Failure> {
        self.h.ok_or_else(|| Failure::config("missing field h"))
    }

    pub fn profile(&self) -> Result<&Profile64, Failure> {
        let p = self.profile.as_ref().ok_or_else(|| Failure::config("missing field profile"))?;
        p.validate().map_err(Failure::from)?;
        Ok(p)
    }

    pub fn profile2(&self) -> Result<&Profile64, Failure> {
        let p = self.profile2.as_ref().ok_or_else(|| Failure::config("missing field profile2"))?;
        p.validate().map_err(Failure::from)?;
        Ok(p)
    }

    /// `T` and `h` present, positive, with `T/(2h)` a whole number.
    pub fn grid(&self) -> Result<(f64, f64), Failure> {
        let (t, h) = (self.horizon()?, self.step()?);
        if !(t > 0.0 && h > 0.0 && t.is_finite() && h.is_finite()) {
            return Err(Failure::config("T and h must be positive"));
        }
        let q = t / (2.0 * h);
        if (q - q.round()).abs() > 1e-6 * q.max(1.0) || q.round() < 1.0 {
            return Err(Failure::config(format!("T/(2h) = {q} is not a positive integer")));
        }
        Ok((t, h))
    }
}
