//! Declarative experiment description and its `key=value` config format.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::{make_grid, TorusGrid};
use crate::harness::data::{gaussian_data, rough_data};
use crate::wkb::WkbOrder;

/// Default epsilon ladder, geometric in `eps^2`.
pub const DEFAULT_EPS: [f64; 5] = [0.2, 0.1414, 0.1, 0.0707, 0.05];

/// Time step of the profile solves used by the experiments.
pub const DEFAULT_PROFILE_DT: f64 = 2.5e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// `phi = psi = amp exp(-|x - center|^2 / width^2)`.
    Gaussian { amp: f64, width: f64, center: [f64; 2] },
    /// `phi` from `seed`, `psi` from `seed + 1`.
    Rough { s_target: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub data: DataSpec,
    pub lambda: f64,
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    pub order: WkbOrder,
    pub norm_s: f64,
    pub grid_n: usize,
    pub grid_l: f64,
    pub dt_safety: f64,
    pub out_dir: Option<PathBuf>,
    pub profile_dt: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            data: DataSpec::Gaussian {
                amp: 1.0,
                width: 1.0,
                center: [0.0, 0.0],
            },
            lambda: 1.0,
            eps: DEFAULT_EPS.to_vec(),
            times: vec![1.0],
            order: WkbOrder::K0,
            norm_s: 1.0,
            grid_n: 128,
            grid_l: 16.0 * PI,
            dt_safety: crate::kg::DEFAULT_SAFETY,
            out_dir: None,
            profile_dt: DEFAULT_PROFILE_DT,
        }
    }
}

/// Config keys accepted by `ExperimentSpec::apply`.
pub const KEYS: [&str; 15] = [
    "data.kind",
    "data.amp",
    "data.width",
    "data.center",
    "data.seed",
    "data.s_target",
    "lambda",
    "eps",
    "times",
    "order_k",
    "norm_s",
    "grid.n",
    "grid.l",
    "dt.safety",
    "out.dir",
];

fn bad(key: &str, value: &str) -> Error {
    Error::config(format!("invalid value for {key}: {value:?}"))
}

/// Parses a real number, accepting a trailing `pi` factor (`16pi`, `16*pi`, `pi`).
pub fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim();
    let v = if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let k = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        k * PI
    } else {
        t.parse::<f64>().ok()?
    };
    v.is_finite().then_some(v)
}

pub fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}

impl ExperimentSpec {
    /// Applies one `key=value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let real = || parse_real(v).ok_or_else(|| bad(key, v));
        match key {
            "data.kind" => {
                self.data = match v {
                    "gaussian" => DataSpec::Gaussian {
                        amp: 1.0,
                        width: 1.0,
                        center: [0.0, 0.0],
                    },
                    "rough" => DataSpec::Rough { s_target: 6.0, seed: 1 },
                    _ => return Err(bad(key, v)),
                };
            }
            "data.amp" | "data.width" | "data.center" => {
                let DataSpec::Gaussian { amp, width, center } = &mut self.data else {
                    return Err(Error::config(format!("{key} requires data.kind=gaussian")));
                };
                match key {
                    "data.amp" => *amp = real()?,
                    "data.width" => *width = real()?,
                    _ => {
                        let c = parse_list(v).filter(|c| c.len() == 2).ok_or_else(|| bad(key, v))?;
                        *center = [c[0], c[1]];
                    }
                }
            }
            "data.seed" | "data.s_target" => {
                let DataSpec::Rough { s_target, seed } = &mut self.data else {
                    return Err(Error::config(format!("{key} requires data.kind=rough")));
                };
                if key == "data.seed" {
                    *seed = v.parse().map_err(|_| bad(key, v))?;
                } else {
                    *s_target = real()?;
                }
            }
            "lambda" => self.lambda = real()?,
            "eps" => self.eps = parse_list(v).ok_or_else(|| bad(key, v))?,
            "times" => self.times = parse_list(v).ok_or_else(|| bad(key, v))?,
            "order_k" => self.order = WkbOrder::from_k(v.parse().map_err(|_| bad(key, v))?)?,
            "norm_s" => self.norm_s = real()?,
            "grid.n" => self.grid_n = v.parse().map_err(|_| bad(key, v))?,
            "grid.l" => self.grid_l = real()?,
            "dt.safety" => self.dt_safety = real()?,
            "out.dir" => self.out_dir = Some(PathBuf::from(v)),
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config text: `key=value` lines, `#` comments, blank lines.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", no + 1)))?;
            self.apply(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut spec = ExperimentSpec::default();
        spec.apply_config(&text)?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::config("eps ladder is empty"));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
            return Err(Error::config("every eps must lie in (0, 0.5]"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("eps ladder must be strictly decreasing"));
        }
        if self.times.is_empty() || self.times.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::config("times must be a non-empty list of positive values"));
        }
        if !self.lambda.is_finite() || self.lambda == 0.0 {
            return Err(Error::config("lambda must be finite and non-zero"));
        }
        if !(self.norm_s >= 0.0) {
            return Err(Error::config("norm_s must be non-negative"));
        }
        if !(self.dt_safety > 0.0) {
            return Err(Error::config("dt.safety must be positive"));
        }
        if !(self.profile_dt > 0.0) {
            return Err(Error::config("profile dt must be positive"));
        }
        match self.data {
            DataSpec::Gaussian { width, .. } if !(width > 0.0) => {
                return Err(Error::config("data.width must be positive"));
            }
            DataSpec::Rough { s_target, .. } if !(s_target > 1.0) => {
                return Err(Error::config("data.s_target must exceed 1"));
            }
            _ => {}
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<TorusGrid>> {
        make_grid(self.grid_n, self.grid_l)
    }

    pub fn t_max(&self) -> f64 {
        self.times.iter().copied().fold(0.0, f64::max)
    }

    /// `(phi, psi)` on the spec's grid; Gaussian data must pass the tail check.
    pub fn initial_data(&self) -> Result<(RealField, RealField)> {
        let grid = self.grid()?;
        match self.data {
            DataSpec::Gaussian { amp, width, center } => {
                let f = gaussian_data(amp, width, center, &grid)?;
                Ok((f.clone(), f))
            }
            DataSpec::Rough { s_target, seed } => Ok((
                rough_data(s_target, seed, &grid)?,
                rough_data(s_target, seed.wrapping_add(1), &grid)?,
            )),
        }
    }
}
