//! JSON run configuration: schema-validated (unknown keys rejected),
//! with defaults matching the stock desk-scale setups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::DerivativeScheme;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dim: usize,
    #[serde(default)]
    pub mass: f64,
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub params: ParamSection,
    #[serde(default)]
    pub monitors: MonitorSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_true")]
    pub coupled: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    pub half_width: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// `dt = dt_factor * dx`; must satisfy the CFL bound `<= 0.5`.
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

fn default_dt_factor() -> f64 {
    0.08
}

fn default_t_end() -> f64 {
    10.0
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            dt_factor: default_dt_factor(),
            t_end: default_t_end(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_amplitude() -> f64 {
    0.01
}

fn default_width() -> f64 {
    2.0
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            amplitude: default_amplitude(),
            width: default_width(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSection {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Vector-field order used by the bootstrap density monitor.
    #[serde(default = "default_gamma_order")]
    pub gamma_order: usize,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.05
}

fn default_gamma_order() -> usize {
    2
}

impl Default for ParamSection {
    fn default() -> Self {
        ParamSection {
            lambda: default_lambda(),
            delta: default_delta(),
            gamma_order: default_gamma_order(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    /// Steps between monitor rows.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Accumulate ghost norms, cone flux and identity balances.
    #[serde(default = "default_true")]
    pub ghost_norms: bool,
    /// Hyperbolic times for truncated-hyperboloid energies (needs a
    /// full-rate history up to `t(max s)`).
    #[serde(default)]
    pub hyperboloid_s: Vec<f64>,
    /// Dyadic ladder times for scattering tails, e.g. [5, 10, 20, 40].
    #[serde(default)]
    pub ladder: Vec<f64>,
    /// Use the transformed sources in the tails (2D massless only).
    #[serde(default)]
    pub transformed_tails: bool,
    /// Co-evolve the wave potential (2D massless only).
    #[serde(default)]
    pub wave_potential: bool,
    /// Sample the bootstrap space-time density.
    #[serde(default)]
    pub bootstrap: bool,
    /// Per-monitor-time transform and equation residuals (keeps a
    /// short rolling window of full-rate states).
    #[serde(default)]
    pub transforms: bool,
    /// Time window for the decay-exponent fits; defaults to
    /// `[10, t_end]`.
    #[serde(default)]
    pub decay_window: Option<[f64; 2]>,
    /// Write a checkpoint every this many steps (0 = final only).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Weight exponent for the scattering split integrals.
    #[serde(default = "default_split_delta")]
    pub split_delta: f64,
}

fn default_stride() -> usize {
    5
}

fn default_split_delta() -> f64 {
    0.1
}

impl Default for MonitorSection {
    fn default() -> Self {
        MonitorSection {
            stride: default_stride(),
            ghost_norms: true,
            hyperboloid_s: Vec::new(),
            ladder: Vec::new(),
            transformed_tails: false,
            wave_potential: false,
            bootstrap: false,
            transforms: false,
            decay_window: None,
            checkpoint_every: 0,
            split_delta: default_split_delta(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Spectral,
    Fd4,
}

impl From<Scheme> for DerivativeScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Spectral => DerivativeScheme::Spectral,
            Scheme::Fd4 => DerivativeScheme::Fd4,
        }
    }
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(0.0..=1.0).contains(&self.mass) {
            return Err(Error::config("mass must lie in [0, 1]"));
        }
        if self.dim == 2 && self.mass != 0.0 {
            return Err(Error::config("the 2D system runs with mass 0"));
        }
        if self.grid.points < 16 || self.grid.points % 2 != 0 {
            return Err(Error::config("grid.points must be even and >= 16"));
        }
        if self.grid.half_width <= 0.0 {
            return Err(Error::config("grid.half_width must be positive"));
        }
        if self.time.dt_factor <= 0.0 || self.time.dt_factor > 0.5 {
            return Err(Error::config(
                "time.dt_factor must lie in (0, 0.5] (CFL bound)",
            ));
        }
        if self.time.t_end <= 2.0 {
            return Err(Error::config("time.t_end must exceed the start time 2"));
        }
        if self.params.lambda <= 0.0 {
            return Err(Error::config("params.lambda must be positive"));
        }
        if self.params.delta < 0.0 {
            return Err(Error::config("params.delta must be non-negative"));
        }
        // no-wrap invariant: support radius + travel distance inside box
        let support = 6.0 * self.data.width;
        if self.data.amplitude != 0.0 && support + (self.time.t_end - 2.0) >= self.grid.half_width
        {
            return Err(Error::config(format!(
                "signal would wrap: support {support} + (t_end - 2) must stay below half_width {}",
                self.grid.half_width
            )));
        }
        if self.monitors.stride == 0 {
            return Err(Error::config("monitors.stride must be positive"));
        }
        let mut prev = f64::NEG_INFINITY;
        for &l in &self.monitors.ladder {
            if l <= prev {
                return Err(Error::config("monitors.ladder must be strictly increasing"));
            }
            prev = l;
        }
        if (self.monitors.transformed_tails || self.monitors.wave_potential)
            && (self.dim != 2 || self.mass != 0.0)
        {
            return Err(Error::config(
                "transformed tails and the wave potential require dim 2 and mass 0",
            ));
        }
        Ok(())
    }

    /// Stock 2D configuration (massless, decay-run box).
    pub fn default_2d() -> Self {
        ConfigFile {
            dim: 2,
            mass: 0.0,
            grid: GridSection {
                points: 256,
                half_width: 56.0,
            },
            time: TimeSection {
                dt_factor: 0.08,
                t_end: 40.0,
            },
            data: DataSection {
                amplitude: 0.01,
                width: 2.0,
            },
            params: ParamSection::default(),
            monitors: MonitorSection {
                ladder: vec![5.0, 10.0, 20.0, 40.0],
                transformed_tails: true,
                wave_potential: true,
                bootstrap: true,
                transforms: true,
                decay_window: Some([10.0, 40.0]),
                ..Default::default()
            },
            seed: 0,
            threads: None,
            scheme: Scheme::Spectral,
            output: None,
            coupled: true,
        }
    }

    /// Stock 3D configuration for one mass value.
    pub fn default_3d(mass: f64) -> Self {
        ConfigFile {
            dim: 3,
            mass,
            grid: GridSection {
                points: 96,
                half_width: 28.0,
            },
            time: TimeSection {
                dt_factor: 0.08,
                t_end: 14.0,
            },
            data: DataSection {
                amplitude: 0.02,
                width: 2.0,
            },
            params: ParamSection::default(),
            monitors: MonitorSection {
                ladder: vec![5.0, 10.0],
                decay_window: Some([6.0, 14.0]),
                ..Default::default()
            },
            seed: 0,
            threads: None,
            scheme: Scheme::Spectral,
            output: None,
            coupled: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_configs_validate() {
        ConfigFile::default_2d().validate().unwrap();
        ConfigFile::default_3d(0.5).validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{"dim": 2, "grid": {"points": 64, "half_width": 20.0}, "bogus": 1}"#;
        assert!(ConfigFile::from_json(json).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let cfg = ConfigFile::default_2d();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ConfigFile::from_json(&text).unwrap();
        assert_eq!(back.dim, 2);
        assert_eq!(back.grid.points, 256);
        assert_eq!(back.monitors.ladder, vec![5.0, 10.0, 20.0, 40.0]);
    }

    #[test]
    fn invariants_enforced() {
        let mut cfg = ConfigFile::default_2d();
        cfg.time.dt_factor = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = ConfigFile::default_2d();
        cfg.time.t_end = 60.0; // would wrap
        assert!(cfg.validate().is_err());
        let mut cfg = ConfigFile::default_3d(0.5);
        cfg.monitors.wave_potential = true;
        assert!(cfg.validate().is_err());
        let mut cfg = ConfigFile::default_2d();
        cfg.monitors.ladder = vec![5.0, 4.0];
        assert!(cfg.validate().is_err());
    }
}
