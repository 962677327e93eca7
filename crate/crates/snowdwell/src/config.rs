//! Flat `key = value` configuration files (TOML syntax). Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use snowdwell_core::model::DEFAULT_THETA_MM;
use snowdwell_core::synth::{BackgroundField, BackgroundSpec, SynthConfig};
use snowdwell_core::{CameraGeometry, DiameterDensity, MotionParams, ThresholdConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config key {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub width_px: Option<u16>,
    pub height_px: Option<u16>,
    pub focal_mm: Option<f64>,
    pub pitch_mm: Option<f64>,
    pub radius_mm: Option<f64>,
    pub principal_x: Option<f64>,
    pub principal_y: Option<f64>,

    pub theta_mm: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub eta_us: Option<f64>,
    pub omega_px: Option<u32>,
    pub velocity_mm_s: Option<f64>,
    pub delta_us: Option<u64>,

    pub seed: Option<u64>,
    pub duration_us: Option<u64>,
    pub flake_rate: Option<f64>,
    pub diameter_max_mm: Option<f64>,
    pub trailing_count: Option<u32>,
    pub p_miss: Option<f64>,
    pub jitter_us: Option<u64>,
    pub z_near_mm: Option<f64>,
    pub z_far_mm: Option<f64>,
    pub streak_px: Option<u32>,
    pub min_radius_mm: Option<f64>,
    pub fall_speed_mm_s: Option<f64>,
    pub background_tracks_per_s: Option<f64>,
    pub background_trailing_count: Option<u32>,
}

impl FileConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: p.clone(),
            source,
        })?;
        Self::parse(&text, &p)
    }

    /// Sensor dimensions fall back to `fallback` (e.g. from a file header);
    /// lens, pitch and radius to the 5 mm / 5 µm defaults and the
    /// half-diagonal.
    pub fn geometry(&self, fallback: Option<(u16, u16)>) -> Result<CameraGeometry, ConfigError> {
        let base = CameraGeometry::default();
        let (fw, fh) = fallback.unwrap_or((base.width_px, base.height_px));
        let w = self.width_px.unwrap_or(fw);
        let h = self.height_px.unwrap_or(fh);
        let mut g = CameraGeometry::new(
            w,
            h,
            self.focal_mm.unwrap_or(base.focal_mm),
            self.pitch_mm.unwrap_or(base.pitch_mm),
        )
        .map_err(|e| invalid("geometry", e.to_string()))?;
        if let Some(r) = self.radius_mm {
            g.radius_mm = r;
        }
        if let Some(x) = self.principal_x {
            g.principal.0 = x;
        }
        if let Some(y) = self.principal_y {
            g.principal.1 = y;
        }
        g.validate()
            .map_err(|e| invalid("geometry", e.to_string()))?;
        Ok(g)
    }

    pub fn threshold(&self) -> Result<ThresholdConfig, ConfigError> {
        let cfg = ThresholdConfig {
            theta_mm: self.theta_mm.unwrap_or(DEFAULT_THETA_MM),
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
            eta_us: self.eta_us,
            omega_px: self.omega_px.unwrap_or(1),
        };
        cfg.validate()
            .map_err(|e| invalid("threshold", e.to_string()))?;
        Ok(cfg)
    }

    pub fn velocity(&self) -> Result<Option<MotionParams>, ConfigError> {
        match self.velocity_mm_s {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(invalid("velocity_mm_s", "must be positive"))
            }
            v => Ok(v.map(MotionParams::new)),
        }
    }

    /// Scene parameters over the generator defaults.
    pub fn synth(&self) -> Result<SynthConfig, ConfigError> {
        let d = SynthConfig::default();
        let field = match self.background_tracks_per_s {
            Some(r) if r > 0.0 => Some(BackgroundField {
                tracks_per_s: r,
                trailing_count: self
                    .background_trailing_count
                    .unwrap_or(BackgroundField::default().trailing_count),
                ..BackgroundField::default()
            }),
            _ => None,
        };
        let cfg = SynthConfig {
            geom: self.geometry(None)?,
            motion: self.velocity()?.unwrap_or(d.motion),
            duration_us: self.duration_us.unwrap_or(d.duration_us),
            flake_rate: self.flake_rate.unwrap_or(d.flake_rate),
            diameter_density: match self.diameter_max_mm {
                Some(m) => DiameterDensity::Uniform { max_mm: m },
                None => d.diameter_density,
            },
            trailing_count: self.trailing_count.unwrap_or(d.trailing_count),
            delta_us: self.delta_us.unwrap_or(d.delta_us),
            p_miss: self.p_miss.unwrap_or(d.p_miss),
            jitter_us: self.jitter_us.unwrap_or(d.jitter_us),
            background: BackgroundSpec {
                tracks: Vec::new(),
                field,
            },
            seed: self.seed.unwrap_or(d.seed),
            z_near_mm: self.z_near_mm.unwrap_or(d.z_near_mm),
            z_far_mm: self.z_far_mm.unwrap_or(d.z_far_mm),
            streak_px: self.streak_px.unwrap_or(d.streak_px),
            min_radius_mm: self.min_radius_mm.unwrap_or(d.min_radius_mm),
            fall_speed_mm_s: self.fall_speed_mm_s.unwrap_or(d.fall_speed_mm_s),
        };
        cfg.validate()
            .map_err(|e| invalid("synth", e.to_string()))?;
        Ok(cfg)
    }
}
