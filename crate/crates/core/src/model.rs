//! Closed-form dwell-time model and Neyman–Pearson threshold selection.
//!
//! A flake of diameter `D` seen at image radius `r` under forward motion at
//! speed `V` covers a pixel for `T = D·ℓ / (V·r)`, whatever its distance.
//! With flakes uniform over a circular detector of radius `R` the dwell pdf
//! is `2D²ℓ² / (R²V²T³)` for `T > Dℓ/(VR)`. Thresholding `T` at
//! `η = τθ/V` (θ the largest flake) makes both error rates independent of
//! `V`; `τ = ℓ / (R√α)` bounds the rate of snow kept as background by `α`.
//!
//! Times are in microseconds, lengths in millimeters, speeds in mm/s.

use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::event::{CameraGeometry, MotionParams};
use crate::quad::{self, Tolerance};
use crate::MICROS_PER_SECOND;

/// Largest snowflake diameter usually reported, millimeters.
pub const DEFAULT_THETA_MM: f64 = 5.0;

const QUAD_TOL: Tolerance = Tolerance {
    abs: 1e-300,
    rel: 1e-10,
    max_intervals: 4000,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dwell time is unbounded on the ego-motion axis (r = 0)")]
    Singularity,
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(
        "null-hypothesis density has mass above θ = {theta_mm} mm (support up to {max_mm} mm)"
    )]
    NullAboveTheta { theta_mm: f64, max_mm: f64 },
    #[error("null-hypothesis density has no second moment below θ; likelihood ratio undefined")]
    DegenerateNull,
    #[error("calibration needs at least one dwell sample")]
    NoSamples,
    #[error("neither a dwell threshold nor (τ or α) with a velocity was given")]
    Unresolved,
}

fn require(
    name: &'static str,
    requirement: &'static str,
    value: f64,
    ok: bool,
) -> Result<(), ModelError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            requirement,
            value,
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    require(
        name,
        "positive and finite",
        value,
        value > 0.0 && value.is_finite(),
    )
}

fn probability_open(name: &'static str, value: f64) -> Result<(), ModelError> {
    require(name, "in (0, 1)", value, value > 0.0 && value < 1.0)
}

/// Standard normal cdf.
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Diameter distribution of snowflakes (null hypothesis) or of background
/// details (alternative).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiameterDensity {
    /// Uniform on `(0, max_mm]`.
    Uniform { max_mm: f64 },
    /// Lognormal (`ln D ~ N(mu, sigma²)`) truncated to `(0, max_mm]`.
    TruncatedLogNormal { mu: f64, sigma: f64, max_mm: f64 },
    /// All mass at `d_mm`.
    PointMass { d_mm: f64 },
}

impl DiameterDensity {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            DiameterDensity::Uniform { max_mm } => positive("uniform max diameter", max_mm),
            DiameterDensity::TruncatedLogNormal { mu, sigma, max_mm } => {
                require("lognormal mu", "finite", mu, mu.is_finite())?;
                positive("lognormal sigma", sigma)?;
                positive("lognormal max diameter", max_mm)?;
                require(
                    "lognormal truncation mass",
                    "positive",
                    max_mm,
                    self.lognormal_mass() > 0.0,
                )
            }
            DiameterDensity::PointMass { d_mm } => positive("point-mass diameter", d_mm),
        }
    }

    /// Upper end of the support.
    pub fn max_mm(&self) -> f64 {
        match *self {
            DiameterDensity::Uniform { max_mm }
            | DiameterDensity::TruncatedLogNormal { max_mm, .. } => max_mm,
            DiameterDensity::PointMass { d_mm } => d_mm,
        }
    }

    fn lognormal_mass(&self) -> f64 {
        match *self {
            DiameterDensity::TruncatedLogNormal { mu, sigma, max_mm } => {
                normal_cdf((libm::log(max_mm) - mu) / sigma)
            }
            _ => 1.0,
        }
    }

    /// Density at `d`. The point mass has no density and reports 0.
    pub fn pdf(&self, d: f64) -> f64 {
        if !(d > 0.0) || d > self.max_mm() {
            return 0.0;
        }
        match *self {
            DiameterDensity::Uniform { max_mm } => 1.0 / max_mm,
            DiameterDensity::TruncatedLogNormal { mu, sigma, .. } => {
                let z = (libm::log(d) - mu) / sigma;
                let phi = libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI);
                phi / (d * sigma * self.lognormal_mass())
            }
            DiameterDensity::PointMass { .. } => 0.0,
        }
    }

    pub fn cdf(&self, d: f64) -> f64 {
        if !(d > 0.0) {
            return 0.0;
        }
        match *self {
            DiameterDensity::Uniform { max_mm } => libm::fmin(d / max_mm, 1.0),
            DiameterDensity::TruncatedLogNormal { mu, sigma, max_mm } => {
                if d >= max_mm {
                    1.0
                } else {
                    normal_cdf((libm::log(d) - mu) / sigma) / self.lognormal_mass()
                }
            }
            DiameterDensity::PointMass { d_mm } => {
                if d >= d_mm {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫₀^upper g(D) f(D) dD` (the point mass is included when
    /// `d ≤ upper`).
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G, upper: f64) -> f64 {
        let top = libm::fmin(upper, self.max_mm());
        if !(top > 0.0) {
            return 0.0;
        }
        match *self {
            DiameterDensity::PointMass { d_mm } => {
                if d_mm <= upper {
                    g(d_mm)
                } else {
                    0.0
                }
            }
            _ => quad::integrate(|d| g(d) * self.pdf(d), 0.0, top, QUAD_TOL).value,
        }
    }

    /// Draws one diameter by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match *self {
            DiameterDensity::Uniform { max_mm } => max_mm * (1.0 - u),
            DiameterDensity::TruncatedLogNormal { mu, sigma, max_mm } => {
                let target = u * self.lognormal_mass();
                let (mut lo, mut hi) = (-40.0f64, (libm::log(max_mm) - mu) / sigma);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if normal_cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                libm::fmin(libm::exp(mu + sigma * 0.5 * (lo + hi)), max_mm)
            }
            DiameterDensity::PointMass { d_mm } => d_mm,
        }
    }
}

/// Thresholding parameters. Optional fields are only checked when used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdConfig {
    /// θ, largest snowflake diameter, mm.
    pub theta_mm: f64,
    /// Significance for the false-positive version.
    pub alpha: Option<f64>,
    /// Significance for the false-negative (calibrated) version.
    pub beta: Option<f64>,
    /// Normalized threshold τ.
    pub tau: Option<f64>,
    /// Fixed dwell threshold η, µs. Takes precedence over τ.
    pub eta_us: Option<f64>,
    /// Half-width of the spatial pairing window, pixels.
    pub omega_px: u32,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            theta_mm: DEFAULT_THETA_MM,
            alpha: None,
            beta: None,
            tau: None,
            eta_us: None,
            omega_px: 1,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("theta_mm", self.theta_mm)?;
        if let Some(a) = self.alpha {
            probability_open("alpha", a)?;
        }
        if let Some(b) = self.beta {
            probability_open("beta", b)?;
        }
        if let Some(t) = self.tau {
            positive("tau", t)?;
        }
        if let Some(e) = self.eta_us {
            positive("eta_us", e)?;
        }
        Ok(())
    }

    /// τ as given, or derived from α.
    pub fn resolve_tau(&self, geom: &CameraGeometry) -> Result<f64, ModelError> {
        match (self.tau, self.alpha) {
            (Some(t), _) => {
                positive("tau", t)?;
                Ok(t)
            }
            (None, Some(a)) => np_threshold_alpha(a, geom),
            (None, None) => Err(ModelError::Unresolved),
        }
    }

    /// η as given, or `τθ/V`.
    pub fn resolve_eta(
        &self,
        geom: &CameraGeometry,
        motion: Option<&MotionParams>,
    ) -> Result<f64, ModelError> {
        self.validate()?;
        if let Some(e) = self.eta_us {
            return Ok(e);
        }
        let motion = motion.ok_or(ModelError::Unresolved)?;
        let tau = self.resolve_tau(geom)?;
        eta_from_tau(tau, self.theta_mm, motion)
    }
}

/// `T = D·ℓ / (V·r)` in µs.
pub fn dwell_time(
    d_mm: f64,
    geom: &CameraGeometry,
    motion: &MotionParams,
    r_mm: f64,
) -> Result<f64, ModelError> {
    positive("diameter", d_mm)?;
    positive("velocity", motion.velocity_mm_s)?;
    require("image radius", "nonnegative", r_mm, r_mm >= 0.0)?;
    if r_mm == 0.0 {
        return Err(ModelError::Singularity);
    }
    Ok(MICROS_PER_SECOND * d_mm * geom.focal_mm / (motion.velocity_mm_s * r_mm))
}

/// Smallest possible dwell time `Dℓ/(VR)` in µs, reached at the detector rim.
pub fn dwell_support_min(d_mm: f64, geom: &CameraGeometry, motion: &MotionParams) -> f64 {
    MICROS_PER_SECOND * d_mm * geom.focal_mm / (motion.velocity_mm_s * geom.radius_mm)
}

/// Dwell-time density per microsecond for a flake of diameter `d_mm`.
pub fn dwell_pdf(t_us: f64, d_mm: f64, geom: &CameraGeometry, motion: &MotionParams) -> f64 {
    let a = dwell_support_min(d_mm, geom, motion);
    if t_us > a {
        2.0 * a * a / (t_us * t_us * t_us)
    } else {
        0.0
    }
}

/// `P(T ≤ t | D)`: `1 − (Dℓ/(VRt))²` above the support minimum.
pub fn dwell_cdf(t_us: f64, d_mm: f64, geom: &CameraGeometry, motion: &MotionParams) -> f64 {
    let a = dwell_support_min(d_mm, geom, motion);
    if t_us > a {
        1.0 - (a / t_us) * (a / t_us)
    } else {
        0.0
    }
}

/// Dwell cdf marginalized over a diameter density.
pub fn dwell_cdf_marginal(
    t_us: f64,
    density: &DiameterDensity,
    geom: &CameraGeometry,
    motion: &MotionParams,
) -> f64 {
    if !(t_us > 0.0) {
        return 0.0;
    }
    // Diameters above t·V·R/ℓ cannot dwell as short as t.
    let d_cap = t_us * motion.velocity_mm_s * geom.radius_mm / (geom.focal_mm * MICROS_PER_SECOND);
    density.expect(|d| dwell_cdf(t_us, d, geom, motion), d_cap)
}

/// Dwell time of the largest flake at the rim, `θℓ/(VR)`. The likelihood
/// ratio is monotone above it.
pub fn critical_dwell_us(theta_mm: f64, geom: &CameraGeometry, motion: &MotionParams) -> f64 {
    dwell_support_min(theta_mm, geom, motion)
}

/// Likelihood ratio `f(T|background) / f(T|snow)`.
///
/// Both likelihoods share the factor `2ℓ²/(R²V²T³)`, leaving
/// `∫₀^{TVR/ℓ} D² f₁(D) dD / ∫₀^{min(θ, TVR/ℓ)} D² f₀(D) dD`. Above the
/// critical dwell the denominator is the full `∫₀^θ`, and the ratio is
/// nondecreasing in `T`. Returns `+∞` when the null has no mass that can
/// produce a dwell as short as `T`.
pub fn likelihood_ratio(
    t_us: f64,
    h0: &DiameterDensity,
    h1: &DiameterDensity,
    cfg: &ThresholdConfig,
    geom: &CameraGeometry,
    motion: &MotionParams,
) -> Result<f64, ModelError> {
    positive("dwell time", t_us)?;
    positive("velocity", motion.velocity_mm_s)?;
    cfg.validate()?;
    h0.validate()?;
    h1.validate()?;
    if h0.max_mm() > cfg.theta_mm {
        return Err(ModelError::NullAboveTheta {
            theta_mm: cfg.theta_mm,
            max_mm: h0.max_mm(),
        });
    }
    let full = h0.expect(|d| d * d, cfg.theta_mm);
    if !(full > 0.0) {
        return Err(ModelError::DegenerateNull);
    }
    let c = t_us * motion.velocity_mm_s * geom.radius_mm / (geom.focal_mm * MICROS_PER_SECOND);
    let num = h1.expect(|d| d * d, c);
    let den = if c >= cfg.theta_mm {
        full
    } else {
        h0.expect(|d| d * d, c)
    };
    if den > 0.0 {
        Ok(num / den)
    } else {
        Ok(f64::INFINITY)
    }
}

/// `τ = ℓ / (R√α)`.
pub fn np_threshold_alpha(alpha: f64, geom: &CameraGeometry) -> Result<f64, ModelError> {
    probability_open("alpha", alpha)?;
    Ok(geom.focal_mm / (geom.radius_mm * libm::sqrt(alpha)))
}

/// Upper bound `ℓ²/(R²τ²)` on the snow-kept rate, clamped to `[0, 1]`.
pub fn fp_rate_bound(tau: f64, geom: &CameraGeometry) -> f64 {
    let q = geom.focal_mm / (geom.radius_mm * tau);
    (q * q).clamp(0.0, 1.0)
}

/// `P(T > η | snow)` at `η = τθ/V`: `∫₀^θ min(1, D²ℓ²/(R²θ²τ²)) f₀(D) dD`.
///
/// The `min` only matters below the operating range (`τ < ℓ/R`), where every
/// flake dwells longer than η.
pub fn fp_rate(
    tau: f64,
    h0: &DiameterDensity,
    cfg: &ThresholdConfig,
    geom: &CameraGeometry,
) -> Result<f64, ModelError> {
    positive("tau", tau)?;
    positive("theta_mm", cfg.theta_mm)?;
    h0.validate()?;
    if h0.max_mm() > cfg.theta_mm {
        return Err(ModelError::NullAboveTheta {
            theta_mm: cfg.theta_mm,
            max_mm: h0.max_mm(),
        });
    }
    let k = geom.focal_mm / (geom.radius_mm * cfg.theta_mm * tau);
    let p = h0.expect(|d| libm::fmin(1.0, (d * k) * (d * k)), cfg.theta_mm);
    Ok(p.clamp(0.0, 1.0))
}

/// `P(T ≤ η | background)` at `η = τθ/V`:
/// `∫₀^{τθR/ℓ} (1 − D²ℓ²/(R²θ²τ²)) f₁(D) dD`.
pub fn miss_rate(
    tau: f64,
    h1: &DiameterDensity,
    theta_mm: f64,
    geom: &CameraGeometry,
) -> Result<f64, ModelError> {
    positive("tau", tau)?;
    positive("theta_mm", theta_mm)?;
    h1.validate()?;
    let k = geom.focal_mm / (geom.radius_mm * theta_mm * tau);
    let upper = 1.0 / k;
    Ok(h1
        .expect(|d| 1.0 - (d * k) * (d * k), upper)
        .clamp(0.0, 1.0))
}

/// Rate at which a background detail of size `d0_mm` is removed as snow when
/// τ is chosen from α: `max(1 − α·D₀²/θ², 0)`.
pub fn fn_rate(d0_mm: f64, alpha: f64, theta_mm: f64) -> Result<f64, ModelError> {
    require("detail size", "nonnegative", d0_mm, d0_mm >= 0.0)?;
    probability_open("alpha", alpha)?;
    positive("theta_mm", theta_mm)?;
    Ok(libm::fmax(
        1.0 - alpha * d0_mm * d0_mm / (theta_mm * theta_mm),
        0.0,
    ))
}

/// `η = τθ/V` in µs.
pub fn eta_from_tau(tau: f64, theta_mm: f64, motion: &MotionParams) -> Result<f64, ModelError> {
    positive("tau", tau)?;
    positive("theta_mm", theta_mm)?;
    positive("velocity", motion.velocity_mm_s)?;
    Ok(MICROS_PER_SECOND * tau * theta_mm / motion.velocity_mm_s)
}

/// Smallest τ whose threshold `τθ/V₀` keeps a fraction `β` of the baseline
/// (background-only) dwell samples at or below it.
///
/// Uses the lower empirical quantile: the `⌈βn⌉`-th smallest sample. `β = 0`
/// puts the threshold just below the smallest sample.
pub fn calibrate_tau_beta(
    baseline_dwells_us: &[f64],
    beta: f64,
    theta_mm: f64,
    v0_mm_s: f64,
) -> Result<f64, ModelError> {
    if baseline_dwells_us.is_empty() {
        return Err(ModelError::NoSamples);
    }
    require("beta", "in [0, 1]", beta, (0.0..=1.0).contains(&beta))?;
    positive("theta_mm", theta_mm)?;
    positive("baseline velocity", v0_mm_s)?;
    for &s in baseline_dwells_us {
        positive("dwell sample", s)?;
    }
    let mut sorted: Vec<f64> = baseline_dwells_us.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let x = beta * n as f64;
    let rounded = libm::round(x);
    let k = if libm::fabs(x - rounded) < 1e-9 {
        rounded
    } else {
        libm::ceil(x)
    } as usize;
    let eta = if k == 0 {
        libm::nextafter(sorted[0], 0.0)
    } else {
        sorted[k.min(n) - 1]
    };
    Ok(eta * v0_mm_s / (theta_mm * MICROS_PER_SECOND))
}
