//! Snowflake removal for event-camera streams by dwell-time thresholding.
//!
//! A snowflake crossing a pixel produces a positive edge when it arrives and a
//! negative edge when it leaves. Under forward ego-motion the time between the
//! two (the dwell time) is `D·ℓ / (V·r)`, independent of the flake's distance,
//! and short compared with the dwell of background details. The crate
//! provides:
//!
//! - [`event`]: events, camera geometry and labeled streams.
//! - [`inceptive`]: inceptive / trailing / noisy event classification.
//! - [`model`]: the closed-form dwell-time model, likelihood ratio, threshold
//!   selection and error-rate formulas.
//! - [`quad`]: adaptive Gauss–Kronrod quadrature used by the model.
//! - [`detector`]: the per-pixel pairing detector that flags snow events.
//! - [`synth`]: a seeded ground-truth scene generator.
//! - [`eval`]: event metrics, dwell histograms, removal curves and box metrics.
//! - [`render`]: accumulation frames.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line front end live in the `snowdwell` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod detector;
pub mod eval;
pub mod event;
pub mod inceptive;
pub mod model;
pub mod quad;
pub mod render;
pub mod synth;

pub use detector::{
    detect, split, DetectorConfig, EtaSchedule, ExpirePolicy, Pair, StreamingDetector,
};
pub use event::{
    CameraGeometry, Event, EventClass, LabeledStream, MotionParams, Polarity, StreamError,
};
pub use inceptive::{classify, FilterConfig, IeGraphNode};
pub use model::{DiameterDensity, ModelError, ThresholdConfig};

/// Microseconds per second. Every time quantity in the crate is in
/// microseconds, lengths in millimeters and velocities in mm/s.
pub const MICROS_PER_SECOND: f64 = 1.0e6;

/// Converts km/h to mm/s.
pub fn kmh_to_mm_s(kmh: f64) -> f64 {
    kmh * 1.0e6 / 3600.0
}
