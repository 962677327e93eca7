//! Events, camera geometry and labeled streams.

use alloc::vec::Vec;
use thiserror::Error;

/// Sign of the log-intensity change that fired an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    #[inline]
    pub fn is_positive(self) -> bool {
        matches!(self, Polarity::Positive)
    }

    /// Index used by per-polarity tables: 0 for positive, 1 for negative.
    #[inline]
    pub(crate) fn slot(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
        }
    }
}

/// Inceptive-filter label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EventClass {
    #[default]
    Unclassified,
    Inceptive,
    Trailing,
    Noisy,
}

impl EventClass {
    /// Two-bit code used by the binary and CSV formats.
    pub fn code(self) -> u8 {
        match self {
            EventClass::Unclassified => 0,
            EventClass::Inceptive => 1,
            EventClass::Trailing => 2,
            EventClass::Noisy => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => EventClass::Unclassified,
            1 => EventClass::Inceptive,
            2 => EventClass::Trailing,
            3 => EventClass::Noisy,
            _ => return None,
        })
    }
}

/// One sensor firing plus the labels attached to it along the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
    pub class: EventClass,
    /// Snow prediction.
    pub snow: bool,
    /// Ground truth, `Some(true)` for snow.
    pub truth: Option<bool>,
    /// Index (in the owning stream) of the inceptive event a trailing event
    /// belongs to. Set only on trailing events.
    pub ie_ref: Option<u32>,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Event {
            t,
            x,
            y,
            polarity,
            class: EventClass::Unclassified,
            snow: false,
            truth: None,
            ie_ref: None,
        }
    }

    pub fn with_truth(mut self, snow: bool) -> Self {
        self.truth = Some(snow);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("timestamp regression at event {index}: {t} after {prev}")]
    Unsorted { index: usize, prev: u64, t: u64 },
    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("event {index} is unclassified; run the inceptive filter first")]
    Unclassified { index: usize },
    #[error("event {index} carries no ground-truth flag")]
    MissingTruth { index: usize },
    #[error("pixel ({x}, {y}) lies outside the {width}x{height} sensor")]
    PixelOutOfBounds {
        x: u32,
        y: u32,
        width: u16,
        height: u16,
    },
    #[error("invalid geometry: {0}")]
    Geometry(&'static str),
    #[error("stream holds {0} events, more than 32-bit event references can address")]
    TooLong(usize),
}

/// Pinhole camera with a rectangular sensor.
///
/// `radius_mm` is the effective detector radius used by the circular-detector
/// dwell model; [`CameraGeometry::new`] sets it to the sensor half-diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraGeometry {
    pub focal_mm: f64,
    pub radius_mm: f64,
    pub width_px: u16,
    pub height_px: u16,
    pub pitch_mm: f64,
    /// Pixel coordinates of the ego-motion center.
    pub principal: (f64, f64),
}

impl CameraGeometry {
    /// Builds a geometry with the principal point at the sensor center and the
    /// half-diagonal as effective radius.
    pub fn new(
        width_px: u16,
        height_px: u16,
        focal_mm: f64,
        pitch_mm: f64,
    ) -> Result<Self, StreamError> {
        let radius_mm = half_diagonal_mm(width_px, height_px, pitch_mm);
        let geom = CameraGeometry {
            focal_mm,
            radius_mm,
            width_px,
            height_px,
            pitch_mm,
            principal: (f64::from(width_px) / 2.0, f64::from(height_px) / 2.0),
        };
        geom.validate()?;
        Ok(geom)
    }

    /// 5 mm lens on a default sensor of the given size with 5 µm pixels.
    pub fn with_sensor(width_px: u16, height_px: u16) -> Result<Self, StreamError> {
        Self::new(width_px, height_px, 5.0, 0.005)
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(StreamError::Geometry("sensor dimensions must be positive"));
        }
        if !(self.focal_mm > 0.0 && self.focal_mm.is_finite()) {
            return Err(StreamError::Geometry("focal length must be positive"));
        }
        if !(self.radius_mm > 0.0 && self.radius_mm.is_finite()) {
            return Err(StreamError::Geometry("detector radius must be positive"));
        }
        if !(self.pitch_mm > 0.0 && self.pitch_mm.is_finite()) {
            return Err(StreamError::Geometry("pixel pitch must be positive"));
        }
        if !(self.principal.0.is_finite() && self.principal.1.is_finite()) {
            return Err(StreamError::Geometry("principal point must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        usize::from(self.width_px) * usize::from(self.height_px)
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < u32::from(self.width_px) && y < u32::from(self.height_px)
    }

    /// Distance in millimeters on the image plane between pixel `(x, y)` and
    /// the principal point.
    pub fn pixel_radius(&self, x: u32, y: u32) -> Result<f64, StreamError> {
        if !self.contains(x, y) {
            return Err(StreamError::PixelOutOfBounds {
                x,
                y,
                width: self.width_px,
                height: self.height_px,
            });
        }
        let dx = f64::from(x) - self.principal.0;
        let dy = f64::from(y) - self.principal.1;
        Ok(self.pitch_mm * libm::hypot(dx, dy))
    }
}

impl Default for CameraGeometry {
    /// 1280×720 sensor, 5 mm lens, 5 µm pitch.
    fn default() -> Self {
        CameraGeometry::with_sensor(1280, 720).expect("default geometry is valid")
    }
}

/// `pitch · √((W/2)² + (H/2)²)`.
pub fn half_diagonal_mm(width_px: u16, height_px: u16, pitch_mm: f64) -> f64 {
    pitch_mm * libm::hypot(f64::from(width_px) / 2.0, f64::from(height_px) / 2.0)
}

/// Ego-motion along the optical axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionParams {
    pub velocity_mm_s: f64,
}

impl MotionParams {
    pub fn new(velocity_mm_s: f64) -> Self {
        MotionParams { velocity_mm_s }
    }

    pub fn from_kmh(kmh: f64) -> Self {
        MotionParams {
            velocity_mm_s: crate::kmh_to_mm_s(kmh),
        }
    }
}

/// Time-ordered events recorded with one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledStream {
    pub geometry: CameraGeometry,
    pub events: Vec<Event>,
}

impl LabeledStream {
    pub fn new(geometry: CameraGeometry, events: Vec<Event>) -> Self {
        LabeledStream { geometry, events }
    }

    pub fn empty(geometry: CameraGeometry) -> Self {
        LabeledStream {
            geometry,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// True iff timestamps are nondecreasing.
    pub fn sort_check(&self) -> bool {
        sort_check(&self.events)
    }

    /// Rejects streams with timestamp regressions or pixels outside the sensor.
    pub fn validate(&self) -> Result<(), StreamError> {
        if self.events.len() >= u32::MAX as usize {
            return Err(StreamError::TooLong(self.events.len()));
        }
        let (w, h) = (self.geometry.width_px, self.geometry.height_px);
        let mut prev = 0u64;
        for (index, e) in self.events.iter().enumerate() {
            if e.t < prev {
                return Err(StreamError::Unsorted {
                    index,
                    prev,
                    t: e.t,
                });
            }
            prev = e.t;
            if e.x >= w || e.y >= h {
                return Err(StreamError::OutOfBounds {
                    index,
                    x: e.x,
                    y: e.y,
                    width: w,
                    height: h,
                });
            }
        }
        Ok(())
    }

    /// Stable sort by timestamp; ties keep their input order.
    pub fn sort_stable(&mut self) {
        self.events.sort_by_key(|e| e.t);
    }

    /// Rebuilds `ie_ref` of every trailing event from the class labels: each
    /// trailing event is owned by the most recent inceptive event at the same
    /// pixel with the same polarity (or, with `per_polarity = false`, of any
    /// polarity). Trailing events without such an owner keep `ie_ref = None`.
    pub fn relink(&mut self, per_polarity: bool) {
        let n = self.geometry.pixel_count();
        let chains = if per_polarity { 2 } else { 1 };
        let mut last_ie = alloc::vec![u32::MAX; n * chains];
        let width = usize::from(self.geometry.width_px);
        for (i, e) in self.events.iter_mut().enumerate() {
            let pix = usize::from(e.y) * width + usize::from(e.x);
            let slot = if per_polarity {
                pix * 2 + e.polarity.slot()
            } else {
                pix
            };
            match e.class {
                EventClass::Inceptive => {
                    last_ie[slot] = i as u32;
                    e.ie_ref = None;
                }
                EventClass::Trailing => {
                    let owner = last_ie[slot];
                    e.ie_ref = (owner != u32::MAX).then_some(owner);
                }
                _ => e.ie_ref = None,
            }
        }
    }
}

/// True iff timestamps are nondecreasing. Empty input is sorted.
pub fn sort_check(events: &[Event]) -> bool {
    events.windows(2).all(|w| w[0].t <= w[1].t)
}
