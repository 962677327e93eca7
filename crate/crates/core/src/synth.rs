//! Seeded ground-truth scene generator.
//!
//! Flakes are placed uniformly over the circular detector at a random depth
//! and moved under forward ego-motion. Each pixel a flake crosses emits a
//! positive inceptive event when the flake arrives, a negative one a dwell
//! time later, and `trailing_count` trailing events after each, spaced Δ/2.
//! Background details follow the same kinematics with configurable edge
//! polarities and a much larger size distribution.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event::{CameraGeometry, Event, LabeledStream, MotionParams, Polarity};
use crate::model::{self, DiameterDensity, ModelError};
use crate::MICROS_PER_SECOND;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("depth must be positive, got {0} mm")]
    NonPositiveDepth(f64),
    #[error("invalid scene parameter {name}: {reason}")]
    Invalid {
        name: &'static str,
        reason: &'static str,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A flake in camera coordinates (mm). `z_mm` is the distance along the
/// optical axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snowflake3D {
    pub x_mm: f64,
    pub y_mm: f64,
    pub z_mm: f64,
    pub d_mm: f64,
}

impl Snowflake3D {
    /// Apparent speed `U = V·√(X²+Y²)/Z` caused by ego-motion, mm/s.
    pub fn apparent_speed(&self, motion: &MotionParams) -> f64 {
        motion.velocity_mm_s * libm::hypot(self.x_mm, self.y_mm) / self.z_mm
    }
}

/// Image-plane view of a flake.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Image-plane position relative to the principal point, mm.
    pub x_img_mm: f64,
    pub y_img_mm: f64,
    /// Apparent diameter in pixels.
    pub d_px: f64,
    /// Apparent speed in pixels per second.
    pub u_px_per_s: f64,
}

impl Projection {
    pub fn radius_mm(&self) -> f64 {
        libm::hypot(self.x_img_mm, self.y_img_mm)
    }

    /// `d/u` in microseconds; equals the model dwell time at this radius.
    pub fn dwell_us(&self) -> f64 {
        MICROS_PER_SECOND * self.d_px / self.u_px_per_s
    }
}

/// Pinhole projection of a flake.
pub fn project(
    flake: &Snowflake3D,
    geom: &CameraGeometry,
    motion: &MotionParams,
) -> Result<Projection, SynthError> {
    if !(flake.z_mm > 0.0) {
        return Err(SynthError::NonPositiveDepth(flake.z_mm));
    }
    let scale = geom.focal_mm / flake.z_mm;
    Ok(Projection {
        x_img_mm: scale * flake.x_mm,
        y_img_mm: scale * flake.y_mm,
        d_px: flake.d_mm * scale / geom.pitch_mm,
        u_px_per_s: scale * flake.apparent_speed(motion) / geom.pitch_mm,
    })
}

/// Polarities of the leading and trailing edge of a background detail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolarityPattern {
    /// Brighter than its surround: positive then negative.
    BrightDetail,
    /// Darker than its surround: negative then positive.
    DarkDetail,
    /// Two rising edges.
    RisingStep,
    /// Two falling edges.
    FallingStep,
}

impl PolarityPattern {
    pub const ALL: [PolarityPattern; 4] = [
        PolarityPattern::BrightDetail,
        PolarityPattern::DarkDetail,
        PolarityPattern::RisingStep,
        PolarityPattern::FallingStep,
    ];

    fn edges(self) -> (Polarity, Polarity) {
        use Polarity::*;
        match self {
            PolarityPattern::BrightDetail => (Positive, Negative),
            PolarityPattern::DarkDetail => (Negative, Positive),
            PolarityPattern::RisingStep => (Positive, Positive),
            PolarityPattern::FallingStep => (Negative, Negative),
        }
    }
}

/// One background detail sweeping outward from `start_px`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeTrack {
    /// Pixel coordinates where the track starts.
    pub start_px: (f64, f64),
    pub t0_us: f64,
    /// Physical size of the detail along its motion, mm.
    pub detail_mm: f64,
    /// Depth at `t0_us`, mm.
    pub depth_mm: f64,
    /// Number of pixels the track crosses at most.
    pub length_px: u32,
    pub pattern: PolarityPattern,
    /// Trailing events after each edge.
    pub trailing_count: u32,
}

/// Randomly spawned background tracks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundField {
    pub tracks_per_s: f64,
    pub detail: DiameterDensity,
    pub z_near_mm: f64,
    pub z_far_mm: f64,
    pub length_px: u32,
    /// Relative weights of [`PolarityPattern::ALL`].
    pub pattern_weights: [f64; 4],
    pub trailing_count: u32,
}

impl Default for BackgroundField {
    fn default() -> Self {
        BackgroundField {
            tracks_per_s: 300.0,
            // Median detail of ~150 mm, capped at 5 m.
            detail: DiameterDensity::TruncatedLogNormal {
                mu: 5.0,
                sigma: 0.8,
                max_mm: 5000.0,
            },
            z_near_mm: 3000.0,
            z_far_mm: 30000.0,
            length_px: 24,
            pattern_weights: [1.0, 1.0, 1.0, 1.0],
            trailing_count: 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BackgroundSpec {
    pub tracks: Vec<EdgeTrack>,
    pub field: Option<BackgroundField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub geom: CameraGeometry,
    pub motion: MotionParams,
    pub duration_us: u64,
    /// Mean flakes per second (Poisson arrivals).
    pub flake_rate: f64,
    pub diameter_density: DiameterDensity,
    /// Trailing events per inceptive event.
    pub trailing_count: u32,
    /// Inceptive filter gap the scene is built for; trailing events are
    /// spaced `Δ/2`.
    pub delta_us: u64,
    pub p_miss: f64,
    /// Half-width of the uniform timestamp jitter, µs.
    pub jitter_us: u64,
    pub background: BackgroundSpec,
    pub seed: u64,
    /// Flake depths are uniform in `[z_near_mm, z_far_mm]`; a flake stops
    /// emitting once it is closer than `z_near_mm`.
    pub z_near_mm: f64,
    pub z_far_mm: f64,
    /// Pixels a flake crosses at most.
    pub streak_px: u32,
    /// Flakes spawned closer than this to the principal point (image plane,
    /// mm) are not emitted.
    pub min_radius_mm: f64,
    /// Intrinsic fall speed, mm/s, downward in the image. Zero in the model.
    pub fall_speed_mm_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            geom: CameraGeometry::default(),
            motion: MotionParams::from_kmh(20.0),
            duration_us: 1_000_000,
            flake_rate: 400.0,
            diameter_density: DiameterDensity::Uniform {
                max_mm: model::DEFAULT_THETA_MM,
            },
            trailing_count: 2,
            delta_us: crate::inceptive::DEFAULT_DELTA_US,
            p_miss: 0.0,
            jitter_us: 0,
            background: BackgroundSpec::default(),
            seed: 0,
            z_near_mm: 5000.0,
            z_far_mm: 20000.0,
            streak_px: 8,
            min_radius_mm: 0.0,
            fall_speed_mm_s: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.geom.validate().map_err(|_| SynthError::Invalid {
            name: "geometry",
            reason: "invalid camera geometry",
        })?;
        let invalid = |name, reason| Err(SynthError::Invalid { name, reason });
        if !(self.motion.velocity_mm_s > 0.0 && self.motion.velocity_mm_s.is_finite()) {
            return invalid("velocity_mm_s", "must be positive");
        }
        if !(self.flake_rate >= 0.0 && self.flake_rate.is_finite()) {
            return invalid("flake_rate", "must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return invalid("p_miss", "must be a probability");
        }
        if self.delta_us == 0 {
            return invalid("delta_us", "must be positive");
        }
        if !(self.z_near_mm > 0.0 && self.z_far_mm >= self.z_near_mm) {
            return invalid("z range", "need 0 < z_near <= z_far");
        }
        if !(self.min_radius_mm >= 0.0) {
            return invalid("min_radius_mm", "must be nonnegative");
        }
        if !self.fall_speed_mm_s.is_finite() {
            return invalid("fall_speed_mm_s", "must be finite");
        }
        self.diameter_density.validate()?;
        for t in &self.background.tracks {
            if !(t.depth_mm > 0.0) {
                return Err(SynthError::NonPositiveDepth(t.depth_mm));
            }
            if !(t.detail_mm > 0.0) {
                return invalid("track detail_mm", "must be positive");
            }
        }
        if let Some(f) = &self.background.field {
            f.detail.validate()?;
            if !(f.tracks_per_s >= 0.0 && f.tracks_per_s.is_finite()) {
                return invalid("tracks_per_s", "must be nonnegative");
            }
            if !(f.z_near_mm > 0.0 && f.z_far_mm >= f.z_near_mm) {
                return invalid("background z range", "need 0 < z_near <= z_far");
            }
            if f.pattern_weights.iter().any(|w| !(*w >= 0.0))
                || f.pattern_weights.iter().sum::<f64>() <= 0.0
            {
                return invalid(
                    "pattern_weights",
                    "need nonnegative weights with a positive sum",
                );
            }
        }
        Ok(())
    }
}

/// Ground truth for one generated flake.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlakeRecord {
    pub flake: Snowflake3D,
    pub spawn_us: f64,
    /// Model dwell time at the spawn position (continuous radius), µs.
    pub dwell_us: f64,
    /// Pixels that received events.
    pub pixels: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub stream: LabeledStream,
    pub flakes: Vec<FlakeRecord>,
}

/// One pixel crossing: where, when, and for how long.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Visit {
    x: u16,
    y: u16,
    t_us: f64,
    dwell_us: f64,
}

/// Follows a point at `(x_w, y_w, z0)` (world mm) forward in time and reports
/// each pixel it enters. The image of a straight 3D path is a straight line
/// and each image coordinate moves monotonically, so pixel boundary crossings
/// have closed-form times. The starting pixel is only partly crossed and is
/// not reported.
struct Tracer<'a> {
    geom: &'a CameraGeometry,
    velocity: f64,
    fall: f64,
}

impl Tracer<'_> {
    #[allow(clippy::too_many_arguments)]
    fn trace(
        &self,
        x_w: f64,
        y_w: f64,
        z0: f64,
        size_mm: f64,
        t0_us: f64,
        z_stop: f64,
        max_px: u32,
        out: &mut Vec<Visit>,
    ) {
        out.clear();
        let g = self.geom;
        let (l, pitch, v, w) = (g.focal_mm, g.pitch_mm, self.velocity, self.fall);
        if !(z0 > 0.0) || max_px == 0 {
            return;
        }
        let mut i = libm::round(g.principal.0 + l * x_w / (z0 * pitch));
        let mut j = libm::round(g.principal.1 + l * y_w / (z0 * pitch));
        let sx = sign(x_w);
        let sy = sign(w * z0 + y_w * v);
        if sx == 0.0 && sy == 0.0 {
            return;
        }
        let mut t = 0.0f64; // seconds since t0
        while out.len() < max_px as usize {
            let tx = if sx != 0.0 {
                let xb = (i + 0.5 * sx - g.principal.0) * pitch;
                if xb * x_w > 0.0 {
                    (z0 - l * x_w / xb) / v
                } else {
                    f64::INFINITY
                }
            } else {
                f64::INFINITY
            };
            let ty = if sy != 0.0 {
                let yb = (j + 0.5 * sy - g.principal.1) * pitch;
                let den = l * w + yb * v;
                if den != 0.0 {
                    (yb * z0 - l * y_w) / den
                } else {
                    f64::INFINITY
                }
            } else {
                f64::INFINITY
            };
            let tx = if tx >= t { tx } else { f64::INFINITY };
            let ty = if ty >= t { ty } else { f64::INFINITY };
            let next = libm::fmin(tx, ty);
            if !next.is_finite() {
                break;
            }
            if tx <= ty {
                i += sx;
            }
            if ty <= tx {
                j += sy;
            }
            t = next;
            let z = z0 - v * t;
            if z < z_stop || !(z > 0.0) {
                break;
            }
            if !(i >= 0.0 && j >= 0.0 && i < f64::from(g.width_px) && j < f64::from(g.height_px)) {
                break;
            }
            let (px, py) = (i as u16, j as u16);
            let dwell_us = if w == 0.0 {
                let r = g.pixel_radius(u32::from(px), u32::from(py)).unwrap_or(0.0);
                if r == 0.0 {
                    continue;
                }
                MICROS_PER_SECOND * size_mm * l / (v * r)
            } else {
                let yw = y_w + w * t;
                let vx = l * x_w * v / (z * z);
                let vy = l * (w * z + yw * v) / (z * z);
                MICROS_PER_SECOND * (size_mm * l / z) / libm::hypot(vx, vy)
            };
            out.push(Visit {
                x: px,
                y: py,
                t_us: t0_us + t * MICROS_PER_SECOND,
                dwell_us,
            });
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Emitter<'a> {
    rng: &'a mut ChaCha8Rng,
    p_miss: f64,
    jitter: u64,
    spacing: u64,
    events: Vec<Event>,
}

impl Emitter<'_> {
    fn emit(&mut self, t: u64, x: u16, y: u16, p: Polarity, truth: bool) {
        if self.p_miss > 0.0 && self.rng.gen::<f64>() < self.p_miss {
            return;
        }
        let t = if self.jitter > 0 {
            let j = self.rng.gen_range(0..=2 * self.jitter);
            (t + j).saturating_sub(self.jitter)
        } else {
            t
        };
        self.events.push(Event::new(t, x, y, p).with_truth(truth));
    }

    /// An edge: inceptive event plus trailing events.
    fn edge(&mut self, t: u64, x: u16, y: u16, p: Polarity, trailing: u32, truth: bool) {
        self.emit(t, x, y, p, truth);
        for j in 1..=u64::from(trailing) {
            self.emit(t + j * self.spacing, x, y, p, truth);
        }
    }

    fn crossing(&mut self, v: &Visit, lead: Polarity, trail: Polarity, trailing: u32, truth: bool) {
        let t_in = libm::round(v.t_us) as u64;
        let t_out = t_in + libm::fmax(libm::round(v.dwell_us), 1.0) as u64;
        self.edge(t_in, v.x, v.y, lead, trailing, truth);
        self.edge(t_out, v.x, v.y, trail, trailing, truth);
    }
}

fn poisson_times(rng: &mut ChaCha8Rng, rate_per_s: f64, duration_us: u64) -> Vec<f64> {
    let mut times = Vec::new();
    if rate_per_s <= 0.0 {
        return times;
    }
    let mean_gap_us = MICROS_PER_SECOND / rate_per_s;
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen();
        t += -libm::log(1.0 - u) * mean_gap_us;
        if t >= duration_us as f64 {
            return times;
        }
        times.push(t);
    }
}

/// Uniform point on a disc of radius `r`.
fn disc_point(rng: &mut ChaCha8Rng, r: f64) -> (f64, f64) {
    let rho = r * libm::sqrt(rng.gen::<f64>());
    let phi = 2.0 * core::f64::consts::PI * rng.gen::<f64>();
    (rho * libm::cos(phi), rho * libm::sin(phi))
}

fn pick_pattern(rng: &mut ChaCha8Rng, weights: &[f64; 4]) -> PolarityPattern {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (w, p) in weights.iter().zip(PolarityPattern::ALL) {
        if u < *w {
            return p;
        }
        u -= w;
    }
    PolarityPattern::ALL[weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)]
}

/// Generates a scene. Deterministic for a fixed configuration (seed
/// included). Events come out sorted by time, ties in generation order.
pub fn generate(cfg: &SynthConfig) -> Result<Scene, SynthError> {
    cfg.validate()?;
    let geom = &cfg.geom;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tracer = Tracer {
        geom,
        velocity: cfg.motion.velocity_mm_s,
        fall: cfg.fall_speed_mm_s,
    };
    let mut visits = Vec::new();

    // Scene layout first, so event-level noise does not perturb it.
    let spawns = poisson_times(&mut rng, cfg.flake_rate, cfg.duration_us);
    let mut flakes = Vec::with_capacity(spawns.len());
    for spawn_us in spawns {
        let (x_img, y_img) = disc_point(&mut rng, geom.radius_mm);
        let z = cfg.z_near_mm + (cfg.z_far_mm - cfg.z_near_mm) * rng.gen::<f64>();
        let d = cfg.diameter_density.sample(&mut rng);
        let flake = Snowflake3D {
            x_mm: x_img * z / geom.focal_mm,
            y_mm: y_img * z / geom.focal_mm,
            z_mm: z,
            d_mm: d,
        };
        let r = libm::hypot(x_img, y_img);
        let dwell_us = MICROS_PER_SECOND * d * geom.focal_mm / (cfg.motion.velocity_mm_s * r);
        flakes.push(FlakeRecord {
            flake,
            spawn_us,
            dwell_us,
            pixels: 0,
        });
    }

    let mut tracks = cfg.background.tracks.clone();
    if let Some(field) = &cfg.background.field {
        for t0_us in poisson_times(&mut rng, field.tracks_per_s, cfg.duration_us) {
            let (x_img, y_img) = disc_point(&mut rng, geom.radius_mm);
            let depth_mm = field.z_near_mm + (field.z_far_mm - field.z_near_mm) * rng.gen::<f64>();
            let detail_mm = field.detail.sample(&mut rng);
            let pattern = pick_pattern(&mut rng, &field.pattern_weights);
            tracks.push(EdgeTrack {
                start_px: (
                    geom.principal.0 + x_img / geom.pitch_mm,
                    geom.principal.1 + y_img / geom.pitch_mm,
                ),
                t0_us,
                detail_mm,
                depth_mm,
                length_px: field.length_px,
                pattern,
                trailing_count: field.trailing_count,
            });
        }
    }

    let mut em = Emitter {
        rng: &mut rng,
        p_miss: cfg.p_miss,
        jitter: cfg.jitter_us,
        spacing: (cfg.delta_us / 2).max(1),
        events: Vec::new(),
    };

    for rec in flakes.iter_mut() {
        let f = rec.flake;
        let (x_img, y_img) = (
            f.x_mm * geom.focal_mm / f.z_mm,
            f.y_mm * geom.focal_mm / f.z_mm,
        );
        if libm::hypot(x_img, y_img) < cfg.min_radius_mm {
            continue;
        }
        tracer.trace(
            f.x_mm,
            f.y_mm,
            f.z_mm,
            f.d_mm,
            rec.spawn_us,
            cfg.z_near_mm,
            cfg.streak_px,
            &mut visits,
        );
        rec.pixels = visits.len() as u32;
        for v in &visits {
            em.crossing(
                v,
                Polarity::Positive,
                Polarity::Negative,
                cfg.trailing_count,
                true,
            );
        }
    }

    for track in &tracks {
        let x_img = (track.start_px.0 - geom.principal.0) * geom.pitch_mm;
        let y_img = (track.start_px.1 - geom.principal.1) * geom.pitch_mm;
        let scale = track.depth_mm / geom.focal_mm;
        let (lead, trail) = track.pattern.edges();
        // Background details are static; only ego-motion moves them.
        let bg_tracer = Tracer {
            geom,
            velocity: cfg.motion.velocity_mm_s,
            fall: 0.0,
        };
        bg_tracer.trace(
            x_img * scale,
            y_img * scale,
            track.depth_mm,
            track.detail_mm,
            track.t0_us,
            0.0,
            track.length_px,
            &mut visits,
        );
        for v in &visits {
            em.crossing(v, lead, trail, track.trailing_count, false);
        }
    }

    let mut events = em.events;
    events.sort_by_key(|e| e.t);
    Ok(Scene {
        stream: LabeledStream::new(*geom, events),
        flakes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventClass;

    fn one_flake_config() -> SynthConfig {
        SynthConfig {
            duration_us: 1,
            flake_rate: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn on_axis_projects_to_origin() {
        let g = CameraGeometry::default();
        let m = MotionParams::from_kmh(20.0);
        for z in [10.0, 1000.0, 1e5] {
            let p = project(
                &Snowflake3D {
                    x_mm: 0.0,
                    y_mm: 0.0,
                    z_mm: z,
                    d_mm: 3.0,
                },
                &g,
                &m,
            )
            .unwrap();
            assert_eq!((p.x_img_mm, p.y_img_mm), (0.0, 0.0));
        }
    }

    #[test]
    fn projection_reference_value() {
        let g = CameraGeometry::default();
        let m = MotionParams::from_kmh(20.0);
        let p = project(
            &Snowflake3D {
                x_mm: 100.0,
                y_mm: 0.0,
                z_mm: 1000.0,
                d_mm: 3.0,
            },
            &g,
            &m,
        )
        .unwrap();
        assert!((p.x_img_mm - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projected_dwell_matches_model() {
        let g = CameraGeometry::default();
        let m = MotionParams::from_kmh(35.0);
        let f = Snowflake3D {
            x_mm: 120.0,
            y_mm: -75.0,
            z_mm: 2500.0,
            d_mm: 2.2,
        };
        let p = project(&f, &g, &m).unwrap();
        let t = model::dwell_time(f.d_mm, &g, &m, p.radius_mm()).unwrap();
        assert!((p.dwell_us() - t).abs() < 1e-9 * t);
    }

    #[test]
    fn nonpositive_depth_rejected() {
        let g = CameraGeometry::default();
        let m = MotionParams::from_kmh(20.0);
        let f = Snowflake3D {
            x_mm: 1.0,
            y_mm: 0.0,
            z_mm: 0.0,
            d_mm: 1.0,
        };
        assert_eq!(project(&f, &g, &m), Err(SynthError::NonPositiveDepth(0.0)));
    }

    #[test]
    fn all_dropped_when_p_miss_is_one() {
        let cfg = SynthConfig {
            p_miss: 1.0,
            background: BackgroundSpec {
                tracks: Vec::new(),
                field: Some(BackgroundField::default()),
            },
            ..SynthConfig::default()
        };
        let scene = generate(&cfg).unwrap();
        assert!(scene.stream.is_empty());
        assert!(!scene.flakes.is_empty());
    }

    #[test]
    fn track_emits_lead_and_trail_edges() {
        let mut cfg = one_flake_config();
        cfg.background.tracks.push(EdgeTrack {
            start_px: (900.0, 360.0),
            t0_us: 100.0,
            detail_mm: 40.0,
            depth_mm: 8000.0,
            length_px: 3,
            pattern: PolarityPattern::DarkDetail,
            trailing_count: 1,
        });
        let scene = generate(&cfg).unwrap();
        assert_eq!(scene.stream.len(), 12);
        // The start pixel is skipped; the track enters x = 901 when its image
        // crosses the boundary at 900.5 px.
        let g = cfg.geom;
        let x_w = (900.0 - g.principal.0) * g.pitch_mm * 8000.0 / g.focal_mm;
        let xb = (900.5 - g.principal.0) * g.pitch_mm;
        let t_in = 100.0 + 1e6 * (8000.0 - g.focal_mm * x_w / xb) / cfg.motion.velocity_mm_s;
        let first = scene.stream.events[0];
        assert_eq!(
            (first.t, first.x, first.y, first.polarity),
            (t_in.round() as u64, 901, 360, Polarity::Negative)
        );
        assert!(scene
            .stream
            .events
            .iter()
            .all(|e| e.truth == Some(false) && e.class == EventClass::Unclassified));
        assert!(scene.stream.sort_check());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate(&SynthConfig {
            p_miss: 1.5,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            z_near_mm: 0.0,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            delta_us: 0,
            ..SynthConfig::default()
        })
        .is_err());
    }
}
