//! Brute-force reference implementations and random stream generators shared
//! by the integration and acceptance tests.

#![allow(dead_code)]

use rand::Rng;
use snowdwell_core::{CameraGeometry, Event, EventClass, LabeledStream, Polarity};

/// Random unclassified stream. Each event extends a randomly chosen
/// (pixel, polarity) chain by a gap drawn so that gaps of exactly `delta`,
/// `delta ± 1`, zero and long pauses all occur often; events are then merged
/// in time order.
pub fn random_stream<R: Rng>(
    rng: &mut R,
    geom: CameraGeometry,
    n: usize,
    delta: u64,
) -> LabeledStream {
    let chains = geom.pixel_count() * 2;
    let span = (n as u64 * delta / chains as u64).max(1);
    let mut last: Vec<u64> = (0..chains).map(|_| rng.gen_range(0..span)).collect();
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.gen_range(0..chains);
        last[c] += match rng.gen_range(0..8) {
            0 => 0,
            1 => delta,
            2 => delta + 1,
            3 => delta.saturating_sub(1),
            4 => rng.gen_range(0..=delta),
            5 => rng.gen_range(delta..=8 * delta),
            _ => rng.gen_range(0..=delta / 2),
        };
        let pix = c / 2;
        let x = (pix % usize::from(geom.width_px)) as u16;
        let y = (pix / usize::from(geom.width_px)) as u16;
        let p = if c % 2 == 0 {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        events.push(Event::new(last[c], x, y, p));
    }
    events.sort_by_key(|e| e.t);
    LabeledStream::new(geom, events)
}

/// Per-event truth-table evaluation: for each event find its chain
/// neighbors by scanning the whole stream.
pub fn brute_classify(
    stream: &LabeledStream,
    delta: u64,
    per_polarity: bool,
) -> Vec<(EventClass, Option<u32>)> {
    let ev = &stream.events;
    let same_chain = |a: &Event, b: &Event| {
        a.x == b.x && a.y == b.y && (!per_polarity || a.polarity == b.polarity)
    };
    let class_of = |i: usize| {
        let prev = (0..i)
            .rev()
            .find(|&j| same_chain(&ev[i], &ev[j]))
            .map(|j| ev[i].t - ev[j].t);
        let next = (i + 1..ev.len())
            .find(|&j| same_chain(&ev[i], &ev[j]))
            .map(|j| ev[j].t - ev[i].t);
        let close = |g: Option<u64>| g.is_some_and(|g| g <= delta);
        if close(prev) {
            EventClass::Trailing
        } else if close(next) {
            EventClass::Inceptive
        } else {
            EventClass::Noisy
        }
    };
    let classes: Vec<EventClass> = (0..ev.len()).map(class_of).collect();
    (0..ev.len())
        .map(|i| {
            let owner = if classes[i] == EventClass::Trailing {
                (0..i)
                    .rev()
                    .find(|&j| same_chain(&ev[i], &ev[j]) && classes[j] == EventClass::Inceptive)
                    .map(|j| j as u32)
            } else {
                None
            };
            (classes[i], owner)
        })
        .collect()
}

/// Reference pairer. For each negative inceptive event, in order, scans back
/// over every earlier event within `eta`; the first positive inceptive event
/// met at a pixel is that pixel's stored entry (older ones were replaced).
/// Among unconsumed entries in the window with `0 < gap <= eta`, the nearest
/// in time wins, then the smallest `(y, x)`. Trailing events inherit the flag
/// of the inceptive event they point to.
pub fn brute_detect(stream: &LabeledStream, eta: f64, omega: u32) -> Vec<bool> {
    let ev = &stream.events;
    let mut snow = vec![false; ev.len()];
    let mut consumed = vec![false; ev.len()];
    let omega = i64::from(omega);
    for n in 0..ev.len() {
        let e = ev[n];
        if e.class != EventClass::Inceptive || e.polarity != Polarity::Negative {
            continue;
        }
        let mut seen: Vec<(u16, u16)> = Vec::new();
        let mut best: Option<(u64, u16, u16, usize)> = None;
        for j in (0..n).rev() {
            let c = ev[j];
            if (e.t - c.t) as f64 > eta {
                break;
            }
            if c.class != EventClass::Inceptive || c.polarity != Polarity::Positive {
                continue;
            }
            if (i64::from(c.x) - i64::from(e.x)).abs() > omega
                || (i64::from(c.y) - i64::from(e.y)).abs() > omega
            {
                continue;
            }
            if seen.contains(&(c.x, c.y)) {
                continue;
            }
            seen.push((c.x, c.y));
            let gap = e.t - c.t;
            if consumed[j] || gap == 0 {
                continue;
            }
            let key = (gap, c.y, c.x, j);
            if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                best = Some(key);
            }
        }
        if let Some((_, _, _, j)) = best {
            consumed[j] = true;
            snow[j] = true;
            snow[n] = true;
        }
    }
    for i in 0..ev.len() {
        if ev[i].class == EventClass::Trailing {
            if let Some(owner) = ev[i].ie_ref {
                snow[i] = snow[owner as usize];
            }
        }
    }
    snow
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// One-sided Mann–Whitney test that `b` tends to exceed `a`, normal
/// approximation with tie correction. Returns the p-value.
pub fn mann_whitney_greater(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0))
        .chain(b.iter().map(|&v| (v, 1)))
        .collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let r2: f64 = all
        .iter()
        .zip(&ranks)
        .filter(|(p, _)| p.1 == 1)
        .map(|(_, r)| r)
        .sum();
    let u2 = r2 - n2 * (n2 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let nn = n1 + n2;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    let z = (u2 - mean) / var.sqrt();
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Inceptive filter gap used with [`road_scene`].
pub const SCENE_DELTA_US: u64 = 100;

/// A drive through snow past static background structure. Flake and track
/// arrival rates scale with speed so the scene depicts the same stretch of
/// road; `seconds_at_20` is the duration at 20 km/h.
pub fn road_scene(
    kmh: f64,
    seed: u64,
    seconds_at_20: f64,
    snow: bool,
    background: bool,
) -> snowdwell_core::synth::SynthConfig {
    use snowdwell_core::synth::{BackgroundField, BackgroundSpec, SynthConfig};
    let k = kmh / 20.0;
    SynthConfig {
        motion: snowdwell_core::MotionParams::from_kmh(kmh),
        duration_us: (seconds_at_20 * 1e6 / k) as u64,
        flake_rate: if snow { 400.0 * k } else { 0.0 },
        trailing_count: 4,
        delta_us: SCENE_DELTA_US,
        background: BackgroundSpec {
            tracks: Vec::new(),
            field: background.then(|| BackgroundField {
                tracks_per_s: 300.0 * k,
                trailing_count: 4,
                ..BackgroundField::default()
            }),
        },
        seed,
        z_near_mm: 8000.0,
        z_far_mm: 20000.0,
        ..SynthConfig::default()
    }
}
