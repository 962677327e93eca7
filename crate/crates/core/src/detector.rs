//! Dwell-time snow detector.
//!
//! Each pixel keeps the most recent positive inceptive event (a FIFO of depth
//! one). A negative inceptive event at `(x, y)` looks for a stored positive
//! event in the `(2ω+1)²` window around it that is strictly older and at most
//! η older. The nearest one in time wins (ties go to the smallest `(y, x)`),
//! both events and all their trailing events are flagged as snow, and the
//! positive entry is consumed. Everything else stays background.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::event::{CameraGeometry, Event, EventClass, LabeledStream, Polarity, StreamError};
use crate::model::ModelError;

/// Default dwell threshold in microseconds.
pub const DEFAULT_ETA_US: f64 = 3000.0;
/// Default spatial window half-width (3×3 window).
pub const DEFAULT_OMEGA_PX: u32 = 1;

/// How stale positive entries are aged out. Both policies give identical
/// labels; `OnClock` drops entries as time advances instead of leaving them
/// to be skipped when read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExpirePolicy {
    #[default]
    OnRead,
    OnClock,
}

/// Dwell threshold η, constant or piecewise constant in time.
#[derive(Clone, Debug, PartialEq)]
pub enum EtaSchedule {
    Fixed(f64),
    /// `(start_us, eta_us)` steps sorted by start. Times before the first
    /// step use the first value.
    Piecewise(Vec<(u64, f64)>),
}

impl EtaSchedule {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        match self {
            EtaSchedule::Fixed(eta) => *eta,
            EtaSchedule::Piecewise(steps) => {
                let k = steps.partition_point(|&(start, _)| start <= t);
                steps[k.saturating_sub(1)].1
            }
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            EtaSchedule::Fixed(eta) => *eta,
            EtaSchedule::Piecewise(steps) => {
                steps.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |value| ModelError::OutOfRange {
            name: "eta_us",
            requirement: "positive and finite",
            value,
        };
        match self {
            EtaSchedule::Fixed(eta) => {
                if !(*eta > 0.0 && eta.is_finite()) {
                    return Err(bad(*eta));
                }
            }
            EtaSchedule::Piecewise(steps) => {
                if steps.is_empty() {
                    return Err(bad(f64::NAN));
                }
                if steps.windows(2).any(|w| w[0].0 > w[1].0) {
                    return Err(ModelError::OutOfRange {
                        name: "eta schedule",
                        requirement: "sorted by start time",
                        value: f64::NAN,
                    });
                }
                for &(_, eta) in steps {
                    if !(eta > 0.0 && eta.is_finite()) {
                        return Err(bad(eta));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    pub eta: EtaSchedule,
    pub omega_px: u32,
    pub expire_policy: ExpirePolicy,
}

impl DetectorConfig {
    pub fn new(eta_us: f64, omega_px: u32) -> Result<Self, ModelError> {
        let cfg = DetectorConfig {
            eta: EtaSchedule::Fixed(eta_us),
            omega_px,
            expire_policy: ExpirePolicy::OnRead,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.eta.validate()
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            eta: EtaSchedule::Fixed(DEFAULT_ETA_US),
            omega_px: DEFAULT_OMEGA_PX,
            expire_policy: ExpirePolicy::OnRead,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Config(#[from] ModelError),
}

/// A measured dwell: positive inceptive event paired with a later negative one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub positive: u32,
    pub negative: u32,
    pub gap_us: u64,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Slot {
    t: u64,
    idx: u32,
}

const EMPTY: Slot = Slot { t: 0, idx: NONE };

/// Per-pixel store of the latest positive inceptive event.
struct Pairer {
    width: usize,
    height: usize,
    omega: usize,
    slots: Vec<Slot>,
    /// Insertion log for `ExpirePolicy::OnClock`.
    clock: Option<VecDeque<(u64, u32, u32)>>,
    horizon: f64,
}

impl Pairer {
    fn new(geom: &CameraGeometry, cfg: &DetectorConfig) -> Self {
        Pairer {
            width: usize::from(geom.width_px),
            height: usize::from(geom.height_px),
            omega: cfg.omega_px as usize,
            slots: vec![EMPTY; geom.pixel_count()],
            clock: (cfg.expire_policy == ExpirePolicy::OnClock).then(VecDeque::new),
            horizon: cfg.eta.max(),
        }
    }

    /// Stores a positive inceptive event; returns the index it replaced.
    #[inline]
    fn store(&mut self, x: usize, y: usize, t: u64, idx: u32) -> Option<u32> {
        let pix = y * self.width + x;
        let old = self.slots[pix].idx;
        self.slots[pix] = Slot { t, idx };
        if let Some(clock) = self.clock.as_mut() {
            clock.push_back((t, pix as u32, idx));
        }
        (old != NONE).then_some(old)
    }

    #[inline]
    fn advance(&mut self, now: u64) {
        if let Some(clock) = self.clock.as_mut() {
            while let Some(&(t, pix, idx)) = clock.front() {
                if (now - t) as f64 <= self.horizon {
                    break;
                }
                clock.pop_front();
                let slot = &mut self.slots[pix as usize];
                if slot.idx == idx {
                    *slot = EMPTY;
                }
            }
        }
    }

    /// Finds and consumes the partner of a negative inceptive event.
    #[inline]
    fn take_partner(&mut self, x: usize, y: usize, t: u64, eta: f64) -> Option<(u32, u64)> {
        let x0 = x.saturating_sub(self.omega);
        let x1 = (x + self.omega).min(self.width - 1);
        let y0 = y.saturating_sub(self.omega);
        let y1 = (y + self.omega).min(self.height - 1);
        let mut best: Option<(usize, u64)> = None;
        for yy in y0..=y1 {
            let row = yy * self.width;
            for pix in row + x0..=row + x1 {
                let slot = self.slots[pix];
                if slot.idx == NONE || slot.t >= t {
                    continue;
                }
                let gap = t - slot.t;
                if gap as f64 <= eta && best.is_none_or(|(_, g)| gap < g) {
                    best = Some((pix, gap));
                }
            }
        }
        best.map(|(pix, gap)| {
            let idx = self.slots[pix].idx;
            self.slots[pix] = EMPTY;
            (idx, gap)
        })
    }
}

fn check_classified(stream: &LabeledStream) -> Result<(), StreamError> {
    stream.validate()?;
    if let Some(index) = stream
        .events
        .iter()
        .position(|e| e.class == EventClass::Unclassified)
    {
        return Err(StreamError::Unclassified { index });
    }
    Ok(())
}

/// Runs the pairing pass, setting `snow` on paired inceptive events only.
fn pair_inceptive(
    events: &mut [Event],
    geom: &CameraGeometry,
    cfg: &DetectorConfig,
    mut on_pair: impl FnMut(Pair),
) {
    let mut pairer = Pairer::new(geom, cfg);
    let fixed = match cfg.eta {
        EtaSchedule::Fixed(eta) => Some(eta),
        EtaSchedule::Piecewise(_) => None,
    };
    for i in 0..events.len() {
        let e = events[i];
        pairer.advance(e.t);
        if e.class != EventClass::Inceptive {
            continue;
        }
        let (x, y) = (usize::from(e.x), usize::from(e.y));
        match e.polarity {
            Polarity::Positive => {
                pairer.store(x, y, e.t, i as u32);
            }
            Polarity::Negative => {
                let eta = fixed.unwrap_or_else(|| cfg.eta.at(e.t));
                if let Some((p, gap)) = pairer.take_partner(x, y, e.t, eta) {
                    events[p as usize].snow = true;
                    events[i].snow = true;
                    on_pair(Pair {
                        positive: p,
                        negative: i as u32,
                        gap_us: gap,
                    });
                }
            }
        }
    }
}

fn propagate_to_trailing(events: &mut [Event]) {
    for i in 0..events.len() {
        let e = events[i];
        events[i].snow = match (e.class, e.ie_ref) {
            (EventClass::Trailing, Some(owner)) => events[owner as usize].snow,
            (EventClass::Inceptive, _) => e.snow,
            _ => false,
        };
    }
}

/// Flags snow events in a classified stream. Existing snow flags are
/// overwritten; events and order are unchanged.
pub fn detect(
    mut stream: LabeledStream,
    cfg: &DetectorConfig,
) -> Result<LabeledStream, DetectError> {
    detect_in_place(&mut stream, cfg, |_| {})?;
    Ok(stream)
}

/// [`detect`] that also reports every positive/negative pair.
pub fn detect_with_pairs(
    mut stream: LabeledStream,
    cfg: &DetectorConfig,
) -> Result<(LabeledStream, Vec<Pair>), DetectError> {
    let mut pairs = Vec::new();
    detect_in_place(&mut stream, cfg, |p| pairs.push(p))?;
    Ok((stream, pairs))
}

pub fn detect_in_place(
    stream: &mut LabeledStream,
    cfg: &DetectorConfig,
    on_pair: impl FnMut(Pair),
) -> Result<(), DetectError> {
    cfg.validate()?;
    check_classified(stream)?;
    for e in stream.events.iter_mut() {
        e.snow = false;
    }
    let geom = stream.geometry;
    pair_inceptive(&mut stream.events, &geom, cfg, on_pair);
    propagate_to_trailing(&mut stream.events);
    Ok(())
}

/// Partitions a snow-flagged stream into (snow, background), both in input
/// order. `ie_ref` values still index the input stream; call
/// [`LabeledStream::relink`] on a part to point them into it.
pub fn split(stream: LabeledStream) -> (LabeledStream, LabeledStream) {
    let geometry = stream.geometry;
    let n_snow = stream.events.iter().filter(|e| e.snow).count();
    let mut snow = Vec::with_capacity(n_snow);
    let mut background = Vec::with_capacity(stream.events.len() - n_snow);
    for e in stream.events {
        if e.snow {
            snow.push(e);
        } else {
            background.push(e);
        }
    }
    (
        LabeledStream::new(geometry, snow),
        LabeledStream::new(geometry, background),
    )
}

#[derive(Clone, Copy)]
struct Pending {
    event: Event,
    done: bool,
    /// Next trailing event (absolute index) waiting on the same owner.
    next_child: u32,
    /// First and last waiting trailing events, on a pending positive IE.
    first_child: u32,
    last_child: u32,
}

#[derive(Clone, Copy)]
struct IeRecord {
    idx: u32,
    snow: bool,
}

const NO_RECORD: IeRecord = IeRecord {
    idx: NONE,
    snow: false,
};

/// Event-at-a-time form of [`detect`] with identical labels.
///
/// Events are emitted in input order once their label is final. A positive
/// inceptive event (and everything after it) is held until it is paired,
/// replaced at its pixel, or older than the largest η, so emission lags input
/// by at most η plus the trailing events still owned by a pending event.
pub struct StreamingDetector {
    cfg: DetectorConfig,
    width: usize,
    height: usize,
    pairer: Pairer,
    queue: VecDeque<Pending>,
    /// Absolute index of `queue[0]`.
    base: u32,
    next_index: u32,
    now: u64,
    horizon: f64,
    records: Vec<[IeRecord; 2]>,
}

impl StreamingDetector {
    pub fn new(geometry: &CameraGeometry, cfg: DetectorConfig) -> Result<Self, DetectError> {
        cfg.validate()?;
        geometry.validate()?;
        Ok(StreamingDetector {
            width: usize::from(geometry.width_px),
            height: usize::from(geometry.height_px),
            pairer: Pairer::new(geometry, &cfg),
            horizon: cfg.eta.max(),
            cfg,
            queue: VecDeque::new(),
            base: 0,
            next_index: 0,
            now: 0,
            records: vec![[NO_RECORD; 2]; geometry.pixel_count()],
        })
    }

    /// Number of events fed but not yet emitted.
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    fn entry(&mut self, idx: u32) -> &mut Pending {
        &mut self.queue[(idx - self.base) as usize]
    }

    /// Marks a pending positive IE final and settles its waiting children.
    fn settle(&mut self, idx: u32, snow: bool) {
        let (mut child, _) = {
            let e = self.entry(idx);
            e.done = true;
            e.event.snow = snow;
            (e.first_child, ())
        };
        while child != NONE {
            let c = self.entry(child);
            c.done = true;
            c.event.snow = snow;
            child = c.next_child;
        }
    }

    /// Feeds one event (indices are assigned in feed order, matching the
    /// stream's `ie_ref`s) and appends every event whose label became final
    /// to `out`.
    pub fn feed(&mut self, mut event: Event, out: &mut Vec<Event>) -> Result<(), DetectError> {
        let index = self.next_index;
        if index == NONE {
            return Err(StreamError::TooLong(index as usize).into());
        }
        if event.t < self.now {
            return Err(StreamError::Unsorted {
                index: index as usize,
                prev: self.now,
                t: event.t,
            }
            .into());
        }
        if usize::from(event.x) >= self.width || usize::from(event.y) >= self.height {
            return Err(StreamError::OutOfBounds {
                index: index as usize,
                x: event.x,
                y: event.y,
                width: self.width as u16,
                height: self.height as u16,
            }
            .into());
        }
        if event.class == EventClass::Unclassified {
            return Err(StreamError::Unclassified {
                index: index as usize,
            }
            .into());
        }
        self.next_index += 1;
        self.now = event.t;
        self.pairer.advance(event.t);
        event.snow = false;
        let (x, y) = (usize::from(event.x), usize::from(event.y));
        let pix = y * self.width + x;
        let mut pending = Pending {
            event,
            done: true,
            next_child: NONE,
            first_child: NONE,
            last_child: NONE,
        };

        match (event.class, event.polarity) {
            (EventClass::Inceptive, Polarity::Positive) => {
                if let Some(old) = self.pairer.store(x, y, event.t, index) {
                    // A replaced entry can no longer be paired.
                    if old >= self.base && !self.entry(old).done {
                        self.settle(old, false);
                    }
                }
                self.records[pix][0] = IeRecord {
                    idx: index,
                    snow: false,
                };
                pending.done = false;
            }
            (EventClass::Inceptive, Polarity::Negative) => {
                let eta = self.cfg.eta.at(event.t);
                let snow = match self.pairer.take_partner(x, y, event.t, eta) {
                    Some((p, _)) => {
                        self.settle(p, true);
                        let e = self.queue[(p - self.base) as usize].event;
                        let rec =
                            &mut self.records[usize::from(e.y) * self.width + usize::from(e.x)][0];
                        if rec.idx == p {
                            rec.snow = true;
                        }
                        true
                    }
                    None => false,
                };
                pending.event.snow = snow;
                self.records[pix][1] = IeRecord { idx: index, snow };
            }
            (EventClass::Trailing, _) => match event.ie_ref {
                Some(owner) if owner >= self.base && owner < index => {
                    let o = *self.entry(owner);
                    if o.done {
                        pending.event.snow = o.event.snow;
                    } else {
                        pending.done = false;
                        if o.last_child == NONE {
                            self.entry(owner).first_child = index;
                        } else {
                            self.entry(o.last_child).next_child = index;
                        }
                        self.entry(owner).last_child = index;
                    }
                }
                Some(owner) => {
                    let rec = self.records[pix];
                    pending.event.snow = rec.iter().any(|r| r.idx == owner && r.snow);
                }
                None => {}
            },
            _ => {}
        }
        self.queue.push_back(pending);
        self.emit_ready(out);
        Ok(())
    }

    fn emit_ready(&mut self, out: &mut Vec<Event>) {
        while let Some(front) = self.queue.front() {
            if !front.done {
                let e = front.event;
                let expired =
                    e.class == EventClass::Inceptive && (self.now - e.t) as f64 > self.horizon;
                if !expired {
                    break;
                }
                self.settle(self.base, false);
            }
            let front = self.queue.pop_front().expect("front exists");
            out.push(front.event);
            self.base += 1;
        }
    }

    /// Emits every remaining event with its final label.
    pub fn flush(&mut self, out: &mut Vec<Event>) {
        while let Some(front) = self.queue.front() {
            if !front.done {
                self.settle(self.base, false);
            }
            let front = self.queue.pop_front().expect("front exists");
            out.push(front.event);
            self.base += 1;
        }
    }
}
