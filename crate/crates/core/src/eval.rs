//! Event-level metrics against truth flags, dwell histograms, removal curves
//! and bounding-box scoring.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::detector::{detect_in_place, DetectError, DetectorConfig, EtaSchedule};
use crate::event::LabeledStream;

/// Default half-width of the exclusion window around a wiper sweep, µs.
pub const DEFAULT_WIPER_EXCLUSION_US: u64 = 300_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("event {index} carries no truth flag")]
    MissingTruth { index: usize },
    #[error("invalid box at index {index}: need x0 < x1 and y0 < y1")]
    InvalidBox { index: usize },
    #[error("invalid histogram: {0}")]
    Histogram(&'static str),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Which label counts as the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PositiveClass {
    Snow,
    Background,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub avg_po: f64,
    pub avg_iou: f64,
}

impl MetricReport {
    /// Precision is 1 with no predicted positives, recall is 1 with no actual
    /// positives.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            1.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MetricReport {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            avg_po: 0.0,
            avg_iou: 0.0,
        }
    }
}

/// Confusion counts of the snow flags against the truth flags.
pub fn event_prf(pred: &LabeledStream, positive: PositiveClass) -> Result<MetricReport, EvalError> {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (index, e) in pred.events.iter().enumerate() {
        let truth = e.truth.ok_or(EvalError::MissingTruth { index })?;
        let (actual, predicted) = match positive {
            PositiveClass::Snow => (truth, e.snow),
            PositiveClass::Background => (!truth, !e.snow),
        };
        match (actual, predicted) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(MetricReport::from_counts(tp, fp, fn_))
}

/// Fraction of truly-background events flagged snow and fraction of
/// truly-snow events left unflagged.
pub fn error_fractions(pred: &LabeledStream) -> Result<(f64, f64), EvalError> {
    let (mut bg, mut bg_flagged, mut snow, mut snow_missed) = (0u64, 0u64, 0u64, 0u64);
    for (index, e) in pred.events.iter().enumerate() {
        if e.truth.ok_or(EvalError::MissingTruth { index })? {
            snow += 1;
            snow_missed += u64::from(!e.snow);
        } else {
            bg += 1;
            bg_flagged += u64::from(e.snow);
        }
    }
    let frac = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok((frac(bg_flagged, bg), frac(snow_missed, snow)))
}

/// Equal-width histogram over `[0, cap_us]`; the last bin is closed.
#[derive(Clone, Debug, PartialEq)]
pub struct DwellHistogram {
    pub cap_us: f64,
    pub counts: Vec<u64>,
}

impl DwellHistogram {
    pub fn new(cap_us: f64, bins: usize) -> Result<Self, EvalError> {
        if bins == 0 {
            return Err(EvalError::Histogram("need at least one bin"));
        }
        if !(cap_us > 0.0 && cap_us.is_finite()) {
            return Err(EvalError::Histogram("cap must be positive and finite"));
        }
        Ok(DwellHistogram {
            cap_us,
            counts: vec![0; bins],
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.cap_us / self.counts.len() as f64
    }

    /// Lower edge of bin `k`.
    pub fn edge(&self, k: usize) -> f64 {
        self.cap_us * k as f64 / self.counts.len() as f64
    }

    /// Values above the cap are ignored.
    pub fn add(&mut self, value: f64) {
        if !(0.0..=self.cap_us).contains(&value) {
            return;
        }
        let n = self.counts.len();
        let k = ((value / self.cap_us * n as f64) as usize).min(n - 1);
        self.counts[k] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Every positive-to-negative inceptive gap the detector pairs when η is
/// raised to `cap_us`, in pairing order.
pub fn measured_dwells(
    stream: &LabeledStream,
    cfg: &DetectorConfig,
    cap_us: f64,
) -> Result<Vec<u64>, EvalError> {
    let mut work = stream.clone();
    let cfg = DetectorConfig {
        eta: EtaSchedule::Fixed(cap_us),
        ..cfg.clone()
    };
    let mut gaps = Vec::new();
    detect_in_place(&mut work, &cfg, |p| gaps.push(p.gap_us))?;
    Ok(gaps)
}

/// Histogram of [`measured_dwells`]; counts sum to the number of pairs.
pub fn dwell_histogram(
    stream: &LabeledStream,
    cfg: &DetectorConfig,
    bins: usize,
    cap_us: f64,
) -> Result<DwellHistogram, EvalError> {
    let mut h = DwellHistogram::new(cap_us, bins)?;
    for g in measured_dwells(stream, cfg, cap_us)? {
        h.add(g as f64);
    }
    Ok(h)
}

/// Fraction of events flagged snow at each η. η ≤ 0 removes nothing.
pub fn percent_removed_curve(
    stream: &LabeledStream,
    eta_grid: &[f64],
    cfg: &DetectorConfig,
) -> Result<Vec<(f64, f64)>, EvalError> {
    let mut out = Vec::with_capacity(eta_grid.len());
    let mut work = stream.clone();
    for &eta in eta_grid {
        if !(eta > 0.0) || stream.is_empty() {
            out.push((eta, 0.0));
            continue;
        }
        let cfg = DetectorConfig {
            eta: EtaSchedule::Fixed(eta),
            ..cfg.clone()
        };
        detect_in_place(&mut work, &cfg, |_| {})?;
        let removed = work.events.iter().filter(|e| e.snow).count();
        out.push((eta, removed as f64 / stream.len() as f64));
    }
    Ok(out)
}

/// Half-open axis-aligned box `[x0, x1) × [y0, y1)` annotated at `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub t: u64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(t: u64, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<Self> {
        let b = BBox { t, x0, y0, x1, y1 };
        b.is_valid().then_some(b)
    }

    pub fn is_valid(&self) -> bool {
        self.x0 < self.x1
            && self.y0 < self.y1
            && self.x0.is_finite()
            && self.y0.is_finite()
            && self.x1.is_finite()
            && self.y1.is_finite()
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn intersection(&self, other: &BBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Share of the ground-truth box covered by the detection.
pub fn percent_overlap(det: &BBox, gt: &BBox) -> f64 {
    (det.intersection(gt) / gt.area()).clamp(0.0, 1.0)
}

/// Closed time interval `[start_us, end_us]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeWindow {
    pub start_us: u64,
    pub end_us: u64,
}

impl TimeWindow {
    pub fn contains(&self, t: u64) -> bool {
        (self.start_us..=self.end_us).contains(&t)
    }
}

/// Windows of `±half_width_us` around each sweep time.
pub fn exclusion_windows(sweeps_us: &[u64], half_width_us: u64) -> Vec<TimeWindow> {
    sweeps_us
        .iter()
        .map(|&t| TimeWindow {
            start_us: t.saturating_sub(half_width_us),
            end_us: t.saturating_add(half_width_us),
        })
        .collect()
}

/// Greedy descending-IoU matching of detections to ground truth at equal
/// timestamps. Boxes inside an exclusion window are dropped first. A pair
/// is accepted while its IoU is at least `iou_min`; each box is used at most
/// once. Ties in IoU go to the lower (detection, ground truth) indices.
pub fn match_boxes(
    dets: &[BBox],
    gts: &[BBox],
    iou_min: f64,
    exclusion: &[TimeWindow],
) -> Result<MetricReport, EvalError> {
    if let Some(index) = dets.iter().position(|b| !b.is_valid()) {
        return Err(EvalError::InvalidBox { index });
    }
    if let Some(index) = gts.iter().position(|b| !b.is_valid()) {
        return Err(EvalError::InvalidBox { index });
    }
    let kept = |b: &&BBox| !exclusion.iter().any(|w| w.contains(b.t));
    let mut frames: BTreeMap<u64, (Vec<BBox>, Vec<BBox>)> = BTreeMap::new();
    for d in dets.iter().filter(kept) {
        frames.entry(d.t).or_default().0.push(*d);
    }
    for g in gts.iter().filter(kept) {
        frames.entry(g.t).or_default().1.push(*g);
    }

    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    let (mut po_sum, mut iou_sum) = (0.0, 0.0);
    let mut candidates = Vec::new();
    for (d, g) in frames.values() {
        candidates.clear();
        for (i, a) in d.iter().enumerate() {
            for (j, b) in g.iter().enumerate() {
                let v = iou(a, b);
                if v >= iou_min {
                    candidates.push((v, i, j));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut det_used = vec![false; d.len()];
        let mut gt_used = vec![false; g.len()];
        let mut matched = 0u64;
        for &(v, i, j) in &candidates {
            if det_used[i] || gt_used[j] {
                continue;
            }
            det_used[i] = true;
            gt_used[j] = true;
            matched += 1;
            iou_sum += v;
            po_sum += percent_overlap(&d[i], &g[j]);
        }
        tp += matched;
        fp += d.len() as u64 - matched;
        fn_ += g.len() as u64 - matched;
    }
    let mut report = MetricReport::from_counts(tp, fp, fn_);
    if tp > 0 {
        report.avg_po = po_sum / tp as f64;
        report.avg_iou = iou_sum / tp as f64;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorConfig;
    use crate::event::{CameraGeometry, Event, EventClass, Polarity};

    fn b(t: u64, x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(t, x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_and_po_reference_values() {
        let a = b(0, 0.0, 0.0, 10.0, 10.0);
        let c = b(0, 5.0, 0.0, 15.0, 10.0);
        assert!((iou(&a, &c) - 1.0 / 3.0).abs() < 1e-15);
        assert!((percent_overlap(&a, &c) - 0.5).abs() < 1e-15);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(percent_overlap(&a, &a), 1.0);
        let far = b(0, 20.0, 20.0, 30.0, 30.0);
        assert_eq!((iou(&a, &far), percent_overlap(&a, &far)), (0.0, 0.0));
    }

    #[test]
    fn percent_overlap_is_asymmetric() {
        let big = b(0, 0.0, 0.0, 10.0, 10.0);
        let small = b(0, 0.0, 0.0, 5.0, 5.0);
        assert_eq!(percent_overlap(&big, &small), 1.0);
        assert_eq!(percent_overlap(&small, &big), 0.25);
    }

    #[test]
    fn matching_examples() {
        let gts = [b(7, 0.0, 0.0, 10.0, 10.0), b(7, 50.0, 50.0, 60.0, 60.0)];
        let r = match_boxes(&gts, &gts, 0.5, &[]).unwrap();
        assert_eq!(
            (r.precision, r.recall, r.avg_iou, r.avg_po),
            (1.0, 1.0, 1.0, 1.0)
        );

        // IoU 0.6: 10×10 gt, det shifted to cover 7.5 columns → 75 / 125.
        let det = [b(7, 2.5, 0.0, 12.5, 10.0)];
        let r = match_boxes(&det, &gts, 0.5, &[]).unwrap();
        assert!((iou(&det[0], &gts[0]) - 0.6).abs() < 1e-12);
        assert_eq!((r.tp, r.fp, r.fn_), (1, 0, 1));
        assert_eq!(r.recall, 0.5);

        let window = exclusion_windows(&[7], 0);
        let r = match_boxes(&det, &gts, 0.5, &window).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 0));
    }

    #[test]
    fn boxes_only_match_at_equal_timestamps() {
        let r = match_boxes(
            &[b(1, 0.0, 0.0, 1.0, 1.0)],
            &[b(2, 0.0, 0.0, 1.0, 1.0)],
            0.0,
            &[],
        )
        .unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
    }

    #[test]
    fn invalid_box_rejected() {
        assert!(BBox::new(0, 1.0, 0.0, 1.0, 2.0).is_none());
        let bad = BBox {
            t: 0,
            x0: 2.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        };
        assert_eq!(
            match_boxes(&[bad], &[], 0.0, &[]),
            Err(EvalError::InvalidBox { index: 0 })
        );
    }

    fn truth_stream(flags: &[(bool, bool)]) -> LabeledStream {
        let g = CameraGeometry::with_sensor(4, 4).unwrap();
        let events = flags
            .iter()
            .enumerate()
            .map(|(i, &(truth, snow))| {
                let mut e = Event::new(i as u64, 0, 0, Polarity::Positive).with_truth(truth);
                e.snow = snow;
                e
            })
            .collect();
        LabeledStream::new(g, events)
    }

    #[test]
    fn event_prf_cases() {
        let s = truth_stream(&[(true, true), (false, false), (true, true)]);
        let r = event_prf(&s, PositiveClass::Snow).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        let s = truth_stream(&[(true, false), (false, false), (true, false)]);
        assert_eq!(event_prf(&s, PositiveClass::Snow).unwrap().recall, 0.0);
        let r = event_prf(&s, PositiveClass::Background).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 2, 0));

        let mut s = truth_stream(&[(true, true)]);
        s.events[0].truth = None;
        assert_eq!(
            event_prf(&s, PositiveClass::Snow),
            Err(EvalError::MissingTruth { index: 0 })
        );
    }

    fn ie(t: u64, x: u16, p: Polarity) -> Event {
        let mut e = Event::new(t, x, 0, p);
        e.class = EventClass::Inceptive;
        e
    }

    #[test]
    fn histogram_counts_pairs() {
        let g = CameraGeometry::with_sensor(8, 1).unwrap();
        let s = LabeledStream::new(
            g,
            alloc::vec![
                ie(0, 0, Polarity::Positive),
                ie(700, 0, Polarity::Negative),
                ie(800, 5, Polarity::Negative)
            ],
        );
        let h = dwell_histogram(&s, &DetectorConfig::default(), 10, 1000.0).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[7], 1);
        let none = dwell_histogram(
            &LabeledStream::empty(g),
            &DetectorConfig::default(),
            4,
            1000.0,
        )
        .unwrap();
        assert_eq!(none.counts, [0, 0, 0, 0]);
    }

    #[test]
    fn removal_curve_starts_at_zero() {
        let g = CameraGeometry::with_sensor(8, 1).unwrap();
        let s = LabeledStream::new(
            g,
            alloc::vec![
                ie(0, 0, Polarity::Positive),
                ie(700, 0, Polarity::Negative),
                ie(800, 5, Polarity::Negative)
            ],
        );
        let c = percent_removed_curve(&s, &[0.0, 500.0, 700.0, 5000.0], &DetectorConfig::default())
            .unwrap();
        let fr: Vec<f64> = c.iter().map(|p| p.1).collect();
        assert_eq!(fr, [0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0]);
    }
}
