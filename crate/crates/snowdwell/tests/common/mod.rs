#![allow(dead_code)]

use proptest::prelude::*;
use snowdwell_core::{CameraGeometry, Event, EventClass, LabeledStream, Polarity};

/// The pinned stream behind `tests/data/golden_1000.evd`.
pub fn golden_stream() -> LabeledStream {
    let geom = CameraGeometry::with_sensor(64, 48).unwrap();
    let events = (0u64..1000)
        .map(|i| {
            let p = if (i * 7) % 3 == 0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            let mut e = Event::new(
                1000 + i * 53 + (i * i) % 17,
                ((i * 31) % 64) as u16,
                ((i * 17 + i / 64) % 48) as u16,
                p,
            );
            e.class = EventClass::from_code((i % 4) as u8).unwrap();
            e.snow = i % 5 == 1 || i % 5 == 3;
            e.truth = match i % 3 {
                0 => None,
                1 => Some(true),
                _ => Some(false),
            };
            e
        })
        .collect();
    let mut s = LabeledStream::new(geom, events);
    s.relink(true);
    s
}

pub const GOLDEN_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_1000.evd");

fn arb_event(w: u16, h: u16) -> impl Strategy<Value = (u64, Event)> {
    (
        0u64..50,
        0..w,
        0..h,
        any::<bool>(),
        0u8..4,
        any::<bool>(),
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(dt, x, y, pos, cls, snow, truth)| {
            let mut e = Event::new(
                0,
                x,
                y,
                if pos {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
            );
            e.class = EventClass::from_code(cls).unwrap();
            e.snow = snow;
            e.truth = truth;
            (dt, e)
        })
}

/// Streams with every flag combination, repeated timestamps and owner links
/// rebuilt the way readers rebuild them.
pub fn arb_stream() -> impl Strategy<Value = LabeledStream> {
    (1u16..40, 1u16..40, 0u64..u64::MAX / 2)
        .prop_flat_map(|(w, h, t0)| {
            (
                Just((w, h, t0)),
                prop::collection::vec(arb_event(w, h), 0..300),
            )
        })
        .prop_map(|((w, h, t0), evs)| {
            let mut t = t0;
            let events = evs
                .into_iter()
                .map(|(dt, mut e)| {
                    t += dt;
                    e.t = t;
                    e
                })
                .collect();
            let mut s = LabeledStream::new(CameraGeometry::with_sensor(w, h).unwrap(), events);
            s.relink(true);
            s
        })
}
