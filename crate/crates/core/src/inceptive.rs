//! Inceptive event filtering.
//!
//! Events at one pixel (and, by default, one polarity) form a chain. With
//! `prev` the gap to the previous event of the chain and `next` the gap to the
//! following one (missing neighbors count as infinite):
//!
//! | | prev ≤ Δ | prev > Δ |
//! |---|---|---|
//! | next ≤ Δ | trailing | inceptive |
//! | next > Δ | trailing | noisy |
//!
//! Each trailing event is owned by the most recent inceptive event of its
//! chain; the number of trailing events an inceptive event owns is its edge
//! magnitude.

use alloc::vec;
use alloc::vec::Vec;

use crate::event::{EventClass, LabeledStream, StreamError};

/// Default classification gap Δ in microseconds.
pub const DEFAULT_DELTA_US: u64 = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FilterConfig {
    /// Δ, microseconds.
    pub delta_us: u64,
    /// Keep separate chains per polarity at each pixel.
    pub per_polarity: bool,
}

impl FilterConfig {
    pub fn new(delta_us: u64) -> Result<Self, StreamError> {
        if delta_us == 0 {
            return Err(StreamError::Geometry(
                "inceptive filter gap must be positive",
            ));
        }
        Ok(FilterConfig {
            delta_us,
            per_polarity: true,
        })
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            delta_us: DEFAULT_DELTA_US,
            per_polarity: true,
        }
    }
}

/// An inceptive event and the count of its trailing events.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IeGraphNode {
    pub ie_index: u32,
    pub magnitude: u32,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Chain {
    last: u32,
    last_t: u64,
    /// Whether `last` had a predecessor within Δ.
    last_prev_close: bool,
    /// Most recent inceptive event of the chain, as a position in `nodes`.
    node: u32,
}

const EMPTY_CHAIN: Chain = Chain {
    last: NONE,
    last_t: 0,
    last_prev_close: false,
    node: NONE,
};

/// Labels every event inceptive, trailing or noisy and links trailing events
/// to their inceptive event. Existing labels are overwritten, so re-running is
/// idempotent. Event order and count are unchanged. Nodes are returned in
/// event order.
pub fn classify(
    mut stream: LabeledStream,
    cfg: &FilterConfig,
) -> Result<(LabeledStream, Vec<IeGraphNode>), StreamError> {
    stream.validate()?;
    if cfg.delta_us == 0 {
        return Err(StreamError::Geometry(
            "inceptive filter gap must be positive",
        ));
    }
    let width = usize::from(stream.geometry.width_px);
    let chains_per_pixel = if cfg.per_polarity { 2 } else { 1 };
    let mut chains = vec![EMPTY_CHAIN; stream.geometry.pixel_count() * chains_per_pixel];
    let mut nodes: Vec<IeGraphNode> = Vec::new();
    let delta = cfg.delta_us;
    let events = &mut stream.events;

    for i in 0..events.len() {
        let e = events[i];
        let pix = usize::from(e.y) * width + usize::from(e.x);
        let slot = if cfg.per_polarity {
            pix * 2 + e.polarity.slot()
        } else {
            pix
        };
        let chain = &mut chains[slot];

        let prev_close = chain.last != NONE && e.t - chain.last_t <= delta;
        if chain.last != NONE {
            // The predecessor's next gap is now known.
            let p = chain.last as usize;
            if !chain.last_prev_close {
                if prev_close {
                    events[p].class = EventClass::Inceptive;
                    chain.node = nodes.len() as u32;
                    nodes.push(IeGraphNode {
                        ie_index: chain.last,
                        magnitude: 0,
                    });
                } else {
                    events[p].class = EventClass::Noisy;
                }
            }
        }

        let e = &mut events[i];
        if prev_close {
            e.class = EventClass::Trailing;
            // A predecessor within Δ is either trailing or inceptive, so the
            // chain always has an owner here.
            let node = &mut nodes[chain.node as usize];
            node.magnitude += 1;
            e.ie_ref = Some(node.ie_index);
        } else {
            // Provisional; settled when the next event of the chain arrives.
            e.class = EventClass::Noisy;
            e.ie_ref = None;
        }
        chain.last = i as u32;
        chain.last_t = e.t;
        chain.last_prev_close = prev_close;
    }

    // Chain tails with prev > Δ have next = ∞ and stay noisy.
    nodes.sort_unstable_by_key(|n| n.ie_index);
    Ok((stream, nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{CameraGeometry, Event, Polarity};
    use alloc::vec::Vec;

    fn chain(ts: &[u64]) -> LabeledStream {
        let g = CameraGeometry::with_sensor(4, 4).unwrap();
        LabeledStream::new(
            g,
            ts.iter()
                .map(|&t| Event::new(t, 1, 1, Polarity::Positive))
                .collect(),
        )
    }

    fn classes(s: &LabeledStream) -> Vec<EventClass> {
        s.events.iter().map(|e| e.class).collect()
    }

    use EventClass::*;

    #[test]
    fn one_pixel_chain_follows_truth_table() {
        let cfg = FilterConfig::new(1000).unwrap();
        let (s, nodes) = classify(chain(&[0, 100, 200, 5000]), &cfg).unwrap();
        assert_eq!(classes(&s), [Inceptive, Trailing, Trailing, Noisy]);
        assert_eq!(
            nodes,
            [IeGraphNode {
                ie_index: 0,
                magnitude: 2
            }]
        );
        assert_eq!(s.events[1].ie_ref, Some(0));
        assert_eq!(s.events[2].ie_ref, Some(0));
        assert_eq!(s.events[3].ie_ref, None);
    }

    #[test]
    fn lone_event_is_noisy() {
        let (s, nodes) = classify(chain(&[42]), &FilterConfig::default()).unwrap();
        assert_eq!(classes(&s), [Noisy]);
        assert!(nodes.is_empty());
    }

    #[test]
    fn gap_equal_to_delta_is_close() {
        let cfg = FilterConfig::new(1000).unwrap();
        let (s, _) = classify(chain(&[0, 1000, 2001]), &cfg).unwrap();
        assert_eq!(classes(&s), [Inceptive, Trailing, Noisy]);
    }

    #[test]
    fn polarity_flip_starts_new_chain_by_default() {
        let g = CameraGeometry::with_sensor(2, 2).unwrap();
        let events = alloc::vec![
            Event::new(0, 0, 0, Polarity::Positive),
            Event::new(10, 0, 0, Polarity::Negative),
            Event::new(20, 0, 0, Polarity::Positive),
        ];
        let s = LabeledStream::new(g, events);
        let (a, _) = classify(s.clone(), &FilterConfig::new(15).unwrap()).unwrap();
        assert_eq!(classes(&a), [Noisy, Noisy, Noisy]);
        let single = FilterConfig {
            delta_us: 15,
            per_polarity: false,
        };
        let (b, nodes) = classify(s, &single).unwrap();
        assert_eq!(classes(&b), [Inceptive, Trailing, Trailing]);
        assert_eq!(nodes[0].magnitude, 2);
    }

    #[test]
    fn unsorted_input_rejected() {
        assert!(matches!(
            classify(chain(&[5, 3]), &FilterConfig::default()),
            Err(StreamError::Unsorted { index: 1, .. })
        ));
    }

    #[test]
    fn zero_delta_rejected() {
        assert!(FilterConfig::new(0).is_err());
    }
}
