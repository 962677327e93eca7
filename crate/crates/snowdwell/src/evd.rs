//! EVD binary event files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header (16 bytes): "EBS1" | version u16 = 1 | width u16 | height u16 | 6 zero bytes
//! record (15 bytes): t u64 | x u16 | y u16 | flags u8 | 2 zero bytes
//! ```
//!
//! Flag bits: 0 positive polarity, 1-2 class code, 3 snow prediction,
//! 4 truth valid, 5 truth is snow; bits 6-7 are zero. Trailing-event owner
//! links are not stored; they are rebuilt from the class labels on read.

use std::io::{self, Read, Write};

use snowdwell_core::{CameraGeometry, Event, EventClass, LabeledStream, Polarity};

pub const MAGIC: [u8; 4] = *b"EBS1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 15;

const POSITIVE: u8 = 1;
const CLASS_SHIFT: u8 = 1;
const SNOW: u8 = 1 << 3;
const TRUTH_VALID: u8 = 1 << 4;
const TRUTH_SNOW: u8 = 1 << 5;
const RESERVED_BITS: u8 = 0b1100_0000;

#[derive(Debug, thiserror::Error)]
pub enum EvdError {
    #[error("I/O error at byte {offset}: {source}")]
    Io { offset: u64, source: io::Error },
    #[error("bad magic {found:02x?} at byte 0, expected \"EBS1\"")]
    BadMagic { found: [u8; 4] },
    #[error("truncated header: {len} of 16 bytes")]
    TruncatedHeader { len: usize },
    #[error("unsupported version {version} at byte 4")]
    UnsupportedVersion { version: u16 },
    #[error("invalid header at byte {offset}: {reason}")]
    BadHeader { offset: u64, reason: &'static str },
    #[error("truncated record at byte {offset}: {len} of 15 bytes")]
    TruncatedRecord { offset: u64, len: usize },
    #[error("timestamp regression at byte {offset}: {t} after {prev}")]
    TimestampRegression { offset: u64, prev: u64, t: u64 },
    #[error("invalid flags {flags:#010b} at byte {offset}")]
    BadFlags { offset: u64, flags: u8 },
    #[error("event at byte {offset} lies outside the {width}x{height} sensor: ({x}, {y})")]
    OutOfBounds {
        offset: u64,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("cannot write: event {index} is out of time order")]
    Unsorted { index: usize },
}

pub fn encode_header(width: u16, height: u16) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(&MAGIC);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6..8].copy_from_slice(&width.to_le_bytes());
    h[8..10].copy_from_slice(&height.to_le_bytes());
    h
}

pub fn encode_flags(e: &Event) -> u8 {
    let mut f = e.class.code() << CLASS_SHIFT;
    if e.polarity.is_positive() {
        f |= POSITIVE;
    }
    if e.snow {
        f |= SNOW;
    }
    if let Some(truth) = e.truth {
        f |= TRUTH_VALID;
        if truth {
            f |= TRUTH_SNOW;
        }
    }
    f
}

pub fn encode_record(e: &Event, out: &mut [u8]) {
    out[..8].copy_from_slice(&e.t.to_le_bytes());
    out[8..10].copy_from_slice(&e.x.to_le_bytes());
    out[10..12].copy_from_slice(&e.y.to_le_bytes());
    out[12] = encode_flags(e);
    out[13] = 0;
    out[14] = 0;
}

/// Decodes one record; `offset` is only used for error reporting.
pub fn decode_record(b: &[u8], offset: u64) -> Result<Event, EvdError> {
    let t = u64::from_le_bytes(b[..8].try_into().unwrap());
    let x = u16::from_le_bytes([b[8], b[9]]);
    let y = u16::from_le_bytes([b[10], b[11]]);
    let flags = b[12];
    if flags & RESERVED_BITS != 0 || (flags & TRUTH_SNOW != 0 && flags & TRUTH_VALID == 0) {
        return Err(EvdError::BadFlags { offset, flags });
    }
    let polarity = if flags & POSITIVE != 0 {
        Polarity::Positive
    } else {
        Polarity::Negative
    };
    let class = EventClass::from_code((flags >> CLASS_SHIFT) & 0b11).unwrap();
    let truth = (flags & TRUTH_VALID != 0).then_some(flags & TRUTH_SNOW != 0);
    Ok(Event {
        t,
        x,
        y,
        polarity,
        class,
        snow: flags & SNOW != 0,
        truth,
        ie_ref: None,
    })
}

/// Writes header and records. Returns the number of bytes written,
/// `16 + 15·n`.
pub fn write_evd<W: Write>(stream: &LabeledStream, mut dst: W) -> Result<u64, EvdError> {
    if let Some(i) = stream.events.windows(2).position(|w| w[1].t < w[0].t) {
        return Err(EvdError::Unsorted { index: i + 1 });
    }
    let g = &stream.geometry;
    dst.write_all(&encode_header(g.width_px, g.height_px))
        .map_err(|source| EvdError::Io { offset: 0, source })?;
    let mut written = HEADER_LEN as u64;
    let mut buf = vec![0u8; RECORD_LEN * 4096];
    for chunk in stream.events.chunks(4096) {
        let bytes = &mut buf[..chunk.len() * RECORD_LEN];
        for (e, rec) in chunk.iter().zip(bytes.chunks_exact_mut(RECORD_LEN)) {
            encode_record(e, rec);
        }
        dst.write_all(bytes).map_err(|source| EvdError::Io {
            offset: written,
            source,
        })?;
        written += bytes.len() as u64;
    }
    dst.flush().map_err(|source| EvdError::Io {
        offset: written,
        source,
    })?;
    Ok(written)
}

fn read_full<R: Read>(src: &mut R, buf: &mut [u8], offset: u64) -> Result<usize, EvdError> {
    let mut n = 0;
    while n < buf.len() {
        match src.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(EvdError::Io {
                    offset: offset + n as u64,
                    source,
                })
            }
        }
    }
    Ok(n)
}

/// Parses and checks the header. The geometry gets the default lens and
/// pixel pitch; callers with a calibrated camera replace it.
pub fn decode_header(h: &[u8]) -> Result<CameraGeometry, EvdError> {
    if h.len() < HEADER_LEN {
        return Err(EvdError::TruncatedHeader { len: h.len() });
    }
    if h[..4] != MAGIC {
        return Err(EvdError::BadMagic {
            found: h[..4].try_into().unwrap(),
        });
    }
    let version = u16::from_le_bytes([h[4], h[5]]);
    if version != VERSION {
        return Err(EvdError::UnsupportedVersion { version });
    }
    let width = u16::from_le_bytes([h[6], h[7]]);
    let height = u16::from_le_bytes([h[8], h[9]]);
    if width == 0 || height == 0 {
        return Err(EvdError::BadHeader {
            offset: 6,
            reason: "sensor dimensions must be positive",
        });
    }
    if h[10..16].iter().any(|&b| b != 0) {
        return Err(EvdError::BadHeader {
            offset: 10,
            reason: "reserved bytes must be zero",
        });
    }
    Ok(CameraGeometry::with_sensor(width, height).expect("positive dimensions"))
}

/// Inverse of [`write_evd`]. Reads the whole source.
pub fn read_evd<R: Read>(src: R) -> Result<LabeledStream, EvdError> {
    read_evd_sized(src, 0)
}

/// [`read_evd`] with room reserved for `len_hint` bytes of file, e.g. from
/// file metadata.
pub fn read_evd_sized<R: Read>(mut src: R, len_hint: u64) -> Result<LabeledStream, EvdError> {
    let mut header = [0u8; HEADER_LEN];
    let n = read_full(&mut src, &mut header, 0)?;
    if n >= 4 && header[..4] != MAGIC {
        return Err(EvdError::BadMagic {
            found: header[..4].try_into().unwrap(),
        });
    }
    let geometry = decode_header(&header[..n])?;
    let (w, h) = (geometry.width_px, geometry.height_px);

    let records = len_hint.saturating_sub(HEADER_LEN as u64) / RECORD_LEN as u64;
    let mut events = Vec::with_capacity(records.min(1 << 28) as usize);
    let mut buf = vec![0u8; RECORD_LEN * 8192];
    let mut offset = HEADER_LEN as u64;
    let mut prev = 0u64;
    loop {
        let got = read_full(&mut src, &mut buf, offset)?;
        let whole = got / RECORD_LEN * RECORD_LEN;
        for rec in buf[..whole].chunks_exact(RECORD_LEN) {
            let e = decode_record(rec, offset)?;
            if e.t < prev {
                return Err(EvdError::TimestampRegression {
                    offset,
                    prev,
                    t: e.t,
                });
            }
            if e.x >= w || e.y >= h {
                return Err(EvdError::OutOfBounds {
                    offset,
                    x: e.x,
                    y: e.y,
                    width: w,
                    height: h,
                });
            }
            prev = e.t;
            events.push(e);
            offset += RECORD_LEN as u64;
        }
        if got > whole {
            return Err(EvdError::TruncatedRecord {
                offset,
                len: got - whole,
            });
        }
        if got < buf.len() {
            break;
        }
    }
    let mut stream = LabeledStream::new(geometry, events);
    stream.relink(true);
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledStream {
        let g = CameraGeometry::with_sensor(8, 4).unwrap();
        let mut a = Event::new(10, 1, 2, Polarity::Positive).with_truth(true);
        a.class = EventClass::Inceptive;
        a.snow = true;
        let mut b = Event::new(15, 1, 2, Polarity::Positive);
        b.class = EventClass::Trailing;
        b.ie_ref = Some(0);
        b.snow = true;
        let c = Event::new(15, 7, 3, Polarity::Negative).with_truth(false);
        LabeledStream::new(g, vec![a, b, c])
    }

    #[test]
    fn empty_stream_is_header_only() {
        let mut out = Vec::new();
        let n = write_evd(
            &LabeledStream::empty(CameraGeometry::with_sensor(3, 2).unwrap()),
            &mut out,
        )
        .unwrap();
        assert_eq!(n, 16);
        assert_eq!(
            out,
            [b'E', b'B', b'S', b'1', 1, 0, 3, 0, 2, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn record_bytes() {
        let mut out = Vec::new();
        write_evd(&sample(), &mut out).unwrap();
        assert_eq!(out.len(), 16 + 3 * 15);
        assert_eq!(
            &out[16..31],
            &[10, 0, 0, 0, 0, 0, 0, 0, 1, 0, 2, 0, 0b0011_1011, 0, 0]
        );
        assert_eq!(out[31 + 12], 0b0000_1101);
        assert_eq!(out[46 + 12], 0b0001_0000);
    }

    #[test]
    fn round_trip_restores_owner_links() {
        let s = sample();
        let mut out = Vec::new();
        write_evd(&s, &mut out).unwrap();
        assert_eq!(read_evd(out.as_slice()).unwrap(), s);
    }

    #[test]
    fn truncation_reports_record_offset() {
        let mut out = Vec::new();
        write_evd(&sample(), &mut out).unwrap();
        match read_evd(&out[..20]) {
            Err(EvdError::TruncatedRecord { offset: 16, len: 4 }) => {}
            other => panic!("{other:?}"),
        }
        match read_evd(&out[..8]) {
            Err(EvdError::TruncatedHeader { len: 8 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distinct_errors() {
        let mut out = Vec::new();
        write_evd(&sample(), &mut out).unwrap();
        let mut bad = out.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_evd(bad.as_slice()),
            Err(EvdError::BadMagic { .. })
        ));
        let mut back = out.clone();
        back[46] = 0;
        assert!(matches!(
            read_evd(back.as_slice()),
            Err(EvdError::TimestampRegression {
                offset: 46,
                prev: 15,
                t: 0
            })
        ));
        let mut flags = out.clone();
        flags[31 + 12] |= 0x40;
        assert!(matches!(
            read_evd(flags.as_slice()),
            Err(EvdError::BadFlags { offset: 31, .. })
        ));
        let mut ver = out.clone();
        ver[4] = 2;
        assert!(matches!(
            read_evd(ver.as_slice()),
            Err(EvdError::UnsupportedVersion { version: 2 })
        ));
        let mut oob = out;
        oob[46 + 8] = 8;
        assert!(matches!(
            read_evd(oob.as_slice()),
            Err(EvdError::OutOfBounds {
                offset: 46,
                x: 8,
                ..
            })
        ));
    }

    #[test]
    fn unsorted_streams_are_refused() {
        let mut s = sample();
        s.events.swap(0, 2);
        assert!(matches!(
            write_evd(&s, Vec::new()),
            Err(EvdError::Unsorted { index: 2 })
        ));
    }
}
