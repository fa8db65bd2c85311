//! Length-prefixed binary frames.
//!
//! ```text
//! frame    = len:u32be payload[len]
//! payload  = version:u8 kind:u8 body
//! Particle = pair_id:u64le axis:3*f64le branch:i8 wing:u8      (kind 1, 36 bytes)
//! Result   = pair_id:u64le setting:3*f64le outcome:i8          (kind 2, 35 bytes)
//! Hello    = wing:u8                                           (kind 3, 3 bytes)
//! ```
//!
//! `Hello` is sent once by a detector when it connects to the collector.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::ensemble::Wing;
use crate::qlinalg::{Direction, Sign};

pub const VERSION: u8 = 1;
pub const MAX_FRAME: usize = 1024;
/// Tolerance on `|axis|^2 - 1` for received directions.
pub const AXIS_TOLERANCE: f64 = 1e-9;

const KIND_PARTICLE: u8 = 1;
const KIND_RESULT: u8 = 2;
const KIND_HELLO: u8 = 3;

pub const PARTICLE_LEN: usize = 36;
pub const RESULT_LEN: usize = 35;
pub const HELLO_LEN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleMsg {
    pub pair_id: u64,
    pub axis: Direction,
    pub branch: Sign,
    pub wing: Wing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResultMsg {
    pub pair_id: u64,
    pub setting: Direction,
    pub outcome: Sign,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Message {
    Particle(ParticleMsg),
    Result(ResultMsg),
    Hello(Wing),
}

/// A frame whose payload could not be decoded.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("unknown message kind {0}")]
    Kind(u8),
    #[error("message kind {kind} with {len}-byte payload")]
    Length { kind: u8, len: usize },
    #[error("direction not unit (|n|^2 = {0})")]
    NonUnit(f64),
    #[error("sign byte {0} is not +1 or -1")]
    Sign(i8),
    #[error("wing byte {0:#04x} is not 'A' or 'B'")]
    Wing(u8),
}

fn put_direction(out: &mut Vec<u8>, d: &Direction) {
    for c in d.components() {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

/// Payload bytes without the length prefix.
pub fn encode_payload(msg: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(PARTICLE_LEN);
    out.push(VERSION);
    match msg {
        Message::Particle(p) => {
            out.push(KIND_PARTICLE);
            out.extend_from_slice(&p.pair_id.to_le_bytes());
            put_direction(&mut out, &p.axis);
            out.push(p.branch.as_i8() as u8);
            out.push(p.wing.as_byte());
        }
        Message::Result(r) => {
            out.push(KIND_RESULT);
            out.extend_from_slice(&r.pair_id.to_le_bytes());
            put_direction(&mut out, &r.setting);
            out.push(r.outcome.as_i8() as u8);
        }
        Message::Hello(w) => {
            out.push(KIND_HELLO);
            out.push(w.as_byte());
        }
    }
    out
}

/// Complete frame: length prefix followed by the payload.
pub fn encode(msg: &Message) -> Vec<u8> {
    let payload = encode_payload(msg);
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn direction_at(b: &[u8], at: usize) -> Result<Direction, ProtocolError> {
    let f = |i: usize| f64::from_le_bytes(b[at + 8 * i..at + 8 * i + 8].try_into().unwrap());
    let (x, y, z) = (f(0), f(1), f(2));
    Direction::with_tolerance(x, y, z, AXIS_TOLERANCE).map_err(|_| ProtocolError::NonUnit(x * x + y * y + z * z))
}

fn sign_at(b: &[u8], at: usize) -> Result<Sign, ProtocolError> {
    let v = b[at] as i8;
    Sign::from_i8(v).ok_or(ProtocolError::Sign(v))
}

fn wing_at(b: &[u8], at: usize) -> Result<Wing, ProtocolError> {
    Wing::from_byte(b[at]).ok_or(ProtocolError::Wing(b[at]))
}

pub fn decode_payload(b: &[u8]) -> Result<Message, ProtocolError> {
    if b.len() < 2 {
        return Err(ProtocolError::Length { kind: 0, len: b.len() });
    }
    if b[0] != VERSION {
        return Err(ProtocolError::Version(b[0]));
    }
    let kind = b[1];
    let want = match kind {
        KIND_PARTICLE => PARTICLE_LEN,
        KIND_RESULT => RESULT_LEN,
        KIND_HELLO => HELLO_LEN,
        k => return Err(ProtocolError::Kind(k)),
    };
    if b.len() != want {
        return Err(ProtocolError::Length { kind, len: b.len() });
    }
    Ok(match kind {
        KIND_PARTICLE => Message::Particle(ParticleMsg {
            pair_id: u64_at(b, 2),
            axis: direction_at(b, 10)?,
            branch: sign_at(b, 34)?,
            wing: wing_at(b, 35)?,
        }),
        KIND_RESULT => Message::Result(ResultMsg {
            pair_id: u64_at(b, 2),
            setting: direction_at(b, 10)?,
            outcome: sign_at(b, 34)?,
        }),
        _ => Message::Hello(wing_at(b, 2)?),
    })
}

pub fn write_message<W: Write + ?Sized>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&encode(msg))
}

/// Next payload, or `None` on a clean end of stream.
///
/// A stream that ends inside a frame or announces a frame larger than
/// [`MAX_FRAME`] cannot be resynchronized and is reported as an I/O error.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "stream ended inside a length prefix")),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame length {len} exceeds {MAX_FRAME}")));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn particle() -> ParticleMsg {
        ParticleMsg { pair_id: 7, axis: Direction::from_polar(0.3, 1.2), branch: Sign::Minus, wing: Wing::B }
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(encode(&Message::Particle(particle())).len(), 4 + PARTICLE_LEN);
        let r = ResultMsg { pair_id: 1, setting: Direction::Z, outcome: Sign::Plus };
        let frame = encode(&Message::Result(r));
        assert_eq!(&frame[..4], &(RESULT_LEN as u32).to_be_bytes());
        assert_eq!(frame[4], VERSION);
        assert_eq!(&frame[6..14], &1u64.to_le_bytes());
        assert_eq!(*frame.last().unwrap(), 1);
        assert_eq!(encode(&Message::Hello(Wing::A)), vec![0, 0, 0, 3, VERSION, 3, b'A']);
    }

    #[test]
    fn rejects_bad_payloads() {
        let good = encode_payload(&Message::Particle(particle()));
        let mut v = good.clone();
        v[0] = 9;
        assert_eq!(decode_payload(&v), Err(ProtocolError::Version(9)));
        let mut k = good.clone();
        k[1] = 42;
        assert_eq!(decode_payload(&k), Err(ProtocolError::Kind(42)));
        assert!(matches!(decode_payload(&good[..20]), Err(ProtocolError::Length { .. })));
        let mut s = good.clone();
        s[34] = 0;
        assert_eq!(decode_payload(&s), Err(ProtocolError::Sign(0)));
        let mut w = good.clone();
        w[35] = b'C';
        assert_eq!(decode_payload(&w), Err(ProtocolError::Wing(b'C')));
        let mut n = good.clone();
        n[10..18].copy_from_slice(&2.0f64.to_le_bytes());
        assert!(matches!(decode_payload(&n), Err(ProtocolError::NonUnit(_))));
        assert!(decode_payload(&[]).is_err());
    }

    #[test]
    fn frame_reader_edges() {
        let mut empty: &[u8] = &[];
        assert!(read_frame(&mut empty).unwrap().is_none());
        let mut truncated: &[u8] = &[0, 0, 0, 10, 1, 2];
        assert!(read_frame(&mut truncated).is_err());
        let mut huge: &[u8] = &[0xff, 0, 0, 0];
        assert!(read_frame(&mut huge).is_err());
        let mut partial_prefix: &[u8] = &[0, 0];
        assert!(read_frame(&mut partial_prefix).is_err());
    }

    fn unit() -> impl Strategy<Value = Direction> {
        (-1.0f64..1.0, 0.0..std::f64::consts::TAU).prop_map(|(z, phi)| Direction::from_polar(z.acos(), phi))
    }

    proptest! {
        #[test]
        fn roundtrip(id in any::<u64>(), d in unit(), plus in any::<bool>(), a in any::<bool>()) {
            let sign = if plus { Sign::Plus } else { Sign::Minus };
            let wing = if a { Wing::A } else { Wing::B };
            for msg in [
                Message::Particle(ParticleMsg { pair_id: id, axis: d, branch: sign, wing }),
                Message::Result(ResultMsg { pair_id: id, setting: d, outcome: sign }),
                Message::Hello(wing),
            ] {
                let frame = encode(&msg);
                let mut r: &[u8] = &frame;
                let payload = read_frame(&mut r).unwrap().unwrap();
                prop_assert!(r.is_empty());
                prop_assert_eq!(decode_payload(&payload).unwrap(), msg);
            }
        }
    }
}
