use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::TcpListener;

use super::wire::{decode_payload, read_frame, write_message, Message, ResultMsg};
use super::{connect_with_retry, NetError, RetryPolicy};
use crate::ensemble::{measure_wing, Wing};
use crate::qlinalg::Direction;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    pub wing: Wing,
    pub setting: Direction,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DetectorReport {
    pub received: u64,
    pub malformed: u64,
    pub forwarded: u64,
}

/// Copies every byte read from `inner` into `sink`.
struct Tee<'a, R> {
    inner: R,
    sink: Option<&'a mut dyn Write>,
}

impl<R: Read> Read for Tee<'_, R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        if let Some(s) = self.sink.as_mut() {
            s.write_all(&buf[..n])?;
        }
        Ok(n)
    }
}

/// Measures every particle on `input` and writes results to `output`,
/// preceded by a `Hello` for this wing.
///
/// Frames that are well delimited but undecodable, or addressed to the other
/// wing, are logged, counted and skipped.
pub fn detect_stream<R: Read, W: Write>(
    cfg: &DetectorConfig,
    input: R,
    output: &mut W,
    capture: Option<&mut dyn Write>,
) -> Result<DetectorReport, NetError> {
    let mut input = Tee { inner: input, sink: capture };
    let mut rep = DetectorReport::default();
    write_message(output, &Message::Hello(cfg.wing))?;
    while let Some(payload) = read_frame(&mut input)? {
        rep.received += 1;
        let p = match decode_payload(&payload) {
            Ok(Message::Particle(p)) if p.wing == cfg.wing => p,
            Ok(other) => {
                log::warn!("wing {:?}: unexpected message {other:?}", cfg.wing);
                rep.malformed += 1;
                continue;
            }
            Err(e) => {
                log::warn!("wing {:?}: malformed frame: {e}", cfg.wing);
                rep.malformed += 1;
                continue;
            }
        };
        let outcome = measure_wing(cfg.seed, p.pair_id, cfg.wing, &p.axis, p.branch, &cfg.setting);
        write_message(output, &Message::Result(ResultMsg { pair_id: p.pair_id, setting: cfg.setting, outcome }))?;
        rep.forwarded += 1;
    }
    output.flush()?;
    Ok(rep)
}

/// Accepts one source connection on `listener` and forwards results to the collector.
pub fn run_detector(
    cfg: &DetectorConfig,
    listener: &TcpListener,
    collector_endpoint: &str,
    retry: &RetryPolicy,
    capture: Option<&mut dyn Write>,
) -> Result<DetectorReport, NetError> {
    let collector = connect_with_retry(collector_endpoint, retry)?;
    let (source, peer) = listener.accept()?;
    log::info!("wing {:?}: source connected from {peer}", cfg.wing);
    let rep = detect_stream(cfg, BufReader::new(source), &mut BufWriter::new(collector), capture)?;
    log::info!("wing {:?}: {rep:?}", cfg.wing);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::wire::{encode, ParticleMsg};
    use crate::qlinalg::Sign;

    fn results(bytes: &[u8]) -> Vec<Message> {
        let mut r = bytes;
        std::iter::from_fn(|| read_frame(&mut r).unwrap().map(|p| decode_payload(&p).unwrap())).collect()
    }

    fn particle(pair_id: u64, axis: Direction, branch: Sign, wing: Wing) -> Vec<u8> {
        encode(&Message::Particle(ParticleMsg { pair_id, axis, branch, wing }))
    }

    #[test]
    fn aligned_setting_reproduces_branch() {
        let cfg = DetectorConfig { wing: Wing::A, setting: Direction::Z, seed: 1 };
        let input: Vec<u8> = (0..500).flat_map(|i| particle(i, Direction::Z, Sign::Plus, Wing::A)).collect();
        let mut out = Vec::new();
        let rep = detect_stream(&cfg, &input[..], &mut out, None).unwrap();
        assert_eq!(rep, DetectorReport { received: 500, malformed: 0, forwarded: 500 });
        let msgs = results(&out);
        assert_eq!(msgs[0], Message::Hello(Wing::A));
        assert!(msgs[1..].iter().all(|m| matches!(m, Message::Result(r) if r.outcome == Sign::Plus)));
    }

    #[test]
    fn orthogonal_setting_is_even() {
        let cfg = DetectorConfig { wing: Wing::B, setting: Direction::X, seed: 2 };
        let n = 20_000u64;
        let input: Vec<u8> = (0..n).flat_map(|i| particle(i, Direction::Z, Sign::Minus, Wing::B)).collect();
        let mut out = Vec::new();
        detect_stream(&cfg, &input[..], &mut out, None).unwrap();
        let plus = results(&out).iter().filter(|m| matches!(m, Message::Result(r) if r.outcome == Sign::Plus)).count();
        let frac = plus as f64 / n as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn malformed_frames_are_skipped_and_counted() {
        let cfg = DetectorConfig { wing: Wing::A, setting: Direction::X, seed: 3 };
        let mut input = particle(0, Direction::Z, Sign::Plus, Wing::A);
        input.extend_from_slice(&[0, 0, 0, 3, 9, 9, 9]);
        input.extend(particle(1, Direction::Z, Sign::Plus, Wing::B));
        input.extend(particle(2, Direction::Y, Sign::Minus, Wing::A));
        let mut out = Vec::new();
        let mut cap = Vec::new();
        let rep = detect_stream(&cfg, &input[..], &mut out, Some(&mut cap)).unwrap();
        assert_eq!(rep, DetectorReport { received: 4, malformed: 2, forwarded: 2 });
        assert_eq!(cap, input);
    }

    #[test]
    fn same_inputs_same_outcomes() {
        let cfg = DetectorConfig { wing: Wing::A, setting: Direction::from_polar(1.0, 0.5), seed: 9 };
        let input: Vec<u8> = (0..300).flat_map(|i| particle(i, Direction::Y, Sign::Plus, Wing::A)).collect();
        let (mut o1, mut o2) = (Vec::new(), Vec::new());
        detect_stream(&cfg, &input[..], &mut o1, None).unwrap();
        detect_stream(&cfg, &input[..], &mut o2, None).unwrap();
        assert_eq!(o1, o2);
    }
}
