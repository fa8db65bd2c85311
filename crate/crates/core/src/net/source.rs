use std::io::{BufWriter, Write};

use super::wire::{write_message, Message, ParticleMsg};
use super::{connect_with_retry, NetError, RetryPolicy};
use crate::ensemble::{draw_source, Sampler, Wing};

#[derive(Clone, Debug)]
pub struct SourceConfig {
    pub n_pairs: u64,
    pub seed: u64,
    pub sampler: Sampler,
    pub endpoint_a: String,
    pub endpoint_b: String,
    pub retry: RetryPolicy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SourceReport {
    pub sent_a: u64,
    pub sent_b: u64,
}

/// Writes one particle per wing for each pair id `0..n_pairs`.
pub fn emit_particles<A: Write, B: Write>(
    n_pairs: u64,
    seed: u64,
    sampler: &Sampler,
    to_a: &mut A,
    to_b: &mut B,
) -> Result<SourceReport, NetError> {
    let mut rep = SourceReport::default();
    let partial = |rep: &SourceReport, source| NetError::Partial { sent_a: rep.sent_a, sent_b: rep.sent_b, source };
    for pair_id in 0..n_pairs {
        let d = draw_source(sampler, seed, pair_id);
        for wing in [Wing::A, Wing::B] {
            let msg = Message::Particle(ParticleMsg { pair_id, axis: d.axis, branch: d.spin_state(wing), wing });
            match wing {
                Wing::A => {
                    write_message(to_a, &msg).map_err(|e| partial(&rep, e))?;
                    rep.sent_a += 1;
                }
                Wing::B => {
                    write_message(to_b, &msg).map_err(|e| partial(&rep, e))?;
                    rep.sent_b += 1;
                }
            }
        }
    }
    to_a.flush().map_err(|e| partial(&rep, e))?;
    to_b.flush().map_err(|e| partial(&rep, e))?;
    Ok(rep)
}

pub fn run_source(cfg: &SourceConfig) -> Result<SourceReport, NetError> {
    let a = connect_with_retry(&cfg.endpoint_a, &cfg.retry)?;
    let b = connect_with_retry(&cfg.endpoint_b, &cfg.retry)?;
    let rep = emit_particles(cfg.n_pairs, cfg.seed, &cfg.sampler, &mut BufWriter::new(a), &mut BufWriter::new(b))?;
    log::info!("source sent {} / {} particles", rep.sent_a, rep.sent_b);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::wire::{decode_payload, read_frame};
    use crate::qlinalg::Direction;

    fn decode_all(bytes: &[u8]) -> Vec<ParticleMsg> {
        let mut r = bytes;
        let mut out = vec![];
        while let Some(p) = read_frame(&mut r).unwrap() {
            match decode_payload(&p).unwrap() {
                Message::Particle(m) => out.push(m),
                other => panic!("{other:?}"),
            }
        }
        out
    }

    #[test]
    fn one_message_per_wing_with_opposite_branches() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let rep = emit_particles(1000, 5, &Sampler::Isotropic, &mut a, &mut b).unwrap();
        assert_eq!(rep, SourceReport { sent_a: 1000, sent_b: 1000 });
        let (ma, mb) = (decode_all(&a), decode_all(&b));
        assert_eq!(ma.len(), 1000);
        for (x, y) in ma.iter().zip(&mb) {
            assert_eq!(x.pair_id, y.pair_id);
            assert_eq!(x.axis, y.axis);
            assert_eq!(x.branch.as_i8() + y.branch.as_i8(), 0);
            assert_eq!((x.wing, y.wing), (Wing::A, Wing::B));
        }
    }

    #[test]
    fn fixed_sampler_axis() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        emit_particles(50, 1, &Sampler::Fixed(Direction::Z), &mut a, &mut b).unwrap();
        assert!(decode_all(&a).iter().chain(&decode_all(&b)).all(|m| m.axis.components() == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn deterministic_bytes() {
        let run = |seed| {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            emit_particles(200, seed, &Sampler::PlanarXY, &mut a, &mut b).unwrap();
            (a, b)
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn unreachable_endpoint_reports_connect_error() {
        let cfg = SourceConfig {
            n_pairs: 1,
            seed: 0,
            sampler: Sampler::Isotropic,
            // port 1 on localhost is essentially never listening
            endpoint_a: "127.0.0.1:1".into(),
            endpoint_b: "127.0.0.1:1".into(),
            retry: RetryPolicy { attempts: 2, initial_delay: std::time::Duration::from_millis(1), ..Default::default() },
        };
        assert!(matches!(run_source(&cfg), Err(NetError::Connect { attempts: 2, .. })));
    }
}
