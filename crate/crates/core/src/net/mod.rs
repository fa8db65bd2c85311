//! Three-role network harness: a source streams particles to two detectors,
//! each detector measures locally and forwards results to a collector, and
//! the collector joins results by pair id.
//!
//! Only the disentangled model runs here. The entangled model samples both
//! outcomes jointly from both settings and exists only in-process.

pub mod collector;
pub mod detector;
pub mod source;
pub mod wire;

use std::io;
use std::net::{TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use thiserror::Error;

pub use collector::{run_collector, CollectorConfig, CollectorReport, JoinEngine};
pub use detector::{run_detector, DetectorConfig, DetectorReport};
pub use source::{run_source, SourceConfig, SourceReport};
pub use wire::{Message, ParticleMsg, ProtocolError, ResultMsg};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("could not connect to {endpoint} after {attempts} attempts: {source}")]
    Connect { endpoint: String, attempts: u32, source: io::Error },
    #[error("stream failed after {sent_a} particles to A and {sent_b} to B: {source}")]
    Partial { sent_a: u64, sent_b: u64, source: io::Error },
    #[error("handshake: {0}")]
    Handshake(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Connection attempts with exponential backoff capped at `max_delay`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 40, initial_delay: Duration::from_millis(25), max_delay: Duration::from_millis(500) }
    }
}

pub fn connect_with_retry(endpoint: &str, policy: &RetryPolicy) -> Result<TcpStream, NetError> {
    let mut delay = policy.initial_delay;
    let mut last = io::Error::new(io::ErrorKind::NotFound, "no attempts made");
    for attempt in 1..=policy.attempts.max(1) {
        let res = endpoint.to_socket_addrs().and_then(|mut addrs| {
            addrs
                .next()
                .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "endpoint resolved to no address"))
                .and_then(TcpStream::connect)
        });
        match res {
            Ok(s) => {
                s.set_nodelay(true).ok();
                return Ok(s);
            }
            Err(e) => {
                log::debug!("connect {endpoint} attempt {attempt} failed: {e}");
                last = e;
                if attempt < policy.attempts {
                    thread::sleep(delay);
                    delay = (delay * 2).min(policy.max_delay);
                }
            }
        }
    }
    Err(NetError::Connect { endpoint: endpoint.to_string(), attempts: policy.attempts.max(1), source: last })
}
