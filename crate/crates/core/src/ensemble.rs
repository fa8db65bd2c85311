//! Seeded Monte Carlo generation of pair events for both models.
//!
//! # Randomness
//!
//! Every draw for pair `i` comes from its own generator, derived from
//! `(seed, i, stream)` only:
//!
//! ```text
//! key   = splitmix64(splitmix64(seed ^ STREAM_SALT[stream]) + i)
//! rng   = Xoshiro256PlusPlus::seed_from_u64(key)
//! ```
//!
//! The source (axis and branch, or the entangled joint outcome), each wing's
//! measurement, and the optional thinning decision use separate streams. A
//! wing's outcome therefore depends only on what the source handed it plus its
//! own setting, generation order does not matter, and a distributed run that
//! follows the same derivation reproduces the in-process events bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::correlations::{CoincidenceTable, MeasurementSetting, TableNorm};
use crate::error::{Error, Result};
use crate::qlinalg::{Direction, Sign};

pub type PairRng = Xoshiro256PlusPlus;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    Entangled,
    Disentangled,
}

/// Which detector a particle flies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Wing {
    A,
    B,
}

impl Wing {
    pub fn as_byte(self) -> u8 {
        match self {
            Wing::A => b'A',
            Wing::B => b'B',
        }
    }

    pub fn from_byte(b: u8) -> Option<Wing> {
        match b {
            b'A' => Some(Wing::A),
            b'B' => Some(Wing::B),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Source,
    WingA,
    WingB,
    Thinning,
}

impl Stream {
    fn salt(self) -> u64 {
        match self {
            Stream::Source => 0x5eed_0000_0000_0001,
            Stream::WingA => 0x5eed_0000_0000_00a1,
            Stream::WingB => 0x5eed_0000_0000_00b1,
            Stream::Thinning => 0x5eed_0000_0000_0071,
        }
    }

    pub fn for_wing(w: Wing) -> Stream {
        match w {
            Wing::A => Stream::WingA,
            Wing::B => Stream::WingB,
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one pair and one role. See the module docs for the derivation.
pub fn pair_rng(seed: u64, pair_id: u64, stream: Stream) -> PairRng {
    let key = splitmix64(splitmix64(seed ^ stream.salt()).wrapping_add(pair_id));
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Distribution of the shared quantization axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampler {
    /// Uniform on the unit sphere.
    Isotropic,
    /// Uniform on the unit circle in the x-y plane.
    PlanarXY,
    Fixed(Direction),
}

/// Source of quantization axes. [`Sampler`] covers the built-in distributions;
/// other distributions can be plugged into [`draw_source_with`].
pub trait AxisSampler {
    fn sample_axis<R: Rng + ?Sized>(&self, rng: &mut R) -> Direction;
}

impl AxisSampler for Sampler {
    fn sample_axis<R: Rng + ?Sized>(&self, rng: &mut R) -> Direction {
        match self {
            Sampler::Isotropic => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = (1.0 - z * z).max(0.0).sqrt();
                let (s, c) = phi.sin_cos();
                Direction::normalized(r * c, r * s, z).expect("point on the sphere")
            }
            Sampler::PlanarXY => Direction::planar(rng.random_range(0.0..std::f64::consts::TAU)),
            Sampler::Fixed(d) => *d,
        }
    }
}

pub fn sample_axis<R: Rng + ?Sized>(sampler: &Sampler, rng: &mut R) -> Direction {
    sampler.sample_axis(rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub n_pairs: u64,
    pub seed: u64,
    pub model: Model,
    pub sampler: Sampler,
    pub settings: MeasurementSetting,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::InvalidConfig("n_pairs must be at least 1".into()));
        }
        Ok(())
    }
}

/// What the source attaches to both particles of a disentangled pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceDraw {
    pub axis: Direction,
    /// State of the wing-A particle along `axis`; wing B carries the opposite.
    pub branch: Sign,
}

impl SourceDraw {
    pub fn spin_state(&self, wing: Wing) -> Sign {
        match wing {
            Wing::A => self.branch,
            Wing::B => -self.branch,
        }
    }
}

pub fn draw_source_with<S: AxisSampler>(sampler: &S, seed: u64, pair_id: u64) -> SourceDraw {
    let mut rng = pair_rng(seed, pair_id, Stream::Source);
    let axis = sampler.sample_axis(&mut rng);
    let branch = if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus };
    SourceDraw { axis, branch }
}

pub fn draw_source(sampler: &Sampler, seed: u64, pair_id: u64) -> SourceDraw {
    draw_source_with(sampler, seed, pair_id)
}

/// Probability of `+1` for a spin in state `spin_state` along `axis`
/// measured at `setting`: `cos^2(theta/2)` with `cos(theta) = spin_state * setting.axis`.
pub fn prob_plus(axis: &Direction, spin_state: Sign, setting: &Direction) -> f64 {
    0.5 * (1.0 + spin_state.value() * setting.dot(axis))
}

/// One local measurement. Consumes nothing but the carried `(axis, spin_state)`,
/// the local setting and the local generator.
pub fn local_outcome<R: Rng + ?Sized>(axis: &Direction, spin_state: Sign, setting: &Direction, rng: &mut R) -> Sign {
    let u: f64 = rng.random();
    if u < prob_plus(axis, spin_state, setting) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Measurement at `wing` using that wing's stream for `(seed, pair_id)`.
pub fn measure_wing(seed: u64, pair_id: u64, wing: Wing, axis: &Direction, spin_state: Sign, setting: &Direction) -> Sign {
    let mut rng = pair_rng(seed, pair_id, Stream::for_wing(wing));
    local_outcome(axis, spin_state, setting, &mut rng)
}

/// One simulated pair. `axis` and `branch` are hidden variables and are absent
/// for the entangled model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEvent {
    pub pair_id: u64,
    pub axis: Option<Direction>,
    pub branch: Option<Sign>,
    pub setting_a: Direction,
    pub setting_b: Direction,
    pub outcome_a: Sign,
    pub outcome_b: Sign,
}

/// The part of a [`PairEvent`] the detectors can see.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectedPair {
    pub pair_id: u64,
    pub setting_a: Direction,
    pub setting_b: Direction,
    pub outcome_a: Sign,
    pub outcome_b: Sign,
}

impl PairEvent {
    pub fn product(&self) -> Sign {
        self.outcome_a * self.outcome_b
    }

    pub fn detector_view(&self) -> DetectedPair {
        DetectedPair {
            pair_id: self.pair_id,
            setting_a: self.setting_a,
            setting_b: self.setting_b,
            outcome_a: self.outcome_a,
            outcome_b: self.outcome_b,
        }
    }
}

/// Generates pair `pair_id` of the run. Randomness comes from the per-pair
/// streams of `config.seed`.
pub fn generate_event(config: &RunConfig, pair_id: u64) -> PairEvent {
    let MeasurementSetting { a, b } = config.settings;
    match config.model {
        Model::Entangled => {
            // joint draw: like signs 1/4 (1 - cos), unlike signs 1/4 (1 + cos)
            let c = a.dot(&b);
            let like = 0.25 * (1.0 - c);
            let unlike = 0.25 * (1.0 + c);
            let mut rng = pair_rng(config.seed, pair_id, Stream::Source);
            let u: f64 = rng.random();
            let (oa, ob) = if u < like {
                (Sign::Plus, Sign::Plus)
            } else if u < like + unlike {
                (Sign::Plus, Sign::Minus)
            } else if u < like + 2.0 * unlike {
                (Sign::Minus, Sign::Plus)
            } else {
                (Sign::Minus, Sign::Minus)
            };
            PairEvent { pair_id, axis: None, branch: None, setting_a: a, setting_b: b, outcome_a: oa, outcome_b: ob }
        }
        Model::Disentangled => {
            let src = draw_source(&config.sampler, config.seed, pair_id);
            let oa = measure_wing(config.seed, pair_id, Wing::A, &src.axis, src.spin_state(Wing::A), &a);
            let ob = measure_wing(config.seed, pair_id, Wing::B, &src.axis, src.spin_state(Wing::B), &b);
            PairEvent {
                pair_id,
                axis: Some(src.axis),
                branch: Some(src.branch),
                setting_a: a,
                setting_b: b,
                outcome_a: oa,
                outcome_b: ob,
            }
        }
    }
}

/// All events of a run, in pair-id order.
pub fn generate_events(config: &RunConfig) -> Result<Vec<PairEvent>> {
    config.validate()?;
    Ok(generate_range(config, 0..config.n_pairs))
}

/// Events for a sub-range of pair ids, in order. Identical to the matching
/// slice of [`generate_events`].
pub fn generate_range(config: &RunConfig, ids: std::ops::Range<u64>) -> Vec<PairEvent> {
    ids.into_par_iter().map(|id| generate_event(config, id)).collect()
}

/// Coincidence counts over the four outcome channels.
///
/// Merging is integer addition, so partial results combine exactly in any order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CoincidenceCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl CoincidenceCounts {
    pub fn record(&mut self, a: Sign, b: Sign) {
        match (a, b) {
            (Sign::Plus, Sign::Plus) => self.pp += 1,
            (Sign::Plus, Sign::Minus) => self.pm += 1,
            (Sign::Minus, Sign::Plus) => self.mp += 1,
            (Sign::Minus, Sign::Minus) => self.mm += 1,
        }
    }

    pub fn merge(mut self, other: CoincidenceCounts) -> CoincidenceCounts {
        self.pp += other.pp;
        self.pm += other.pm;
        self.mp += other.mp;
        self.mm += other.mm;
        self
    }

    pub fn n(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// Mean of `outcome_a * outcome_b` with its standard error.
    pub fn correlation(&self) -> Result<Estimate> {
        let n = self.n();
        if n < 2 {
            return Err(Error::TooFewEvents { required: 2, got: n as usize });
        }
        let like = (self.pp + self.mm) as i128;
        let unlike = (self.pm + self.mp) as i128;
        let mean = (like - unlike) as f64 / n as f64;
        // products are +-1: sum of squared deviations is n (1 - mean^2)
        let var = (n as f64 * (1.0 - mean * mean)).max(0.0) / (n - 1) as f64;
        Ok(Estimate { value: mean, std_error: (var / n as f64).sqrt(), n })
    }

    /// Empirical frequencies, normalized per pair.
    pub fn table(&self) -> CoincidenceTable {
        let n = self.n().max(1) as f64;
        CoincidenceTable {
            p_pp: self.pp as f64 / n,
            p_pm: self.pm as f64 / n,
            p_mp: self.mp as f64 / n,
            p_mm: self.mm as f64 / n,
            normalization: TableNorm::PerPairs,
        }
    }

    /// Binomial standard errors of the [`table`](Self::table) entries.
    pub fn table_std_errors(&self) -> [f64; 4] {
        let n = self.n().max(1) as f64;
        self.table().entries().map(|p| (p * (1.0 - p) / n).sqrt())
    }

    /// Frequencies multiplied by the analytic channel weight, e.g. 1/4 to
    /// recover the raw disentangled normalization.
    pub fn raw_table(&self, channel_weight: f64) -> CoincidenceTable {
        self.table().rescaled(channel_weight, TableNorm::Raw)
    }
}

pub fn count_events(events: &[PairEvent]) -> CoincidenceCounts {
    events.iter().fold(CoincidenceCounts::default(), |mut c, e| {
        c.record(e.outcome_a, e.outcome_b);
        c
    })
}

/// Runs the configuration without keeping events.
pub fn run_counts(config: &RunConfig) -> Result<CoincidenceCounts> {
    config.validate()?;
    Ok((0..config.n_pairs)
        .into_par_iter()
        .fold(CoincidenceCounts::default, |mut c, id| {
            let e = generate_event(config, id);
            c.record(e.outcome_a, e.outcome_b);
            c
        })
        .reduce(CoincidenceCounts::default, CoincidenceCounts::merge))
}

/// Sample mean with standard error `sample_std / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
}

impl Estimate {
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error
    }
}

pub fn estimate_correlation(events: &[PairEvent]) -> Result<Estimate> {
    if events.len() < 2 {
        return Err(Error::TooFewEvents { required: 2, got: events.len() });
    }
    count_events(events).correlation()
}

/// Streaming mean and variance of real samples (Welford), mergeable with the
/// pairwise update of Chan et al.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: RunningMoments) -> RunningMoments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        RunningMoments { n, mean, m2 }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2 / (self.n - 1) as f64
    }

    pub fn estimate(&self) -> Result<Estimate> {
        if self.n < 2 {
            return Err(Error::TooFewEvents { required: 2, got: self.n as usize });
        }
        Ok(Estimate { value: self.mean, std_error: (self.variance() / self.n as f64).sqrt(), n: self.n })
    }
}

/// Sphere or circle average of `f(axis)` over `n` axes drawn from `sampler`,
/// using the source streams of `seed`.
pub fn axis_average(sampler: &Sampler, seed: u64, n: u64, f: impl Fn(&Direction) -> f64 + Sync) -> Result<Estimate> {
    (0..n)
        .into_par_iter()
        .fold(RunningMoments::default, |mut m, id| {
            let mut rng = pair_rng(seed, id, Stream::Source);
            m.push(f(&sampler.sample_axis(&mut rng)));
            m
        })
        .reduce(RunningMoments::default, RunningMoments::merge)
        .estimate()
}

/// Permutes `outcome_b` across pair ids, pairing each wing-A result with a
/// wing-B result from a different pair.
pub fn shuffle_pairs<R: Rng + ?Sized>(events: &[PairEvent], rng: &mut R) -> Result<Vec<PairEvent>> {
    if events.len() < 2 {
        return Err(Error::TooFewEvents { required: 2, got: events.len() });
    }
    let mut b: Vec<Sign> = events.iter().map(|e| e.outcome_b).collect();
    b.shuffle(rng);
    Ok(events
        .iter()
        .zip(b)
        .map(|(e, ob)| PairEvent { outcome_b: ob, ..*e })
        .collect())
}

/// Keeps each pair with probability `keep`, decided on the pair's thinning stream.
pub fn thin_events(events: &[PairEvent], keep: f64, seed: u64) -> Result<Vec<PairEvent>> {
    if !(0.0..=1.0).contains(&keep) {
        return Err(Error::InvalidConfig(format!("keep probability {keep} outside [0, 1]")));
    }
    Ok(events
        .iter()
        .filter(|e| pair_rng(seed, e.pair_id, Stream::Thinning).random::<f64>() < keep)
        .copied()
        .collect())
}

/// Outcome-level correlation the generator converges to.
///
/// Disentangled: `-<(a.P)(b.P)>` over the axis distribution, i.e. `-1/3 a.b`
/// isotropic, `-1/2 (a_x b_x + a_y b_y)` planar, `-(a.P)(b.P)` fixed.
pub fn expected_correlation(model: Model, sampler: &Sampler, s: &MeasurementSetting) -> f64 {
    let (a, b) = (s.a, s.b);
    match model {
        Model::Entangled => -a.dot(&b),
        Model::Disentangled => match sampler {
            Sampler::Isotropic => -a.dot(&b) / 3.0,
            Sampler::PlanarXY => -0.5 * (a.x() * b.x() + a.y() * b.y()),
            Sampler::Fixed(p) => -a.dot(p) * b.dot(p),
        },
    }
}
