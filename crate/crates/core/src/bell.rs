//! CHSH combinations and local hidden-variable correlations.
//!
//! Sign convention: `S = E(a,b) - E(a,b') + E(a',b) + E(a',b')`.
//! [`chsh_scan`] maximizes `|S|`, so results do not depend on which term
//! carries the minus.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::correlations::MeasurementSetting;
use crate::error::{Error, Result};
use crate::qlinalg::{Direction, EPS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshSetting {
    pub a: Direction,
    pub a_prime: Direction,
    pub b: Direction,
    pub b_prime: Direction,
}

impl ChshSetting {
    /// All four settings in the x-y plane, angles in radians.
    pub fn planar(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        ChshSetting {
            a: Direction::planar(a),
            a_prime: Direction::planar(a_prime),
            b: Direction::planar(b),
            b_prime: Direction::planar(b_prime),
        }
    }

    /// 0, 90, 45, 135 degrees.
    pub fn standard() -> Self {
        Self::planar(0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshResult {
    pub e_ab: f64,
    pub e_ab_prime: f64,
    pub e_a_prime_b: f64,
    pub e_a_prime_b_prime: f64,
    pub s_value: f64,
}

impl ChshResult {
    fn from_terms(e_ab: f64, e_ab_prime: f64, e_a_prime_b: f64, e_a_prime_b_prime: f64) -> Self {
        ChshResult {
            e_ab,
            e_ab_prime,
            e_a_prime_b,
            e_a_prime_b_prime,
            s_value: e_ab - e_ab_prime + e_a_prime_b + e_a_prime_b_prime,
        }
    }
}

pub fn chsh(e: impl Fn(&Direction, &Direction) -> f64, s: &ChshSetting) -> ChshResult {
    ChshResult::from_terms(e(&s.a, &s.b), e(&s.a, &s.b_prime), e(&s.a_prime, &s.b), e(&s.a_prime, &s.b_prime))
}

/// Fallible variant for correlation functions that reject some settings.
pub fn try_chsh(e: impl Fn(&Direction, &Direction) -> Result<f64>, s: &ChshSetting) -> Result<ChshResult> {
    Ok(ChshResult::from_terms(e(&s.a, &s.b)?, e(&s.a, &s.b_prime)?, e(&s.a_prime, &s.b)?, e(&s.a_prime, &s.b_prime)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshScan {
    pub setting: ChshSetting,
    /// Grid indices of a, a', b, b'; angle = index * 2 pi / resolution.
    pub indices: [usize; 4],
    pub result: ChshResult,
}

/// Grid search for the largest `|S|` with all four settings on `resolution`
/// equally spaced planar angles in `[0, 2 pi)`.
///
/// For fixed `(a, a')` the `b` and `b'` terms separate, so each is optimized
/// independently in both directions. Ties go to the lexicographically
/// smallest index tuple.
pub fn chsh_scan(e: impl Fn(&Direction, &Direction) -> f64 + Sync, resolution: usize) -> Result<ChshScan> {
    if resolution < 4 {
        return Err(Error::InvalidConfig(format!("scan resolution {resolution} < 4")));
    }
    let angle = |i: usize| TAU * i as f64 / resolution as f64;
    let dirs: Vec<Direction> = (0..resolution).map(|i| Direction::planar(angle(i))).collect();
    let grid: Vec<Vec<f64>> = dirs
        .par_iter()
        .map(|a| dirs.iter().map(|b| e(a, b)).collect())
        .collect();

    // (|S|, indices); larger |S| wins, then smaller indices
    fn better(x: (f64, [usize; 4]), y: (f64, [usize; 4])) -> (f64, [usize; 4]) {
        if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
            y
        } else {
            x
        }
    }

    let best = (0..resolution)
        .into_par_iter()
        .map(|ia| {
            let row_a = &grid[ia];
            let mut local = (f64::NEG_INFINITY, [usize::MAX; 4]);
            for (iap, row_ap) in grid.iter().enumerate() {
                // b term: E(a,b) + E(a',b); b' term: E(a',b') - E(a,b')
                let (mut bmax, mut bmin) = ((f64::NEG_INFINITY, 0), (f64::INFINITY, 0));
                let (mut bpmax, mut bpmin) = ((f64::NEG_INFINITY, 0), (f64::INFINITY, 0));
                for ib in 0..resolution {
                    let t = row_a[ib] + row_ap[ib];
                    if t > bmax.0 {
                        bmax = (t, ib);
                    }
                    if t < bmin.0 {
                        bmin = (t, ib);
                    }
                    let u = row_ap[ib] - row_a[ib];
                    if u > bpmax.0 {
                        bpmax = (u, ib);
                    }
                    if u < bpmin.0 {
                        bpmin = (u, ib);
                    }
                }
                let hi = (bmax.0 + bpmax.0, [ia, iap, bmax.1, bpmax.1]);
                let lo = (-(bmin.0 + bpmin.0), [ia, iap, bmin.1, bpmin.1]);
                local = better(better(local, hi), lo);
            }
            local
        })
        .reduce(|| (f64::NEG_INFINITY, [usize::MAX; 4]), better);

    let [ia, iap, ib, ibp] = best.1;
    let setting = ChshSetting { a: dirs[ia], a_prime: dirs[iap], b: dirs[ib], b_prime: dirs[ibp] };
    let result = ChshResult::from_terms(grid[ia][ib], grid[ia][ibp], grid[iap][ib], grid[iap][ibp]);
    Ok(ChshScan { setting, indices: best.1, result })
}

pub type Response = Box<dyn Fn(&Direction, &Direction) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LhvDistribution {
    /// Both wings receive the same isotropic axis.
    DeltaPaired,
    /// Each wing receives its own isotropic axis.
    IndependentIsotropic,
}

/// Local responses `A(a, axis)` and `B(b, axis)` in `[-1, 1]` plus the axis distribution.
pub struct LhvModel {
    pub a: Response,
    pub b: Response,
    pub distribution: LhvDistribution,
}

impl LhvModel {
    pub fn new(
        a: impl Fn(&Direction, &Direction) -> f64 + Send + Sync + 'static,
        b: impl Fn(&Direction, &Direction) -> f64 + Send + Sync + 'static,
        distribution: LhvDistribution,
    ) -> Self {
        LhvModel { a: Box::new(a), b: Box::new(b), distribution }
    }

    /// Spin expectations of the disentangled pair: `A = a.P`, `B = -b.P`.
    pub fn spin_expectation(distribution: LhvDistribution) -> Self {
        Self::new(|a, p| a.dot(p), |b, p| -b.dot(p), distribution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub tolerance: f64,
    /// Legendre nodes in `cos(theta)` on the first pass; azimuth uses twice as many.
    pub initial_order: usize,
    pub max_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { tolerance: 1e-6, initial_order: 16, max_order: 512 }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

/// Average of `f` over the unit sphere with `order` Legendre nodes times
/// `2 * order` azimuths.
fn sphere_mean(order: usize, f: &(dyn Fn(&Direction) -> Result<f64> + Sync)) -> Result<f64> {
    let n_phi = 2 * order;
    let nodes = gauss_legendre(order);
    let rows: Result<Vec<f64>> = nodes
        .par_iter()
        .map(|&(z, w)| {
            let r = (1.0 - z * z).sqrt();
            let mut acc = 0.0;
            for j in 0..n_phi {
                let (s, c) = (TAU * j as f64 / n_phi as f64).sin_cos();
                acc += f(&Direction::normalized(r * c, r * s, z)?)?;
            }
            Ok(w * acc)
        })
        .collect();
    Ok(rows?.iter().sum::<f64>() / (2.0 * n_phi as f64))
}

fn checked(v: f64) -> Result<f64> {
    if v.is_finite() && v.abs() <= 1.0 + EPS {
        Ok(v)
    } else {
        Err(Error::ResponseOutOfRange { value: v })
    }
}

/// Repeats `eval` at doubling order until two passes agree to `tolerance`.
fn converge(q: &QuadratureConfig, eval: impl Fn(usize) -> Result<f64>) -> Result<f64> {
    let mut order = q.initial_order.max(2);
    let mut prev = eval(order)?;
    let mut diff = f64::INFINITY;
    while order * 2 <= q.max_order {
        order *= 2;
        let next = eval(order)?;
        diff = (next - prev).abs();
        if diff < q.tolerance {
            log::debug!("quadrature converged at order {order}, step {diff:e}");
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged { achieved: diff, requested: q.tolerance })
}

/// `E(a, b) = <A(a, P) B(b, P')>` over the model's axis distribution.
pub fn lhv_correlation(m: &LhvModel, s: &MeasurementSetting) -> Result<f64> {
    lhv_correlation_with(m, s, &QuadratureConfig::default())
}

pub fn lhv_correlation_with(m: &LhvModel, s: &MeasurementSetting, q: &QuadratureConfig) -> Result<f64> {
    let (a, b) = (s.a, s.b);
    match m.distribution {
        LhvDistribution::DeltaPaired => converge(q, |order| {
            sphere_mean(order, &|p| Ok(checked((m.a)(&a, p))? * checked((m.b)(&b, p))?))
        }),
        LhvDistribution::IndependentIsotropic => {
            // the double integral factorizes
            let ma = converge(q, |order| sphere_mean(order, &|p| checked((m.a)(&a, p))))?;
            let mb = converge(q, |order| sphere_mean(order, &|p| checked((m.b)(&b, p))))?;
            Ok(ma * mb)
        }
    }
}
