//! Complex operator algebra for one and two spin-1/2 systems.
//!
//! Two-spin operators act on the tensor basis ordered
//! `|+z>|+z>, |+z>|-z>, |-z>|+z>, |-z>|-z>`, i.e. row/column index
//! `2 * s1 + s2` with `+z -> 0` and `-z -> 1`.
//!
//! All identities here hold exactly in exact arithmetic, so comparisons use
//! the single absolute tolerance [`EPS`].

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

pub use num_complex::Complex64 as ComplexScalar;

use crate::error::{Error, Result};

/// Absolute tolerance for operator identities.
pub const EPS: f64 = 1e-12;

const ZERO: ComplexScalar = ComplexScalar::new(0.0, 0.0);
const ONE: ComplexScalar = ComplexScalar::new(1.0, 0.0);
const I: ComplexScalar = ComplexScalar::new(0.0, 1.0);

pub fn approx_eq(a: ComplexScalar, b: ComplexScalar) -> bool {
    (a - b).norm() <= EPS
}

/// Unit vector in real 3-space: a filter orientation or a quantization axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction {
    pub const X: Direction = Direction { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Direction = Direction { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Direction = Direction { x: 0.0, y: 0.0, z: 1.0 };

    /// Accepts components that are already unit length to [`EPS`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::with_tolerance(x, y, z, EPS)
    }

    /// Like [`new`](Self::new) with a caller-chosen tolerance on `|n|^2 - 1`.
    /// Components are kept as given, not rescaled.
    pub fn with_tolerance(x: f64, y: f64, z: f64, tol: f64) -> Result<Self> {
        let norm_sqr = x * x + y * y + z * z;
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > tol {
            return Err(Error::NonUnitDirection { norm_sqr });
        }
        Ok(Direction { x, y, z })
    }

    /// Rescales any non-zero finite vector onto the unit sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm_sqr = x * x + y * y + z * z;
        if !norm_sqr.is_finite() || norm_sqr == 0.0 {
            return Err(Error::NonUnitDirection { norm_sqr });
        }
        let n = norm_sqr.sqrt();
        Ok(Direction { x: x / n, y: y / n, z: z / n })
    }

    /// Polar angle `theta` from +z and azimuth `phi` from +x, in radians.
    pub fn from_polar(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Direction { x: st * cp, y: st * sp, z: ct }
    }

    pub fn from_polar_deg(theta_deg: f64, phi_deg: f64) -> Self {
        Self::from_polar(theta_deg.to_radians(), phi_deg.to_radians())
    }

    /// Unit vector in the x-y plane at azimuth `phi` (radians).
    pub fn planar(phi: f64) -> Self {
        let (sp, cp) = phi.sin_cos();
        Direction { x: cp, y: sp, z: 0.0 }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Direction) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    /// Angle between the two directions in `[0, pi]`.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    pub fn polar_angle(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }

    /// Azimuth in `(-pi, pi]`; zero on the poles.
    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn reversed(&self) -> Direction {
        Direction { x: -self.x, y: -self.y, z: -self.z }
    }

    /// Two unit vectors `(e1, e2)` completing a right-handed frame `(e1, e2, self)`.
    pub fn orthonormal_frame(&self) -> (Direction, Direction) {
        // seed with the coordinate axis least aligned with self
        let ax = [self.x.abs(), self.y.abs(), self.z.abs()];
        let seed = if ax[0] <= ax[1] && ax[0] <= ax[2] {
            Direction::X
        } else if ax[1] <= ax[2] {
            Direction::Y
        } else {
            Direction::Z
        };
        let c = seed.cross(self);
        let e1 = Direction::normalized(c[0], c[1], c[2]).expect("seed axis is not parallel");
        let c2 = self.cross(&e1);
        let e2 = Direction::normalized(c2[0], c2[1], c2[2]).expect("orthogonal unit vectors");
        (e1, e2)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A `+1 / -1` label: spin branch along an axis, or a measurement outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;

    fn neg(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Which particle of the pair an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

/// Single spin-1/2 ket in the `|+z>, |-z>` basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor2 {
    pub up: ComplexScalar,
    pub down: ComplexScalar,
}

impl Spinor2 {
    pub fn new(up: ComplexScalar, down: ComplexScalar) -> Self {
        Spinor2 { up, down }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up.norm_sqr() + self.down.norm_sqr()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Spinor2) -> ComplexScalar {
        self.up.conj() * other.up + self.down.conj() * other.down
    }

    /// `|self><other|`
    pub fn outer(&self, other: &Spinor2) -> Operator2 {
        let k = [self.up, self.down];
        let b = [other.up.conj(), other.down.conj()];
        let mut m = [[ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = k[i] * b[j];
            }
        }
        Operator2::from_entries(m)
    }

    pub fn projector(&self) -> Operator2 {
        self.outer(self)
    }

    /// `|self> (x) |other>`
    pub fn kron(&self, other: &Spinor2) -> PairKet {
        PairKet([
            self.up * other.up,
            self.up * other.down,
            self.down * other.up,
            self.down * other.down,
        ])
    }
}

/// Two-spin ket in the fixed tensor basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairKet(pub [ComplexScalar; 4]);

impl PairKet {
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &PairKet) -> ComplexScalar {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: ComplexScalar) -> PairKet {
        PairKet(self.0.map(|c| c * s))
    }

    pub fn outer(&self, other: &PairKet) -> Operator4 {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.0[i] * other.0[j].conj();
            }
        }
        Operator4::from_entries(m)
    }

    pub fn projector(&self) -> Operator4 {
        self.outer(self)
    }
}

impl Sub for PairKet {
    type Output = PairKet;

    fn sub(self, rhs: PairKet) -> PairKet {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        PairKet(out)
    }
}

/// Square complex matrix of fixed dimension.
#[derive(Clone, Copy, PartialEq)]
pub struct Operator<const N: usize> {
    m: [[ComplexScalar; N]; N],
}

pub type Operator2 = Operator<2>;
pub type Operator4 = Operator<4>;

impl<const N: usize> Operator<N> {
    pub fn zero() -> Self {
        Operator { m: [[ZERO; N]; N] }
    }

    pub fn identity() -> Self {
        let mut m = [[ZERO; N]; N];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Operator { m }
    }

    pub fn from_entries(m: [[ComplexScalar; N]; N]) -> Self {
        Operator { m }
    }

    pub fn from_real(r: [[f64; N]; N]) -> Self {
        Operator { m: r.map(|row| row.map(|v| ComplexScalar::new(v, 0.0))) }
    }

    pub fn entries(&self) -> &[[ComplexScalar; N]; N] {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = [[ZERO; N]; N];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.m[j][i].conj();
            }
        }
        Operator { m }
    }

    pub fn trace(&self) -> ComplexScalar {
        (0..N).map(|i| self.m[i][i]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Operator { m: self.m.map(|row| row.map(|v| v * s)) }
    }

    pub fn scale_complex(&self, s: ComplexScalar) -> Self {
        Operator { m: self.m.map(|row| row.map(|v| v * s)) }
    }

    /// Real part of `Tr(self * other)`, the expectation of a Hermitian
    /// observable against a Hermitian state.
    pub fn trace_product(&self, other: &Self) -> ComplexScalar {
        let mut acc = ZERO;
        for i in 0..N {
            for k in 0..N {
                acc += self.m[i][k] * other.m[k][i];
            }
        }
        acc
    }

    /// `Tr(rho^2)`
    pub fn purity(&self) -> f64 {
        self.trace_product(self).re
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            for j in 0..N {
                acc += (self.m[i][j] - other.m[i][j]).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.frobenius_distance(other) <= EPS
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..N {
            for j in i..N {
                if (self.m[i][j] - self.m[j][i].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    ///
    /// Uses the real symmetric embedding `[[A, -B], [B, A]]` of `A + iB`, whose
    /// spectrum is that of the operator with every eigenvalue doubled, and
    /// diagonalizes it with cyclic Jacobi rotations.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n2 = 2 * N;
        let mut s = vec![vec![0.0; n2]; n2];
        for i in 0..N {
            for j in 0..N {
                let (re, im) = (self.m[i][j].re, self.m[i][j].im);
                s[i][j] = re;
                s[i + N][j + N] = re;
                s[i][j + N] = -im;
                s[i + N][j] = im;
            }
        }
        let mut ev = jacobi_eigenvalues(s);
        ev.sort_by(|a, b| a.total_cmp(b));
        ev.into_iter().step_by(2).collect()
    }

    /// Checks Hermiticity, the expected trace and positive semidefiniteness,
    /// all to [`EPS`].
    pub fn check_density(&self, expected_trace: f64) -> Result<()> {
        if !self.is_hermitian(EPS) {
            return Err(Error::NotDensity { reason: "not Hermitian", value: f64::NAN });
        }
        let tr = self.trace();
        if (tr.re - expected_trace).abs() > EPS || tr.im.abs() > EPS {
            return Err(Error::NotDensity { reason: "wrong trace", value: tr.re });
        }
        let min_ev = self.hermitian_eigenvalues()[0];
        if min_ev < -EPS {
            return Err(Error::NotDensity { reason: "negative eigenvalue", value: min_ev });
        }
        Ok(())
    }

    /// Rank-1 orthogonal projector test: Hermitian, idempotent, unit trace.
    pub fn is_rank1_projector(&self) -> bool {
        self.is_hermitian(EPS)
            && (*self * *self).approx_eq(self)
            && approx_eq(self.trace(), ONE)
    }
}

#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    let scale: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

impl<const N: usize> Index<(usize, usize)> for Operator<N> {
    type Output = ComplexScalar;

    fn index(&self, (i, j): (usize, usize)) -> &ComplexScalar {
        &self.m[i][j]
    }
}

impl<const N: usize> Mul for Operator<N> {
    type Output = Operator<N>;

    fn mul(self, rhs: Operator<N>) -> Operator<N> {
        let mut m = [[ZERO; N]; N];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..N).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Operator { m }
    }
}

impl<const N: usize> Add for Operator<N> {
    type Output = Operator<N>;

    fn add(self, rhs: Operator<N>) -> Operator<N> {
        let mut m = self.m;
        for (row, rrow) in m.iter_mut().zip(rhs.m.iter()) {
            for (e, r) in row.iter_mut().zip(rrow) {
                *e += r;
            }
        }
        Operator { m }
    }
}

impl<const N: usize> Sub for Operator<N> {
    type Output = Operator<N>;

    fn sub(self, rhs: Operator<N>) -> Operator<N> {
        self + rhs.scale(-1.0)
    }
}

impl<const N: usize> fmt::Debug for Operator<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator<{N}> [")?;
        for row in &self.m {
            write!(f, "  ")?;
            for e in row {
                write!(f, "{:>+.6}{:+.6}i  ", e.re, e.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Operator2 {
    pub fn apply(&self, v: &Spinor2) -> Spinor2 {
        Spinor2 {
            up: self.m[0][0] * v.up + self.m[0][1] * v.down,
            down: self.m[1][0] * v.up + self.m[1][1] * v.down,
        }
    }
}

pub const SIGMA_X: Operator2 = Operator { m: [[ZERO, ONE], [ONE, ZERO]] };
pub const SIGMA_Y: Operator2 = Operator {
    m: [[ZERO, ComplexScalar::new(0.0, -1.0)], [I, ZERO]],
};
pub const SIGMA_Z: Operator2 = Operator {
    m: [[ONE, ZERO], [ZERO, ComplexScalar::new(-1.0, 0.0)]],
};

/// The three Pauli matrices in x, y, z order.
pub fn pauli() -> [Operator2; 3] {
    [SIGMA_X, SIGMA_Y, SIGMA_Z]
}

/// `n . sigma = n_x sigma_x + n_y sigma_y + n_z sigma_z`.
pub fn pauli_dot(n: &Direction) -> Operator2 {
    let (x, y, z) = (n.x, n.y, n.z);
    Operator::from_entries([
        [ComplexScalar::new(z, 0.0), ComplexScalar::new(x, -y)],
        [ComplexScalar::new(x, y), ComplexScalar::new(-z, 0.0)],
    ])
}

/// Kronecker product `a (x) b` in the documented basis order.
pub fn tensor(a: &Operator2, b: &Operator2) -> Operator4 {
    let mut m = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[2 * i + k][2 * j + l] = a.m[i][j] * b.m[k][l];
                }
            }
        }
    }
    Operator::from_entries(m)
}

/// Traces out the particle on side `over`, returning the other one's operator.
pub fn partial_trace(m: &Operator4, over: Side) -> Operator2 {
    let mut r = [[ZERO; 2]; 2];
    for (i, row) in r.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = match over {
                Side::Second => (0..2).map(|k| m.m[2 * i + k][2 * j + k]).sum(),
                Side::First => (0..2).map(|k| m.m[2 * k + i][2 * k + j]).sum(),
            };
        }
    }
    Operator::from_entries(r)
}

/// Projects side `on` with `projector` and traces that side out:
/// `Tr_on{ P_on M }`. The trace of the result is the weight of the branch.
pub fn conditional_reduce(m: &Operator4, projector: &Operator2, on: Side) -> Result<Operator2> {
    if !projector.is_rank1_projector() {
        return Err(Error::NotProjector("expected a Hermitian, idempotent, unit-trace operator"));
    }
    let lifted = match on {
        Side::First => tensor(projector, &Operator2::identity()),
        Side::Second => tensor(&Operator2::identity(), projector),
    };
    Ok(partial_trace(&(lifted * *m), on))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexScalar {
        ComplexScalar::new(re, im)
    }

    fn arb_direction() -> impl Strategy<Value = Direction> {
        (-1.0f64..=1.0, 0.0..std::f64::consts::TAU)
            .prop_map(|(z, phi)| Direction::from_polar(z.acos(), phi))
    }

    #[test]
    fn pauli_dot_axes() {
        assert!(pauli_dot(&Direction::Z).approx_eq(&Operator::from_real([[1.0, 0.0], [0.0, -1.0]])));
        assert!(pauli_dot(&Direction::X).approx_eq(&Operator::from_real([[0.0, 1.0], [1.0, 0.0]])));
        assert!(pauli_dot(&Direction::Y).approx_eq(&SIGMA_Y));
    }

    #[test]
    fn pauli_dot_spectrum_at_oblique_axis() {
        let n = Direction::from_polar(std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_4);
        let m = pauli_dot(&n);
        let ev = m.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < EPS && (ev[1] - 1.0).abs() < EPS, "{ev:?}");
        // characteristic polynomial: lambda^2 - tr lambda + det
        let tr = m.trace();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        assert!(approx_eq(tr, c(0.0, 0.0)));
        assert!(approx_eq(det, c(-1.0, 0.0)));
    }

    #[test]
    fn tensor_identity_and_traceless() {
        assert!(tensor(&Operator2::identity(), &Operator2::identity()).approx_eq(&Operator4::identity()));
        assert!(approx_eq(tensor(&SIGMA_Z, &SIGMA_Z).trace(), c(0.0, 0.0)));
    }

    #[test]
    fn tensor_sigma_x_sigma_y_matches_hand_expansion() {
        // sigma_x (x) sigma_y = [[0, sigma_y], [sigma_y, 0]]
        let z = c(0.0, 0.0);
        let expected = Operator4::from_entries([
            [z, z, z, c(0.0, -1.0)],
            [z, z, c(0.0, 1.0), z],
            [z, c(0.0, -1.0), z, z],
            [c(0.0, 1.0), z, z, z],
        ]);
        assert!(tensor(&SIGMA_X, &SIGMA_Y).approx_eq(&expected));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = pauli_dot(&Direction::from_polar(0.3, 1.1)).scale(0.5) + Operator2::identity().scale(0.5);
        let b = SIGMA_X + Operator2::identity().scale(2.0);
        let pt2 = partial_trace(&tensor(&a, &b), Side::Second);
        assert!(pt2.approx_eq(&a.scale_complex(b.trace())));
        let pt1 = partial_trace(&tensor(&a, &b), Side::First);
        assert!(pt1.approx_eq(&b.scale_complex(a.trace())));
    }

    #[test]
    fn conditional_reduce_rejects_non_projector() {
        let m = Operator4::identity().scale(0.25);
        assert!(matches!(
            conditional_reduce(&m, &SIGMA_Z, Side::Second),
            Err(Error::NotProjector(_))
        ));
        assert!(conditional_reduce(&m, &Operator2::identity(), Side::Second).is_err());
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(1.0, 1.0, 0.0).is_err());
        assert!(Direction::normalized(0.0, 0.0, 0.0).is_err());
        assert!(Direction::normalized(f64::NAN, 0.0, 1.0).is_err());
        let d = Direction::normalized(1.0, 1.0, 0.0).unwrap();
        assert!((d.dot(&d) - 1.0).abs() < EPS);
    }

    #[test]
    fn density_check_detects_violations() {
        let rho = Operator2::identity().scale(0.5);
        assert!(rho.check_density(1.0).is_ok());
        assert!(rho.check_density(0.5).is_err());
        let neg = Operator2::from_real([[1.5, 0.0], [0.0, -0.5]]);
        assert!(matches!(neg.check_density(1.0), Err(Error::NotDensity { .. })));
        assert!(SIGMA_Y.scale_complex(I).check_density(0.0).is_err());
    }

    proptest! {
        #[test]
        fn pauli_dot_squares_to_identity(n in arb_direction()) {
            let m = pauli_dot(&n);
            prop_assert!((m * m).approx_eq(&Operator2::identity()));
            prop_assert!(approx_eq(m.trace(), c(0.0, 0.0)));
            prop_assert!(m.is_hermitian(EPS));
        }

        #[test]
        fn frame_is_orthonormal(n in arb_direction()) {
            let (e1, e2) = n.orthonormal_frame();
            prop_assert!(e1.dot(&n).abs() < EPS && e2.dot(&n).abs() < EPS && e1.dot(&e2).abs() < EPS);
            let k = e1.cross(&e2);
            prop_assert!((k[0] - n.x()).abs() < EPS && (k[1] - n.y()).abs() < EPS && (k[2] - n.z()).abs() < EPS);
        }

        #[test]
        fn tensor_partial_trace_round_trip(a in arb_direction(), b in arb_direction()) {
            let ra = (Operator2::identity() + pauli_dot(&a)).scale(0.5);
            let rb = (Operator2::identity() + pauli_dot(&b)).scale(0.5);
            prop_assert!(partial_trace(&tensor(&ra, &rb), Side::Second).approx_eq(&ra));
            prop_assert!(partial_trace(&tensor(&ra, &rb), Side::First).approx_eq(&rb));
            prop_assert!(approx_eq(tensor(&ra, &rb).trace(), ra.trace() * rb.trace()));
        }

        #[test]
        fn conditional_branches_sum_to_marginal(p in arb_direction(), q in arb_direction(), r in arb_direction()) {
            // a generic correlated (non-product) state: mix of product states
            let ra = (Operator2::identity() + pauli_dot(&p)).scale(0.5);
            let rb = (Operator2::identity() + pauli_dot(&q)).scale(0.5);
            let m = tensor(&ra, &rb).scale(0.5) + tensor(&rb, &ra).scale(0.5);
            let plus = (Operator2::identity() + pauli_dot(&r)).scale(0.5);
            let minus = (Operator2::identity() - pauli_dot(&r)).scale(0.5);
            for side in [Side::First, Side::Second] {
                let sum = conditional_reduce(&m, &plus, side).unwrap() + conditional_reduce(&m, &minus, side).unwrap();
                prop_assert!(sum.approx_eq(&partial_trace(&m, side)));
            }
        }
    }
}
