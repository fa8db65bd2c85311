//! Pair states: directional kets, the singlet, conditional single-spin
//! operators, the fixed-axis disentangled mixture, and photon helicity pairs.
//!
//! The conditional operators `rho^i_P(s) = 1/4 (I + s P.sigma)` carry trace
//! 1/2, so the fixed-axis mixture built from them has trace 1/4. Both that raw
//! bookkeeping and unit-trace versions are exposed; callers pick one with
//! [`Normalization`].

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::qlinalg::{
    pauli, pauli_dot, tensor, ComplexScalar, Direction, Operator2, Operator4, PairKet, Side, Sign,
    Spinor2, EPS,
};

/// Trace convention for conditional and mixed operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Conditional single-spin operators keep trace 1/2 and the mixture trace 1/4.
    Raw,
    /// Every operator is rescaled to unit trace.
    UnitTrace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    Entangled,
    DisentangledFixedAxis,
}

/// A two-spin density operator tagged with the model that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct PairState {
    kind: PairKind,
    rho: Operator4,
    axis: Option<Direction>,
    normalization: Normalization,
}

impl PairState {
    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn rho(&self) -> &Operator4 {
        &self.rho
    }

    /// Quantization axis; present only for the disentangled mixture.
    pub fn axis(&self) -> Option<Direction> {
        self.axis
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn expected_trace(&self) -> f64 {
        match (self.kind, self.normalization) {
            (PairKind::DisentangledFixedAxis, Normalization::Raw) => 0.25,
            _ => 1.0,
        }
    }

    /// Density-operator checks plus the model's structural identity.
    pub fn check(&self) -> Result<()> {
        self.rho.check_density(self.expected_trace())?;
        let reference = match (self.kind, self.axis) {
            (PairKind::Entangled, _) => rho_epr_pauli_expansion(),
            (PairKind::DisentangledFixedAxis, Some(p)) => {
                disentangled_from_reduced(&p, self.normalization)
            }
            (PairKind::DisentangledFixedAxis, None) => {
                return Err(Error::NotDensity { reason: "disentangled state without axis", value: f64::NAN })
            }
        };
        if !self.rho.approx_eq(&reference) {
            return Err(Error::NotDensity {
                reason: "does not match its defining construction",
                value: self.rho.frobenius_distance(&reference),
            });
        }
        Ok(())
    }
}

/// `|+>_P = (cos(theta/2), sin(theta/2) e^{i phi})`
pub fn ket_plus(p: &Direction) -> Spinor2 {
    let (half_t, phi) = (p.polar_angle() / 2.0, p.azimuth());
    Spinor2::new(
        ComplexScalar::new(half_t.cos(), 0.0),
        ComplexScalar::from_polar(half_t.sin(), phi),
    )
}

/// `|->_P = (-sin(theta/2) e^{-i phi}, cos(theta/2))`
pub fn ket_minus(p: &Direction) -> Spinor2 {
    let (half_t, phi) = (p.polar_angle() / 2.0, p.azimuth());
    Spinor2::new(
        -ComplexScalar::from_polar(half_t.sin(), -phi),
        ComplexScalar::new(half_t.cos(), 0.0),
    )
}

pub fn ket(p: &Direction, sign: Sign) -> Spinor2 {
    match sign {
        Sign::Plus => ket_plus(p),
        Sign::Minus => ket_minus(p),
    }
}

/// Projector onto the `sign` eigenstate of `p . sigma`.
pub fn projector(p: &Direction, sign: Sign) -> Operator2 {
    ket(p, sign).projector()
}

/// Singlet `(|+>|-> - |->|+>) / sqrt 2` written with kets quantized along `p`.
pub fn singlet_ket_in_basis(p: &Direction) -> PairKet {
    let (up, dn) = (ket_plus(p), ket_minus(p));
    (up.kron(&dn) - dn.kron(&up)).scale(ComplexScalar::new(FRAC_1_SQRT_2, 0.0))
}

pub fn singlet_ket() -> PairKet {
    singlet_ket_in_basis(&Direction::Z)
}

/// `1/4 (I (x) I - sigma^1 . sigma^2)` summed term by term.
pub fn rho_epr_pauli_expansion() -> Operator4 {
    let ss = pauli()
        .iter()
        .fold(Operator4::zero(), |acc, s| acc + tensor(s, s));
    (Operator4::identity() - ss).scale(0.25)
}

/// Singlet projector built in the `p` basis. Independent of `p`.
pub fn rho_epr_in_basis(p: &Direction) -> Operator4 {
    singlet_ket_in_basis(p).projector()
}

/// The entangled singlet density operator.
pub fn rho_epr() -> PairState {
    let state = PairState {
        kind: PairKind::Entangled,
        rho: singlet_ket().projector(),
        axis: None,
        normalization: Normalization::UnitTrace,
    };
    debug_assert!(state.check().is_ok());
    state
}

/// Conditional single-spin operator for a spin left in state `branch` along `p`.
///
/// With [`Normalization::Raw`] this is `1/4 (I + branch * p.sigma)`, half the
/// projector, for either spin. `spin` only labels which particle it describes.
pub fn reduced(p: &Direction, branch: Sign, _spin: Side, norm: Normalization) -> Operator2 {
    let weight = match norm {
        Normalization::Raw => 0.25,
        Normalization::UnitTrace => 0.5,
    };
    (Operator2::identity() + pauli_dot(p).scale(branch.value())).scale(weight)
}

fn disentangled_from_reduced(p: &Direction, norm: Normalization) -> Operator4 {
    let r = |s, side| reduced(p, s, side, Normalization::Raw);
    let raw = (tensor(&r(Sign::Plus, Side::First), &r(Sign::Minus, Side::Second))
        + tensor(&r(Sign::Minus, Side::First), &r(Sign::Plus, Side::Second)))
    .scale(0.5);
    match norm {
        Normalization::Raw => raw,
        Normalization::UnitTrace => raw.scale(4.0),
    }
}

/// Equal-weight mixture of the two anti-aligned product states along `p`.
pub fn rho_disentangled(p: &Direction, norm: Normalization) -> PairState {
    let state = PairState {
        kind: PairKind::DisentangledFixedAxis,
        rho: disentangled_from_reduced(p, norm),
        axis: Some(*p),
        normalization: norm,
    };
    debug_assert!(state.check().is_ok());
    state
}

/// Two-photon helicity state over the basis `R1R2, R1L2, L1R2, L1L2`.
///
/// Kept separate from the spin states: identifying R/L with +z/-z is a
/// modelling choice the caller makes explicitly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonPairState {
    amps: [ComplexScalar; 4],
}

impl PhotonPairState {
    pub const RR: usize = 0;
    pub const RL: usize = 1;
    pub const LR: usize = 2;
    pub const LL: usize = 3;

    pub fn new(amps: [ComplexScalar; 4]) -> Result<Self> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > EPS {
            return Err(Error::NonUnitState { norm_sqr: n });
        }
        Ok(PhotonPairState { amps })
    }

    fn real(v: [f64; 4]) -> Self {
        PhotonPairState { amps: v.map(|x| ComplexScalar::new(x, 0.0)) }
    }

    pub fn phi_plus() -> Self {
        Self::real([FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2])
    }

    pub fn phi_minus() -> Self {
        Self::real([FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2])
    }

    /// `(|R1L2> - |L1R2>) / sqrt 2`
    pub fn singlet() -> Self {
        Self::real([0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0])
    }

    pub fn basis(index: usize) -> Self {
        let mut v = [0.0; 4];
        v[index] = 1.0;
        Self::real(v)
    }

    pub fn amplitudes(&self) -> &[ComplexScalar; 4] {
        &self.amps
    }

    pub fn inner(&self, other: &Self) -> ComplexScalar {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.amps.iter().zip(other.amps.iter()).all(|(a, b)| (a - b).norm() <= EPS)
    }

    /// Equal up to a global phase.
    pub fn same_ray(&self, other: &Self) -> bool {
        (self.inner(other).norm() - 1.0).abs() <= EPS
    }

    pub fn scale(&self, s: ComplexScalar) -> Self {
        PhotonPairState { amps: self.amps.map(|a| a * s) }
    }
}

/// Inversion through the source: swaps R and L on both photons.
pub fn parity_invert(s: &PhotonPairState) -> PhotonPairState {
    let a = s.amps;
    PhotonPairState { amps: [a[3], a[2], a[1], a[0]] }
}

/// Eigenvalue of `s` under [`parity_invert`], if `s` is an eigenstate.
pub fn parity_eigenvalue(s: &PhotonPairState) -> Option<ComplexScalar> {
    let inv = parity_invert(s);
    let lambda = s.inner(&inv);
    inv.approx_eq(&s.scale(lambda)).then_some(lambda)
}
