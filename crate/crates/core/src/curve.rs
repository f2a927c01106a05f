//! The NIST curve B-233 (y^2 + xy = x^3 + ax^2 + b over GF(2^233)) and an
//! independent affine double-and-add scalar multiplication used as the
//! oracle for the cycle-accurate ladder engine.

use num_bigint::BigUint;
use rand::Rng;

use crate::field::{invert, mul_schoolbook, square, FieldElement};

// Curve constants from FIPS 186-4 (Digital Signature Standard), curve B-233.
const B_HEX: &str = "0066647EDE6C332C7F8C0923BB58213B333B20E9CE4281FE115F7D8F90AD";
const GX_HEX: &str = "00FAC9DFCBAC8313BB2139F1BB755FEF65BC391F8B36F8F8EB7371FD558B";
const GY_HEX: &str = "01006A08A41903350678E58528BEBF8A0BEFF867A7CA36716F7E01F81052";
const ORDER_HEX: &str = "1000000000000000000000000000013E974E72F8A6922031D2603CFE0D7";

/// The curve B-233 with its base point and group order.
#[derive(Clone, Debug)]
pub struct CurveB233 {
    pub a: FieldElement,
    pub b: FieldElement,
    pub gx: FieldElement,
    pub gy: FieldElement,
    pub order: BigUint,
}

impl CurveB233 {
    pub fn standard() -> Self {
        Self {
            a: FieldElement::ONE,
            b: FieldElement::from_hex(B_HEX).expect("b constant"),
            gx: FieldElement::from_hex(GX_HEX).expect("gx constant"),
            gy: FieldElement::from_hex(GY_HEX).expect("gy constant"),
            order: BigUint::parse_bytes(ORDER_HEX.as_bytes(), 16).expect("order constant"),
        }
    }

    pub fn generator(&self) -> AffinePoint {
        AffinePoint::new(self.gx, self.gy)
    }

    /// Uniformly random scalar in [1, order).
    pub fn random_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let mut bytes = [0u8; 30];
            rng.fill(&mut bytes[..]);
            bytes[0] &= 1; // 233 bits
            let k = BigUint::from_bytes_be(&bytes);
            if k >= BigUint::from(1u8) && k < self.order {
                return k;
            }
        }
    }

    /// Random scalar with exactly `bits` significant bits: top bit set,
    /// lower bits uniform, rejected only if >= the group order.
    pub fn random_scalar_with_bits<R: Rng + ?Sized>(&self, rng: &mut R, bits: u64) -> BigUint {
        assert!(bits >= 1, "scalar needs at least one bit");
        loop {
            let mut k = BigUint::from(1u8) << (bits - 1);
            for i in 0..bits - 1 {
                if rng.gen::<bool>() {
                    k.set_bit(i, true);
                }
            }
            if k < self.order {
                return k;
            }
        }
    }
}

/// A point in affine coordinates, or the point at infinity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct AffinePoint {
    pub x: FieldElement,
    pub y: FieldElement,
    pub infinity: bool,
}

impl AffinePoint {
    pub const INFINITY: Self = Self {
        x: FieldElement::ZERO,
        y: FieldElement::ZERO,
        infinity: true,
    };

    pub fn new(x: FieldElement, y: FieldElement) -> Self {
        Self {
            x,
            y,
            infinity: false,
        }
    }

    pub fn is_on_curve(&self, curve: &CurveB233) -> bool {
        if self.infinity {
            return true;
        }
        // y^2 + xy = x^3 + ax^2 + b
        let lhs = square(&self.y).add(&mul_schoolbook(&self.x, &self.y));
        let x2 = square(&self.x);
        let rhs = mul_schoolbook(&x2, &self.x)
            .add(&mul_schoolbook(&curve.a, &x2))
            .add(&curve.b);
        lhs == rhs
    }

    /// -(x, y) = (x, x + y) on binary curves.
    pub fn neg(&self) -> Self {
        if self.infinity {
            *self
        } else {
            Self::new(self.x, self.x.add(&self.y))
        }
    }

    pub fn add(&self, other: &Self, curve: &CurveB233) -> Self {
        if self.infinity {
            return *other;
        }
        if other.infinity {
            return *self;
        }
        if self.x == other.x {
            if self.y == other.y {
                return self.double(curve);
            }
            return Self::INFINITY; // P + (-P)
        }
        let dx = self.x.add(&other.x);
        let lambda = mul_schoolbook(&self.y.add(&other.y), &invert(&dx).expect("dx != 0"));
        let x3 = square(&lambda)
            .add(&lambda)
            .add(&dx)
            .add(&curve.a);
        let y3 = mul_schoolbook(&lambda, &self.x.add(&x3))
            .add(&x3)
            .add(&self.y);
        Self::new(x3, y3)
    }

    pub fn double(&self, curve: &CurveB233) -> Self {
        if self.infinity {
            return *self;
        }
        if self.x.is_zero() {
            // (0, sqrt(b)) has order 2
            return Self::INFINITY;
        }
        let lambda = self
            .x
            .add(&mul_schoolbook(&self.y, &invert(&self.x).expect("x != 0")));
        let x3 = square(&lambda).add(&lambda).add(&curve.a);
        let y3 = square(&self.x)
            .add(&mul_schoolbook(&lambda.add(&FieldElement::ONE), &x3));
        Self::new(x3, y3)
    }
}

/// Textbook MSB-first double-and-add. Deliberately shares no code with the
/// accelerator's Montgomery ladder so it can serve as an oracle for it.
pub fn kp_oracle(k: &BigUint, p: &AffinePoint, curve: &CurveB233) -> AffinePoint {
    if k == &BigUint::from(0u8) || p.infinity {
        return AffinePoint::INFINITY;
    }
    let bits = k.bits();
    let mut acc = AffinePoint::INFINITY;
    for i in (0..bits).rev() {
        acc = acc.double(curve);
        if k.bit(i) {
            acc = acc.add(p, curve);
        }
    }
    acc
}
