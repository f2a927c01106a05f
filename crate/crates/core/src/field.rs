//! Arithmetic in GF(2^233) with the reduction polynomial f(t) = t^233 + t^74 + 1.
//!
//! Elements are polynomials over GF(2) of degree < 233, stored as four u64
//! limbs (bit i of the vector is the coefficient of t^i). `mul_schoolbook`
//! is the reference multiplication used as an oracle by the cycle-accurate
//! multiplier model.

use std::fmt;
use std::ops::BitXor;

use rand::Rng;
use thiserror::Error;

/// Number of coefficient bits in a field element.
pub const FIELD_BITS: usize = 233;
/// Maximum width of an unreduced product of two field elements.
pub const WIDE_BITS: usize = 465;
/// Exponents of the irreducible polynomial f(t) = t^233 + t^74 + 1.
pub const F_EXPONENTS: [usize; 3] = [233, 74, 0];

const LIMBS: usize = 4;
const WIDE_LIMBS: usize = 8;
const HEX_DIGITS: usize = 59;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("invalid hex string: {0}")]
    BadHex(String),
    #[error("value does not fit in 233 bits")]
    Overflow,
}

/// A fully reduced element of GF(2^233). Bits at index >= 233 are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FieldElement {
    limbs: [u64; LIMBS],
}

/// An unreduced polynomial of degree <= 464, the result of a full-width
/// carryless product before reduction.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct WidePolynomial {
    limbs: [u64; WIDE_LIMBS],
}

impl FieldElement {
    pub const ZERO: Self = Self { limbs: [0; LIMBS] };
    pub const ONE: Self = Self { limbs: [1, 0, 0, 0] };

    /// Builds an element from raw limbs; bits above 232 must be clear.
    pub fn from_limbs(limbs: [u64; LIMBS]) -> Result<Self, FieldError> {
        if limbs[3] >> (FIELD_BITS - 192) != 0 {
            return Err(FieldError::Overflow);
        }
        Ok(Self { limbs })
    }

    pub fn limbs(&self) -> &[u64; LIMBS] {
        &self.limbs
    }

    /// The element t^i.
    pub fn monomial(i: usize) -> Self {
        assert!(i < FIELD_BITS, "monomial degree out of range");
        let mut limbs = [0u64; LIMBS];
        limbs[i / 64] = 1u64 << (i % 64);
        Self { limbs }
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < FIELD_BITS);
        (self.limbs[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.limbs == [0; LIMBS]
    }

    /// Degree of the polynomial, or None for the zero element.
    pub fn degree(&self) -> Option<usize> {
        for (w, &limb) in self.limbs.iter().enumerate().rev() {
            if limb != 0 {
                return Some(w * 64 + 63 - limb.leading_zeros() as usize);
            }
        }
        None
    }

    /// Coefficient-wise XOR, the field addition.
    pub fn add(&self, other: &Self) -> Self {
        let mut limbs = self.limbs;
        for (l, r) in limbs.iter_mut().zip(other.limbs.iter()) {
            *l ^= r;
        }
        Self { limbs }
    }

    /// Number of differing coefficient bits.
    pub fn hamming_distance(&self, other: &Self) -> u32 {
        self.limbs
            .iter()
            .zip(other.limbs.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// XOR-fold of the limbs, used as a 64-bit bus-word compression.
    pub fn fold64(&self) -> u64 {
        self.limbs.iter().fold(0, |acc, &l| acc ^ l)
    }

    /// Extracts `width` bits starting at bit `lo` into a single word.
    pub fn extract_bits(&self, lo: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && lo + width <= FIELD_BITS);
        let mut out = 0u64;
        let word = lo / 64;
        let shift = lo % 64;
        out |= self.limbs[word] >> shift;
        if shift != 0 && word + 1 < LIMBS {
            out |= self.limbs[word + 1] << (64 - shift);
        }
        if width < 64 {
            out &= (1u64 << width) - 1;
        }
        out
    }

    /// Uniformly random fully reduced element.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut limbs = [0u64; LIMBS];
        for l in limbs.iter_mut() {
            *l = rng.gen();
        }
        limbs[3] &= (1u64 << (FIELD_BITS - 192)) - 1;
        Self { limbs }
    }

    /// Canonical text form: big-endian hex, exactly 59 digits.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(HEX_DIGITS);
        for d in (0..HEX_DIGITS).rev() {
            let nibble = self.extract_bits_wide(d * 4);
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }

    fn extract_bits_wide(&self, lo: usize) -> u64 {
        // 4-bit nibble read that tolerates the top nibble straddling bit 232
        let mut v = 0u64;
        for b in 0..4 {
            let i = lo + b;
            if i < FIELD_BITS && self.bit(i) {
                v |= 1 << b;
            }
        }
        v
    }

    /// Parses big-endian hex; accepts up to 60 digits as long as the value
    /// fits in 233 bits.
    pub fn from_hex(s: &str) -> Result<Self, FieldError> {
        let s = s.trim().trim_start_matches("0x");
        if s.is_empty() || s.len() > 60 {
            return Err(FieldError::BadHex(s.to_string()));
        }
        let mut limbs = [0u64; LIMBS];
        for (pos, c) in s.chars().rev().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| FieldError::BadHex(s.to_string()))? as u64;
            let bit = pos * 4;
            if bit >= 256 || (bit >= FIELD_BITS && nibble != 0) {
                if nibble != 0 {
                    return Err(FieldError::Overflow);
                }
                continue;
            }
            limbs[bit / 64] |= nibble << (bit % 64);
        }
        if limbs[3] >> (FIELD_BITS - 192) != 0 {
            return Err(FieldError::Overflow);
        }
        Ok(Self { limbs })
    }

    /// Embeds the element into an unreduced wide polynomial.
    pub fn widen(&self) -> WidePolynomial {
        let mut limbs = [0u64; WIDE_LIMBS];
        limbs[..LIMBS].copy_from_slice(&self.limbs);
        WidePolynomial { limbs }
    }
}

impl BitXor for FieldElement {
    type Output = FieldElement;
    fn bitxor(self, rhs: FieldElement) -> FieldElement {
        self.add(&rhs)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElement({})", self.to_hex())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl WidePolynomial {
    pub const ZERO: Self = Self {
        limbs: [0; WIDE_LIMBS],
    };

    pub fn limbs(&self) -> &[u64; WIDE_LIMBS] {
        &self.limbs
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < WIDE_LIMBS * 64);
        (self.limbs[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    fn flip_bit(&mut self, i: usize) {
        self.limbs[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn degree(&self) -> Option<usize> {
        for (w, &limb) in self.limbs.iter().enumerate().rev() {
            if limb != 0 {
                return Some(w * 64 + 63 - limb.leading_zeros() as usize);
            }
        }
        None
    }

    /// XORs a product value (up to 128 bits wide) at bit offset `shift`.
    pub fn xor_shifted(&mut self, value: u128, shift: usize) {
        debug_assert!(shift + 128 <= WIDE_LIMBS * 64 + 63);
        let word = shift / 64;
        let off = shift % 64;
        let lo = value as u64;
        let hi = (value >> 64) as u64;
        self.limbs[word] ^= lo << off;
        if off != 0 {
            self.limbs[word + 1] ^= lo >> (64 - off);
            self.limbs[word + 1] ^= hi << off;
            if word + 2 < WIDE_LIMBS {
                self.limbs[word + 2] ^= hi >> (64 - off);
            } else {
                debug_assert_eq!(hi >> (64 - off), 0);
            }
        } else {
            self.limbs[word + 1] ^= hi;
        }
    }

    fn shl1(&mut self) {
        let mut carry = 0u64;
        for l in self.limbs.iter_mut() {
            let next_carry = *l >> 63;
            *l = (*l << 1) | carry;
            carry = next_carry;
        }
    }
}

/// Reduces an unreduced polynomial modulo f(t) = t^233 + t^74 + 1.
pub fn reduce(p: &WidePolynomial) -> FieldElement {
    let mut w = *p;
    for i in (FIELD_BITS..WIDE_BITS).rev() {
        if w.bit(i) {
            w.flip_bit(i);
            w.flip_bit(i - 233);
            w.flip_bit(i - 159); // i - 233 + 74
        }
    }
    let mut limbs = [0u64; LIMBS];
    limbs.copy_from_slice(&w.limbs[..LIMBS]);
    debug_assert_eq!(limbs[3] >> (FIELD_BITS - 192), 0);
    FieldElement { limbs }
}

/// Full-width carryless product of two reduced elements, before reduction.
pub fn mul_wide(a: &FieldElement, b: &FieldElement) -> WidePolynomial {
    let mut acc = WidePolynomial::ZERO;
    let mut shifted = a.widen();
    for i in 0..FIELD_BITS {
        if b.bit(i) {
            for (l, r) in acc.limbs.iter_mut().zip(shifted.limbs.iter()) {
                *l ^= r;
            }
        }
        shifted.shl1();
    }
    acc
}

/// Reference multiplication: classical double-loop product, then reduce.
pub fn mul_schoolbook(a: &FieldElement, b: &FieldElement) -> FieldElement {
    reduce(&mul_wide(a, b))
}

/// Squaring by coefficient spreading (bit i -> bit 2i), then reduce.
/// Agrees with `mul_schoolbook(a, a)` by construction of the product formula.
pub fn square(a: &FieldElement) -> FieldElement {
    let mut w = WidePolynomial::ZERO;
    for i in 0..FIELD_BITS {
        if a.bit(i) {
            w.flip_bit(2 * i);
        }
    }
    reduce(&w)
}

fn exp_squarings(a: &FieldElement, k: usize) -> FieldElement {
    let mut r = *a;
    for _ in 0..k {
        r = square(&r);
    }
    r
}

/// Multiplicative inverse via Fermat (Itoh-Tsujii addition chain for 2^232-1).
pub fn invert(a: &FieldElement) -> Result<FieldElement, FieldError> {
    if a.is_zero() {
        return Err(FieldError::ZeroInverse);
    }
    // chain of exponents 2^e - 1: 1, 2, 3, 6, 7, 14, 28, 29, 58, 116, 232
    let t1 = *a;
    let t2 = mul_schoolbook(&square(&t1), &t1);
    let t3 = mul_schoolbook(&square(&t2), &t1);
    let t6 = mul_schoolbook(&exp_squarings(&t3, 3), &t3);
    let t7 = mul_schoolbook(&square(&t6), &t1);
    let t14 = mul_schoolbook(&exp_squarings(&t7, 7), &t7);
    let t28 = mul_schoolbook(&exp_squarings(&t14, 14), &t14);
    let t29 = mul_schoolbook(&square(&t28), &t1);
    let t58 = mul_schoolbook(&exp_squarings(&t29, 29), &t29);
    let t116 = mul_schoolbook(&exp_squarings(&t58, 58), &t58);
    let t232 = mul_schoolbook(&exp_squarings(&t116, 116), &t116);
    // a^(2^233 - 2) = (a^(2^232 - 1))^2
    Ok(square(&t232))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0x5eed)
    }

    #[test]
    fn add_self_inverse_and_identity() {
        let mut r = rng();
        for _ in 0..100 {
            let a = FieldElement::random(&mut r);
            assert_eq!(a.add(&a), FieldElement::ZERO);
            assert_eq!(a.add(&FieldElement::ZERO), a);
        }
    }

    #[test]
    fn add_small_example() {
        // (t^2 + 1) xor (t^2 + t) = t + 1
        let a = FieldElement::monomial(2).add(&FieldElement::ONE);
        let b = FieldElement::monomial(2).add(&FieldElement::monomial(1));
        assert_eq!(a.add(&b), FieldElement::monomial(1).add(&FieldElement::ONE));
    }

    #[test]
    fn reduce_t233() {
        // t^233 = t^74 + 1
        let mut w = WidePolynomial::ZERO;
        w.flip_bit(233);
        let expect = FieldElement::monomial(74).add(&FieldElement::ONE);
        assert_eq!(reduce(&w), expect);
    }

    #[test]
    fn reduce_already_reduced_is_identity() {
        let mut r = rng();
        for _ in 0..100 {
            let a = FieldElement::random(&mut r);
            assert_eq!(reduce(&a.widen()), a);
        }
    }

    // Independent long-division oracle over GF(2): repeatedly XORs f(t)
    // shifted under the leading term, working on a plain bool vector.
    fn long_division_oracle(p: &WidePolynomial) -> FieldElement {
        let mut bits = vec![false; WIDE_BITS];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = p.bit(i);
        }
        for i in (FIELD_BITS..WIDE_BITS).rev() {
            if bits[i] {
                let shift = i - 233;
                for &e in F_EXPONENTS.iter() {
                    bits[e + shift] ^= true;
                }
            }
        }
        let mut limbs = [0u64; 4];
        for (i, &b) in bits.iter().take(FIELD_BITS).enumerate() {
            if b {
                limbs[i / 64] |= 1 << (i % 64);
            }
        }
        FieldElement::from_limbs(limbs).unwrap()
    }

    #[test]
    fn reduce_t464_matches_long_division() {
        let mut w = WidePolynomial::ZERO;
        w.flip_bit(464);
        assert_eq!(reduce(&w), long_division_oracle(&w));
    }

    #[test]
    fn reduce_matches_long_division_on_random_products() {
        let mut r = rng();
        for _ in 0..10_000 {
            let a = FieldElement::random(&mut r);
            let b = FieldElement::random(&mut r);
            let w = mul_wide(&a, &b);
            assert_eq!(reduce(&w), long_division_oracle(&w));
        }
    }

    #[test]
    fn mul_identity_and_annihilator() {
        let mut r = rng();
        for _ in 0..100 {
            let a = FieldElement::random(&mut r);
            assert_eq!(mul_schoolbook(&a, &FieldElement::ONE), a);
            assert_eq!(mul_schoolbook(&a, &FieldElement::ZERO), FieldElement::ZERO);
        }
    }

    #[test]
    fn mul_char2_square_of_t_plus_1() {
        // (t+1)^2 = t^2 + 1
        let a = FieldElement::monomial(1).add(&FieldElement::ONE);
        let expect = FieldElement::monomial(2).add(&FieldElement::ONE);
        assert_eq!(mul_schoolbook(&a, &a), expect);
    }

    #[test]
    fn field_algebra_laws() {
        let mut r = rng();
        for _ in 0..10_000 {
            let a = FieldElement::random(&mut r);
            let b = FieldElement::random(&mut r);
            let c = FieldElement::random(&mut r);
            assert_eq!(a.add(&b), b.add(&a));
            assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            assert_eq!(mul_schoolbook(&a, &b), mul_schoolbook(&b, &a));
            assert_eq!(
                mul_schoolbook(&mul_schoolbook(&a, &b), &c),
                mul_schoolbook(&a, &mul_schoolbook(&b, &c))
            );
            assert_eq!(
                mul_schoolbook(&a, &b.add(&c)),
                mul_schoolbook(&a, &b).add(&mul_schoolbook(&a, &c))
            );
        }
    }

    #[test]
    fn square_matches_schoolbook() {
        let mut r = rng();
        assert_eq!(square(&FieldElement::ZERO), FieldElement::ZERO);
        assert_eq!(square(&FieldElement::ONE), FieldElement::ONE);
        for _ in 0..1000 {
            let a = FieldElement::random(&mut r);
            assert_eq!(square(&a), mul_schoolbook(&a, &a));
        }
    }

    #[test]
    fn invert_properties() {
        let mut r = rng();
        assert_eq!(invert(&FieldElement::ONE).unwrap(), FieldElement::ONE);
        assert_eq!(invert(&FieldElement::ZERO), Err(FieldError::ZeroInverse));
        for _ in 0..1000 {
            let a = FieldElement::random(&mut r);
            if a.is_zero() {
                continue;
            }
            let inv = invert(&a).unwrap();
            assert_eq!(mul_schoolbook(&a, &inv), FieldElement::ONE);
            assert_eq!(invert(&inv).unwrap(), a);
        }
    }

    #[test]
    fn hex_round_trip() {
        let mut r = rng();
        for _ in 0..200 {
            let a = FieldElement::random(&mut r);
            let s = a.to_hex();
            assert_eq!(s.len(), 59);
            assert_eq!(FieldElement::from_hex(&s).unwrap(), a);
        }
        assert!(FieldElement::from_hex("").is_err());
        assert!(FieldElement::from_hex("zz").is_err());
        // 234-bit value rejected
        let too_big = format!("2{}", "0".repeat(58));
        assert_eq!(FieldElement::from_hex(&too_big), Err(FieldError::Overflow));
    }
}
