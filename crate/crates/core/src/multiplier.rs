//! Cycle-accurate model of the 4-segment iterative Karatsuba field multiplier.
//!
//! The 233-bit operands are split into four segments (59/59/59/56 bits). One
//! 59x59-bit partial product is computed per clock cycle, nine cycles per
//! field multiplication, with the accumulator reduced in every cycle. Gate
//! activity per cycle is accounted for as Hamming distances on the AND plane,
//! the partial-product output and the accumulator register; this is what the
//! power model consumes.

use thiserror::Error;

use crate::field::{reduce, FieldElement, WidePolynomial};

/// Width of the three low segments.
pub const SEGMENT_BITS: usize = 59;
/// Width of the top segment (233 - 3 * 59).
pub const TOP_SEGMENT_BITS: usize = 56;
/// Clock cycles per field multiplication.
pub const CYCLES_PER_MULT: usize = 9;
/// AND gates of the 59x59 partial multiplier (n^2 for n = 59).
pub const AND_GATE_COUNT: u32 = 3481;
/// XOR gates of the partial multiplier ((n-1)^2 for n = 59).
pub const XOR_GATE_COUNT: u32 = 3364;

// Depth of the XOR reduction tree used to scale output toggles, ceil(log2(59)).
const XOR_TREE_DEPTH: u32 = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MultiplierError {
    #[error("partial multiplier operand exceeds {SEGMENT_BITS} bits")]
    OperandTooWide,
}

/// The four segments of one operand, low-to-high: parts[0] covers bits 0..59,
/// parts[3] the top 56 bits.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct OperandSegments {
    pub parts: [u64; 4],
}

/// Splits a field element into the fixed 59/59/59/56-bit segments.
pub fn segment(a: &FieldElement) -> OperandSegments {
    OperandSegments {
        parts: [
            a.extract_bits(0, SEGMENT_BITS),
            a.extract_bits(SEGMENT_BITS, SEGMENT_BITS),
            a.extract_bits(2 * SEGMENT_BITS, SEGMENT_BITS),
            a.extract_bits(3 * SEGMENT_BITS, TOP_SEGMENT_BITS),
        ],
    }
}

impl OperandSegments {
    /// Reassembles the original element; inverse of `segment`.
    pub fn concat(&self) -> FieldElement {
        let mut w = WidePolynomial::ZERO;
        for (i, &p) in self.parts.iter().enumerate() {
            w.xor_shifted(p as u128, i * SEGMENT_BITS);
        }
        reduce(&w)
    }

    fn combine(&self, subset: &[usize]) -> u64 {
        subset.iter().fold(0, |acc, &i| acc ^ self.parts[i])
    }
}

/// One step of the fixed calculation plan: which segments are XOR-combined on
/// each operand input, and at which 59-bit-aligned positions the 117-bit
/// partial product is folded into the accumulator.
#[derive(Clone, Copy, Debug)]
pub struct PlanStep {
    pub left: &'static [usize],
    pub right: &'static [usize],
    pub shifts: &'static [usize],
}

/// The fixed 9-step plan of the two-level Karatsuba decomposition.
#[derive(Clone, Copy, Debug)]
pub struct PartialProductPlan {
    pub steps: [PlanStep; CYCLES_PER_MULT],
}

// Two-level Karatsuba over segments x = t^59:
//   A = L + H*x^2 with L = A0 + A1*x, H = A2 + A3*x
//   A*B = LL + (LL + HH + MM)*x^2 + HH*x^4
// where each two-segment product is itself Karatsuba. Expanding gives the
// shift sets below; diagonal products first, then pairwise combinations,
// then the all-segment combination.
const PLAN: PartialProductPlan = PartialProductPlan {
    steps: [
        PlanStep { left: &[0], right: &[0], shifts: &[0, 1, 2, 3] },
        PlanStep { left: &[1], right: &[1], shifts: &[1, 2, 3, 4] },
        PlanStep { left: &[2], right: &[2], shifts: &[2, 3, 4, 5] },
        PlanStep { left: &[3], right: &[3], shifts: &[3, 4, 5, 6] },
        PlanStep { left: &[0, 1], right: &[0, 1], shifts: &[1, 3] },
        PlanStep { left: &[2, 3], right: &[2, 3], shifts: &[3, 5] },
        PlanStep { left: &[0, 2], right: &[0, 2], shifts: &[2, 3] },
        PlanStep { left: &[1, 3], right: &[1, 3], shifts: &[3, 4] },
        PlanStep { left: &[0, 1, 2, 3], right: &[0, 1, 2, 3], shifts: &[3] },
    ],
};

pub fn plan_partials() -> &'static PartialProductPlan {
    &PLAN
}

/// Per-cycle gate activity of the multiplier datapath.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct GateActivity {
    /// AND-plane outputs that changed versus the previous cycle (<= n^2).
    pub and_toggles: u32,
    /// XOR-tree toggles: output Hamming distance scaled by the tree depth.
    pub xor_toggles: u32,
    /// Hamming distance between successive accumulator register values.
    pub accumulator_hd: u32,
    /// Hamming distance between successive partial-multiplier inputs.
    pub operand_hd: u32,
}

impl GateActivity {
    pub fn total_toggles(&self) -> u32 {
        self.and_toggles + self.xor_toggles
    }
}

/// The 59x59 partial multiplier with the register state needed for
/// Hamming-distance toggle accounting across invocations.
#[derive(Clone)]
pub struct PartialMultiplier {
    plane: [u64; SEGMENT_BITS],
    product: u128,
    left: u64,
    right: u64,
}

impl Default for PartialMultiplier {
    fn default() -> Self {
        Self {
            plane: [0; SEGMENT_BITS],
            product: 0,
            left: 0,
            right: 0,
        }
    }
}

impl PartialMultiplier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Carryless 59x59-bit product with toggle accounting. `accumulator_hd`
    /// is left at zero; the enclosing multiplier fills it in.
    pub fn multiply(&mut self, x: u64, y: u64) -> Result<(u128, GateActivity), MultiplierError> {
        if x >> SEGMENT_BITS != 0 || y >> SEGMENT_BITS != 0 {
            return Err(MultiplierError::OperandTooWide);
        }
        let mut product = 0u128;
        let mut and_toggles = 0u32;
        for k in 0..SEGMENT_BITS {
            let row = if (x >> k) & 1 == 1 { y } else { 0 };
            and_toggles += (row ^ self.plane[k]).count_ones();
            self.plane[k] = row;
            if row != 0 {
                product ^= (row as u128) << k;
            }
        }
        let xor_toggles = (product ^ self.product).count_ones() * XOR_TREE_DEPTH;
        let activity = GateActivity {
            and_toggles,
            xor_toggles,
            accumulator_hd: 0,
            operand_hd: (x ^ self.left).count_ones() + (y ^ self.right).count_ones(),
        };
        self.product = product;
        self.left = x;
        self.right = y;
        Ok((product, activity))
    }
}

/// Stateless single partial product from a cleared multiplier.
pub fn partial_multiply(x: u64, y: u64) -> Result<(u128, GateActivity), MultiplierError> {
    PartialMultiplier::new().multiply(x, y)
}

/// The full multiplier: partial multiplier, controller plan and accumulator
/// register. State persists across multiplications so that back-to-back
/// activity is accounted the way the hardware would see it.
#[derive(Clone, Default)]
pub struct KaratsubaMultiplier {
    pm: PartialMultiplier,
    accumulator: FieldElement,
}

impl KaratsubaMultiplier {
    pub fn new() -> Self {
        Self::default()
    }

    /// One field multiplication: 9 clock cycles, one partial product each,
    /// accumulator reduced every cycle. Returns the reduced product and the
    /// per-cycle activity.
    pub fn multiply(
        &mut self,
        a: &FieldElement,
        b: &FieldElement,
    ) -> (FieldElement, [GateActivity; CYCLES_PER_MULT]) {
        let sa = segment(a);
        let sb = segment(b);
        let mut acc = FieldElement::ZERO; // cleared at the start of a multiplication
        let mut activities = [GateActivity::default(); CYCLES_PER_MULT];
        for (step, slot) in PLAN.steps.iter().zip(activities.iter_mut()) {
            let x = sa.combine(step.left);
            let y = sb.combine(step.right);
            let (pp, mut act) = self.pm.multiply(x, y).expect("combined segments fit 59 bits");
            let mut wide = acc.widen();
            for &s in step.shifts {
                wide.xor_shifted(pp, s * SEGMENT_BITS);
            }
            acc = reduce(&wide);
            act.accumulator_hd = acc.hamming_distance(&self.accumulator);
            self.accumulator = acc;
            *slot = act;
        }
        (acc, activities)
    }
}

/// Pure multiplication from a cleared datapath; identical operands always
/// yield identical activity sequences.
pub fn multiply(
    a: &FieldElement,
    b: &FieldElement,
) -> (FieldElement, [GateActivity; CYCLES_PER_MULT]) {
    KaratsubaMultiplier::new().multiply(a, b)
}
