//! The horizontal DPA "comparison to the mean".
//!
//! The compressed trace is fragmented into slots of 54 values (one per clock
//! cycle of one key-bit iteration). For every clock-cycle position j the mean
//! over all slots is computed; comparing each slot's value at position j
//! against that mean yields one guessed bit per slot, i.e. one full key
//! candidate per clock cycle. Candidates are scored against the truly
//! processed scalar as a percentage, folded into [50, 100] because a fully
//! wrong candidate is a fully right one under the opposite assumption.

use std::io::{self, Write};

use num_bigint::BigUint;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::trace::CompressedTrace;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("trace too short: need slot_offset {slot_offset} + {num_slots} x {slot_len} = {needed} values, have {have}")]
    Geometry {
        slot_offset: usize,
        num_slots: usize,
        slot_len: usize,
        needed: usize,
        have: usize,
    },
    #[error("slot matrix is empty")]
    Empty,
    #[error("candidate has {candidate} bits but scalar bit length implies {expected}")]
    LengthMismatch { candidate: usize, expected: usize },
    #[error("malformed report CSV: {0}")]
    BadReport(String),
}

/// The fragmented trace: value at (slot i, clock j) with 1-based j.
#[derive(Clone, PartialEq, Debug)]
pub struct SlotMatrix {
    values: Vec<f64>, // row-major, num_slots rows of slot_len
    pub num_slots: usize,
    pub slot_len: usize,
}

impl SlotMatrix {
    /// v_i^j with slot index i in [0, num_slots) and clock j in [1, slot_len].
    pub fn value(&self, slot: usize, clock: usize) -> f64 {
        debug_assert!((1..=self.slot_len).contains(&clock));
        self.values[slot * self.slot_len + (clock - 1)]
    }

    pub fn slot(&self, slot: usize) -> &[f64] {
        &self.values[slot * self.slot_len..(slot + 1) * self.slot_len]
    }
}

/// The 54 per-clock means over all slots.
#[derive(Clone, PartialEq, Debug)]
pub struct MeanSlot {
    pub values: Vec<f64>,
}

/// One guessed scalar: the bit for slot i, for every slot, extracted at one
/// clock-cycle position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KeyCandidate {
    /// 1-based clock cycle within the slot.
    pub clock_index: usize,
    pub bits: Vec<bool>,
}

/// Whether the raw or the inverted assumption matched better.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Polarity {
    Straight,
    Inverted,
}

/// Correctness of one candidate: raw percentage and folded into [50, 100].
#[derive(Clone, PartialEq, Debug)]
pub struct CandidateScore {
    pub clock_index: usize,
    pub delta_raw: f64,
    pub delta: f64,
    pub polarity: Polarity,
}

/// Run provenance carried into reports.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Provenance {
    pub trace_path: Option<String>,
    pub profile: Option<String>,
    pub seed: Option<u64>,
}

/// Scores for all 54 candidates plus summary data.
#[derive(Clone, PartialEq, Debug)]
pub struct AttackReport {
    pub scores: Vec<CandidateScore>,
    /// (clock_index, delta) of the best candidate.
    pub best: (usize, f64),
    /// Histogram of folded delta over [50, 100] in ten 5-point bins.
    pub histogram: [usize; 10],
    pub provenance: Provenance,
}

/// Fragments a compressed trace into its slot matrix.
pub fn fragment(trace: &CompressedTrace) -> Result<SlotMatrix, AttackError> {
    let needed = trace.slot_offset + trace.num_slots * trace.slot_len;
    if trace.values.len() < needed {
        return Err(AttackError::Geometry {
            slot_offset: trace.slot_offset,
            num_slots: trace.num_slots,
            slot_len: trace.slot_len,
            needed,
            have: trace.values.len(),
        });
    }
    Ok(SlotMatrix {
        values: trace.values[trace.slot_offset..needed].to_vec(),
        num_slots: trace.num_slots,
        slot_len: trace.slot_len,
    })
}

/// Mean slot: arithmetic mean over slots for every clock position, summed
/// left to right so results are reproducible bit for bit.
pub fn mean_slot(m: &SlotMatrix) -> Result<MeanSlot, AttackError> {
    if m.num_slots == 0 || m.slot_len == 0 {
        return Err(AttackError::Empty);
    }
    let mut values = vec![0.0; m.slot_len];
    for slot in 0..m.num_slots {
        for (acc, v) in values.iter_mut().zip(m.slot(slot)) {
            *acc += v;
        }
    }
    for v in values.iter_mut() {
        *v /= m.num_slots as f64;
    }
    Ok(MeanSlot { values })
}

fn extract_one(m: &SlotMatrix, mean: &MeanSlot, clock: usize) -> KeyCandidate {
    let mean_v = mean.values[clock - 1];
    // tie rule: mean >= value guesses 1
    let bits = (0..m.num_slots)
        .map(|slot| mean_v >= m.value(slot, clock))
        .collect();
    KeyCandidate {
        clock_index: clock,
        bits,
    }
}

/// One key candidate per clock-cycle position.
pub fn extract_candidates(m: &SlotMatrix, mean: &MeanSlot) -> Vec<KeyCandidate> {
    assert_eq!(mean.values.len(), m.slot_len, "mean/matrix shape mismatch");
    #[cfg(feature = "parallel")]
    {
        (1..=m.slot_len)
            .into_par_iter()
            .map(|clock| extract_one(m, mean, clock))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        extract_candidates_sequential(m, mean)
    }
}

/// Sequential extraction; result is identical to `extract_candidates`.
pub fn extract_candidates_sequential(m: &SlotMatrix, mean: &MeanSlot) -> Vec<KeyCandidate> {
    assert_eq!(mean.values.len(), m.slot_len, "mean/matrix shape mismatch");
    (1..=m.slot_len)
        .map(|clock| extract_one(m, mean, clock))
        .collect()
}

/// Scores one candidate against the truly processed scalar. Slot 0 maps to
/// bit l-3 of the scalar (the most significant main-loop bit), descending.
pub fn score(
    candidate: &KeyCandidate,
    true_k: &BigUint,
    bit_length: usize,
) -> Result<CandidateScore, AttackError> {
    let expected = bit_length.saturating_sub(2);
    if candidate.bits.len() != expected {
        return Err(AttackError::LengthMismatch {
            candidate: candidate.bits.len(),
            expected,
        });
    }
    let mut correct = 0usize;
    for (slot, &guess) in candidate.bits.iter().enumerate() {
        let bit_index = (bit_length - 3 - slot) as u64;
        if true_k.bit(bit_index) == guess {
            correct += 1;
        }
    }
    let delta_raw = 100.0 * correct as f64 / expected as f64;
    // folded form, computed on integers so a candidate and its complement
    // get bit-identical deltas
    let delta = 100.0 * correct.max(expected - correct) as f64 / expected as f64;
    Ok(CandidateScore {
        clock_index: candidate.clock_index,
        delta_raw,
        delta,
        polarity: if delta_raw >= 50.0 {
            Polarity::Straight
        } else {
            Polarity::Inverted
        },
    })
}

/// End-to-end attack: fragment, mean slot, candidate extraction and scoring.
pub fn run_attack(
    trace: &CompressedTrace,
    true_k: &BigUint,
    provenance: Provenance,
) -> Result<AttackReport, AttackError> {
    let bit_length = true_k.bits() as usize;
    let matrix = fragment(trace)?;
    let mean = mean_slot(&matrix)?;
    let candidates = extract_candidates(&matrix, &mean);
    let scores = score_all(&candidates, true_k, bit_length)?;
    Ok(build_report(scores, provenance))
}

fn score_all(
    candidates: &[KeyCandidate],
    true_k: &BigUint,
    bit_length: usize,
) -> Result<Vec<CandidateScore>, AttackError> {
    #[cfg(feature = "parallel")]
    {
        candidates
            .par_iter()
            .map(|c| score(c, true_k, bit_length))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        candidates
            .iter()
            .map(|c| score(c, true_k, bit_length))
            .collect()
    }
}

/// Fully sequential attack path kept for benchmarking against the parallel
/// default; results are identical.
pub fn run_attack_sequential(
    trace: &CompressedTrace,
    true_k: &BigUint,
    provenance: Provenance,
) -> Result<AttackReport, AttackError> {
    let bit_length = true_k.bits() as usize;
    let matrix = fragment(trace)?;
    let mean = mean_slot(&matrix)?;
    let candidates = extract_candidates_sequential(&matrix, &mean);
    let scores: Vec<CandidateScore> = candidates
        .iter()
        .map(|c| score(c, true_k, bit_length))
        .collect::<Result<_, _>>()?;
    Ok(build_report(scores, provenance))
}

fn build_report(scores: Vec<CandidateScore>, provenance: Provenance) -> AttackReport {
    let best = scores
        .iter()
        .map(|s| (s.clock_index, s.delta))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        .unwrap_or((0, 0.0));
    let mut histogram = [0usize; 10];
    for s in &scores {
        let bin = (((s.delta - 50.0) / 5.0) as usize).min(9);
        histogram[bin] += 1;
    }
    AttackReport {
        scores,
        best,
        histogram,
        provenance,
    }
}

impl AttackReport {
    pub fn max_delta(&self) -> f64 {
        self.best.1
    }

    pub fn candidates_with_delta_at_least(&self, threshold: f64) -> usize {
        self.scores.iter().filter(|s| s.delta >= threshold).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "j,delta_raw,delta,polarity")?;
        for s in &self.scores {
            writeln!(
                w,
                "{},{:.6},{:.6},{}",
                s.clock_index,
                s.delta_raw,
                s.delta,
                match s.polarity {
                    Polarity::Straight => "straight",
                    Polarity::Inverted => "inverted",
                }
            )?;
        }
        Ok(())
    }

    /// Parses a report CSV produced by `write_csv` (used by comparisons).
    pub fn parse_csv(text: &str) -> Result<Vec<CandidateScore>, AttackError> {
        let mut scores = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != "j,delta_raw,delta,polarity" {
                    return Err(AttackError::BadReport("missing header".into()));
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(AttackError::BadReport(format!("line {}", i + 1)));
            }
            let parse_f =
                |s: &str| -> Result<f64, AttackError> {
                    s.parse()
                        .map_err(|_| AttackError::BadReport(format!("line {}", i + 1)))
                };
            scores.push(CandidateScore {
                clock_index: fields[0]
                    .parse()
                    .map_err(|_| AttackError::BadReport(format!("line {}", i + 1)))?,
                delta_raw: parse_f(fields[1])?,
                delta: parse_f(fields[2])?,
                polarity: match fields[3] {
                    "straight" => Polarity::Straight,
                    "inverted" => Polarity::Inverted,
                    _ => return Err(AttackError::BadReport(format!("line {}", i + 1))),
                },
            });
        }
        Ok(scores)
    }

    /// Human-readable summary: correctness per clock cycle.
    pub fn write_summary<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "key candidates: {}", self.scores.len())?;
        writeln!(
            w,
            "best candidate: clock cycle j = {} with delta = {:.2}%",
            self.best.0, self.best.1
        )?;
        for s in &self.scores {
            let bar_len = ((s.delta - 50.0) / 50.0 * 40.0).round() as usize;
            writeln!(
                w,
                "j = {:2}  delta = {:6.2}%  |{}",
                s.clock_index,
                s.delta,
                "#".repeat(bar_len)
            )?;
        }
        Ok(())
    }
}
