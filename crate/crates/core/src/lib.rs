//! Cycle-accurate model of an ECC kP accelerator for NIST curve B-233 and a
//! single-trace horizontal DPA against it.
//!
//! The crate is organised along the hardware/attack pipeline:
//!
//! * [`field`] — GF(2^233) arithmetic on 64-bit limbs,
//! * [`curve`] — B-233 constants, affine group law and a scalar
//!   multiplication oracle,
//! * [`multiplier`] — the 4-segment iterative Karatsuba multiplier with
//!   per-cycle gate activity,
//! * [`accelerator`] — the Montgomery-ladder kP engine producing a
//!   per-cycle hardware event stream,
//! * [`power`] — leakage profiles and the power-trace simulator,
//! * [`trace`] — trace compression and the on-disk trace format,
//! * [`attack`] — the "comparison to the mean" horizontal attack.

pub mod accelerator;
pub mod attack;
pub mod curve;
pub mod field;
pub mod multiplier;
pub mod power;
pub mod trace;

pub use accelerator::{run_kp, KpExecution};
pub use attack::{run_attack, AttackReport};
pub use curve::CurveB233;
pub use field::FieldElement;
pub use power::{builtin_profile, simulate_power, LeakageProfile, PowerTrace};
pub use trace::{compress_mean, compress_msq, read_trace, write_trace, CompressedTrace};
