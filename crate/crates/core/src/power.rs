//! Power-leakage simulation: converts the accelerator's hardware events into
//! per-cycle power values under a configurable leakage profile, and expands
//! per-cycle values into oscilloscope-style raw sample traces.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::accelerator::{addr_signature_hash, KpExecution, SLOT_LEN};

/// Clock period of the modeled design in nanoseconds.
pub const CLOCK_PERIOD_NS: f64 = 50.0;
/// Default oscilloscope samples per clock cycle.
pub const DEFAULT_SAMPLES_PER_CYCLE: usize = 625;

const BUILTIN_PROFILES: &str = include_str!("../profiles.toml");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("profile config line {0}: expected `key = value` or `[section]`")]
    BadLine(usize),
    #[error("profile config line {0}: unknown key `{1}`")]
    UnknownKey(usize, String),
    #[error("profile config line {0}: bad numeric value")]
    BadValue(usize),
    #[error("profile config line {0}: key before any [section]")]
    KeyOutsideSection(usize),
    #[error("profile `{0}` not found")]
    NotFound(String),
    #[error("negative weight in profile `{0}`")]
    NegativeWeight(String),
}

/// Weights mapping hardware events to simulated power.
#[derive(Clone, PartialEq, Debug)]
pub struct LeakageProfile {
    pub name: String,
    /// Per-toggle weight on multiplier gate activity.
    pub w_mult: f64,
    /// Weight on the register-addressing leakage term.
    pub w_addr: f64,
    /// Weight on bus Hamming distance.
    pub w_bus: f64,
    /// Constant baseline per cycle.
    pub w_static: f64,
    /// Gaussian noise standard deviation (0 for simulated traces).
    pub noise_sigma: f64,
}

impl LeakageProfile {
    fn validate(self) -> Result<Self, ProfileError> {
        if self.w_mult < 0.0
            || self.w_addr < 0.0
            || self.w_bus < 0.0
            || self.w_static < 0.0
            || self.noise_sigma < 0.0
        {
            return Err(ProfileError::NegativeWeight(self.name));
        }
        Ok(self)
    }
}

/// Parses the `key = value` / `[section]` profile configuration format.
pub fn parse_profiles(text: &str) -> Result<Vec<LeakageProfile>, ProfileError> {
    let mut profiles: Vec<LeakageProfile> = Vec::new();
    let mut current: Option<LeakageProfile> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if let Some(done) = current.take() {
                profiles.push(done.validate()?);
            }
            current = Some(LeakageProfile {
                name: name.trim().to_string(),
                w_mult: 0.0,
                w_addr: 0.0,
                w_bus: 0.0,
                w_static: 0.0,
                noise_sigma: 0.0,
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ProfileError::BadLine(idx + 1))?;
        let profile = current
            .as_mut()
            .ok_or(ProfileError::KeyOutsideSection(idx + 1))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ProfileError::BadValue(idx + 1))?;
        match key.trim() {
            "w_mult" => profile.w_mult = value,
            "w_addr" => profile.w_addr = value,
            "w_bus" => profile.w_bus = value,
            "w_static" => profile.w_static = value,
            "noise_sigma" => profile.noise_sigma = value,
            other => return Err(ProfileError::UnknownKey(idx + 1, other.to_string())),
        }
    }
    if let Some(done) = current.take() {
        profiles.push(done.validate()?);
    }
    Ok(profiles)
}

/// The two bundled profiles modeling the compile / compile_ultra contrast.
pub fn builtin_profiles() -> Vec<LeakageProfile> {
    parse_profiles(BUILTIN_PROFILES).expect("embedded profile config parses")
}

/// Looks up a bundled profile by name.
pub fn builtin_profile(name: &str) -> Result<LeakageProfile, ProfileError> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ProfileError::NotFound(name.to_string()))
}

/// One simulated power value per clock cycle.
#[derive(Clone, PartialEq, Debug)]
pub struct PowerTrace {
    pub values: Vec<f64>,
    pub clock_period_ns: f64,
    pub slot_offset: usize,
    pub num_slots: usize,
    pub slot_len: usize,
}

/// Oscilloscope-style sample trace: `samples_per_cycle` samples per cycle.
#[derive(Clone, PartialEq, Debug)]
pub struct RawTrace {
    pub samples: Vec<f64>,
    pub samples_per_cycle: usize,
    pub slot_offset: usize,
    pub num_slots: usize,
    pub slot_len: usize,
}

/// Maps an address signature deterministically into [0, 1). The leakage of
/// register addressing is structural - it depends on which registers are
/// addressed, never on randomness.
pub fn addr_term(signature: &[u8]) -> f64 {
    if signature.is_empty() {
        return 0.0;
    }
    (addr_signature_hash(signature) >> 11) as f64 / (1u64 << 53) as f64
}

/// Simulates the per-cycle power of a kP execution under a leakage profile.
/// The pseudo-random noise stream is fully determined by `seed`.
pub fn simulate_power(exec: &KpExecution, profile: &LeakageProfile, seed: u64) -> PowerTrace {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = if profile.noise_sigma > 0.0 {
        Some(Normal::new(0.0, profile.noise_sigma).expect("sigma >= 0"))
    } else {
        None
    };
    let values = exec
        .events
        .iter()
        .map(|e| {
            let mut v = profile.w_static
                + profile.w_mult * e.mult_activity.total_toggles() as f64
                + profile.w_bus * e.bus_hd as f64
                + profile.w_addr * addr_term(&e.addr_signature);
            if let Some(n) = &noise {
                v += n.sample(&mut rng);
            }
            v
        })
        .collect();
    PowerTrace {
        values,
        clock_period_ns: CLOCK_PERIOD_NS,
        slot_offset: exec.slot_offset,
        num_slots: exec.num_slots,
        slot_len: SLOT_LEN,
    }
}

/// The fixed within-cycle pulse shape, normalized to unit mean square so
/// that mean-of-squares compression of a noise-free raw trace returns the
/// squared per-cycle value exactly. The shape is an AC-coupled raised
/// cosine: zero mean, like an oscilloscope capture of a current pulse.
pub fn pulse_shape(samples_per_cycle: usize) -> Vec<f64> {
    assert!(samples_per_cycle >= 1);
    if samples_per_cycle == 1 {
        return vec![1.0];
    }
    let s = samples_per_cycle as f64;
    let mut pulse: Vec<f64> = (0..samples_per_cycle)
        .map(|i| (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / s).sin())
        .collect();
    let msq = pulse.iter().map(|p| p * p).sum::<f64>() / s;
    let scale = 1.0 / msq.sqrt();
    for p in pulse.iter_mut() {
        *p *= scale;
    }
    pulse
}

/// Expands a per-cycle power trace into raw samples: each cycle value v
/// becomes `v * pulse(s) + N(0, sigma^2)` for every sample s of the cycle.
pub fn synthesize_raw(
    trace: &PowerTrace,
    samples_per_cycle: usize,
    sample_noise_sigma: f64,
    seed: u64,
) -> RawTrace {
    assert!(samples_per_cycle >= 1, "samples_per_cycle must be >= 1");
    let pulse = pulse_shape(samples_per_cycle);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = if sample_noise_sigma > 0.0 {
        Some(Normal::new(0.0, sample_noise_sigma).expect("sigma >= 0"))
    } else {
        None
    };
    let mut samples = Vec::with_capacity(trace.values.len() * samples_per_cycle);
    for &v in &trace.values {
        for p in &pulse {
            let mut s = v * p;
            if let Some(n) = &noise {
                s += n.sample(&mut rng);
            }
            samples.push(s);
        }
    }
    RawTrace {
        samples,
        samples_per_cycle,
        slot_offset: trace.slot_offset,
        num_slots: trace.num_slots,
        slot_len: trace.slot_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accelerator::run_kp;
    use crate::curve::CurveB233;
    use num_bigint::BigUint;

    fn zero_profile() -> LeakageProfile {
        LeakageProfile {
            name: "zero".into(),
            w_mult: 0.0,
            w_addr: 0.0,
            w_bus: 0.0,
            w_static: 0.0,
            noise_sigma: 0.0,
        }
    }

    fn small_exec() -> KpExecution {
        let curve = CurveB233::standard();
        run_kp(&BigUint::from(0b101101u32), &curve.generator(), &curve).unwrap()
    }

    #[test]
    fn builtin_profiles_contrast() {
        let no_ultra = builtin_profile("noUltra").unwrap();
        let ultra = builtin_profile("ultra").unwrap();
        assert!(ultra.w_addr < no_ultra.w_addr);
        assert_eq!(ultra.w_static, no_ultra.w_static);
        assert!(builtin_profile("missing").is_err());
    }

    #[test]
    fn parse_rejects_malformed_config() {
        assert_eq!(parse_profiles("w_mult = 1"), Err(ProfileError::KeyOutsideSection(1)));
        assert_eq!(parse_profiles("[p]\nnonsense"), Err(ProfileError::BadLine(2)));
        assert_eq!(
            parse_profiles("[p]\nw_mult = x"),
            Err(ProfileError::BadValue(2))
        );
        assert_eq!(
            parse_profiles("[p]\nw_zap = 1"),
            Err(ProfileError::UnknownKey(2, "w_zap".into()))
        );
        assert!(matches!(
            parse_profiles("[p]\nw_mult = -1"),
            Err(ProfileError::NegativeWeight(_))
        ));
    }

    #[test]
    fn zero_weights_give_zero_trace() {
        let exec = small_exec();
        let trace = simulate_power(&exec, &zero_profile(), 0);
        assert_eq!(trace.values.len(), exec.events.len());
        assert!(trace.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noiseless_simulation_is_deterministic() {
        let exec = small_exec();
        let profile = builtin_profile("noUltra").unwrap();
        let t1 = simulate_power(&exec, &profile, 0);
        let t2 = simulate_power(&exec, &profile, 99);
        assert_eq!(t1, t2); // sigma = 0: seed must not matter
    }

    #[test]
    fn noisy_simulation_depends_only_on_seed() {
        let exec = small_exec();
        let mut profile = builtin_profile("noUltra").unwrap();
        profile.noise_sigma = 1.0;
        let t1 = simulate_power(&exec, &profile, 7);
        let t2 = simulate_power(&exec, &profile, 7);
        let t3 = simulate_power(&exec, &profile, 8);
        assert_eq!(t1, t2);
        assert_ne!(t1, t3);
    }

    #[test]
    fn linearity_in_weights() {
        let exec = small_exec();
        let profile = builtin_profile("noUltra").unwrap();
        let scaled = LeakageProfile {
            name: profile.name.clone(),
            w_mult: profile.w_mult * 3.0,
            w_addr: profile.w_addr * 3.0,
            w_bus: profile.w_bus * 3.0,
            w_static: profile.w_static * 3.0,
            noise_sigma: 0.0,
        };
        let t = simulate_power(&exec, &profile, 0);
        let ts = simulate_power(&exec, &scaled, 0);
        for (a, b) in t.values.iter().zip(ts.values.iter()) {
            assert!((b - 3.0 * a).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn pulse_has_unit_mean_square() {
        for s in [1usize, 2, 5, 125, 625] {
            let p = pulse_shape(s);
            assert_eq!(p.len(), s);
            let msq = p.iter().map(|x| x * x).sum::<f64>() / s as f64;
            assert!((msq - 1.0).abs() < 1e-12, "S = {}: msq = {}", s, msq);
        }
    }

    #[test]
    fn raw_trace_sample_count() {
        let exec = small_exec();
        let profile = builtin_profile("noUltra").unwrap();
        let trace = simulate_power(&exec, &profile, 0);
        let raw = synthesize_raw(&trace, DEFAULT_SAMPLES_PER_CYCLE, 0.0, 0);
        assert_eq!(raw.samples.len(), trace.values.len() * 625);
    }

    #[test]
    fn addr_term_in_unit_interval_and_deterministic() {
        for sig in [vec![], vec![0u8], vec![1, 2, 3], vec![3, 2, 1]] {
            let t = addr_term(&sig);
            assert!((0.0..1.0).contains(&t));
            assert_eq!(t, addr_term(&sig));
        }
        assert_ne!(addr_term(&[0, 1]), addr_term(&[0, 2]));
    }
}
