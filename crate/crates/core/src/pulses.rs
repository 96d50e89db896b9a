//! Control fields as constrained Gaussian pulse trains.
//!
//! A field is a train of Gaussian envelope pulses addressing either one
//! qubit or one qubit pair (through its symmetric or antisymmetric
//! double-excitation channel). The physically meaningful quantities are the
//! accumulated phase `φ(t) = ∫₀ᵗ Ω(t′)dt′` — evaluated in closed form
//! through error functions — the unit-modulus modulation `ε(t) = e^{iφ(t)}`,
//! and its finite-time Fourier transform. A designer builds trains that meet
//! a phase target under peak-amplitude and minimal-width constraints.

use crate::error::{Result, SimError};
use crate::linalg::C64;
use crate::quad::{hermite_panel_count, HermiteSamples};
use std::f64::consts::{PI, SQRT_2};

/// Acceptable deviation of the accumulated phase from its target, in rad.
pub const PHASE_TOLERANCE: f64 = 1e-6;

/// Pulses are evaluated on `[c − Wσ, c + Wσ]` and treated as zero outside;
/// with `W = 6` the discarded tail mass is below 1e-8 of the pulse area.
pub const TRUNCATION_SIGMAS: f64 = 6.0;

/// Fraction of a Gaussian's area lying within the truncation window.
fn window_fraction() -> f64 {
    libm::erf(TRUNCATION_SIGMAS / SQRT_2)
}

/// Which coupling a field drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    /// Resonant drive of one qubit's g↔e transition.
    Single(usize),
    /// Drive of a pair's antisymmetric (single-excitation-exchange) channel.
    TwoPsi(usize, usize),
    /// Drive of a pair's symmetric (double-excitation) channel.
    TwoPhi(usize, usize),
}

impl GateKind {
    /// Antisymmetric pair coupling; stores the pair with the smaller index
    /// first, rejecting `a == b`.
    pub fn two_psi(a: usize, b: usize) -> Result<Self> {
        let (a, b) = ordered_pair(a, b)?;
        Ok(GateKind::TwoPsi(a, b))
    }

    /// Symmetric pair coupling; same ordering rules as [`GateKind::two_psi`].
    pub fn two_phi(a: usize, b: usize) -> Result<Self> {
        let (a, b) = ordered_pair(a, b)?;
        Ok(GateKind::TwoPhi(a, b))
    }

    /// Qubits this field touches.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateKind::Single(j) => vec![j],
            GateKind::TwoPsi(a, b) | GateKind::TwoPhi(a, b) => vec![a, b],
        }
    }

    /// The addressed pair, if this is a two-qubit kind.
    pub fn pair(&self) -> Option<(usize, usize)> {
        match *self {
            GateKind::Single(_) => None,
            GateKind::TwoPsi(a, b) | GateKind::TwoPhi(a, b) => Some((a, b)),
        }
    }
}

fn ordered_pair(a: usize, b: usize) -> Result<(usize, usize)> {
    if a == b {
        return Err(SimError::invalid("field.qubits", format!("pair ({a}, {b}) repeats a qubit")));
    }
    Ok((a.min(b), a.max(b)))
}

/// Hardware limits a train must respect.
#[derive(Clone, Copy, Debug)]
pub struct PulseConstraints {
    /// Peak Rabi amplitude |Ω| may not exceed this.
    pub omega_max: f64,
    /// No pulse may be narrower than this width.
    pub sigma_min: f64,
}

/// One Gaussian pulse `amp·exp(−(t−c)²/(2σ²))`; the sign of `amplitude`
/// carries the pulse sign.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPulse {
    pub center: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

impl GaussianPulse {
    /// Signed area within the truncation window: `amp·σ·√(2π)·erf(W/√2)`.
    pub fn area(&self) -> f64 {
        self.amplitude * self.sigma * (2.0 * PI).sqrt() * window_fraction()
    }
}

/// A validated train of Gaussian pulses under shared constraints.
#[derive(Clone, Debug)]
pub struct GaussianPulseTrain {
    pulses: Vec<GaussianPulse>,
    constraints: PulseConstraints,
}

impl GaussianPulseTrain {
    pub fn new(pulses: Vec<GaussianPulse>, constraints: PulseConstraints) -> Result<Self> {
        if !(constraints.omega_max > 0.0) || !(constraints.sigma_min > 0.0) {
            return Err(SimError::invalid(
                "constraints",
                format!(
                    "omega_max and sigma_min must be positive, got {} and {}",
                    constraints.omega_max, constraints.sigma_min
                ),
            ));
        }
        for (i, p) in pulses.iter().enumerate() {
            if p.amplitude.abs() > constraints.omega_max * (1.0 + 1e-12) {
                return Err(SimError::invalid(
                    format!("pulses[{i}].amplitude"),
                    format!("|{}| exceeds omega_max = {}", p.amplitude, constraints.omega_max),
                ));
            }
            if p.sigma < constraints.sigma_min * (1.0 - 1e-12) {
                return Err(SimError::invalid(
                    format!("pulses[{i}].sigma"),
                    format!("{} is below sigma_min = {}", p.sigma, constraints.sigma_min),
                ));
            }
        }
        Ok(GaussianPulseTrain { pulses, constraints })
    }

    /// An empty train (zero envelope) under the given constraints.
    pub fn empty(constraints: PulseConstraints) -> Self {
        GaussianPulseTrain { pulses: Vec::new(), constraints }
    }

    pub fn pulses(&self) -> &[GaussianPulse] {
        &self.pulses
    }

    pub fn constraints(&self) -> PulseConstraints {
        self.constraints
    }

    /// Envelope `Ω(t)`, zero outside every pulse's truncation window.
    pub fn envelope(&self, t: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| {
                let u = (t - p.center) / p.sigma;
                if u.abs() > TRUNCATION_SIGMAS {
                    0.0
                } else {
                    p.amplitude * (-0.5 * u * u).exp()
                }
            })
            .sum()
    }

    /// `∫₀ᵗ Ω(t′) dt′` in closed form (error functions per pulse, windows
    /// clipped to `[0, t]`).
    pub fn phase(&self, t: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| {
                let w = TRUNCATION_SIGMAS * p.sigma;
                let lo = (p.center - w).max(0.0);
                let hi = (p.center + w).min(t);
                if hi <= lo {
                    0.0
                } else {
                    let s = p.sigma * SQRT_2;
                    p.amplitude
                        * p.sigma
                        * (PI / 2.0).sqrt()
                        * (libm::erf((hi - p.center) / s) - libm::erf((lo - p.center) / s))
                }
            })
            .sum()
    }

    /// Largest |amplitude| in the train (0 for an empty train).
    pub fn peak_amplitude(&self) -> f64 {
        self.pulses.iter().map(|p| p.amplitude.abs()).fold(0.0, f64::max)
    }

    /// Smallest pulse width, if any pulses exist.
    pub fn min_sigma(&self) -> Option<f64> {
        self.pulses.iter().map(|p| p.sigma).min_by(f64::total_cmp)
    }
}

/// A pulse train bound to a coupling, a phase target, and a duration.
#[derive(Clone, Debug)]
pub struct GateField {
    pub kind: GateKind,
    pub train: GaussianPulseTrain,
    /// Required accumulated phase at `t = duration`.
    pub phase_target: f64,
    pub duration: f64,
}

impl GateField {
    /// Binds a train to a coupling, checking that every truncation window
    /// fits inside `[0, duration]` and that the accumulated phase meets the
    /// target within [`PHASE_TOLERANCE`].
    pub fn new(
        kind: GateKind,
        train: GaussianPulseTrain,
        phase_target: f64,
        duration: f64,
    ) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(SimError::invalid("field.duration", format!("must be positive, got {duration}")));
        }
        let slack = 1e-9 * duration.max(1.0);
        for (i, p) in train.pulses.iter().enumerate() {
            let w = TRUNCATION_SIGMAS * p.sigma;
            if p.center - w < -slack || p.center + w > duration + slack {
                return Err(SimError::invalid(
                    format!("pulses[{i}]"),
                    format!(
                        "truncation window [{}, {}] does not fit inside [0, {duration}]",
                        p.center - w,
                        p.center + w
                    ),
                ));
            }
        }
        let achieved = train.phase(duration);
        if (achieved - phase_target).abs() > PHASE_TOLERANCE {
            return Err(SimError::invalid(
                "field.phase_target",
                format!("train accumulates {achieved} rad but the target is {phase_target} rad"),
            ));
        }
        Ok(GateField { kind, train, phase_target, duration })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-9 * self.duration.max(1.0);
        if t < -slack || t > self.duration + slack {
            return Err(SimError::invalid(
                "t",
                format!("{t} outside the field duration [0, {}]", self.duration),
            ));
        }
        Ok(())
    }

    /// Accumulated phase `φ(t)`.
    pub fn accumulated_phase(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.train.phase(t))
    }

    /// Modulation `ε(t) = e^{iφ(t)}`.
    pub fn modulation(&self, t: f64) -> Result<C64> {
        Ok(C64::from_polar(1.0, self.accumulated_phase(t)?))
    }

    /// Samples `e^{i·winding·φ}` (with its exact derivative) densely enough
    /// that cubic-Hermite reconstruction is accurate to ~1e-9 absolute over
    /// `[0, t_end]`. The samples support ω-independent Fourier evaluation.
    pub fn sampled_modulation(&self, t_end: f64, winding: f64) -> HermiteSamples {
        let k = winding.abs().max(1e-12);
        // Bound |ε⁗| via the chain rule from envelope-derivative bounds
        // |Ω^{(n)}| ≤ 2·A/σⁿ with A the summed pulse amplitude.
        let a: f64 = k * self.train.pulses.iter().map(|p| p.amplitude.abs()).sum::<f64>();
        let s = self.train.min_sigma().unwrap_or(1.0).max(1e-12);
        let max_f4 = 2.0 * a / (s * s * s)
            + 4.0 * (a / (s * s)) * a
            + 3.0 * (a / s) * (a / s)
            + 6.0 * (a / s) * a * a
            + a * a * a * a;
        let panels = hermite_panel_count(t_end, max_f4, 1e-10 * t_end.max(1.0));
        HermiteSamples::build(0.0, t_end, panels, |t| {
            let phi = winding * self.train.phase(t);
            let eps = C64::from_polar(1.0, phi);
            let d = C64::new(0.0, winding * self.train.envelope(t)) * eps;
            (eps, d)
        })
    }

    /// Finite-time Fourier transform of the modulation:
    /// `(2π)^{−1/2}·∫₀ᵗ ε(t′)·e^{iωt′} dt′`.
    pub fn finite_time_fourier(&self, t: f64, omega: f64) -> Result<C64> {
        self.check_time(t)?;
        if t <= 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(self.sampled_modulation(t, 1.0).fourier(omega) / (2.0 * PI).sqrt())
    }
}

/// Designs a train of `n_pulses` equal-width pulses meeting `target` phase.
///
/// All amplitudes sit at ±omega_max when the width constraint allows;
/// otherwise the width is pinned at `sigma_min` and the amplitude reduced.
/// Truncation windows are kept inside `[0, T]` with centers spread evenly,
/// so the minimal duration with `K` pulses of width σ is `6σ·(K+1)`.
/// A `duration_hint` longer than the minimum spreads the train out to fill
/// it; a shorter hint is infeasible and reports the phase that would still
/// be reachable within it.
pub fn design_pulse_train(
    kind: GateKind,
    target: f64,
    constraints: PulseConstraints,
    n_pulses: usize,
    duration_hint: Option<f64>,
) -> Result<GateField> {
    let coef = (2.0 * PI).sqrt() * window_fraction(); // area per unit amp·σ
    if target == 0.0 || n_pulses == 0 {
        if target.abs() > PHASE_TOLERANCE {
            return Err(SimError::InfeasibleTarget { target, max_reachable: 0.0 });
        }
        let duration = duration_hint.unwrap_or(1.0);
        return GateField::new(kind, GaussianPulseTrain::empty(constraints), 0.0, duration);
    }
    let k = n_pulses as f64;
    let sign = target.signum();
    let sigma_full_power = target.abs() / (k * constraints.omega_max * coef);
    let (sigma, amplitude) = if sigma_full_power >= constraints.sigma_min {
        (sigma_full_power, sign * constraints.omega_max)
    } else {
        (constraints.sigma_min, sign * target.abs() / (k * constraints.sigma_min * coef))
    };
    let t_min = TRUNCATION_SIGMAS * sigma * (k + 1.0);
    let duration = match duration_hint {
        None => t_min,
        Some(t) if t >= t_min * (1.0 - 1e-12) => t,
        Some(t) => {
            let sigma_fit = t / (TRUNCATION_SIGMAS * (k + 1.0));
            let max_reachable = if sigma_fit < constraints.sigma_min {
                0.0
            } else {
                sign * k * constraints.omega_max * sigma_fit * coef
            };
            return Err(SimError::InfeasibleTarget { target, max_reachable });
        }
    };
    let edge = TRUNCATION_SIGMAS * sigma;
    let centers: Vec<f64> = if n_pulses == 1 {
        vec![duration / 2.0]
    } else {
        (0..n_pulses)
            .map(|i| edge + i as f64 * (duration - 2.0 * edge) / (k - 1.0))
            .collect()
    };
    let pulses = centers
        .into_iter()
        .map(|center| GaussianPulse { center, sigma, amplitude })
        .collect();
    GateField::new(kind, GaussianPulseTrain::new(pulses, constraints)?, target, duration)
}

/// A set of concurrently applied fields sharing one duration.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub fields: Vec<GateField>,
    pub n_qubits: usize,
    pub duration: f64,
}

impl Schedule {
    /// Validates the address pattern: every field fits the register, all
    /// durations agree, no qubit is driven by both a single-qubit and a
    /// two-qubit field, and no qubit belongs to two different pairs. One
    /// pair may carry both of its two-qubit channels.
    pub fn new(fields: Vec<GateField>, n_qubits: usize, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(SimError::invalid("schedule.duration", format!("must be positive, got {duration}")));
        }
        let mut single_seen = vec![false; n_qubits];
        let mut pair_of: Vec<Option<(usize, usize)>> = vec![None; n_qubits];
        let mut channel_seen: std::collections::HashSet<(u8, usize, usize)> =
            std::collections::HashSet::new();
        for (i, f) in fields.iter().enumerate() {
            if (f.duration - duration).abs() > 1e-9 * duration.max(1.0) {
                return Err(SimError::invalid(
                    format!("schedule.fields[{i}].duration"),
                    format!("{} differs from the schedule duration {duration}", f.duration),
                ));
            }
            for q in f.kind.qubits() {
                if q >= n_qubits {
                    return Err(SimError::invalid(
                        format!("schedule.fields[{i}].qubits"),
                        format!("qubit {q} outside the {n_qubits}-qubit register"),
                    ));
                }
            }
            match f.kind {
                GateKind::Single(j) => {
                    if single_seen[j] {
                        return Err(SimError::invalid(
                            format!("schedule.fields[{i}]"),
                            format!("qubit {j} carries two single-qubit fields"),
                        ));
                    }
                    single_seen[j] = true;
                }
                GateKind::TwoPsi(a, b) | GateKind::TwoPhi(a, b) => {
                    let tag = if matches!(f.kind, GateKind::TwoPsi(..)) { 0u8 } else { 1u8 };
                    if !channel_seen.insert((tag, a, b)) {
                        return Err(SimError::invalid(
                            format!("schedule.fields[{i}]"),
                            format!("pair ({a}, {b}) carries the same channel twice"),
                        ));
                    }
                    for q in [a, b] {
                        match pair_of[q] {
                            Some(p) if p != (a, b) => {
                                return Err(SimError::invalid(
                                    format!("schedule.fields[{i}]"),
                                    format!("qubit {q} appears in two different pairs"),
                                ));
                            }
                            _ => pair_of[q] = Some((a, b)),
                        }
                    }
                }
            }
        }
        for q in 0..n_qubits {
            if single_seen[q] && pair_of[q].is_some() {
                return Err(SimError::invalid(
                    "schedule.fields",
                    format!(
                        "qubit {q} is addressed by both a single-qubit and a two-qubit field, \
                         never by both at once"
                    ),
                ));
            }
        }
        Ok(Schedule { fields, n_qubits, duration })
    }

    /// The single-qubit field on `j`, if present.
    pub fn single_field(&self, j: usize) -> Option<&GateField> {
        self.fields.iter().find(|f| matches!(f.kind, GateKind::Single(q) if q == j))
    }

    /// The antisymmetric-channel field on pair `(a, b)` (any order).
    pub fn psi_field(&self, a: usize, b: usize) -> Option<&GateField> {
        let (a, b) = (a.min(b), a.max(b));
        self.fields
            .iter()
            .find(|f| matches!(f.kind, GateKind::TwoPsi(x, y) if (x, y) == (a, b)))
    }

    /// The symmetric-channel field on pair `(a, b)` (any order).
    pub fn phi_field(&self, a: usize, b: usize) -> Option<&GateField> {
        let (a, b) = (a.min(b), a.max(b));
        self.fields
            .iter()
            .find(|f| matches!(f.kind, GateKind::TwoPhi(x, y) if (x, y) == (a, b)))
    }

    /// Qubit pairs addressed by two-qubit fields, deduplicated and sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> =
            self.fields.iter().filter_map(|f| f.kind.pair()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Smallest pulse width across all fields, if any pulses exist.
    pub fn min_sigma(&self) -> Option<f64> {
        self.fields
            .iter()
            .filter_map(|f| f.train.min_sigma())
            .min_by(f64::total_cmp)
    }

    /// Largest pulse amplitude across all fields.
    pub fn peak_amplitude(&self) -> f64 {
        self.fields.iter().map(|f| f.train.peak_amplitude()).fold(0.0, f64::max)
    }
}
