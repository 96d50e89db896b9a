//! Shared fixtures for the benchmark targets: a small correlated register,
//! and a designed control schedule sized so each measured operation runs in
//! milliseconds rather than minutes.

use dephasim_core::noise::NoiseModel;
use dephasim_core::pulses::{design_pulse_train, GateField, GateKind, PulseConstraints, Schedule};
use std::f64::consts::{FRAC_PI_2, TAU};

pub const CONSTRAINTS: PulseConstraints = PulseConstraints { omega_max: 1.0, sigma_min: 0.5 };

/// Three-qubit register under moderately correlated slow noise.
pub fn bench_model() -> NoiseModel {
    NoiseModel::uniform(0.05, 5.0, 3, 0.5).expect("uniform overlap model is valid")
}

/// Quarter-turn pulse at its minimal feasible window, the cheapest designed
/// field; used where a single modulation profile is enough.
pub fn quarter_turn_field() -> GateField {
    design_pulse_train(GateKind::Single(0), FRAC_PI_2, CONSTRAINTS, 1, None)
        .expect("quarter turn is feasible")
}

/// Storage-style schedule: one quarter-turn and one full-turn train sharing
/// a common window, idle spectator on the third register.
pub fn bench_schedule() -> Schedule {
    let first = quarter_turn_field();
    let second = design_pulse_train(GateKind::Single(1), TAU, CONSTRAINTS, 2, None)
        .expect("full turn over two pulses is feasible");
    let duration = first.duration.max(second.duration);
    let fields = vec![
        design_pulse_train(GateKind::Single(0), FRAC_PI_2, CONSTRAINTS, 1, Some(duration))
            .expect("refit at the shared window"),
        design_pulse_train(GateKind::Single(1), TAU, CONSTRAINTS, 2, Some(duration))
            .expect("refit at the shared window"),
    ];
    Schedule::new(fields, 3, duration).expect("schedule addresses are valid")
}
