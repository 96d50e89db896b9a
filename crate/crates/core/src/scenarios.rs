//! Study drivers: the storage-sequence comparison, the protected two-qubit
//! gate, and the trapped-ion register, all reporting rows of one shared
//! sweep-table schema suitable for direct plotting.

use crate::config::{parse_angle, Method, RunConfig, SweepParameter};
use crate::error::{Result, SimError};
use crate::evolution::{
    default_step, noiseless_unitary, pure_density, realization_unitary, second_order_density,
    EvolutionOptions,
};
use crate::functional::{avg_fidelity_two, j_time, ModulationSource};
use crate::linalg::{pairwise_sum_f64, C64, CMatrix, CVector, RMatrix};
use crate::metrics::{average_fidelity_mc, fidelity_pure, haar_state, FidelityReport};
use crate::noise::NoiseModel;
use crate::pulses::{design_pulse_train, GateField, GateKind, PulseConstraints, Schedule};
use crate::rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

/// Default per-register phase targets of the four storage/gate sequences:
/// storage winding on the first register, gate rotations on the other two.
pub const STORAGE_SEQUENCES: [[&str; 3]; 4] = [
    ["0", "pi/4", "7pi/4"],
    ["2pi", "pi/4", "7pi/4"],
    ["4pi", "pi/4", "7pi/4"],
    ["4pi", "17pi/4", "23pi/4"],
];

/// Per-sequence pulse counts of the built-in storage table. The first three
/// sequences rotate with single gate pulses and one full-turn pulse per
/// storage winding. The fourth subdivides every rotation into a train of
/// near-half-turn pulses (count = nearest integer to target/(π/2)), whose
/// short widths push the modulation sidebands to high frequencies while the
/// shared window stays at the single-pulse length — the long-duration,
/// strongly decoupled variant.
pub const STORAGE_SEQUENCE_PULSES: [[usize; 3]; 4] =
    [[0, 1, 1], [1, 1, 1], [2, 1, 1], [8, 9, 12]];

/// Default field sets of the protected-gate study: spectator storage on
/// qubit 0, gate phase on the antisymmetric pair channel of qubits (1, 2),
/// and storage on their symmetric channel.
pub const GATE_PROTECTION_SETS: [[&str; 3]; 4] = [
    ["0", "3pi/2", "0"],
    ["0", "3pi/2", "2pi"],
    ["2pi", "3pi/2", "0"],
    ["2pi", "3pi/2", "2pi"],
];

/// Evaluation window of the unprotected ion-trap swap, in the config's time
/// unit (microseconds at the default trap operating point).
pub const ION_CONVENTIONAL_WINDOW: f64 = 500.0;
/// Evaluation window of the storage-protected ion-trap swap.
pub const ION_PROPOSED_WINDOW: f64 = 600.0;

const STORAGE_DEFAULT_TC: [f64; 5] = [0.5, 2.0, 8.0, 32.0, 128.0];
const PROTECTION_DEFAULT_XI: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Column order of every sweep table.
pub const CSV_HEADER: &str = "sweep_param,value,sequence,method,fidelity,error,std_err,n_real,duration";

/// One evaluated grid point of a sweep table.
#[derive(Clone, Debug)]
pub struct SweepRow {
    /// Name of the swept axis (`t_c`, `correlation`, or `gamma`).
    pub sweep_param: String,
    /// Value of the swept axis at this row.
    pub value: f64,
    /// Sequence or field-set label the row belongs to.
    pub sequence: String,
    /// `mc`, `mc_avg`, `second_order`, or `closed_form`.
    pub method: String,
    pub fidelity: f64,
    pub error: f64,
    /// Standard error of a sampled estimate; NaN for deterministic methods
    /// and for single-realization runs.
    pub std_err: f64,
    /// Realizations behind a sampled estimate; 0 for deterministic methods.
    pub n_real: usize,
    /// Schedule duration the row refers to.
    pub duration: f64,
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            self.sweep_param,
            self.value,
            self.sequence,
            self.method,
            self.fidelity,
            self.error,
            self.std_err,
            self.n_real,
            self.duration
        )
    }
}

/// Header plus one line per row. Contains no timestamp, so identical runs
/// produce byte-identical bodies.
pub fn csv_body(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Full CSV document: a `#` comment line carrying the generation time (the
/// only non-reproducible content) followed by [`csv_body`].
pub fn csv_document(rows: &[SweepRow]) -> String {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated at unix time {stamp}\n{}", csv_body(rows))
}

fn ket(components: &[C64]) -> CVector {
    CVector::from_row_slice(components)
}

/// `(i|e⟩ + |g⟩)/√2`, the "spin up" superposition used by the studies.
pub fn spin_up() -> CVector {
    ket(&[C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)])
}

/// `(i|e⟩ − |g⟩)/√2`.
pub fn spin_down() -> CVector {
    ket(&[C64::new(-FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)])
}

/// `(|e⟩ − |g⟩)/√2`, the odd superposition left on the target register of
/// the protected gate.
pub fn minus_state() -> CVector {
    ket(&[C64::new(-FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)])
}

fn ground() -> CVector {
    ket(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

fn excited() -> CVector {
    ket(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
}

/// Tensor product with the first factor on the most significant qubit.
pub fn kron_states(parts: &[CVector]) -> CVector {
    let mut out = CVector::from_element(1, C64::new(1.0, 0.0));
    for p in parts {
        let mut next = CVector::zeros(out.len() * p.len());
        for i in 0..out.len() {
            for j in 0..p.len() {
                next[i * p.len() + j] = out[i] * p[j];
            }
        }
        out = next;
    }
    out
}

/// Initial state of the storage-sequence study: `|↑⟩₁|e⟩₂|↓⟩₃`.
pub fn storage_initial_state() -> CVector {
    kron_states(&[spin_up(), excited(), spin_down()])
}

/// Ideal final state of the storage-sequence study: `i|↑⟩₁|↑⟩₂|g⟩₃`.
pub fn storage_target_state() -> CVector {
    kron_states(&[spin_up(), spin_up(), ground()]).map(|z| z * C64::new(0.0, 1.0))
}

/// Ideal final state of the protected-gate study: `−i|↑⟩₁|g⟩₂|−⟩₃`.
pub fn protected_gate_target_state() -> CVector {
    kron_states(&[spin_up(), ground(), minus_state()]).map(|z| z * C64::new(0.0, -1.0))
}

/// Splits full-turn windings into one pulse per turn; any other nonzero
/// target gets a single pulse, and a zero target an empty train.
pub fn default_pulse_count(target: f64) -> usize {
    if target.abs() < 1e-12 {
        return 0;
    }
    let turns = target.abs() / (2.0 * PI);
    if (turns - turns.round()).abs() < 1e-9 && turns.round() >= 1.0 {
        turns.round() as usize
    } else {
        1
    }
}

fn constraints_from(config: &RunConfig) -> PulseConstraints {
    PulseConstraints {
        omega_max: config.control.omega_max,
        sigma_min: config.control.sigma_min,
    }
}

fn ensure_register(config: &RunConfig, needed: usize, why: &str) -> Result<()> {
    if config.register.qubits != needed {
        return Err(SimError::invalid(
            "register.qubits",
            format!("{why}; need exactly {needed}, got {}", config.register.qubits),
        ));
    }
    Ok(())
}

/// Designs concurrent fields sharing one window: the smallest duration at
/// which every phase target could be met by a single maximal-amplitude
/// pulse. Fields that subdivide their rotation into trains spread the short
/// pulses across that same window, so replacing a fat pulse by a train
/// never shortens the schedule, and every free-width train still peaks at
/// the shared amplitude cap — equal peak power across schedules built from
/// the same constraints.
fn design_schedule(
    entries: &[(GateKind, f64, usize)],
    constraints: PulseConstraints,
    n_qubits: usize,
) -> Result<Schedule> {
    let mut duration = 0.0f64;
    for &(kind, target, count) in entries {
        if target != 0.0 && count > 0 {
            let probe = design_pulse_train(kind, target, constraints, 1, None)?;
            duration = duration.max(probe.duration);
        }
    }
    if duration == 0.0 {
        duration = 1.0;
    }
    let fields = entries
        .iter()
        .map(|&(kind, target, count)| {
            design_pulse_train(kind, target, constraints, count, Some(duration))
        })
        .collect::<Result<Vec<_>>>()?;
    Schedule::new(fields, n_qubits, duration)
}

fn sequence_angles(
    config: &RunConfig,
    defaults: &[[&str; 3]; 4],
    fields_per_row: usize,
) -> Result<Vec<Vec<f64>>> {
    match &config.scenario.sequences {
        Some(rows) => rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != fields_per_row {
                    return Err(SimError::invalid(
                        format!("scenario.sequences[{i}]"),
                        format!("expected {fields_per_row} phase targets, got {}", row.len()),
                    ));
                }
                row.iter()
                    .enumerate()
                    .map(|(j, angle)| {
                        parse_angle(angle).map_err(|e| {
                            SimError::invalid(
                                format!("scenario.sequences[{i}][{j}]"),
                                e.to_string(),
                            )
                        })
                    })
                    .collect()
            })
            .collect(),
        None => defaults
            .iter()
            .map(|row| row.iter().map(|angle| parse_angle(angle)).collect())
            .collect(),
    }
}

fn pulse_count_overrides(config: &RunConfig, n_fields: usize) -> Result<Option<&[usize]>> {
    match &config.scenario.pulses_per_field {
        Some(v) if v.len() != n_fields => Err(SimError::invalid(
            "scenario.pulses_per_field",
            format!("expected {n_fields} entries (one per field), got {}", v.len()),
        )),
        Some(v) => Ok(Some(v.as_slice())),
        None => Ok(None),
    }
}

fn count_for(overrides: Option<&[usize]>, field_index: usize, target: f64) -> usize {
    overrides
        .map(|v| v[field_index])
        .unwrap_or_else(|| default_pulse_count(target))
}

/// Builds the four storage-sequence schedules the config describes, in the
/// order the sweep table reports them (`seq1`..`seq4`). Exposed so callers
/// can inspect durations and pulse shapes, or propagate the schedules
/// noiselessly, without running the full sweep.
pub fn storage_schedules(config: &RunConfig) -> Result<Vec<Schedule>> {
    ensure_register(config, 3, "the storage-sequence study rotates a fixed three-register state")?;
    let n = config.register.qubits;
    let builtin = config.scenario.sequences.is_none();
    let angles = sequence_angles(config, &STORAGE_SEQUENCES, n)?;
    let overrides = pulse_count_overrides(config, n)?;
    let constraints = constraints_from(config);
    angles
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let entries: Vec<(GateKind, f64, usize)> = row
                .iter()
                .enumerate()
                .map(|(q, &target)| {
                    let count = match overrides {
                        Some(v) => v[q],
                        None if builtin => STORAGE_SEQUENCE_PULSES[i][q],
                        None => default_pulse_count(target),
                    };
                    (GateKind::Single(q), target, count)
                })
                .collect();
            design_schedule(&entries, constraints, n)
        })
        .collect()
}

/// Builds the four protected-gate field-set schedules the config describes,
/// in sweep-table order (`set1`..`set4`).
pub fn gate_protection_schedules(config: &RunConfig) -> Result<Vec<Schedule>> {
    ensure_register(config, 3, "the protected-gate study pairs qubits 1 and 2 under a spectator")?;
    let angles = sequence_angles(config, &GATE_PROTECTION_SETS, 3)?;
    let overrides = pulse_count_overrides(config, 3)?;
    let constraints = constraints_from(config);
    angles
        .iter()
        .map(|row| {
            let entries = [
                (GateKind::Single(0), row[0], count_for(overrides, 0, row[0])),
                (GateKind::two_psi(1, 2)?, row[1], count_for(overrides, 1, row[1])),
                (GateKind::two_phi(1, 2)?, row[2], count_for(overrides, 2, row[2])),
            ];
            design_schedule(&entries, constraints, config.register.qubits)
        })
        .collect()
}

/// Noise model at one grid point: the swept axis overrides the baseline
/// value from the config.
fn model_for(config: &RunConfig, param: SweepParameter, value: f64) -> Result<NoiseModel> {
    let n = config.register.qubits;
    let (mut gamma, mut t_c) = (config.noise.gamma, config.noise.t_c);
    match param {
        SweepParameter::TC => t_c = value,
        SweepParameter::Gamma => gamma = value,
        SweepParameter::Correlation => {}
    }
    if let Some(xi) = &config.noise.xi {
        if param == SweepParameter::Correlation {
            return Err(SimError::invalid(
                "scenario.sweep",
                "a correlation sweep varies the uniform noise.correlation knob \
                 and cannot be combined with an explicit noise.xi matrix",
            ));
        }
        let m = RMatrix::from_fn(n, n, |i, j| xi[i][j]);
        NoiseModel::new(gamma, t_c, m)
    } else {
        let off = if param == SweepParameter::Correlation {
            value
        } else {
            config.noise.correlation
        };
        NoiseModel::uniform(gamma, t_c, n, off)
    }
}

fn resolve_sweep(
    config: &RunConfig,
    default_param: SweepParameter,
    default_values: &[f64],
) -> (SweepParameter, Vec<f64>) {
    match &config.scenario.sweep {
        Some(s) => (s.parameter, s.values.clone()),
        None => (default_param, default_values.to_vec()),
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum_f64(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum_f64(&squares) / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct McEstimate {
    specific: f64,
    specific_se: f64,
    averaged: f64,
    averaged_se: f64,
}

/// Samples the fixed-initial-state fidelity and the Haar-averaged gate
/// fidelity from the same set of propagated realizations, so one table
/// carries both readings of "gate error" at no extra propagation cost.
fn mc_estimates(
    schedule: &Schedule,
    model: &NoiseModel,
    initial: &CVector,
    target_state: &CVector,
    target_unitary: &CMatrix,
    n_realizations: usize,
    n_states: usize,
    seed: u64,
    step: f64,
) -> Result<McEstimate> {
    if n_realizations == 0 || n_states == 0 {
        return Err(SimError::invalid(
            "execution",
            format!(
                "need at least 1 realization and 1 state per realization, \
                 got {n_realizations} and {n_states}"
            ),
        ));
    }
    let target_bra = target_state.adjoint();
    let target_dag = target_unitary.adjoint();
    let dim = target_unitary.nrows();
    let samples: Vec<(f64, f64)> = (0..n_realizations)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let u = realization_unitary(schedule, model, seed, r, step)?;
            let out = &u * initial;
            let specific = (&target_bra * &out)[(0, 0)].norm_sqr();
            let m = &target_dag * &u;
            let scores: Vec<f64> = (0..n_states)
                .map(|s| {
                    let idx = r as u64 * n_states as u64 + s as u64;
                    let mut state_rng = rng::stream(seed, rng::DOMAIN_STATE, idx);
                    let psi = haar_state(dim, &mut state_rng);
                    (psi.adjoint() * &m * &psi)[(0, 0)].norm_sqr()
                })
                .collect();
            Ok((specific, pairwise_sum_f64(&scores) / n_states as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (specifics, averages): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    let (specific, specific_se) = mean_and_se(&specifics);
    let (averaged, averaged_se) = mean_and_se(&averages);
    Ok(McEstimate { specific, specific_se, averaged, averaged_se })
}

fn source_for(field: Option<&GateField>, winding: f64) -> ModulationSource<'_> {
    match field {
        Some(f) if !f.train.pulses().is_empty() => ModulationSource::Wound { field: f, winding },
        _ => ModulationSource::Constant,
    }
}

/// State-averaged fidelity of the driven pair (qubits 1 and 2) from the
/// closed-form expression over channel dephasing integrals. The spectator
/// register is outside this formula by construction.
fn pair_average_fidelity(model: &NoiseModel, schedule: &Schedule, winding: f64) -> Result<f64> {
    let t = schedule.duration;
    let psi_src = source_for(schedule.psi_field(1, 2), winding);
    let phi_src = source_for(schedule.phi_field(1, 2), winding);
    let qubits = [1usize, 2];
    let mut j_phi = [[0.0; 2]; 2];
    let mut j_psi = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            j_psi[a][b] = j_time(model, &psi_src, &psi_src, qubits[a], qubits[b], t)?.re;
            j_phi[a][b] = j_time(model, &phi_src, &phi_src, qubits[a], qubits[b], t)?.re;
        }
    }
    Ok(avg_fidelity_two(&j_phi, &j_psi))
}

type ClosedFormEval<'a> = &'a dyn Fn(&NoiseModel, &Schedule) -> Result<f64>;

#[allow(clippy::too_many_arguments)]
fn push_row(
    rows: &mut Vec<SweepRow>,
    param: SweepParameter,
    value: f64,
    sequence: &str,
    method: &str,
    fidelity: f64,
    std_err: f64,
    n_real: usize,
    duration: f64,
) {
    rows.push(SweepRow {
        sweep_param: param.label().to_string(),
        value,
        sequence: sequence.to_string(),
        method: method.to_string(),
        fidelity,
        error: 1.0 - fidelity,
        std_err,
        n_real,
        duration,
    });
}

/// Shared sweep engine: evaluates every configured method for every
/// (grid value, schedule) pair. Row order is values-major, then schedules,
/// then methods in their configured order; each grid point draws noise from
/// its own derived seed, so tables are independent of worker count.
fn sweep_table(
    config: &RunConfig,
    param: SweepParameter,
    values: &[f64],
    label_prefix: &str,
    schedules: &[Schedule],
    initial: &CVector,
    target: &CVector,
    closed_form: Option<ClosedFormEval>,
) -> Result<Vec<SweepRow>> {
    let exec = &config.execution;
    let winding = config.control.modulation_winding;
    let rho0 = pure_density(initial);
    let mut rows = Vec::new();
    for (vi, &value) in values.iter().enumerate() {
        let model = model_for(config, param, value)?;
        for (si, schedule) in schedules.iter().enumerate() {
            let label = format!("{label_prefix}{}", si + 1);
            let step = exec.step.unwrap_or_else(|| default_step(schedule, model.t_c));
            let point_seed =
                rng::derive_seed(exec.seed, rng::DOMAIN_NOISE, (vi * schedules.len() + si) as u64);
            for method in &exec.methods {
                match method {
                    Method::Mc => {
                        let ideal = noiseless_unitary(schedule, step)?;
                        let est = mc_estimates(
                            schedule,
                            &model,
                            initial,
                            target,
                            &ideal,
                            exec.realizations,
                            exec.states_per_realization,
                            point_seed,
                            step,
                        )?;
                        push_row(
                            &mut rows,
                            param,
                            value,
                            &label,
                            "mc",
                            est.specific,
                            est.specific_se,
                            exec.realizations,
                            schedule.duration,
                        );
                        push_row(
                            &mut rows,
                            param,
                            value,
                            &label,
                            "mc_avg",
                            est.averaged,
                            est.averaged_se,
                            exec.realizations,
                            schedule.duration,
                        );
                    }
                    Method::SecondOrder => {
                        let rho = second_order_density(schedule, &model, &rho0, winding)?;
                        let f = fidelity_pure(target, &rho);
                        push_row(
                            &mut rows,
                            param,
                            value,
                            &label,
                            "second_order",
                            f,
                            f64::NAN,
                            0,
                            schedule.duration,
                        );
                    }
                    Method::ClosedForm => {
                        if let Some(eval) = closed_form {
                            let f = eval(&model, schedule)?;
                            push_row(
                                &mut rows,
                                param,
                                value,
                                &label,
                                "closed_form",
                                f,
                                f64::NAN,
                                0,
                                schedule.duration,
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Compares the four storage/gate sequences over a correlation-time grid:
/// Monte Carlo and perturbative error of the three-register rotation from
/// `|↑⟩|e⟩|↓⟩` to `i|↑⟩|↑⟩|g⟩`, one row per (grid value, sequence, method).
pub fn run_storage_sequences(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let schedules = storage_schedules(config)?;
    let initial = storage_initial_state();
    let target = storage_target_state();
    let (param, values) = resolve_sweep(config, SweepParameter::TC, &STORAGE_DEFAULT_TC);
    sweep_table(config, param, &values, "seq", &schedules, &initial, &target, None)
}

/// Compares the four protected-gate field sets over a cross-correlation
/// grid, starting from the storage study's target state and aiming for
/// `−i|↑⟩|g⟩|−⟩`. The closed-form column reports the pair-averaged fidelity.
pub fn run_gate_protection(config: &RunConfig) -> Result<Vec<SweepRow>> {
    let schedules = gate_protection_schedules(config)?;
    let initial = storage_target_state();
    let target = protected_gate_target_state();
    let (param, values) =
        resolve_sweep(config, SweepParameter::Correlation, &PROTECTION_DEFAULT_XI);
    let winding = config.control.modulation_winding;
    let closed = move |model: &NoiseModel, schedule: &Schedule| {
        pair_average_fidelity(model, schedule, winding)
    };
    sweep_table(config, param, &values, "set", &schedules, &initial, &target, Some(&closed))
}

/// Ion-register swap comparison: a bare exchange pulse between ion 1 and
/// the bus inside a 500-unit window versus the same exchange protected by
/// concurrent full-turn storage on the symmetric channel and on the
/// spectator ion inside a 600-unit window. Reports the Haar-averaged gate
/// fidelity of each schedule against its own noiseless propagator.
pub fn trapped_ion_schedules(config: &RunConfig) -> Result<[(&'static str, Schedule); 2]> {
    ensure_register(config, 3, "the trapped-ion study uses two data ions and one bus register")?;
    let constraints = constraints_from(config);
    let overrides = pulse_count_overrides(config, 3)?;
    let k_swap = count_for(overrides, 0, FRAC_PI_2);
    let k_blue = overrides.map(|v| v[1]).unwrap_or(1);
    let k_carrier = overrides.map(|v| v[2]).unwrap_or(1);

    let swap_short = design_pulse_train(
        GateKind::two_psi(0, 2)?,
        FRAC_PI_2,
        constraints,
        k_swap,
        Some(ION_CONVENTIONAL_WINDOW),
    )?;
    let conventional = Schedule::new(vec![swap_short], 3, ION_CONVENTIONAL_WINDOW)?;

    let swap_long = design_pulse_train(
        GateKind::two_psi(0, 2)?,
        FRAC_PI_2,
        constraints,
        k_swap,
        Some(ION_PROPOSED_WINDOW),
    )?;
    let blue_storage = design_pulse_train(
        GateKind::two_phi(0, 2)?,
        2.0 * PI * k_blue as f64,
        constraints,
        k_blue,
        Some(ION_PROPOSED_WINDOW),
    )?;
    let carrier_storage = design_pulse_train(
        GateKind::Single(1),
        2.0 * PI * k_carrier as f64,
        constraints,
        k_carrier,
        Some(ION_PROPOSED_WINDOW),
    )?;
    let proposed =
        Schedule::new(vec![swap_long, blue_storage, carrier_storage], 3, ION_PROPOSED_WINDOW)?;

    Ok([("conventional", conventional), ("proposed", proposed)])
}

pub fn run_trapped_ion(config: &RunConfig) -> Result<(Vec<SweepRow>, Vec<FidelityReport>)> {
    let schedules = trapped_ion_schedules(config)?;
    let model = base_noise_model(config)?;
    let exec = &config.execution;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, (label, schedule)) in schedules.into_iter().enumerate() {
        let step = exec.step.unwrap_or_else(|| default_step(&schedule, model.t_c));
        let seed = rng::derive_seed(exec.seed, rng::DOMAIN_NOISE, i as u64);
        let ideal = noiseless_unitary(&schedule, step)?;
        let avg = average_fidelity_mc(
            &schedule,
            &model,
            &ideal,
            exec.realizations,
            exec.states_per_realization,
            seed,
            &EvolutionOptions { step: Some(step) },
        )?;
        push_row(
            &mut rows,
            SweepParameter::TC,
            model.t_c,
            label,
            "mc",
            avg.fidelity,
            avg.std_err,
            avg.n_realizations,
            schedule.duration,
        );
        reports.push(FidelityReport {
            sequence: label.to_string(),
            method: "mc".to_string(),
            fidelity: avg.fidelity,
            error: 1.0 - avg.fidelity,
            std_err: Some(avg.std_err),
            n_realizations: Some(avg.n_realizations),
            duration: schedule.duration,
        });
    }
    Ok((rows, reports))
}

/// The unswept noise model the config describes, with its positivity
/// validation applied.
pub fn base_noise_model(config: &RunConfig) -> Result<NoiseModel> {
    model_for(config, SweepParameter::TC, config.noise.t_c)
}

/// What a configured run would execute, with every schedule designed and
/// every grid-point noise model constructed — but nothing sampled. Lets a
/// front end reject invalid setups without paying for a simulation.
#[derive(Clone, Debug)]
pub struct ScenarioPlan {
    /// Sequence label and schedule duration, in run order.
    pub sequences: Vec<(String, f64)>,
    /// Swept-axis name.
    pub sweep_param: String,
    /// Grid values, in run order.
    pub values: Vec<f64>,
}

/// Builds the [`ScenarioPlan`] for the configured study, surfacing design
/// and model failures exactly as a run would.
pub fn plan_scenario(config: &RunConfig) -> Result<ScenarioPlan> {
    use crate::config::ScenarioKind;
    let (sequences, param, values) = match config.scenario.kind {
        ScenarioKind::StorageSequences => {
            let schedules = storage_schedules(config)?;
            let (param, values) = resolve_sweep(config, SweepParameter::TC, &STORAGE_DEFAULT_TC);
            let labels = schedules
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("seq{}", i + 1), s.duration))
                .collect();
            (labels, param, values)
        }
        ScenarioKind::GateProtection => {
            let schedules = gate_protection_schedules(config)?;
            let (param, values) =
                resolve_sweep(config, SweepParameter::Correlation, &PROTECTION_DEFAULT_XI);
            let labels = schedules
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("set{}", i + 1), s.duration))
                .collect();
            (labels, param, values)
        }
        ScenarioKind::TrappedIon => {
            let schedules = trapped_ion_schedules(config)?;
            let labels = schedules
                .iter()
                .map(|(label, s)| (label.to_string(), s.duration))
                .collect();
            (labels, SweepParameter::TC, vec![config.noise.t_c])
        }
    };
    for &v in &values {
        model_for(config, param, v)?;
    }
    Ok(ScenarioPlan {
        sequences,
        sweep_param: param.label().to_string(),
        values,
    })
}

/// Everything a scenario run produces: the sweep table, plus per-sequence
/// fidelity reports where the study defines them.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<FidelityReport>,
}

/// Runs whichever study the config selects.
pub fn run_scenario(config: &RunConfig) -> Result<ScenarioOutput> {
    use crate::config::ScenarioKind;
    match config.scenario.kind {
        ScenarioKind::StorageSequences => Ok(ScenarioOutput {
            rows: run_storage_sequences(config)?,
            reports: Vec::new(),
        }),
        ScenarioKind::GateProtection => Ok(ScenarioOutput {
            rows: run_gate_protection(config)?,
            reports: Vec::new(),
        }),
        ScenarioKind::TrappedIon => {
            let (rows, reports) = run_trapped_ion(config)?;
            Ok(ScenarioOutput { rows, reports })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn config_from(text: &str) -> RunConfig {
        RunConfig::from_toml(text).unwrap()
    }

    fn storage_toml(gamma: f64) -> String {
        format!(
            r#"
version = 1
[noise]
gamma = {gamma}
t_c = 5.0
[register]
qubits = 3
[scenario]
kind = "storage-sequences"
sweep = {{ parameter = "t_c", values = [5.0] }}
[execution]
realizations = 2
seed = 11
methods = ["mc", "second_order"]
"#
        )
    }

    #[test]
    fn storage_sequence_durations_and_peak_power_follow_the_design_rules() {
        let config = config_from(&storage_toml(0.1));
        let schedules = storage_schedules(&config).unwrap();
        let durations: Vec<f64> = schedules.iter().map(|s| s.duration).collect();
        assert!(
            durations[3] > 3.0 * durations[0],
            "expected a more-than-threefold duration, got {durations:?}"
        );
        assert!(durations[0] > 26.0 && durations[0] < 26.8, "{durations:?}");
        assert!(
            durations[0] < durations[1] && durations[1] < durations[2]
                && durations[2] < durations[3],
            "{durations:?}"
        );
        let peaks: Vec<f64> = schedules.iter().map(|s| s.peak_amplitude()).collect();
        for p in &peaks {
            assert!(
                (p - peaks[0]).abs() <= 1e-9,
                "peak amplitudes differ across sequences: {peaks:?}"
            );
        }
    }

    #[test]
    fn fourth_storage_sequence_spreads_short_pulse_trains_over_the_single_pulse_window() {
        let config = config_from(&storage_toml(0.1));
        let schedules = storage_schedules(&config).unwrap();
        let counts: Vec<usize> =
            schedules[3].fields.iter().map(|f| f.train.pulses().len()).collect();
        assert_eq!(counts, vec![8, 9, 12]);
        // Trains at the amplitude cap use short widths, well under the fat
        // single pulse the same target would otherwise need.
        for f in &schedules[3].fields {
            for p in f.train.pulses() {
                assert!(p.sigma < 0.7, "expected short train pulses, got sigma {}", p.sigma);
                assert!((p.amplitude.abs() - 1.0).abs() < 1e-9, "{}", p.amplitude);
            }
        }
        // The window itself stays at the single-pulse requirement of the
        // widest rotation instead of shrinking with the subdivision.
        let fat = design_pulse_train(
            GateKind::Single(2),
            parse_angle("23pi/4").unwrap(),
            constraints_from(&config),
            1,
            None,
        )
        .unwrap();
        assert!((schedules[3].duration - fat.duration).abs() < 1e-9);
    }

    #[test]
    fn tiny_noise_reproduces_the_ideal_storage_sequences() {
        let config = config_from(&storage_toml(1e-10));
        let rows = run_storage_sequences(&config).unwrap();
        // Per sweep point: 4 sequences × (mc, mc_avg, second_order).
        assert_eq!(rows.len(), 12);
        for row in &rows {
            assert_eq!(row.sweep_param, "t_c");
            assert!(row.sequence.starts_with("seq"), "{row:?}");
            assert!(
                row.error.abs() < 1e-5,
                "{} {} error {}",
                row.sequence,
                row.method,
                row.error
            );
        }
        let mc_rows: Vec<_> = rows.iter().filter(|r| r.method == "mc").collect();
        assert_eq!(mc_rows.len(), 4);
        assert!(mc_rows.iter().all(|r| r.n_real == 2 && r.std_err.is_finite()));
        let so_rows: Vec<_> = rows.iter().filter(|r| r.method == "second_order").collect();
        assert!(so_rows.iter().all(|r| r.n_real == 0 && r.std_err.is_nan()));
    }

    #[test]
    fn gate_protection_sets_reach_the_target_at_their_own_durations() {
        let text = r#"
version = 1
[noise]
gamma = 1e-10
t_c = 5.0
[register]
qubits = 3
[scenario]
kind = "gate-protection"
sweep = { parameter = "correlation", values = [0.5] }
[execution]
realizations = 2
seed = 3
methods = ["mc", "second_order", "closed_form"]
"#;
        let config = config_from(text);
        let schedules = gate_protection_schedules(&config).unwrap();
        let durations: Vec<f64> = schedules.iter().map(|s| s.duration).collect();
        // The bare set needs only the exchange pulse; every set with a
        // full-turn storage field stretches to that field's length.
        assert!(durations[0] < durations[1], "{durations:?}");
        assert!((durations[1] - durations[3]).abs() < 1e-9, "{durations:?}");
        assert!(durations[1] > 29.0 && durations[1] < 31.0, "{durations:?}");

        let rows = run_gate_protection(&config).unwrap();
        assert_eq!(rows.len(), 16);
        for row in &rows {
            assert_eq!(row.sweep_param, "correlation");
            assert!(row.sequence.starts_with("set"), "{row:?}");
            assert!(
                row.error.abs() < 1e-5,
                "{} {} error {}",
                row.sequence,
                row.method,
                row.error
            );
        }
        assert!(rows.iter().any(|r| r.method == "closed_form"));
    }

    #[test]
    fn identical_configs_produce_byte_identical_tables() {
        let text = storage_toml(0.05).replace(
            "kind = \"storage-sequences\"",
            "kind = \"storage-sequences\"\nsequences = [[\"0\", \"pi/4\", \"7pi/4\"]]",
        );
        let config = config_from(&text);
        let a = csv_body(&run_storage_sequences(&config).unwrap());
        let b = csv_body(&run_storage_sequences(&config).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert_eq!(a.lines().next().unwrap().split(',').count(), 9);
        let doc = csv_document(&run_storage_sequences(&config).unwrap());
        assert!(doc.starts_with("# generated at unix time "));
        assert_eq!(doc.lines().nth(1).unwrap(), CSV_HEADER);
    }

    #[test]
    fn single_realization_rows_are_deterministic_with_nan_scatter() {
        let text = storage_toml(0.05)
            .replace("realizations = 2", "realizations = 1")
            .replace(
                "kind = \"storage-sequences\"",
                "kind = \"storage-sequences\"\nsequences = [[\"0\", \"pi/4\", \"7pi/4\"]]",
            )
            .replace("methods = [\"mc\", \"second_order\"]", "methods = [\"mc\"]");
        let config = config_from(&text);
        let rows_a = run_storage_sequences(&config).unwrap();
        let rows_b = run_storage_sequences(&config).unwrap();
        assert_eq!(rows_a.len(), 2);
        for (a, b) in rows_a.iter().zip(&rows_b) {
            assert_eq!(a.fidelity, b.fidelity);
            assert_eq!(a.n_real, 1);
            assert!(a.std_err.is_nan());
        }
    }

    #[test]
    fn error_grows_monotonically_with_noise_strength() {
        let text = storage_toml(0.1).replace(
            "sweep = { parameter = \"t_c\", values = [5.0] }",
            "sweep = { parameter = \"gamma\", values = [0.05, 0.1] }",
        );
        let text = text.replace("methods = [\"mc\", \"second_order\"]", "methods = [\"second_order\"]");
        let config = config_from(&text);
        let rows = run_storage_sequences(&config).unwrap();
        assert_eq!(rows.len(), 8);
        for si in 0..4 {
            let label = format!("seq{}", si + 1);
            let low = rows
                .iter()
                .find(|r| r.sequence == label && r.value == 0.05)
                .unwrap();
            let high = rows
                .iter()
                .find(|r| r.sequence == label && r.value == 0.1)
                .unwrap();
            assert!(
                high.error > low.error && low.error > 0.0,
                "{label}: {} vs {}",
                low.error,
                high.error
            );
        }
    }

    #[test]
    fn trapped_ion_windows_hold_and_tiny_noise_gives_unit_fidelity() {
        let text = r#"
version = 1
[noise]
gamma = 1e-10
t_c = 300.0
[register]
qubits = 3
[control]
omega_max = 0.06
sigma_min = 5.0
modulation_winding = 2.0
[scenario]
kind = "trapped-ion"
[execution]
realizations = 2
seed = 5
"#;
        let config = config_from(text);
        let (rows, reports) = run_trapped_ion(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(reports.len(), 2);
        assert_eq!(rows[0].sequence, "conventional");
        assert_eq!(rows[1].sequence, "proposed");
        assert_eq!(rows[0].duration, ION_CONVENTIONAL_WINDOW);
        assert_eq!(rows[1].duration, ION_PROPOSED_WINDOW);
        for (row, report) in rows.iter().zip(&reports) {
            assert!(
                (row.fidelity - 1.0).abs() < 1e-6,
                "{}: fidelity {}",
                row.sequence,
                row.fidelity
            );
            assert_eq!(row.fidelity, report.fidelity);
            assert_eq!(row.sequence, report.sequence);
        }
    }

    #[test]
    fn sweep_rows_render_expected_csv_fields() {
        let row = SweepRow {
            sweep_param: "t_c".to_string(),
            value: 8.0,
            sequence: "seq2".to_string(),
            method: "second_order".to_string(),
            fidelity: 0.975,
            error: 0.025,
            std_err: f64::NAN,
            n_real: 0,
            duration: 30.5,
        };
        let line = row.to_string();
        assert_eq!(line.split(',').count(), 9);
        assert!(line.starts_with("t_c,8,seq2,second_order,0.975,0.025,NaN,0,"));
        let body = csv_body(std::slice::from_ref(&row));
        assert_eq!(body.lines().count(), 2);
        assert_eq!(body.lines().next().unwrap(), CSV_HEADER);
    }
}
