//! Register evolution under scheduled control fields and dephasing noise.
//!
//! Two complementary engines live here. The Monte Carlo engine integrates
//! the Schrödinger equation exactly for each sampled noise trajectory —
//! `H(t) = Σ_f Ω_f(t)·B_f + Σ_j (δ_j(t)/2)·σ_z^{(j)}` with midpoint
//! evaluation and a scaled cosine/sine propagator per step — and averages
//! the resulting density matrices with a deterministic reduction tree. The
//! perturbative engine works in the dressed interaction picture, where the
//! noise enters through a handful of collective channels whose two-time
//! kernels are exactly the control-modified dephasing functionals; it
//! produces the second-order density directly, with no sampling error.

use crate::basis::{DressedBasis, Site};
use crate::error::{Result, SimError};
use crate::functional::{j_weighted, ModulationSource};
use crate::linalg::{
    apply_exp_neg_i_sym, hermiticity_defect, identity, pairwise_sum, unitarity_defect, C64,
    CMatrix, CVector, RMatrix,
};
use crate::noise::{NoiseModel, NoiseRealization};
use crate::pulses::{GateKind, Schedule};
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Integrator knobs; `Default` lets the step be chosen automatically.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvolutionOptions {
    /// Integration step override. `None` picks [`default_step`].
    pub step: Option<f64>,
}

/// Automatic step: a fiftieth of the fastest time scale in play (noise
/// correlation time or narrowest pulse), capped so every run takes at
/// least ten steps.
pub fn default_step(schedule: &Schedule, t_c: f64) -> f64 {
    let sigma = schedule.min_sigma().unwrap_or(f64::INFINITY);
    (t_c.min(sigma) / 50.0).min(schedule.duration / 10.0)
}

/// The flip operator a channel's drive couples to, over the full register:
/// `σ_x` on one qubit, `|eg⟩⟨ge| + h.c.` or `|ee⟩⟨gg| + h.c.` on a pair.
/// All are real symmetric.
pub fn control_operator(kind: &GateKind, n_qubits: usize) -> RMatrix {
    let dim = 1usize << n_qubits;
    let mut m = RMatrix::zeros(dim, dim);
    match *kind {
        GateKind::Single(j) => {
            let mask = 1usize << (n_qubits - 1 - j);
            for i in 0..dim {
                m[(i, i ^ mask)] = 1.0;
            }
        }
        GateKind::TwoPsi(a, b) => {
            let (ma, mb) = (1usize << (n_qubits - 1 - a), 1usize << (n_qubits - 1 - b));
            for i in 0..dim {
                if i & ma != 0 && i & mb == 0 {
                    let j = i ^ ma ^ mb;
                    m[(i, j)] = 1.0;
                    m[(j, i)] = 1.0;
                }
            }
        }
        GateKind::TwoPhi(a, b) => {
            let (ma, mb) = (1usize << (n_qubits - 1 - a), 1usize << (n_qubits - 1 - b));
            for i in 0..dim {
                if i & ma != 0 && i & mb != 0 {
                    let j = i ^ ma ^ mb;
                    m[(i, j)] = 1.0;
                    m[(j, i)] = 1.0;
                }
            }
        }
    }
    m
}

/// Diagonal of `σ_z` for qubit `j` (`|e⟩ → +1`, `|g⟩ → −1`).
fn z_diagonal(j: usize, n_qubits: usize) -> Vec<f64> {
    let dim = 1usize << n_qubits;
    let mask = 1usize << (n_qubits - 1 - j);
    (0..dim).map(|i| if i & mask != 0 { 1.0 } else { -1.0 }).collect()
}

fn step_count(duration: f64, step: f64) -> usize {
    (duration / step).ceil().max(1.0) as usize
}

/// The uniform node grid `0, Δ, …, T` the integrator walks; noise
/// trajectories are sampled on these nodes so a step sees the average of
/// its two endpoint values.
pub fn time_grid(schedule: &Schedule, step: f64) -> Vec<f64> {
    let n = step_count(schedule.duration, step);
    (0..=n).map(|i| schedule.duration * i as f64 / n as f64).collect()
}

fn propagate_core(
    schedule: &Schedule,
    noise: Option<&NoiseRealization>,
    step: f64,
) -> Result<CMatrix> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(SimError::invalid(
            "execution.step",
            format!("must be a positive finite number, got {step}"),
        ));
    }
    if let Some(r) = noise {
        if r.n_qubits() != schedule.n_qubits {
            return Err(SimError::invalid(
                "noise",
                format!(
                    "realization covers {} qubits but the schedule drives {}",
                    r.n_qubits(),
                    schedule.n_qubits
                ),
            ));
        }
    }
    let n = schedule.n_qubits;
    let dim = 1usize << n;
    let ops: Vec<(usize, RMatrix)> = schedule
        .fields
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.train.pulses().is_empty())
        .map(|(i, f)| (i, control_operator(&f.kind, n)))
        .collect();
    let zdiags: Vec<Vec<f64>> = (0..n).map(|j| z_diagonal(j, n)).collect();

    let n_steps = step_count(schedule.duration, step);
    let dt = schedule.duration / n_steps as f64;
    let mut u = identity(dim);
    let mut h = RMatrix::zeros(dim, dim);
    for s in 0..n_steps {
        let t_mid = (s as f64 + 0.5) * dt;
        h.fill(0.0);
        for (fi, op) in &ops {
            // Fold dt into the coefficients so `h` is already H·dt.
            let c = schedule.fields[*fi].train.envelope(t_mid) * dt;
            if c != 0.0 {
                h.as_mut_slice()
                    .iter_mut()
                    .zip(op.as_slice())
                    .for_each(|(hv, ov)| *hv += c * ov);
            }
        }
        if let Some(r) = noise {
            for (j, zd) in zdiags.iter().enumerate() {
                let d = 0.5 * r.at_time(j, t_mid) * dt;
                for (i, z) in zd.iter().enumerate() {
                    h[(i, i)] += d * z;
                }
            }
        }
        apply_exp_neg_i_sym(&h, &mut u);
    }
    let defect = unitarity_defect(&u);
    if defect > 1e-9 {
        return Err(SimError::Numerical(format!(
            "propagator lost unitarity (defect {defect:.3e} after {n_steps} steps of {dt:.3e})"
        )));
    }
    Ok(u)
}

/// Full-duration propagator without noise.
pub fn noiseless_unitary(schedule: &Schedule, step: f64) -> Result<CMatrix> {
    propagate_core(schedule, None, step)
}

/// Full-duration propagator along one sampled noise trajectory.
pub fn propagate_unitary(
    schedule: &Schedule,
    realization: &NoiseRealization,
    step: f64,
) -> Result<CMatrix> {
    propagate_core(schedule, Some(realization), step)
}

/// Seed for ensemble member `index`, derived so the stream neither depends
/// on worker count nor collides across indices.
pub fn realization_seed(master_seed: u64, index: usize) -> u64 {
    rng::derive_seed(master_seed, rng::DOMAIN_NOISE, index as u64)
}

/// Samples ensemble member `index` and propagates through it.
pub fn realization_unitary(
    schedule: &Schedule,
    model: &NoiseModel,
    master_seed: u64,
    index: usize,
    step: f64,
) -> Result<CMatrix> {
    let grid = time_grid(schedule, step);
    let r = model.sample_realization(&grid, realization_seed(master_seed, index))?;
    propagate_unitary(schedule, &r, step)
}

/// Ensemble-averaged density matrix with per-entry statistics.
#[derive(Clone, Debug)]
pub struct MonteCarloDensity {
    /// Mean density matrix in the computational basis.
    pub mean: CMatrix,
    /// Per-entry standard error of the complex mean.
    pub std_err: RMatrix,
    pub n_realizations: usize,
}

/// Propagates `rho0` through `n_realizations` sampled trajectories and
/// averages. Realizations are independent work items (parallelized), but
/// the averaging uses a fixed pairwise reduction in index order, so the
/// result is bit-identical at any worker count.
pub fn monte_carlo_density(
    schedule: &Schedule,
    model: &NoiseModel,
    rho0: &CMatrix,
    n_realizations: usize,
    seed: u64,
    options: &EvolutionOptions,
) -> Result<MonteCarloDensity> {
    let dim = 1usize << schedule.n_qubits;
    check_state_shape(rho0, dim)?;
    if n_realizations < 2 {
        return Err(SimError::invalid(
            "execution.realizations",
            format!("need at least 2 realizations for error bars, got {n_realizations}"),
        ));
    }
    let step = options.step.unwrap_or_else(|| default_step(schedule, model.t_c));
    let samples: Vec<(CMatrix, RMatrix)> = (0..n_realizations)
        .into_par_iter()
        .map(|r| -> Result<(CMatrix, RMatrix)> {
            let u = realization_unitary(schedule, model, seed, r, step)?;
            let rho = &u * rho0 * u.adjoint();
            let abs2 = RMatrix::from_fn(dim, dim, |i, j| rho[(i, j)].norm_sqr());
            Ok((rho, abs2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rhos, abs2s): (Vec<CMatrix>, Vec<RMatrix>) = samples.into_iter().unzip();
    let n = n_realizations as f64;
    let mean = pairwise_sum(&rhos).map(|z| z / n);
    let m2 = pairwise_sum(&abs2s);
    let std_err = RMatrix::from_fn(dim, dim, |i, j| {
        let var = (m2[(i, j)] - n * mean[(i, j)].norm_sqr()).max(0.0) / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(MonteCarloDensity { mean, std_err, n_realizations })
}

/// Register partition induced by a schedule: every driven pair becomes a
/// Bell site, every other qubit a single site.
pub fn layout_from_schedule(schedule: &Schedule) -> Result<DressedBasis> {
    let pairs = schedule.pairs();
    let mut sites = Vec::new();
    let mut absorbed = vec![false; schedule.n_qubits];
    for q in 0..schedule.n_qubits {
        if absorbed[q] {
            continue;
        }
        if let Some(&(a, b)) = pairs.iter().find(|(a, _)| *a == q) {
            sites.push(Site::pair(a, b)?);
            absorbed[b] = true;
        } else {
            sites.push(Site::Single(q));
        }
    }
    DressedBasis::new(sites)
}

/// One collective noise channel in the dressed interaction picture.
struct Channel<'a> {
    /// Dressed index pairs `(lower, upper)` connected by the channel's
    /// raising operator `E⁺ = Σ |lower⟩⟨upper|`.
    flips: Vec<(usize, usize)>,
    /// Signed half-weights `(qubit, ±1/2)` with which the qubit
    /// trajectories enter the channel amplitude.
    support: Vec<(usize, f64)>,
    /// ε_e(t) of the channel.
    source: ModulationSource<'a>,
    /// Complex conjugate of ε_e(t) (winding negated).
    conj_source: ModulationSource<'a>,
}

fn channel_sources<'a>(
    field: Option<&'a crate::pulses::GateField>,
    winding: f64,
) -> (ModulationSource<'a>, ModulationSource<'a>) {
    match field {
        None => (ModulationSource::Constant, ModulationSource::Constant),
        Some(f) => (
            ModulationSource::Wound { field: f, winding },
            ModulationSource::Wound { field: f, winding: -winding },
        ),
    }
}

fn dressed_flips(basis: &DressedBasis, slot: usize, lo: usize, hi: usize) -> Vec<(usize, usize)> {
    let mut flips = Vec::new();
    for flat in 0..basis.dim() {
        let digits = basis.digits(flat);
        if digits[slot] == hi {
            let mut lowered = digits.clone();
            lowered[slot] = lo;
            flips.push((basis.flat(&lowered), flat));
        }
    }
    flips
}

fn build_channels<'a>(
    schedule: &'a Schedule,
    basis: &DressedBasis,
    winding: f64,
) -> Vec<Channel<'a>> {
    let mut channels = Vec::new();
    for (slot, site) in basis.sites().iter().enumerate() {
        match *site {
            Site::Single(q) => {
                let (source, conj_source) = channel_sources(schedule.single_field(q), winding);
                channels.push(Channel {
                    flips: dressed_flips(basis, slot, 0, 1),
                    support: vec![(q, 0.5)],
                    source,
                    conj_source,
                });
            }
            Site::Pair(a, b) => {
                let (source, conj_source) = channel_sources(schedule.psi_field(a, b), winding);
                channels.push(Channel {
                    flips: dressed_flips(basis, slot, 0, 1),
                    support: vec![(a, 0.5), (b, -0.5)],
                    source,
                    conj_source,
                });
                let (source, conj_source) = channel_sources(schedule.phi_field(a, b), winding);
                channels.push(Channel {
                    flips: dressed_flips(basis, slot, 2, 3),
                    support: vec![(a, 0.5), (b, 0.5)],
                    source,
                    conj_source,
                });
            }
        }
    }
    channels
}

fn raising_operator(flips: &[(usize, usize)], dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for &(lo, hi) in flips {
        m[(lo, hi)] = C64::new(1.0, 0.0);
    }
    m
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Density matrix at the end of the schedule to second order in the
/// system–noise coupling, in the computational basis.
///
/// The computation runs in the dressed interaction picture: the ideal
/// diagonal control phases are removed, each collective channel acquires
/// the modulation `e^{i·winding·φ(t)}` of its own field (`winding` is the
/// dressed-splitting convention factor, physically 2), and the leading
/// noise correction is a double commutator weighted by the channel-pair
/// dephasing kernels.
pub fn second_order_density(
    schedule: &Schedule,
    model: &NoiseModel,
    rho0: &CMatrix,
    winding: f64,
) -> Result<CMatrix> {
    let dim = 1usize << schedule.n_qubits;
    check_state_shape(rho0, dim)?;
    if model.n_qubits != schedule.n_qubits {
        return Err(SimError::invalid(
            "noise.n_qubits",
            format!(
                "noise model covers {} qubits but the schedule drives {}",
                model.n_qubits, schedule.n_qubits
            ),
        ));
    }
    let basis = layout_from_schedule(schedule)?;
    let v = basis.transform();
    let rho0_dressed = v.adjoint() * rho0 * &v;
    let t = schedule.duration;
    let channels = build_channels(schedule, &basis, winding);

    let mut rho = rho0_dressed.clone();
    for e in &channels {
        let e_plus = raising_operator(&e.flips, dim);
        let e_minus = e_plus.adjoint();
        for f in &channels {
            let weight: f64 = e
                .support
                .iter()
                .flat_map(|&(j, sj)| f.support.iter().map(move |&(k, sk)| sj * sk * model.xi[(j, k)]))
                .sum();
            if weight == 0.0 {
                continue;
            }
            let f_plus = raising_operator(&f.flips, dim);
            let f_minus = f_plus.adjoint();
            // K^{αβ} = ∫₀ᵀdt′∫₀^{t′}dt″ C_ef(t′−t″)·ε^α_e(t′)·ε^β_f(t″)
            let k_pm = j_weighted(model.gamma, model.t_c, weight, &e.source, &f.source, t);
            let k_pp = j_weighted(model.gamma, model.t_c, weight, &e.source, &f.conj_source, t);
            let terms: [(&CMatrix, &CMatrix, C64); 4] = [
                (&e_plus, &f_minus, k_pm),
                (&e_minus, &f_plus, k_pm.conj()),
                (&e_plus, &f_plus, k_pp),
                (&e_minus, &f_minus, k_pp.conj()),
            ];
            for (a, b, kernel) in terms {
                let inner = commutator(b, &rho0_dressed);
                rho -= commutator(a, &inner).map(|z| z * kernel);
            }
        }
    }

    let defect = hermiticity_defect(&rho);
    if defect > 1e-8 {
        return Err(SimError::Numerical(format!(
            "second-order density lost hermiticity (defect {defect:.3e})"
        )));
    }
    rho = (&rho + rho.adjoint()).map(|z| z * 0.5);

    // Undo the interaction picture (diagonal control phases in the dressed
    // basis), then return to computational coordinates.
    let phases = dressed_control_phases(schedule, &basis, t)?;
    for i in 0..dim {
        for j in 0..dim {
            rho[(i, j)] *= C64::from_polar(1.0, -(phases[i] - phases[j]));
        }
    }
    Ok(&v * rho * v.adjoint())
}

/// Accumulated control phase `θ_m = Σ_f φ_f(t)·b_f(m)` of each dressed
/// index, where `b_f` is the field operator's dressed eigenvalue (±1 on its
/// own doublet, 0 elsewhere). The ideal propagator is `diag(e^{−iθ_m})`.
fn dressed_control_phases(schedule: &Schedule, basis: &DressedBasis, t: f64) -> Result<Vec<f64>> {
    let mut phases = vec![0.0; basis.dim()];
    for field in &schedule.fields {
        let phi = field.train.phase(t);
        if phi == 0.0 {
            continue;
        }
        let (slot, lo, hi) = match field.kind {
            GateKind::Single(j) => (find_slot(basis, j)?, 0, 1),
            GateKind::TwoPsi(a, _) => (find_slot(basis, a)?, 0, 1),
            GateKind::TwoPhi(a, _) => (find_slot(basis, a)?, 2, 3),
        };
        for (flat, phase) in phases.iter_mut().enumerate() {
            let d = basis.digits(flat)[slot];
            if d == lo {
                *phase += phi;
            } else if d == hi {
                *phase -= phi;
            }
        }
    }
    Ok(phases)
}

fn find_slot(basis: &DressedBasis, q: usize) -> Result<usize> {
    basis
        .site_of(q)
        .ok_or_else(|| SimError::invalid("layout", format!("qubit {q} missing from the layout")))
}

fn check_state_shape(rho: &CMatrix, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(SimError::invalid(
            "initial_state",
            format!("expected a {dim}×{dim} density matrix, got {}×{}", rho.nrows(), rho.ncols()),
        ));
    }
    if hermiticity_defect(rho) > 1e-8 {
        return Err(SimError::invalid("initial_state", "density matrix is not hermitian"));
    }
    Ok(())
}

/// Outer product `|ψ⟩⟨ψ|`.
pub fn pure_density(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// Serializable density-matrix document: row-major `[re, im]` entries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityMatrixDoc {
    /// Which frame the entries are expressed in, `"computational"` or
    /// `"dressed"`.
    pub basis: String,
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

/// Flattens a density matrix into its document form.
pub fn density_to_doc(rho: &CMatrix, basis: &str) -> DensityMatrixDoc {
    let dim = rho.nrows();
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            entries.push([rho[(i, j)].re, rho[(i, j)].im]);
        }
    }
    DensityMatrixDoc { basis: basis.to_string(), dim, entries }
}

/// Rebuilds the matrix, validating the claimed shape.
pub fn density_from_doc(doc: &DensityMatrixDoc) -> Result<CMatrix> {
    if doc.entries.len() != doc.dim * doc.dim {
        return Err(SimError::invalid(
            "density.entries",
            format!("expected {} entries for dim {}, got {}", doc.dim * doc.dim, doc.dim, doc.entries.len()),
        ));
    }
    Ok(CMatrix::from_fn(doc.dim, doc.dim, |i, j| {
        let [re, im] = doc.entries[i * doc.dim + j];
        C64::new(re, im)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::free_dephasing_integral;
    use crate::linalg::{kron, max_abs_diff};
    use crate::pulses::{design_pulse_train, GateField, GaussianPulseTrain, PulseConstraints};
    use std::f64::consts::PI;

    const CONSTRAINTS: PulseConstraints = PulseConstraints { omega_max: 1.0, sigma_min: 0.5 };

    fn idle_field(q: usize, duration: f64) -> GateField {
        GateField::new(
            GateKind::Single(q),
            GaussianPulseTrain::empty(CONSTRAINTS),
            0.0,
            duration,
        )
        .unwrap()
    }

    fn idle_schedule(n_qubits: usize, duration: f64) -> Schedule {
        let fields = (0..n_qubits).map(|q| idle_field(q, duration)).collect();
        Schedule::new(fields, n_qubits, duration).unwrap()
    }

    fn cvec(amps: &[C64]) -> CVector {
        CVector::from_column_slice(amps)
    }

    fn up() -> CVector {
        // (i|e⟩ + |g⟩)/√2 with |g⟩ at index 0.
        cvec(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).map(|z| z / 2f64.sqrt())
    }

    fn down() -> CVector {
        cvec(&[C64::new(-1.0, 0.0), C64::new(0.0, 1.0)]).map(|z| z / 2f64.sqrt())
    }

    fn col_matrix(v: &CVector) -> CMatrix {
        CMatrix::from_columns(&[v.clone()])
    }

    #[test]
    fn idle_schedule_without_noise_is_the_identity() {
        let schedule = idle_schedule(1, 5.0);
        let u = noiseless_unitary(&schedule, 0.1).unwrap();
        assert!(max_abs_diff(&u, &identity(2)) < 1e-13);
    }

    #[test]
    fn quarter_turn_matches_the_closed_form_rotation() {
        let field =
            design_pulse_train(GateKind::Single(0), PI / 2.0, CONSTRAINTS, 1, None).unwrap();
        let t = field.duration;
        let schedule = Schedule::new(vec![field], 1, t).unwrap();
        let u = noiseless_unitary(&schedule, default_step(&schedule, f64::INFINITY)).unwrap();
        // exp(−i(π/2)σ_x) = −i·σ_x
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 0.0),
            ],
        );
        assert!(max_abs_diff(&u, &want) < 1e-8, "{:.3e}", max_abs_diff(&u, &want));
    }

    #[test]
    fn storage_plus_gate_sequence_reaches_its_target_state() {
        // Angles {2π, π/4, 7π/4} drive (i|e⟩+|g⟩)/√2 ⊗ |e⟩ ⊗ (i|e⟩−|g⟩)/√2
        // to i·[(i|e⟩+|g⟩)/√2]⊗[(i|e⟩+|g⟩)/√2]⊗|g⟩, global phase included.
        let targets = [2.0 * PI, PI / 4.0, 7.0 * PI / 4.0];
        let t_min: Vec<f64> = targets
            .iter()
            .enumerate()
            .map(|(q, &a)| {
                design_pulse_train(GateKind::Single(q), a, CONSTRAINTS, 1, None)
                    .unwrap()
                    .duration
            })
            .collect();
        let duration = t_min.iter().cloned().fold(0.0, f64::max);
        let fields: Vec<GateField> = targets
            .iter()
            .enumerate()
            .map(|(q, &a)| {
                design_pulse_train(GateKind::Single(q), a, CONSTRAINTS, 1, Some(duration)).unwrap()
            })
            .collect();
        let schedule = Schedule::new(fields, 3, duration).unwrap();
        let u = noiseless_unitary(&schedule, default_step(&schedule, f64::INFINITY)).unwrap();

        let e = cvec(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let g = cvec(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let initial = kron(&kron(&col_matrix(&up()), &col_matrix(&e)), &col_matrix(&down()));
        let target = kron(&kron(&col_matrix(&up()), &col_matrix(&up())), &col_matrix(&g))
            .map(|z| z * C64::new(0.0, 1.0));
        let final_state = &u * initial;
        let overlap: C64 = (target.adjoint() * &final_state)[(0, 0)];
        assert!(
            (overlap - C64::new(1.0, 0.0)).norm() < 1e-5,
            "overlap {overlap}"
        );
    }

    #[test]
    fn uncontrolled_coherence_decays_by_the_dephasing_integral() {
        let model = NoiseModel::uniform(0.2, 1.0, 1, 0.0).unwrap();
        let schedule = idle_schedule(1, 4.0);
        let plus = cvec(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).map(|z| z / 2f64.sqrt());
        let rho0 = pure_density(&plus);
        let out = monte_carlo_density(
            &schedule,
            &model,
            &rho0,
            1500,
            421,
            &EvolutionOptions { step: Some(0.01) },
        )
        .unwrap();
        let want = 0.5 * (-free_dephasing_integral(0.2, 1.0, 4.0)).exp();
        let got = out.mean[(1, 0)];
        let tol = 3.0 * out.std_err[(1, 0)] + 1e-3;
        assert!(
            (got.re - want).abs() < tol && got.im.abs() < tol,
            "got {got}, want {want} ± {tol:.4}"
        );
        // The ensemble mean of unitary orbits stays a unit-trace hermitian
        // matrix to rounding.
        assert!(hermiticity_defect(&out.mean) < 1e-12);
        assert!((out.mean[(0, 0)].re + out.mean[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfectly_correlated_noise_leaves_the_singlet_untouched() {
        let model = NoiseModel::uniform(0.5, 0.8, 2, 1.0).unwrap();
        let schedule = idle_schedule(2, 3.0);
        let grid = time_grid(&schedule, 0.05);
        let r = model.sample_realization(&grid, 99).unwrap();
        let u = propagate_unitary(&schedule, &r, 0.05).unwrap();
        // |Ψ−⟩ = (|eg⟩ − |ge⟩)/√2, computational indices 2 and 1.
        let singlet = cvec(&[
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .map(|z| z / 2f64.sqrt());
        let out = &u * &singlet;
        let overlap: C64 = (singlet.adjoint() * &out)[(0, 0)];
        assert!((overlap.norm() - 1.0).abs() < 1e-10, "overlap {overlap}");
    }

    #[test]
    fn monte_carlo_mean_agrees_with_the_second_order_density() {
        let field =
            design_pulse_train(GateKind::Single(0), 2.0 * PI, CONSTRAINTS, 1, None).unwrap();
        let t = field.duration;
        let schedule = Schedule::new(vec![field], 1, t).unwrap();
        let model = NoiseModel::uniform(0.002, 5.0, 1, 0.0).unwrap();
        let plus = cvec(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).map(|z| z / 2f64.sqrt());
        let rho0 = pure_density(&plus);
        let mc = monte_carlo_density(&schedule, &model, &rho0, 800, 7, &EvolutionOptions::default())
            .unwrap();
        let pert = second_order_density(&schedule, &model, &rho0, 2.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let tol = 3.0 * mc.std_err[(i, j)] + 2e-3;
                assert!(
                    (mc.mean[(i, j)] - pert[(i, j)]).norm() < tol,
                    "entry ({i},{j}): mc {} vs pert {}, tol {tol:.4}",
                    mc.mean[(i, j)],
                    pert[(i, j)]
                );
            }
        }
    }

    #[test]
    fn second_order_correction_scales_linearly_with_noise_power() {
        let field =
            design_pulse_train(GateKind::Single(0), PI / 4.0, CONSTRAINTS, 1, None).unwrap();
        let t = field.duration;
        let schedule = Schedule::new(vec![field], 1, t).unwrap();
        let plus = cvec(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).map(|z| z / 2f64.sqrt());
        let rho0 = pure_density(&plus);
        let ideal = {
            let quiet = NoiseModel::uniform(1e-12, 2.0, 1, 0.0).unwrap();
            second_order_density(&schedule, &quiet, &rho0, 2.0).unwrap()
        };
        let gamma = 0.01;
        let m1 = NoiseModel::uniform(gamma, 2.0, 1, 0.0).unwrap();
        let m2 = NoiseModel::uniform(2.0 * gamma, 2.0, 1, 0.0).unwrap();
        let c1 = second_order_density(&schedule, &m1, &rho0, 2.0).unwrap() - &ideal;
        let c2 = second_order_density(&schedule, &m2, &rho0, 2.0).unwrap() - &ideal;
        let scaled = c1.map(|z| z * 2.0);
        let denom = c2.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(denom > 1e-8, "correction unexpectedly tiny: {denom:.3e}");
        assert!(max_abs_diff(&c2, &scaled) < 1e-5 * denom);
    }

    #[test]
    fn halving_the_step_converges_at_second_order() {
        // A smooth synthetic trajectory separates the integrator's own
        // order of accuracy from the roughness of sampled noise paths
        // (which are only Hölder-1/2 and would mask it).
        let field =
            design_pulse_train(GateKind::Single(0), 2.0 * PI, CONSTRAINTS, 1, None).unwrap();
        let t = field.duration;
        let schedule = Schedule::new(vec![field], 1, t).unwrap();
        let fine = time_grid(&schedule, 0.0005);
        let delta = RMatrix::from_fn(1, fine.len(), |_, i| {
            let tt = fine[i];
            0.4 * (1.3 * tt).sin() + 0.25 * (2.1 * tt + 0.7).cos()
        });
        let r = NoiseRealization { grid: fine, delta, seed: 0 };
        let step = 0.16;
        let u1 = propagate_unitary(&schedule, &r, step).unwrap();
        let u2 = propagate_unitary(&schedule, &r, step / 2.0).unwrap();
        let u4 = propagate_unitary(&schedule, &r, step / 4.0).unwrap();
        let e1 = max_abs_diff(&u1, &u4);
        let e2 = max_abs_diff(&u2, &u4);
        let ratio = e1 / e2;
        assert!(
            (3.0..7.0).contains(&ratio),
            "expected ~4x error reduction per halving, got {ratio:.2} (e1={e1:.3e}, e2={e2:.3e})"
        );
        assert!(e2 < 5e-4, "e2 = {e2:.3e}");
    }

    #[test]
    fn monte_carlo_is_deterministic_in_the_seed() {
        let model = NoiseModel::uniform(0.3, 1.0, 1, 0.0).unwrap();
        let schedule = idle_schedule(1, 2.0);
        let plus = cvec(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).map(|z| z / 2f64.sqrt());
        let rho0 = pure_density(&plus);
        let opts = EvolutionOptions { step: Some(0.05) };
        let a = monte_carlo_density(&schedule, &model, &rho0, 64, 11, &opts).unwrap();
        let b = monte_carlo_density(&schedule, &model, &rho0, 64, 11, &opts).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_err, b.std_err);
        let c = monte_carlo_density(&schedule, &model, &rho0, 64, 12, &opts).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn noisy_propagation_stays_unitary() {
        let model = NoiseModel::uniform(0.4, 0.7, 2, 0.5).unwrap();
        let schedule = idle_schedule(2, 6.0);
        let u = realization_unitary(&schedule, &model, 17, 3, 0.02).unwrap();
        assert!(unitarity_defect(&u) < 1e-10);
    }

    #[test]
    fn density_document_round_trips_through_json() {
        let plus = cvec(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).map(|z| z / 2f64.sqrt());
        let rho = pure_density(&plus);
        let doc = density_to_doc(&rho, "computational");
        let text = serde_json::to_string_pretty(&doc).unwrap();
        for key in ["\"basis\"", "\"dim\"", "\"entries\""] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
        let parsed: DensityMatrixDoc = serde_json::from_str(&text).unwrap();
        let back = density_from_doc(&parsed).unwrap();
        assert!(max_abs_diff(&back, &rho) < 1e-15);

        let bad = DensityMatrixDoc { basis: "computational".into(), dim: 3, entries: vec![[0.0; 2]; 4] };
        assert!(density_from_doc(&bad).is_err());
    }

    #[test]
    fn layouts_pair_the_driven_qubits_and_dress_the_rest() {
        let duration = 4.0;
        let psi = GateField::new(
            GateKind::two_psi(1, 2).unwrap(),
            GaussianPulseTrain::empty(CONSTRAINTS),
            0.0,
            duration,
        )
        .unwrap();
        let schedule = Schedule::new(vec![idle_field(0, duration), psi], 3, duration).unwrap();
        let basis = layout_from_schedule(&schedule).unwrap();
        assert_eq!(basis.sites(), &[Site::Single(0), Site::Pair(1, 2)]);
    }
}
