//! Fidelity measures and ensemble-averaged gate quality.

use crate::error::{Result, SimError};
use crate::evolution::{realization_unitary, default_step, EvolutionOptions};
use crate::linalg::{hermiticity_defect, pairwise_sum_f64, sqrtm_psd, trace, C64, CMatrix, CVector};
use crate::noise::NoiseModel;
use crate::pulses::Schedule;
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// State fidelity `Tr(ρ_t^{1/2}·ρ̄·ρ_t^{1/2})` between a target state and an
/// achieved (generally mixed) state.
///
/// For a pure target this reduces to `⟨ψ|ρ̄|ψ⟩`. Both inputs must be
/// hermitian and equally sized; the target must be positive semidefinite.
pub fn fidelity(target: &CMatrix, achieved: &CMatrix) -> Result<f64> {
    if target.nrows() != target.ncols() || target.shape() != achieved.shape() {
        return Err(SimError::invalid(
            "fidelity",
            format!("shape mismatch: {:?} vs {:?}", target.shape(), achieved.shape()),
        ));
    }
    for (name, m) in [("target", target), ("achieved", achieved)] {
        if hermiticity_defect(m) > 1e-8 {
            return Err(SimError::invalid("fidelity", format!("{name} state is not hermitian")));
        }
    }
    let root = sqrtm_psd(target, 1e-10)
        .map_err(|neg| SimError::Numerical(format!("target state has negative eigenvalue {neg:.3e}")))?;
    Ok(trace(&(&root * achieved * &root)).re)
}

/// Infidelity `1 − F`.
pub fn infidelity(target: &CMatrix, achieved: &CMatrix) -> Result<f64> {
    Ok(1.0 - fidelity(target, achieved)?)
}

/// Overlap `⟨ψ|ρ|ψ⟩` for a pure target — the fast path used in sampling
/// loops.
pub fn fidelity_pure(psi: &CVector, rho: &CMatrix) -> f64 {
    let bra = psi.adjoint();
    (&bra * rho * psi)[(0, 0)].re
}

/// A state drawn from the unitarily invariant (Haar) measure: a normalized
/// vector of iid complex Gaussians.
pub fn haar_state(dim: usize, rng: &mut impl Rng) -> CVector {
    let mut v = CVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v /= C64::new(norm, 0.0);
    v
}

/// Result of a sampled state-averaged gate-fidelity estimate.
#[derive(Clone, Copy, Debug)]
pub struct AverageFidelity {
    pub fidelity: f64,
    /// Standard error of the mean across noise realizations.
    pub std_err: f64,
    pub n_realizations: usize,
    pub n_states: usize,
}

/// Average gate fidelity by joint sampling: for each noise realization the
/// register is propagated once, and fresh Haar-random initial states score
/// `|⟨ψ|U_target†·U_realization|ψ⟩|²`. The per-realization means carry both
/// noise and state-draw fluctuations, so their spread gives an honest
/// standard error.
pub fn average_fidelity_mc(
    schedule: &Schedule,
    model: &NoiseModel,
    target: &CMatrix,
    n_realizations: usize,
    n_states: usize,
    seed: u64,
    options: &EvolutionOptions,
) -> Result<AverageFidelity> {
    let dim = 1usize << schedule.n_qubits;
    if target.nrows() != dim || target.ncols() != dim {
        return Err(SimError::invalid(
            "target",
            format!("expected a {dim}×{dim} unitary, got {}×{}", target.nrows(), target.ncols()),
        ));
    }
    if n_realizations < 2 || n_states == 0 {
        return Err(SimError::invalid(
            "execution",
            format!(
                "need at least 2 realizations and 1 state per realization, got {n_realizations} and {n_states}"
            ),
        ));
    }
    let step = options.step.unwrap_or_else(|| default_step(schedule, model.t_c));
    let target_dag = target.adjoint();
    let per_realization: Vec<f64> = (0..n_realizations)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let u = realization_unitary(schedule, model, seed, r, step)?;
            let m = &target_dag * u;
            let scores: Vec<f64> = (0..n_states)
                .map(|s| {
                    let idx = r as u64 * n_states as u64 + s as u64;
                    let mut state_rng = rng::stream(seed, rng::DOMAIN_STATE, idx);
                    let psi = haar_state(dim, &mut state_rng);
                    let amp = (psi.adjoint() * &m * &psi)[(0, 0)];
                    amp.norm_sqr()
                })
                .collect();
            Ok(pairwise_sum_f64(&scores) / n_states as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_realizations as f64;
    let mean = pairwise_sum_f64(&per_realization) / n;
    let squares: Vec<f64> = per_realization.iter().map(|f| (f - mean) * (f - mean)).collect();
    let var = pairwise_sum_f64(&squares) / (n - 1.0);
    Ok(AverageFidelity {
        fidelity: mean,
        std_err: (var / n).sqrt(),
        n_realizations,
        n_states,
    })
}

/// Serializable record of one fidelity evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Which pulse sequence or configuration produced the number.
    pub sequence: String,
    /// `"mc"`, `"second_order"`, or a closed-form label.
    pub method: String,
    pub fidelity: f64,
    pub error: f64,
    /// Sampling error when the method is statistical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_realizations: Option<usize>,
    /// Schedule duration the number refers to.
    pub duration: f64,
}
