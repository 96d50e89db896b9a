//! Correlated dephasing noise: model definition, correlation functions,
//! spectra, and sampling of Gaussian trajectories with exact stationary
//! statistics.
//!
//! Each qubit `j` sees a zero-mean stationary Gaussian frequency shift
//! `δ_j(t)` with exponential autocorrelation
//! `Φ_jk(τ) = (γ/t_c)·e^{−|τ|/t_c}·ξ[j][k]`, where the overlap matrix `ξ`
//! sets how strongly different qubits' noise is correlated (0 = independent,
//! 1 = identical). Trajectories are sampled with the exact discrete-time
//! update of the exponential-correlation process, so the statistics hold at
//! any grid spacing, and cross-correlation is injected by mixing independent
//! drivers through a pivot-clipped Cholesky factor of `ξ`.

use crate::error::{Result, SimError};
use crate::linalg::{RMatrix, RVector};
use crate::rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;

/// Eigenvalues of `ξ` may dip this far below zero before the matrix is
/// rejected as not positive semidefinite (roundoff allowance).
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Stationary Gaussian dephasing model for an `n_qubits` register.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    /// Asymptotic dephasing rate γ (inverse time).
    pub gamma: f64,
    /// Correlation time of the noise.
    pub t_c: f64,
    /// Cross-dephasing overlap matrix: symmetric, unit diagonal, entries in
    /// [0, 1], positive semidefinite.
    pub xi: RMatrix,
    /// Register size; always equals the dimension of `xi`.
    pub n_qubits: usize,
}

/// Outcome of checking a [`NoiseModel`] against its invariants.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    /// Human-readable description of each violated invariant.
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl NoiseModel {
    /// Builds a model, rejecting it if any invariant fails.
    pub fn new(gamma: f64, t_c: f64, xi: RMatrix) -> Result<Self> {
        let n_qubits = xi.nrows();
        let model = NoiseModel { gamma, t_c, xi, n_qubits };
        let report = model.validate();
        if let Some(first) = report.violations.first() {
            return Err(SimError::invalid("noise", first.clone()));
        }
        Ok(model)
    }

    /// Model with a constant off-diagonal overlap (unit diagonal).
    pub fn uniform(gamma: f64, t_c: f64, n_qubits: usize, off_diag: f64) -> Result<Self> {
        let xi = RMatrix::from_fn(n_qubits, n_qubits, |i, j| if i == j { 1.0 } else { off_diag });
        NoiseModel::new(gamma, t_c, xi)
    }

    /// Checks every model invariant and lists violations without failing.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.n_qubits;
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            report.violations.push(format!("gamma must be positive and finite, got {}", self.gamma));
        }
        if !(self.t_c > 0.0) || !self.t_c.is_finite() {
            report.violations.push(format!("t_c must be positive and finite, got {}", self.t_c));
        }
        if self.xi.nrows() != n || self.xi.ncols() != n {
            report
                .violations
                .push(format!("xi must be {n}x{n}, got {}x{}", self.xi.nrows(), self.xi.ncols()));
            return report; // shape is a precondition for the remaining checks
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.xi[(i, j)];
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    report.violations.push(format!("xi[{i}][{j}] = {v} outside [0, 1]"));
                }
                if (self.xi[(i, j)] - self.xi[(j, i)]).abs() > 1e-14 {
                    report.violations.push(format!(
                        "xi not symmetric at ({i},{j}): {} vs {}",
                        self.xi[(i, j)],
                        self.xi[(j, i)]
                    ));
                }
            }
            if (self.xi[(i, i)] - 1.0).abs() > 1e-14 {
                report.violations.push(format!("xi[{i}][{i}] = {} but diagonal must be 1", self.xi[(i, i)]));
            }
        }
        if report.violations.is_empty() {
            let min_eig = self
                .xi
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -PSD_TOLERANCE {
                report.violations.push(format!(
                    "xi is not positive semidefinite; minimum eigenvalue = {min_eig:.6e}"
                ));
            }
        }
        report
    }

    /// Two-point correlation `Φ_jk(τ) = (γ/t_c)·e^{−|τ|/t_c}·ξ[j][k]`.
    pub fn correlation(&self, j: usize, k: usize, tau: f64) -> Result<f64> {
        self.check_indices(j, k)?;
        Ok(self.gamma / self.t_c * (-tau.abs() / self.t_c).exp() * self.xi[(j, k)])
    }

    /// Noise spectrum `G_jk(ω) = γ·ξ[j][k] / (π·(1 + ω²t_c²))`, the Fourier
    /// transform `(2π)^{-1}∫Φ_jk(τ)e^{iωτ}dτ` of the correlation function.
    pub fn spectrum(&self, j: usize, k: usize, omega: f64) -> Result<f64> {
        self.check_indices(j, k)?;
        let w = omega * self.t_c;
        Ok(self.gamma * self.xi[(j, k)] / (std::f64::consts::PI * (1.0 + w * w)))
    }

    /// Standard deviation of each `δ_j(t)` in the stationary state: √(γ/t_c).
    pub fn stationary_std(&self) -> f64 {
        (self.gamma / self.t_c).sqrt()
    }

    /// Lower-triangular mixing factor `L` with `L·Lᵀ = ξ`.
    ///
    /// Plain Cholesky with pivots clipped at zero, which extends the
    /// factorization to singular PSD matrices: when a pivot vanishes the
    /// whole column is zeroed, so perfectly correlated qubits (`ξ_jk = 1`)
    /// reuse each other's driver bit for bit.
    pub fn mixing_factor(&self) -> Result<RMatrix> {
        let report = self.validate();
        if let Some(v) = report.violations.first() {
            return Err(SimError::invalid("noise.xi", v.clone()));
        }
        let n = self.n_qubits;
        let mut l = RMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self.xi[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d < PSD_TOLERANCE {
                // Rank-deficient direction: for a PSD matrix the residual
                // column is zero too, so skip it rather than divide by ~0.
                continue;
            }
            let pivot = d.sqrt();
            l[(j, j)] = pivot;
            for i in (j + 1)..n {
                let mut v = self.xi[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / pivot;
            }
        }
        Ok(l)
    }

    /// Samples one jointly Gaussian trajectory set on `grid`.
    ///
    /// The marginal of each qubit is the exact exponential-correlation
    /// process (update `δ(t+Δ) = δ(t)·e^{−Δ/t_c} + √(Φ(0)(1−e^{−2Δ/t_c}))·η`,
    /// initialized from the stationary distribution), and equal-time
    /// cross-covariance is `Φ(0)·ξ` exactly. Deterministic in `seed`.
    pub fn sample_realization(&self, grid: &[f64], seed: u64) -> Result<NoiseRealization> {
        validate_grid(grid)?;
        let l = self.mixing_factor()?;
        let n = self.n_qubits;
        let mut rng = rng::stream(seed, rng::DOMAIN_NOISE, 0);
        let draw = |rng: &mut rand_chacha::ChaCha12Rng| {
            RVector::from_fn(n, |_, _| StandardNormal.sample(rng))
        };
        let sd = self.stationary_std();
        let mut u = &l * draw(&mut rng); // stationary start, unit marginal variance
        let mut delta = RMatrix::zeros(n, grid.len());
        delta.column_mut(0).copy_from(&(&u * sd));
        for i in 1..grid.len() {
            let dt = grid[i] - grid[i - 1];
            let a = (-dt / self.t_c).exp();
            let b = (1.0 - a * a).sqrt();
            u = u * a + (&l * draw(&mut rng)) * b;
            delta.column_mut(i).copy_from(&(&u * sd));
        }
        Ok(NoiseRealization { grid: grid.to_vec(), delta, seed })
    }

    fn check_indices(&self, j: usize, k: usize) -> Result<()> {
        if j >= self.n_qubits || k >= self.n_qubits {
            return Err(SimError::invalid(
                "qubit index",
                format!("({j}, {k}) out of range for {} qubits", self.n_qubits),
            ));
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(SimError::invalid("grid", "time grid is empty"));
    }
    if grid[0] != 0.0 {
        return Err(SimError::invalid("grid", format!("grid must start at 0, got {}", grid[0])));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(SimError::invalid(
                "grid",
                format!("grid must be strictly increasing, got {} after {}", w[1], w[0]),
            ));
        }
    }
    Ok(())
}

/// One sampled set of dephasing trajectories `δ_j(t_i)` on a shared grid.
#[derive(Clone, Debug)]
pub struct NoiseRealization {
    /// Strictly increasing sample times starting at 0.
    pub grid: Vec<f64>,
    /// Row `j`, column `i` holds `δ_j(t_i)` in angular-frequency units.
    pub delta: RMatrix,
    /// Seed this realization was drawn with.
    pub seed: u64,
}

impl NoiseRealization {
    /// Number of qubits (trajectories).
    pub fn n_qubits(&self) -> usize {
        self.delta.nrows()
    }

    /// `δ_j` at grid node `i`.
    pub fn value(&self, j: usize, i: usize) -> f64 {
        self.delta[(j, i)]
    }

    /// `δ_j(t)` linearly interpolated between grid nodes; clamps to the end
    /// values outside the grid range.
    pub fn at_time(&self, j: usize, t: f64) -> f64 {
        let grid = &self.grid;
        let last = grid.len() - 1;
        if t <= grid[0] {
            return self.delta[(j, 0)];
        }
        if t >= grid[last] {
            return self.delta[(j, last)];
        }
        // First node strictly greater than t; its predecessor exists.
        let hi = grid.partition_point(|&g| g <= t);
        let lo = hi - 1;
        let w = (t - grid[lo]) / (grid[hi] - grid[lo]);
        self.delta[(j, lo)] * (1.0 - w) + self.delta[(j, hi)] * w
    }

    /// Difference combination `δ_a(t_i) − δ_b(t_i)` (drives the
    /// antisymmetric pair channel).
    pub fn pair_diff(&self, a: usize, b: usize, i: usize) -> f64 {
        self.delta[(a, i)] - self.delta[(b, i)]
    }

    /// Sum combination `δ_a(t_i) + δ_b(t_i)` (drives the symmetric pair
    /// channel).
    pub fn pair_sum(&self, a: usize, b: usize, i: usize) -> f64 {
        self.delta[(a, i)] + self.delta[(b, i)]
    }

    /// CSV dump with columns `t,delta_1..delta_N`.
    pub fn to_csv(&self) -> String {
        let n = self.n_qubits();
        let mut out = String::from("t");
        for j in 1..=n {
            let _ = write!(out, ",delta_{j}");
        }
        out.push('\n');
        for (i, t) in self.grid.iter().enumerate() {
            let _ = write!(out, "{t}");
            for j in 0..n {
                let _ = write!(out, ",{}", self.delta[(j, i)]);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model_1q(gamma: f64, t_c: f64) -> NoiseModel {
        NoiseModel::uniform(gamma, t_c, 1, 0.0).unwrap()
    }

    fn uniform_grid(t_end: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect()
    }

    #[test]
    fn correlation_closed_form_values() {
        let m = model_1q(0.1, 2.0);
        assert_abs_diff_eq!(m.correlation(0, 0, 0.0).unwrap(), 0.05, epsilon = 1e-15);

        let m = model_1q(0.1, 1.0);
        assert_abs_diff_eq!(
            m.correlation(0, 0, 1.0).unwrap(),
            0.1 * (-1.0f64).exp(), // 0.036787944...
            epsilon = 1e-15
        );

        let independent = NoiseModel::uniform(0.3, 0.7, 2, 0.0).unwrap();
        assert_eq!(independent.correlation(0, 1, 0.123).unwrap(), 0.0);
    }

    #[test]
    fn correlation_is_symmetric_in_lag_and_indices() {
        let m = NoiseModel::uniform(0.2, 1.5, 3, 0.4).unwrap();
        for tau in [0.0, 0.3, 2.0] {
            assert_eq!(m.correlation(0, 1, tau).unwrap(), m.correlation(1, 0, tau).unwrap());
            assert_eq!(m.correlation(0, 1, tau).unwrap(), m.correlation(0, 1, -tau).unwrap());
        }
    }

    #[test]
    fn spectrum_closed_form_values() {
        let m = model_1q(0.1, 1.0);
        assert_abs_diff_eq!(
            m.spectrum(0, 0, 0.0).unwrap(),
            0.1 / std::f64::consts::PI, // 0.0318310
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            m.spectrum(0, 0, 1.0).unwrap(), // ω = 1/t_c is the half-maximum point
            0.1 / (2.0 * std::f64::consts::PI), // 0.0159155
            epsilon = 1e-15
        );
        let independent = NoiseModel::uniform(0.1, 1.0, 2, 0.0).unwrap();
        for omega in [0.0, 0.5, 10.0] {
            assert_eq!(independent.spectrum(0, 1, omega).unwrap(), 0.0);
        }
    }

    #[test]
    fn spectrum_is_even_and_nonnegative() {
        let m = model_1q(0.2, 3.0);
        for omega in [0.1, 1.0, 7.5] {
            let plus = m.spectrum(0, 0, omega).unwrap();
            let minus = m.spectrum(0, 0, -omega).unwrap();
            assert_eq!(plus, minus);
            assert!(plus >= 0.0);
        }
    }

    #[test]
    fn spectrum_integrates_back_to_equal_time_correlation() {
        let m = model_1q(0.1, 2.0);
        let w = 40_000.0 / m.t_c; // Lorentzian tail beyond W is ~1.6e-5 relative
        let integral = crate::quad::integrate(
            |omega| m.spectrum(0, 0, omega).unwrap(),
            -w,
            w,
            1e-12,
            1e-7,
        );
        assert!(integral.converged);
        let phi0 = m.correlation(0, 0, 0.0).unwrap();
        assert!(
            (integral.value - phi0).abs() / phi0 < 1e-4,
            "integral {} vs correlation {}",
            integral.value,
            phi0
        );
    }

    #[test]
    fn index_out_of_range_is_rejected() {
        let m = model_1q(0.1, 1.0);
        assert!(m.correlation(0, 1, 0.0).is_err());
        assert!(m.spectrum(2, 0, 0.0).is_err());
    }

    #[test]
    fn validation_accepts_identity_overlap() {
        let m = NoiseModel::uniform(0.1, 1.0, 3, 0.0).unwrap();
        assert!(m.validate().is_valid());
    }

    #[test]
    fn validation_flags_out_of_range_entry() {
        let mut xi = RMatrix::identity(2, 2);
        xi[(0, 1)] = 1.5;
        xi[(1, 0)] = 1.5;
        let m = NoiseModel { gamma: 0.1, t_c: 1.0, xi, n_qubits: 2 };
        let report = m.validate();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.contains("outside [0, 1]")));
    }

    #[test]
    fn all_ones_overlap_is_valid_rank_one() {
        let m = NoiseModel::uniform(0.1, 1.0, 3, 1.0).unwrap();
        assert!(m.validate().is_valid());
        let mut eigs: Vec<f64> =
            m.xi.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        eigs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(eigs[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn non_psd_overlap_is_rejected_with_eigenvalue() {
        // Entries all in [0,1] yet indefinite: eigenvalue 1 − √2 ≈ −0.414.
        let xi = RMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let m = NoiseModel { gamma: 0.1, t_c: 1.0, xi, n_qubits: 3 };
        let report = m.validate();
        assert!(report.violations.iter().any(|v| v.contains("positive semidefinite")));
        let err = m.sample_realization(&uniform_grid(1.0, 4), 1).unwrap_err();
        assert!(err.to_string().contains("eigenvalue"), "unexpected error: {err}");
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let m = NoiseModel::uniform(0.1, 1.0, 2, 0.5).unwrap();
        let grid = uniform_grid(5.0, 50);
        let a = m.sample_realization(&grid, 42).unwrap();
        let b = m.sample_realization(&grid, 42).unwrap();
        assert_eq!(a.delta, b.delta);
        let c = m.sample_realization(&grid, 43).unwrap();
        assert_ne!(a.delta, c.delta);
    }

    #[test]
    fn maximal_overlap_collapses_to_collective_noise() {
        let m = NoiseModel::uniform(0.1, 1.0, 3, 1.0).unwrap();
        let grid = uniform_grid(5.0, 100);
        let r = m.sample_realization(&grid, 7).unwrap();
        for i in 0..grid.len() {
            // Bit-identical trajectories, not merely close.
            assert_eq!(r.value(0, i), r.value(1, i));
            assert_eq!(r.value(0, i), r.value(2, i));
            assert_eq!(r.pair_diff(0, 1, i), 0.0);
        }
    }

    #[test]
    fn grid_must_start_at_zero_and_increase() {
        let m = model_1q(0.1, 1.0);
        assert!(m.sample_realization(&[], 1).is_err());
        assert!(m.sample_realization(&[0.5, 1.0], 1).is_err());
        assert!(m.sample_realization(&[0.0, 1.0, 1.0], 1).is_err());
        assert!(m.sample_realization(&[0.0, 1.0, 0.5], 1).is_err());
    }

    #[test]
    fn stationary_variance_matches_the_model() {
        let m = model_1q(0.1, 1.0);
        let grid = uniform_grid(10.0, 20);
        let n_real = 100_000;
        let probe = grid.len() - 1;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for r in 0..n_real {
            let real = m.sample_realization(&grid, rng::derive_seed(9, 0, r)).unwrap();
            let v = real.value(0, probe);
            sum += v;
            sum_sq += v * v;
        }
        let n = n_real as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        let target = m.gamma / m.t_c; // 0.1
        // Variance estimator standard error: var·√(2/n).
        let se_var = target * (2.0 / n).sqrt();
        assert!((var - target).abs() < 3.0 * se_var, "var {var} vs {target} (3se = {})", 3.0 * se_var);
        // Mean of δ is zero within 3 standard errors.
        let se_mean = (target / n).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean} vs 0 (3se = {})", 3.0 * se_mean);
    }

    #[test]
    fn lagged_covariance_matches_correlation_function() {
        let m = model_1q(0.1, 1.0);
        let t_c = m.t_c;
        // Grid resolves lags of 0, t_c and 3·t_c from index offsets.
        let grid = uniform_grid(8.0, 16); // spacing 0.5
        let n_real = 20_000;
        let base = 4; // t = 2.0, well inside
        let offsets = [0usize, 2, 6]; // lags 0, 1·t_c, 3·t_c
        let mut acc = [0.0f64; 3];
        for r in 0..n_real {
            let real = m.sample_realization(&grid, rng::derive_seed(11, 0, r)).unwrap();
            let x = real.value(0, base);
            for (a, off) in acc.iter_mut().zip(offsets) {
                *a += x * real.value(0, base + off);
            }
        }
        let phi0 = m.correlation(0, 0, 0.0).unwrap();
        for (a, off) in acc.iter().zip(offsets) {
            let lag = 0.5 * off as f64;
            let want = m.correlation(0, 0, lag).unwrap();
            let got = a / n_real as f64;
            let se = phi0 * (2.0 / n_real as f64).sqrt();
            assert!(
                (got - want).abs() < 3.0 * se,
                "lag {lag} ({} t_c): cov {got} vs {want}",
                lag / t_c
            );
        }
    }

    #[test]
    fn cross_covariance_scales_linearly_with_overlap() {
        let grid = uniform_grid(4.0, 8);
        let probe = 4;
        let n_real = 20_000;
        for (case, xi) in [0.0, 0.5, 1.0].iter().enumerate() {
            let m = NoiseModel::uniform(0.1, 1.0, 2, *xi).unwrap();
            let mut acc = 0.0;
            for r in 0..n_real {
                let real = m
                    .sample_realization(&grid, rng::derive_seed(13 + case as u64, 0, r))
                    .unwrap();
                acc += real.value(0, probe) * real.value(1, probe);
            }
            let got = acc / n_real as f64;
            let want = xi * m.gamma / m.t_c;
            let se = (m.gamma / m.t_c) * (2.0 / n_real as f64).sqrt();
            assert!((got - want).abs() < 3.0 * se, "xi={xi}: cross-cov {got} vs {want}");
        }
    }

    #[test]
    fn interpolation_is_linear_between_nodes_and_clamped_outside() {
        let m = model_1q(0.1, 1.0);
        let grid = uniform_grid(2.0, 4);
        let r = m.sample_realization(&grid, 3).unwrap();
        let mid = r.at_time(0, 0.75);
        assert_abs_diff_eq!(mid, 0.5 * (r.value(0, 1) + r.value(0, 2)), epsilon = 1e-15);
        assert_eq!(r.at_time(0, -1.0), r.value(0, 0));
        assert_eq!(r.at_time(0, 99.0), r.value(0, 4));
        assert_eq!(r.at_time(0, 0.5), r.value(0, 1));
    }

    #[test]
    fn csv_dump_has_one_column_per_qubit() {
        let m = NoiseModel::uniform(0.1, 1.0, 2, 0.0).unwrap();
        let r = m.sample_realization(&uniform_grid(1.0, 2), 5).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,delta_1,delta_2");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn mixing_factor_reconstructs_the_overlap_matrix() {
        for off in [0.0, 0.3, 0.9, 1.0] {
            let m = NoiseModel::uniform(0.1, 1.0, 4, off).unwrap();
            let l = m.mixing_factor().unwrap();
            let back = &l * l.transpose();
            let max_err = (&back - &m.xi).abs().max();
            assert!(max_err < 1e-12, "off={off}: reconstruction error {max_err}");
        }
    }
}
