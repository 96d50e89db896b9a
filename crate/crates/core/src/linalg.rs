//! Dense complex linear algebra helpers.
//!
//! Registers are at most a handful of qubits, so all state is kept in dense
//! `nalgebra` matrices over `Complex<f64>`. The helpers here are the few
//! operations the rest of the crate leans on: Hermitian matrix exponentials
//! (for unitary steps), positive-semidefinite square roots (for fidelities)
//! and deterministic pairwise reductions (for ensemble averages that must not
//! depend on the worker count).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const I: C64 = Complex::new(0.0, 1.0);
pub const ONE: C64 = Complex::new(1.0, 0.0);
pub const ZERO: C64 = Complex::new(0.0, 0.0);

/// Maximum absolute deviation from Hermiticity, `max |m - m†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(-i h dt)` for Hermitian `h`, computed through the eigendecomposition
/// `h = V Λ V†` so the result is unitary to machine precision.
pub fn expm_neg_i_hermitian(h: &CMatrix, dt: f64) -> CMatrix {
    let se = h.clone().symmetric_eigen();
    let mut scaled = se.eigenvectors.clone();
    for (j, &lambda) in se.eigenvalues.iter().enumerate() {
        let phase = (-I * (lambda * dt)).exp();
        for v in scaled.column_mut(j).iter_mut() {
            *v *= phase;
        }
    }
    &scaled * se.eigenvectors.adjoint()
}

/// Applies `exp(-i h dt)` to a set of column vectors in place:
/// `cols <- exp(-i h dt) cols`. One eigendecomposition, two small GEMMs.
pub fn apply_expm_neg_i_hermitian(h: &CMatrix, dt: f64, cols: &mut CMatrix) {
    let se = h.clone().symmetric_eigen();
    let mut work = se.eigenvectors.adjoint() * &*cols;
    for (j, &lambda) in se.eigenvalues.iter().enumerate() {
        let phase = (-I * (lambda * dt)).exp();
        for v in work.row_mut(j).iter_mut() {
            *v *= phase;
        }
    }
    *cols = &se.eigenvectors * work;
}

/// Hermitian eigenvalues, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
/// Eigenvalues in `[-clip, 0)` are treated as zero; anything below `-clip`
/// is reported as the offending eigenvalue.
pub fn sqrtm_psd(m: &CMatrix, clip: f64) -> Result<CMatrix, f64> {
    let se = m.clone().symmetric_eigen();
    let mut scaled = se.eigenvectors.clone();
    for (j, &lambda) in se.eigenvalues.iter().enumerate() {
        if lambda < -clip {
            return Err(lambda);
        }
        let root = lambda.max(0.0).sqrt();
        for v in scaled.column_mut(j).iter_mut() {
            *v *= C64::new(root, 0.0);
        }
    }
    Ok(&scaled * se.eigenvectors.adjoint())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `cos(m)` and `sin(m)` for a real symmetric `m`, so that
/// `exp(-i m) = cos(m) - i sin(m)`.
///
/// Every Hamiltonian in this crate has real entries (real pulse envelopes,
/// real diagonal noise shifts), which makes this the propagation hot path:
/// real Paterson–Stockmeyer polynomials plus angle doubling are several times
/// cheaper than a complex eigendecomposition per step, and `cos² + sin² = 1`
/// holds to truncation error so norms survive millions of steps.
pub fn cos_sin_sym(m: &RMatrix) -> (RMatrix, RMatrix) {
    let dim = m.nrows();
    // Scale until the 1-norm is small enough for the order-12/13 series.
    let norm = m
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let doublings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(doublings as i32);

    let p = &scaled * &scaled;
    let p2 = &p * &p;
    let p3 = &p2 * &p;
    let id = RMatrix::identity(dim, dim);

    // cos: Σ_{k=0..6} (-1)^k p^k / (2k)!
    let c_lo = &id - &p / 2.0 + &p2 / 24.0 - &p3 / 720.0;
    let c_hi = &id / 40320.0 - &p / 3_628_800.0 + &p2 / 479_001_600.0;
    let mut cos = c_lo + &p3 * (&p * c_hi);
    // sin: scaled · Σ_{k=0..6} (-1)^k p^k / (2k+1)!
    let s_lo = &id - &p / 6.0 + &p2 / 120.0 - &p3 / 5040.0;
    let s_hi = &id / 362_880.0 - &p / 39_916_800.0 + &p2 / 6_227_020_800.0;
    let mut sin = &scaled * (s_lo + &p3 * (&p * s_hi));

    for _ in 0..doublings {
        let c2 = 2.0 * (&cos * &cos) - &id;
        sin = 2.0 * (&sin * &cos);
        cos = c2;
    }
    (cos, sin)
}

/// Applies `exp(-i m)` (real symmetric `m`) to complex columns in place.
pub fn apply_exp_neg_i_sym(m: &RMatrix, cols: &mut CMatrix) {
    let (cos, sin) = cos_sin_sym(m);
    let dim = m.nrows();
    let ncols = cols.ncols();
    let mut out = CMatrix::zeros(dim, ncols);
    for c in 0..ncols {
        for r in 0..dim {
            let mut acc = ZERO;
            for k in 0..dim {
                acc += C64::new(cos[(r, k)], -sin[(r, k)]) * cols[(k, c)];
            }
            out[(r, c)] = acc;
        }
    }
    cols.copy_from(&out);
}

/// Kronecker product in register order: the first factor owns the most
/// significant digits of the composite index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Deterministic pairwise sum of matrices. The reduction tree depends only
/// on the slice length, never on thread scheduling, so ensemble averages
/// reproduce bit-for-bit at any worker count.
pub fn pairwise_sum<T>(items: &[nalgebra::DMatrix<T>]) -> nalgebra::DMatrix<T>
where
    T: nalgebra::Scalar + std::ops::Add<Output = T> + num_complex::ComplexFloat,
{
    assert!(!items.is_empty(), "pairwise_sum of empty slice");
    fn go<T>(items: &[nalgebra::DMatrix<T>]) -> nalgebra::DMatrix<T>
    where
        T: nalgebra::Scalar + std::ops::Add<Output = T> + num_complex::ComplexFloat,
    {
        match items.len() {
            1 => items[0].clone(),
            2 => items[0].zip_map(&items[1], |a, b| a + b),
            n => {
                let mid = n / 2;
                let (left, right) = (go(&items[..mid]), go(&items[mid..]));
                left.zip_map(&right, |a, b| a + b)
            }
        }
    }
    go(items)
}

/// Same reduction tree for plain floats.
pub fn pairwise_sum_f64(items: &[f64]) -> f64 {
    match items.len() {
        0 => 0.0,
        1 => items[0],
        2 => items[0] + items[1],
        n => {
            let mid = n / 2;
            pairwise_sum_f64(&items[..mid]) + pairwise_sum_f64(&items[mid..])
        }
    }
}

/// `max |a - b|` over entries, used throughout the tests.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Frobenius norm of the deviation from unitarity, `|U†U - 1|_max`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let dim = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &identity(dim))
}
