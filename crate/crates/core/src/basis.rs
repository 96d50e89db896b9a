//! Dressed product bases over a qubit register.
//!
//! The register is partitioned into *sites*: singles, whose dressed basis is
//! `|±⟩ = (|e⟩ ± |g⟩)/√2`, and pairs, whose dressed basis is the Bell set
//! `|Ψ±⟩ = (|eg⟩ ± |ge⟩)/√2`, `|Φ±⟩ = (|ee⟩ ± |gg⟩)/√2`. Collective
//! dephasing is block-structured in these bases — it couples `+ ↔ −`,
//! `Ψ+ ↔ Ψ−` (through the noise difference) and `Φ+ ↔ Φ−` (through the
//! noise sum) — which is what makes them the natural frame for both the
//! control fields and the perturbative error analysis.
//!
//! Computational conventions: a basis index is read as a bit string with
//! qubit 0 in the most significant position, bit value 1 meaning `|e⟩` and
//! 0 meaning `|g⟩`. Dressed indices are mixed-radix digit strings over the
//! sites in layout order (first site most significant), a single site
//! contributing a binary digit (`0 → +, 1 → −`) and a pair a quaternary one
//! (`0 → Ψ+, 1 → Ψ−, 2 → Φ+, 3 → Φ−`).

use crate::error::{Result, SimError};
use crate::linalg::{C64, CMatrix, CVector};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One element of a register partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    /// A lone qubit, dressed into `|±⟩`.
    Single(usize),
    /// Two qubits dressed into the Bell basis; always stored low-high.
    Pair(usize, usize),
}

impl Site {
    /// Builds an ordered pair site, rejecting degenerate pairs.
    pub fn pair(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(SimError::invalid(
                "layout",
                format!("pair site must join two distinct qubits, got ({a}, {a})"),
            ));
        }
        Ok(Site::Pair(a.min(b), a.max(b)))
    }

    /// Qubits belonging to this site, ascending.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Site::Single(q) => vec![*q],
            Site::Pair(a, b) => vec![*a, *b],
        }
    }

    /// Dressed-basis dimension of the site (2 or 4).
    pub fn dim(&self) -> usize {
        match self {
            Site::Single(_) => 2,
            Site::Pair(_, _) => 4,
        }
    }

    /// Amplitude `⟨local computational index | dressed digit⟩` within the
    /// site. Local indices are big-endian over the site's qubits.
    fn amplitude(&self, digit: usize, local: usize) -> f64 {
        match self {
            Site::Single(_) => match (digit, local) {
                // |+⟩ = (|e⟩+|g⟩)/√2, |−⟩ = (|e⟩−|g⟩)/√2, with |g⟩ local 0.
                (0, _) => FRAC_1_SQRT_2,
                (1, 0) => -FRAC_1_SQRT_2,
                (1, 1) => FRAC_1_SQRT_2,
                _ => unreachable!("digit out of range"),
            },
            Site::Pair(_, _) => {
                // Locals: 0=|gg⟩, 1=|ge⟩, 2=|eg⟩, 3=|ee⟩.
                match (digit, local) {
                    (0, 1) | (0, 2) => FRAC_1_SQRT_2,          // Ψ+
                    (1, 1) => -FRAC_1_SQRT_2,                  // Ψ− = (|eg⟩−|ge⟩)/√2
                    (1, 2) => FRAC_1_SQRT_2,
                    (2, 0) | (2, 3) => FRAC_1_SQRT_2,          // Φ+
                    (3, 0) => -FRAC_1_SQRT_2,                  // Φ− = (|ee⟩−|gg⟩)/√2
                    (3, 3) => FRAC_1_SQRT_2,
                    (d, _) if d < 4 => 0.0,
                    _ => unreachable!("digit out of range"),
                }
            }
        }
    }
}

/// A validated partition of `n_qubits` qubits into dressed sites.
#[derive(Clone, Debug)]
pub struct DressedBasis {
    sites: Vec<Site>,
    n_qubits: usize,
}

impl DressedBasis {
    /// Validates that the sites cover qubits `0..n` exactly once.
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(SimError::invalid("layout", "at least one site is required"));
        }
        let mut seen: Vec<usize> = sites.iter().flat_map(|s| s.qubits()).collect();
        let n_qubits = seen.len();
        seen.sort_unstable();
        for (want, got) in seen.iter().enumerate() {
            if *got != want {
                let message = if seen.iter().filter(|q| *q == got).count() > 1 {
                    format!("qubit {got} appears in more than one site")
                } else {
                    format!("qubit {want} is not covered by any site")
                };
                return Err(SimError::invalid("layout", message));
            }
        }
        Ok(DressedBasis { sites, n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension, 2^n.
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Splits a flat dressed index into per-site digits (layout order).
    pub fn digits(&self, flat: usize) -> Vec<usize> {
        let mut digits = vec![0; self.sites.len()];
        let mut rem = flat;
        for (slot, site) in self.sites.iter().enumerate().rev() {
            digits[slot] = rem % site.dim();
            rem /= site.dim();
        }
        debug_assert_eq!(rem, 0, "flat index out of range");
        digits
    }

    /// Packs per-site digits back into a flat dressed index.
    pub fn flat(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.sites.len());
        let mut flat = 0;
        for (site, digit) in self.sites.iter().zip(digits) {
            debug_assert!(*digit < site.dim());
            flat = flat * site.dim() + digit;
        }
        flat
    }

    /// Index of the site containing qubit `q`, if any.
    pub fn site_of(&self, q: usize) -> Option<usize> {
        self.sites.iter().position(|s| s.qubits().contains(&q))
    }

    /// The change-of-basis matrix `V` whose columns are the dressed basis
    /// vectors in computational coordinates: `v_comp = V · v_dressed` and
    /// `ρ_dressed = V† ρ_comp V`.
    pub fn transform(&self) -> CMatrix {
        let dim = self.dim();
        let mut v = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let digits = self.digits(col);
            for row in 0..dim {
                let mut amp = 1.0;
                for (site, digit) in self.sites.iter().zip(&digits) {
                    amp *= site.amplitude(*digit, self.local_index(site, row));
                    if amp == 0.0 {
                        break;
                    }
                }
                if amp != 0.0 {
                    v[(row, col)] = C64::new(amp, 0.0);
                }
            }
        }
        v
    }

    /// A dressed basis vector in computational coordinates.
    pub fn vector(&self, digits: &[usize]) -> CVector {
        let flat = self.flat(digits);
        self.transform().column(flat).into_owned()
    }

    /// Human-readable label of a dressed index, e.g. `+·Ψ−`.
    pub fn label(&self, flat: usize) -> String {
        const SINGLE: [&str; 2] = ["+", "-"];
        const PAIR: [&str; 4] = ["Psi+", "Psi-", "Phi+", "Phi-"];
        self.digits(flat)
            .iter()
            .zip(&self.sites)
            .map(|(d, s)| match s {
                Site::Single(_) => SINGLE[*d],
                Site::Pair(_, _) => PAIR[*d],
            })
            .collect::<Vec<_>>()
            .join("·")
    }

    /// Extracts the site-local computational index (big-endian over the
    /// site's qubits) from a full computational index.
    fn local_index(&self, site: &Site, comp: usize) -> usize {
        let n = self.n_qubits;
        site.qubits()
            .iter()
            .fold(0, |acc, q| (acc << 1) | ((comp >> (n - 1 - q)) & 1))
    }
}
