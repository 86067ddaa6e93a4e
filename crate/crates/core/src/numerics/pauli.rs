//! Single-site Pauli operators on an N-qubit register.
//!
//! Site 1 is the most significant bit of the computational-basis index, so
//! `|γ_1 γ_2 … γ_N⟩` has index `Σ γ_j 2^(N-j)`. Bit value 0 is the σ_z = +1
//! state.

use super::{ComplexMatrix, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Value (0 or 1) of `site` (1-based) in computational-basis `index`.
#[inline]
pub fn basis_bit(index: usize, site: usize, n_sites: usize) -> usize {
    (index >> (n_sites - site)) & 1
}

/// Full-register matrix of the Pauli operator acting on `site` (1-based).
pub fn site_operator(pauli: Pauli, site: usize, n_sites: usize) -> ComplexMatrix {
    assert!(site >= 1 && site <= n_sites, "site {site} outside 1..={n_sites}");
    let dim = 1usize << n_sites;
    let shift = n_sites - site;
    let mut m = ComplexMatrix::from_element(dim, dim, ZERO);
    for col in 0..dim {
        let b = (col >> shift) & 1;
        match pauli {
            Pauli::X => m[(col ^ (1 << shift), col)] = C64::new(1.0, 0.0),
            // σ_y|0⟩ = i|1⟩, σ_y|1⟩ = -i|0⟩
            Pauli::Y => {
                let v = if b == 0 {
                    C64::new(0.0, 1.0)
                } else {
                    C64::new(0.0, -1.0)
                };
                m[(col ^ (1 << shift), col)] = v;
            }
            Pauli::Z => m[(col, col)] = C64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0),
        }
    }
    m
}

pub fn sigma_x(site: usize, n_sites: usize) -> ComplexMatrix {
    site_operator(Pauli::X, site, n_sites)
}

pub fn sigma_y(site: usize, n_sites: usize) -> ComplexMatrix {
    site_operator(Pauli::Y, site, n_sites)
}

pub fn sigma_z(site: usize, n_sites: usize) -> ComplexMatrix {
    site_operator(Pauli::Z, site, n_sites)
}
