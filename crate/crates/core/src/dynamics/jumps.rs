//! Bohr frequencies and eigenbasis jump operators for σx-coupled baths.

use crate::error::{validation, Result};
use crate::numerics::{conjugate, conjugate_adjoint, sigma_x, ComplexMatrix, Spectrum, C64, ZERO};

/// Default tolerance for treating two energy gaps as equal.
pub const OMEGA_TOL: f64 = 1e-9;

/// Matrix elements below this magnitude are treated as exact zeros.
pub(crate) const ELEMENT_FLOOR: f64 = 1e-13;

/// A positive Bohr frequency and the eigenpairs `(m, n)` with `ε_m − ε_n = ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrTransition {
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

/// Positive gaps of the spectrum, clustered within `omega_tol` and sorted ascending.
pub fn bohr_frequencies(s: &Spectrum, omega_tol: f64) -> Vec<BohrTransition> {
    let e = &s.eigenvalues;
    let mut gaps = Vec::new();
    for m in 0..e.len() {
        for n in 0..e.len() {
            let g = e[m] - e[n];
            if g > omega_tol {
                gaps.push((g, m, n));
            }
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out: Vec<BohrTransition> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (g, m, n) in gaps {
        if g - anchor > omega_tol {
            if let Some(last) = out.last_mut() {
                last.omega = sum / last.pairs.len() as f64;
            }
            anchor = g;
            sum = 0.0;
            out.push(BohrTransition {
                omega: g,
                pairs: Vec::new(),
            });
        }
        sum += g;
        out.last_mut().unwrap().pairs.push((m, n));
    }
    if let Some(last) = out.last_mut() {
        last.omega = sum / last.pairs.len() as f64;
    }
    out
}

/// `V† σx^j V`, the bath coupling of site `j` in the eigenbasis.
pub fn eigenbasis_coupling(s: &Spectrum, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    if site == 0 || site > n_sites {
        return validation(format!("site {site} outside 1..={n_sites}"));
    }
    Ok(conjugate_adjoint(&s.eigenvectors, &sigma_x(site, n_sites)))
}

/// `A_j(ω) = Σ_{(m,n)} |ε_n⟩⟨ε_n|σx^j|ε_m⟩⟨ε_m|` for each transition, in the
/// computational basis.
pub fn build_jump_operators(
    s: &Spectrum,
    site: usize,
    n_sites: usize,
    transitions: &[BohrTransition],
) -> Result<Vec<(f64, ComplexMatrix)>> {
    let x = eigenbasis_coupling(s, site, n_sites)?;
    let d = s.dim();
    Ok(transitions
        .iter()
        .map(|tr| {
            let mut a = ComplexMatrix::from_element(d, d, ZERO);
            for &(m, n) in &tr.pairs {
                a[(n, m)] = x[(n, m)];
            }
            (tr.omega, conjugate(&s.eigenvectors, &a))
        })
        .collect())
}

/// How eigenpairs are bundled into jump operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpGrouping {
    /// One operator per eigenpair `(m, n)`.
    PerPair,
    /// One operator per Bohr frequency, summing every pair sharing the gap.
    ByFrequency,
}

/// A single dissipative channel `rate · 𝒟[A]`, with `A = Σ a |r⟩⟨c|` stored
/// sparsely in the energy eigenbasis.
#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub site: usize,
    /// Signed energy change of the bath: positive for decay, negative for excitation.
    pub omega: f64,
    pub rate: f64,
    pub elements: Vec<(usize, usize, C64)>,
}

impl JumpChannel {
    /// The operator in the computational basis.
    pub fn operator(&self, s: &Spectrum) -> ComplexMatrix {
        let d = s.dim();
        let mut a = ComplexMatrix::from_element(d, d, ZERO);
        for &(r, c, v) in &self.elements {
            a[(r, c)] += v;
        }
        conjugate(&s.eigenvectors, &a)
    }
}

/// Decay channels at rate `κ` and their KMS partners at `κ e^{−ω/T}`.
pub fn jump_channels(
    s: &Spectrum,
    n_sites: usize,
    kappa: f64,
    temperature: f64,
    grouping: JumpGrouping,
    omega_tol: f64,
) -> Result<Vec<JumpChannel>> {
    let transitions = bohr_frequencies(s, omega_tol);
    let mut out = Vec::new();
    if kappa == 0.0 {
        return Ok(out);
    }
    for site in 1..=n_sites {
        let x = eigenbasis_coupling(s, site, n_sites)?;
        for tr in &transitions {
            let up_rate = kappa * (-tr.omega / temperature).exp();
            let live: Vec<(usize, usize, C64)> = tr
                .pairs
                .iter()
                .filter(|&&(m, n)| x[(n, m)].norm() > ELEMENT_FLOOR)
                .map(|&(m, n)| (n, m, x[(n, m)]))
                .collect();
            if live.is_empty() {
                continue;
            }
            let groups: Vec<Vec<(usize, usize, C64)>> = match grouping {
                JumpGrouping::PerPair => live.into_iter().map(|e| vec![e]).collect(),
                JumpGrouping::ByFrequency => vec![live],
            };
            for down in groups {
                let up = down.iter().map(|&(n, m, v)| (m, n, v.conj())).collect();
                out.push(JumpChannel {
                    site,
                    omega: tr.omega,
                    rate: kappa,
                    elements: down,
                });
                if up_rate > 0.0 {
                    out.push(JumpChannel {
                        site,
                        omega: -tr.omega,
                        rate: up_rate,
                        elements: up,
                    });
                }
            }
        }
    }
    Ok(out)
}
