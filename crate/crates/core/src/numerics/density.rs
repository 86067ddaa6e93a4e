use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    eig_hermitian, hermiticity_error, matmul, operator_function, trace, ComplexMatrix, C64, HERMITIAN_TOL, ZERO,
};
use crate::error::{Error, Result};

/// Eigenvalues down to `-PSD_SLACK` are accepted as round-off and clipped to zero.
pub const PSD_SLACK: f64 = 1e-9;

/// Eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_EIGEN_FLOOR: f64 = 1e-14;

/// Trace-one, Hermitian, positive-semidefinite matrix on a qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::check(&matrix, PSD_SLACK)?;
        Ok(DensityMatrix { matrix })
    }

    /// Divides by the trace, then validates.
    pub fn normalized(matrix: ComplexMatrix) -> Result<Self> {
        let tr = trace(&matrix).re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize matrix with trace {tr}")));
        }
        Self::new(matrix.map(|z| z / tr))
    }

    /// Validates with a caller-chosen negative-eigenvalue slack.
    pub fn with_psd_slack(matrix: ComplexMatrix, slack: f64) -> Result<Self> {
        Self::check(&matrix, slack)?;
        Ok(DensityMatrix { matrix })
    }

    /// Skips validation; callers guarantee the invariants (hot loops only).
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::Validation("pure state with zero norm".into()));
        }
        let dim = psi.len();
        let m = ComplexMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj() / norm);
        Self::new(m)
    }

    /// Computational-basis projector `|index⟩⟨index|`.
    pub fn basis_state(index: usize, dim: usize) -> Self {
        let mut m = ComplexMatrix::from_element(dim, dim, ZERO);
        m[(index, index)] = C64::new(1.0, 0.0);
        DensityMatrix { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: ComplexMatrix::identity(dim, dim).map(|z| z / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Eigenvalues ascending, with round-off negatives clipped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_hermitian(&self.matrix)
            .map(|s| s.eigenvalues.into_iter().map(|e| e.max(0.0)).collect())
            .unwrap_or_default()
    }

    /// Diagonal in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    fn check(m: &ComplexMatrix, slack: f64) -> Result<()> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Validation(format!(
                "density matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = hermiticity_error(m);
        if herm > HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian: ‖ρ−ρ†‖_F = {herm:.3e}"
            )));
        }
        let tr = trace(m);
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::Validation(format!("density matrix trace is {tr}, expected 1")));
        }
        let s = eig_hermitian(m)?;
        if s.min() < -slack {
            return Err(Error::Numerical(format!(
                "density matrix has eigenvalue {:.3e} below -{slack:e}",
                s.min()
            )));
        }
        Ok(())
    }
}

fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let s = eig_hermitian(m)?;
    operator_function(&s, |e| C64::new(e.max(0.0).sqrt(), 0.0))
}

/// Uhlmann fidelity `(Tr √(√a b √a))²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Validation(format!(
            "fidelity: dimension mismatch ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    let root = psd_sqrt(a.matrix())?;
    let inner = matmul(&matmul(&root, b.matrix()), &root);
    let inner = (&inner + inner.adjoint()).map(|z| z * 0.5);
    let s = eig_hermitian(&inner)?;
    let f: f64 = s.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).sum();
    Ok((f * f).clamp(0.0, 1.0))
}

/// Natural-log von Neumann entropy.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s = match eig_hermitian(rho.matrix()) {
        Ok(s) => s,
        Err(_) => return f64::NAN,
    };
    s.eigenvalues
        .iter()
        .filter(|&&p| p > ENTROPY_EIGEN_FLOOR)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Reduced state on the 1-based sites in `keep`.
///
/// The reduced register keeps the original site order, the lowest kept
/// site being the most significant bit.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if !dim.is_power_of_two() {
        return Err(Error::Validation(format!("partial_trace: dim {dim} is not 2^N")));
    }
    let n = dim.trailing_zeros() as usize;
    if keep.is_empty() {
        return Err(Error::Validation("partial_trace: keep-set is empty".into()));
    }
    let mut sites: Vec<usize> = keep.to_vec();
    sites.sort_unstable();
    sites.dedup();
    if sites.iter().any(|&s| s == 0 || s > n) {
        return Err(Error::Validation(format!(
            "partial_trace: sites {keep:?} outside 1..={n}"
        )));
    }
    let traced: Vec<usize> = (1..=n).filter(|s| !sites.contains(s)).collect();
    let k = sites.len();
    let sub = 1usize << k;
    let env = 1usize << traced.len();

    // full index from (kept bits, traced bits), each MSB-first over its site list
    let compose = |kept: usize, rest: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &s) in sites.iter().enumerate() {
            let bit = (kept >> (k - 1 - pos)) & 1;
            idx |= bit << (n - s);
        }
        for (pos, &s) in traced.iter().enumerate() {
            let bit = (rest >> (traced.len() - 1 - pos)) & 1;
            idx |= bit << (n - s);
        }
        idx
    };

    let m = rho.matrix();
    let mut out = ComplexMatrix::from_element(sub, sub, ZERO);
    for i in 0..sub {
        for j in 0..sub {
            let mut acc = ZERO;
            for e in 0..env {
                acc += m[(compose(i, e), compose(j, e))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// Random full-rank state `G G† / Tr(G G†)` with complex Gaussian `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = matmul(&g, &g.adjoint());
    let tr = trace(&m).re;
    let m = m.map(|z| z / tr);
    let m = (&m + m.adjoint()).map(|z| z * 0.5);
    DensityMatrix::from_trusted(m)
}
