use nalgebra::SymmetricEigen;

use super::{hermiticity_error, matmul, ComplexMatrix, C64, HERMITIAN_TOL};
use crate::error::{Error, Result};

/// Eigendecomposition `M = V diag(ε) V†` of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Assembles a spectrum from externally computed eigenpairs, sorting them ascending.
    ///
    /// Ties keep their input order, so a caller that diagonalizes symmetry
    /// sectors separately controls the basis inside degenerate levels.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: ComplexMatrix) -> Self {
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let dim = eigenvectors.nrows();
        let vals = order.iter().map(|&i| eigenvalues[i]).collect();
        let vecs = ComplexMatrix::from_fn(dim, order.len(), |r, c| eigenvectors[(r, order[c])]);
        Spectrum {
            eigenvalues: vals,
            eigenvectors: vecs,
        }
    }

    /// `V diag(ε) V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        operator_function(self, |e| C64::new(e, 0.0)).expect("identity map is finite")
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::Validation(format!(
            "eig_hermitian: matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let dim = m.nrows();
    if dim == 0 {
        return Err(Error::Validation("eig_hermitian: empty matrix".into()));
    }
    let scale = super::frobenius_norm(m).max(1.0);
    let herm = hermiticity_error(m);
    if herm > HERMITIAN_TOL * scale {
        return Err(Error::Validation(format!(
            "eig_hermitian: matrix is not Hermitian (‖M−M†‖_F = {herm:.3e})"
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation("eig_hermitian: non-finite entry".into()));
    }
    // Symmetrize so round-off in the input does not leak into the solver.
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 100_000).ok_or_else(|| {
        Error::Numerical(format!(
            "eig_hermitian: eigensolver did not converge for a {dim}x{dim} matrix"
        ))
    })?;
    Ok(Spectrum::from_parts(
        eig.eigenvalues.iter().copied().collect(),
        eig.eigenvectors,
    ))
}

/// `V diag(f(ε)) V†`.
pub fn operator_function<F>(s: &Spectrum, f: F) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> C64,
{
    let mut scaled = s.eigenvectors.clone();
    for (j, &e) in s.eigenvalues.iter().enumerate() {
        let w = f(e);
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(Error::Numerical(format!(
                "operator_function: f({e}) = {w} is not finite"
            )));
        }
        for z in scaled.column_mut(j).iter_mut() {
            *z *= w;
        }
    }
    Ok(matmul(&scaled, &s.eigenvectors.adjoint()))
}
