//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major). Products go
//! through `matrixmultiply::zgemm`, which is several times faster than the
//! generic nalgebra kernel for complex entries.

mod density;
mod pauli;
mod spectrum;

pub use density::{
    fidelity, partial_trace, random_density_matrix, von_neumann_entropy, DensityMatrix, ENTROPY_EIGEN_FLOOR, PSD_SLACK,
};
pub use pauli::{basis_bit, sigma_x, sigma_y, sigma_z, site_operator, Pauli};
pub use spectrum::{eig_hermitian, operator_function, Spectrum};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Tolerance for Hermiticity and unit-trace checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// `a * b` through the zgemm kernel.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "matmul: inner dimensions differ ({k} vs {k2})");
    let mut c = ComplexMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex64 is #[repr(C)] { re, im }, layout-identical to [f64; 2].
    // All three buffers are contiguous column-major with the given shapes.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `u * x * u†`.
pub fn conjugate(u: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    matmul(&matmul(u, x), &u.adjoint())
}

/// `u† * x * u`.
pub fn conjugate_adjoint(u: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    matmul(&matmul(&u.adjoint(), x), u)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius norm of `m - m†`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    matmul(a, b) - matmul(b, a)
}
