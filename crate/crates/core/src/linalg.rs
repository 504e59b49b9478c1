//! Small dense linear-algebra helpers.

use nalgebra::{DMatrix, SymmetricEigen};

/// `λ_max(AᵀA)`, computed from whichever Gram matrix (`AᵀA` or `AAᵀ`) is
/// smaller; both share their nonzero spectrum.
pub fn gram_lambda_max(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() { a * a.transpose() } else { a.transpose() * a };
    SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_wide_matrices() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0]);
        assert!((gram_lambda_max(&a) - 9.0).abs() < 1e-12);
        // rank-one wide matrix: λ = ‖row‖²
        let wide = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        assert!((gram_lambda_max(&wide) - 9.0).abs() < 1e-12);
    }
}
