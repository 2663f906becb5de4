//! Small dense linear-algebra helpers shared by the control, estimation and
//! scheduling code. Everything works on dynamically sized `nalgebra`
//! matrices; the systems handled here are tiny (n ≤ 10).

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn asymmetry(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// Trace of the product `A·B` without forming it.
pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Eigenvalues of a symmetric matrix (symmetrized first), ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Solves `S X = B` for symmetric positive definite `S` via Cholesky.
/// Returns `None` when the factorization fails.
pub fn cholesky_solve(s: &Mat, b: &Mat) -> Option<Mat> {
    let chol = symmetrize(s).cholesky()?;
    Some(chol.solve(b))
}

/// A factor `F` with `F Fᵀ = Σ` for a symmetric PSD matrix, built from the
/// eigendecomposition so singular covariances are allowed.
pub fn psd_factor(cov: &Mat) -> Mat {
    let eig = symmetrize(cov).symmetric_eigen();
    let mut f = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.max(0.0).sqrt();
        f.column_mut(j).scale_mut(scale);
    }
    f
}

/// Clamps the spectrum of a symmetric matrix from below. The input is
/// returned untouched when it already satisfies the floor.
pub fn clamp_min_eigenvalue(m: &Mat, floor: f64) -> Mat {
    let sym = symmetrize(m);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return m.clone();
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let u = &eig.eigenvectors;
    let rebuilt = u * Mat::from_diagonal(&clamped) * u.transpose();
    symmetrize(&rebuilt)
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Builds a matrix from row slices; panics on ragged input.
pub fn mat_from_rows(rows: &[&[f64]]) -> Mat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nrows, ncols, |i, j| {
        assert_eq!(rows[i].len(), ncols, "ragged matrix rows");
        rows[i][j]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_product_matches_dense() {
        let a = mat_from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat_from_rows(&[&[0.5, -1.0], &[2.0, 0.25]]);
        assert!((trace_product(&a, &b) - (&a * &b).trace()).abs() < 1e-15);
    }

    #[test]
    fn psd_factor_reconstructs_singular_covariance() {
        let cov = mat_from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let f = psd_factor(&cov);
        assert!(max_abs(&(&f * f.transpose() - &cov)) < 1e-12);
    }

    #[test]
    fn clamp_leaves_pd_input_alone() {
        let m = mat_from_rows(&[&[2.0, 0.1], &[0.1, 1.0]]);
        assert_eq!(clamp_min_eigenvalue(&m, 1e-12), m);
        let z = Mat::zeros(2, 2);
        let c = clamp_min_eigenvalue(&z, 1e-12);
        assert!((min_symmetric_eigenvalue(&c) - 1e-12).abs() < 1e-20);
    }

    #[test]
    fn block_diag_places_blocks() {
        let d = block_diag(&[Mat::identity(2, 2), Mat::from_element(1, 1, 3.0)]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(2, 2)], 3.0);
        assert_eq!(d[(0, 2)], 0.0);
    }
}
