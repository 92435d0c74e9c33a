//! Dense complex linear algebra used by every other module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{VkError, VkResult};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const EPS_SPEC: f64 = 1e-9;
pub const EPS_PD: f64 = 1e-12;
pub const EPS_DET: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Frobenius norm.
pub fn norm(m: &ComplexMatrix) -> f64 {
    m.norm()
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn check_finite(m: &ComplexMatrix, what: &str) -> VkResult<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(VkError::InvalidInput(format!("{what} has a zero dimension")));
    }
    if !is_finite(m) {
        return Err(VkError::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub fn scalar(z: Complex64) -> ComplexMatrix {
    ComplexMatrix::from_element(1, 1, z)
}

pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A square matrix equal to its adjoint. Construction projects onto the
/// hermitian part after checking the defect is roundoff sized.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> VkResult<Self> {
        check_finite(&m, "hermitian matrix")?;
        if !m.is_square() {
            return Err(VkError::DimensionMismatch("hermitian matrix must be square".into()));
        }
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL * m.norm().max(1.0) {
            return Err(VkError::NonHermitian { defect });
        }
        Ok(HermitianMatrix(hermitian_part(&m)))
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> VkResult<ComplexMatrix> {
    if a.nrows() != b.nrows() || !a.is_square() {
        return Err(VkError::DimensionMismatch(format!(
            "solve: {}x{} against {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| VkError::Singular("LU factorization has a zero pivot".into()))?;
    if !is_finite(&x) {
        return Err(VkError::Singular("solution is not finite".into()));
    }
    Ok(x)
}

pub fn inverse(a: &ComplexMatrix) -> VkResult<ComplexMatrix> {
    solve(a, &identity(a.nrows()))
}

/// (λI − A)⁻¹, refusing λ closer than `EPS_SPEC·‖A‖` to the spectrum.
pub fn resolvent(a: &ComplexMatrix, lambda: Complex64) -> VkResult<ComplexMatrix> {
    let n = a.nrows();
    let shifted = identity(n) * lambda - a;
    let threshold = EPS_SPEC * a.norm();
    let collision = |distance| VkError::SpectrumCollision { lambda, distance };
    let r = inverse(&shifted).map_err(|_| collision(0.0))?;
    // 1/‖R‖_F is a lower bound for the smallest singular value of λI − A.
    let sigma_lower = 1.0 / r.norm();
    if sigma_lower <= threshold {
        let sigma_min = min_singular_value(&shifted);
        if sigma_min <= threshold {
            return Err(collision(sigma_min));
        }
    }
    Ok(r)
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn min_singular_value(m: &ComplexMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Unit vector u minimizing ‖uᴴM‖, with that minimum.
///
/// The complex SVD occasionally returns a loose U near rank deficiency, so
/// the smallest eigenvector of MMᴴ is computed as well and the candidate with
/// the smaller residual wins.
pub fn left_null_vector(m: &ComplexMatrix) -> (DVector<Complex64>, f64) {
    let residual = |x: &DVector<Complex64>| (x.adjoint() * m).norm();
    let eig = SymmetricEigen::new(m * m.adjoint());
    let (j, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let by_eig = eig.eigenvectors.column(j).into_owned().normalize();
    let mut best = (residual(&by_eig), by_eig);
    if m.nrows() <= m.ncols() {
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let by_svd = u.column(idx).into_owned().normalize();
        let r = residual(&by_svd);
        if r < best.0 {
            best = (r, by_svd);
        }
    }
    (best.1, best.0)
}

/// Eigenvalues from the complex Schur form.
pub fn eigenvalues(m: &ComplexMatrix) -> Vec<Complex64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let (_, t) = m.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn min_pairwise_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Positive square root of a hermitian positive definite matrix.
pub fn hermitian_sqrt(x: &ComplexMatrix) -> VkResult<ComplexMatrix> {
    let (vals, vecs) = positive_eigen(x)?;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| Complex64::from(v.sqrt())),
    ));
    Ok(hermitian_part(&(&vecs * d * vecs.adjoint())))
}

/// X^{-1/2} for hermitian positive definite X.
pub fn hermitian_inv_sqrt(x: &ComplexMatrix) -> VkResult<ComplexMatrix> {
    let (vals, vecs) = positive_eigen(x)?;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| Complex64::from(1.0 / v.sqrt())),
    ));
    Ok(hermitian_part(&(&vecs * d * vecs.adjoint())))
}

fn positive_eigen(x: &ComplexMatrix) -> VkResult<(Vec<f64>, ComplexMatrix)> {
    let h = HermitianMatrix::new(x.clone())?;
    let eig = SymmetricEigen::new(h.into_matrix());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= EPS_PD * x.norm() {
        return Err(VkError::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok((vals, eig.eigenvectors))
}

pub fn matrix_exp(m: &ComplexMatrix) -> ComplexMatrix {
    m.exp()
}

/// Solves X·A_pi − A_xi·X = Q for X (k×n) with A_pi n×n and A_xi k×k.
pub fn solve_sylvester(
    a_pi: &ComplexMatrix,
    a_xi: &ComplexMatrix,
    q: &ComplexMatrix,
) -> VkResult<ComplexMatrix> {
    let n = a_pi.nrows();
    let k = a_xi.nrows();
    if !a_pi.is_square() || !a_xi.is_square() || q.nrows() != k || q.ncols() != n {
        return Err(VkError::DimensionMismatch("sylvester operands".into()));
    }
    let ep = eigenvalues(a_pi);
    let ex = eigenvalues(a_xi);
    let mut gap = f64::INFINITY;
    for p in &ep {
        for x in &ex {
            gap = gap.min((p - x).norm());
        }
    }
    if gap <= EPS_SPEC * (a_pi.norm() + a_xi.norm()).max(f64::MIN_POSITIVE) {
        return Err(VkError::SpectraOverlap { gap });
    }
    let dim = n * k;
    let mut l = zeros(dim, dim);
    // Column-major vec: vec(XA) = (Aᵀ⊗I)vec X, vec(A_xi X) = (I⊗A_xi)vec X.
    for j in 0..n {
        for lcol in 0..n {
            let a = a_pi[(lcol, j)];
            if a != Complex64::from(0.0) {
                for i in 0..k {
                    l[(j * k + i, lcol * k + i)] += a;
                }
            }
        }
        for i in 0..k {
            for p in 0..k {
                l[(j * k + i, j * k + p)] -= a_xi[(i, p)];
            }
        }
    }
    let rhs = DMatrix::from_iterator(dim, 1, q.iter().copied());
    let v = solve(&l, &rhs).map_err(|_| VkError::SpectraOverlap { gap })?;
    Ok(DMatrix::from_iterator(k, n, v.iter().copied()))
}

pub fn sylvester_residual(
    x: &ComplexMatrix,
    a_pi: &ComplexMatrix,
    a_xi: &ComplexMatrix,
    q: &ComplexMatrix,
) -> f64 {
    (x * a_pi - a_xi * x - q).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_hermitian, random_matrix, rng};

    fn taylor_exp(m: &ComplexMatrix) -> ComplexMatrix {
        let n = m.nrows();
        let s = (m.norm().max(1.0).log2().ceil() as i32 + 4).max(0);
        let a = m.scale(0.5f64.powi(s));
        let mut term = identity(n);
        let mut sum = identity(n);
        for j in 1..30 {
            term = &term * &a / Complex64::from(j as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exp_matches_taylor() {
        let mut r = rng(3);
        for n in 1..6 {
            let m = random_matrix(&mut r, n, n).scale(2.0);
            let d = (matrix_exp(&m) - taylor_exp(&m)).norm() / taylor_exp(&m).norm();
            assert!(d < 1e-12, "n={n} d={d}");
        }
    }

    #[test]
    fn exp_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c64(0.0, 1.0), c64(-1.0, 0.0)]));
        let e = matrix_exp(&m);
        assert!((e[(0, 0)] - c64(1f64.cos(), 1f64.sin())).norm() < 1e-15);
        assert!((e[(1, 1)] - c64((-1f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn resolvent_inverts_shift() {
        let mut r = rng(1);
        let a = random_matrix(&mut r, 4, 4);
        let lam = c64(3.0, -1.0);
        let res = resolvent(&a, lam).unwrap();
        let back = (identity(4) * lam - &a) * res;
        assert!((back - identity(4)).norm() < 1e-12);
    }

    #[test]
    fn resolvent_rejects_eigenvalue() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c64(1.0, 2.0), c64(-3.0, 0.0)]));
        match resolvent(&a, c64(1.0, 2.0)) {
            Err(VkError::SpectrumCollision { .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(resolvent(&a, c64(1.0, 2.0 + 1e-6)).is_ok());
    }

    #[test]
    fn sqrt_squares_back() {
        let mut r = rng(5);
        let g = random_matrix(&mut r, 5, 5);
        let x = &g * g.adjoint() + identity(5);
        let y = hermitian_sqrt(&x).unwrap();
        assert!((&y * &y - &x).norm() < 1e-12 * x.norm());
        assert!(hermitian_defect(&y) < 1e-14);
        let yi = hermitian_inv_sqrt(&x).unwrap();
        assert!((&y * &yi - identity(5)).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![c64(1.0, 0.0), c64(-1.0, 0.0)]));
        assert!(matches!(hermitian_sqrt(&x), Err(VkError::NotPositiveDefinite { .. })));
        let y = DMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert!(matches!(hermitian_sqrt(&y), Err(VkError::NonHermitian { .. })));
    }

    #[test]
    fn sylvester_rectangular() {
        let mut r = rng(9);
        let a_pi = random_matrix(&mut r, 3, 3) - identity(3) * c64(4.0, 0.0);
        let a_xi = random_matrix(&mut r, 2, 2) + identity(2) * c64(4.0, 0.0);
        let q = random_matrix(&mut r, 2, 3);
        let x = solve_sylvester(&a_pi, &a_xi, &q).unwrap();
        assert!(sylvester_residual(&x, &a_pi, &a_xi, &q) < 1e-12);
    }

    #[test]
    fn sylvester_overlap_detected() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c64(1.0, 0.0), c64(2.0, 0.0)]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c64(2.0, 0.0)]));
        let q = zeros(1, 2);
        assert!(matches!(solve_sylvester(&a, &b, &q), Err(VkError::SpectraOverlap { .. })));
    }

    #[test]
    fn eigenvalues_of_triangular() {
        let mut m = zeros(3, 3);
        m[(0, 0)] = c64(1.0, 1.0);
        m[(1, 1)] = c64(-2.0, 0.5);
        m[(2, 2)] = c64(0.0, -3.0);
        m[(2, 0)] = c64(5.0, 0.0);
        m[(1, 0)] = c64(0.0, 2.0);
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c64(-2.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c64(0.0, -3.0)).norm() < 1e-12);
        assert!((ev[2] - c64(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn left_null_vector_finds_kernel() {
        let mut r = rng(2);
        let a = random_matrix(&mut r, 4, 4);
        let z = eigenvalues(&a)[1];
        let (v, s) = left_null_vector(&(&a - identity(4) * z));
        assert!(s < 1e-12);
        let vh = v.adjoint();
        assert!((&vh * &a - &vh * z).norm() < 1e-11);
    }

    #[test]
    fn hermitian_matrix_projects() {
        let mut r = rng(4);
        let h = random_hermitian(&mut r, 3);
        let mut p = h.clone();
        p[(0, 1)] += c64(1e-14, 0.0);
        let hm = HermitianMatrix::new(p).unwrap();
        assert_eq!(hermitian_defect(hm.as_matrix()), 0.0);
    }
}
