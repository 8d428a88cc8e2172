//! Dense linear-algebra helpers shared by the model, map and diagnostic modules.
//!
//! Sorted Hermitian eigendecompositions and norms over nalgebra; general
//! eigenvalues through faer.

use faer::complex_native::c64;
use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Embed a real matrix into the complex field.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn complexify_vec(v: &DVector<f64>) -> CVector {
    v.map(|x| C64::new(x, 0.0))
}

/// Real symmetric eigendecomposition with eigenvalues in ascending order.
pub fn sym_eigh(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    polished_eigh(m)
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
pub fn herm_eigh(m: CMatrix) -> (Vec<f64>, CMatrix) {
    polished_eigh(m)
}

const JACOBI_MAX_SWEEPS: usize = 12;

/// nalgebra's tridiagonal QR followed by Jacobi sweeps on `Q*AQ`.
///
/// The QR stage resolves 2×2 blocks with a cancelling formula, which leaves
/// eigenvector residuals near `1e-9` when an off-diagonal entry is small;
/// the Jacobi sweeps bring the residual back to rounding level.
fn polished_eigh<T>(m: DMatrix<T>) -> (Vec<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = m.nrows();
    let a = (&m + m.adjoint()) * T::from_real(0.5);
    let eig = SymmetricEigen::new(a.clone());
    let mut q = eig.eigenvectors;
    let mut b = q.adjoint() * &a * &q;
    let scale = (0..n).map(|i| b[(i, i)].modulus()).fold(0.0, f64::max);
    let threshold = 4.0 * f64::EPSILON * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for r in p + 1..n {
                let bpr = b[(p, r)];
                let beta = bpr.modulus();
                let app = b[(p, p)].real();
                let arr = b[(r, r)].real();
                if !(beta > threshold) || beta <= f64::EPSILON * (app - arr).abs() {
                    continue;
                }
                rotated = true;
                let phase = bpr / T::from_real(beta);
                let theta = (arr - app) / (2.0 * beta);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) · [[c, s], [−s, c]] on columns p, r.
                let gpp = T::from_real(c);
                let gpr = T::from_real(s);
                let grp = phase.conjugate() * T::from_real(-s);
                let grr = phase.conjugate() * T::from_real(c);
                for k in 0..n {
                    let (x, y) = (b[(k, p)], b[(k, r)]);
                    b[(k, p)] = x * gpp + y * grp;
                    b[(k, r)] = x * gpr + y * grr;
                    let (x, y) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = x * gpp + y * grp;
                    q[(k, r)] = x * gpr + y * grr;
                }
                for k in 0..n {
                    let (x, y) = (b[(p, k)], b[(r, k)]);
                    b[(p, k)] = gpp.conjugate() * x + grp.conjugate() * y;
                    b[(r, k)] = gpr.conjugate() * x + grr.conjugate() * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[(i, i)].real().total_cmp(&b[(j, j)].real()));
    let values = order.iter().map(|&i| b[(i, i)].real()).collect();
    let vectors = DMatrix::from_fn(n, n, |k, col| q[(k, order[col])]);
    (values, vectors)
}

/// Left singular vectors of `m` in descending order of `‖m* v‖`.
///
/// Vectors come from the Hermitian eigenproblem of `mm*`; the complex SVD
/// loses accuracy in its vectors when zero singular values are present. The
/// returned moduli are `‖m* v_j‖`, consistent with the vectors.
pub fn left_singular(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (_, vecs) = herm_eigh(m * m.adjoint());
    let n = vecs.ncols();
    let order: Vec<usize> = (0..n).rev().collect();
    let vectors = CMatrix::from_columns(&order.iter().map(|&j| vecs.column(j).into_owned()).collect::<Vec<_>>());
    let values = (0..n).map(|j| (m.adjoint() * vectors.column(j)).norm()).collect();
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

pub fn op_norm_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Sum of singular values.
pub fn trace_norm_real(m: &DMatrix<f64>) -> f64 {
    SVD::new(m.clone(), false, false).singular_values.sum()
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if m.iter().all(|z| z.im == 0.0) {
        return eigenvalues_real(&m.map(|z| z.re));
    }
    let f = faer::Mat::<c64>::from_fn(n, n, |i, j| c64::new(m[(i, j)].re, m[(i, j)].im));
    f.complex_eigenvalues().into_iter().map(|z| C64::new(z.re, z.im)).collect()
}

/// Complex eigenvalues of a real matrix.
pub fn eigenvalues_real(m: &DMatrix<f64>) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    f.eigenvalues::<c64>().into_iter().map(|z| C64::new(z.re, z.im)).collect()
}

pub fn spectral_radius(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if (m - m.adjoint()).norm() <= 1e-14 * m.norm() {
        let (vals, _) = herm_eigh(m.clone());
        return vals.iter().map(|x| x.abs()).fold(0.0, f64::max);
    }
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius distance scaled by the larger of the two Frobenius norms.
pub fn relative_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Standard inner product, linear in the first slot: Σ x_j conj(y_j).
pub fn inner(x: &CVector, y: &CVector) -> C64 {
    y.dotc(x)
}
