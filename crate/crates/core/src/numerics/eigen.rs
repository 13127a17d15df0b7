//! Cyclic Jacobi eigen-solver for small symmetric matrices.

use nalgebra::{Matrix3, Vector3};

/// Eigen-decomposition of a symmetric 3x3 matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen3 {
    /// Eigenvalues in ascending order.
    pub values: [f64; 3],
    /// Unit eigenvectors matching `values`.
    pub vectors: [Vector3<f64>; 3],
}

fn off_diagonal_norm(a: &Matrix3<f64>) -> f64 {
    (2.0 * (a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2))).sqrt()
}

/// Jacobi rotations until the off-diagonal Frobenius norm drops below `1e-12` of the
/// matrix norm (or exactly zero).
pub fn jacobi_eigen3(m: &Matrix3<f64>) -> SymmetricEigen3 {
    let mut a = 0.5 * (m + m.transpose());
    let mut v = Matrix3::<f64>::identity();
    let scale = a.norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        if off_diagonal_norm(&a) <= 1e-12 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::<f64>::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            a = rot.transpose() * a * rot;
            v *= rot;
        }
    }

    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    SymmetricEigen3 {
        values: idx.map(|i| a[(i, i)]),
        vectors: idx.map(|i| v.column(i).into_owned().normalize()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_is_sorted() {
        let m = Matrix3::from_diagonal(&Vector3::new(3.0, -1.0, 2.0));
        let e = jacobi_eigen3(&m);
        assert_eq!(e.values, [-1.0, 2.0, 3.0]);
    }

    #[test]
    fn reconstructs_random_symmetric() {
        let m = Matrix3::new(4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0);
        let e = jacobi_eigen3(&m);
        for k in 0..3 {
            let r = m * e.vectors[k] - e.values[k] * e.vectors[k];
            assert!(r.norm() < 1e-10);
        }
        for i in 0..3 {
            for j in 0..3 {
                let d = e.vectors[i].dot(&e.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-9);
            }
        }
    }
}
