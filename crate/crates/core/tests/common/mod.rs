//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

pub type Mat = [[Complex64; 2]; 2];

/// Euclidean projection of `v` onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Closest density matrix by eigendecomposition and eigenvalue clipping
/// onto the simplex.
pub fn clip_oracle(m: &Mat) -> Mat {
    let h = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    let eig = h.symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let clipped = project_simplex(&vals);
    let d = Matrix2::from_diagonal(&Vector2::new(Complex64::new(clipped[0], 0.0), Complex64::new(clipped[1], 0.0)));
    let out = eig.eigenvectors * d * eig.eigenvectors.adjoint();
    [[out[(0, 0)], out[(0, 1)]], [out[(1, 0)], out[(1, 1)]]]
}

pub fn frobenius(a: &Mat, b: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += (a[i][j] - b[i][j]).norm_sqr();
        }
    }
    s.sqrt()
}

/// `(I + r . sigma) / 2` written out by hand.
pub fn matrix_from_bloch(x: f64, y: f64, z: f64) -> Mat {
    [
        [Complex64::new(0.5 * (1.0 + z), 0.0), Complex64::new(0.5 * x, -0.5 * y)],
        [Complex64::new(0.5 * x, 0.5 * y), Complex64::new(0.5 * (1.0 - z), 0.0)],
    ]
}

/// Eigenvalues of a Hermitian 2x2 matrix via nalgebra.
pub fn eigenvalues(m: &Mat) -> [f64; 2] {
    let h = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    let e = h.symmetric_eigen().eigenvalues;
    [e[0], e[1]]
}
