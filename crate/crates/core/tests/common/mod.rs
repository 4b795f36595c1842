#![allow(dead_code)]

use fglasso::linalg::Matrix;
use fglasso::sur::SurDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; plenty for test data
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// AᵀA/m + shift·I with A m×n: symmetric PD.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, m: usize, shift: f64) -> Matrix {
    let a = random_matrix(rng, m, n);
    let mut s = a.transpose().matmul(&a).unwrap().scaled(1.0 / m as f64);
    for i in 0..n {
        s[(i, i)] += shift;
    }
    s.symmetrize();
    s
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, k: usize, t: usize) -> SurDataset {
    let x: Vec<Matrix> = (0..n).map(|_| random_matrix(rng, t, k)).collect();
    let y = random_matrix(rng, n, t);
    SurDataset::new(x, y).unwrap()
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut rhs = b.to_vec();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        rhs.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for j in c..n {
                m[r][j] -= f * m[c][j];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| m[r][j] * x[j]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    x
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Permutes rows and columns: out[i][j] = a[p[i]][p[j]].
pub fn permute(a: &Matrix, p: &[usize]) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(p[i], p[j])])
}

/// GLS through the full NT×NT system with weight Ω⊗I_T, stacked by equation.
pub fn dense_gls(data: &SurDataset, omega: &Matrix) -> Vec<f64> {
    let (n, t, k) = (data.n_equations(), data.n_periods(), data.k_per_equation());
    let x = Matrix::from_fn(n * t, n * k, |r, c| {
        let (i, s) = (r / t, r % t);
        if c / k == i {
            data.x_block(i)[(s, c % k)]
        } else {
            0.0
        }
    });
    let w = Matrix::from_fn(n * t, n * t, |r, c| if r % t == c % t { omega[(r / t, c / t)] } else { 0.0 });
    let y: Vec<f64> = (0..n * t).map(|r| data.y()[(r / t, r % t)]).collect();
    let xtw = x.transpose().matmul(&w).unwrap();
    dense_solve(&xtw.matmul(&x).unwrap(), &xtw.mul_vec(&y).unwrap())
}

/// Per-equation least squares by normal equations, solved densely.
pub fn per_equation_ls(data: &SurDataset) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..data.n_equations() {
        let x = data.x_block(i);
        let xtx = x.transpose().matmul(x).unwrap();
        let xty = x.transpose().mul_vec(data.y().row(i)).unwrap();
        out.extend(dense_solve(&xtx, &xty));
    }
    out
}

pub fn max_off_diagonal(a: &Matrix) -> f64 {
    let n = a.rows();
    (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].abs()).fold(0.0, f64::max)
}

/// One KKT-corpus case: a random covariance (rank deficient for some draws,
/// as Σ̂ is when T < N) and a penalty strictly inside (0, max off-diagonal).
pub fn random_glasso_case(rng: &mut ChaCha8Rng) -> (Matrix, f64) {
    let n = rng.gen_range(2..=15);
    let m = rng.gen_range(n / 2 + 1..=3 * n);
    let sigma = random_pd(rng, n, m, 0.0);
    let lambda = max_off_diagonal(&sigma) * rng.gen_range(0.02..0.9);
    (sigma, lambda)
}
