//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

/// Largest singular value with unit left/right singular vectors.
pub fn top_singular_triple(m: &DMatrix<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let svd = m.clone().svd(true, true);
    let (mut best, mut idx) = (-1.0, 0);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > best {
            best = s;
            idx = i;
        }
    }
    let u = svd.u.as_ref().unwrap().column(idx).into_owned();
    let v = svd.v_t.as_ref().unwrap().row(idx).transpose();
    (best.max(0.0), u, v)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-13 * svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    svd.solve(b, eps).unwrap_or_else(|_| DMatrix::zeros(a.ncols(), b.ncols()))
}

/// Numerical rank with relative threshold.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().singular_values();
    let top = s.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

/// Bracket on the largest singular value of the matrix with the given rows.
#[derive(Debug, Clone)]
pub struct SigmaMax {
    pub lower: f64,
    pub upper: f64,
    /// Unit right singular vector attaining `lower`.
    pub vector: Vec<f64>,
}

/// Above this size the dense eigen solve is replaced by power iteration
/// (lower) and a Gershgorin-type bound (upper).
const DENSE_LIMIT: usize = 512;

/// `σ_max` of the `k × n` matrix with rows `rows`. Exact (to rounding)
/// through the smaller Gram matrix when that fits; bracketed otherwise.
pub fn sigma_max_rows(rows: &[Vec<f64>], n: usize) -> SigmaMax {
    let k = rows.len();
    if k == 0 || n == 0 || rows.iter().all(|r| r.iter().all(|&x| x == 0.0)) {
        let mut v = vec![0.0; n];
        if n > 0 {
            v[0] = 1.0;
        }
        return SigmaMax { lower: 0.0, upper: 0.0, vector: v };
    }
    if k.min(n) <= DENSE_LIMIT {
        let vector = if k <= n {
            let g = DMatrix::from_fn(k, k, |i, j| dot(&rows[i], &rows[j]));
            let u = top_eigvec(g);
            let mut v = vec![0.0; n];
            for (r, &ui) in rows.iter().zip(u.iter()) {
                axpy(&mut v, ui, r);
            }
            v
        } else {
            let mut g = DMatrix::zeros(n, n);
            for r in rows {
                for i in 0..n {
                    if r[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        g[(i, j)] += r[i] * r[j];
                    }
                }
            }
            top_eigvec(g).iter().copied().collect()
        };
        let vector = normalized_or_basis(vector);
        let s = apply_norm(rows, &vector);
        // Relative slack covers rounding in the eigen solve.
        let upper = (s * (1.0 + 1e-12)).min(gram_upper(rows, n)).max(s);
        return SigmaMax { lower: s, upper, vector };
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..500 {
        let y: Vec<f64> = rows.iter().map(|r| dot(r, &v)).collect();
        let mut w = vec![0.0; n];
        for (r, &yi) in rows.iter().zip(&y) {
            axpy(&mut w, yi, r);
        }
        let nw = norm2(&w);
        if nw == 0.0 {
            break;
        }
        let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    let lower = apply_norm(rows, &v);
    SigmaMax { lower, upper: gram_upper(rows, n).max(lower), vector: v }
}

fn top_eigvec(g: DMatrix<f64>) -> DVector<f64> {
    let eig = g.symmetric_eigen();
    let mut idx = 0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > eig.eigenvalues[idx] {
            idx = i;
        }
    }
    eig.eigenvectors.column(idx).into_owned()
}

fn normalized_or_basis(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm2(&v);
    if n > 0.0 && n.is_finite() {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    }
    v
}

fn apply_norm(rows: &[Vec<f64>], v: &[f64]) -> f64 {
    rows.iter().map(|r| dot(r, v).powi(2)).sum::<f64>().sqrt()
}

/// `σ_max² ≤ max_i Σ_j |<a_i, a_j>| ≤ max_i <|a_i|, Σ_j |a_j|>`.
fn gram_upper(rows: &[Vec<f64>], n: usize) -> f64 {
    let mut s = vec![0.0; n];
    for r in rows {
        for (a, b) in s.iter_mut().zip(r) {
            *a += b.abs();
        }
    }
    let g = rows
        .iter()
        .map(|r| r.iter().zip(&s).map(|(a, b)| a.abs() * b).sum::<f64>())
        .fold(0.0, f64::max);
    let frob: f64 = rows.iter().map(|r| dot(r, r)).sum();
    g.min(frob).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_and_nuclear_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert_relative_eq!(spectral_norm(&m), 4.0, epsilon = 1e-12);
        assert_relative_eq!(nuclear_norm(&m), 7.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_max_matches_svd() {
        let rows = vec![vec![1.0, 2.0, 0.5], vec![-0.3, 0.7, 1.1], vec![0.0, 1.0, 0.0], vec![2.0, 0.0, 1.0]];
        let m = DMatrix::from_fn(4, 3, |i, j| rows[i][j]);
        let s = sigma_max_rows(&rows, 3);
        let exact = spectral_norm(&m);
        assert_relative_eq!(s.lower, exact, max_relative = 1e-12);
        assert!(s.upper >= exact * (1.0 - 1e-12));
        assert_relative_eq!(norm2(&s.vector), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_bound_is_exact_on_orthonormal_rows() {
        let n = 600;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let s = sigma_max_rows(&rows, n);
        assert_relative_eq!(s.lower, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.upper, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_recovers_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DMatrix::from_row_slice(2, 1, &[2.0, -1.0]);
        let b = &a * &x;
        let sol = least_squares(&a, &b);
        assert_relative_eq!(sol, x, epsilon = 1e-12);
    }
}
