//! Small dense complex linear-algebra helpers on top of `faer`.
//!
//! Matrices are `faer::Mat<C64>`; vectors are plain `Vec<C64>` slices.

use faer::{Mat, Side};
pub use num_complex::Complex64 as C64;

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn zeros(r: usize, cols: usize) -> CMat {
    Mat::zeros(r, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn from_real(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let cols = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, cols, |i, j| c(rows[i][j]))
}

pub fn diag(d: &[f64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { c(d[i]) } else { ZERO })
}

pub fn adjoint(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn transpose(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)])
}

pub fn conj(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

/// `sum_k w[k] * mats[k]`, all of equal shape.
pub fn lin_comb(w: &[f64], mats: &[CMat], rows: usize, cols: usize) -> CMat {
    let mut out = zeros(rows, cols);
    for (wk, m) in w.iter().zip(mats) {
        if *wk == 0.0 {
            continue;
        }
        for j in 0..cols {
            for i in 0..rows {
                out[(i, j)] += m[(i, j)] * *wk;
            }
        }
    }
    out
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Max-norm of the entries.
pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn hermiticity_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `(A + A^dagger) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn all_finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and unitary eigenvectors as columns.
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let h = hermitian_part(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigendecomposition failed");
    let vals: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i].re).collect();
    let vecs = evd.U().to_owned();
    (vals, vecs)
}

pub fn herm_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    hermitian_part(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigenvalue computation failed")
}

/// Applies a scalar function to a Hermitian matrix through its spectral decomposition.
pub fn herm_fn(a: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, u) = herm_eigen(a);
    let n = vals.len();
    let fv: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
    let mut uf = u.clone();
    for j in 0..n {
        for i in 0..n {
            uf[(i, j)] *= fv[j];
        }
    }
    &uf * adjoint(&u)
}

/// `exp(A)` for Hermitian `A`.
pub fn expm_herm(a: &CMat) -> CMat {
    herm_fn(a, |x| c(x.exp()))
}

/// `exp(i t A)` for Hermitian `A`.
pub fn expm_i_herm(a: &CMat, t: f64) -> CMat {
    herm_fn(a, |x| C64::from_polar(1.0, t * x))
}

/// Singular values (descending) and the full left singular vectors.
pub fn svd_left(a: &CMat) -> (Vec<f64>, CMat) {
    let svd = a.svd().expect("svd failed");
    let k = a.nrows().min(a.ncols());
    let s: Vec<f64> = (0..k).map(|i| svd.S().column_vector()[i].re).collect();
    (s, svd.U().to_owned())
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.singular_values().expect("svd failed")
}

/// Numerical rank: singular values above `tol * s_max`.
pub fn rank(a: &CMat, tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * smax).count()
}

/// Polar factor `U` of `A = U P` for square `A`.
pub fn polar_unitary(a: &CMat) -> CMat {
    let svd = a.svd().expect("svd failed");
    svd.U() * svd.V().adjoint()
}

pub fn column(a: &CMat, j: usize) -> Vec<C64> {
    a.col_as_slice(j).to_vec()
}

pub fn from_columns(rows: usize, cols: &[Vec<C64>]) -> CMat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        for a in x.iter_mut() {
            *a /= n;
        }
    }
    n
}

/// `y += a x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn mat_vec(a: &CMat, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        let col = a.col_as_slice(j);
        for (yi, aij) in y.iter_mut().zip(col) {
            *yi += aij * xj;
        }
    }
    y
}

/// `x^dagger A x`.
pub fn expectation(a: &CMat, x: &[C64]) -> C64 {
    dot(x, &mat_vec(a, x))
}

pub fn max_abs_vec(x: &[C64]) -> f64 {
    x.iter().fold(0.0f64, |m, a| m.max(a.norm()))
}


/// Row-major `[[re, im], …]` rows, the layout used in JSON output.
pub fn to_nested(a: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

pub fn from_nested(rows: &[Vec<[f64; 2]>]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    Mat::from_fn(r, cols, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
}

/// Real coordinates of a Hermitian matrix: the diagonal first, then `(Re, Im)` of each
/// upper-triangular entry in row-major order.
pub fn herm_coords(a: &CMat) -> Vec<f64> {
    let m = a.nrows();
    let mut x: Vec<f64> = (0..m).map(|i| a[(i, i)].re).collect();
    for i in 0..m {
        for j in i + 1..m {
            x.push(a[(i, j)].re);
            x.push(a[(i, j)].im);
        }
    }
    x
}

pub fn herm_from_coords(x: &[f64], m: usize) -> CMat {
    let mut a = zeros(m, m);
    for i in 0..m {
        a[(i, i)] = c(x[i]);
    }
    let mut k = m;
    for i in 0..m {
        for j in i + 1..m {
            let z = C64::new(x[k], x[k + 1]);
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
            k += 2;
        }
    }
    a
}

/// Hermitian basis `K_k` with `A = Σ_k herm_coords(A)_k K_k`.
pub fn herm_basis(m: usize) -> Vec<CMat> {
    (0..m * m)
        .map(|k| {
            let mut x = vec![0.0; m * m];
            x[k] = 1.0;
            herm_from_coords(&x, m)
        })
        .collect()
}

/// `Σ_{ij} A_ij B_ij`, i.e. `tr(A Bᵀ)`.
pub fn pair(a: &CMat, b: &CMat) -> C64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}
