//! Dense linear algebra on small real matrices.
//!
//! Everything the formation machinery needs lives here: a row-major [`Mat`],
//! a one-sided Jacobi SVD (rank, null space, least squares, orthonormal
//! spans) and a Hessenberg + Francis double-shift QR eigenvalue solver for
//! general real matrices. Matrices in this crate rarely exceed a few dozen
//! rows, so the routines favour accuracy over blocking or cache tricks.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Relative singular-value threshold used when callers do not pick one.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "matrix data has {} entries, expected {}x{} = {}",
                data.len(),
                rows,
                cols,
                rows * cols
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return invalid(format!("row {i} has {} entries, expected {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return invalid(format!("column {j} has length {}, expected {rows}", c.len()));
            }
            for (i, &x) in c.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, k: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| k * x).collect() }
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return invalid(format!(
                "vector of length {} does not match {} columns",
                x.len(),
                self.cols
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// Kronecker product with the `m`-dimensional identity, `A ⊗ I_m`.
    pub fn kron_identity(&self, m: usize) -> Mat {
        let mut out = Mat::zeros(self.rows * m, self.cols * m);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a != 0.0 {
                    for d in 0..m {
                        out[(i * m + d, j * m + d)] = a;
                    }
                }
            }
        }
        out
    }

    /// `[self | other]`
    pub fn hstack(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return invalid("hstack: row counts differ");
        }
        Ok(Mat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    /// `[self ; other]`
    pub fn vstack(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return invalid("vstack: column counts differ");
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Mat { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            invalid(format!("{what}: matrix has non-finite entries"))
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for x in self.row(i) {
                write!(f, "{x:>12.5e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    // scaled to stay finite for the large squared distances of big formations
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

/// Orthonormal basis of a linear subspace of `R^ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self { ambient_dim, basis: Vec::new() }
    }

    pub fn full(ambient_dim: usize) -> Self {
        let basis = (0..ambient_dim)
            .map(|i| {
                let mut e = vec![0.0; ambient_dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { ambient_dim, basis }
    }

    /// Orthonormal basis for the span of `vectors`, dropping directions whose
    /// singular value falls below `tol` times the largest one.
    pub fn span(ambient_dim: usize, vectors: &[Vec<f64>], tol: f64) -> Result<Self> {
        if vectors.is_empty() {
            return Ok(Self::zero(ambient_dim));
        }
        let m = Mat::from_columns(ambient_dim, vectors)?;
        m.ensure_finite("span")?;
        let svd = svd(&m)?;
        let smax = svd.singular_values.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return Ok(Self::zero(ambient_dim));
        }
        let basis = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > tol * smax)
            .map(|(k, _)| svd.u.column(k))
            .collect();
        Ok(Self { ambient_dim, basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Orthogonal projection `Σ (bᵢᵀx) bᵢ`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim {
            return invalid(format!(
                "vector of length {} projected onto subspace of R^{}",
                x.len(),
                self.ambient_dim
            ));
        }
        let mut out = vec![0.0; self.ambient_dim];
        for b in &self.basis {
            let c = dot(b, x);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        Ok(out)
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let p = self.project(x)?;
        let r: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        Ok(norm(&r))
    }

    /// Orthogonal complement within the ambient space.
    pub fn complement(&self) -> Result<Subspace> {
        if self.basis.is_empty() {
            return Ok(Self::full(self.ambient_dim));
        }
        let rows = Mat::from_columns(self.ambient_dim, &self.basis)?.transpose();
        null_space(&rows, DEFAULT_RANK_TOL)
    }

    /// Image of this subspace under the orthogonal projection onto `target`.
    pub fn projected_onto(&self, target: &Subspace, tol: f64) -> Result<Subspace> {
        let images = self
            .basis
            .iter()
            .map(|b| target.project(b))
            .collect::<Result<Vec<_>>>()?;
        // the span threshold is relative; a projection that annihilates every
        // direction must still come out empty
        if images.iter().all(|v| norm(v) <= tol) {
            return Ok(Self::zero(self.ambient_dim));
        }
        Subspace::span(self.ambient_dim, &images, tol)
    }

    /// Span of the union of two subspaces.
    pub fn sum(&self, other: &Subspace, tol: f64) -> Result<Subspace> {
        let mut vs = self.basis.clone();
        vs.extend(other.basis.iter().cloned());
        Subspace::span(self.ambient_dim, &vs, tol)
    }

    pub fn basis_matrix(&self) -> Mat {
        let mut m = Mat::zeros(self.ambient_dim, self.basis.len());
        for (j, b) in self.basis.iter().enumerate() {
            for (i, &x) in b.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ`, singular values
/// sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub v: Mat,
}

pub fn svd(m: &Mat) -> Result<Svd> {
    m.ensure_finite("svd")?;
    if m.rows >= m.cols {
        jacobi_svd(m)
    } else {
        let t = jacobi_svd(&m.transpose())?;
        Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u })
    }
}

/// One-sided (Hestenes) Jacobi SVD for `rows >= cols`.
fn jacobi_svd(m: &Mat) -> Result<Svd> {
    let (r, c) = (m.rows, m.cols);
    // column-major working copies
    let mut a: Vec<Vec<f64>> = (0..c).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut e = vec![0.0; c];
            e[j] = 1.0;
            e
        })
        .collect();

    const MAX_SWEEPS: usize = 100;
    let eps = f64::EPSILON;
    // columns below this squared norm are numerical zeros; rotating them
    // only shuffles rounding noise and can cycle forever
    let negligible = (eps * m.frobenius_norm()).powi(2);
    let mut converged = c < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..c {
            for j in (i + 1)..c {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(&mut a, i, j, cs, sn);
                rotate_pair(&mut v, i, j, cs, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }

    let mut order: Vec<(usize, f64)> = a.iter().map(|col| norm(col)).enumerate().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));

    let mut u = Mat::zeros(r, c);
    let mut vm = Mat::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    let smax = order.first().map_or(0.0, |o| o.1);
    for (k, &(j, sv)) in order.iter().enumerate() {
        s.push(sv);
        if sv > smax * eps * (r.max(c) as f64) && sv > 0.0 {
            for i in 0..r {
                u[(i, k)] = a[j][i] / sv;
            }
        }
        for i in 0..c {
            vm[(i, k)] = v[j][i];
        }
    }
    complete_orthonormal_columns(&mut u, &s, smax * eps * (r.max(c) as f64));
    Ok(Svd { u, singular_values: s, v: vm })
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, cs: f64, sn: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = cs * xi - sn * yj;
        *y = sn * xi + cs * yj;
    }
}

/// Replaces the columns of `u` that belong to (numerically) zero singular
/// values with unit vectors orthogonal to the others, so `u` stays orthonormal.
fn complete_orthonormal_columns(u: &mut Mat, s: &[f64], cutoff: f64) {
    let r = u.rows;
    for k in 0..u.cols {
        if s[k] > cutoff && s[k] > 0.0 {
            continue;
        }
        'candidates: for e in 0..r {
            let mut cand = vec![0.0; r];
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in 0..u.cols {
                    if j == k {
                        continue;
                    }
                    let col = u.column(j);
                    let c = dot(&col, &cand);
                    for (x, y) in cand.iter_mut().zip(&col) {
                        *x -= c * y;
                    }
                }
            }
            let n = norm(&cand);
            if n > 1e-6 {
                for i in 0..r {
                    u[(i, k)] = cand[i] / n;
                }
                break 'candidates;
            }
        }
    }
}

/// Numerical rank: number of singular values above `tol · σ_max`.
pub fn rank(m: &Mat, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return invalid("rank tolerance must be positive");
    }
    let s = svd(m)?.singular_values;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * smax).count())
}

/// Orthonormal basis of the numerical kernel of `m`. A zero matrix has the
/// whole domain as kernel.
pub fn null_space(m: &Mat, tol: f64) -> Result<Subspace> {
    if !(tol > 0.0) {
        return invalid("null-space tolerance must be positive");
    }
    m.ensure_finite("null_space")?;
    let c = m.cols;
    if c == 0 {
        return Ok(Subspace::zero(0));
    }
    // pad with zero rows so V comes out square
    let padded = if m.rows < c { m.vstack(&Mat::zeros(c - m.rows, c))? } else { m.clone() };
    let d = jacobi_svd(&padded)?;
    let smax = d.singular_values[0];
    let basis = if smax == 0.0 {
        return Ok(Subspace::full(c));
    } else {
        d.singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= tol * smax)
            .map(|(k, _)| d.v.column(k))
            .collect()
    };
    Ok(Subspace { ambient_dim: c, basis })
}

/// Minimum-norm least-squares solution of `M x ≈ b`.
pub fn least_squares(m: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.rows {
        return invalid(format!("right-hand side has length {}, expected {}", b.len(), m.rows));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return invalid("least_squares: non-finite right-hand side");
    }
    let d = svd(m)?;
    let smax = d.singular_values.first().copied().unwrap_or(0.0);
    let mut x = vec![0.0; m.cols];
    if smax == 0.0 {
        return Ok(x);
    }
    let cutoff = smax * f64::EPSILON * (m.rows.max(m.cols) as f64) * 10.0;
    for (k, &s) in d.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let uk = d.u.column(k);
        let coef = dot(&uk, b) / s;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * d.v[(i, k)];
        }
    }
    Ok(x)
}

/// All eigenvalues of a square real matrix, with multiplicity, ordered by
/// decreasing real part then decreasing imaginary part.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return invalid(format!("eigenvalues of non-square {}x{} matrix", m.rows, m.cols));
    }
    m.ensure_finite("eigenvalues")?;
    let n = m.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    balance(&mut a);
    hessenberg(&mut a);
    let mut eig = hessenberg_qr(a)?;
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(eig)
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Diagonal similarity scaling that equalises row and column norms.
fn balance(a: &mut Mat) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.rows;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut Mat) {
    let n = a.rows;
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let x: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xn = norm(&x);
        if xn == 0.0 {
            continue;
        }
        let alpha = if x[0] > 0.0 { -xn } else { xn };
        let mut v = x;
        v[0] -= alpha;
        let vn = norm(&v);
        if vn == 0.0 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        // A <- H A
        for j in 0..n {
            let s: f64 = v.iter().enumerate().map(|(t, vi)| vi * a[(k + 1 + t, j)]).sum();
            for (t, vi) in v.iter().enumerate() {
                a[(k + 1 + t, j)] -= 2.0 * s * vi;
            }
        }
        // A <- A H
        for i in 0..n {
            let s: f64 = v.iter().enumerate().map(|(t, vi)| vi * a[(i, k + 1 + t)]).sum();
            for (t, vi) in v.iter().enumerate() {
                a[(i, k + 1 + t)] -= 2.0 * s * vi;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
fn hessenberg_qr(h: Mat) -> Result<Vec<Complex64>> {
    let n = h.rows;
    // 1-based working copy keeps the index arithmetic of the classic routine
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }

    const MAX_ITS: usize = 60;
    let mut nn = n as isize;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // look for a single small subdiagonal element
            let mut l = nu;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == MAX_ITS {
                return Err(Error::Numerical("QR iteration did not converge".into()));
            }
            if its == 10 || its == 20 || its == 40 {
                // exceptional shift
                t += x;
                for i in 1..=nu {
                    a[i][i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // form shift and look for two consecutive small subdiagonals
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            // double QR step on rows l..nn and columns m..nn
            for k in m..nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nu - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nu - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = nu.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nu - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
            }
            if l >= nu - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat {
        Mat::from_rows(rows).unwrap()
    }

    #[test]
    fn null_space_of_scalar_zero_is_everything() {
        let ns = null_space(&Mat::zeros(1, 1), 1e-9).unwrap();
        assert_eq!(ns.dim(), 1);
        assert!((ns.basis()[0][0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn null_space_of_identity_is_trivial() {
        assert_eq!(null_space(&Mat::identity(2), 1e-9).unwrap().dim(), 0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = m(&[&[1.0, 1.0, 0.0]]);
        let ns = null_space(&a, 1e-9).unwrap();
        assert_eq!(ns.dim(), 2);
        for b in ns.basis() {
            assert!(a.mul_vec(b).unwrap()[0].abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let a = m(&[&[1.0, f64::NAN]]);
        assert!(matches!(null_space(&a, 1e-9), Err(Error::InvalidInput(_))));
        assert!(matches!(rank(&a, 1e-9), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&Mat::identity(3), 1e-9).unwrap(), 3);
        let u = [1.0, -2.0, 0.5];
        let v = [3.0, 1.0, 4.0, -1.0];
        let outer = Mat::from_fn(3, 4, |i, j| u[i] * v[j]);
        assert_eq!(rank(&outer, 1e-9).unwrap(), 1);
        assert_eq!(rank(&Mat::zeros(2, 3), 1e-9).unwrap(), 0);
    }

    #[test]
    fn projection_examples() {
        let s = Subspace::span(2, &[vec![1.0, 0.0]], 1e-9).unwrap();
        let p = s.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        let full = Subspace::full(3);
        assert_eq!(full.project(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(s.project(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eigenvalues_of_diagonal_and_rotation_generator() {
        let e = eigenvalues(&m(&[&[-1.0, 0.0], &[0.0, -2.0]])).unwrap();
        assert!((e[0].re + 1.0).abs() < 1e-12 && (e[1].re + 2.0).abs() < 1e-12);
        let e = eigenvalues(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap();
        assert!(e[0].re.abs() < 1e-12 && (e[0].im - 1.0).abs() < 1e-12);
        assert!(e[1].re.abs() < 1e-12 && (e[1].im + 1.0).abs() < 1e-12);
        assert!(eigenvalues(&Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // roots of (x-1)(x-2)(x-3)(x+4)
        let c = m(&[
            &[2.0, 13.0, -38.0, 24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let e = eigenvalues(&c).unwrap();
        let expected = [3.0, 2.0, 1.0, -4.0];
        for (z, x) in e.iter().zip(expected) {
            assert!((z.re - x).abs() < 1e-9, "{e:?}");
            assert!(z.im.abs() < 1e-9);
        }
    }

    #[test]
    fn least_squares_examples() {
        let x = least_squares(&Mat::identity(2), &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        // consistent overdetermined system
        let a = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let x = least_squares(&a, &[2.0, -1.0, 1.0]).unwrap();
        let r = a.mul_vec(&x).unwrap();
        assert!(norm(&[r[0] - 2.0, r[1] + 1.0, r[2] - 1.0]) < 1e-10);
        // rank deficient: minimum-norm answer
        let a = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let x = least_squares(&a, &[2.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(least_squares(&a, &[1.0]).is_err());
    }

    #[test]
    fn svd_reconstructs() {
        let a = m(&[&[2.0, -1.0, 0.5], &[0.0, 3.0, 1.0]]);
        let d = svd(&a).unwrap();
        let us = Mat::from_fn(2, 2, |i, j| d.u[(i, j)] * d.singular_values[j]);
        let back = us.matmul(&d.v.transpose()).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn kron_identity_places_blocks() {
        let a = m(&[&[1.0, -2.0]]);
        let k = a.kron_identity(2);
        assert_eq!(k.rows(), 2);
        assert_eq!(k.cols(), 4);
        assert_eq!(k.row(0), &[1.0, 0.0, -2.0, 0.0]);
        assert_eq!(k.row(1), &[0.0, 1.0, 0.0, -2.0]);
    }

    #[test]
    fn complement_and_projected_subspaces() {
        let s = Subspace::span(3, &[vec![1.0, 1.0, 0.0]], 1e-9).unwrap();
        let c = s.complement().unwrap();
        assert_eq!(c.dim(), 2);
        for b in c.basis() {
            assert!(dot(b, &[1.0, 1.0, 0.0]).abs() < 1e-12);
        }
        let k = Subspace::span(3, &[vec![1.0, 0.0, 0.0]], 1e-9).unwrap();
        let p = k.projected_onto(&c, 1e-9).unwrap();
        assert_eq!(p.dim(), 1);
        assert!(s.projected_onto(&c, 1e-9).unwrap().dim() == 0);
    }
}
