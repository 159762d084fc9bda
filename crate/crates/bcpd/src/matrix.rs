//! Small dense real-matrix toolbox.
//!
//! Everything downstream works with matrices of dimension at most
//! [`MAX_DIM`], so the implementations favor robustness over asymptotic
//! speed: LU with partial pivoting for solves, Householder reduction to
//! Hessenberg form followed by the Francis double-shift QR iteration for
//! eigenvalues (the classic EISPACK `orthes`/`hqr` pair), and power
//! iteration on `MᵀM` for the operator 2-norm.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 16;

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Ordered list of eigenvalues; conjugate pairs appear together.
pub type ComplexList = Vec<Complex64>;

const POWER_ITER_BUDGET: usize = 10_000;
const POWER_ITER_TOL: f64 = 1e-12;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// Largest entry magnitude; the scale used by singularity thresholds.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.data[i * self.cols + j] * v[j])
                    .sum()
            })
            .collect())
    }

    /// Solves `M x = v` by LU with partial pivoting.
    ///
    /// Fails with [`Error::SingularMatrix`] when a pivot falls below
    /// `SINGULARITY_TOL` relative to the matrix scale.
    pub fn lu_solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let lu = self.lu_factor()?;
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} for {}x{} system",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(lu.solve(v))
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.require_square()?;
        let lu = self.lu_factor()?;
        let mut out = Matrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        for j in 0..n {
            rhs.fill(0.0);
            rhs[j] = 1.0;
            let col = lu.solve(&rhs);
            for (i, &v) in col.iter().enumerate() {
                out.data[i * n + j] = v;
            }
        }
        Ok(out)
    }

    /// Determinant via Gaussian elimination; singular matrices yield ~0
    /// rather than an error.
    pub fn determinant(&self) -> Result<f64> {
        let n = self.require_square()?;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let mut piv = k;
            for i in (k + 1)..n {
                if a[i * n + k].abs() > a[piv * n + k].abs() {
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            if pivot == 0.0 {
                return Ok(0.0);
            }
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                for j in k..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
            }
        }
        Ok(det)
    }

    fn require_square(&self) -> Result<usize> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix where square required",
                self.rows, self.cols
            )));
        }
        Ok(self.rows)
    }

    fn lu_factor(&self) -> Result<LuFactors> {
        let n = self.require_square()?;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut piv = k;
            for i in (k + 1)..n {
                if lu[i * n + k].abs() > lu[piv * n + k].abs() {
                    piv = i;
                }
            }
            if lu[piv * n + k].abs() <= SINGULARITY_TOL * scale {
                return Err(Error::SingularMatrix);
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for j in (k + 1)..n {
                    lu[i * n + j] -= factor * lu[k * n + j];
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    /// Eigenvalues by Hessenberg reduction plus Francis double-shift QR.
    ///
    /// The result is sorted by decreasing modulus (ties broken by real then
    /// imaginary part) and is closed under conjugation for real input.
    pub fn eigenvalues(&self) -> Result<ComplexList> {
        let n = self.require_square()?;
        if n > MAX_DIM {
            return Err(Error::DimensionMismatch(format!(
                "dimension {n} exceeds supported maximum {MAX_DIM}"
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut h = self.data.clone();
        hessenberg_in_place(&mut h, n);
        let mut eig = hqr_eigenvalues(&mut h, n)?;
        eig.sort_by(|a, b| {
            b.norm()
                .partial_cmp(&a.norm())
                .unwrap()
                .then(b.re.partial_cmp(&a.re).unwrap())
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        Ok(eig)
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .fold(0.0, |acc, l| acc.max(l.norm())))
    }

    /// Operator 2-norm via power iteration on `MᵀM`.
    pub fn operator_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 || self.max_abs() == 0.0 {
            return 0.0;
        }
        let mt = self.transpose();
        let n = self.cols;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.013 * (i as f64 + 1.0)).collect();
        normalize(&mut v);
        let mut rayleigh: f64 = 0.0;
        let mut retried = false;
        for _ in 0..POWER_ITER_BUDGET {
            let mv = self.mul_vec(&v).expect("shape checked");
            let mut w = mt.mul_vec(&mv).expect("shape checked");
            let lam: f64 = dot(&v, &w);
            let wn = norm2(&w);
            if wn <= f64::MIN_POSITIVE {
                // Start vector fell in the null space; perturb once.
                if retried {
                    return rayleigh.max(0.0).sqrt();
                }
                retried = true;
                for (i, x) in v.iter_mut().enumerate() {
                    *x += 1e-6 * ((i as f64 + 1.0).sin() + 0.5);
                }
                normalize(&mut v);
                continue;
            }
            for x in &mut w {
                *x /= wn;
            }
            v = w;
            if (lam - rayleigh).abs() <= POWER_ITER_TOL * lam.abs().max(1.0) {
                rayleigh = lam;
                break;
            }
            rayleigh = lam;
        }
        rayleigh.max(0.0).sqrt()
    }

    /// Norm of `M` in the coordinates induced by `S`: the operator 2-norm of
    /// `S M S⁻¹`.
    pub fn s_norm(&self, s: &Matrix) -> Result<f64> {
        let s_inv = s.inverse()?;
        Ok(s.mul(self)?.mul(&s_inv)?.operator_norm())
    }

    /// Real eigenbasis assembled by inverse iteration: one column per real
    /// eigenvalue, a (Re, Im) column pair per complex-conjugate pair.
    ///
    /// Fails when the matrix is too defective for inverse iteration to
    /// deliver accurate directions.
    pub fn real_eigenbasis(&self) -> Result<Matrix> {
        let n = self.require_square()?;
        let eig = self.eigenvalues()?;
        let scale = self.max_abs().max(1e-30);
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut used = vec![false; n];
        for (k, lambda) in eig.iter().enumerate() {
            if used[k] {
                continue;
            }
            used[k] = true;
            if lambda.im == 0.0 {
                columns.push(inverse_iteration_real(self, lambda.re, scale)?);
            } else {
                // Consume the conjugate partner.
                let partner = eig
                    .iter()
                    .enumerate()
                    .position(|(j, l)| !used[j] && l.re == lambda.re && l.im == -lambda.im)
                    .ok_or_else(|| Error::NoConvergence("unpaired complex eigenvalue".into()))?;
                used[partner] = true;
                let v = inverse_iteration_complex(self, *lambda, scale)?;
                columns.push(v.iter().map(|z| z.re).collect());
                columns.push(v.iter().map(|z| z.im).collect());
            }
        }
        let mut out = Matrix::zeros(n, n);
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out.data[i * n + j] = v;
            }
        }
        // Reject bases that are numerically rank deficient.
        for x in &out.data {
            if !x.is_finite() {
                return Err(Error::NoConvergence(
                    "eigenbasis has non-finite entries".into(),
                ));
            }
        }
        out.lu_factor()
            .map_err(|_| Error::NoConvergence("eigenbasis is singular".into()))?;
        Ok(out)
    }
}

struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

// ---------------------------------------------------------------------------
// vector helpers shared across the crate

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale_vec(a: &[f64], factor: f64) -> Vec<f64> {
    a.iter().map(|x| x * factor).collect()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

// ---------------------------------------------------------------------------
// Hessenberg reduction (EISPACK orthes, eigenvalues-only variant)

fn hessenberg_in_place(h: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[i * n + (m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i * n + (m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        // H <- (I - u uᵀ/h) H (I - u uᵀ/h)
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i * n + j];
            }
            f /= hh;
            for i in m..=high {
                h[i * n + j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[i * n + j];
            }
            f /= hh;
            for j in m..=high {
                h[i * n + j] -= f * ort[j];
            }
        }
        h[m * n + (m - 1)] = scale * g;
        for i in (m + 1)..=high {
            h[i * n + (m - 1)] = 0.0;
        }
    }
}

// ---------------------------------------------------------------------------
// Francis double-shift QR on a Hessenberg matrix (EISPACK hqr)

fn hqr_eigenvalues(h: &mut [f64], n: usize) -> Result<ComplexList> {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let eps = f64::EPSILON;

    let mut norm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            norm += h[i * n + j].abs();
        }
    }
    if norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let mut en = n as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total = 0usize;
    let budget = 50 * n.max(1);

    while en >= 0 {
        let enu = en as usize;

        // Look for a single small sub-diagonal element.
        let mut l = enu;
        while l > 0 {
            let mut s = h[(l - 1) * n + (l - 1)].abs() + h[l * n + l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l * n + (l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == enu {
            // One root found.
            d[enu] = h[enu * n + enu] + exshift;
            e[enu] = 0.0;
            en -= 1;
            iter = 0;
        } else if l + 1 == enu {
            // Two roots found; solve the trailing 2x2 block directly.
            let w = h[enu * n + (enu - 1)] * h[(enu - 1) * n + enu];
            let p = (h[(enu - 1) * n + (enu - 1)] - h[enu * n + enu]) / 2.0;
            let q = p * p + w;
            let z = q.abs().sqrt();
            let x = h[enu * n + enu] + exshift;
            if q >= 0.0 {
                let z = if p >= 0.0 { p + z } else { p - z };
                d[enu - 1] = x + z;
                d[enu] = if z != 0.0 { x - w / z } else { d[enu - 1] };
                e[enu - 1] = 0.0;
                e[enu] = 0.0;
            } else {
                d[enu - 1] = x + p;
                d[enu] = x + p;
                e[enu - 1] = z;
                e[enu] = -z;
            }
            en -= 2;
            iter = 0;
        } else {
            // No convergence yet: form shift and run one double QR sweep.
            let mut x = h[enu * n + enu];
            let mut y = h[(enu - 1) * n + (enu - 1)];
            let mut w = h[enu * n + (enu - 1)] * h[(enu - 1) * n + enu];

            if iter == 10 {
                // Exceptional ad hoc shift.
                exshift += x;
                for i in 0..=enu {
                    h[i * n + i] -= x;
                }
                let s = h[enu * n + (enu - 1)].abs() + h[(enu - 1) * n + (enu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                let mut s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=enu {
                        h[i * n + i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total += 1;
            if iter > 45 || total > budget {
                return Err(Error::NoConvergence(format!(
                    "QR iteration exceeded budget at block size {}",
                    enu - l + 1
                )));
            }

            // Look for two consecutive small sub-diagonal elements.
            let mut m = enu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[m * n + m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m + 1) * n + m] + h[m * n + (m + 1)];
                q = h[(m + 1) * n + (m + 1)] - z - rr - ss;
                r = h[(m + 2) * n + (m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m * n + (m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[(m - 1) * n + (m - 1)].abs()
                                + z.abs()
                                + h[(m + 1) * n + (m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=enu {
                h[i * n + (i - 2)] = 0.0;
                if i > m + 2 {
                    h[i * n + (i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=en, columns m..=en.
            for k in m..enu {
                let notlast = k != enu - 1;
                if k != m {
                    p = h[k * n + (k - 1)];
                    q = h[(k + 1) * n + (k - 1)];
                    r = if notlast {
                        h[(k + 2) * n + (k - 1)]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[k * n + (k - 1)] = -s * x;
                } else if l != m {
                    h[k * n + (k - 1)] = -h[k * n + (k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;

                // Row modification.
                for j in k..=enu {
                    let mut pp = h[k * n + j] + q * h[(k + 1) * n + j];
                    if notlast {
                        pp += r * h[(k + 2) * n + j];
                        h[(k + 2) * n + j] -= pp * z;
                    }
                    h[k * n + j] -= pp * x;
                    h[(k + 1) * n + j] -= pp * y;
                }

                // Column modification.
                for i in l..=enu.min(k + 3) {
                    let mut pp = x * h[i * n + k] + y * h[i * n + (k + 1)];
                    if notlast {
                        pp += z * h[i * n + (k + 2)];
                        h[i * n + (k + 2)] -= pp * r;
                    }
                    h[i * n + k] -= pp;
                    h[i * n + (k + 1)] -= pp * q;
                }
            }
        }
    }

    Ok(d.into_iter()
        .zip(e)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

// ---------------------------------------------------------------------------
// Inverse iteration for eigenvectors (used by the contraction-certificate
// search; accuracy requirements there are mild)

const INVERSE_ITER_STEPS: usize = 4;

fn inverse_iteration_real(m: &Matrix, lambda: f64, scale: f64) -> Result<Vec<f64>> {
    let n = m.rows;
    let shift = lambda + 1e-10 * scale;
    let mut shifted = m.clone();
    for i in 0..n {
        let v = shifted.get(i, i) - shift;
        shifted.set(i, i, v);
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.0137 * (i as f64 + 1.0)).collect();
    for _ in 0..INVERSE_ITER_STEPS {
        v = solve_allow_near_singular(&shifted, &v)?;
        normalize_to_unit_peak(&mut v)?;
    }
    // Residual check: the direction must actually be an eigenvector.
    let mv = m.mul_vec(&v).expect("shape checked");
    let res: f64 = norm2(&sub_vec(&mv, &scale_vec(&v, lambda)));
    if res > 1e-6 * scale.max(lambda.abs()) * norm2(&v) {
        return Err(Error::NoConvergence(
            "inverse iteration residual too large".into(),
        ));
    }
    Ok(v)
}

fn inverse_iteration_complex(m: &Matrix, lambda: Complex64, scale: f64) -> Result<Vec<Complex64>> {
    let n = m.rows;
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut shifted: Vec<Complex64> = m.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for i in 0..n {
        shifted[i * n + i] -= shift;
    }
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.0137 * (i as f64 + 1.0), 0.1))
        .collect();
    for _ in 0..INVERSE_ITER_STEPS {
        v = complex_solve_allow_near_singular(&shifted, n, &v)?;
        let peak = v
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap();
        if peak.norm() <= f64::MIN_POSITIVE {
            return Err(Error::NoConvergence("inverse iteration collapsed".into()));
        }
        for z in &mut v {
            *z /= peak;
        }
    }
    let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut res = 0.0f64;
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &vj) in v.iter().enumerate() {
            acc += m.data[i * n + j] * vj;
        }
        res += (acc - lambda * v[i]).norm_sqr();
    }
    if res.sqrt() > 1e-6 * scale.max(lambda.norm()) * vn {
        return Err(Error::NoConvergence(
            "inverse iteration residual too large".into(),
        ));
    }
    Ok(v)
}

/// LU solve that clamps tiny pivots instead of failing; inverse iteration
/// wants the solution to blow up along the eigen-direction.
fn solve_allow_near_singular(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows;
    let floor = m.max_abs().max(1.0) * 1e-14;
    let mut a = m.data.clone();
    let mut x = rhs.to_vec();
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[i * n + k].abs() > a[piv * n + k].abs() {
                piv = i;
            }
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let mut pivot = a[k * n + k];
        if pivot.abs() < floor {
            pivot = if pivot < 0.0 { -floor } else { floor };
            a[k * n + k] = pivot;
        }
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            for j in k..n {
                a[i * n + j] -= factor * a[k * n + j];
            }
            x[i] -= factor * x[k];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= a[i * n + j] * x[j];
        }
        x[i] /= a[i * n + i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence(
            "inverse iteration solve overflowed".into(),
        ));
    }
    Ok(x)
}

fn complex_solve_allow_near_singular(
    m: &[Complex64],
    n: usize,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(1.0);
    let floor = scale * 1e-14;
    let mut a = m.to_vec();
    let mut x = rhs.to_vec();
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[i * n + k].norm() > a[piv * n + k].norm() {
                piv = i;
            }
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let mut pivot = a[k * n + k];
        if pivot.norm() < floor {
            pivot = Complex64::new(floor, 0.0);
            a[k * n + k] = pivot;
        }
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            for j in k..n {
                let akj = a[k * n + j];
                a[i * n + j] -= factor * akj;
            }
            let xk = x[k];
            x[i] -= factor * xk;
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let t = a[i * n + j] * x[j];
            x[i] -= t;
        }
        x[i] /= a[i * n + i];
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NoConvergence(
            "inverse iteration solve overflowed".into(),
        ));
    }
    Ok(x)
}

fn normalize_to_unit_peak(v: &mut [f64]) -> Result<()> {
    let (mut peak, mut peak_abs) = (0.0, 0.0);
    for &x in v.iter() {
        if x.abs() > peak_abs {
            peak = x;
            peak_abs = x.abs();
        }
    }
    if peak_abs <= f64::MIN_POSITIVE {
        return Err(Error::NoConvergence("inverse iteration collapsed".into()));
    }
    for x in v {
        *x /= peak;
    }
    Ok(())
}
