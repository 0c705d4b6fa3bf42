use super::logsigned::LogSigned;
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for a {dim}x{dim} matrix", data.len())));
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Dimension("rows of unequal length".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        SquareMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        SquareMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(|c| c.to_vec()).take(self.dim).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension("matmul of different sizes".into()));
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Principal submatrix keeping the listed indices.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        Self::from_fn(keep.len(), |i, j| self.get(keep[i], keep[j]))
    }

    fn norm_1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            invalid("matrix has non-finite entries")
        }
    }
}

/// In-place LU with partial pivoting. Returns the permutation sign, or
/// `None` when a pivot is exactly zero.
fn lu_in_place(a: &mut [f64], n: usize, perm: &mut [usize]) -> Option<i8> {
    let mut sign = 1i8;
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            a[i * n + k] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
    }
    Some(sign)
}

/// Row-equilibrated LU determinant of the n x n block at the front of `a`.
fn log_det_in_place(a: &mut [f64], n: usize, perm: &mut [usize]) -> LogSigned {
    let mut log_scale = 0.0;
    for i in 0..n {
        let mx = a[i * n..(i + 1) * n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if mx == 0.0 {
            return LogSigned::ZERO;
        }
        for v in &mut a[i * n..(i + 1) * n] {
            *v /= mx;
        }
        log_scale += mx.ln();
    }
    let Some(mut sign) = lu_in_place(a, n, perm) else {
        return LogSigned::ZERO;
    };
    let mut acc = log_scale;
    for k in 0..n {
        let d = a[k * n + k];
        if d < 0.0 {
            sign = -sign;
        }
        acc += d.abs().ln();
    }
    LogSigned::new(sign, acc)
}

/// Determinant as sign and log-magnitude, by LU with row equilibration.
pub fn log_det(m: &SquareMatrix) -> Result<LogSigned> {
    m.check_finite()?;
    let n = m.dim;
    if n == 0 {
        return Ok(LogSigned::ONE);
    }
    let mut a = m.data.clone();
    let mut perm = vec![0; n];
    Ok(log_det_in_place(&mut a, n, &mut perm))
}

const SMALL: usize = 4;

/// Determinant of a matrix whose entries are given in log form.
///
/// Rows and then columns are rescaled by their largest magnitude before the
/// LU step, so entries spanning hundreds of orders of magnitude are fine.
pub fn log_det_of_logs(dim: usize, entries: &[LogSigned]) -> Result<LogSigned> {
    if entries.len() != dim * dim {
        return Err(Error::Dimension("entry count does not match dimension".into()));
    }
    if dim == 0 {
        return Ok(LogSigned::ONE);
    }
    if entries.iter().any(|e| e.log_abs.is_nan() || e.log_abs == f64::INFINITY) {
        return invalid("matrix has non-finite entries");
    }
    // small matrices stay on the stack; this sits inside quadrature loops
    let mut small = [0.0f64; SMALL * SMALL];
    let mut heap = Vec::new();
    let logs: &mut [f64] = if dim <= SMALL {
        &mut small[..dim * dim]
    } else {
        heap.resize(dim * dim, 0.0);
        &mut heap
    };
    for (l, e) in logs.iter_mut().zip(entries) {
        *l = e.log_abs;
    }
    let mut shift = 0.0;
    for i in 0..dim {
        let mx = logs[i * dim..(i + 1) * dim].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if mx == f64::NEG_INFINITY {
            return Ok(LogSigned::ZERO);
        }
        for v in &mut logs[i * dim..(i + 1) * dim] {
            *v -= mx;
        }
        shift += mx;
    }
    for j in 0..dim {
        let mx = (0..dim).map(|i| logs[i * dim + j]).fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return Ok(LogSigned::ZERO);
        }
        for i in 0..dim {
            logs[i * dim + j] -= mx;
        }
        shift += mx;
    }
    for (l, e) in logs.iter_mut().zip(entries) {
        *l = f64::from(e.sign) * l.exp();
    }
    let mut small_perm = [0usize; SMALL];
    let mut heap_perm = Vec::new();
    let perm: &mut [usize] = if dim <= SMALL {
        &mut small_perm[..dim]
    } else {
        heap_perm.resize(dim, 0);
        &mut heap_perm
    };
    Ok(log_det_in_place(logs, dim, perm) * LogSigned::from_log(shift))
}

/// Pfaffian of a skew-symmetric matrix by skew-symmetric Gaussian
/// elimination with pivoting (Parlett-Reid style).
pub fn pfaffian(m: &SquareMatrix) -> Result<LogSigned> {
    m.check_finite()?;
    let n = m.dim;
    let scale = m.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        for j in 0..=i {
            if (m.get(i, j) + m.get(j, i)).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return invalid("pfaffian needs a skew-symmetric matrix");
            }
        }
    }
    if n == 0 {
        return Ok(LogSigned::ONE);
    }
    if n % 2 == 1 {
        return Ok(LogSigned::ZERO);
    }
    let mut a = m.data.clone();
    let at = |a: &[f64], i: usize, j: usize| a[i * n + j];
    let mut res = LogSigned::ONE;
    let mut k = 0;
    while k + 1 < n {
        // pivot: largest entry in column k below row k
        let mut kp = k + 1;
        let mut best = at(&a, k + 1, k).abs();
        for i in k + 2..n {
            let v = at(&a, i, k).abs();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if best == 0.0 {
            return Ok(LogSigned::ZERO);
        }
        if kp != k + 1 {
            for j in 0..n {
                a.swap((k + 1) * n + j, kp * n + j);
            }
            for i in 0..n {
                a.swap(i * n + k + 1, i * n + kp);
            }
            res = -res;
        }
        let piv = at(&a, k, k + 1);
        res = res * LogSigned::from_f64(piv);
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| at(&a, k, j) / piv).collect();
            let col: Vec<f64> = (k + 2..n).map(|i| at(&a, i, k + 1)).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[i * n + j] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    Ok(res)
}

/// Inverse by LU. Fails with `Singular` when the 1-norm condition estimate
/// exceeds 1e12, and with `NumericalConsistency` if the residual check fails.
pub fn mat_inverse(m: &SquareMatrix) -> Result<SquareMatrix> {
    m.check_finite()?;
    let n = m.dim;
    let mut a = m.data.clone();
    let mut perm = vec![0; n];
    if lu_in_place(&mut a, n, &mut perm).is_none() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let mut inv = SquareMatrix::zeros(n);
    let mut col = vec![0.0; n];
    for c in 0..n {
        for i in 0..n {
            col[i] = if perm[i] == c { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= a[i * n + j] * col[j];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in i + 1..n {
                s -= a[i * n + j] * col[j];
            }
            col[i] = s / a[i * n + i];
        }
        for i in 0..n {
            inv.set(i, c, col[i]);
        }
    }
    let condition = m.norm_1() * inv.norm_1();
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::Singular { condition });
    }
    let prod = m.matmul(&inv)?;
    let resid = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (prod.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    if resid > 1e-8 * n as f64 {
        return Err(Error::NumericalConsistency(format!("inverse residual {resid:.3e}")));
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_three_by_three() {
        let m = SquareMatrix::from_rows(&[vec![1., 1., 1.], vec![0., 2., 4.], vec![0., 5., 18.]]).unwrap();
        let d = log_det(&m).unwrap();
        assert_eq!(d.sign, 1);
        assert!((d.log_abs - 16f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn det_singular_and_empty() {
        let m = SquareMatrix::from_rows(&[vec![1., 2.], vec![2., 4.]]).unwrap();
        assert!(log_det(&m).unwrap().value().abs() < 1e-15);
        assert_eq!(log_det(&SquareMatrix::zeros(0)).unwrap(), LogSigned::ONE);
        let bad = SquareMatrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(matches!(log_det(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pfaffian_four() {
        // upper triangle 1..6 gives a*f - b*e + c*d = 6 - 10 + 12
        let u = [[0., 1., 2., 3.], [0., 0., 4., 5.], [0., 0., 0., 6.], [0., 0., 0., 0.]];
        let m = SquareMatrix::from_fn(4, |i, j| if i < j { u[i][j] } else { -u[j][i] });
        assert!((pfaffian(&m).unwrap().value() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn pfaffian_rejects_non_skew() {
        let m = SquareMatrix::from_rows(&[vec![0., 1.], vec![1., 0.]]).unwrap();
        assert!(matches!(pfaffian(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn inverse_residual_and_singular() {
        let m = SquareMatrix::from_rows(&[vec![4., 1.], vec![2., 3.]]).unwrap();
        let inv = mat_inverse(&m).unwrap();
        assert!((inv.get(0, 0) - 0.3).abs() < 1e-14);
        let s = SquareMatrix::from_rows(&[vec![1., 1.], vec![1., 1. + 1e-15]]).unwrap();
        match mat_inverse(&s) {
            Err(Error::Singular { condition }) => assert!(condition > 1e12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn logs_matrix_matches_plain() {
        let rows = [vec![1e-200, 3e-200], vec![2e150, -5e150]];
        let logs: Vec<LogSigned> = rows.iter().flatten().map(|&v| LogSigned::from_f64(v)).collect();
        let d = log_det_of_logs(2, &logs).unwrap();
        let expect = (1.0 * -5.0 - 3.0 * 2.0) * 1e-50;
        assert!((d.value() / expect - 1.0).abs() < 1e-13);
    }
}
