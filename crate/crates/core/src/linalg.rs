//! Small dense and banded solvers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Returned when a factorization hits a zero pivot or the condition estimate
/// exceeds the caller's limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix {
    pub condition: f64,
}

/// LU factorization with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
    anorm1: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: ArrayView2<'_, f64>) -> Lu {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU requires a square matrix");
        let anorm1 = norm1(a);
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, lu[[r, col]].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 || !pmax.is_finite() {
                singular = true;
                continue;
            }
            if piv != col {
                for j in 0..n {
                    lu.swap([piv, j], [col, j]);
                }
                perm.swap(piv, col);
            }
            let d = lu[[col, col]];
            for r in col + 1..n {
                let f = lu[[r, col]] / d;
                lu[[r, col]] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        lu[[r, j]] -= f * lu[[col, j]];
                    }
                }
            }
        }
        Lu {
            lu,
            perm,
            anorm1,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn is_exactly_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Array1<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s / self.lu[[i, i]];
        }
        x
    }

    /// 1-norm condition number, computed from the explicit inverse. Only meant
    /// for the small k-by-k systems this crate factors.
    pub fn condition(&self) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let n = self.dim();
        let mut inv_norm: f64 = 0.0;
        let mut e = Array1::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(e.view());
            inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
        }
        let c = self.anorm1 * inv_norm;
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

fn norm1(a: ArrayView2<'_, f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve `A x = b` for square `A`, refusing systems whose 1-norm condition
/// estimate exceeds `max_condition`.
pub fn solve_checked(
    a: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    max_condition: f64,
) -> Result<Array1<f64>, SingularMatrix> {
    let lu = Lu::new(a);
    let condition = lu.condition();
    if !(condition <= max_condition) {
        return Err(SingularMatrix { condition });
    }
    Ok(lu.solve(b))
}

/// Solve `A X = B` column by column with the same condition guard.
pub fn solve_many_checked(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    max_condition: f64,
) -> Result<Array2<f64>, SingularMatrix> {
    let lu = Lu::new(a);
    let condition = lu.condition();
    if !(condition <= max_condition) {
        return Err(SingularMatrix { condition });
    }
    let mut x = Array2::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        x.column_mut(j).assign(&lu.solve(col));
    }
    Ok(x)
}

/// Symmetric positive definite band matrix stored by lower diagonals:
/// `bands[d][i] = A[i + d, i]`, so `bands[0]` is the main diagonal.
#[derive(Debug, Clone)]
pub struct SymBand {
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn new(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth)
            .map(|d| vec![0.0; n.saturating_sub(d)])
            .collect();
        Self { bands }
    }

    pub fn n(&self) -> usize {
        self.bands[0].len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bandwidth() {
            0.0
        } else {
            self.bands[d][lo]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        self.bands[hi - lo][lo] += v;
    }

    /// Banded Cholesky solve. Returns `None` if a pivot is not positive.
    pub fn cholesky_solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n();
        let p = self.bandwidth();
        assert_eq!(rhs.len(), n);
        // l[d][j] = L[j + d, j]
        let mut l: Vec<Vec<f64>> = self.bands.clone();
        for j in 0..n {
            let mut diag = l[0][j];
            for k in j.saturating_sub(p)..j {
                let ljk = l[j - k][k];
                diag -= ljk * ljk;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let diag = diag.sqrt();
            l[0][j] = diag;
            for i in j + 1..(j + p + 1).min(n) {
                let mut s = l[i - j][j];
                for k in i.saturating_sub(p)..j {
                    s -= l[i - k][k] * l[j - k][k];
                }
                l[i - j][j] = s / diag;
            }
        }
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(p)..i {
                s -= l[i - k][k] * y[k];
            }
            y[i] = s / l[0][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + p + 1).min(n) {
                s -= l[k - i][i] * y[k];
            }
            y[i] = s / l[0][i];
        }
        Some(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lu_solves_permuted_system() {
        let a = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let x = solve_checked(a.view(), b.view(), 1e12).unwrap();
        for (u, v) in x.iter().zip(x_true.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let err = solve_checked(a.view(), array![1.0, 1.0].view(), 1e12).unwrap_err();
        assert!(err.condition > 1e12);
    }

    #[test]
    fn identity_condition_is_one() {
        let a = Array2::<f64>::eye(4);
        assert_eq!(Lu::new(a.view()).condition(), 1.0);
    }

    #[test]
    fn banded_cholesky_matches_dense_solve() {
        let n = 12;
        let mut band = SymBand::new(n, 2);
        let mut dense = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            band.add(i, i, 6.0 + i as f64 * 0.1);
            dense[[i, i]] += 6.0 + i as f64 * 0.1;
            if i + 1 < n {
                band.add(i + 1, i, -1.5);
                dense[[i + 1, i]] -= 1.5;
                dense[[i, i + 1]] -= 1.5;
            }
            if i + 2 < n {
                band.add(i + 2, i, 0.4);
                dense[[i + 2, i]] += 0.4;
                dense[[i, i + 2]] += 0.4;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let xb = band.cholesky_solve(&rhs).unwrap();
        let xd = solve_checked(dense.view(), Array1::from(rhs).view(), 1e12).unwrap();
        for (u, v) in xb.iter().zip(xd.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(band.get(0, 2), band.get(2, 0));
        assert_eq!(band.get(0, 5), 0.0);
    }

    #[test]
    fn banded_cholesky_rejects_indefinite() {
        let mut band = SymBand::new(2, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 1.0);
        band.add(1, 0, 2.0);
        assert!(band.cholesky_solve(&[1.0, 1.0]).is_none());
    }
}
