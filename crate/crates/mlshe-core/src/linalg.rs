//! Small dense determinants (n <= 8) by Gaussian elimination with partial
//! pivoting. Matrices of kernel values are additionally handled in log
//! space with row scaling to dodge underflow in far tails.

/// Determinant of a square matrix given as row-major storage.
pub fn det(mat: &[f64], n: usize) -> f64 {
    debug_assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let mut sign = 1.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            sign = -sign;
        }
        let d = a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] / d;
            for c in k..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    let mut out = sign;
    for k in 0..n {
        out *= a[k * n + k];
    }
    out
}

/// Determinant of a matrix whose entries are given in log space
/// (`log_entries[i*n+j] = log m_ij`, all entries positive). Each row is
/// scaled by its maximum before exponentiating; returns `(log_scale, det)`
/// with the true determinant equal to `exp(log_scale) * det`.
pub fn det_log_scaled(log_entries: &[f64], n: usize) -> (f64, f64) {
    let mut scaled = vec![0.0; n * n];
    let mut log_scale = 0.0;
    for i in 0..n {
        let row = &log_entries[i * n..(i + 1) * n];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return (0.0, 0.0);
        }
        log_scale += m;
        for j in 0..n {
            scaled[i * n + j] = (row[j] - m).exp();
        }
    }
    (log_scale, det(&scaled, n))
}

/// Solves a constant-coefficient tridiagonal system repeatedly.
///
/// Stores the Thomas-algorithm factorization of `diag(a, b, a)` so the
/// forward/back sweep can be reused every time step.
pub struct Tridiag {
    sub: f64,
    c_prime: Vec<f64>,
    d_scale: Vec<f64>,
}

impl Tridiag {
    /// Factorization for the n x n matrix with constant diagonal `b` and
    /// off-diagonals `a`.
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        let mut c_prime = vec![0.0; n];
        let mut d_scale = vec![0.0; n];
        let mut denom = b;
        c_prime[0] = a / denom;
        d_scale[0] = 1.0 / denom;
        for i in 1..n {
            denom = b - a * c_prime[i - 1];
            c_prime[i] = a / denom;
            d_scale[i] = 1.0 / denom;
        }
        Tridiag {
            sub: a,
            c_prime,
            d_scale,
        }
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.c_prime.len());
        rhs[0] *= self.d_scale[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub * rhs[i - 1]) * self.d_scale[i];
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.c_prime[i] * next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_2x2_and_3x3() {
        assert!((det(&[1.0, 2.0, 3.0, 4.0], 2) - (-2.0)).abs() < 1e-14);
        let m = [2.0, 0.0, 1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 4.0];
        // expand: 2*(12-0) - 0 + 1*(1-0) = 25
        assert!((det(&m, 3) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn det_singular() {
        assert_eq!(det(&[1.0, 2.0, 2.0, 4.0], 2), 0.0);
    }

    #[test]
    fn log_scaled_matches_direct() {
        let m = [0.5f64, 0.1, 0.2, 0.9];
        let logs: Vec<f64> = m.iter().map(|v| v.ln()).collect();
        let (ls, d) = det_log_scaled(&logs, 2);
        assert!((ls.exp() * d - det(&m, 2)).abs() < 1e-14);
    }

    #[test]
    fn tridiag_solves() {
        // 3x3 system diag(1,4,1)
        let t = Tridiag::new(3, 1.0, 4.0);
        let mut rhs = vec![6.0, 12.0, 14.0];
        t.solve(&mut rhs);
        // verify A x = b
        let x = rhs;
        assert!((4.0 * x[0] + x[1] - 6.0).abs() < 1e-12);
        assert!((x[0] + 4.0 * x[1] + x[2] - 12.0).abs() < 1e-12);
        assert!((x[1] + 4.0 * x[2] - 14.0).abs() < 1e-12);
    }
}
