//! Small fixed-size complex kernels used on the per-momentum hot path, plus
//! a singular-value routine that is safe for near-zero values.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{svd, svd_scratch, ComputeSvdVectors, SvdParams};
use faer::diag::Diag;
use faer::{c64, MatRef, Par, Spec};

pub(crate) const I: c64 = c64 { re: 0.0, im: 1.0 };
pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub(crate) fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// A 2×2 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[c64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: c64, b: c64, c: c64, d: c64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2([[re(m[0][0]), re(m[0][1])], [re(m[1][0]), re(m[1][1])]])
    }

    /// The symplectic unit `[[0, 1], [-1, 0]]`.
    pub fn symplectic() -> Self {
        Mat2::from_real([[0.0, 1.0], [-1.0, 0.0]])
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn adjoint(&self) -> Self {
        let m = self.transpose().0;
        Mat2([[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, s: c64) -> Self {
        let m = self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn trace(&self) -> c64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> c64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let m = self.0;
        Some(Mat2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]).scale(d.inv()))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    /// Both eigenvalues from the characteristic polynomial.
    pub fn eigenvalues(&self) -> [c64; 2] {
        let half_tr = self.trace() * 0.5;
        let disc = (half_tr * half_tr - self.det()).sqrt();
        [half_tr + disc, half_tr - disc]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(re(-1.0))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        self.scale(re(s))
    }
}

/// Gaussian elimination with partial pivoting on a 4×4 system.
/// Returns the solution and the determinant, or `None` when a pivot
/// falls below `tiny`.
pub(crate) fn solve4(mut a: [[c64; 4]; 4], mut b: [c64; 4], tiny: f64) -> Option<([c64; 4], c64)> {
    let mut det = ONE;
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        if a[piv][col].norm() <= tiny || !a[piv][col].is_finite() {
            return None;
        }
        if piv != col {
            a.swap(piv, col);
            b.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        let inv = a[col][col].inv();
        for row in col + 1..4 {
            let f = a[row][col] * inv;
            for c in col..4 {
                let v = a[col][c];
                a[row][c] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [ZERO; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for c in row + 1..4 {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some((x, det))
}

/// Determinant of a 4×4 matrix by elimination.
pub(crate) fn det4(a: [[c64; 4]; 4]) -> c64 {
    solve4(a, [ZERO; 4], 0.0).map_or(ZERO, |(_, d)| d)
}

/// Row-major `vec` of the Sylvester operator `Γ ↦ AΓ + ΓB`.
pub(crate) fn sylvester4(a: &Mat2, b: &Mat2) -> [[c64; 4]; 4] {
    let mut op = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = ZERO;
                    if j == l {
                        v += a.get(i, k);
                    }
                    if i == k {
                        v += b.get(l, j);
                    }
                    op[2 * i + j][2 * k + l] = v;
                }
            }
        }
    }
    op
}

/// Singular values, descending, by implicit QR iteration on the bidiagonal
/// form. The default divide-and-conquer path can emit spurious values of
/// order 1e-4 when many singular values are at rounding level, and the
/// negativity reads its answer off exactly those small values.
pub(crate) fn singular_values_qr(a: MatRef<'_, c64>) -> Result<Vec<f64>, String> {
    let (m, n) = a.shape();
    let params: Spec<SvdParams, c64> = Spec::new(SvdParams { recursion_threshold: usize::MAX, ..faer::auto!(c64) });
    let mut s = Diag::<c64>::zeros(m.min(n));
    let mut buf = MemBuffer::new(svd_scratch::<c64>(m, n, ComputeSvdVectors::No, ComputeSvdVectors::No, Par::Seq, params));
    svd(a, s.as_mut(), None, None, Par::Seq, MemStack::new(&mut buf), params).map_err(|e| format!("{e:?}"))?;
    Ok(s.column_vector().iter().map(|x| x.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        let m = Mat2::new(c64::new(1.0, 2.0), re(-0.5), c64::new(0.0, 3.0), re(4.0));
        let p = m * m.inverse().unwrap();
        assert!((p - Mat2::IDENTITY).max_abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_match_trace_and_det() {
        let m = Mat2::new(c64::new(1.0, 2.0), re(-0.5), c64::new(0.0, 3.0), re(4.0));
        let [a, b] = m.eigenvalues();
        assert!((a + b - m.trace()).norm() < 1e-14);
        assert!((a * b - m.det()).norm() < 1e-13);
    }

    #[test]
    fn sylvester_solve_satisfies_equation() {
        let a = Mat2::new(c64::new(-1.0, 0.3), re(2.0), re(-0.5), c64::new(-0.7, -0.1));
        let b = Mat2::new(re(-0.2), c64::new(0.0, 1.0), re(0.4), re(-1.5));
        let c = Mat2::new(re(1.0), re(2.0), re(3.0), c64::new(0.0, 4.0));
        let rhs = [c.get(0, 0), c.get(0, 1), c.get(1, 0), c.get(1, 1)];
        let (x, det) = solve4(sylvester4(&a, &b), rhs, 1e-300).unwrap();
        let g = Mat2::new(x[0], x[1], x[2], x[3]);
        assert!((a * g + g * b - c).max_abs() < 1e-13);
        assert!((det - det4(sylvester4(&a, &b))).norm() < 1e-14);
    }
}
