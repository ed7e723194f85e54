//! Model parameters and every operator built from them: the Majorana
//! Hamiltonian kernel and bath matrix in real space, the per-momentum
//! Riccati coefficients, and the momentum grid.
//!
//! Majorana operators are `w_{j,1} = (c_j + c_j†)/√2` and
//! `w_{j,2} = -i(c_j - c_j†)/√2`, ordered site-major so that `(j, μ)` maps to
//! row `2j + μ` (zero based). Fermions obey antiperiodic boundary conditions,
//! `c_L = -c_0`, which is the even-parity sector of the periodic chain and
//! matches the grid `k_m = (2m-1)π/L`.

use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{re, Mat2, I};

/// Physical knobs, validated on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    mu: f64,
    gamma: f64,
    q: f64,
    l: usize,
}

impl ModelParams {
    /// Chemical potential `mu`, loss rate `gamma >= 0`, postselection
    /// fraction `q` in `[0, 1]`, even chain length `l >= 2`.
    pub fn new(mu: f64, gamma: f64, q: f64, l: usize) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be finite, got {mu}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParams(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParams(format!("q must lie in [0, 1], got {q}")));
        }
        if l < 2 || !l.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("L must be even and >= 2, got {l}")));
        }
        Ok(ModelParams { mu, gamma, q, l })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::new(self.mu, self.gamma, q, self.l)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.mu, gamma, self.q, self.l)
    }

    pub fn with_l(&self, l: usize) -> Result<Self> {
        Self::new(self.mu, self.gamma, self.q, l)
    }
}

/// Critical loss rate `4√(1-μ²)`; zero when `|μ| > 1` (no critical phase).
pub fn gamma_c(mu: f64) -> f64 {
    if mu.abs() <= 1.0 {
        4.0 * (1.0 - mu * mu).sqrt()
    } else {
        0.0
    }
}

/// Antiperiodic momenta `k_m = (2m-1)π/L` for `m = -L/2+1, ..., L/2`, ascending.
pub fn k_grid(params: &ModelParams) -> Vec<f64> {
    let l = params.l as i64;
    (-l / 2 + 1..=l / 2)
        .map(|m| (2 * m - 1) as f64 * PI / l as f64)
        .collect()
}

/// Riccati coefficients at one (possibly complex) momentum.
#[derive(Clone, Copy, Debug)]
pub struct KModeMatrices {
    pub k: c64,
    pub x: Mat2,
    pub y: Mat2,
    pub z: Mat2,
    /// `X̃(-k)ᵀ`, the right-hand coefficient of the Riccati flow.
    pub x_minus_t: Mat2,
}

pub fn build_xyz(params: &ModelParams, k: c64) -> KModeMatrices {
    let (mu, g, q) = (params.mu, params.gamma, params.q);
    let d = re(-(1.0 - q) * g / 2.0);
    let ep = (I * k).exp();
    let em = (-I * k).exp();
    let x = Mat2::new(d, re(2.0 * mu) - em * 2.0, re(-2.0 * mu) + ep * 2.0, d);
    let x_minus_t = Mat2::new(d, re(-2.0 * mu) + em * 2.0, re(2.0 * mu) - ep * 2.0, d);
    let j = Mat2::symplectic();
    KModeMatrices {
        k,
        x,
        y: j * (-(1.0 - q / 2.0) * g / 2.0),
        z: j * (-q * g),
        x_minus_t,
    }
}

/// Helper functions entering the closed-form Riccati solution.
#[derive(Clone, Copy, Debug)]
pub struct RisTriple {
    pub r: c64,
    pub i: c64,
    pub s: c64,
}

/// `R = 2μ - 2cos k`, `I = 2 sin k` and
/// `S = √(γ⁴ + 16(R²+I²)² + 8γ²[(1-4q+2q²)I² + R²])` on the principal branch.
pub fn ris(params: &ModelParams, k: c64) -> RisTriple {
    let (mu, g, q) = (params.mu, params.gamma, params.q);
    let r = re(2.0 * mu) - k.cos() * 2.0;
    let i = k.sin() * 2.0;
    let rho = r * r + i * i;
    let g2 = g * g;
    let s2 = re(g2 * g2) + rho * rho * 16.0 + (i * i * (1.0 - 4.0 * q + 2.0 * q * q) + r * r) * (8.0 * g2);
    RisTriple { r, i, s: s2.sqrt() }
}

/// Majorana row of site `j` (zero based) and flavour `mu` in {0, 1}.
pub fn majorana_index(j: usize, mu: usize) -> usize {
    2 * j + mu
}

/// Real-space quadratic forms on `2L` Majorana modes.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    /// Hamiltonian kernel ℍ, antisymmetric and purely imaginary.
    pub h: Mat<c64>,
    /// Bath matrix M, Hermitian.
    pub m: Mat<c64>,
}

impl OperatorSet {
    /// `X = -2iℍ - (1-q) Re M`, real in exact arithmetic.
    pub fn x_matrix(&self, params: &ModelParams) -> Mat<c64> {
        let n = self.h.nrows();
        Mat::from_fn(n, n, |a, b| {
            I * self.h[(a, b)] * -2.0 - re((1.0 - params.q) * self.m[(a, b)].re)
        })
    }
}

pub fn build_real_space_operators(params: &ModelParams) -> OperatorSet {
    let l = params.l;
    let n = 2 * l;
    let mut h = Mat::<c64>::zeros(n, n);
    let mut set = |a: usize, b: usize, v: c64| {
        h[(a, b)] += v;
        h[(b, a)] -= v;
    };
    for j in 0..l {
        set(majorana_index(j, 0), majorana_index(j, 1), I * params.mu);
        // Hopping plus pairing reduces to one Majorana bond per link; the
        // wrap-around link carries the antiperiodic sign.
        let sign = if j + 1 == l { -1.0 } else { 1.0 };
        set(majorana_index(j, 1), majorana_index((j + 1) % l, 0), I * sign);
    }
    let g2 = params.gamma / 2.0;
    let mut m = Mat::<c64>::zeros(n, n);
    for j in 0..l {
        let (a, b) = (majorana_index(j, 0), majorana_index(j, 1));
        m[(a, a)] = re(g2);
        m[(b, b)] = re(g2);
        m[(a, b)] = c64::new(0.0, -g2);
        m[(b, a)] = c64::new(0.0, g2);
    }
    OperatorSet { h, m }
}

/// `Ã(k) = Σ_x e^{-ikx} A(x)` where `A(x)` is the `(x, 0)` site block of a
/// translation-invariant `2L × 2L` matrix.
pub fn fourier_block(a: &Mat<c64>, k: c64) -> Mat2 {
    let l = a.nrows() / 2;
    let mut out = Mat2::ZERO;
    for x in 0..l {
        let ph = (-I * k * x as f64).exp();
        let blk = Mat2::new(
            a[(2 * x, 0)],
            a[(2 * x, 1)],
            a[(2 * x + 1, 0)],
            a[(2 * x + 1, 1)],
        );
        out += blk.scale(ph);
    }
    out
}

/// `Im M` as a complex matrix with zero real part.
pub(crate) fn imag_part(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |a, b| c64::new(m[(a, b)].im, 0.0))
}

/// Site block shared by every site of the bath matrix, `(γ/2)[[1,-i],[i,1]]`.
pub(crate) fn bath_block(params: &ModelParams) -> Mat2 {
    let g2 = params.gamma / 2.0;
    Mat2::new(re(g2), c64::new(0.0, -g2), c64::new(0.0, g2), re(g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use proptest::prelude::*;

    fn p(mu: f64, gamma: f64, q: f64, l: usize) -> ModelParams {
        ModelParams::new(mu, gamma, q, l).unwrap()
    }

    #[test]
    fn validation_names_the_bound() {
        let e = ModelParams::new(0.4, 1.0, 1.5, 4).unwrap_err().to_string();
        assert!(e.contains("q must lie in [0, 1]"), "{e}");
        assert!(ModelParams::new(0.4, -1.0, 0.5, 4).is_err());
        assert!(ModelParams::new(0.4, 1.0, 0.5, 3).is_err());
        assert!(ModelParams::new(0.4, 1.0, 0.5, 0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 0.5, 4).is_err());
    }

    #[test]
    fn gamma_c_values() {
        assert_eq!(gamma_c(0.0), 4.0);
        assert!((gamma_c(0.4) - 3.66606).abs() < 1e-5);
        assert_eq!(gamma_c(1.0), 0.0);
        assert_eq!(gamma_c(1.3), 0.0);
    }

    #[test]
    fn small_grids() {
        let g = k_grid(&p(0.0, 1.0, 0.5, 2));
        assert_eq!(g, vec![-PI / 2.0, PI / 2.0]);
        let g = k_grid(&p(0.0, 1.0, 0.5, 4));
        let want = [-3.0 * PI / 4.0, -PI / 4.0, PI / 4.0, 3.0 * PI / 4.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_orthogonality() {
        for l in [2usize, 4, 8, 64] {
            let ks = k_grid(&p(0.0, 1.0, 0.5, l));
            for x in 0..l {
                let s: c64 = ks.iter().map(|&k| (I * (k * x as f64)).exp()).sum();
                let want = if x == 0 { l as f64 } else { 0.0 };
                assert!((s - re(want)).norm() < 1e-11, "L={l} x={x} s={s}");
            }
        }
    }

    #[test]
    fn xyz_worked_example() {
        let m = build_xyz(&p(0.4, 1.0, 0.5, 4), re(0.0));
        let close = |a: Mat2, b: [[f64; 2]; 2]| (a - Mat2::from_real(b)).max_abs() < 1e-14;
        assert!(close(m.x, [[-0.25, -1.2], [1.2, -0.25]]));
        assert!(close(m.y, [[0.0, -0.375], [0.375, 0.0]]));
        assert!(close(m.z, [[0.0, -0.5], [0.5, 0.0]]));
    }

    #[test]
    fn xyz_limits() {
        let k = c64::new(0.7, 0.2);
        assert_eq!(build_xyz(&p(0.4, 1.0, 0.0, 4), k).z.max_abs(), 0.0);
        let x = build_xyz(&p(0.4, 1.0, 1.0, 4), k).x;
        assert_eq!(x.get(0, 0).norm() + x.get(1, 1).norm(), 0.0);
    }

    #[test]
    fn ris_examples() {
        let k = 0.4f64.acos();
        let t = ris(&p(0.4, 1.0, 0.5, 4), re(k));
        assert!(t.r.norm() < 1e-15);
        assert!((t.i.re - 1.83303).abs() < 1e-5);
        let t = ris(&p(0.4, 1.0, 0.5, 4), re(0.0));
        assert!(t.i.norm() < 1e-15);
        assert!((t.r.re - (0.8 - 2.0)).abs() < 1e-15);
        // With mu = gamma = 0, R² + I² = 4 and S = 4(R² + I²).
        for k in [0.3, 1.1, -2.5] {
            let t = ris(&p(0.0, 0.0, 0.5, 4), re(k));
            assert!((t.s.re - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bath_matrix_blocks() {
        let ops = build_real_space_operators(&p(0.4, 1.0, 0.3, 6));
        let want = bath_block(&p(0.4, 1.0, 0.3, 6));
        assert!((want - Mat2::new(re(0.5), c64::new(0.0, -0.5), c64::new(0.0, 0.5), re(0.5))).max_abs() == 0.0);
        for j in 0..6 {
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(ops.m[(2 * j + a, 2 * j + b)], want.get(a, b));
                }
            }
        }
        let n = 12;
        for a in 0..n {
            for b in 0..n {
                assert_eq!(ops.m[(a, b)], ops.m[(b, a)].conj());
                assert_eq!(ops.h[(a, b)], -ops.h[(b, a)]);
                assert_eq!(ops.h[(a, b)].re, 0.0);
                let same_site = a / 2 == b / 2;
                if !same_site {
                    assert_eq!(ops.m[(a, b)], ZERO);
                }
            }
        }
    }

    #[test]
    fn fourier_round_trip() {
        for l in [2usize, 4, 8, 64] {
            let params = p(0.4, 1.3, 0.35, l);
            let ops = build_real_space_operators(&params);
            let x = ops.x_matrix(&params);
            for a in 0..2 * l {
                for b in 0..2 * l {
                    assert!(x[(a, b)].im.abs() < 1e-15);
                }
            }
            for k in k_grid(&params) {
                let ft = fourier_block(&x, re(k));
                let err = (ft - build_xyz(&params, re(k)).x).max_abs();
                assert!(err < 1e-12, "L={l} k={k} err={err}");
            }
        }
    }

    proptest! {
        #[test]
        fn xk_closed_form(mu in -1.5f64..1.5, g in 0.0f64..6.0, q in 0.0f64..=1.0, kr in -3.2f64..3.2, ki in -1.0f64..1.0) {
            let params = p(mu, g, q, 8);
            let k = c64::new(kr, ki);
            let m = build_xyz(&params, k);
            let d = -(1.0 - q) * g / 2.0;
            prop_assert!((m.x.get(0, 0) - re(d)).norm() < 1e-14);
            prop_assert!((m.x.get(1, 1) - re(d)).norm() < 1e-14);
            prop_assert!((m.x.get(0, 1) - (re(2.0 * mu) - (-I * k).exp() * 2.0)).norm() < 1e-12);
            prop_assert!((m.x.get(1, 0) - (re(-2.0 * mu) + (I * k).exp() * 2.0)).norm() < 1e-12);
            let back = build_xyz(&params, -k).x.transpose();
            prop_assert!((back - m.x_minus_t).max_abs() < 1e-12);
            if q > 0.0 {
                let ratio = (1.0 - q / 2.0) / (2.0 * q);
                prop_assert!((m.y - m.z * ratio).max_abs() < 1e-12);
            }
        }

        #[test]
        fn s_at_full_postselection(mu in -1.5f64..1.5, g in 0.0f64..6.0, k in -3.2f64..3.2) {
            let t = ris(&p(mu, g, 1.0, 8), re(k));
            let (r, i) = (t.r.re, t.i.re);
            let rho = r * r + i * i;
            let want = g.powi(4) + 16.0 * rho * rho + 8.0 * g * g * (r * r - i * i);
            prop_assert!((t.s * t.s - re(want)).norm() < 1e-10 * (1.0 + want.abs()));
        }
    }
}
