//! Real-space correlations, fitted correlation lengths, and the upper bound
//! on the correlation length set by the singularity of `Γ̃(k)` closest to
//! the real momentum axis.
//!
//! For `q > 0` the singularities are branch cuts of the closed form; they
//! are located on a complex-momentum grid by flagging jumps of `Γ̃` across
//! grid edges and confirming each by bisection, which separates a genuine
//! discontinuity (its size persists) from steep smooth variation (its size
//! shrinks with the interval). For `q = 0` the solution is rational in
//! `e^{ik}` and the singularities are poles, found as zeros of the Lyapunov
//! determinant.

use std::f64::consts::PI;

use faer::prelude::SolveLstsq;
use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{re, Mat2};
use crate::model::ModelParams;
use crate::riccati::{closed_form_unchecked, lyapunov_determinant, solve_grid, solve_lyapunov, Branch, GammaK};

/// Real 2×2 correlation blocks `Γ(x)` for `x = 0..L-1`.
#[derive(Clone, Debug)]
pub struct RealSpaceCorrelations {
    pub l: usize,
    pub blocks: Vec<[[f64; 2]; 2]>,
    /// Largest imaginary part discarded by the inverse transform.
    pub max_imag_residue: f64,
}

impl RealSpaceCorrelations {
    /// `Γ(d)` for any integer separation, using `Γ(d + L) = -Γ(d)`.
    pub fn block(&self, d: i64) -> [[f64; 2]; 2] {
        let l = self.l as i64;
        let r = d.rem_euclid(l);
        let wraps = (d - r) / l;
        let b = self.blocks[r as usize];
        if wraps % 2 == 0 {
            b
        } else {
            [[-b[0][0], -b[0][1]], [-b[1][0], -b[1][1]]]
        }
    }

    /// The full `2L × 2L` antisymmetric correlation matrix.
    pub fn full_matrix(&self) -> Mat<f64> {
        let n = 2 * self.l;
        Mat::from_fn(n, n, |a, b| {
            let blk = self.block((a / 2) as i64 - (b / 2) as i64);
            blk[a % 2][b % 2]
        })
    }
}

/// Inverse transform of per-momentum blocks given on the grid.
pub fn correlations_from_momentum(sols: &[GammaK]) -> RealSpaceCorrelations {
    let l = sols.len();
    // Exact phase reduction: k_m x = π n/L with n = (2m-1)x mod 2L.
    let table: Vec<c64> = (0..2 * l)
        .map(|n| {
            let (s, c) = (PI * n as f64 / l as f64).sin_cos();
            c64::new(c, s)
        })
        .collect();
    let half = l as i64 / 2;
    let mut blocks = Vec::with_capacity(l);
    let mut residue = 0.0f64;
    for x in 0..l as i64 {
        let mut acc = Mat2::ZERO;
        for (idx, sol) in sols.iter().enumerate() {
            let m = idx as i64 - half + 1;
            let n = ((2 * m - 1) * x).rem_euclid(2 * l as i64) as usize;
            acc += sol.matrix.scale(table[n]);
        }
        let acc = acc * (1.0 / l as f64);
        let mut blk = [[0.0; 2]; 2];
        for (i, row) in blk.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = acc.get(i, j).re;
                residue = residue.max(acc.get(i, j).im.abs());
            }
        }
        blocks.push(blk);
    }
    RealSpaceCorrelations { l, blocks, max_imag_residue: residue }
}

/// `Γ(x) = (1/L) Σ_k e^{ikx} Γ̃₋(k)` over the momentum grid.
pub fn correlations_real_space(params: &ModelParams) -> Result<RealSpaceCorrelations> {
    Ok(correlations_from_momentum(&solve_grid(params)?))
}

/// Fit samples below this are treated as underflow.
pub const NOISE_FLOOR: f64 = 1e-15;

/// Inclusive range of separations used by a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FitWindow {
    pub lo: usize,
    pub hi: usize,
}

impl FitWindow {
    /// `[8, L/4]`, skipping short-distance transients.
    pub fn default_for(l: usize) -> Self {
        FitWindow { lo: 8, hi: l / 4 }
    }
}

/// Fit of `|Γ(x)| ≈ A e^{-x/ξ} x^{-α}`.
#[derive(Clone, Copy, Debug)]
pub struct FitResult {
    pub amplitude: f64,
    pub alpha: f64,
    /// `+∞` when the fitted exponential rate is not positive.
    pub xi: f64,
    pub window: FitWindow,
    /// Coefficient of determination on the log scale.
    pub r2: f64,
    pub n_points: usize,
}

/// Least-squares fit of `log|Γ_{μν}(x)|` to `log A - x/ξ - α log x`.
/// `entry` selects `(μ, ν)`; the default choice is `(0, 1)`.
pub fn fit_correlation_length(
    corr: &RealSpaceCorrelations,
    window: FitWindow,
    entry: (usize, usize),
) -> Result<FitResult> {
    if window.lo < 1 || window.hi > corr.l / 2 || window.hi < window.lo + 7 {
        return Err(Error::InvalidWindow { lo: window.lo, hi: window.hi, l: corr.l });
    }
    let xs: Vec<f64> = (window.lo..=window.hi).map(|x| x as f64).collect();
    let ys: Vec<f64> = (window.lo..=window.hi)
        .map(|x| corr.blocks[x][entry.0][entry.1].abs())
        .collect();
    let mut fit = fit_decay(&xs, &ys)?;
    fit.window = window;
    Ok(fit)
}

/// Fits samples `(x, y)`; samples below [`NOISE_FLOOR`] are skipped.
pub fn fit_decay(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > NOISE_FLOOR)
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitFailed(format!(
            "{} of {} samples above the noise floor; correlation length too short for the window",
            pts.len(),
            xs.len()
        )));
    }
    let n = pts.len();
    let a = Mat::<f64>::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => -pts[i].0,
        _ => -pts[i].0.ln(),
    });
    let b = Mat::<f64>::from_fn(n, 1, |i, _| pts[i].1);
    let sol = a.qr().solve_lstsq(&b);
    let (c0, c1, c2) = (sol[(0, 0)], sol[(1, 0)], sol[(2, 0)]);
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y) in &pts {
        let pred = c0 - c1 * x - c2 * x.ln();
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean) * (y - mean);
    }
    let xi = if c1 > 0.0 { 1.0 / c1 } else { f64::INFINITY };
    Ok(FitResult {
        amplitude: c0.exp(),
        alpha: c2,
        xi,
        window: FitWindow { lo: xs[0] as usize, hi: *xs.last().unwrap() as usize },
        r2: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        n_points: n,
    })
}

/// Complex-momentum grid: `Re k ∈ [-π, π)` (cell centred), `Im k ∈ [0, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanGrid {
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid { im_max: 3.0, n_re: 2048, n_im: 512 }
    }
}

impl ScanGrid {
    pub fn re_step(&self) -> f64 {
        2.0 * PI / self.n_re as f64
    }

    pub fn im_step(&self) -> f64 {
        self.im_max / (self.n_im - 1) as f64
    }

    fn point(&self, i: usize, j: usize) -> c64 {
        c64::new(-PI + (j as f64 + 0.5) * self.re_step(), i as f64 * self.im_step())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularityKind {
    /// Point on a line of discontinuity.
    Cut,
    /// Isolated pole.
    Pole,
}

#[derive(Clone, Copy, Debug)]
pub struct SingularPoint {
    pub k: c64,
    pub kind: SingularityKind,
    /// Jump size for cut points, `|Γ̃|·distance` for poles.
    pub strength: f64,
}

#[derive(Clone, Debug)]
pub struct SingularityScan {
    pub grid: ScanGrid,
    pub points: Vec<SingularPoint>,
    /// Smallest imaginary part of any singular point, refined below the grid.
    pub min_im: f64,
    /// A discontinuity crosses the real axis.
    pub touches_real_axis: bool,
}

impl SingularityScan {
    /// Imaginary-direction grid spacing.
    pub fn resolution(&self) -> f64 {
        self.grid.im_step()
    }

    /// `true` when `min_im` is not resolved by the grid.
    pub fn below_resolution(&self) -> bool {
        self.touches_real_axis || self.min_im < self.resolution()
    }
}

const CONFIRM_STEPS: usize = 40;
const CONFIRM_MIN_JUMP: f64 = 1e-8;
const SPIKE_RATIO: f64 = 2.0;
const REFINE_TOL: f64 = 1e-6;
const REFINE_SAMPLES: usize = 64;

fn eval(params: &ModelParams, k: c64) -> Option<Mat2> {
    let m = closed_form_unchecked(params, k, Branch::Minus).matrix;
    m.is_finite().then_some(m)
}

/// Bisects toward the half with the larger change. Returns the location and
/// size of a discontinuity on the segment `[a, b]`, if there is one.
fn confirm_jump(params: &ModelParams, mut a: c64, mut b: c64) -> Option<(c64, f64)> {
    let mut ga = eval(params, a)?;
    let mut gb = eval(params, b)?;
    for _ in 0..CONFIRM_STEPS {
        let m = (a + b) * 0.5;
        let gm = eval(params, m)?;
        if (ga - gm).max_abs() > (gm - gb).max_abs() {
            b = m;
            gb = gm;
        } else {
            a = m;
            ga = gm;
        }
    }
    let jump = (ga - gb).max_abs();
    (jump > CONFIRM_MIN_JUMP).then_some(((a + b) * 0.5, jump))
}

/// Scans for singularities of `Γ̃₋(k)` with `0 ≤ Im k ≤ im_max`.
pub fn scan_singularities(params: &ModelParams, im_max: f64, n_re: usize, n_im: usize) -> Result<SingularityScan> {
    if !(im_max > 0.0) || n_re < 8 || n_im < 4 {
        return Err(Error::InvalidParams(format!(
            "scan grid needs im_max > 0, n_re >= 8, n_im >= 4 (got {im_max}, {n_re}, {n_im})"
        )));
    }
    let grid = ScanGrid { im_max, n_re, n_im };
    if params.q() == 0.0 {
        return scan_poles(params, grid);
    }
    scan_cuts(params, grid)
}

fn scan_cuts(params: &ModelParams, grid: ScanGrid) -> Result<SingularityScan> {
    let (nr, ni) = (grid.n_re, grid.n_im);
    let mut hj = vec![0.0f64; nr * ni];
    let mut vj = vec![0.0f64; nr * ni];
    let mut prev: Vec<Option<Mat2>> = Vec::new();
    for i in 0..ni {
        let row: Vec<Option<Mat2>> = (0..nr).map(|j| eval(params, grid.point(i, j))).collect();
        for j in 0..nr {
            // The last edge wraps to -π; Γ̃ is 2π periodic.
            if let (Some(a), Some(b)) = (row[j], row[(j + 1) % nr]) {
                hj[i * nr + j] = (a - b).max_abs();
            }
            if i > 0 {
                if let (Some(a), Some(b)) = (prev[j], row[j]) {
                    vj[(i - 1) * nr + j] = (a - b).max_abs();
                }
            }
        }
        prev = row;
    }
    let spike = |v: f64, n1: f64, n2: f64| v > CONFIRM_MIN_JUMP && v > SPIKE_RATIO * n1.max(n2);
    let mut points = Vec::new();
    let mut on_axis = false;
    for i in 0..ni {
        for j in 0..nr {
            let h = hj[i * nr + j];
            if spike(h, hj[i * nr + (j + nr - 1) % nr], hj[i * nr + (j + 1) % nr]) {
                let a = grid.point(i, j);
                let b = a + grid.re_step();
                if let Some((k, s)) = confirm_jump(params, a, b) {
                    on_axis |= i == 0;
                    points.push(SingularPoint { k: c64::new(k.re, a.im), kind: SingularityKind::Cut, strength: s });
                }
            }
            if i + 1 < ni {
                let v = vj[i * nr + j];
                let below = if i > 0 { vj[(i - 1) * nr + j] } else { 0.0 };
                let above = if i + 2 < ni { vj[(i + 1) * nr + j] } else { 0.0 };
                if spike(v, below, above) {
                    if let Some((k, s)) = confirm_jump(params, grid.point(i, j), grid.point(i + 1, j)) {
                        points.push(SingularPoint { k, kind: SingularityKind::Cut, strength: s });
                    }
                }
            }
        }
    }
    let lowest = points
        .iter()
        .min_by(|a, b| a.k.im.total_cmp(&b.k.im))
        .copied()
        .ok_or(Error::EmptyScan { im_max: grid.im_max })?;
    let min_im = if on_axis { 0.0 } else { refine_tip(params, &grid, lowest.k) };
    Ok(SingularityScan { grid, points, min_im, touches_real_axis: on_axis })
}

/// Whether a discontinuity crosses the horizontal segment of half-width
/// `w` centred on `x0` at height `y`.
fn cut_crosses(params: &ModelParams, x0: f64, w: f64, y: f64) -> bool {
    let pts: Vec<c64> = (0..=REFINE_SAMPLES)
        .map(|s| c64::new(x0 - w + 2.0 * w * s as f64 / REFINE_SAMPLES as f64, y))
        .collect();
    pts.windows(2).any(|e| confirm_jump(params, e[0], e[1]).is_some())
}

/// Lowers the lowest confirmed cut point to the tip of the cut.
fn refine_tip(params: &ModelParams, grid: &ScanGrid, start: c64) -> f64 {
    let w = 4.0 * grid.re_step();
    let x0 = start.re;
    let mut hi = start.im;
    let mut lo = (hi - grid.im_step()).max(0.0);
    while lo > 0.0 && cut_crosses(params, x0, w, lo) {
        hi = lo;
        lo = (lo - grid.im_step()).max(0.0);
    }
    if lo == 0.0 && cut_crosses(params, x0, w, 0.0) {
        return 0.0;
    }
    while hi - lo > REFINE_TOL {
        let mid = 0.5 * (lo + hi);
        if cut_crosses(params, x0, w, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn scan_poles(params: &ModelParams, grid: ScanGrid) -> Result<SingularityScan> {
    // Zeros of the Lyapunov determinant, seeded from local minima of its
    // modulus on a coarse copy of the grid.
    let coarse = ScanGrid { n_re: (grid.n_re / 8).max(16), n_im: (grid.n_im / 8).max(8), ..grid };
    let (nr, ni) = (coarse.n_re, coarse.n_im);
    let vals: Vec<f64> = (0..ni)
        .flat_map(|i| (0..nr).map(move |j| (i, j)))
        .map(|(i, j)| lyapunov_determinant(params, coarse.point(i, j)).norm())
        .collect();
    let mut roots: Vec<c64> = Vec::new();
    for i in 0..ni {
        for j in 0..nr {
            let v = vals[i * nr + j];
            let is_min = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    let ii = i as i64 + di;
                    if (di == 0 && dj == 0) || ii < 0 || ii >= ni as i64 {
                        return true;
                    }
                    let jj = (j as i64 + dj).rem_euclid(nr as i64) as usize;
                    v <= vals[ii as usize * nr + jj]
                })
            });
            if !is_min {
                continue;
            }
            if let Some(z) = newton_root(params, coarse.point(i, j)) {
                let z = c64::new((z.re + PI).rem_euclid(2.0 * PI) - PI, z.im);
                if z.im >= -1e-12 && z.im <= grid.im_max && roots.iter().all(|r| (*r - z).norm() > 1e-8) {
                    roots.push(z);
                }
            }
        }
    }
    let mut points = Vec::new();
    for z in roots {
        let probe = |d: f64| {
            solve_lyapunov(params, z + c64::new(d, 0.0))
                .map(|g| g.matrix.max_abs() * d)
                .unwrap_or(f64::INFINITY)
        };
        let (s1, s2) = (probe(1e-5), probe(1e-6));
        // A genuine pole keeps |Γ̃|·distance fixed as the distance shrinks.
        if s1.is_finite() && s2.is_finite() && s1 > 1e-9 && (s2 / s1 - 1.0).abs() < 0.1 {
            points.push(SingularPoint { k: z, kind: SingularityKind::Pole, strength: s2 });
        }
    }
    let min_im = points
        .iter()
        .map(|p| p.k.im.max(0.0))
        .min_by(f64::total_cmp)
        .ok_or(Error::EmptyScan { im_max: grid.im_max })?;
    Ok(SingularityScan { grid, points, min_im, touches_real_axis: false })
}

fn newton_root(params: &ModelParams, mut z: c64) -> Option<c64> {
    let h = 1e-6;
    for _ in 0..60 {
        let f = lyapunov_determinant(params, z);
        let df = (lyapunov_determinant(params, z + re(h)) - lyapunov_determinant(params, z - re(h))) / (2.0 * h);
        if df.norm() == 0.0 || !df.is_finite() {
            return None;
        }
        let step = f / df;
        z -= step;
        if step.norm() < 1e-13 {
            return Some(z);
        }
    }
    None
}

/// `ξ_up = 1/min_im`, or `+∞` when a cut reaches the real axis.
pub fn xi_upper_bound(scan: &SingularityScan) -> f64 {
    if scan.touches_real_axis || scan.min_im == 0.0 {
        f64::INFINITY
    } else {
        1.0 / scan.min_im
    }
}

/// Near-full-postselection prediction `ξ_up = 1/(1-q)`.
pub fn xi_up_asymptote(q: f64) -> f64 {
    if q >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - q)
    }
}

/// Scans on `grid`, doubling `im_max` (and the imaginary resolution with
/// it) up to four times when nothing is found.
pub fn scan_with_retry(params: &ModelParams, grid: ScanGrid) -> Result<SingularityScan> {
    let mut g = grid;
    for _ in 0..4 {
        match scan_singularities(params, g.im_max, g.n_re, g.n_im) {
            Err(Error::EmptyScan { .. }) => {
                g.im_max *= 2.0;
                g.n_im = 2 * g.n_im - 1;
            }
            other => return other,
        }
    }
    scan_singularities(params, g.im_max, g.n_re, g.n_im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(mu: f64, gamma: f64, q: f64, l: usize) -> ModelParams {
        ModelParams::new(mu, gamma, q, l).unwrap()
    }

    const SMALL: ScanGrid = ScanGrid { im_max: 3.0, n_re: 512, n_im: 128 };

    #[test]
    fn reality_and_antisymmetry() {
        for q in [0.0, 0.5, 1.0] {
            let c = correlations_real_space(&p(0.4, 1.0, q, 64)).unwrap();
            assert!(c.max_imag_residue < 1e-10);
            assert!(c.blocks[0][0][0].abs() < 1e-12 && c.blocks[0][1][1].abs() < 1e-12);
            let g = c.full_matrix();
            for a in 0..128 {
                for b in 0..128 {
                    assert!((g[(a, b)] + g[(b, a)]).abs() < 1e-12);
                }
            }
            for x in 0..64i64 {
                let (f, r) = (c.block(x), c.block(-x));
                for m in 0..2 {
                    for n in 0..2 {
                        assert!((f[m][n] + r[n][m]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn fit_recovers_synthetic_model() {
        let xs: Vec<f64> = (8..=200).map(|x| x as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 * (-x / 5.0).exp() / x).collect();
        let f = fit_decay(&xs, &ys).unwrap();
        assert!((f.xi - 5.0).abs() < 0.05);
        assert!((f.alpha - 1.0).abs() < 1e-6);
        assert!((f.amplitude - 0.7).abs() < 1e-6);
        assert!(f.r2 > 0.999999);
        // Everything below the floor past x ~ 130; those samples are skipped.
        assert!(f.n_points < xs.len());
    }

    #[test]
    fn fit_failures() {
        let c = correlations_real_space(&p(0.4, 1.0, 0.5, 64)).unwrap();
        assert!(matches!(
            fit_correlation_length(&c, FitWindow { lo: 8, hi: 40 }, (0, 1)),
            Err(Error::InvalidWindow { .. })
        ));
        assert!(matches!(
            fit_correlation_length(&c, FitWindow { lo: 8, hi: 10 }, (0, 1)),
            Err(Error::InvalidWindow { .. })
        ));
        let xs: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        assert!(matches!(fit_decay(&xs, &[0.0; 10]), Err(Error::FitFailed(_))));
    }

    #[test]
    fn critical_correlations_are_algebraic() {
        let c = correlations_real_space(&p(0.4, 1.0, 1.0, 2048)).unwrap();
        let f = fit_correlation_length(&c, FitWindow::default_for(2048), (0, 1)).unwrap();
        assert!(f.alpha > 0.0);
        assert!(f.xi > 2048.0, "{f:?}");
    }

    #[test]
    fn cut_touches_axis_at_full_postselection() {
        let s = scan_singularities(&p(0.4, 1.0, 1.0, 64), SMALL.im_max, SMALL.n_re, SMALL.n_im).unwrap();
        assert!(s.touches_real_axis && s.min_im == 0.0);
        assert_eq!(xi_upper_bound(&s), f64::INFINITY);
        assert!(s.points.iter().all(|pt| pt.k.im >= 0.0));
    }

    #[test]
    fn cut_terminates_off_axis_at_partial_postselection() {
        let s = scan_singularities(&p(0.4, 1.0, 0.5, 64), SMALL.im_max, SMALL.n_re, SMALL.n_im).unwrap();
        assert!(!s.touches_real_axis && s.min_im > 0.1);
        assert!(xi_upper_bound(&s).is_finite());
    }

    #[test]
    fn poles_at_zero_postselection() {
        let s = scan_singularities(&p(0.4, 2.0, 0.0, 64), SMALL.im_max, SMALL.n_re, SMALL.n_im).unwrap();
        assert!(s.points.iter().all(|pt| pt.kind == SingularityKind::Pole));
        // Frozen from an independent grid search on |Γ̃| of the Lyapunov solution.
        assert!((s.min_im - 1.17).abs() < 0.02, "{}", s.min_im);
    }

    #[test]
    fn bound_from_reciprocal() {
        let s = SingularityScan { grid: SMALL, points: vec![], min_im: 0.5, touches_real_axis: false };
        assert_eq!(xi_upper_bound(&s), 2.0);
        assert_eq!(xi_up_asymptote(0.99).round(), 100.0);
        assert_eq!(xi_up_asymptote(1.0), f64::INFINITY);
    }

    #[test]
    fn exponential_decay_certificate() {
        let params = p(0.4, 2.0, 0.7, 512);
        let s = scan_singularities(&params, SMALL.im_max, SMALL.n_re, SMALL.n_im).unwrap();
        let c = correlations_real_space(&params).unwrap();
        let weighted = |x: usize| {
            let b = c.blocks[x];
            let m = b.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            // Past the round-off floor the weighted value only measures noise.
            if m > 1e3 * NOISE_FLOOR {
                m * (x as f64 * s.min_im).exp()
            } else {
                0.0
            }
        };
        let head = (1..=16).map(weighted).fold(0.0f64, f64::max);
        let tail = (17..=256).map(weighted).fold(0.0f64, f64::max);
        assert!(tail > 0.0 && tail <= head, "{head} {tail}");
    }

    #[test]
    fn bound_monotone_in_q() {
        let mut last = 0.0;
        for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let s = scan_singularities(&p(0.4, 2.0, q, 64), SMALL.im_max, SMALL.n_re, SMALL.n_im).unwrap();
            let xi = xi_upper_bound(&s);
            assert!(xi >= last * (1.0 - 1e-9), "q={q}: {xi} < {last}");
            last = xi;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn transform_invariants(mu in -0.9f64..0.9, g in 0.3f64..5.0, q in 0.0f64..=1.0) {
            let c = correlations_real_space(&p(mu, g, q, 32)).unwrap();
            prop_assert!(c.max_imag_residue < 1e-10);
            prop_assert!(c.blocks[0][0][0].abs() < 1e-12 && c.blocks[0][1][1].abs() < 1e-12);
            let m = c.full_matrix();
            for a in 0..64 {
                for b in 0..64 {
                    prop_assert!((m[(a, b)] + m[(b, a)]).abs() < 1e-12);
                }
            }
        }
    }
}
