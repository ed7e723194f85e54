//! Fermionic logarithmic negativity of a block of `ℓ` sites against the rest
//! of the chain, from the twisted partial transpose of a Gaussian state.
//!
//! With `Ĝ = 2Γ` and the blocks `Ĝ± = [[-Ĝ_AA, ±iĜ_AB], [±iĜ_BA, Ĝ_BB]]`,
//! the composite `Ĝ× = (1 - Ĝ⁺Ĝ⁻)⁻¹(Ĝ⁺ + Ĝ⁻)` has eigenvalue pairs `±iν`
//! and
//!
//! `𝒩 = Σ ln[√((1+ν)/2) + √((1-ν)/2)] + ½ Σ ln[((1+μ)/2)² + ((1-μ)/2)²]`
//!
//! where `±iμ` are the eigenvalue pairs of `Ĝ`. The composite is never
//! formed: `1 - ν` is read off the singular values of a well-conditioned
//! matrix (see [`fermionic_negativity`]), which keeps modes with `ν → 1`
//! accurate.

use std::f64::consts::PI;

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{c64, Mat, Par, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{singular_values_qr, I};
use crate::model::ModelParams;
use crate::spatial::{correlations_real_space, RealSpaceCorrelations};

/// Spectra are clamped to `[0, 1]` once they stray by less than this.
pub const CLAMP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct NegativityResult {
    pub ell: usize,
    /// `(L/π) sin(πℓ/L)`.
    pub chord: f64,
    /// The `L` values `μ_j ∈ [0, 1]` of `Ĝ`, descending.
    pub mu_spectrum: Vec<f64>,
    /// The `L` values `ν_j ∈ [0, 1]` of the composite, descending.
    pub nu_spectrum: Vec<f64>,
    pub value: f64,
}

pub fn chord_length(ell: usize, l: usize) -> f64 {
    l as f64 / PI * (PI * ell as f64 / l as f64).sin()
}

fn clamp_unit(x: f64) -> f64 {
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&x) {
        x
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// `Ĝ` as the Hermitian matrix `-iĜ`, whose eigenvalues are `±μ_j`.
fn hermitian_covariance(g: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(g.nrows(), g.ncols(), |a, b| c64::new(0.0, -2.0 * g[(a, b)]))
}

/// `μ_j` of the full state, descending.
fn mu_values(h: &Mat<c64>) -> Result<Vec<f64>> {
    let ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let n = ev.len() / 2;
    // Ascending ±μ pairs: the upper half holds the non-negative members.
    Ok(ev[n..].iter().rev().map(|&x| clamp_unit(x)).collect())
}

fn mu_term(mu: &[f64]) -> f64 {
    0.5 * mu.iter().map(|m| ((1.0 + m * m) / 2.0).ln()).sum::<f64>()
}

/// `𝒩` for the block made of the first `ell` sites.
///
/// In terms of the Hermitian blocks `Γ₊ = [[-H_AA, iH_AB], [iH_BA, H_BB]]`
/// with `H = -iĜ`, one has `Γ₋ = Γ₊†` and the composite is similar to
/// `(1 + Γ₊Γ₊†)⁻¹(Γ₊ + Γ₊†)`. Writing `1 + Γ₊Γ₊† = CC†`, the matrix
/// `K = C⁻¹(1 - Γ₊)` has `KK† = 1 - (1 + Γ₊Γ₊†)⁻¹(Γ₊ + Γ₊†)`, so its singular
/// values are `√(1 ∓ ν_j)` and the smallest `L` of them give `√(1 - ν_j)`.
pub fn fermionic_negativity(corr: &RealSpaceCorrelations, ell: usize) -> Result<NegativityResult> {
    negativity_of_covariance(&corr.full_matrix(), ell)
}

/// Same as [`fermionic_negativity`] for any real antisymmetric `2L × 2L`
/// covariance `Γ`, for instance one measured on a dense state.
pub fn negativity_of_covariance(gamma: &Mat<f64>, ell: usize) -> Result<NegativityResult> {
    let l = gamma.nrows() / 2;
    if ell > l {
        return Err(Error::InvalidParams(format!("block length {ell} exceeds L = {l}")));
    }
    let h = hermitian_covariance(gamma);
    let mu_spectrum = mu_values(&h)?;
    let n = 2 * l;
    let na = 2 * ell;
    let gp = Mat::from_fn(n, n, |a, b| match (a < na, b < na) {
        (true, true) => -h[(a, b)],
        (false, false) => h[(a, b)],
        _ => I * h[(a, b)],
    });
    let t = Mat::<c64>::identity(n, n) + &gp * gp.adjoint();
    let llt = t
        .llt(Side::Lower)
        .map_err(|_| Error::IllConditionedComposite { ell })?;
    let mut k = Mat::<c64>::identity(n, n) - &gp;
    solve_lower_triangular_in_place(llt.L(), k.as_mut(), Par::Seq);
    let sv = singular_values_qr(k.as_ref()).map_err(Error::Linalg)?;
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::IllConditionedComposite { ell });
    }
    // Descending singular values: the tail holds √(1 - ν_j).
    let small = &sv[l..];
    let nu_spectrum: Vec<f64> = small.iter().map(|s| clamp_unit(1.0 - s * s)).collect();
    let nu_term: f64 = small
        .iter()
        .map(|&s| {
            let s2 = (s * s).min(1.0);
            (((2.0 - s2).sqrt() + s2.sqrt()) / 2f64.sqrt()).ln()
        })
        .sum();
    let value = nu_term + mu_term(&mu_spectrum);
    Ok(NegativityResult { ell, chord: chord_length(ell, l), mu_spectrum, nu_spectrum, value })
}

/// One steady-state solve, then one negativity per block length.
pub fn negativity_profile(params: &ModelParams, ells: &[usize]) -> Result<Vec<NegativityResult>> {
    let corr = correlations_real_space(params)?;
    negativity_profile_from(&corr, ells)
}

pub fn negativity_profile_from(corr: &RealSpaceCorrelations, ells: &[usize]) -> Result<Vec<NegativityResult>> {
    ells.par_iter().map(|&ell| fermionic_negativity(corr, ell)).collect()
}

/// Powers of two below `L/2`, then `L/2`.
pub fn default_ell_grid(l: usize) -> Vec<usize> {
    let half = l / 2;
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |x| Some(x * 2))
        .take_while(|&x| x < half)
        .collect();
    out.push(half);
    out
}

/// Rényi-1/2 entropy of the first `ell` sites, `2 ln Tr √ρ_A`. For a pure
/// Gaussian state the singular values of `Ĝ_AB` are `√(1 - μ_j²)` with `μ_j`
/// the block spectrum, each appearing twice, which gives
/// `S = ½ Σ ln(1 + σ)` without cancellation for `μ_j → 1`.
pub fn renyi_half_entropy_pure(corr: &RealSpaceCorrelations, ell: usize) -> Result<f64> {
    let l = corr.l;
    if ell == 0 || ell == l {
        return Ok(0.0);
    }
    let g = corr.full_matrix();
    let na = 2 * ell;
    let ab = Mat::from_fn(na, 2 * l - na, |a, b| c64::new(2.0 * g[(a, na + b)], 0.0));
    let sv = singular_values_qr(ab.as_ref()).map_err(Error::Linalg)?;
    Ok(0.5 * sv.iter().map(|s| s.min(1.0).ln_1p()).sum::<f64>())
}

/// Straight-line fit `y = slope·x + intercept` with its `R²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    LineFit { slope, intercept: my - slope * mx, r2: sxy * sxy / (sxx * syy) }
}

/// `𝒩` against `ln(chord)` over a profile, skipping `ℓ = 0`.
pub fn fit_log_chord(profile: &[NegativityResult]) -> LineFit {
    let (xs, ys): (Vec<f64>, Vec<f64>) = profile
        .iter()
        .filter(|r| r.ell > 0)
        .map(|r| (r.chord.ln(), r.value))
        .unzip();
    fit_line(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::correlations_real_space;

    fn corr(mu: f64, gamma: f64, q: f64, l: usize) -> RealSpaceCorrelations {
        correlations_real_space(&ModelParams::new(mu, gamma, q, l).unwrap()).unwrap()
    }

    /// Direct diagonalization of the composite, accurate to ~1e-7.
    fn negativity_direct(c: &RealSpaceCorrelations, ell: usize) -> f64 {
        let g = c.full_matrix();
        let n = g.nrows();
        let na = 2 * ell;
        let blk = |s: f64| {
            Mat::from_fn(n, n, |a, b| {
                let v = c64::new(2.0 * g[(a, b)], 0.0);
                match (a < na, b < na) {
                    (true, true) => -v,
                    (false, false) => v,
                    _ => I * v * s,
                }
            })
        };
        let (gp, gm) = (blk(1.0), blk(-1.0));
        let lhs = Mat::<c64>::identity(n, n) - &gp * &gm;
        let comp = lhs.partial_piv_lu().solve(&gp + &gm);
        let ev = comp.eigenvalues().unwrap();
        let mut nu: Vec<f64> = ev.iter().map(|z| z.im.abs()).collect();
        nu.sort_by(|a, b| b.total_cmp(a));
        let t1: f64 = nu
            .iter()
            .step_by(2)
            .map(|&v| {
                let v = v.min(1.0);
                (((1.0 + v) / 2.0).sqrt() + ((1.0 - v) / 2.0).sqrt()).ln()
            })
            .sum();
        let h = hermitian_covariance(&g);
        t1 + mu_term(&mu_values(&h).unwrap())
    }

    use faer::prelude::Solve;

    #[test]
    fn empty_and_full_blocks_vanish() {
        let c = corr(0.4, 1.0, 0.5, 16);
        for ell in [0, 16] {
            assert!(fermionic_negativity(&c, ell).unwrap().value.abs() < 1e-12);
        }
        assert!(fermionic_negativity(&c, 17).is_err());
    }

    #[test]
    fn stable_route_matches_direct_composite() {
        for (q, ell) in [(0.5, 3), (1.0, 4), (0.0, 2), (0.9, 5)] {
            let c = corr(0.4, 1.0, q, 12);
            let a = fermionic_negativity(&c, ell).unwrap().value;
            let b = negativity_direct(&c, ell);
            assert!((a - b).abs() < 1e-6, "q={q} ell={ell}: {a} vs {b}");
        }
    }

    #[test]
    fn pure_state_equals_renyi_half() {
        for l in [16, 64, 128] {
            let c = corr(0.4, 1.0, 1.0, l);
            // ℓ = 2, 8 at L = 128 once picked up spurious singular values.
            for ell in [1, 2, 3, 8, l / 4, l / 2, l - 1] {
                let n = fermionic_negativity(&c, ell).unwrap().value;
                let s = renyi_half_entropy_pure(&c, ell).unwrap();
                assert!((n - s).abs() < 1e-8, "L={l} ell={ell}: {n} vs {s}");
            }
        }
    }

    #[test]
    fn spectra_are_clamped_and_value_non_negative() {
        let c = corr(0.4, 1.0, 0.75, 32);
        for ell in [1, 5, 16] {
            let r = fermionic_negativity(&c, ell).unwrap();
            assert_eq!(r.mu_spectrum.len(), 32);
            assert_eq!(r.nu_spectrum.len(), 32);
            assert!(r.mu_spectrum.iter().chain(&r.nu_spectrum).all(|v| (0.0..=1.0).contains(v)));
            assert!(r.value >= -1e-10);
        }
    }

    #[test]
    fn bipartition_symmetry_at_full_postselection() {
        let c = corr(0.4, 1.0, 1.0, 32);
        for ell in [1, 6, 13] {
            let a = fermionic_negativity(&c, ell).unwrap().value;
            let b = fermionic_negativity(&c, 32 - ell).unwrap().value;
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn ell_grid_and_chord() {
        assert_eq!(default_ell_grid(512), vec![1, 2, 4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(default_ell_grid(12), vec![1, 2, 4, 6]);
        assert!((chord_length(256, 512) - 512.0 / PI).abs() < 1e-12);
        assert_eq!(chord_length(0, 8), 0.0);
    }

    #[test]
    fn line_fit_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.25 * x - 1.0).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope - 0.25).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn spectra_in_unit_interval_and_value_non_negative(
            mu in -1.5f64..1.5, g in 0.2f64..5.0, q in 0.05f64..=1.0, ell in 1usize..12,
        ) {
            let c = corr(mu, g, q, 12);
            let r = fermionic_negativity(&c, ell).unwrap();
            proptest::prop_assert!(r.mu_spectrum.iter().chain(&r.nu_spectrum).all(|v| (0.0..=1.0).contains(v)));
            proptest::prop_assert!(r.value >= -1e-10, "value {}", r.value);
            let mirror = fermionic_negativity(&c, 12 - ell).unwrap().value;
            proptest::prop_assert!((r.value - mirror).abs() < 1e-8);
        }
    }
}
