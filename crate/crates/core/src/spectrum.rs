//! Rapidities of the quadratic Liouvillian and its gap.
//!
//! Dropping the state-dependent constant `q⟨L†L⟩`, which only shifts the
//! spectrum, the generator is quadratic in the `4L` adjoint Majorana maps.
//! Its structure matrix
//!
//! `𝔸 = [[-2iℍ + i Im M, i(1-q)M], [-i(1-q)Mᵀ, -2iℍ - i Im M]]`
//!
//! has eigenvalues in `±β` pairs; the `β` with `Re β ≥ 0` are the
//! rapidities and `Δ = 2 min Re β`. Translation invariance splits `𝔸` into
//! one `4 × 4` block per momentum.

use faer::{c64, Mat};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{re, Mat2, I, ZERO};
use crate::model::{bath_block, build_real_space_operators, build_xyz, imag_part, k_grid, ModelParams};

/// Largest `L` handled by the dense path.
pub const DENSE_MAX_L: usize = 512;
/// Tolerance for matching `β` with `-β`.
pub const PAIRING_TOL: f64 = 1e-6;

/// Structure matrix, dense or as momentum blocks.
#[derive(Clone, Debug)]
pub enum StructureMatrix {
    Dense { a: Mat<c64>, a0: f64 },
    Blocks { k: Vec<f64>, blocks: Vec<[[c64; 4]; 4]>, a0: f64 },
}

impl StructureMatrix {
    /// `A₀ = Tr M`, the constant that relates rapidities to the steady
    /// eigenvalue of the linear generator, `λ₀ = (Σβ - A₀)/2`.
    pub fn a0(&self) -> f64 {
        match self {
            StructureMatrix::Dense { a0, .. } | StructureMatrix::Blocks { a0, .. } => *a0,
        }
    }

    /// All `4L` eigenvalues in no particular order.
    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        match self {
            StructureMatrix::Dense { a, .. } => a
                .eigenvalues()
                .map_err(|e| Error::Linalg(format!("{e:?}"))),
            StructureMatrix::Blocks { blocks, .. } => {
                let per: Vec<Result<Vec<c64>>> = blocks
                    .par_iter()
                    .map(|b| {
                        Mat::from_fn(4, 4, |i, j| b[i][j])
                            .eigenvalues()
                            .map_err(|e| Error::Linalg(format!("{e:?}")))
                    })
                    .collect();
                let mut out = Vec::with_capacity(4 * blocks.len());
                for p in per {
                    out.extend(p?);
                }
                Ok(out)
            }
        }
    }
}

pub fn build_structure_matrix_dense(params: &ModelParams) -> Result<StructureMatrix> {
    let l = params.l();
    if l > DENSE_MAX_L {
        return Err(Error::TooLarge { what: "dense structure matrix", l, max: DENSE_MAX_L });
    }
    let ops = build_real_space_operators(params);
    let im = imag_part(&ops.m);
    let n = 2 * l;
    let f = 1.0 - params.q();
    let a = Mat::from_fn(2 * n, 2 * n, |r, c| {
        let (br, bc) = (r / n, c / n);
        let (i, j) = (r % n, c % n);
        match (br, bc) {
            (0, 0) => I * ops.h[(i, j)] * -2.0 + I * im[(i, j)],
            (1, 1) => I * ops.h[(i, j)] * -2.0 - I * im[(i, j)],
            (0, 1) => I * ops.m[(i, j)] * f,
            _ => -I * ops.m[(j, i)] * f,
        }
    });
    let a0 = (0..n).map(|i| ops.m[(i, i)].re).sum();
    Ok(StructureMatrix::Dense { a, a0 })
}

/// One `4 × 4` block per grid momentum, with `-2iℍ̃(k) = X̃(k) + (1-q)(γ/2)𝟙`.
pub fn build_structure_blocks_k(params: &ModelParams) -> StructureMatrix {
    let f = 1.0 - params.q();
    let m = bath_block(params);
    let im = Mat2::new(
        re(m.get(0, 0).im),
        re(m.get(0, 1).im),
        re(m.get(1, 0).im),
        re(m.get(1, 1).im),
    );
    let mt = m.transpose();
    let ks = k_grid(params);
    let blocks = ks
        .iter()
        .map(|&k| {
            let h = build_xyz(params, re(k)).x + Mat2::IDENTITY * (f * params.gamma() / 2.0);
            let tl = h + im.scale(I);
            let br = h - im.scale(I);
            let tr = m.scale(I * f);
            let bl = mt.scale(-I * f);
            let mut b = [[ZERO; 4]; 4];
            for i in 0..2 {
                for j in 0..2 {
                    b[i][j] = tl.get(i, j);
                    b[i][j + 2] = tr.get(i, j);
                    b[i + 2][j] = bl.get(i, j);
                    b[i + 2][j + 2] = br.get(i, j);
                }
            }
            b
        })
        .collect();
    StructureMatrix::Blocks { k: ks, blocks, a0: params.l() as f64 * m.trace().re }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RapiditySpectrum {
    /// `2L` rapidities, `Re β ≥ 0`, sorted by descending real part.
    pub beta: Vec<c64>,
    pub gap: f64,
    /// Largest `|β + β'|` over the accepted pairs.
    pub pairing_mismatch: f64,
}

/// Greedy nearest-partner pairing of `(β, -β)`.
///
/// Eigenvalues are visited by descending `|Re|` (ties by `|Im|`) so that
/// well-separated pairs are matched first.
pub fn pair_eigenvalues(ev: &[c64]) -> Result<(Vec<c64>, f64)> {
    let mut order: Vec<usize> = (0..ev.len()).collect();
    order.sort_by(|&a, &b| {
        ev[b].re.abs()
            .total_cmp(&ev[a].re.abs())
            .then(ev[b].im.abs().total_cmp(&ev[a].im.abs()))
    });
    let mut used = vec![false; ev.len()];
    let mut reps = Vec::with_capacity(ev.len() / 2);
    let mut worst = 0.0f64;
    let mut unpaired = Vec::new();
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let best = (0..ev.len())
            .filter(|&j| !used[j])
            .map(|j| (j, (ev[i] + ev[j]).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((j, d)) if d <= PAIRING_TOL * ev[i].norm().max(1.0) => {
                used[j] = true;
                worst = worst.max(d);
                let (a, b) = (ev[i], ev[j]);
                let rep = if a.re > b.re || (a.re == b.re && a.im >= b.im) { a } else { b };
                reps.push(rep);
            }
            _ => unpaired.push(ev[i]),
        }
    }
    if !unpaired.is_empty() {
        return Err(Error::PairingFailure { unpaired });
    }
    Ok((reps, worst))
}

pub fn rapidities(sm: &StructureMatrix) -> Result<RapiditySpectrum> {
    let (mut beta, pairing_mismatch) = pair_eigenvalues(&sm.eigenvalues()?)?;
    beta.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let gap = liouvillian_gap_of(&beta);
    Ok(RapiditySpectrum { beta, gap, pairing_mismatch })
}

fn liouvillian_gap_of(beta: &[c64]) -> f64 {
    let min = beta.iter().map(|b| b.re).fold(f64::INFINITY, f64::min);
    (2.0 * min).max(0.0)
}

/// `Δ = 2 min Re β`.
pub fn liouvillian_gap(spec: &RapiditySpectrum) -> f64 {
    spec.gap
}

/// Gap from the momentum blocks, the production path.
pub fn gap_for(params: &ModelParams) -> Result<f64> {
    Ok(rapidities(&build_structure_blocks_k(params))?.gap)
}

/// Largest distance between matched members of two multisets, matched
/// greedily by nearest neighbour. `∞` if the sizes differ.
pub fn multiset_distance(a: &[c64], b: &[c64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}
