//! Brute-force ground truth on a few sites.
//!
//! The chain is written on the full Fock space with a Jordan–Wigner string,
//! the nonlinear master equation is integrated directly, and the same
//! dynamics is sampled with quantum trajectories. Nothing here relies on
//! Gaussianity, so agreement with the Riccati solution is a genuine check.
//!
//! The generator is
//!
//! `ρ̇ = -i[H, ρ] + Σ_j [(1-q) L_j ρ L_j† - ½{L_j†L_j, ρ} + q⟨L_j†L_j⟩ρ]`
//!
//! with `L_j = √γ c_j` and `⟨A⟩ = Tr(ρA)/Tr ρ`.

use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{re, I, ONE, ZERO};
use crate::model::{gamma_c, majorana_index, ModelParams};

/// Largest chain handled by the dense master equation.
pub const DENSE_MAX_L: usize = 6;
/// Largest chain handled by the trajectory sampler.
pub const TRAJECTORY_MAX_L: usize = 4;
/// Largest chain handled by the dense Liouvillian.
pub const LIOUVILLIAN_MAX_L: usize = 4;

/// `c_j |s⟩` for a basis state `s` whose bits are occupations:
/// the target state and the Jordan–Wigner sign, or `None` if site `j` is
/// empty.
fn annihilate(j: usize, s: usize) -> Option<(usize, f64)> {
    if s >> j & 1 == 0 {
        return None;
    }
    let parity = (s & ((1 << j) - 1)).count_ones();
    Some((s ^ (1 << j), if parity.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

fn scaled(m: &Mat<c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

fn check_size(what: &'static str, l: usize, max: usize) -> Result<()> {
    if l > max {
        Err(Error::TooLarge { what, l, max })
    } else {
        Ok(())
    }
}

/// Dense operators on the `2^L`-dimensional Fock space.
#[derive(Clone, Debug)]
pub struct DenseOperators {
    pub l: usize,
    pub dim: usize,
    /// Annihilators `c_j`.
    pub c: Vec<Mat<c64>>,
    pub h: Mat<c64>,
    /// Jump operators `L_j = √γ c_j`.
    pub jumps: Vec<Mat<c64>>,
}

impl DenseOperators {
    /// Majoranas `w_{j,0} = (c + c†)/√2`, `w_{j,1} = -i(c - c†)/√2`, in
    /// model order.
    pub fn majoranas(&self) -> Vec<Mat<c64>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::with_capacity(2 * self.l);
        for c in &self.c {
            let cd = c.adjoint().to_owned();
            out.push(scaled(&(c + &cd), re(s)));
            out.push(scaled(&(c - &cd), -I * s));
        }
        out
    }
}

/// `H = -Σ_j (c_j†c_{j+1} + c_j†c_{j+1}† + h.c.) + 2μ Σ_j c_j†c_j` with
/// `c_L = -c_0`.
pub fn build_dense_operators(params: &ModelParams) -> Result<DenseOperators> {
    let l = params.l();
    check_size("dense operators", l, DENSE_MAX_L)?;
    let dim = 1 << l;
    let c: Vec<Mat<c64>> = (0..l)
        .map(|j| {
            let mut m = Mat::<c64>::zeros(dim, dim);
            for s in 0..dim {
                if let Some((t, sg)) = annihilate(j, s) {
                    m[(t, s)] = re(sg);
                }
            }
            m
        })
        .collect();
    let mut h = Mat::<c64>::zeros(dim, dim);
    for j in 0..l {
        let nxt = (j + 1) % l;
        let sign = if j + 1 == l { -1.0 } else { 1.0 };
        let cd = c[j].adjoint().to_owned();
        let hop = scaled(&(&cd * &c[nxt]), re(sign));
        let pair = scaled(&(&cd * c[nxt].adjoint()), re(sign));
        h -= &hop + hop.adjoint() + &pair + pair.adjoint();
        h += scaled(&(&cd * &c[j]), re(2.0 * params.mu()));
    }
    let jumps = c.iter().map(|m| scaled(m, re(params.gamma().sqrt()))).collect();
    Ok(DenseOperators { l, dim, c, h, jumps })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Time step of both the master equation and the trajectories.
    pub dt: f64,
    /// Longest master-equation integration time.
    pub t_max: f64,
    /// Stationarity threshold on `‖∂ₜρ‖_max`.
    pub tol: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Length of each trajectory run; the second half is averaged.
    pub traj_time: f64,
    /// Independent trajectory batches used for the standard error.
    pub batches: usize,
}

impl OracleConfig {
    pub fn for_params(params: &ModelParams) -> Self {
        let slow = params.q() == 1.0 && params.gamma() < gamma_c(params.mu());
        OracleConfig {
            dt: 0.01 / params.gamma().max(4.0 * (1.0 + params.mu().abs())),
            t_max: if slow { 5000.0 } else { 500.0 },
            tol: 1e-10,
            n_traj: 10_000,
            seed: 0,
            traj_time: 40.0,
            batches: 10,
        }
    }

    fn validate(&self, params: &ModelParams) -> Result<()> {
        let max_dt = 0.01 / params.gamma().max(4.0 * (1.0 + params.mu().abs()));
        if !(self.dt > 0.0 && self.dt <= max_dt * (1.0 + 1e-12)) {
            return Err(Error::InvalidParams(format!("dt must lie in (0, {max_dt}], got {}", self.dt)));
        }
        if self.n_traj == 0 || self.batches == 0 || self.n_traj < self.batches {
            return Err(Error::InvalidParams(format!(
                "need n_traj >= batches >= 1, got n_traj = {}, batches = {}",
                self.n_traj, self.batches
            )));
        }
        Ok(())
    }
}

/// The generator in a form cheap to apply to a row-major `ρ`.
struct Generator {
    dim: usize,
    h: Vec<(usize, usize, c64)>,
    /// Per site, the pairs `(s', s, sign)` with `c_j|s'⟩ = sign |s⟩`.
    moves: Vec<Vec<(usize, usize, f64)>>,
    /// Total occupation of each basis state.
    occ: Vec<f64>,
    gamma: f64,
    q: f64,
}

impl Generator {
    fn new(params: &ModelParams, ops: &DenseOperators) -> Self {
        let dim = ops.dim;
        let mut h = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                if ops.h[(r, c)] != ZERO {
                    h.push((r, c, ops.h[(r, c)]));
                }
            }
        }
        let moves = (0..ops.l)
            .map(|j| (0..dim).filter_map(|s| annihilate(j, s).map(|(t, sg)| (s, t, sg))).collect())
            .collect();
        let occ = (0..dim).map(|s: usize| s.count_ones() as f64).collect();
        Generator { dim, h, moves, occ, gamma: params.gamma(), q: params.q() }
    }

    /// Full nonlinear generator.
    fn apply(&self, rho: &[c64], out: &mut [c64]) {
        let d = self.dim;
        self.apply_linear(rho, out);
        let tr: f64 = (0..d).map(|s| rho[s * d + s].re).sum();
        let n_mean: f64 = (0..d).map(|s| self.occ[s] * rho[s * d + s].re).sum::<f64>() / tr;
        let shift = self.q * self.gamma * n_mean;
        for (o, r) in out.iter_mut().zip(rho) {
            *o += r * shift;
        }
    }

    /// Everything but the state-dependent shift `q⟨L†L⟩ρ`.
    fn apply_linear(&self, rho: &[c64], out: &mut [c64]) {
        let d = self.dim;
        out.fill(ZERO);
        for &(r, c, v) in &self.h {
            let mi = -I * v;
            for t in 0..d {
                out[r * d + t] += mi * rho[c * d + t];
                out[t * d + c] -= mi * rho[t * d + r];
            }
        }
        let jump = (1.0 - self.q) * self.gamma;
        for mv in &self.moves {
            for &(sp, s, ss) in mv {
                for &(tp, t, ts) in mv {
                    out[s * d + t] += rho[sp * d + tp] * (jump * ss * ts);
                }
            }
        }
        for s in 0..d {
            for t in 0..d {
                out[s * d + t] -= rho[s * d + t] * (0.5 * self.gamma * (self.occ[s] + self.occ[t]));
            }
        }
    }
}

/// Stationary density matrix with its integration diagnostics.
#[derive(Clone, Debug)]
pub struct DenseState {
    pub l: usize,
    pub rho: Mat<c64>,
    pub time: f64,
    /// `‖∂ₜρ‖_max` at the end.
    pub residual: f64,
    /// Largest `|Tr ρ - 1|` seen during the run.
    pub trace_drift: f64,
}

/// RK4 from the maximally mixed state until `‖∂ₜρ‖_max < tol`. The trace
/// is never renormalized; its drift is reported.
pub fn evolve_master_equation(params: &ModelParams, cfg: &OracleConfig) -> Result<DenseState> {
    let ops = build_dense_operators(params)?;
    let g = Generator::new(params, &ops);
    let d = g.dim;
    let n = d * d;
    let mut rho = vec![ZERO; n];
    for s in 0..d {
        rho[s * d + s] = re(1.0 / d as f64);
    }
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let dt = cfg.dt;
    let mut time = 0.0;
    let mut drift = 0.0f64;
    let converged = loop {
        g.apply(&rho, &mut k1);
        let residual = k1.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if residual < cfg.tol {
            break Some(residual);
        }
        if time > cfg.t_max {
            return Err(Error::NotConverged { time, residual, drift });
        }
        for i in 0..n {
            tmp[i] = rho[i] + k1[i] * (0.5 * dt);
        }
        g.apply(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = rho[i] + k2[i] * (0.5 * dt);
        }
        g.apply(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = rho[i] + k3[i] * dt;
        }
        g.apply(&tmp, &mut k4);
        for i in 0..n {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        time += dt;
        let tr: f64 = (0..d).map(|s| rho[s * d + s].re).sum();
        drift = drift.max((tr - 1.0).abs());
    };
    let residual = converged.unwrap_or(0.0);
    Ok(DenseState {
        l: params.l(),
        rho: Mat::from_fn(d, d, |r, c| rho[r * d + c]),
        time,
        residual,
        trace_drift: drift,
    })
}

/// `Γ_ab = (i/2) Tr(ρ[w_a, w_b]) / Tr ρ`, with the largest discarded
/// imaginary part.
pub fn covariance_from_density(rho: &Mat<c64>, ops: &DenseOperators) -> (Mat<f64>, f64) {
    let w = ops.majoranas();
    let n = w.len();
    let tr = rho.diagonal().column_vector().iter().map(|z| z.re).sum::<f64>();
    let mut out = Mat::<f64>::zeros(n, n);
    let mut residue = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            let comm = &w[a] * &w[b] - &w[b] * &w[a];
            let prod = rho * comm;
            let t: c64 = prod.diagonal().column_vector().iter().sum();
            let v = I * t * (0.5 / tr);
            residue = residue.max(v.im.abs());
            out[(a, b)] = v.re;
            out[(b, a)] = -v.re;
        }
    }
    (out, residue)
}

/// Largest entry difference between two matrices of equal shape.
pub fn max_entry_error(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut e = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            e = e.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    e
}

/// Linear part of the generator as a `4^L × 4^L` superoperator acting on
/// row-major `vec ρ`.
pub fn dense_liouvillian(params: &ModelParams) -> Result<Mat<c64>> {
    check_size("dense Liouvillian", params.l(), LIOUVILLIAN_MAX_L)?;
    let ops = build_dense_operators(params)?;
    let g = Generator::new(params, &ops);
    let d = g.dim;
    let n = d * d;
    let mut sup = Mat::<c64>::zeros(n, n);
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for k in 0..n {
        e.fill(ZERO);
        e[k] = ONE;
        g.apply_linear(&e, &mut col);
        for (r, v) in col.iter().enumerate() {
            sup[(r, k)] = *v;
        }
    }
    Ok(sup)
}

/// Leading eigenvalue of the linear generator and the gap above it, both
/// restricted to operators that commute with fermion parity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvillianSummary {
    pub lambda0: c64,
    pub even_gap: f64,
}

pub fn liouvillian_summary(params: &ModelParams) -> Result<LiouvillianSummary> {
    let sup = dense_liouvillian(params)?;
    let d = 1usize << params.l();
    let keep: Vec<usize> = (0..d * d)
        .filter(|&k| ((k / d).count_ones() + (k % d).count_ones()).is_multiple_of(2))
        .collect();
    let m = Mat::from_fn(keep.len(), keep.len(), |i, j| sup[(keep[i], keep[j])]);
    let mut ev = m.eigenvalues().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(LiouvillianSummary { lambda0: ev[0], even_gap: ev[0].re - ev[1].re })
}

/// How trajectories with a click are postselected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unraveling {
    /// A click discards the trajectory with probability `q`; discarded
    /// walkers are replaced by clones of random survivors.
    BiasedDiscard,
    /// With probability `q` the detector stays silent whatever happens:
    /// the no-click branch is applied and the walker weight picks up its
    /// probability. Walkers are resampled when the effective sample size
    /// drops below half.
    UndetectedMixing,
}

#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    /// Weighted mean covariance over walkers and the second half of the run.
    pub covariance: Mat<f64>,
    /// Standard error of each entry from the spread of batch means.
    pub std_err: Mat<f64>,
    pub clicks: u64,
    pub discarded: u64,
    /// Largest entry spread of the single-walker covariances at the end of
    /// the run, zero when the evolution is deterministic.
    pub final_spread: f64,
}

/// Precomputed pieces of one trajectory step.
struct Stepper {
    dim: usize,
    l: usize,
    /// `exp(-iH dt/2)`, row-major.
    half_u: Vec<c64>,
    /// `e^{-γdt/2}` applied to occupied amplitudes in the no-click branch.
    damp: f64,
    /// Click probability per unit occupation, `1 - e^{-γdt}`.
    p_click: f64,
    /// `i w_a w_b` for `a < b`, row-major.
    pairs: Vec<(usize, usize, Vec<c64>)>,
}

impl Stepper {
    fn new(params: &ModelParams, ops: &DenseOperators, dt: f64) -> Result<Self> {
        let eig = ops
            .h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let d = ops.dim;
        let (u, s) = (eig.U(), eig.S().column_vector());
        let half_u = (0..d * d)
            .map(|k| {
                let (r, c) = (k / d, k % d);
                (0..d)
                    .map(|m| u[(r, m)] * (-I * s[m] * (dt / 2.0)).exp() * u[(c, m)].conj())
                    .sum()
            })
            .collect();
        let w = ops.majoranas();
        let mut pairs = Vec::new();
        for a in 0..w.len() {
            for b in a + 1..w.len() {
                let p = scaled(&(&w[a] * &w[b]), I);
                pairs.push((a, b, (0..d * d).map(|k| p[(k / d, k % d)]).collect()));
            }
        }
        let g = params.gamma();
        Ok(Stepper {
            dim: d,
            l: ops.l,
            half_u,
            damp: (-g * dt / 2.0).exp(),
            p_click: 1.0 - (-g * dt).exp(),
            pairs,
        })
    }

    fn unitary(&self, psi: &mut [c64], tmp: &mut [c64]) {
        let d = self.dim;
        for r in 0..d {
            tmp[r] = (0..d).map(|c| self.half_u[r * d + c] * psi[c]).sum();
        }
        psi.copy_from_slice(&tmp[..d]);
    }

    fn occupation(&self, psi: &[c64], j: usize) -> f64 {
        psi.iter().enumerate().filter(|(s, _)| s >> j & 1 == 1).map(|(_, z)| z.norm_sqr()).sum()
    }

    /// No-click branch, renormalized. Returns the branch probability.
    fn no_click(&self, psi: &mut [c64], j: usize) -> f64 {
        for (s, z) in psi.iter_mut().enumerate() {
            if s >> j & 1 == 1 {
                *z *= self.damp;
            }
        }
        normalize(psi)
    }

    fn jump(&self, psi: &mut [c64], j: usize, tmp: &mut [c64]) {
        tmp[..self.dim].fill(ZERO);
        for (s, z) in psi.iter().enumerate() {
            if let Some((t, sg)) = annihilate(j, s) {
                tmp[t] = *z * sg;
            }
        }
        psi.copy_from_slice(&tmp[..self.dim]);
        normalize(psi);
    }

    fn covariance(&self, psi: &[c64], out: &mut [f64]) {
        let d = self.dim;
        let n = 2 * self.l;
        for (a, b, p) in &self.pairs {
            let mut v = ZERO;
            for r in 0..d {
                let row: c64 = (0..d).map(|c| p[r * d + c] * psi[c]).sum();
                v += psi[r].conj() * row;
            }
            out[a * n + b] = v.re;
            out[b * n + a] = -v.re;
        }
    }
}

fn normalize(psi: &mut [c64]) -> f64 {
    let nrm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let s = 1.0 / nrm.sqrt();
    for z in psi.iter_mut() {
        *z *= s;
    }
    nrm
}

struct BatchOutcome {
    mean: Vec<f64>,
    clicks: u64,
    discarded: u64,
    spread: f64,
}

fn run_batch(
    params: &ModelParams,
    stepper: &Stepper,
    cfg: &OracleConfig,
    unraveling: Unraveling,
    walkers: usize,
    stream: u64,
) -> Result<BatchOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let d = stepper.dim;
    let l = stepper.l;
    let nn = 4 * l * l;
    let q = params.q();
    // Every walker starts in the vacuum.
    let mut psi = vec![ZERO; walkers * d];
    for w in 0..walkers {
        psi[w * d] = ONE;
    }
    let mut weight = vec![1.0f64; walkers];
    let mut alive = vec![true; walkers];
    let mut tmp = vec![ZERO; d];
    let mut cov = vec![0.0; nn];
    let mut acc = vec![0.0; nn];
    let mut acc_w = 0.0;
    let steps = (cfg.traj_time / cfg.dt).ceil() as usize;
    let every = ((0.05 / cfg.dt).round() as usize).max(1);
    let (mut clicks, mut discarded) = (0u64, 0u64);
    for step in 0..steps {
        for w in 0..walkers {
            let p = &mut psi[w * d..(w + 1) * d];
            stepper.unitary(p, &mut tmp);
            for j in 0..l {
                let p1 = stepper.p_click * stepper.occupation(p, j);
                match unraveling {
                    Unraveling::BiasedDiscard => {
                        if rng.random::<f64>() < p1 {
                            clicks += 1;
                            if rng.random::<f64>() < q {
                                alive[w] = false;
                                discarded += 1;
                                break;
                            }
                            stepper.jump(p, j, &mut tmp);
                        } else {
                            stepper.no_click(p, j);
                        }
                    }
                    Unraveling::UndetectedMixing => {
                        if rng.random::<f64>() < q {
                            weight[w] *= stepper.no_click(p, j);
                        } else if rng.random::<f64>() < p1 {
                            clicks += 1;
                            stepper.jump(p, j, &mut tmp);
                        } else {
                            stepper.no_click(p, j);
                        }
                    }
                }
            }
            if alive[w] {
                stepper.unitary(p, &mut tmp);
            }
        }
        let time = (step + 1) as f64 * cfg.dt;
        match unraveling {
            Unraveling::BiasedDiscard => {
                let survivors: Vec<usize> = (0..walkers).filter(|&w| alive[w]).collect();
                if survivors.is_empty() {
                    return Err(Error::AllDiscarded { time });
                }
                for w in 0..walkers {
                    if !alive[w] {
                        let src = survivors[rng.random_range(0..survivors.len())];
                        psi.copy_within(src * d..(src + 1) * d, w * d);
                        alive[w] = true;
                    }
                }
            }
            Unraveling::UndetectedMixing => {
                let total: f64 = weight.iter().sum();
                let sq: f64 = weight.iter().map(|x| x * x).sum();
                for x in weight.iter_mut() {
                    *x *= walkers as f64 / total;
                }
                if total * total / sq < walkers as f64 / 2.0 {
                    systematic_resample(&mut psi, &mut weight, d, &mut rng);
                }
            }
        }
        if time >= cfg.traj_time / 2.0 && step % every == 0 {
            for w in 0..walkers {
                stepper.covariance(&psi[w * d..(w + 1) * d], &mut cov);
                for (a, c) in acc.iter_mut().zip(&cov) {
                    *a += weight[w] * c;
                }
                acc_w += weight[w];
            }
        }
    }
    let mut spread = 0.0f64;
    let mut lo = vec![f64::INFINITY; nn];
    let mut hi = vec![f64::NEG_INFINITY; nn];
    for w in 0..walkers {
        stepper.covariance(&psi[w * d..(w + 1) * d], &mut cov);
        for k in 0..nn {
            lo[k] = lo[k].min(cov[k]);
            hi[k] = hi[k].max(cov[k]);
        }
    }
    for k in 0..nn {
        spread = spread.max(hi[k] - lo[k]);
    }
    Ok(BatchOutcome { mean: acc.iter().map(|a| a / acc_w).collect(), clicks, discarded, spread })
}

/// Resample walkers in proportion to their weights with one uniform draw,
/// then reset all weights to one.
fn systematic_resample(psi: &mut Vec<c64>, weight: &mut [f64], d: usize, rng: &mut ChaCha8Rng) {
    let n = weight.len();
    let total: f64 = weight.iter().sum();
    let u0 = rng.random::<f64>();
    let mut out = Vec::with_capacity(psi.len());
    let mut cum = 0.0;
    let mut src = 0;
    for i in 0..n {
        let target = (i as f64 + u0) / n as f64 * total;
        while src + 1 < n && cum + weight[src] < target {
            cum += weight[src];
            src += 1;
        }
        out.extend_from_slice(&psi[src * d..(src + 1) * d]);
    }
    *psi = out;
    weight.fill(1.0);
}

/// Ensemble covariance from `cfg.n_traj` walkers split into `cfg.batches`
/// independent batches, each on its own ChaCha stream. The result does not
/// depend on the number of worker threads.
pub fn sample_trajectories(params: &ModelParams, cfg: &OracleConfig, unraveling: Unraveling) -> Result<TrajectoryEnsemble> {
    check_size("trajectory sampler", params.l(), TRAJECTORY_MAX_L)?;
    cfg.validate(params)?;
    let ops = build_dense_operators(params)?;
    let stepper = Stepper::new(params, &ops, cfg.dt)?;
    let per = cfg.n_traj / cfg.batches;
    let outcomes: Vec<Result<BatchOutcome>> = (0..cfg.batches)
        .into_par_iter()
        .map(|b| run_batch(params, &stepper, cfg, unraveling, per, b as u64))
        .collect();
    let outcomes: Vec<BatchOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let n = 2 * params.l();
    let nb = outcomes.len() as f64;
    let mean = |k: usize| outcomes.iter().map(|o| o.mean[k]).sum::<f64>() / nb;
    let covariance = Mat::from_fn(n, n, |a, b| mean(a * n + b));
    let std_err = Mat::from_fn(n, n, |a, b| {
        let k = a * n + b;
        let m = mean(k);
        if nb < 2.0 {
            return f64::INFINITY;
        }
        let var = outcomes.iter().map(|o| (o.mean[k] - m).powi(2)).sum::<f64>() / (nb - 1.0);
        (var / nb).sqrt()
    });
    Ok(TrajectoryEnsemble {
        covariance,
        std_err,
        clicks: outcomes.iter().map(|o| o.clicks).sum(),
        discarded: outcomes.iter().map(|o| o.discarded).sum(),
        final_spread: outcomes.iter().map(|o| o.spread).fold(0.0, f64::max),
    })
}

/// Largest `|a - b|/σ` over the entries with `σ > 0`.
pub fn max_z_score(a: &Mat<f64>, b: &Mat<f64>, sigma: &Mat<f64>) -> f64 {
    let mut z = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = (a[(i, j)] - b[(i, j)]).abs();
            if sigma[(i, j)] > 0.0 {
                z = z.max(d / sigma[(i, j)]);
            } else if d > 0.0 {
                z = f64::INFINITY;
            }
        }
    }
    z
}

/// Covariance of the dense steady state, the one-call form used in
/// comparisons.
pub fn oracle_covariance(params: &ModelParams, cfg: &OracleConfig) -> Result<(Mat<f64>, DenseState)> {
    let ops = build_dense_operators(params)?;
    let state = evolve_master_equation(params, cfg)?;
    let (cov, _) = covariance_from_density(&state.rho, &ops);
    Ok((cov, state))
}

/// The `(i, j)` site block of a site-major covariance matrix.
pub fn site_block(cov: &Mat<f64>, i: usize, j: usize) -> [[f64; 2]; 2] {
    let mut b = [[0.0; 2]; 2];
    for (mu, row) in b.iter_mut().enumerate() {
        for (nu, v) in row.iter_mut().enumerate() {
            *v = cov[(majorana_index(i, mu), majorana_index(j, nu))];
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::correlations_real_space;
    use crate::spectrum::{build_structure_matrix_dense, rapidities};

    fn p(mu: f64, gamma: f64, q: f64, l: usize) -> ModelParams {
        ModelParams::new(mu, gamma, q, l).unwrap()
    }

    fn max_abs(m: &Mat<c64>) -> f64 {
        let mut e = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                e = e.max(m[(i, j)].norm());
            }
        }
        e
    }

    #[test]
    fn canonical_anticommutators() {
        for l in [2, 4] {
            let ops = build_dense_operators(&p(0.4, 1.0, 0.5, l)).unwrap();
            let id = Mat::<c64>::identity(ops.dim, ops.dim);
            for i in 0..l {
                for j in 0..l {
                    let (ci, cj) = (&ops.c[i], &ops.c[j]);
                    let cjd = cj.adjoint().to_owned();
                    let mixed = ci * &cjd + &cjd * ci;
                    let expect = if i == j { id.clone() } else { Mat::zeros(ops.dim, ops.dim) };
                    assert_eq!(max_abs(&(mixed - expect)), 0.0);
                    assert_eq!(max_abs(&(ci * cj + cj * ci)), 0.0);
                }
            }
            assert_eq!(max_abs(&(&ops.h - ops.h.adjoint())), 0.0);
        }
        assert!(matches!(build_dense_operators(&p(0.4, 1.0, 0.5, 8)), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn loss_annihilates_the_vacuum() {
        let ops = build_dense_operators(&p(0.4, 1.0, 0.5, 4)).unwrap();
        for l in &ops.jumps {
            let ll = l.adjoint() * l;
            assert_eq!(ll[(0, 0)], ZERO);
        }
    }

    #[test]
    fn large_mu_ground_state_is_near_the_vacuum() {
        let ops = build_dense_operators(&p(50.0, 0.0, 0.5, 4)).unwrap();
        let eig = ops.h.self_adjoint_eigen(Side::Lower).unwrap();
        assert!(eig.U()[(0, 0)].norm_sqr() > 0.99);
    }

    #[test]
    fn covariance_of_simple_states() {
        let ops = build_dense_operators(&p(0.4, 1.0, 0.5, 2)).unwrap();
        let mut vac = Mat::<c64>::zeros(4, 4);
        vac[(0, 0)] = ONE;
        let (g, res) = covariance_from_density(&vac, &ops);
        assert!(res < 1e-14);
        let vacuum = Mat::from_fn(4, 4, |a, b| match (a % 2, b % 2) {
            (0, 1) if a / 2 == b / 2 => -0.5,
            (1, 0) if a / 2 == b / 2 => 0.5,
            _ => 0.0,
        });
        assert!(max_entry_error(&g, &vacuum) < 1e-15);
        assert_eq!(site_block(&vacuum, 1, 1), [[0.0, -0.5], [0.5, 0.0]]);
        let mixed = Mat::<c64>::identity(4, 4) * faer::Scale(re(0.25));
        assert!(max_entry_error(&covariance_from_density(&mixed, &ops).0, &Mat::zeros(4, 4)) < 1e-15);
    }

    #[test]
    fn lindblad_limit_matches_the_liouvillian_null_vector() {
        let pp = p(0.4, 1.0, 0.0, 2);
        let st = evolve_master_equation(&pp, &OracleConfig::for_params(&pp)).unwrap();
        let sup = dense_liouvillian(&pp).unwrap();
        let v = Mat::from_fn(16, 1, |k, _| st.rho[(k / 4, k % 4)]);
        assert!(max_abs(&(&sup * &v)) < 1e-9);
    }

    #[test]
    fn full_postselection_reaches_a_pure_gaussian_state() {
        let pp = p(0.4, 1.0, 1.0, 2);
        let (g, st) = oracle_covariance(&pp, &OracleConfig::for_params(&pp)).unwrap();
        let ev = st.rho.self_adjoint_eigenvalues(Side::Lower).unwrap();
        assert!(ev[3] > 1.0 - 1e-6);
        let g2 = &g * &g * faer::Scale(4.0);
        assert!(max_entry_error(&g2, &(-Mat::<f64>::identity(4, 4))) < 1e-8);
    }

    #[test]
    fn dense_state_matches_riccati_at_four_sites() {
        let pp = p(0.4, 1.0, 0.5, 4);
        let (g, st) = oracle_covariance(&pp, &OracleConfig::for_params(&pp)).unwrap();
        assert!(st.trace_drift < 1e-8);
        let ev = st.rho.self_adjoint_eigenvalues(Side::Lower).unwrap();
        assert!(ev.iter().all(|&x| x > -1e-10));
        let are = correlations_real_space(&pp).unwrap().full_matrix();
        assert!(max_entry_error(&g, &are) < 1e-6);
    }

    #[test]
    fn liouvillian_gap_and_offset_match_the_rapidities() {
        for pp in [p(0.4, 1.0, 0.5, 2), p(0.0, 0.5, 1.0, 4), p(0.9, 2.0, 0.3, 4)] {
            let s = liouvillian_summary(&pp).unwrap();
            let sm = build_structure_matrix_dense(&pp).unwrap();
            let r = rapidities(&sm).unwrap();
            let sum: c64 = r.beta.iter().sum();
            assert!((s.even_gap - r.gap).abs() < 1e-8);
            assert!((s.lambda0 - (sum - re(sm.a0())) * 0.5).norm() < 1e-8);
        }
    }

    #[test]
    fn slow_points_get_a_longer_horizon() {
        assert_eq!(OracleConfig::for_params(&p(0.4, 1.0, 1.0, 4)).t_max, 5000.0);
        assert_eq!(OracleConfig::for_params(&p(0.4, 1.0, 0.9, 4)).t_max, 500.0);
        let pp = p(0.4, 1.0, 0.5, 2);
        let bad = OracleConfig { dt: 0.1, ..OracleConfig::for_params(&pp) };
        assert!(sample_trajectories(&pp, &bad, Unraveling::BiasedDiscard).is_err());
    }

    fn short(pp: &ModelParams) -> OracleConfig {
        OracleConfig { n_traj: 1000, batches: 10, traj_time: 20.0, ..OracleConfig::for_params(pp) }
    }

    #[test]
    fn unbiased_unraveling_never_discards() {
        let pp = p(0.4, 1.0, 0.0, 2);
        let e = sample_trajectories(&pp, &short(&pp), Unraveling::BiasedDiscard).unwrap();
        assert_eq!(e.discarded, 0);
        assert!(e.clicks > 0);
        let (me, _) = oracle_covariance(&pp, &OracleConfig::for_params(&pp)).unwrap();
        assert!(max_z_score(&e.covariance, &me, &e.std_err) < 4.0);
    }

    #[test]
    fn no_click_limit_is_deterministic() {
        let pp = p(0.4, 1.0, 1.0, 2);
        let cfg = OracleConfig { n_traj: 20, batches: 2, traj_time: 80.0, ..OracleConfig::for_params(&pp) };
        let e = sample_trajectories(&pp, &cfg, Unraveling::BiasedDiscard).unwrap();
        assert!(e.final_spread < 1e-12);
        let (me, _) = oracle_covariance(&pp, &OracleConfig::for_params(&pp)).unwrap();
        let err = max_entry_error(&e.covariance, &me);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let pp = p(0.4, 1.0, 0.5, 2);
        let cfg = OracleConfig { n_traj: 40, batches: 4, traj_time: 2.0, ..OracleConfig::for_params(&pp) };
        let a = sample_trajectories(&pp, &cfg, Unraveling::UndetectedMixing).unwrap();
        let b = sample_trajectories(&pp, &cfg, Unraveling::UndetectedMixing).unwrap();
        assert_eq!(a.covariance, b.covariance);
        assert_eq!(a.clicks, b.clicks);
    }
}
