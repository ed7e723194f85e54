//! Per-momentum steady state of the correlation-matrix flow
//!
//! `∂ₜΓ̃ = X̃Γ̃ + Γ̃X̃ᵀ(-k) + Ỹ + Γ̃Z̃Γ̃`,
//!
//! solved three independent ways: a closed form, an invariant-subspace
//! (eigenvector) construction, and direct RK4 integration of the flow. At
//! `q = 0` the quadratic term vanishes and the fixed point is a Lyapunov
//! solve.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{re, solve4, sylvester4, Mat2, I};
use crate::model::{build_xyz, k_grid, ris, KModeMatrices, ModelParams};

/// Residual threshold for an accepted steady state.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Agreement threshold between independent solution routes.
pub const CROSS_METHOD_TOL: f64 = 1e-6;
/// Tolerance of the purity identity at `q = 1`.
pub const PURITY_TOL: f64 = 1e-8;

/// Below this the closed form has removable 0/0 structure.
const DEGENERACY_TOL: f64 = 1e-7;
/// Below this the closed form suffers 1/q cancellation.
const SMALL_Q: f64 = 1e-4;
/// Tolerance of the symmetry filters applied to eigenvector candidates.
const FILTER_TOL: f64 = 1e-8;

/// Steady-state correlation block `Γ̃ = iA[[1, a+ib], [a-ib, -1]]`.
#[derive(Clone, Copy, Debug)]
pub struct GammaK {
    pub k: c64,
    pub amp: c64,
    pub a: c64,
    pub b: c64,
    pub matrix: Mat2,
}

impl GammaK {
    pub fn from_parameters(k: c64, amp: c64, a: c64, b: c64) -> Self {
        let ia = I * amp;
        let matrix = Mat2::new(ia, ia * (a + I * b), ia * (a - I * b), -ia);
        GammaK { k, amp, a, b, matrix }
    }

    /// Reads `(A, a, b)` off a matrix of the parametrized form. `a` and `b`
    /// are NaN when `A` vanishes.
    pub fn from_matrix(k: c64, m: Mat2) -> Self {
        let amp = -I * m.get(0, 0);
        let (a, b) = if amp.norm() > 0.0 {
            let s = m.get(0, 1) + m.get(1, 0);
            let d = m.get(0, 1) - m.get(1, 0);
            (s / (I * amp * 2.0), -d / (amp * 2.0))
        } else {
            (re(f64::NAN), re(f64::NAN))
        };
        GammaK { k, amp, a, b, matrix: m }
    }

    /// `4A²(1+a²+b²)`, equal to one for a pure Gaussian state.
    pub fn purity(&self) -> c64 {
        -(self.matrix * self.matrix).trace() * 2.0
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        (self.matrix + self.matrix.adjoint()).max_abs() <= tol
    }

    pub fn is_trace_free(&self, tol: f64) -> bool {
        self.matrix.trace().norm() <= tol
    }
}

/// Max-entry modulus of `X̃Γ̃ + Γ̃X̃ᵀ(-k) + Ỹ + Γ̃Z̃Γ̃`.
pub fn residual(params: &ModelParams, k: c64, g: &Mat2) -> f64 {
    flow_rhs(&build_xyz(params, k), g).max_abs()
}

fn flow_rhs(m: &KModeMatrices, g: &Mat2) -> Mat2 {
    m.x * *g + *g * m.x_minus_t + m.y + *g * m.z * *g
}

/// Largest real part of the spectrum of `X̃ + Γ̃Z̃`; negative for the
/// stabilizing solution.
pub fn stability_margin(m: &KModeMatrices, g: &Mat2) -> f64 {
    let [a, b] = (m.x + *g * m.z).eigenvalues();
    a.re.max(b.re)
}

/// Which root of the Riccati quadratic to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// The physical, stabilizing solution.
    Minus,
    /// The second anti-Hermitian root; diverges like `1/q`.
    Plus,
}

/// Physical closed-form solution `Γ̃₋(k)`.
pub fn solve_closed_form(params: &ModelParams, k: c64) -> Result<GammaK> {
    solve_closed_form_branch(params, k, Branch::Minus)
}

pub fn solve_closed_form_branch(params: &ModelParams, k: c64, branch: Branch) -> Result<GammaK> {
    if params.q() == 0.0 {
        return Err(Error::ZeroQ);
    }
    let t = ris(params, k);
    if t.i.norm() < DEGENERACY_TOL {
        return Err(Error::DegenerateMomentum { k, reason: "I = 0" });
    }
    if t.r.norm() < DEGENERACY_TOL {
        return Err(Error::DegenerateMomentum { k, reason: "R = 0" });
    }
    let out = closed_form_unchecked(params, k, branch);
    if !out.a.is_finite() || out.a.norm() < DEGENERACY_TOL {
        return Err(Error::DegenerateMomentum { k, reason: "a = 0" });
    }
    if !out.matrix.is_finite() {
        return Err(Error::DegenerateMomentum { k, reason: "non-finite closed form" });
    }
    Ok(out)
}

/// The closed form without degeneracy guards; entries are non-finite only
/// on the exact degenerate set.
pub fn closed_form_unchecked(params: &ModelParams, k: c64, branch: Branch) -> GammaK {
    let (g, q) = (params.gamma(), params.q());
    let t = ris(params, k);
    let u = re(g * g) - (t.r * t.r + t.i * t.i) * 4.0;
    // D = u + S, rewritten through S² - u² = 16γ²[(1-q)²I² + R²] where the
    // direct sum cancels.
    let d = if (t.s + u).norm() >= (t.s - u).norm() {
        t.s + u
    } else {
        (t.i * t.i * (1.0 - q).powi(2) + t.r * t.r) * (16.0 * g * g) / (t.s - u)
    };
    let sign = match branch {
        Branch::Minus => -1.0,
        Branch::Plus => 1.0,
    };
    let a = t.r * (sign * 2.0 * 2f64.sqrt()) / d.sqrt();
    let one_a2 = a * a + 1.0;
    let b = -(one_a2 / a) * (t.r / t.i);
    let amp = (a * ((1.0 - q) * g) + t.r * 2.0) * t.i / (one_a2 * t.r * (2.0 * q * g));
    GammaK::from_parameters(k, amp, a, b)
}

/// One of the six invariant-subspace candidates.
#[derive(Clone, Debug)]
pub struct Candidate {
    /// Eigenvector columns of `Q` spanning the subspace.
    pub columns: [usize; 2],
    /// `W₂₁W₁₁⁻¹`, absent when `W₁₁` is singular.
    pub gamma: Option<Mat2>,
    pub residual: f64,
    pub anti_hermitian: bool,
    pub trace_free: bool,
    pub stability_margin: f64,
}

/// Invariant-subspace data behind [`solve_eigen`].
#[derive(Clone, Debug)]
pub struct CandidateSet {
    /// `Q = [[X̃ᵀ(-k), Z̃], [-Ỹ, -X̃]]`.
    pub q_matrix: Mat<c64>,
    pub eigenvalues: Vec<c64>,
    pub candidates: Vec<Candidate>,
    /// Index into `candidates` of the selected solution.
    pub selected: usize,
}

/// Enumerates the six 2-dimensional invariant subspaces of `Q` and keeps
/// the anti-Hermitian, trace-free, stabilizing one. At complex `k` the
/// anti-Hermiticity filter is skipped.
pub fn solve_eigen(params: &ModelParams, k: c64) -> Result<(CandidateSet, GammaK)> {
    let m = build_xyz(params, k);
    let blocks = [[m.x_minus_t, m.z], [-m.y, -m.x]];
    let q_matrix = Mat::<c64>::from_fn(4, 4, |i, j| blocks[i / 2][j / 2].get(i % 2, j % 2));
    let eig = q_matrix
        .eigen()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let u = eig.U();
    let eigenvalues: Vec<c64> = (0..4).map(|i| eig.S()[i]).collect();
    let real_k = k.im == 0.0;
    let mut candidates = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            let w11 = Mat2::new(u[(0, i)], u[(0, j)], u[(1, i)], u[(1, j)]);
            let w21 = Mat2::new(u[(2, i)], u[(2, j)], u[(3, i)], u[(3, j)]);
            let gamma = w11
                .inverse()
                .map(|inv| w21 * inv)
                .filter(|g| g.is_finite() && w11.det().norm() > 1e-13);
            let (residual, anti_hermitian, trace_free, margin) = match gamma {
                Some(g) => {
                    let scale = 1.0f64.max(g.max_abs()) * FILTER_TOL;
                    (
                        flow_rhs(&m, &g).max_abs(),
                        !real_k || (g + g.adjoint()).max_abs() <= scale,
                        g.trace().norm() <= scale,
                        stability_margin(&m, &g),
                    )
                }
                None => (f64::INFINITY, false, false, f64::INFINITY),
            };
            candidates.push(Candidate {
                columns: [i, j],
                gamma,
                residual,
                anti_hermitian,
                trace_free,
                stability_margin: margin,
            });
        }
    }
    if candidates.iter().all(|c| c.gamma.is_none()) {
        return Err(Error::DegenerateEigenbasis { k });
    }
    let selected = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.anti_hermitian && c.trace_free && c.stability_margin < 1e-9)
        .min_by(|a, b| a.1.stability_margin.total_cmp(&b.1.stability_margin))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NoPhysicalSolution {
            k,
            residuals: candidates.iter().map(|c| c.residual).collect(),
        })?;
    let g = GammaK::from_matrix(k, candidates[selected].gamma.unwrap());
    Ok((
        CandidateSet { q_matrix, eigenvalues, candidates, selected },
        g,
    ))
}

/// Linear steady state at `q = 0`: `X̃Γ̃ + Γ̃X̃ᵀ(-k) + Ỹ = 0`.
pub fn solve_lyapunov(params: &ModelParams, k: c64) -> Result<GammaK> {
    let m = build_xyz(params, k);
    let y = m.y;
    let rhs = [-y.get(0, 0), -y.get(0, 1), -y.get(1, 0), -y.get(1, 1)];
    let scale = 1.0 + m.x.max_abs();
    let (x, _) = solve4(sylvester4(&m.x, &m.x_minus_t), rhs, 1e-13 * scale)
        .ok_or(Error::SingularLyapunov { k })?;
    let out = GammaK::from_matrix(k, Mat2::new(x[0], x[1], x[2], x[3]));
    if !out.matrix.is_finite() {
        return Err(Error::SingularLyapunov { k });
    }
    Ok(out)
}

/// Determinant of the Lyapunov operator; its zeros are the poles of the
/// `q = 0` solution in the complex momentum plane.
pub fn lyapunov_determinant(params: &ModelParams, k: c64) -> c64 {
    let m = build_xyz(params, k);
    crate::linalg::det4(sylvester4(&m.x, &m.x_minus_t))
}

/// RK4 settings for [`integrate_flow`].
#[derive(Clone, Copy, Debug)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Stop once `‖∂ₜΓ̃‖_max` falls below this.
    pub tol: f64,
}

impl FlowConfig {
    /// `dt = 0.01/max(γ, 4(1+|μ|))`, `T = 200`, tolerance `1e-10`.
    pub fn for_params(params: &ModelParams) -> Self {
        FlowConfig {
            dt: 0.01 / params.gamma().max(4.0 * (1.0 + params.mu().abs())),
            t_max: 200.0,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOutcome {
    pub gamma: GammaK,
    pub steps: usize,
    pub time: f64,
}

/// Vacuum site block `[[0, -1/2], [1/2, 0]]`.
pub fn vacuum_block() -> Mat2 {
    Mat2::from_real([[0.0, -0.5], [0.5, 0.0]])
}

/// Integrates the Riccati flow from `gamma0` until it is stationary.
pub fn integrate_flow(params: &ModelParams, k: f64, gamma0: Mat2, cfg: &FlowConfig) -> Result<FlowOutcome> {
    if (gamma0 + gamma0.adjoint()).max_abs() > 1e-12 || gamma0.trace().norm() > 1e-12 {
        return Err(Error::InvalidParams(
            "initial block must be anti-Hermitian with zero trace".into(),
        ));
    }
    if !(cfg.dt > 0.0 && cfg.t_max > 0.0) {
        return Err(Error::InvalidParams("flow needs dt > 0 and T > 0".into()));
    }
    let m = build_xyz(params, re(k));
    let f = |g: &Mat2| flow_rhs(&m, g);
    let h = cfg.dt;
    let mut g = gamma0;
    let mut t = 0.0;
    let mut steps = 0;
    loop {
        let k1 = f(&g);
        let r = k1.max_abs();
        if r < cfg.tol {
            return Ok(FlowOutcome { gamma: GammaK::from_matrix(re(k), g), steps, time: t });
        }
        if t >= cfg.t_max || !r.is_finite() {
            return Err(Error::NotConverged { time: t, residual: r, drift: 0.0 });
        }
        let k2 = f(&(g + k1 * (h / 2.0)));
        let k3 = f(&(g + k2 * (h / 2.0)));
        let k4 = f(&(g + k3 * h));
        g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        steps += 1;
    }
}

/// Physical steady state at a real momentum, routed to the most reliable
/// solver: Lyapunov at `q = 0`, the closed form otherwise, and the
/// eigenvector construction at degenerate momenta or tiny `q`.
pub fn solve_steady(params: &ModelParams, k: f64) -> Result<GammaK> {
    let kc = re(k);
    if params.q() == 0.0 {
        return solve_lyapunov(params, kc);
    }
    if params.q() >= SMALL_Q {
        if let Ok(g) = solve_closed_form(params, kc) {
            if residual(params, kc, &g.matrix) < RESIDUAL_TOL {
                return Ok(g);
            }
        }
    }
    solve_eigen(params, kc).map(|(_, g)| g)
}

/// [`solve_steady`] on every momentum of the grid, in grid order.
pub fn solve_grid(params: &ModelParams) -> Result<Vec<GammaK>> {
    k_grid(params).into_iter().map(|k| solve_steady(params, k)).collect()
}
