//! θ-scheme solver for one sine mode,
//!
//! ∂_t v − Δ_x v + λ_k v + a v = S,  v|∂G = 0,  v(0) = φ_k,
//!
//! plus the forward problem (all modes, known a) and the overdetermination
//! residual.
//!
//! Each step solves (I + θ·dt·M^{n+1}) v^{n+1} = (I − (1−θ)·dt·M^n) v^n + dt·S^{n+θ}
//! with M^n = −Δ_h + λ_k + a^n and S^{n+θ} = θS^{n+1} + (1−θ)S^n. In one
//! dimension the system is tridiagonal (Thomas); in two it is solved with
//! Jacobi-preconditioned CG to a relative residual of 1e−10.

use std::f64::consts::PI;

use log::warn;

use crate::discretize::{l2_norm_gt, Boundary, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::linalg::{conjugate_gradient, thomas};
use crate::spectral::{eigenvalue, ModeFieldSet, OmegaData, SpectralParams};

/// Relative residual required of the 2-D inner solve.
pub const INNER_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct ModeProblem<'a> {
    pub k: usize,
    /// Known potential a(t,x); `None` means zero.
    pub reaction: Option<&'a ScalarField>,
    /// Right-hand side S(t,x); `None` means zero.
    pub source: Option<&'a ScalarField>,
    pub initial: &'a [f64],
    pub theta: f64,
}

/// Interior unknowns of a grid in compact order.
struct Interior {
    nodes: Vec<usize>,
    n: [usize; 2],
    inv_h2: [f64; 2],
    dim: usize,
}

impl Interior {
    fn new(grid: &Grid) -> Self {
        let nodes = (0..grid.space_len())
            .filter(|&i| !grid.is_boundary(i))
            .collect();
        let inv = |d: usize| {
            if d < grid.dim() {
                1.0 / (grid.h[d] * grid.h[d])
            } else {
                0.0
            }
        };
        Interior {
            nodes,
            n: grid.n,
            inv_h2: [inv(0), inv(1)],
            dim: grid.dim(),
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn gather(&self, slice: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| slice[i]).collect()
    }

    /// out = −Δ_h v with homogeneous Dirichlet data.
    fn neg_laplacian(&self, v: &[f64], out: &mut [f64]) {
        match self.dim {
            1 => {
                let m = self.n[0];
                let c = self.inv_h2[0];
                for i in 0..m {
                    let l = if i > 0 { v[i - 1] } else { 0.0 };
                    let r = if i + 1 < m { v[i + 1] } else { 0.0 };
                    out[i] = c * (2.0 * v[i] - l - r);
                }
            }
            _ => {
                let (nx, ny) = (self.n[0], self.n[1]);
                let (cx, cy) = (self.inv_h2[0], self.inv_h2[1]);
                for i in 0..nx {
                    for j in 0..ny {
                        let p = i * ny + j;
                        let w = if i > 0 { v[p - ny] } else { 0.0 };
                        let e = if i + 1 < nx { v[p + ny] } else { 0.0 };
                        let s = if j > 0 { v[p - 1] } else { 0.0 };
                        let nn = if j + 1 < ny { v[p + 1] } else { 0.0 };
                        out[p] = cx * (2.0 * v[p] - w - e) + cy * (2.0 * v[p] - s - nn);
                    }
                }
            }
        }
    }

    fn diag_laplacian(&self) -> f64 {
        2.0 * (self.inv_h2[0] + self.inv_h2[1])
    }
}

fn check_inputs(problem: &ModeProblem<'_>, grid: &Grid) -> Result<f64> {
    let lambda = eigenvalue(problem.k)?;
    if !(0.5..=1.0).contains(&problem.theta) {
        return Err(Error::Config(format!(
            "theta must lie in [0.5, 1], got {}",
            problem.theta
        )));
    }
    if problem.initial.len() != grid.space_len() {
        return Err(Error::Data(format!(
            "initial profile has {} nodes, grid has {}",
            problem.initial.len(),
            grid.space_len()
        )));
    }
    for f in [problem.reaction, problem.source].into_iter().flatten() {
        if f.grid() != grid {
            return Err(Error::Data("mode problem field does not match the grid".into()));
        }
    }
    if problem.initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("initial profile is not finite".into()));
    }
    Ok(lambda)
}

/// Solve one mode problem on `grid`. Boundary nodes of the result are zero.
pub fn solve_mode(problem: &ModeProblem<'_>, grid: &Grid) -> Result<ScalarField> {
    let lambda = check_inputs(problem, grid)?;
    let theta = problem.theta;
    let dt = grid.dt;
    let interior = Interior::new(grid);
    let m = interior.len();

    if let Some(a) = problem.reaction {
        let min_a = a.values().iter().fold(f64::INFINITY, |x, v| x.min(*v));
        if dt * (-min_a) > 1.0 {
            warn!(
                "mode {}: dt·max(−a) = {:.3} exceeds 1; the step may be too large for the negative potential",
                problem.k,
                dt * (-min_a)
            );
        }
    }

    let reaction_at = |n: usize| -> Vec<f64> {
        match problem.reaction {
            Some(a) => interior.gather(a.slice(n)),
            None => vec![0.0; m],
        }
    };
    let source_at = |n: usize| -> Vec<f64> {
        match problem.source {
            Some(s) => interior.gather(s.slice(n)),
            None => vec![0.0; m],
        }
    };

    let mut out = ScalarField::zeros(grid, Boundary::Dirichlet);
    out.slice_mut(0).copy_from_slice(problem.initial);
    out.enforce_boundary();

    let mut v = interior.gather(out.slice(0));
    let mut a_now = reaction_at(0);
    let mut s_now = source_at(0);
    let mut lap = vec![0.0; m];

    for n in 0..grid.nt {
        let a_next = reaction_at(n + 1);
        let s_next = source_at(n + 1);

        interior.neg_laplacian(&v, &mut lap);
        let rhs: Vec<f64> = (0..m)
            .map(|p| {
                v[p] - (1.0 - theta) * dt * (lap[p] + (lambda + a_now[p]) * v[p])
                    + dt * (theta * s_next[p] + (1.0 - theta) * s_now[p])
            })
            .collect();

        let diag: Vec<f64> = a_next
            .iter()
            .map(|a| 1.0 + theta * dt * (interior.diag_laplacian() + lambda + a))
            .collect();

        v = if interior.dim == 1 {
            let off = -theta * dt * interior.inv_h2[0];
            let off_v = vec![off; m];
            thomas(&off_v, &diag, &off_v, &rhs).ok_or(Error::Blowup {
                mode: Some(problem.k),
                step: n + 1,
            })?
        } else {
            let apply = |x: &[f64], y: &mut [f64]| {
                interior.neg_laplacian(x, y);
                for p in 0..m {
                    y[p] = x[p] + theta * dt * (y[p] + (lambda + a_next[p]) * x[p]);
                }
            };
            let mut x = v.clone();
            let outcome = conjugate_gradient(apply, &diag, &rhs, &mut x, INNER_RTOL, 20 * m + 100);
            if !outcome.converged {
                return Err(Error::LinearSolve {
                    step: n + 1,
                    residual: outcome.residual,
                    iterations: outcome.iterations,
                });
            }
            x
        };

        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Blowup {
                mode: Some(problem.k),
                step: n + 1,
            });
        }
        let row = out.slice_mut(n + 1);
        for (p, &idx) in interior.nodes.iter().enumerate() {
            row[idx] = v[p];
        }
        a_now = a_next;
        s_now = s_next;
    }
    Ok(out)
}

/// Forward problem with known potential: K independent mode solves.
pub fn solve_forward(
    a: Option<&ScalarField>,
    f_modes: &[ScalarField],
    phi_modes: &[Vec<f64>],
    grid: &Grid,
    params: SpectralParams,
    theta: f64,
    strategy: Strategy,
) -> Result<ModeFieldSet> {
    let k_max = params.modes;
    if f_modes.len() < k_max || phi_modes.len() < k_max {
        return Err(Error::Data(format!(
            "need {k_max} source and initial modes, got {} and {}",
            f_modes.len(),
            phi_modes.len()
        )));
    }
    let modes = strategy.try_map(k_max, |i| {
        let problem = ModeProblem {
            k: i + 1,
            reaction: a,
            source: Some(&f_modes[i]),
            initial: &phi_modes[i],
            theta,
        };
        solve_mode(&problem, grid).map_err(|e| e.with_mode(i + 1))
    })?;
    ModeFieldSet::new(modes, params)
}

/// ∫u ω dy − ψ realized as (π/2)Σ_k u_k ω_k − ψ, with its L2(G_T) norm.
pub fn overdetermination_residual(
    u: &ModeFieldSet,
    omega: &OmegaData,
    psi: &ScalarField,
) -> (ScalarField, f64) {
    let grid = *psi.grid();
    let mut r = psi.scaled(-1.0);
    let weights: Vec<f64> = omega
        .omega_coeffs
        .iter()
        .take(u.len())
        .map(|w| PI / 2.0 * w)
        .collect();
    for n in 0..grid.time_nodes() {
        let row = r.slice_mut(n);
        for (mode, w) in u.modes.iter().zip(&weights) {
            for (rv, uv) in row.iter_mut().zip(mode.slice(n)) {
                *rv += w * uv;
            }
        }
    }
    let norm = l2_norm_gt(&r);
    (r, norm)
}
