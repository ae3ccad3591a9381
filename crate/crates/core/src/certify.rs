//! Solvability certificate: the constants of the a priori estimates and the
//! local (short-time) and global hypotheses evaluated on the discrete data.
//!
//! Suprema over (t,x) are taken over nodes at least `boundary_margin` cells
//! away from ∂G, since ψ vanishes on ∂G whenever u does. The R-terms are
//! squared fractional norms. Every certificate is conditional on the supplied
//! Sobolev constant C_S.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::{
    dt_derivative, grad_sq_g, l2_sq_g, laplacian, time_derivative_samples, trapezoid, Boundary,
    Grid, ScalarField,
};
use crate::error::{Error, Result};
use crate::problem::{InverseData, Settings};
use crate::spectral::{frac_norm, frac_norm_profiles, Level, Measure};

fn hazard(grid: &Grid, n: usize, idx: usize, value: f64) -> Error {
    Error::DivisionHazard {
        time_index: n,
        space_index: idx,
        t: grid.time(n),
        x: grid.coords(idx),
        value,
    }
}

/// Ψ = (−ψ_t + Δψ + (f,ω))/ψ at every node off ∂G; boundary nodes copy the
/// nearest interior value.
pub fn compute_psi(data: &InverseData, floor: f64) -> Result<ScalarField> {
    let grid = data.grid;
    let psi = &data.psi;
    let psi_t = dt_derivative(psi);
    let f_omega = data.f_omega();
    let mut out = ScalarField::zeros(&grid, Boundary::Free);
    for n in 0..grid.time_nodes() {
        let lap = laplacian(psi.slice(n), &grid);
        let (p, pt, fw) = (psi.slice(n), psi_t.slice(n), f_omega.slice(n));
        let row = out.slice_mut(n);
        for idx in 0..grid.space_len() {
            if grid.is_boundary(idx) {
                continue;
            }
            if p[idx].abs() <= floor {
                return Err(hazard(&grid, n, idx, p[idx].abs()));
            }
            row[idx] = (-pt[idx] + lap[idx] + fw[idx]) / p[idx];
        }
        for idx in 0..grid.space_len() {
            if grid.is_boundary(idx) {
                row[idx] = row[grid.nearest_in_margin(idx, 1)];
            }
        }
    }
    Ok(out)
}

/// (max 1/|ψ|, max |Ψ|) over margin nodes and all time levels.
pub fn margin_extrema(
    psi: &ScalarField,
    big_psi: &ScalarField,
    margin: usize,
    floor: f64,
) -> Result<(f64, f64)> {
    let grid = psi.grid();
    if grid.margin_count(margin) == 0 {
        return Err(Error::Config(format!(
            "boundary_margin {margin} leaves no interior nodes"
        )));
    }
    let mut inv_max = 0.0f64;
    let mut psi_m = 0.0f64;
    for n in 0..grid.time_nodes() {
        for idx in (0..grid.space_len()).filter(|&i| grid.in_margin(i, margin)) {
            let p = psi.get(n, idx).abs();
            if p <= floor {
                return Err(hazard(grid, n, idx, p));
            }
            inv_max = inv_max.max(1.0 / p);
            psi_m = psi_m.max(big_psi.get(n, idx).abs());
        }
    }
    Ok((inv_max, psi_m))
}

/// Independent inputs from which a certificate is assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub epsilon: f64,
    pub a_eps: f64,
    pub c_s: f64,
    pub c_p: f64,
    pub psi_m: f64,
    pub r: f64,
    pub r1: f64,
    pub t_final: f64,
    pub boundary_margin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub epsilon: f64,
    #[serde(rename = "A_eps")]
    pub a_eps: f64,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    #[serde(rename = "C_P")]
    pub c_p: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Psi_M")]
    pub psi_m: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    pub q_local: f64,
    pub q_global: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "cond_local_T")]
    pub cond_local_t: bool,
    #[serde(rename = "cond_T_le_1")]
    pub cond_t_le_1: bool,
    pub cond_local_q: bool,
    pub cond_global_poincare: bool,
    pub cond_global_q: bool,
    pub boundary_margin: usize,
    pub provenance: Vec<String>,
    pub local_pass: bool,
    pub global_pass: bool,
    /// rhs − lhs of each inequality; positive when it holds.
    pub margins: BTreeMap<String, f64>,
}

/// One inequality lhs ≤ rhs (or lhs < rhs when strict).
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub relation: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
}

impl Condition {
    fn new(name: &'static str, relation: &'static str, lhs: f64, rhs: f64, strict: bool) -> Self {
        Condition {
            name,
            relation,
            lhs,
            rhs,
            strict,
        }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.lhs < self.rhs
        } else {
            self.lhs <= self.rhs
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub conditions: Vec<Condition>,
}

impl Verdict {
    fn from_conditions(conditions: Vec<Condition>) -> Self {
        Verdict {
            pass: conditions.iter().all(Condition::holds),
            conditions,
        }
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.conditions
            .iter()
            .filter(|c| !c.holds())
            .map(|c| c.name)
            .collect()
    }
}

impl Certificate {
    pub fn assemble(k: Constants) -> Self {
        let b = 2.0 * k.a_eps * k.a_eps * k.c_s * k.c_s;
        let mut cert = Certificate {
            epsilon: k.epsilon,
            a_eps: k.a_eps,
            c_s: k.c_s,
            c_p: k.c_p,
            b,
            psi_m: k.psi_m,
            r: k.r,
            r1: k.r1,
            q_local: 4.0 * k.r * b,
            q_global: 4.0 * k.r1 * b,
            t_final: k.t_final,
            cond_local_t: false,
            cond_t_le_1: false,
            cond_local_q: false,
            cond_global_poincare: false,
            cond_global_q: false,
            boundary_margin: k.boundary_margin,
            provenance: vec![
                format!("conditional on supplied C_S = {}", k.c_s),
                format!(
                    "suprema over nodes at least {} mesh cells from the boundary",
                    k.boundary_margin
                ),
                "R and R1 evaluated as squared fractional norms".into(),
                "C_P = 1/lambda_1 of the Dirichlet Laplacian on G (closed form)".into(),
            ],
            local_pass: false,
            global_pass: false,
            margins: BTreeMap::new(),
        };
        let local = check_local(&cert);
        let global = check_global(&cert);
        let get = |v: &Verdict, name: &str| {
            v.conditions
                .iter()
                .find(|c| c.name == name)
                .map(Condition::holds)
                .unwrap_or(false)
        };
        cert.cond_local_t = get(&local, "cond_local_T");
        cert.cond_t_le_1 = get(&local, "cond_T_le_1");
        cert.cond_local_q = get(&local, "cond_local_q");
        cert.cond_global_poincare = get(&global, "cond_global_poincare");
        cert.cond_global_q = get(&global, "cond_global_q");
        cert.local_pass = local.pass;
        cert.global_pass = global.pass;
        for c in local.conditions.iter().chain(&global.conditions) {
            cert.margins.insert(c.name.to_string(), c.margin());
        }
        cert
    }

    pub fn passes(&self) -> bool {
        self.local_pass || self.global_pass
    }

    /// Contraction factor of whichever hypothesis set holds (local preferred).
    pub fn q(&self) -> Option<f64> {
        if self.local_pass {
            Some(self.q_local)
        } else if self.global_pass {
            Some(self.q_global)
        } else {
            None
        }
    }
}

/// Short-time hypotheses: 2Ψ_M T ≤ A_ε C_S, T ≤ 1 and 4RB < 1.
pub fn check_local(cert: &Certificate) -> Verdict {
    Verdict::from_conditions(vec![
        Condition::new(
            "cond_local_T",
            "2 Psi_M T <= A_eps C_S",
            2.0 * cert.psi_m * cert.t_final,
            cert.a_eps * cert.c_s,
            false,
        ),
        Condition::new("cond_T_le_1", "T <= 1", cert.t_final, 1.0, false),
        Condition::new("cond_local_q", "4 R B < 1", cert.q_local, 1.0, true),
    ])
}

/// Arbitrary-time hypotheses: 2Ψ_M² C_P ≤ A_ε² C_S² and 4R₁B < 1.
pub fn check_global(cert: &Certificate) -> Verdict {
    Verdict::from_conditions(vec![
        Condition::new(
            "cond_global_poincare",
            "2 Psi_M^2 C_P <= A_eps^2 C_S^2",
            2.0 * cert.psi_m * cert.psi_m * cert.c_p,
            cert.a_eps * cert.a_eps * cert.c_s * cert.c_s,
            false,
        ),
        Condition::new("cond_global_q", "4 R1 B < 1", cert.q_global, 1.0, true),
    ])
}

/// The squared-norm terms entering R and R₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataNorms {
    pub phi_h1_tau1: f64,
    pub phi_l2_tau1: f64,
    pub phi_l2_tau2: f64,
    pub f_gt_tau1: f64,
}

impl DataNorms {
    pub fn of(data: &InverseData) -> Self {
        let (t1, t2) = (data.params.tau1(), data.params.tau2());
        DataNorms {
            phi_h1_tau1: frac_norm_profiles(&data.phi_modes, &data.grid, Level::H1, t1),
            phi_l2_tau1: frac_norm_profiles(&data.phi_modes, &data.grid, Level::L2, t1),
            phi_l2_tau2: frac_norm_profiles(&data.phi_modes, &data.grid, Level::L2, t2),
            f_gt_tau1: frac_norm(&data.f_modes, Level::L2, t1, Measure::SpaceTime),
        }
    }

    pub fn r(&self, psi_m: f64, t_final: f64) -> f64 {
        self.r1() + 8.0 * psi_m * psi_m * t_final * self.phi_l2_tau1
    }

    pub fn r1(&self) -> f64 {
        self.phi_h1_tau1 + self.phi_l2_tau2 + 4.0 * self.f_gt_tau1
    }
}

/// A_ε = √π (1 + 1/(2ε))^{1/2} ‖ω″‖ max 1/|ψ|.
pub fn a_epsilon(epsilon: f64, omega_dd_norm: f64, inv_psi_max: f64) -> f64 {
    PI.sqrt() * (1.0 + 1.0 / (2.0 * epsilon)).sqrt() * omega_dd_norm * inv_psi_max
}

/// Certificate for `data`, given an already computed Ψ.
pub fn certificate_with_psi(
    data: &InverseData,
    big_psi: &ScalarField,
    settings: &Settings,
) -> Result<Certificate> {
    if !(settings.c_s.is_finite() && settings.c_s > 0.0) {
        return Err(Error::Config(format!("C_S must be positive, got {}", settings.c_s)));
    }
    let (inv_max, psi_m) = margin_extrema(
        &data.psi,
        big_psi,
        settings.boundary_margin,
        settings.psi_floor,
    )?;
    let eps = data.params.epsilon;
    let norms = DataNorms::of(data);
    let t_final = data.grid.domain.t_final();
    Ok(Certificate::assemble(Constants {
        epsilon: eps,
        a_eps: a_epsilon(eps, data.omega.omega_dd_norm, inv_max),
        c_s: settings.c_s,
        c_p: 1.0 / data.grid.domain.first_dirichlet_eigenvalue(),
        psi_m,
        r: norms.r(psi_m, t_final),
        r1: norms.r1(),
        t_final,
        boundary_margin: settings.boundary_margin,
    }))
}

pub fn compute_certificate(data: &InverseData, settings: &Settings) -> Result<Certificate> {
    let big_psi = compute_psi(data, settings.psi_floor)?;
    certificate_with_psi(data, &big_psi, settings)
}

/// Both sides of ∫₀^T g² ≤ T²∫₀^T (g′)² + 2T g(0)² for uniformly sampled g.
pub fn poincare_time_check(g: &[f64], t_final: f64) -> (f64, f64) {
    let dt = t_final / (g.len() - 1) as f64;
    let sq: Vec<f64> = g.iter().map(|v| v * v).collect();
    let dg: Vec<f64> = time_derivative_samples(g, dt).iter().map(|v| v * v).collect();
    let lhs = trapezoid(&sq, dt);
    let rhs = t_final * t_final * trapezoid(&dg, dt) + 2.0 * t_final * g[0] * g[0];
    (lhs, rhs)
}

/// Empirical lower bound for the embedding constant ‖v‖_{L4(G)} ≤ C_S‖v‖_{W¹₂(G)}:
/// the largest ratio over random trial fields with at most `max_freq` sine
/// frequencies per axis.
pub fn estimate_sobolev_lower_bound(grid: &Grid, trials: usize, max_freq: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let lengths = [grid.domain.length(0), if dim == 2 { grid.domain.length(1) } else { 1.0 }];
    let mut best = 0.0f64;
    for _ in 0..trials {
        let terms: Vec<(f64, [usize; 2])> = (0..4)
            .map(|_| {
                let c = rng.gen_range(-1.0..1.0);
                let m0 = rng.gen_range(1..=max_freq);
                let m1 = if dim == 2 { rng.gen_range(1..=max_freq) } else { 0 };
                (c, [m0, m1])
            })
            .collect();
        let v: Vec<f64> = (0..grid.space_len())
            .map(|idx| {
                let x = grid.coords(idx);
                terms
                    .iter()
                    .map(|(c, m)| {
                        let mut s = c * (m[0] as f64 * PI * x[0] / lengths[0]).sin();
                        if dim == 2 {
                            s *= (m[1] as f64 * PI * x[1] / lengths[1]).sin();
                        }
                        s
                    })
                    .sum()
            })
            .collect();
        let w1 = (l2_sq_g(&v, grid) + grad_sq_g(&v, grid)).sqrt();
        if w1 == 0.0 {
            continue;
        }
        let fourth: Vec<f64> = v.iter().map(|x| x.powi(4)).collect();
        let l4 = crate::discretize::integrate_g(&fourth, grid).powf(0.25);
        best = best.max(l4 / w1);
    }
    best
}
