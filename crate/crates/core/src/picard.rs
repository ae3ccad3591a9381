//! Successive approximations with the coefficient lagged one sweep:
//!
//! ∂_t u_k^i − Δu_k^i + λ_k u_k^i = f_k − a^{i−1} u_k^{i−1},
//! a^{i−1} = Ψ + (Σ_j c_j u_j^{i−1})/ψ,
//!
//! starting from u⁰ ≡ 0, stopped on F(u^i − u^{i−1}) ≤ tol_F.

use std::f64::consts::PI;

use log::{info, warn};
use ndarray::Array3;

use crate::certify::{certificate_with_psi, compute_psi, Certificate};
use crate::discretize::{
    dt_derivative, grad_sq_g, l2_sq_g, l2_sq_gt, laplacian, Boundary, Grid, ScalarField,
};
use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::parabolic::{overdetermination_residual, solve_mode, ModeProblem};
use crate::problem::{InverseData, Settings};
use crate::spectral::{eigenvalue, f_functional, y_nodes, ModeFieldSet, OmegaData};

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub iter: usize,
    pub current: ModeFieldSet,
    pub previous: ModeFieldSet,
    /// F(u^i − u^{i−1}) for i = 1, 2, …
    pub f_diff_history: Vec<f64>,
    /// q̂_i = F_diff[i] / F_diff[i−1], one entry per sweep after the first.
    pub ratio_history: Vec<f64>,
}

impl IterationState {
    pub fn start(initial: ModeFieldSet) -> Self {
        IterationState {
            iter: 0,
            previous: initial.clone(),
            current: initial,
            f_diff_history: Vec::new(),
            ratio_history: Vec::new(),
        }
    }

    pub fn last_f_diff(&self) -> Option<f64> {
        self.f_diff_history.last().copied()
    }
}

/// The lagged coefficient a = Ψ + (Σ_j c_j u_j)/ψ at every node off ∂G;
/// boundary nodes take Ψ.
pub fn lagged_coefficient(
    u: &ModeFieldSet,
    big_psi: &ScalarField,
    psi: &ScalarField,
    omega: &OmegaData,
    floor: f64,
) -> Result<ScalarField> {
    let grid = *psi.grid();
    let mut a = big_psi.clone();
    for n in 0..grid.time_nodes() {
        let p = psi.slice(n);
        let row = a.slice_mut(n);
        for idx in 0..grid.space_len() {
            if grid.is_boundary(idx) {
                continue;
            }
            if p[idx].abs() <= floor {
                return Err(Error::DivisionHazard {
                    time_index: n,
                    space_index: idx,
                    t: grid.time(n),
                    x: grid.coords(idx),
                    value: p[idx].abs(),
                });
            }
            let series: f64 = u
                .modes
                .iter()
                .zip(&omega.couplings)
                .map(|(m, c)| c * m.get(n, idx))
                .sum();
            row[idx] += series / p[idx];
        }
    }
    Ok(a)
}

/// S_k = f_k − Ψ u_k − (Σ_j c_j u_j / ψ) u_k for the previous iterate.
pub fn picard_source(
    prev: &ModeFieldSet,
    big_psi: &ScalarField,
    psi: &ScalarField,
    f_modes: &[ScalarField],
    omega: &OmegaData,
    floor: f64,
    strategy: Strategy,
) -> Result<Vec<ScalarField>> {
    let a = lagged_coefficient(prev, big_psi, psi, omega, floor)?;
    Ok(strategy.map(prev.len(), |k| {
        let mut s = f_modes[k].clone();
        let u = &prev.modes[k];
        for n in 0..s.grid().time_nodes() {
            let (an, un) = (a.slice(n), u.slice(n));
            for (idx, v) in s.slice_mut(n).iter_mut().enumerate() {
                *v -= an[idx] * un[idx];
            }
        }
        s
    }))
}

/// One sweep: every mode re-solved with the lagged source.
pub fn iterate(
    mut state: IterationState,
    data: &InverseData,
    big_psi: &ScalarField,
    settings: &Settings,
) -> Result<IterationState> {
    let sources = picard_source(
        &state.current,
        big_psi,
        &data.psi,
        &data.f_modes,
        &data.omega,
        settings.psi_floor,
        settings.strategy,
    )?;
    let modes = settings.strategy.try_map(data.params.modes, |i| {
        let problem = ModeProblem {
            k: i + 1,
            reaction: None,
            source: Some(&sources[i]),
            initial: &data.phi_modes[i],
            theta: settings.theta,
        };
        solve_mode(&problem, &data.grid).map_err(|e| e.with_mode(i + 1))
    })?;
    let next = ModeFieldSet::new(modes, data.params)?;
    let f_diff = f_functional(&next.sub(&state.current), settings.strategy);
    if let Some(last) = state.last_f_diff() {
        state
            .ratio_history
            .push(if last > 0.0 { f_diff / last } else { 0.0 });
    }
    state.f_diff_history.push(f_diff);
    state.previous = std::mem::replace(&mut state.current, next);
    state.iter += 1;
    Ok(state)
}

/// Coefficient recovered from a mode set, with nodes closer than the margin
/// to ∂G overwritten by the nearest margin value.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub a: ScalarField,
    /// `true` at space nodes whose value was extrapolated.
    pub extrapolated: Vec<bool>,
}

pub fn reconstruct_a(
    u: &ModeFieldSet,
    big_psi: &ScalarField,
    psi: &ScalarField,
    omega: &OmegaData,
    margin: usize,
    floor: f64,
) -> Result<Reconstruction> {
    let grid = *psi.grid();
    if grid.margin_count(margin) == 0 {
        return Err(Error::Config(format!(
            "boundary_margin {margin} leaves no interior nodes"
        )));
    }
    let raw = lagged_coefficient(u, big_psi, psi, omega, floor)?;
    let extrapolated: Vec<bool> = (0..grid.space_len())
        .map(|i| !grid.in_margin(i, margin))
        .collect();
    let mut a = raw;
    for n in 0..grid.time_nodes() {
        let row = a.slice_mut(n);
        for idx in (0..grid.space_len()).filter(|&i| extrapolated[i]) {
            row[idx] = row[grid.nearest_in_margin(idx, margin)];
        }
    }
    Ok(Reconstruction { a, extrapolated })
}

/// u(t,x,y) = Σ_k u_k(t,x) sin ky sampled on a uniform y-grid, indexed [t, x, y].
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub y: Vec<f64>,
    pub values: Array3<f64>,
}

pub fn synthesize_field(u: &ModeFieldSet, ny: usize) -> Synthesis {
    let grid = u.grid();
    let y = y_nodes(ny);
    let basis: Vec<Vec<f64>> = (1..=u.len())
        .map(|k| y.iter().map(|&yy| (k as f64 * yy).sin()).collect())
        .collect();
    let mut values = Array3::zeros((grid.time_nodes(), grid.space_len(), y.len()));
    for n in 0..grid.time_nodes() {
        for idx in 0..grid.space_len() {
            for (m, b) in u.modes.iter().zip(&basis) {
                let c = m.get(n, idx);
                for (j, bj) in b.iter().enumerate() {
                    values[[n, idx, j]] += c * bj;
                }
            }
        }
    }
    Synthesis { y, values }
}

/// Norms of the weak-solution estimates, all squared and over Q = G × (0,π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakNorms {
    /// F(u).
    pub energy: f64,
    /// sup_t ‖u‖²_{L2(G×(0,π))}.
    pub sup_l2: f64,
    /// ‖∇_x u‖²_{L2(Q_T)}.
    pub grad_x: f64,
    /// ‖u_y‖²_{L2(Q_T)}.
    pub grad_y: f64,
    /// ‖a‖²_{L2(G_T)}.
    pub a_l2: f64,
}

pub fn weak_norms(u: &ModeFieldSet, a: &ScalarField, strategy: Strategy) -> WeakNorms {
    let grid = *u.grid();
    let tw = grid.time_weights();
    let half_pi = PI / 2.0;
    let mut sup_l2 = 0.0f64;
    for n in 0..grid.time_nodes() {
        let s: f64 = u.modes.iter().map(|m| l2_sq_g(m.slice(n), &grid)).sum();
        sup_l2 = sup_l2.max(half_pi * s);
    }
    let grad_x = half_pi
        * u.modes
            .iter()
            .map(|m| {
                (0..grid.time_nodes())
                    .map(|n| tw[n] * grad_sq_g(m.slice(n), &grid))
                    .sum::<f64>()
            })
            .sum::<f64>();
    let grad_y = half_pi
        * u.modes
            .iter()
            .enumerate()
            .map(|(i, m)| (i + 1) as f64 * (i + 1) as f64 * l2_sq_gt(m))
            .sum::<f64>();
    WeakNorms {
        energy: f_functional(u, strategy),
        sup_l2,
        grad_x,
        grad_y,
        a_l2: l2_sq_gt(a),
    }
}

/// Squared L2(Q_T) norms of u, Δ_x u, u_t, u_yy and ‖a‖²_{L2(G_T)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongNorms {
    pub u: f64,
    pub lap_u: f64,
    pub u_t: f64,
    pub u_yy: f64,
    pub a: f64,
}

impl StrongNorms {
    pub fn as_array(&self) -> [f64; 5] {
        [self.u, self.lap_u, self.u_t, self.u_yy, self.a]
    }
}

pub fn strong_norms(u: &ModeFieldSet, a: &ScalarField, strategy: Strategy) -> StrongNorms {
    let grid = *u.grid();
    let per_mode = strategy.map(u.len(), |i| {
        let m = &u.modes[i];
        let lam = eigenvalue(i + 1).unwrap_or(0.0);
        let mut lap = ScalarField::zeros(&grid, Boundary::Free);
        for n in 0..grid.time_nodes() {
            lap.slice_mut(n).copy_from_slice(&laplacian(m.slice(n), &grid));
        }
        let u2 = l2_sq_gt(m);
        [u2, l2_sq_gt(&lap), l2_sq_gt(&dt_derivative(m)), lam * lam * u2]
    });
    let mut s = [0.0; 4];
    for t in &per_mode {
        for (acc, v) in s.iter_mut().zip(t) {
            *acc += v;
        }
    }
    let hp = PI / 2.0;
    StrongNorms {
        u: hp * s[0],
        lap_u: hp * s[1],
        u_t: hp * s[2],
        u_yy: hp * s[3],
        a: l2_sq_gt(a),
    }
}

/// Stopping rule of the sweep loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub tol_f: f64,
    pub max_iters: usize,
}

impl From<&Settings> for StopRule {
    fn from(s: &Settings) -> Self {
        StopRule {
            tol_f: s.tol_f,
            max_iters: s.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub a: ScalarField,
    pub extrapolated: Vec<bool>,
    pub u_modes: ModeFieldSet,
    pub big_psi: ScalarField,
    pub certificate: Certificate,
    pub history: IterationState,
    pub converged: bool,
    pub iterations: usize,
    /// ‖(π/2)Σ u_k ω_k − ψ‖_{L2(G_T)}.
    pub residual: f64,
    pub residual_field: ScalarField,
    pub norms: WeakNorms,
}

impl InversionResult {
    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }
}

/// Full inversion from u⁰ ≡ 0.
pub fn run_inversion(data: &InverseData, settings: &Settings) -> Result<InversionResult> {
    run_inversion_from(data, settings, ModeFieldSet::zeros(&data.grid, data.params))
}

/// Full inversion from a chosen initial iterate.
///
/// Fails with [`Error::Certificate`] when neither hypothesis set holds and
/// `settings.force` is off. Running out of sweeps is not an error: the result
/// has `converged == false` and carries the full history.
pub fn run_inversion_from(
    data: &InverseData,
    settings: &Settings,
    initial: ModeFieldSet,
) -> Result<InversionResult> {
    settings.validate()?;
    if initial.len() != data.params.modes || initial.grid() != &data.grid {
        return Err(Error::Data("initial iterate does not match the problem".into()));
    }
    let big_psi = compute_psi(data, settings.psi_floor)?;
    let certificate = certificate_with_psi(data, &big_psi, settings)?;
    if !certificate.passes() {
        let failing: Vec<&str> = crate::certify::check_local(&certificate)
            .failing()
            .into_iter()
            .chain(crate::certify::check_global(&certificate).failing())
            .collect();
        if !settings.force {
            return Err(Error::Certificate(failing.join(", ")));
        }
        warn!("certificate fails ({}); continuing because force is set", failing.join(", "));
    }

    let stop = StopRule::from(settings);
    let mut state = IterationState::start(initial);
    let mut converged = false;
    while state.iter < stop.max_iters {
        state = iterate(state, data, &big_psi, settings)?;
        let f = state.last_f_diff().unwrap_or(f64::INFINITY);
        info!("sweep {}: F(u^i - u^(i-1)) = {:.3e}", state.iter, f);
        if !f.is_finite() {
            return Err(Error::Blowup { mode: None, step: 0 });
        }
        if f <= stop.tol_f {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("no convergence after {} sweeps", state.iter);
    }

    let rec = reconstruct_a(
        &state.current,
        &big_psi,
        &data.psi,
        &data.omega,
        settings.boundary_margin,
        settings.psi_floor,
    )?;
    let (residual_field, residual) =
        overdetermination_residual(&state.current, &data.omega, &data.psi);
    let norms = weak_norms(&state.current, &rec.a, settings.strategy);
    Ok(InversionResult {
        a: rec.a,
        extrapolated: rec.extrapolated,
        u_modes: state.current.clone(),
        big_psi,
        certificate,
        iterations: state.iter,
        history: state,
        converged,
        residual,
        residual_field,
        norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_grid, Domain};
    use crate::mms::{Scenario, ScenarioKind};
    use crate::spectral::SpectralParams;
    use approx::assert_abs_diff_eq;

    fn mms_a(n: usize, t: f64, k: usize) -> Scenario {
        let g = build_grid(Domain::interval(PI, t).unwrap(), &[n], n).unwrap();
        Scenario::build(ScenarioKind::MmsA, &g, SpectralParams::new(k, 1.0, 64).unwrap(), 1.0).unwrap()
    }

    fn forced() -> Settings {
        Settings {
            force: true,
            ..Settings::default()
        }
    }

    #[test]
    fn zero_iterate_gives_source() {
        let s = mms_a(16, 0.5, 3);
        let big = compute_psi(&s.data, 1e-12).unwrap();
        let z = ModeFieldSet::zeros(&s.data.grid, s.data.params);
        let src = picard_source(&z, &big, &s.data.psi, &s.data.f_modes, &s.data.omega, 1e-12, Strategy::Sequential).unwrap();
        assert_eq!(src, s.data.f_modes);
    }

    #[test]
    fn single_mode_source_formula() {
        let s = mms_a(16, 0.5, 2);
        let d = &s.data;
        let big = compute_psi(d, 1e-12).unwrap();
        let u1 = ScalarField::from_fn(&d.grid, Boundary::Dirichlet, |t, x| (1.0 + t) * x[0].sin());
        let prev = ModeFieldSet::new(vec![u1.clone(), ScalarField::zeros(&d.grid, Boundary::Dirichlet)], d.params).unwrap();
        let src = picard_source(&prev, &big, &d.psi, &d.f_modes, &d.omega, 1e-12, Strategy::Parallel).unwrap();
        let g = d.grid;
        for n in 0..g.time_nodes() {
            for i in (0..g.space_len()).filter(|&i| !g.is_boundary(i)) {
                let (u, p) = (u1.get(n, i), d.psi.get(n, i));
                let want = d.f_modes[0].get(n, i) - big.get(n, i) * u + PI / (2.0 * p) * u * u;
                assert_abs_diff_eq!(src[0].get(n, i), want, epsilon = 1e-9 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn source_degrees_in_previous_iterate() {
        let s = mms_a(16, 0.5, 2);
        let d = &s.data;
        let big = compute_psi(d, 1e-12).unwrap();
        let zero_f: Vec<ScalarField> = d.f_modes.iter().map(|f| f.scaled(0.0)).collect();
        let truth = s.truth_u.clone().unwrap();
        let src = |u: &ModeFieldSet| picard_source(u, &big, &d.psi, &zero_f, &d.omega, 1e-12, Strategy::Sequential).unwrap();
        let (s1, s2) = (src(&truth), src(&truth.scaled(2.0)));
        // Ψ-term doubles, series term quadruples
        let lin = s1[0].scaled(0.0);
        let psi_term = {
            let mut f = lin.clone();
            for n in 0..d.grid.time_nodes() {
                for i in 0..d.grid.space_len() {
                    f.slice_mut(n)[i] = -big.get(n, i) * truth.modes[0].get(n, i);
                }
            }
            f
        };
        let quad = s1[0].sub(&psi_term);
        let want = psi_term.scaled(2.0).add(&quad.scaled(4.0));
        assert!(s2[0].sub(&want).max_abs() < 1e-10);
    }

    #[test]
    fn trivial_data_is_a_fixed_point() {
        let g = build_grid(Domain::interval(PI, 0.5).unwrap(), &[15], 16).unwrap();
        let s = Scenario::build(ScenarioKind::Null, &g, SpectralParams::new(3, 1.0, 16).unwrap(), 1.0).unwrap();
        let r = run_inversion(&s.data, &forced()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.history.f_diff_history, vec![0.0]);
        assert_eq!(r.u_modes, ModeFieldSet::zeros(&g, s.data.params));
        assert!(r.a.max_abs() < 1e-12);
    }

    #[test]
    fn first_sweep_is_the_linear_solve() {
        let s = mms_a(32, 0.5, 2);
        let d = &s.data;
        let big = compute_psi(d, 1e-12).unwrap();
        let st = iterate(IterationState::start(ModeFieldSet::zeros(&d.grid, d.params)), d, &big, &forced()).unwrap();
        let lin = crate::parabolic::solve_forward(None, &d.f_modes, &d.phi_modes, &d.grid, d.params, 0.5, Strategy::Sequential).unwrap();
        assert_eq!(st.current, lin);
    }

    #[test]
    fn exact_fields_reconstruct_unit_coefficient() {
        let s = mms_a(128, 0.5, 4);
        let d = &s.data;
        let big = compute_psi(d, 1e-12).unwrap();
        let rec = reconstruct_a(s.truth_u.as_ref().unwrap(), &big, &d.psi, &d.omega, 2, 1e-12).unwrap();
        assert!(rec.a.sub(s.truth_a.as_ref().unwrap()).max_abs() <= 1e-2);
        assert!(rec.extrapolated[0] && rec.extrapolated[1] && !rec.extrapolated[2]);
        let z = ModeFieldSet::zeros(&d.grid, d.params);
        let rz = reconstruct_a(&z, &big, &d.psi, &d.omega, 1, 1e-12).unwrap();
        assert_eq!(rz.a, big);
    }

    #[test]
    fn joint_rescaling_leaves_coefficient_unchanged() {
        let s = mms_a(32, 0.5, 2);
        let d = &s.data;
        let u = s.truth_u.clone().unwrap();
        let big = compute_psi(d, 1e-12).unwrap();
        let a1 = reconstruct_a(&u, &big, &d.psi, &d.omega, 2, 1e-12).unwrap().a;
        let mut d2 = d.clone();
        d2.psi = d.psi.scaled(4.0);
        d2.f_modes = d.f_modes.iter().map(|f| f.scaled(4.0)).collect();
        let big2 = compute_psi(&d2, 1e-12).unwrap();
        let a2 = reconstruct_a(&u.scaled(4.0), &big2, &d2.psi, &d2.omega, 2, 1e-12).unwrap().a;
        assert!(a1.sub(&a2).max_abs() < 1e-10);
    }

    #[test]
    fn failing_certificate_needs_force() {
        let s = mms_a(16, 0.5, 2);
        assert!(matches!(run_inversion(&s.data, &Settings::default()), Err(Error::Certificate(_))));
        let r = run_inversion(&s.data, &forced()).unwrap();
        assert!(!r.certificate.passes());
        assert!(r.converged);
    }

    #[test]
    fn non_convergence_is_a_result() {
        let s = mms_a(16, 0.5, 2);
        let r = run_inversion(&s.data, &Settings { max_iters: 2, tol_f: 0.0, ..forced() }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.history.f_diff_history.len(), 2);
        assert_eq!(r.history.ratio_history.len(), 1);
    }

    #[test]
    fn stored_coefficient_is_reproducible_and_extra_sweep_is_small() {
        let s = mms_a(32, 0.5, 4);
        let set = forced();
        let r = run_inversion(&s.data, &set).unwrap();
        let rec = reconstruct_a(&r.u_modes, &r.big_psi, &s.data.psi, &s.data.omega, 2, 1e-12).unwrap();
        assert_eq!(rec.a, r.a);
        let more = iterate(r.history.clone(), &s.data, &r.big_psi, &set).unwrap();
        assert!(more.last_f_diff().unwrap() <= 10.0 * set.tol_f);
    }

    #[test]
    fn strong_norms_of_single_mode() {
        let g = build_grid(Domain::interval(PI, 1.0).unwrap(), &[255], 256).unwrap();
        let p = SpectralParams::new(2, 5.0, 16).unwrap();
        let u1 = ScalarField::from_fn(&g, Boundary::Dirichlet, |t, x| (-t).exp() * x[0].sin());
        let u = ModeFieldSet::new(vec![u1, ScalarField::zeros(&g, Boundary::Dirichlet)], p).unwrap();
        let a = ScalarField::zeros(&g, Boundary::Free);
        let n = strong_norms(&u, &a, Strategy::Parallel);
        let want = (PI / 2.0).powi(2) * (1.0 - (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(n.u, want, epsilon = 1e-3);
        assert_abs_diff_eq!(n.u_yy, want, epsilon = 1e-3);
        let z = strong_norms(&ModeFieldSet::zeros(&g, p), &a, Strategy::Sequential);
        assert_eq!(z.as_array(), [0.0; 5]);
    }

    #[test]
    fn synthesis_matches_modes() {
        let s = mms_a(16, 0.5, 2);
        let syn = synthesize_field(s.truth_u.as_ref().unwrap(), 8);
        let g = s.data.grid;
        let (n, i, j) = (3, 5, 2);
        let want = (-g.time(n)).exp() * g.coords(i)[0].sin() * syn.y[j].sin();
        assert_abs_diff_eq!(syn.values[[n, i, j]], want, epsilon = 1e-14);
    }
}
