//! Manufactured-solution scenarios and the studies built on them.
//!
//! MMS-A and MMS-B use the single-mode truth u* = e^{−t} P(x) sin y with
//! P = Π_d sin(πx_d/L_d) and ω = sin y. Substituting into the equation with
//! ζ = Σ_d (π/L_d)² gives
//!
//! f = (ζ + a*) u*,  ψ = (π/2) e^{−t} P,  φ = P sin y,  Ψ = 1 + a*,
//!
//! and the reconstruction Ψ + c_1 u_1/ψ = 1 + a* − 1 = a* (c_1 = −π/2).
//! MMS-A takes a* ≡ 1, MMS-B a* = 1 + t sin(πx_1/L_1).
//!
//! NULL has f = 0, φ = 0 and ψ = 1 + 2·dim·t + |x|², which satisfies
//! ψ_t = Δψ exactly (also for the difference stencils), so Ψ ≡ 0 and
//! (u, a) = (0, 0) is the fixed point. It does not satisfy the compatibility
//! condition at t = 0, which no nonvanishing ψ with φ = 0 can.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::discretize::{build_grid, Boundary, Domain, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::picard::{
    iterate, run_inversion, run_inversion_from, strong_norms, InversionResult, IterationState,
    StrongNorms,
};
use crate::problem::{InverseData, Settings};
use crate::spectral::{ModeFieldSet, OmegaData, SpectralParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    MmsA,
    MmsB,
    Null,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::MmsA => "MMS-A",
            ScenarioKind::MmsB => "MMS-B",
            ScenarioKind::Null => "NULL",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MMS-A" => Ok(ScenarioKind::MmsA),
            "MMS-B" => Ok(ScenarioKind::MmsB),
            "NULL" => Ok(ScenarioKind::Null),
            _ => Err(Error::Config(format!(
                "unknown scenario '{s}' (expected MMS-A, MMS-B or NULL)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub data: InverseData,
    /// Known truth; absent when the data were rescaled.
    pub truth_a: Option<ScalarField>,
    pub truth_u: Option<ModeFieldSet>,
    pub data_scale: f64,
}

fn profile(grid: &Grid, x: [f64; 2]) -> f64 {
    (0..grid.dim())
        .map(|d| (PI * x[d] / grid.domain.length(d)).sin())
        .product()
}

impl Scenario {
    /// Evaluate a scenario on `grid`. `data_scale` multiplies f and φ (not ψ);
    /// any value other than 1 discards the known truth.
    pub fn build(kind: ScenarioKind, grid: &Grid, params: SpectralParams, data_scale: f64) -> Result<Self> {
        if !(data_scale.is_finite() && data_scale > 0.0) {
            return Err(Error::Config(format!("data_scale must be positive, got {data_scale}")));
        }
        let g = *grid;
        let omega = OmegaData::from_fn(params.ny, params.modes, f64::sin, |y| -y.sin())?;
        let zero = ScalarField::zeros(&g, Boundary::Free);
        let mut f_modes = vec![zero.clone(); params.modes];
        let mut phi_modes = vec![vec![0.0; g.space_len()]; params.modes];

        let (psi, truth_a, truth_u) = match kind {
            ScenarioKind::Null => {
                let dim = g.dim() as f64;
                let psi = ScalarField::from_fn(&g, Boundary::Free, |t, x| {
                    1.0 + 2.0 * dim * t + (0..g.dim()).map(|d| x[d] * x[d]).sum::<f64>()
                });
                (psi, zero.clone(), ModeFieldSet::zeros(&g, params))
            }
            ScenarioKind::MmsA | ScenarioKind::MmsB => {
                let zeta: f64 = (0..g.dim()).map(|d| (PI / g.domain.length(d)).powi(2)).sum();
                let lx = g.domain.length(0);
                let a_star = move |t: f64, x: [f64; 2]| match kind {
                    ScenarioKind::MmsB => 1.0 + t * (PI * x[0] / lx).sin(),
                    _ => 1.0,
                };
                let u_star = |t: f64, x: [f64; 2]| (-t).exp() * profile(&g, x);
                f_modes[0] = ScalarField::from_fn(&g, Boundary::Free, |t, x| {
                    data_scale * (zeta + a_star(t, x)) * u_star(t, x)
                });
                phi_modes[0] = (0..g.space_len())
                    .map(|i| data_scale * profile(&g, g.coords(i)))
                    .collect();
                let psi = ScalarField::from_fn(&g, Boundary::Free, |t, x| PI / 2.0 * u_star(t, x));
                let mut u = ModeFieldSet::zeros(&g, params);
                u.modes[0] = ScalarField::from_fn(&g, Boundary::Dirichlet, u_star);
                (psi, ScalarField::from_fn(&g, Boundary::Free, a_star), u)
            }
        };
        let data = InverseData::new(params, omega, psi, f_modes, phi_modes)?;
        let known = data_scale == 1.0;
        Ok(Scenario {
            kind,
            data,
            truth_a: known.then_some(truth_a),
            truth_u: known.then_some(truth_u),
            data_scale,
        })
    }
}

/// Σ_n w_n Σ_{idx in margin} w_idx v² over G_T.
pub fn margin_l2_sq_gt(field: &ScalarField, margin: usize) -> f64 {
    let g = field.grid();
    let sw = g.space_weights();
    let tw = g.time_weights();
    (0..g.time_nodes())
        .map(|n| {
            let row = field.slice(n);
            tw[n]
                * (0..g.space_len())
                    .filter(|&i| g.in_margin(i, margin))
                    .map(|i| sw[i] * row[i] * row[i])
                    .sum::<f64>()
        })
        .sum()
}

fn relative(err_sq: f64, ref_sq: f64) -> f64 {
    if ref_sq > 0.0 {
        (err_sq / ref_sq).sqrt()
    } else {
        err_sq.sqrt()
    }
}

/// Relative L2(G_T) error over the margin (absolute when the reference is zero).
pub fn relative_margin_error(value: &ScalarField, reference: &ScalarField, margin: usize) -> f64 {
    relative(
        margin_l2_sq_gt(&value.sub(reference), margin),
        margin_l2_sq_gt(reference, margin),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryError {
    pub a: f64,
    pub u: f64,
}

/// Errors of a and of u against the scenario truth; `None` without truth.
pub fn recovery_error(result: &InversionResult, scenario: &Scenario, margin: usize) -> Option<RecoveryError> {
    let (ta, tu) = (scenario.truth_a.as_ref()?, scenario.truth_u.as_ref()?);
    let a = relative_margin_error(&result.a, ta, margin);
    let (mut e, mut r) = (0.0, 0.0);
    for (m, t) in result.u_modes.modes.iter().zip(&tu.modes) {
        e += margin_l2_sq_gt(&m.sub(t), margin);
        r += margin_l2_sq_gt(t, margin);
    }
    Some(RecoveryError { a, u: relative(e, r) })
}

/// Problem geometry and discretization for one resolution of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySetup {
    pub kind: ScenarioKind,
    pub domain: Domain,
    pub params: SpectralParams,
    pub data_scale: f64,
}

impl StudySetup {
    /// Scenario on the grid with `n` interior nodes per axis and `n` time steps.
    pub fn scenario(&self, n: usize) -> Result<Scenario> {
        let counts = vec![n; self.domain.dim()];
        let grid = build_grid(self.domain, &counts, n)?;
        Scenario::build(self.kind, &grid, self.params, self.data_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error_a: Option<f64>,
    pub error_u: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub strong: StrongNorms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// log2(e_h / e_{h/2}) of the coefficient error between consecutive rows.
    pub orders_a: Vec<f64>,
    pub orders_residual: Vec<f64>,
}

impl ConvergenceTable {
    pub fn monotone_a(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| matches!((w[0].error_a, w[1].error_a), (Some(a), Some(b)) if b < a))
    }
}

fn orders(values: &[f64]) -> Vec<f64> {
    values
        .windows(2)
        .map(|w| if w[1] > 0.0 { (w[0] / w[1]).log2() } else { f64::INFINITY })
        .collect()
}

/// Inversion at each resolution (Nx = Nt = n), errors and pairwise orders.
pub fn convergence_study(setup: &StudySetup, resolutions: &[usize], settings: &Settings) -> Result<ConvergenceTable> {
    if resolutions.len() < 3 {
        return Err(Error::Config("a convergence study needs at least 3 resolutions".into()));
    }
    let rows = settings.strategy.try_map(resolutions.len(), |i| {
        let n = resolutions[i];
        let s = setup.scenario(n)?;
        let r = run_inversion(&s.data, settings)?;
        let e = recovery_error(&r, &s, settings.boundary_margin);
        Ok::<_, Error>(ConvergenceRow {
            n,
            error_a: e.map(|e| e.a),
            error_u: e.map(|e| e.u),
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
            strong: strong_diagnostics(&r, settings),
        })
    })?;
    let ea: Vec<f64> = rows.iter().filter_map(|r| r.error_a).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    Ok(ConvergenceTable {
        orders_a: if ea.len() == rows.len() { orders(&ea) } else { Vec::new() },
        orders_residual: orders(&res),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// Relative L2(G_T) distance of the two coefficients over the margin.
    pub distance: f64,
    pub certificate_passes: bool,
    pub converged: [bool; 2],
    pub iterations: [usize; 2],
}

/// Two inversions, from u⁰ = 0 and from 1.5 times the first sweep.
pub fn uniqueness_probe(scenario: &Scenario, settings: &Settings) -> Result<UniquenessReport> {
    let data = &scenario.data;
    let first = run_inversion(data, settings)?;
    let one = iterate(
        IterationState::start(ModeFieldSet::zeros(&data.grid, data.params)),
        data,
        &first.big_psi,
        settings,
    )?;
    let second = run_inversion_from(data, settings, one.current.scaled(1.5))?;
    Ok(UniquenessReport {
        distance: relative_margin_error(&second.a, &first.a, settings.boundary_margin),
        certificate_passes: first.certificate.passes(),
        converged: [first.converged, second.converged],
        iterations: [first.iterations, second.iterations],
    })
}

/// Strong-solution norms of a converged run. Warns when the weighted tail of
/// the last mode is not negligible.
pub fn strong_diagnostics(result: &InversionResult, settings: &Settings) -> StrongNorms {
    let u = &result.u_modes;
    let tau2 = u.params.tau2();
    let weighted: Vec<f64> = u
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| ((i + 1) as f64).powf(4.0 * tau2) * crate::discretize::l2_sq_gt(m))
        .collect();
    let total: f64 = weighted.iter().sum();
    if let Some(last) = weighted.last() {
        if total > 0.0 && last / total > 1e-6 {
            warn!(
                "last retained mode carries {:.2e} of the weighted norm; K may be too small for epsilon = {}",
                last / total,
                u.params.epsilon
            );
        }
    }
    strong_norms(u, &result.a, settings.strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::compute_psi;
    use crate::discretize::{dt_derivative, laplacian};
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, t: f64) -> Grid {
        build_grid(Domain::interval(PI, t).unwrap(), &[n], n).unwrap()
    }

    fn params(k: usize) -> SpectralParams {
        SpectralParams::new(k, 1.0, 64).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in [ScenarioKind::MmsA, ScenarioKind::MmsB, ScenarioKind::Null] {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!(matches!("MMS-Z".parse::<ScenarioKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn compatibility_of_manufactured_scenarios() {
        for kind in [ScenarioKind::MmsA, ScenarioKind::MmsB] {
            let s = Scenario::build(kind, &grid(32, 1.0), params(4), 1.0).unwrap();
            assert!(s.data.compatibility_residual() <= 1e-10);
        }
        let d = Domain::rectangle(2.0, 1.0, 0.5).unwrap();
        let g = build_grid(d, &[9, 7], 8).unwrap();
        let s = Scenario::build(ScenarioKind::MmsA, &g, params(4), 1.0).unwrap();
        assert!(s.data.compatibility_residual() <= 1e-10);
    }

    #[test]
    fn f_omega_is_twice_psi_for_mms_a() {
        let s = Scenario::build(ScenarioKind::MmsA, &grid(16, 1.0), params(4), 1.0).unwrap();
        let fw = s.data.f_omega();
        assert!(fw.sub(&s.data.psi.scaled(2.0)).max_abs() < 1e-9);
    }

    #[test]
    fn mms_a_numerator_identity() {
        // −ψ_t + ψ_xx + (f,ω) + (u,ω″) = ψ for the exact fields
        let g = grid(128, 0.5);
        let s = Scenario::build(ScenarioKind::MmsA, &g, params(4), 1.0).unwrap();
        let d = &s.data;
        let pt = dt_derivative(&d.psi);
        let fw = d.f_omega();
        let u = s.truth_u.as_ref().unwrap();
        for n in 0..g.time_nodes() {
            let lap = laplacian(d.psi.slice(n), &g);
            for i in (0..g.space_len()).filter(|&i| g.in_margin(i, 2)) {
                let uw: f64 = u.modes.iter().zip(&d.omega.couplings).map(|(m, c)| c * m.get(n, i)).sum();
                let num = -pt.get(n, i) + lap[i] + fw.get(n, i) + uw;
                assert_abs_diff_eq!(num / d.psi.get(n, i), 1.0, epsilon = 1e-2);
            }
        }
    }

    #[test]
    fn null_scenario_has_vanishing_psi() {
        let s = Scenario::build(ScenarioKind::Null, &grid(16, 1.0), params(2), 1.0).unwrap();
        assert!(compute_psi(&s.data, 1e-12).unwrap().max_abs() < 1e-10);
        let d = Domain::rectangle(1.0, 2.0, 1.0).unwrap();
        let g = build_grid(d, &[6, 5], 4).unwrap();
        let s = Scenario::build(ScenarioKind::Null, &g, params(2), 1.0).unwrap();
        assert!(compute_psi(&s.data, 1e-12).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn mms_b_psi_matches_one_plus_truth() {
        let g = grid(128, 0.5);
        let s = Scenario::build(ScenarioKind::MmsB, &g, params(4), 1.0).unwrap();
        let big = compute_psi(&s.data, 1e-12).unwrap();
        let want = s.truth_a.as_ref().unwrap().map(|v| v + 1.0);
        assert!(relative_margin_error(&big, &want, 2) < 1e-3);
    }

    #[test]
    fn recovery_error_arithmetic() {
        let g = grid(16, 0.5);
        let s = Scenario::build(ScenarioKind::MmsA, &g, params(2), 1.0).unwrap();
        let mut r = run_inversion(&s.data, &Settings { force: true, max_iters: 1, ..Settings::default() }).unwrap();
        r.a = s.truth_a.clone().unwrap();
        r.u_modes = s.truth_u.clone().unwrap();
        let e = recovery_error(&r, &s, 2).unwrap();
        assert_eq!((e.a, e.u), (0.0, 0.0));
        r.a = r.a.map(|v| v + 0.01);
        assert_abs_diff_eq!(recovery_error(&r, &s, 2).unwrap().a, 0.01, epsilon = 1e-12);
        let scaled = Scenario::build(ScenarioKind::MmsA, &g, params(2), 0.5).unwrap();
        assert!(recovery_error(&r, &scaled, 2).is_none());
    }

    #[test]
    fn null_study_is_exact() {
        let setup = StudySetup {
            kind: ScenarioKind::Null,
            domain: Domain::interval(PI, 0.5).unwrap(),
            params: SpectralParams::new(2, 1.0, 16).unwrap(),
            data_scale: 1.0,
        };
        let set = Settings { force: true, ..Settings::default() };
        let t = convergence_study(&setup, &[8, 16, 32], &set).unwrap();
        for r in &t.rows {
            assert!(r.error_a.unwrap() < 1e-12);
            assert_eq!(r.error_u, Some(0.0));
        }
        let s = setup.scenario(16).unwrap();
        assert!(uniqueness_probe(&s, &set).unwrap().distance < 1e-12);
        assert!(convergence_study(&setup, &[8, 16], &set).is_err());
    }

    #[test]
    fn recovery_error_invariant_under_joint_rescaling() {
        let g = grid(32, 0.5);
        let s = Scenario::build(ScenarioKind::MmsB, &g, params(4), 1.0).unwrap();
        let set = Settings { force: true, ..Settings::default() };
        let r = run_inversion(&s.data, &set).unwrap();
        let e1 = recovery_error(&r, &s, 2).unwrap();
        let mut s2 = s.clone();
        s2.data.psi = s.data.psi.scaled(3.0);
        s2.data.f_modes = s.data.f_modes.iter().map(|f| f.scaled(3.0)).collect();
        s2.data.phi_modes = s.data.phi_modes.iter().map(|p| p.iter().map(|v| 3.0 * v).collect()).collect();
        s2.truth_u = s.truth_u.as_ref().map(|u| u.scaled(3.0));
        let r2 = run_inversion(&s2.data, &set).unwrap();
        let e2 = recovery_error(&r2, &s2, 2).unwrap();
        assert_abs_diff_eq!(e1.a, e2.a, epsilon = 1e-8);
        assert_abs_diff_eq!(e1.u, e2.u, epsilon = 1e-8);
    }
}
