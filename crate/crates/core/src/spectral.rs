//! The sine eigenbasis of −d²/dy² on (0,π) with Dirichlet conditions:
//! eigenvalues λ_k = k², analysis/synthesis of y-profiles, the weight ω and its
//! couplings c_j = (sin jy, ω″), fractional-power weighted norms and the
//! energy functional used as the Picard contraction metric.
//!
//! The y-grid has `ny` uniform intervals on [0,π] (nodes `y_j = jπ/ny`,
//! endpoints included). Analysis of general profiles uses the trapezoidal rule,
//! which is exactly orthogonal on sin ky for k < ny. Moments of ω and ω″ use a
//! piecewise-quintic product rule instead, since ω need not have a smooth odd
//! periodic extension.

use std::f64::consts::PI;

use crate::discretize::{dt_derivative, grad_sq_g, l2_sq_g, l2_sq_gt, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::exec::Strategy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    /// Number of retained modes, k = 1..=modes.
    pub modes: usize,
    pub epsilon: f64,
    /// Intervals of the y quadrature grid.
    pub ny: usize,
}

impl SpectralParams {
    pub fn new(modes: usize, epsilon: f64, ny: usize) -> Result<Self> {
        if modes < 1 {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if ny < 4 * modes || ny < 8 {
            return Err(Error::Config(format!(
                "y quadrature needs at least max(4K, 8) = {} intervals, got {ny}",
                (4 * modes).max(8)
            )));
        }
        Ok(SpectralParams { modes, epsilon, ny })
    }

    pub fn tau1(&self) -> f64 {
        (1.0 + self.epsilon) / 4.0
    }

    pub fn tau2(&self) -> f64 {
        (3.0 + self.epsilon) / 4.0
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.modes, epsilon, self.ny)
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        y_nodes(self.ny)
    }
}

pub fn y_nodes(ny: usize) -> Vec<f64> {
    let h = PI / ny as f64;
    (0..=ny).map(|j| j as f64 * h).collect()
}

/// λ_k = k².
pub fn eigenvalue(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("mode index must be >= 1".into()));
    }
    Ok((k * k) as f64)
}

#[inline]
fn lambda(k: usize) -> f64 {
    (k * k) as f64
}

/// p_k = (2/π)∫₀^π v(y) sin(ky) dy by the trapezoidal rule on the uniform y-grid.
pub fn sine_coeff(v: &[f64], k: usize) -> f64 {
    let ny = v.len() - 1;
    let h = PI / ny as f64;
    let kf = k as f64;
    // sin vanishes at both endpoints, so only interior nodes contribute
    let s: f64 = (1..ny).map(|j| v[j] * (kf * j as f64 * h).sin()).sum();
    2.0 / PI * h * s
}

pub fn sine_coeffs(v: &[f64], modes: usize) -> Vec<f64> {
    (1..=modes).map(|k| sine_coeff(v, k)).collect()
}

/// Partial sum Σ_k coeffs[k−1]·sin(ky) at every `y`.
pub fn synthesize(coeffs: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter()
        .map(|&yy| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * ((i + 1) as f64 * yy).sin())
                .sum()
        })
        .collect()
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Quadrature points and values of the piecewise-quintic interpolant of
/// uniformly sampled data on [0,π]: returns (y_p, w_p·P(y_p)).
fn quintic_product_points(samples: &[f64]) -> Vec<(f64, f64)> {
    let ny = samples.len() - 1;
    debug_assert!(ny >= 5);
    let h = PI / ny as f64;
    let mut pts = Vec::with_capacity(ny * 8);
    for m in 0..ny {
        let s = m.saturating_sub(2).min(ny - 5);
        for (xi, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
            let u = (m - s) as f64 + 0.5 * (1.0 + xi);
            let mut val = 0.0;
            for r in 0..6 {
                let mut basis = 1.0;
                for q in 0..6 {
                    if q != r {
                        basis *= (u - q as f64) / (r as f64 - q as f64);
                    }
                }
                val += basis * samples[s + r];
            }
            pts.push(((m as f64 + 0.5 * (1.0 + xi)) * h, 0.5 * h * w * val));
        }
    }
    pts
}

/// ∫₀^π v(y) sin(jy) dy for each j = 1..=modes, with v replaced by its
/// piecewise-quintic interpolant.
pub fn product_sine_moments(samples: &[f64], modes: usize) -> Vec<f64> {
    let pts = quintic_product_points(samples);
    (1..=modes)
        .map(|j| {
            let jf = j as f64;
            pts.iter().map(|(y, wv)| wv * (jf * y).sin()).sum()
        })
        .collect()
}

/// Fourth-order second derivative of uniformly sampled data.
pub fn second_derivative_4th(v: &[f64], h: f64) -> Vec<f64> {
    let m = v.len();
    assert!(m >= 6, "need at least 6 samples");
    let c = 1.0 / (12.0 * h * h);
    let mut out = vec![0.0; m];
    for i in 2..m - 2 {
        out[i] = (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) * c;
    }
    let left = |w: &dyn Fn(usize) -> f64| {
        [
            (45.0 * w(0) - 154.0 * w(1) + 214.0 * w(2) - 156.0 * w(3) + 61.0 * w(4) - 10.0 * w(5))
                * c,
            (10.0 * w(0) - 15.0 * w(1) - 4.0 * w(2) + 14.0 * w(3) - 6.0 * w(4) + w(5)) * c,
        ]
    };
    let [a, b] = left(&|i| v[i]);
    out[0] = a;
    out[1] = b;
    let [a, b] = left(&|i| v[m - 1 - i]);
    out[m - 1] = a;
    out[m - 2] = b;
    out
}

/// The weight ω of the integral measurement together with everything derived
/// from it.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaData {
    pub omega: Vec<f64>,
    pub omega_dd: Vec<f64>,
    /// ω_j = (2/π)∫ω sin jy.
    pub omega_coeffs: Vec<f64>,
    /// c_j = (sin jy, ω″) by direct quadrature against ω″.
    pub couplings: Vec<f64>,
    /// c_j = −λ_j (π/2) ω_j, the integration-by-parts route.
    pub couplings_ibp: Vec<f64>,
    /// ‖ω″‖ in L2(0,π).
    pub omega_dd_norm: f64,
}

impl OmegaData {
    /// Build from samples of ω and ω″ on the `ny`-interval y-grid.
    pub fn from_samples(omega: Vec<f64>, omega_dd: Vec<f64>, modes: usize) -> Result<Self> {
        if omega.len() != omega_dd.len() || omega.len() < 9 {
            return Err(Error::Data(format!(
                "omega ({}) and omega'' ({}) must share a y-grid of at least 8 intervals",
                omega.len(),
                omega_dd.len()
            )));
        }
        if let Some(v) = omega.iter().chain(&omega_dd).find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite omega sample {v}")));
        }
        let scale = omega.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-10 * scale;
        let (w0, wpi) = (omega[0], omega[omega.len() - 1]);
        if w0.abs() > tol || wpi.abs() > tol {
            return Err(Error::Data(format!(
                "omega must vanish at y = 0 and y = pi (got {w0:e}, {wpi:e})"
            )));
        }
        let ny = omega.len() - 1;
        let h = PI / ny as f64;
        let omega_coeffs: Vec<f64> = product_sine_moments(&omega, modes)
            .into_iter()
            .map(|m| 2.0 / PI * m)
            .collect();
        let couplings = omega_couplings(&omega_dd, modes);
        let couplings_ibp = omega_coeffs
            .iter()
            .enumerate()
            .map(|(i, w)| -lambda(i + 1) * PI / 2.0 * w)
            .collect();
        let sq: Vec<f64> = omega_dd.iter().map(|v| v * v).collect();
        let omega_dd_norm = crate::discretize::trapezoid(&sq, h).sqrt();
        Ok(OmegaData {
            omega,
            omega_dd,
            omega_coeffs,
            couplings,
            couplings_ibp,
            omega_dd_norm,
        })
    }

    /// Sample closed-form ω and ω″.
    pub fn from_fn(
        ny: usize,
        modes: usize,
        omega: impl Fn(f64) -> f64,
        omega_dd: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let y = y_nodes(ny);
        Self::from_samples(
            y.iter().map(|&v| omega(v)).collect(),
            y.iter().map(|&v| omega_dd(v)).collect(),
            modes,
        )
    }

    /// Build from ω samples alone; ω″ comes from fourth-order differences.
    pub fn from_omega_samples(omega: Vec<f64>, modes: usize) -> Result<Self> {
        if omega.len() < 9 {
            return Err(Error::Data("omega needs at least 8 y intervals".into()));
        }
        let h = PI / (omega.len() - 1) as f64;
        let dd = second_derivative_4th(&omega, h);
        Self::from_samples(omega, dd, modes)
    }

    pub fn ny(&self) -> usize {
        self.omega.len() - 1
    }

    pub fn modes(&self) -> usize {
        self.couplings.len()
    }

    /// Largest disagreement between the two coupling routes.
    pub fn coupling_mismatch(&self) -> f64 {
        self.couplings
            .iter()
            .zip(&self.couplings_ibp)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// (v, ω) = (π/2) Σ_k v_k ω_k for a profile given by its sine coefficients.
    pub fn inner(&self, coeffs: &[f64]) -> f64 {
        PI / 2.0
            * coeffs
                .iter()
                .zip(&self.omega_coeffs)
                .map(|(v, w)| v * w)
                .sum::<f64>()
    }

    /// Σ_j c_j v_j.
    pub fn coupling_series(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.couplings).map(|(v, c)| v * c).sum()
    }
}

/// c_j = ∫₀^π sin(jy) ω″(y) dy for j = 1..=modes, by product quadrature.
pub fn omega_couplings(omega_dd: &[f64], modes: usize) -> Vec<f64> {
    product_sine_moments(omega_dd, modes)
}

/// Coefficients u_k(t,x) of the sine expansion, k = 1..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFieldSet {
    pub modes: Vec<ScalarField>,
    pub params: SpectralParams,
}

impl ModeFieldSet {
    pub fn new(modes: Vec<ScalarField>, params: SpectralParams) -> Result<Self> {
        if modes.len() != params.modes {
            return Err(Error::Data(format!(
                "expected {} modes, got {}",
                params.modes,
                modes.len()
            )));
        }
        if let Some(first) = modes.first() {
            if modes.iter().any(|m| m.grid() != first.grid()) {
                return Err(Error::Data("modes live on different grids".into()));
            }
        }
        Ok(ModeFieldSet { modes, params })
    }

    pub fn zeros(grid: &Grid, params: SpectralParams) -> Self {
        let modes = (0..params.modes)
            .map(|_| ScalarField::zeros(grid, crate::discretize::Boundary::Dirichlet))
            .collect();
        ModeFieldSet { modes, params }
    }

    pub fn grid(&self) -> &Grid {
        self.modes[0].grid()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Coefficients (u_1, …, u_K) at one node.
    pub fn coeffs_at(&self, n: usize, idx: usize) -> Vec<f64> {
        self.modes.iter().map(|m| m.get(n, idx)).collect()
    }

    pub fn sub(&self, other: &ModeFieldSet) -> ModeFieldSet {
        ModeFieldSet {
            modes: self
                .modes
                .iter()
                .zip(&other.modes)
                .map(|(a, b)| a.sub(b))
                .collect(),
            params: self.params,
        }
    }

    pub fn add(&self, other: &ModeFieldSet) -> ModeFieldSet {
        ModeFieldSet {
            modes: self
                .modes
                .iter()
                .zip(&other.modes)
                .map(|(a, b)| a.add(b))
                .collect(),
            params: self.params,
        }
    }

    pub fn scaled(&self, s: f64) -> ModeFieldSet {
        ModeFieldSet {
            modes: self.modes.iter().map(|m| m.scaled(s)).collect(),
            params: self.params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// L2 part only.
    L2,
    /// L2 plus gradient (W¹₂ in x).
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// L2(G) at one time node.
    At(usize),
    /// L2(G_T).
    SpaceTime,
}

fn level_terms(field: &ScalarField, level: Level, measure: Measure) -> f64 {
    let grid = field.grid();
    match measure {
        Measure::At(n) => {
            let s = field.slice(n);
            let mut v = l2_sq_g(s, grid);
            if level == Level::H1 {
                v += grad_sq_g(s, grid);
            }
            v
        }
        Measure::SpaceTime => {
            let mut v = l2_sq_gt(field);
            if level == Level::H1 {
                let tw = grid.time_weights();
                v += (0..grid.time_nodes())
                    .map(|n| tw[n] * grad_sq_g(field.slice(n), grid))
                    .sum::<f64>();
            }
            v
        }
    }
}

/// Σ_k λ_k^{2τ}(‖v_k‖² [+ ‖∇v_k‖²]) over the chosen measure. No π/2
/// Parseval factor is applied.
pub fn frac_norm(modes: &[ScalarField], level: Level, tau: f64, measure: Measure) -> f64 {
    modes
        .iter()
        .enumerate()
        .map(|(i, m)| lambda(i + 1).powf(2.0 * tau) * level_terms(m, level, measure))
        .sum()
}

/// Same weighted sum for time-independent profiles (e.g. the initial data φ_k).
pub fn frac_norm_profiles(profiles: &[Vec<f64>], grid: &Grid, level: Level, tau: f64) -> f64 {
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut v = l2_sq_g(p, grid);
            if level == Level::H1 {
                v += grad_sq_g(p, grid);
            }
            lambda(i + 1).powf(2.0 * tau) * v
        })
        .sum()
}

/// The bracket of the energy functional for a single mode:
/// ‖D_t u‖²_{L2(G_T)} + sup_t‖∇u‖²_{L2(G)} + λ_k sup_t‖u‖²_{L2(G)}.
pub fn energy_terms(field: &ScalarField, k: usize) -> f64 {
    let grid = field.grid();
    let dt_sq = l2_sq_gt(&dt_derivative(field));
    let mut sup_grad = 0.0f64;
    let mut sup_val = 0.0f64;
    for n in 0..grid.time_nodes() {
        let s = field.slice(n);
        sup_grad = sup_grad.max(grad_sq_g(s, grid));
        sup_val = sup_val.max(l2_sq_g(s, grid));
    }
    dt_sq + sup_grad + lambda(k) * sup_val
}

/// F(u) = Σ_k λ_k^{(1+ε)/2}[‖D_t u_k‖² + sup_t‖∇u_k‖² + λ_k sup_t‖u_k‖²].
pub fn f_functional(modes: &ModeFieldSet, strategy: Strategy) -> f64 {
    let weight = (1.0 + modes.params.epsilon) / 2.0;
    strategy
        .map(modes.len(), |i| {
            lambda(i + 1).powf(weight) * energy_terms(&modes.modes[i], i + 1)
        })
        .into_iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_grid, Boundary, Domain};
    use crate::exec::Strategy;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn eigenvalues() {
        assert_eq!(eigenvalue(1).unwrap(), 1.0);
        assert_eq!(eigenvalue(3).unwrap(), 9.0);
        assert_eq!(eigenvalue(10).unwrap(), 100.0);
        assert!(matches!(eigenvalue(0), Err(Error::Domain(_))));
    }

    #[test]
    fn params_validation() {
        assert!(SpectralParams::new(0, 1.0, 64).is_err());
        assert!(SpectralParams::new(4, 0.0, 64).is_err());
        assert!(SpectralParams::new(32, 1.0, 127).is_err());
        let p = SpectralParams::new(32, 1.0, 128).unwrap();
        assert_abs_diff_eq!(p.tau1(), 0.5);
        assert_abs_diff_eq!(p.tau2(), 1.0);
        assert!(p.tau1() < p.tau2());
    }

    #[test]
    fn sine_coeffs_of_sin2y() {
        let y = y_nodes(256);
        let v: Vec<f64> = y.iter().map(|y| (2.0 * y).sin()).collect();
        assert_abs_diff_eq!(sine_coeff(&v, 2), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sine_coeff(&v, 1), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sine_coeff(&v, 3), 0.0, epsilon = 1e-10);
        assert_eq!(sine_coeff(&vec![0.0; 257], 5), 0.0);
    }

    #[test]
    fn sine_coeffs_of_parabola() {
        let y = y_nodes(256);
        let v: Vec<f64> = y.iter().map(|y| y * (PI - y)).collect();
        for k in 1..=16 {
            let exact = if k % 2 == 1 {
                8.0 / (PI * (k as f64).powi(3))
            } else {
                0.0
            };
            assert_abs_diff_eq!(sine_coeff(&v, k), exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn synthesis_of_parabola_tail_bound() {
        let k = 64;
        let coeffs: Vec<f64> = (1..=k)
            .map(|k| if k % 2 == 1 { 8.0 / (PI * (k as f64).powi(3)) } else { 0.0 })
            .collect();
        let y = y_nodes(512);
        let s = synthesize(&coeffs, &y);
        let err = y
            .iter()
            .zip(&s)
            .map(|(y, s)| (y * (PI - y) - s).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "max error {err}");
        let one = synthesize(&[1.0, 0.0, 0.0], &y);
        for (y, v) in y.iter().zip(one) {
            assert_abs_diff_eq!(v, y.sin(), epsilon = 1e-15);
        }
    }

    #[test]
    fn couplings_closed_forms() {
        let w = OmegaData::from_fn(256, 8, f64::sin, |y| -y.sin()).unwrap();
        assert_abs_diff_eq!(w.couplings[0], -PI / 2.0, epsilon = 1e-10);
        for c in &w.couplings[1..] {
            assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(w.omega_dd_norm, (PI / 2.0).sqrt(), epsilon = 1e-12);

        let w = OmegaData::from_fn(256, 8, |y| (2.0 * y).sin(), |y| -4.0 * (2.0 * y).sin()).unwrap();
        assert_abs_diff_eq!(w.couplings[1], -2.0 * PI, epsilon = 1e-10);
        assert_abs_diff_eq!(w.couplings_ibp[1], -2.0 * PI, epsilon = 1e-10);
        assert_abs_diff_eq!(w.couplings[0], 0.0, epsilon = 1e-10);

        let w = OmegaData::from_fn(64, 8, |_| 0.0, |_| 0.0).unwrap();
        assert!(w.couplings.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn coupling_routes_agree_for_non_periodic_weight() {
        let w = OmegaData::from_fn(256, 32, |y| y * (PI - y), |_| -2.0).unwrap();
        assert!(w.coupling_mismatch() <= 1e-8, "{}", w.coupling_mismatch());
        // analytic: c_j = −2∫ sin jy = −4/j for odd j
        assert_abs_diff_eq!(w.couplings[2], -4.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn omega_must_vanish_at_ends() {
        let r = OmegaData::from_fn(64, 4, |y| y.cos(), |y| -y.cos());
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn finite_difference_second_derivative_of_omega() {
        let y = y_nodes(256);
        let om: Vec<f64> = y.iter().map(|y| y.sin() * y.cos().exp()).collect();
        let w = OmegaData::from_omega_samples(om, 16).unwrap();
        let exact = |y: f64| {
            let (s, c) = y.sin_cos();
            let e = c.exp();
            // d²/dy² [sin y · e^{cos y}]
            e * (-s - 3.0 * s * c + s * s * s)
        };
        for (yy, v) in y.iter().zip(&w.omega_dd) {
            assert_abs_diff_eq!(*v, exact(*yy), epsilon = 1e-6);
        }
    }

    fn pi_grid(nx: usize, nt: usize, t: f64) -> Grid {
        build_grid(Domain::interval(PI, t).unwrap(), &[nx], nt).unwrap()
    }

    #[test]
    fn frac_norm_examples() {
        let g = pi_grid(63, 4, 1.0);
        let unit = ScalarField::from_fn(&g, Boundary::Free, |_, _| 1.0 / PI.sqrt());
        let zero = ScalarField::zeros(&g, Boundary::Free);
        let one = frac_norm(&[unit.clone()], Level::L2, 0.37, Measure::At(0));
        assert_abs_diff_eq!(one, 1.0, epsilon = 1e-12);
        let k2 = frac_norm(&[zero.clone(), unit.clone()], Level::L2, 0.5, Measure::At(2));
        assert_abs_diff_eq!(k2, 4.0, epsilon = 1e-12);
        let both = frac_norm(&[unit.clone(), unit.clone()], Level::L2, 0.0, Measure::At(1));
        assert_abs_diff_eq!(both, 2.0, epsilon = 1e-12);
        // G_T measure of a time-constant unit field over T = 1
        let gt = frac_norm(&[unit], Level::L2, 0.0, Measure::SpaceTime);
        assert_abs_diff_eq!(gt, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn f_functional_of_static_sine() {
        let g = pi_grid(255, 8, 1.0);
        let p = SpectralParams::new(1, 1.0, 8).unwrap();
        let u = ScalarField::from_fn(&g, Boundary::Dirichlet, |_, x| x[0].sin());
        let set = ModeFieldSet::new(vec![u], p).unwrap();
        let f = f_functional(&set, Strategy::Sequential);
        assert_abs_diff_eq!(f, PI, epsilon = 1e-3);
        let f2 = f_functional(&set.scaled(2.0), Strategy::Parallel);
        assert_abs_diff_eq!(f2, 4.0 * f, epsilon = 1e-12);
        assert_eq!(f_functional(&ModeFieldSet::zeros(&g, p), Strategy::Sequential), 0.0);
    }

    proptest! {
        #[test]
        fn orthogonality(k in 1usize..=32, m in 1usize..=32) {
            let y = y_nodes(128);
            let v: Vec<f64> = y.iter().map(|y| (m as f64 * y).sin()).collect();
            let expect = if k == m { 1.0 } else { 0.0 };
            prop_assert!((sine_coeff(&v, k) - expect).abs() <= 1e-10);
        }

        #[test]
        fn round_trip_and_parseval(coeffs in proptest::collection::vec(-2.0f64..2.0, 32)) {
            let y = y_nodes(256);
            let v = synthesize(&coeffs, &y);
            let back = sine_coeffs(&v, 32);
            for (a, b) in coeffs.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
            let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            let lhs = crate::discretize::trapezoid(&sq, PI / 256.0);
            let rhs = PI / 2.0 * coeffs.iter().map(|c| c * c).sum::<f64>();
            prop_assert!((lhs - rhs).abs() <= 1e-8);
        }

        #[test]
        fn frac_norm_monotone_in_tau(
            vals in proptest::collection::vec(0.0f64..2.0, 4),
            tau in 0.0f64..1.0,
            dtau in 0.0f64..1.0,
        ) {
            let g = pi_grid(8, 2, 1.0);
            let modes: Vec<ScalarField> = vals.iter()
                .map(|&v| ScalarField::from_fn(&g, Boundary::Free, move |_, x| v * (1.0 + x[0])))
                .collect();
            let a = frac_norm(&modes, Level::H1, tau, Measure::SpaceTime);
            let b = frac_norm(&modes, Level::H1, tau + dtau, Measure::SpaceTime);
            prop_assert!(b >= a);
        }

        #[test]
        fn f_functional_triangle_inequality(
            a in proptest::collection::vec(-1.0f64..1.0, 6),
            b in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            let g = pi_grid(12, 6, 0.5);
            let p = SpectralParams::new(2, 1.0, 8).unwrap();
            let build = |c: &[f64]| {
                let modes = (0..2).map(|k| {
                    let (c0, c1, c2) = (c[3 * k], c[3 * k + 1], c[3 * k + 2]);
                    ScalarField::from_fn(&g, Boundary::Dirichlet, move |t, x| {
                        (c0 + c1 * t) * x[0].sin() + c2 * (2.0 * x[0]).sin() * (-t).exp()
                    })
                }).collect();
                ModeFieldSet::new(modes, p).unwrap()
            };
            let (u, v) = (build(&a), build(&b));
            let lhs = f_functional(&u.add(&v), Strategy::Sequential).sqrt();
            let rhs = f_functional(&u, Strategy::Sequential).sqrt()
                + f_functional(&v, Strategy::Sequential).sqrt();
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
