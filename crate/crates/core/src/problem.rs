//! Input data of the inverse problem and the numerical settings shared by the
//! certificate, the inversion loop and the verification studies.

use std::f64::consts::PI;

use crate::discretize::{l2_norm_g, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::spectral::{OmegaData, SpectralParams};

/// Default division floor for |ψ|.
pub const PSI_FLOOR: f64 = 1e-12;

/// Everything the inversion needs, already projected onto the sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseData {
    pub grid: Grid,
    pub params: SpectralParams,
    pub omega: OmegaData,
    /// Measurement ψ(t,x).
    pub psi: ScalarField,
    /// Source coefficients f_k(t,x), k = 1..=K.
    pub f_modes: Vec<ScalarField>,
    /// Initial coefficients φ_k(x), k = 1..=K.
    pub phi_modes: Vec<Vec<f64>>,
}

impl InverseData {
    pub fn new(
        params: SpectralParams,
        omega: OmegaData,
        psi: ScalarField,
        f_modes: Vec<ScalarField>,
        phi_modes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let grid = *psi.grid();
        let k = params.modes;
        if f_modes.len() != k || phi_modes.len() != k {
            return Err(Error::Data(format!(
                "expected {k} source and initial modes, got {} and {}",
                f_modes.len(),
                phi_modes.len()
            )));
        }
        if omega.modes() < k {
            return Err(Error::Data(format!(
                "omega carries {} coefficients, {k} needed",
                omega.modes()
            )));
        }
        if f_modes.iter().any(|f| f.grid() != &grid) {
            return Err(Error::Data("source modes and psi live on different grids".into()));
        }
        if phi_modes.iter().any(|p| p.len() != grid.space_len()) {
            return Err(Error::Data("initial modes do not match the space grid".into()));
        }
        if phi_modes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("initial modes contain non-finite values".into()));
        }
        if !psi.is_finite() || f_modes.iter().any(|f| !f.is_finite()) {
            return Err(Error::Data("psi or source contains non-finite values".into()));
        }
        Ok(InverseData {
            grid,
            params,
            omega,
            psi,
            f_modes,
            phi_modes,
        })
    }

    /// (f, ω)(t,x) = (π/2) Σ_k f_k ω_k as a field.
    pub fn f_omega(&self) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid, crate::discretize::Boundary::Free);
        for (f, w) in self.f_modes.iter().zip(&self.omega.omega_coeffs) {
            let w = PI / 2.0 * w;
            for n in 0..self.grid.time_nodes() {
                for (o, v) in out.slice_mut(n).iter_mut().zip(f.slice(n)) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// ‖(π/2) Σ φ_k ω_k − ψ(0,·)‖_{L2(G)}.
    pub fn compatibility_residual(&self) -> f64 {
        let mut r: Vec<f64> = self.psi.slice(0).iter().map(|v| -v).collect();
        for (p, w) in self.phi_modes.iter().zip(&self.omega.omega_coeffs) {
            for (ri, pi) in r.iter_mut().zip(p) {
                *ri += PI / 2.0 * w * pi;
            }
        }
        l2_norm_g(&r, &self.grid)
    }
}

/// Numerical settings of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub theta: f64,
    /// Distance from ∂G, in mesh cells, of nodes used for suprema and errors.
    pub boundary_margin: usize,
    pub psi_floor: f64,
    /// Supplied Sobolev embedding constant.
    pub c_s: f64,
    pub tol_f: f64,
    pub max_iters: usize,
    /// Run the inversion even when no certificate passes.
    pub force: bool,
    pub strategy: Strategy,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            theta: 0.5,
            boundary_margin: 2,
            psi_floor: PSI_FLOOR,
            c_s: 1.0,
            tol_f: 1e-10,
            max_iters: 50,
            force: false,
            strategy: Strategy::default(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0.5, 1], got {}", self.theta)));
        }
        if !(self.c_s.is_finite() && self.c_s > 0.0) {
            return Err(Error::Config(format!("C_S must be positive, got {}", self.c_s)));
        }
        if !(self.psi_floor.is_finite() && self.psi_floor >= 0.0) {
            return Err(Error::Config("psi_floor must be nonnegative".into()));
        }
        if !(self.tol_f.is_finite() && self.tol_f >= 0.0) {
            return Err(Error::Config("tol_F must be nonnegative".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}
