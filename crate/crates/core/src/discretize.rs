//! Uniform tensor grids over G = (0,Lx) or (0,Lx)×(0,Ly) and the time interval
//! (0,T), space-time fields, trapezoidal quadrature and second-order finite
//! differences.
//!
//! Space nodes include the boundary: along axis `d` there are `n[d] + 2` nodes
//! `x_i = i·h[d]`. In two dimensions the flat space index is `i·(ny+2) + j`.
//! Field values are stored as an `(Nt+1) × space_len` array, one row per time
//! node.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    dim: usize,
    lengths: [f64; 2],
    t_final: f64,
}

impl Domain {
    pub fn interval(lx: f64, t_final: f64) -> Result<Self> {
        Self::new(1, [lx, 0.0], t_final)
    }

    pub fn rectangle(lx: f64, ly: f64, t_final: f64) -> Result<Self> {
        Self::new(2, [lx, ly], t_final)
    }

    pub fn new(dim: usize, lengths: [f64; 2], t_final: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
        }
        for (d, &l) in lengths.iter().take(dim).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!("length of axis {d} must be positive, got {l}")));
            }
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Config(format!("final time must be positive, got {t_final}")));
        }
        let mut lengths = lengths;
        if dim == 1 {
            lengths[1] = 0.0;
        }
        Ok(Domain {
            dim,
            lengths,
            t_final,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn measure(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    /// First Dirichlet eigenvalue of −Δ on G.
    pub fn first_dirichlet_eigenvalue(&self) -> f64 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        self.lengths[..self.dim].iter().map(|l| pi2 / (l * l)).sum()
    }

    /// Same domain shrunk (or stretched) by `factor` in every space direction.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Domain::new(
            self.dim,
            [self.lengths[0] * factor, self.lengths[1] * factor],
            self.t_final,
        )
    }

    pub fn with_final_time(&self, t_final: f64) -> Result<Self> {
        Domain::new(self.dim, self.lengths, t_final)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    /// Interior node counts per axis (second entry is 0 in one dimension).
    pub n: [usize; 2],
    pub nt: usize,
    pub h: [f64; 2],
    pub dt: f64,
}

/// Build a uniform grid. `counts` holds the interior node count per axis.
pub fn build_grid(domain: Domain, counts: &[usize], nt: usize) -> Result<Grid> {
    if counts.len() != domain.dim() {
        return Err(Error::Config(format!(
            "expected {} interior counts, got {}",
            domain.dim(),
            counts.len()
        )));
    }
    if let Some(c) = counts.iter().find(|&&c| c < 2) {
        return Err(Error::Config(format!("interior node count must be >= 2, got {c}")));
    }
    if nt < 2 {
        return Err(Error::Config(format!("time step count must be >= 2, got {nt}")));
    }
    let mut n = [0usize; 2];
    let mut h = [0.0; 2];
    for (d, &c) in counts.iter().enumerate() {
        n[d] = c;
        h[d] = domain.length(d) / (c + 1) as f64;
    }
    Ok(Grid {
        domain,
        n,
        nt,
        h,
        dt: domain.t_final() / nt as f64,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Nodes along `axis`, boundary included.
    pub fn axis_nodes(&self, axis: usize) -> usize {
        if axis < self.dim() {
            self.n[axis] + 2
        } else {
            1
        }
    }

    pub fn space_len(&self) -> usize {
        self.axis_nodes(0) * self.axis_nodes(1)
    }

    pub fn time_nodes(&self) -> usize {
        self.nt + 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.time_nodes()).map(|n| self.time(n)).collect()
    }

    /// Per-axis node indices of a flat space index.
    pub fn node(&self, idx: usize) -> [usize; 2] {
        let stride = self.axis_nodes(1);
        [idx / stride, idx % stride]
    }

    pub fn index(&self, node: [usize; 2]) -> usize {
        node[0] * self.axis_nodes(1) + node[1]
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.node(idx);
        [i as f64 * self.h[0], j as f64 * self.h[1]]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary_distance(idx) == 0
    }

    /// Distance, in mesh cells, from a node to ∂G (minimum over axes).
    pub fn boundary_distance(&self, idx: usize) -> usize {
        let node = self.node(idx);
        (0..self.dim())
            .map(|d| node[d].min(self.n[d] + 1 - node[d]))
            .min()
            .unwrap_or(0)
    }

    pub fn in_margin(&self, idx: usize, margin: usize) -> bool {
        self.boundary_distance(idx) >= margin
    }

    /// Nearest node whose distance to ∂G is at least `margin` cells.
    pub fn nearest_in_margin(&self, idx: usize, margin: usize) -> usize {
        let mut node = self.node(idx);
        for d in 0..self.dim() {
            let hi = (self.n[d] + 1).saturating_sub(margin).max(margin);
            node[d] = node[d].clamp(margin, hi);
        }
        self.index(node)
    }

    /// Number of space nodes inside the margin.
    pub fn margin_count(&self, margin: usize) -> usize {
        (0..self.space_len())
            .filter(|&i| self.in_margin(i, margin))
            .count()
    }

    /// Trapezoidal quadrature weights over G.
    pub fn space_weights(&self) -> Vec<f64> {
        let axis_w = |d: usize, i: usize| -> f64 {
            if d >= self.dim() {
                1.0
            } else if i == 0 || i == self.n[d] + 1 {
                0.5 * self.h[d]
            } else {
                self.h[d]
            }
        };
        (0..self.space_len())
            .map(|idx| {
                let [i, j] = self.node(idx);
                axis_w(0, i) * axis_w(1, j)
            })
            .collect()
    }

    /// Trapezoidal quadrature weights over (0,T).
    pub fn time_weights(&self) -> Vec<f64> {
        let nt = self.nt;
        (0..=nt)
            .map(|n| if n == 0 || n == nt { 0.5 * self.dt } else { self.dt })
            .collect()
    }

    /// Walk every grid line parallel to `axis`, yielding (start, stride, len).
    fn lines(&self, axis: usize) -> Vec<(usize, usize, usize)> {
        let n0 = self.axis_nodes(0);
        let n1 = self.axis_nodes(1);
        match axis {
            0 => (0..n1).map(|j| (j, n1, n0)).collect(),
            _ => (0..n0).map(|i| (i * n1, 1, n1)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Values on ∂G are forced to zero.
    Dirichlet,
    /// Boundary values are kept as given.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
    boundary: Boundary,
}

impl ScalarField {
    pub fn zeros(grid: &Grid, boundary: Boundary) -> Self {
        ScalarField {
            grid: *grid,
            values: Array2::zeros((grid.time_nodes(), grid.space_len())),
            boundary,
        }
    }

    /// Sample `f(t, x)` at every grid node.
    pub fn from_fn<F>(grid: &Grid, boundary: Boundary, f: F) -> Self
    where
        F: Fn(f64, [f64; 2]) -> f64,
    {
        let mut field = Self::zeros(grid, boundary);
        for n in 0..grid.time_nodes() {
            let t = grid.time(n);
            let row = field.slice_mut(n);
            for (idx, v) in row.iter_mut().enumerate() {
                *v = f(t, grid.coords(idx));
            }
        }
        field.enforce_boundary();
        field
    }

    pub fn from_values(grid: &Grid, boundary: Boundary, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.time_nodes(), grid.space_len()) {
            return Err(Error::Data(format!(
                "field shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.time_nodes(),
                grid.space_len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite field value at flat position {pos}")));
        }
        let mut field = ScalarField {
            grid: *grid,
            values: values.as_standard_layout().into_owned(),
            boundary,
        };
        field.enforce_boundary();
        Ok(field)
    }

    /// Field constant in time, equal to `profile` at every time node.
    pub fn from_profile(grid: &Grid, boundary: Boundary, profile: &[f64]) -> Result<Self> {
        if profile.len() != grid.space_len() {
            return Err(Error::Data(format!(
                "profile length {} does not match {} space nodes",
                profile.len(),
                grid.space_len()
            )));
        }
        let mut field = Self::zeros(grid, boundary);
        for n in 0..grid.time_nodes() {
            field.slice_mut(n).copy_from_slice(profile);
        }
        field.enforce_boundary();
        Ok(field)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        self.values
            .row(n)
            .to_slice()
            .expect("field rows are contiguous")
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        self.values
            .row_mut(n)
            .into_slice()
            .expect("field rows are contiguous")
    }

    pub fn get(&self, n: usize, idx: usize) -> f64 {
        self.values[[n, idx]]
    }

    pub fn enforce_boundary(&mut self) {
        if self.boundary == Boundary::Dirichlet {
            let grid = self.grid;
            let boundary: Vec<usize> = (0..grid.space_len())
                .filter(|&i| grid.is_boundary(i))
                .collect();
            for n in 0..grid.time_nodes() {
                let row = self.slice_mut(n);
                for &i in &boundary {
                    row[i] = 0.0;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: &self.values * s,
            boundary: self.boundary,
        }
    }

    /// `self − other` (boundary behavior of `self`).
    pub fn sub(&self, other: &ScalarField) -> Self {
        ScalarField {
            grid: self.grid,
            values: &self.values - &other.values,
            boundary: self.boundary,
        }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        ScalarField {
            grid: self.grid,
            values: &self.values + &other.values,
            boundary: self.boundary,
        }
    }

    /// Apply `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.mapv(f),
            boundary: self.boundary,
        }
    }
}

/// Composite trapezoidal integral over G of one space slice.
pub fn integrate_g(slice: &[f64], grid: &Grid) -> f64 {
    debug_assert_eq!(slice.len(), grid.space_len());
    grid.space_weights()
        .iter()
        .zip(slice)
        .map(|(w, v)| w * v)
        .sum()
}

pub fn l2_sq_g(slice: &[f64], grid: &Grid) -> f64 {
    grid.space_weights()
        .iter()
        .zip(slice)
        .map(|(w, v)| w * v * v)
        .sum()
}

pub fn l2_norm_g(slice: &[f64], grid: &Grid) -> f64 {
    l2_sq_g(slice, grid).sqrt()
}

/// Squared L2(G_T) norm: trapezoid in time of the squared L2(G) norms.
pub fn l2_sq_gt(field: &ScalarField) -> f64 {
    let grid = field.grid();
    let sw = grid.space_weights();
    grid.time_weights()
        .iter()
        .enumerate()
        .map(|(n, wt)| {
            let s: f64 = sw.iter().zip(field.slice(n)).map(|(w, v)| w * v * v).sum();
            wt * s
        })
        .sum()
}

pub fn l2_norm_gt(field: &ScalarField) -> f64 {
    l2_sq_gt(field).sqrt()
}

/// Second-order first derivative of a uniformly sampled line (≥ 3 samples):
/// central in the interior, one-sided three-point at both ends.
fn first_derivative_line(v: &[f64], h: f64, out: &mut [f64]) {
    let m = v.len();
    debug_assert!(m >= 3);
    let inv = 0.5 / h;
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv;
    for i in 1..m - 1 {
        out[i] = (v[i + 1] - v[i - 1]) * inv;
    }
    out[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) * inv;
}

/// Second-order second derivative (≥ 4 samples): central in the interior,
/// one-sided four-point at both ends.
fn second_derivative_line(v: &[f64], h: f64, out: &mut [f64]) {
    let m = v.len();
    debug_assert!(m >= 4);
    let inv = 1.0 / (h * h);
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv;
    for i in 1..m - 1 {
        out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv;
    }
    out[m - 1] = (2.0 * v[m - 1] - 5.0 * v[m - 2] + 4.0 * v[m - 3] - v[m - 4]) * inv;
}

fn along_axis(
    slice: &[f64],
    grid: &Grid,
    axis: usize,
    out: &mut [f64],
    accumulate: bool,
    op: fn(&[f64], f64, &mut [f64]),
) {
    let h = grid.h[axis];
    let mut line = Vec::new();
    let mut res = Vec::new();
    for (start, stride, len) in grid.lines(axis) {
        line.clear();
        line.extend((0..len).map(|i| slice[start + i * stride]));
        res.resize(len, 0.0);
        op(&line, h, &mut res);
        for (i, r) in res.iter().enumerate() {
            let o = &mut out[start + i * stride];
            if accumulate {
                *o += r;
            } else {
                *o = *r;
            }
        }
    }
}

/// Gradient of a space slice, one vector per axis.
pub fn grad_x(slice: &[f64], grid: &Grid) -> Vec<Vec<f64>> {
    (0..grid.dim())
        .map(|d| {
            let mut out = vec![0.0; grid.space_len()];
            along_axis(slice, grid, d, &mut out, false, first_derivative_line);
            out
        })
        .collect()
}

/// ∫_G |∇v|² dx.
pub fn grad_sq_g(slice: &[f64], grid: &Grid) -> f64 {
    grad_x(slice, grid).iter().map(|g| l2_sq_g(g, grid)).sum()
}

/// Δ_x of a space slice.
pub fn laplacian(slice: &[f64], grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; grid.space_len()];
    for d in 0..grid.dim() {
        along_axis(slice, grid, d, &mut out, true, second_derivative_line);
    }
    out
}

/// Time derivative by second-order differences (one-sided at t = 0 and t = T).
pub fn dt_derivative(field: &ScalarField) -> ScalarField {
    let grid = *field.grid();
    let mut out = ScalarField::zeros(&grid, Boundary::Free);
    let mut line = vec![0.0; grid.time_nodes()];
    let mut res = vec![0.0; grid.time_nodes()];
    for idx in 0..grid.space_len() {
        for (n, l) in line.iter_mut().enumerate() {
            *l = field.get(n, idx);
        }
        first_derivative_line(&line, grid.dt, &mut res);
        for (n, r) in res.iter().enumerate() {
            out.values[[n, idx]] = *r;
        }
    }
    out.boundary = field.boundary();
    out.enforce_boundary();
    out
}

/// Derivative of a sampled function of time (used for scalar histories).
pub fn time_derivative_samples(samples: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; samples.len()];
    first_derivative_line(samples, dt, &mut out);
    out
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        m => h * (samples[1..m - 1].iter().sum::<f64>() + 0.5 * (samples[0] + samples[m - 1])),
    }
}
