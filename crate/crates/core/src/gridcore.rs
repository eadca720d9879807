//! Uniform position and phase-space lattices, lattice fields, Gaussian
//! kernels and quadrature.
//!
//! A [`SpaceGrid`] discretizes a centered box `[-L, L)^n` with `N` points per
//! axis (`N` a power of two, `dx = 2L/N`). Its dual momentum lattice has
//! spacing `dk = pi/L` and covers `|k| <= pi/dx`. A [`PhaseField`] carries a
//! scalar over the product of a space grid and an explicit momentum lattice;
//! the Wigner construction fixes that lattice to `p = eps*k/2` so the per-axis
//! spacing is `dp = pi*eps/(2L)`.

use crate::error::{LabError, Result};
use crate::fourier::{self, Direction};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform centered lattice on `[-L, L)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    dim: usize,
    points: usize,
    halfwidth: f64,
    /// Offset the lattice by `dx/2` so no point hits the origin (used when a
    /// Coulomb center sits there). The point set stays symmetric about 0.
    staggered: bool,
}

impl SpaceGrid {
    pub fn new(dim: usize, points: usize, halfwidth: f64) -> Result<Self> {
        Self::build(dim, points, halfwidth, false)
    }

    /// Grid offset by half a cell from the origin along every axis.
    pub fn staggered(dim: usize, points: usize, halfwidth: f64) -> Result<Self> {
        Self::build(dim, points, halfwidth, true)
    }

    fn build(dim: usize, points: usize, halfwidth: f64, staggered: bool) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Parameter("grid dimension must be >= 1".into()));
        }
        if !points.is_power_of_two() || points < 4 {
            return Err(LabError::Parameter(format!(
                "points per axis must be a power of two >= 4, got {points}"
            )));
        }
        if !(halfwidth > 0.0) {
            return Err(LabError::Parameter("halfwidth must be positive".into()));
        }
        Ok(Self {
            dim,
            points,
            halfwidth,
            staggered,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn is_staggered(&self) -> bool {
        self.staggered
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.halfwidth / self.points as f64
    }

    /// Sample offset along every axis, in units of `dx`.
    pub fn offset(&self) -> f64 {
        if self.staggered {
            0.5
        } else {
            0.0
        }
    }

    /// Total number of lattice sites, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.points / 2) as f64 + self.offset()) * self.dx()
    }

    /// All per-axis coordinates.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Dual wavenumber of index `j` along one axis (`dk = pi/L`).
    pub fn wavenumber(&self, j: usize) -> f64 {
        fourier::wavenumber(j, self.points, self.dx())
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Decode a flat row-major index into per-axis indices.
    pub fn decode(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
    }

    /// Position vector of a flat index.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            out[a] = self.coord(rest % self.points);
            rest /= self.points;
        }
    }

    pub fn same_lattice(&self, other: &SpaceGrid) -> bool {
        self == other
    }
}

/// Centered momentum lattice `p_j = (j - N/2) dp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLattice {
    pub points: usize,
    pub spacing: f64,
}

impl PhaseLattice {
    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.points / 2) as f64) * self.spacing
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.coord(j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        (self.points / 2) as f64 * self.spacing
    }
}

/// What a phase-space field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldTag {
    Wigner,
    Husimi,
    Classical,
    Residual,
}

/// Complex scalar field over a [`SpaceGrid`] (row-major).
#[derive(Debug, Clone)]
pub struct ComplexField {
    pub grid: SpaceGrid,
    pub data: Vec<C64>,
}

impl ComplexField {
    pub fn zeros(grid: SpaceGrid) -> Self {
        Self {
            data: vec![C64::new(0.0, 0.0); grid.len()],
            grid,
        }
    }

    /// Build from a closure over the position vector.
    pub fn from_fn(grid: SpaceGrid, mut f: impl FnMut(&[f64]) -> C64) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); grid.len()];
        let mut pos = vec![0.0; grid.dim()];
        for (flat, slot) in data.iter_mut().enumerate() {
            grid.position(flat, &mut pos);
            *slot = f(&pos);
        }
        Self { grid, data }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// L2 inner product `<self, other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &ComplexField) -> C64 {
        debug_assert!(self.grid.same_lattice(&other.grid));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            * self.grid.cell_volume()
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    /// Unitary forward transform along every axis.
    pub fn forward_transform(&self) -> ComplexField {
        let mut out = self.clone();
        let shape = vec![self.grid.points(); self.grid.dim()];
        for axis in 0..self.grid.dim() {
            fourier::transform_axis(
                &mut out.data,
                &shape,
                axis,
                self.grid.dx(),
                self.grid.offset(),
                Direction::Forward,
            );
        }
        out
    }

    /// Unitary inverse transform along every axis.
    pub fn inverse_transform(&self) -> ComplexField {
        let mut out = self.clone();
        let shape = vec![self.grid.points(); self.grid.dim()];
        for axis in 0..self.grid.dim() {
            fourier::transform_axis(
                &mut out.data,
                &shape,
                axis,
                self.grid.dx(),
                self.grid.offset(),
                Direction::Inverse,
            );
        }
        out
    }

    /// Fraction of `|f|^2` mass within `band` cells of any box edge.
    pub fn boundary_mass_fraction(&self, band: usize) -> f64 {
        let n = self.grid.points();
        let dim = self.grid.dim();
        let mut idx = vec![0usize; dim];
        let mut edge = 0.0;
        let mut total = 0.0;
        for (flat, z) in self.data.iter().enumerate() {
            self.grid.decode(flat, &mut idx);
            let m = z.norm_sqr();
            total += m;
            if idx.iter().any(|&i| i < band || i >= n - band) {
                edge += m;
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Real scalar field over a [`SpaceGrid`].
#[derive(Debug, Clone)]
pub struct RealField {
    pub grid: SpaceGrid,
    pub data: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: SpaceGrid) -> Self {
        Self {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: SpaceGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut data = vec![0.0; grid.len()];
        let mut pos = vec![0.0; grid.dim()];
        for (flat, slot) in data.iter_mut().enumerate() {
            grid.position(flat, &mut pos);
            *slot = f(&pos);
        }
        Self { grid, data }
    }

    /// Riemann sum times cell volume.
    pub fn quadrature(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Scalar field over phase space `(x, p)`; row-major with all `n` position
/// axes outermost, then the `n` momentum axes.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub xgrid: SpaceGrid,
    pub plat: PhaseLattice,
    pub tag: FieldTag,
    pub data: Vec<f64>,
}

impl PhaseField {
    pub fn zeros(xgrid: SpaceGrid, plat: PhaseLattice, tag: FieldTag) -> Self {
        let len = xgrid.len() * plat.points.pow(xgrid.dim() as u32);
        Self {
            xgrid,
            plat,
            tag,
            data: vec![0.0; len],
        }
    }

    pub fn dim(&self) -> usize {
        self.xgrid.dim()
    }

    /// Phase-space cell volume `dx^n dp^n`.
    pub fn cell_volume(&self) -> f64 {
        self.xgrid.cell_volume() * self.plat.spacing.powi(self.dim() as i32)
    }

    pub fn quadrature(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn same_lattice(&self, other: &PhaseField) -> bool {
        self.xgrid == other.xgrid && self.plat == other.plat
    }

    /// Evaluate `f(x, p)` on every site (n=1 fast path included).
    pub fn from_fn(
        xgrid: SpaceGrid,
        plat: PhaseLattice,
        tag: FieldTag,
        mut f: impl FnMut(&[f64], &[f64]) -> f64,
    ) -> Self {
        let n = xgrid.dim();
        let np = plat.points.pow(n as u32);
        let mut out = Self::zeros(xgrid, plat, tag);
        let mut xpos = vec![0.0; n];
        let mut ppos = vec![0.0; n];
        for xi in 0..xgrid.len() {
            xgrid.position(xi, &mut xpos);
            for pj in 0..np {
                let mut rest = pj;
                for a in (0..n).rev() {
                    ppos[a] = plat.coord(rest % plat.points);
                    rest /= plat.points;
                }
                out.data[xi * np + pj] = f(&xpos, &ppos);
            }
        }
        out
    }

    /// Sum the field against `f(x, p)` times the cell volume.
    pub fn pair_with(&self, mut f: impl FnMut(&[f64], &[f64]) -> f64) -> f64 {
        let n = self.dim();
        let np = self.plat.points.pow(n as u32);
        let mut xpos = vec![0.0; n];
        let mut ppos = vec![0.0; n];
        let mut acc = 0.0;
        for xi in 0..self.xgrid.len() {
            self.xgrid.position(xi, &mut xpos);
            for pj in 0..np {
                let mut rest = pj;
                for a in (0..n).rev() {
                    ppos[a] = self.plat.coord(rest % self.plat.points);
                    rest /= self.plat.points;
                }
                acc += self.data[xi * np + pj] * f(&xpos, &ppos);
            }
        }
        acc * self.cell_volume()
    }

    /// Convolve with the Gaussian kernel `G_eps^(2n)` by spectral
    /// multiplication (periodic on the box; callers keep mass off the edges).
    pub fn convolve_gaussian(&self, eps: f64) -> Result<PhaseField> {
        if !(eps > 0.0) {
            return Err(LabError::Parameter("convolution variance must be > 0".into()));
        }
        let n = self.dim();
        let nx = self.xgrid.points();
        let np = self.plat.points;
        let shape: Vec<usize> = (0..2 * n)
            .map(|a| if a < n { nx } else { np })
            .collect();
        let mut buf: Vec<C64> = self.data.iter().map(|&v| C64::new(v, 0.0)).collect();
        for (axis, &len) in shape.iter().enumerate() {
            let dxa = if axis < n {
                self.xgrid.dx()
            } else {
                self.plat.spacing
            };
            let off = if axis < n { self.xgrid.offset() } else { 0.0 };
            fourier::transform_axis(&mut buf, &shape, axis, dxa, off, Direction::Forward);
            // multiply by exp(-eps k^2/4) along this axis
            let stride: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            for o in 0..outer {
                for j in 0..len {
                    let k = fourier::wavenumber(j, len, dxa);
                    let damp = (-eps * k * k / 4.0).exp();
                    let base = o * len * stride + j * stride;
                    for s in 0..stride {
                        buf[base + s] *= damp;
                    }
                }
            }
            fourier::transform_axis(&mut buf, &shape, axis, dxa, off, Direction::Inverse);
        }
        let mut out = self.clone();
        for (slot, z) in out.data.iter_mut().zip(&buf) {
            *slot = z.re;
        }
        Ok(out)
    }

    /// Mass fraction within `band` cells of any lattice edge (x or p).
    pub fn boundary_mass_fraction(&self, band: usize) -> f64 {
        let n = self.dim();
        let nx = self.xgrid.points();
        let np = self.plat.points;
        let npn = np.pow(n as u32);
        let mut xidx = vec![0usize; n];
        let mut edge = 0.0;
        let mut total = 0.0;
        for xi in 0..self.xgrid.len() {
            self.xgrid.decode(xi, &mut xidx);
            let x_edge = xidx.iter().any(|&i| i < band || i >= nx - band);
            for pj in 0..npn {
                let mut rest = pj;
                let mut p_edge = false;
                for _ in 0..n {
                    let j = rest % np;
                    rest /= np;
                    if j < band || j >= np - band {
                        p_edge = true;
                    }
                }
                let v = self.data[xi * npn + pj].abs();
                total += v;
                if x_edge || p_edge {
                    edge += v;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Isotropic Gaussian `G_eps^(m)(z) = exp(-|z|^2/eps) / (pi eps)^(m/2)`
/// (variance `eps/2` per axis, unit total integral).
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    pub eps: f64,
    pub dim: usize,
}

impl GaussianKernel {
    pub fn new(eps: f64, dim: usize) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(LabError::Parameter(format!(
                "Gaussian kernel needs eps > 0, got {eps}"
            )));
        }
        Ok(Self { eps, dim })
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        let r2: f64 = z.iter().map(|v| v * v).sum();
        (-r2 / self.eps).exp() / (PI * self.eps).powf(self.dim as f64 / 2.0)
    }

    /// Rasterize on a grid (dimensions must agree).
    pub fn rasterize(&self, grid: SpaceGrid) -> Result<RealField> {
        if grid.dim() != self.dim {
            return Err(LabError::GridMismatch(format!(
                "kernel dim {} vs grid dim {}",
                self.dim,
                grid.dim()
            )));
        }
        Ok(RealField::from_fn(grid, |x| self.eval(x)))
    }

    /// Whether `grid` resolves the kernel: `dx <= sqrt(eps)/4` and
    /// `L >= 6 sqrt(eps)`.
    pub fn resolved_by(&self, grid: &SpaceGrid) -> bool {
        let s = self.eps.sqrt();
        grid.dx() <= s / 4.0 && grid.halfwidth() >= 6.0 * s
    }
}

/// Convenience: the Wigner momentum lattice attached to `grid` at parameter
/// `eps`: spacing `dp = pi*eps/(2L)`, `N` points.
pub fn wigner_lattice(grid: &SpaceGrid, eps: f64) -> PhaseLattice {
    PhaseLattice {
        points: grid.points(),
        spacing: PI * eps / (2.0 * grid.halfwidth()),
    }
}
