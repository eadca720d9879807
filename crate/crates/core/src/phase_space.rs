//! Wigner and Husimi transforms, marginals, Weyl symbols, Moyal products and
//! the trace pairing.
//!
//! The Wigner transform is evaluated on the momentum lattice dual to the
//! half-offset sampling, `p_l = (l - N/2) * pi*eps/(2L)`, so a state whose
//! spectral content stays below half the grid Nyquist is represented without
//! aliasing. Full phase-space fields are materialized for `n = 1`; higher
//! dimensions go through marginal and moment routes.

use crate::error::{LabError, Result};
use crate::fourier::{self, Direction};
use crate::gridcore::{
    wigner_lattice, ComplexField, FieldTag, PhaseField, PhaseLattice, RealField, SpaceGrid,
};
use crate::potentials::PotentialSpec;
use crate::states::{CoherentState, MixedState};
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Resolution guard for phase-space transforms: `dx <= sqrt(eps)/4`.
fn check_resolution(grid: &SpaceGrid, eps: f64) -> Result<()> {
    if grid.dx() > eps.sqrt() / 4.0 {
        return Err(LabError::Resolution(format!(
            "dx = {:.4e} exceeds sqrt(eps)/4 = {:.4e}; refine the grid or raise eps",
            grid.dx(),
            eps.sqrt() / 4.0
        )));
    }
    Ok(())
}

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Wigner transform of a mixed state as a full phase-space field (n = 1).
///
/// Real within roundoff by Hermitian symmetry of the off-diagonal kernel;
/// the imaginary remainder is measured and discarded.
pub fn wigner(state: &MixedState) -> Result<PhaseField> {
    let (field, _) = wigner_with_realness(state)?;
    Ok(field)
}

/// Wigner field plus the largest discarded imaginary part.
pub fn wigner_with_realness(state: &MixedState) -> Result<(PhaseField, f64)> {
    let grid = state.grid;
    if grid.dim() != 1 {
        return Err(LabError::Unsupported(
            "full Wigner fields are materialized for n = 1 only; use the marginal/moment routes"
                .into(),
        ));
    }
    check_resolution(&grid, state.eps)?;
    let n = grid.points();
    let plat = wigner_lattice(&grid, state.eps);
    let mut field = PhaseField::zeros(grid, plat, FieldTag::Wigner);
    let scale = grid.dx() / (PI * state.eps);
    // The off-diagonal product is windowed to |u| <= L/2: periodization of
    // the half-shift sampling would otherwise plant an image of the state at
    // x0 -+ L. States must keep their spread below L/2 (the boundary monitor
    // enforces far less).
    let umax = (n / 4) as isize;
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let mut imag: f64 = 0.0;
            let mut prod = vec![C64::new(0.0, 0.0); n];
            for (mu, f) in state.weights.iter().zip(&state.eigenfunctions) {
                // prod[m mod N] = phi(x_i + m dx) conj(phi(x_i - m dx))
                for m in 0..n {
                    let ms = m as isize - (n / 2) as isize;
                    let slot = ms.rem_euclid(n as isize) as usize;
                    if ms.abs() > umax {
                        prod[slot] = C64::new(0.0, 0.0);
                        continue;
                    }
                    let ip = wrap(i as isize + ms, n);
                    let im = wrap(i as isize - ms, n);
                    prod[slot] = f.data[ip] * f.data[im].conj();
                }
                fourier::fft_inplace(&mut prod, false);
                for l in 0..n {
                    let src = (l + n / 2) % n;
                    row[l] += mu * scale * prod[src].re;
                    imag = imag.max((mu * scale * prod[src].im).abs());
                }
            }
            (row, imag)
        })
        .collect();
    let mut worst_imag: f64 = 0.0;
    for (i, (row, imag)) in rows.into_iter().enumerate() {
        field.data[i * n..(i + 1) * n].copy_from_slice(&row);
        worst_imag = worst_imag.max(imag);
    }
    Ok((field, worst_imag))
}

/// Husimi via Gaussian convolution of a Wigner field.
pub fn husimi_via_convolution(wigner_field: &PhaseField, eps: f64) -> Result<PhaseField> {
    let mut out = wigner_field.convolve_gaussian(eps)?;
    out.tag = FieldTag::Husimi;
    Ok(out)
}

/// Husimi via coherent-state overlaps on the full phase lattice (n = 1).
///
/// The positivity-exact route: values are `>= -1e-12` by construction.
pub fn husimi_via_overlap(state: &MixedState) -> Result<PhaseField> {
    let grid = state.grid;
    if grid.dim() != 1 {
        return Err(LabError::Unsupported(
            "full-lattice overlap route is n = 1 only; use sampled probes".into(),
        ));
    }
    check_resolution(&grid, state.eps)?;
    let n = grid.points();
    let eps = state.eps;
    let plat = wigner_lattice(&grid, eps);
    let env_norm = (PI * eps).powf(-0.25);
    let mut field = PhaseField::zeros(grid, plat, FieldTag::Husimi);
    let scale = 1.0 / (2.0 * PI * eps);
    // overlap(x_i, p_l) = int (pi eps)^{-1/4} e^{-(x_i-y)^2/(2 eps)} e^{-i p y/eps} phi(y) dy,
    // read off half-dual momenta from a zero-padded doubled transform.
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = grid.coord(i);
            let mut row = vec![0.0; n];
            let mut padded = vec![C64::new(0.0, 0.0); 2 * n];
            for (mu, f) in state.weights.iter().zip(&state.eigenfunctions) {
                padded.fill(C64::new(0.0, 0.0));
                for m in 0..n {
                    let y = grid.coord(m);
                    let env = env_norm * (-(xi - y) * (xi - y) / (2.0 * eps)).exp();
                    padded[m + n / 2] = f.data[m] * env;
                }
                fourier::centered_transform(&mut padded, grid.dx(), grid.offset(), Direction::Forward);
                for l in 0..n {
                    // p_l/eps = (l - N/2) * pi/(2L): doubled-grid index l + N/2
                    let q = padded[l + n / 2] * (2.0 * PI).sqrt();
                    row[l] += mu * scale * q.norm_sqr();
                }
            }
            row
        })
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        field.data[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    Ok(field)
}

/// Both Husimi routes; returns the overlap-route field and the sup-norm gap.
/// Errors when the routes disagree beyond `tol`.
pub fn husimi_dual_route(state: &MixedState, tol: f64) -> Result<(PhaseField, f64)> {
    let w = wigner(state)?;
    let conv = husimi_via_convolution(&w, state.eps)?;
    let ovl = husimi_via_overlap(state)?;
    let mut worst = 0.0f64;
    for (a, b) in conv.data.iter().zip(&ovl.data) {
        worst = worst.max((a - b).abs());
    }
    if worst > tol {
        return Err(LabError::TransformConsistency(format!(
            "Husimi routes disagree by {worst:.3e} (tol {tol:.0e})"
        )));
    }
    Ok((ovl, worst))
}

/// Integrate a phase field over momentum: a real field over x.
pub fn marginal_x(field: &PhaseField) -> RealField {
    let n = field.dim();
    let npn = field.plat.points.pow(n as u32);
    let dp = field.plat.spacing.powi(n as i32);
    let mut out = RealField::zeros(field.xgrid);
    for xi in 0..field.xgrid.len() {
        out.data[xi] = field.data[xi * npn..(xi + 1) * npn].iter().sum::<f64>() * dp;
    }
    out
}

/// Integrate a phase field over position: values on the momentum lattice.
pub fn marginal_p(field: &PhaseField) -> Vec<f64> {
    let n = field.dim();
    let npn = field.plat.points.pow(n as u32);
    let dx = field.xgrid.cell_volume();
    let mut out = vec![0.0; npn];
    for xi in 0..field.xgrid.len() {
        for (slot, v) in out.iter_mut().zip(&field.data[xi * npn..(xi + 1) * npn]) {
            *slot += v * dx;
        }
    }
    out
}

/// Unitary spectrum of `phi` zero-padded to the doubled box, giving access to
/// the half-lattice momenta `k = (j - N) * pi/(2L)`.
pub fn half_lattice_spectrum(phi: &ComplexField) -> Result<ComplexField> {
    let grid = phi.grid;
    let n = grid.points();
    let half = n / 2;
    let grid2 = if grid.is_staggered() {
        SpaceGrid::staggered(grid.dim(), 2 * n, 2.0 * grid.halfwidth())?
    } else {
        SpaceGrid::new(grid.dim(), 2 * n, 2.0 * grid.halfwidth())?
    };
    let mut big = ComplexField::zeros(grid2);
    let dim = grid.dim();
    let mut idx = vec![0usize; dim];
    for (flat, &z) in phi.data.iter().enumerate() {
        grid.decode(flat, &mut idx);
        let mut flat2 = 0usize;
        for &i in idx.iter() {
            flat2 = flat2 * 2 * n + (i + half);
        }
        big.data[flat2] = z;
    }
    Ok(big.forward_transform())
}

/// p-marginal of the Wigner transform from the spectral side:
/// `sum_j mu_j |phihat_j(p/eps)|^2 / eps^n` on the Wigner momentum lattice.
pub fn wigner_p_marginal_spectral(state: &MixedState) -> Result<Vec<f64>> {
    let grid = state.grid;
    let dim = grid.dim();
    let n = grid.points();
    let epsn = state.eps.powi(dim as i32);
    let npn = n.pow(dim as u32);
    let mut out = vec![0.0; npn];
    for (mu, f) in state.weights.iter().zip(&state.eigenfunctions) {
        let spec = half_lattice_spectrum(f)?;
        let mut pidx = vec![0usize; dim];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut rest = flat;
            for a in (0..dim).rev() {
                pidx[a] = rest % n;
                rest /= n;
            }
            let mut flat2 = 0usize;
            for &l in pidx.iter() {
                flat2 = flat2 * 2 * n + (l + n / 2);
            }
            *slot += mu * spec.data[flat2].norm_sqr() / epsn;
        }
    }
    Ok(out)
}

/// `int |p|^2 W` and `int |p|^4 W` from the spectral side (exact identities,
/// no phase-space field needed; valid in any dimension).
pub fn wigner_p_moments(state: &MixedState) -> (f64, f64) {
    let grid = state.grid;
    let dim = grid.dim();
    let npts = grid.points();
    let dk = 2.0 * PI / (npts as f64 * grid.dx());
    let cell_k = dk.powi(dim as i32);
    let eps = state.eps;
    let moments: Vec<(f64, f64)> = state
        .weights
        .par_iter()
        .zip(&state.eigenfunctions)
        .map(|(mu, f)| {
            let hat = f.forward_transform();
            let mut idx = vec![0usize; dim];
            let (mut m2, mut m4) = (0.0, 0.0);
            for (flat, z) in hat.data.iter().enumerate() {
                grid.decode(flat, &mut idx);
                let k2: f64 = idx
                    .iter()
                    .map(|&j| {
                        let k = fourier::wavenumber(j, npts, grid.dx());
                        k * k
                    })
                    .sum();
                let p2 = eps * eps * k2;
                let w = z.norm_sqr() * cell_k;
                m2 += mu * p2 * w;
                m4 += mu * p2 * p2 * w;
            }
            (m2, m4)
        })
        .collect();
    moments
        .into_iter()
        .fold((0.0, 0.0), |(a2, a4), (b2, b4)| (a2 + b2, a4 + b4))
}

/// Husimi `|p|^2` and `|p|^4` integrals from the Wigner moments by Gaussian
/// moment expansion (per-axis smoothing variance `eps/2`).
pub fn husimi_p_moments(state: &MixedState) -> (f64, f64) {
    let n = state.dim() as f64;
    let eps = state.eps;
    let (w2, w4) = wigner_p_moments(state);
    let h2 = w2 + n * eps / 2.0;
    let h4 = w4 + (n + 2.0) * eps * w2 + n * (n + 2.0) * eps * eps / 4.0;
    (h2, h4)
}

/// Husimi x-marginal reference: kernel diagonal smoothed by `G^(n)_eps`.
pub fn husimi_x_marginal_reference(state: &MixedState) -> Result<RealField> {
    gaussian_smooth_real(&state.kernel_diagonal(), state.eps)
}

/// Smooth a real field on its grid by `G^(n)_eps` (spectral, periodic box).
pub fn gaussian_smooth_real(f: &RealField, eps: f64) -> Result<RealField> {
    let grid = f.grid;
    let mut buf: Vec<C64> = f.data.iter().map(|&v| C64::new(v, 0.0)).collect();
    let shape = vec![grid.points(); grid.dim()];
    for axis in 0..grid.dim() {
        fourier::transform_axis(
            &mut buf,
            &shape,
            axis,
            grid.dx(),
            grid.offset(),
            Direction::Forward,
        );
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        for o in 0..outer {
            for j in 0..grid.points() {
                let k = fourier::wavenumber(j, grid.points(), grid.dx());
                let damp = (-eps * k * k / 4.0).exp();
                let base = o * grid.points() * stride + j * stride;
                for s in 0..stride {
                    buf[base + s] *= damp;
                }
            }
        }
        fourier::transform_axis(
            &mut buf,
            &shape,
            axis,
            grid.dx(),
            grid.offset(),
            Direction::Inverse,
        );
    }
    let mut out = RealField::zeros(grid);
    for (slot, z) in out.data.iter_mut().zip(&buf) {
        *slot = z.re;
    }
    Ok(out)
}

/// Smooth values on a momentum lattice by `G^(1)_eps` (n = 1).
pub fn gaussian_smooth_plattice(vals: &[f64], plat: &PhaseLattice, eps: f64) -> Vec<f64> {
    let n = plat.points;
    let mut buf: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
    fourier::centered_transform(&mut buf, plat.spacing, 0.0, Direction::Forward);
    for (j, z) in buf.iter_mut().enumerate() {
        let k = fourier::wavenumber(j, n, plat.spacing);
        *z *= (-eps * k * k / 4.0).exp();
    }
    fourier::centered_transform(&mut buf, plat.spacing, 0.0, Direction::Inverse);
    buf.iter().map(|z| z.re).collect()
}

/// Weyl symbols as (possibly complex) lattice functions over phase space
/// (n = 1 lattices).
#[derive(Debug, Clone)]
pub struct WeylSymbol {
    pub xgrid: SpaceGrid,
    pub plat: PhaseLattice,
    pub eps: f64,
    pub data: Vec<C64>,
    pub tag: String,
    /// Set when a truncated Moyal product could not be exact.
    pub truncation_warning: bool,
}

impl WeylSymbol {
    pub fn from_fn(
        xgrid: SpaceGrid,
        plat: PhaseLattice,
        eps: f64,
        tag: &str,
        mut f: impl FnMut(f64, f64) -> C64,
    ) -> Self {
        let n = xgrid.points();
        let np = plat.points;
        let mut data = vec![C64::new(0.0, 0.0); n * np];
        for i in 0..n {
            let x = xgrid.coord(i);
            for l in 0..np {
                data[i * np + l] = f(x, plat.coord(l));
            }
        }
        Self {
            xgrid,
            plat,
            eps,
            data,
            tag: tag.into(),
            truncation_warning: false,
        }
    }

    /// Largest imaginary part (a self-adjoint operator's symbol is real).
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Operators with known Weyl symbols.
pub enum WeylOperator<'a> {
    /// Multiplication by `U`: symbol `U(x)`.
    Multiplication(&'a PotentialSpec),
    /// `-eps^2 Lap`: symbol `|p|^2`.
    KineticEps2,
    /// `H_eps = -(eps^2/2) Lap + U`: symbol `|p|^2/2 + U(x)`.
    Hamiltonian(&'a PotentialSpec),
    /// Finite-rank density operator: symbol `(2 pi eps)^n W_eps rho`.
    FiniteRank(&'a MixedState),
}

/// Weyl symbol of a supported operator on the given lattices.
pub fn weyl_symbol(
    op: WeylOperator<'_>,
    xgrid: SpaceGrid,
    plat: PhaseLattice,
    eps: f64,
) -> Result<WeylSymbol> {
    match op {
        WeylOperator::Multiplication(pot) => Ok(WeylSymbol::from_fn(
            xgrid,
            plat,
            eps,
            "multiplication",
            |x, _| C64::new(pot.eval_rough(&[x]) + pot.eval_singular(&[x]), 0.0),
        )),
        WeylOperator::KineticEps2 => Ok(WeylSymbol::from_fn(xgrid, plat, eps, "kinetic", |_, p| {
            C64::new(p * p, 0.0)
        })),
        WeylOperator::Hamiltonian(pot) => Ok(WeylSymbol::from_fn(
            xgrid,
            plat,
            eps,
            "hamiltonian",
            |x, p| {
                C64::new(
                    p * p / 2.0 + pot.eval_rough(&[x]) + pot.eval_singular(&[x]),
                    0.0,
                )
            },
        )),
        WeylOperator::FiniteRank(state) => {
            let w = wigner(state)?;
            if w.xgrid != xgrid || w.plat != plat {
                return Err(LabError::GridMismatch("finite-rank symbol lattice".into()));
            }
            let scale = (2.0 * PI * eps).powi(state.dim() as i32);
            Ok(WeylSymbol {
                xgrid,
                plat,
                eps,
                data: w.data.iter().map(|&v| C64::new(scale * v, 0.0)).collect(),
                tag: "finite-rank".into(),
                truncation_warning: false,
            })
        }
    }
}

/// x-derivative of a symbol (spectral along the position axis).
fn symbol_dx(s: &WeylSymbol) -> WeylSymbol {
    let n = s.xgrid.points();
    let np = s.plat.points;
    let mut data = s.data.clone();
    let shape = [n, np];
    fourier::transform_axis(
        &mut data,
        &shape,
        0,
        s.xgrid.dx(),
        s.xgrid.offset(),
        Direction::Forward,
    );
    for j in 0..n {
        let k = fourier::wavenumber(j, n, s.xgrid.dx());
        for l in 0..np {
            data[j * np + l] *= C64::new(0.0, k);
        }
    }
    fourier::transform_axis(
        &mut data,
        &shape,
        0,
        s.xgrid.dx(),
        s.xgrid.offset(),
        Direction::Inverse,
    );
    WeylSymbol {
        data,
        tag: format!("dx({})", s.tag),
        ..s.clone()
    }
}

/// p-derivative of a symbol: fourth-order central differences (exact for
/// p-polynomials of degree <= 4; second-order one-sided at the lattice edge).
fn symbol_dp(s: &WeylSymbol) -> WeylSymbol {
    let n = s.xgrid.points();
    let np = s.plat.points;
    let h = s.plat.spacing;
    let mut data = vec![C64::new(0.0, 0.0); n * np];
    for i in 0..n {
        let row = &s.data[i * np..(i + 1) * np];
        for l in 0..np {
            data[i * np + l] = if l >= 2 && l + 2 < np {
                (row[l - 2] - row[l + 2] + (row[l + 1] - row[l - 1]) * 8.0) / (12.0 * h)
            } else if l == 0 {
                (row[2] * -1.0 + row[1] * 4.0 - row[0] * 3.0) / (2.0 * h)
            } else if l == np - 1 {
                (row[np - 3] - row[np - 2] * 4.0 + row[np - 1] * 3.0) / (2.0 * h)
            } else if l == 1 {
                (row[2] - row[0]) / (2.0 * h)
            } else {
                (row[np - 1] - row[np - 3]) / (2.0 * h)
            };
        }
    }
    WeylSymbol {
        data,
        tag: format!("dp({})", s.tag),
        ..s.clone()
    }
}

/// True when third p-differences vanish (p-polynomial of degree <= 2).
fn p_degree_at_most_two(s: &WeylSymbol) -> bool {
    let np = s.plat.points;
    let scale = s
        .data
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    for i in 0..s.xgrid.points() {
        let row = &s.data[i * np..(i + 1) * np];
        for l in 0..np.saturating_sub(3) {
            let d3 = row[l + 3] - row[l + 2] * 3.0 + row[l + 1] * 3.0 - row[l];
            if d3.norm() > 1e-8 * scale {
                return false;
            }
        }
    }
    true
}

/// Truncated Moyal product `f # g` up to second order:
/// `fg + (i eps/2)(f_x g_p - f_p g_x)
///     + (1/2)(i eps/2)^2 (f_xx g_pp - 2 f_xp g_xp + f_pp g_xx)`.
///
/// Exact when `f` is a p-polynomial of degree <= 2; otherwise the result
/// carries a truncation warning.
pub fn moyal_sharp(f: &WeylSymbol, g: &WeylSymbol, order: usize) -> Result<WeylSymbol> {
    if f.xgrid != g.xgrid || f.plat != g.plat {
        return Err(LabError::GridMismatch("moyal operands".into()));
    }
    if order > 2 {
        return Err(LabError::Unsupported("moyal order > 2".into()));
    }
    let warn = !p_degree_at_most_two(f);
    let mut out = WeylSymbol {
        data: f.data.iter().zip(&g.data).map(|(a, b)| a * b).collect(),
        tag: format!("{}#{}", f.tag, g.tag),
        truncation_warning: warn,
        ..f.clone()
    };
    if order >= 1 {
        let fx = symbol_dx(f);
        let fp = symbol_dp(f);
        let gx = symbol_dx(g);
        let gp = symbol_dp(g);
        let c1 = C64::new(0.0, f.eps / 2.0);
        for (i, slot) in out.data.iter_mut().enumerate() {
            *slot += c1 * (fx.data[i] * gp.data[i] - fp.data[i] * gx.data[i]);
        }
        if order >= 2 {
            let fxx = symbol_dx(&fx);
            let fxp = symbol_dp(&fx);
            let fpp = symbol_dp(&fp);
            let gxx = symbol_dx(&gx);
            let gxp = symbol_dp(&gx);
            let gpp = symbol_dp(&gp);
            let c2 = c1 * c1 * 0.5;
            for (i, slot) in out.data.iter_mut().enumerate() {
                *slot += c2
                    * (fxx.data[i] * gpp.data[i] - fxp.data[i] * gxp.data[i] * 2.0
                        + fpp.data[i] * gxx.data[i]);
            }
        }
    }
    Ok(out)
}

/// `tr(A rho) = int sigma_eps(A) W_eps rho dx dp` (complex quadrature).
pub fn trace_pairing_complex(symbol: &WeylSymbol, state: &MixedState) -> Result<C64> {
    let w = wigner(state)?;
    if w.xgrid != symbol.xgrid || w.plat != symbol.plat {
        return Err(LabError::GridMismatch("trace pairing lattice".into()));
    }
    let cell = w.cell_volume();
    let acc: C64 = symbol
        .data
        .iter()
        .zip(&w.data)
        .map(|(s, &wv)| s * wv)
        .sum();
    Ok(acc * cell)
}

pub fn trace_pairing(symbol: &WeylSymbol, state: &MixedState) -> Result<f64> {
    Ok(trace_pairing_complex(symbol, state)?.re)
}

/// Independent composition oracle for the Moyal second-order coefficient.
///
/// Builds the dense matrix of `-eps^2 Lap` on a small periodic grid,
/// composes it symmetrically with multiplication by `U = cos(x)`, pairs the
/// composed operator against coherent states, and solves
/// `tr(A rho) = int (|p|^2 U + c eps^2 Lap U) W rho` for `c` using analytic
/// Gaussian Wigner moments.
pub fn measure_moyal_coefficient(eps: f64) -> Result<f64> {
    let n = 64usize;
    let l = 2.0 * PI; // box [-2pi, 2pi): cos(x) periodic on it
    let grid = SpaceGrid::new(1, n, l)?;
    let k0 = 1.0;
    let mut kin = vec![C64::new(0.0, 0.0); n * n];
    for col in 0..n {
        let mut e = ComplexField::zeros(grid);
        e.data[col] = C64::new(1.0, 0.0);
        let mut hat = e.forward_transform();
        for (j, z) in hat.data.iter_mut().enumerate() {
            let k = fourier::wavenumber(j, n, grid.dx());
            *z *= eps * eps * k * k;
        }
        let back = hat.inverse_transform();
        for row in 0..n {
            kin[row * n + col] = back.data[row];
        }
    }
    let u: Vec<f64> = (0..n).map(|i| (k0 * grid.coord(i)).cos()).collect();
    // A = (T U + U T)/2, dense
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] = kin[r * n + c] * (0.5 * (u[c] + u[r]));
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &x0 in &[0.0f64, 0.4, 1.1, 2.0] {
        let phi = CoherentState::new(vec![x0], vec![0.0], eps).field(grid);
        let mut lhs = C64::new(0.0, 0.0);
        for r in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..n {
                acc += a[r * n + c] * phi.data[c];
            }
            lhs += phi.data[r].conj() * acc;
        }
        let lhs = lhs.re * grid.cell_volume();
        // analytic Gaussian Wigner moments for U = cos(k0 x):
        //   int |p|^2 U W = (eps/2) cos(k0 x0) e^{-eps k0^2/4}
        //   int (Lap U) W = -k0^2 cos(k0 x0) e^{-eps k0^2/4}
        let damp = (-eps * k0 * k0 / 4.0).exp();
        let p2u = (eps / 2.0) * (k0 * x0).cos() * damp;
        let lapu = -k0 * k0 * (k0 * x0).cos() * damp;
        // lhs = p2u + c eps^2 lapu
        num += (lhs - p2u) * (eps * eps * lapu);
        den += (eps * eps * lapu) * (eps * eps * lapu);
    }
    Ok(num / den)
}

/// Derivative sup norms of a Wigner field plus the `H^2`-symbol integral.
#[derive(Debug, Clone)]
pub struct CvReport {
    /// `sup |d_x^a d_p^b W|` for `a, b <= floor(n/2)+1`, indexed `[a][b]`.
    pub derivative_sups: Vec<Vec<f64>>,
    /// `int (|p|^4/4 + U^2 + |p|^2 U + c eps^2 Lap U) W` when `U` is smooth.
    pub second_bullet: Option<f64>,
    /// Second-order Moyal coefficient `c` used in the integral.
    pub moyal_coefficient: f64,
}

/// Sup norms of mixed spectral derivatives up to order `floor(n/2)+1` per
/// variable, plus the quartic-moment integral when the potential is smooth.
///
/// `moyal_coefficient` is the measured second-order coefficient (see
/// [`measure_moyal_coefficient`]; the lattice and composition routes both
/// give values near `-1/4`).
pub fn cv_regularity_check(
    field: &PhaseField,
    eps: f64,
    potential: Option<&PotentialSpec>,
    moyal_coefficient: f64,
) -> Result<CvReport> {
    let n = field.dim();
    if n != 1 {
        return Err(LabError::Unsupported("cv check is n = 1 only".into()));
    }
    let kmax = n / 2 + 1;
    let npts = field.xgrid.points();
    let np = field.plat.points;
    let base = WeylSymbol {
        xgrid: field.xgrid,
        plat: field.plat,
        eps,
        data: field.data.iter().map(|&v| C64::new(v, 0.0)).collect(),
        tag: "wigner".into(),
        truncation_warning: false,
    };
    let mut sups = vec![vec![0.0; kmax + 1]; kmax + 1];
    let mut dx_pows = vec![base];
    for _ in 0..kmax {
        let prev = dx_pows.last().unwrap();
        dx_pows.push(symbol_dx(prev));
    }
    for (a, da) in dx_pows.iter().enumerate() {
        let mut cur = da.clone();
        for b in 0..=kmax {
            sups[a][b] = cur.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if b < kmax {
                cur = symbol_dp(&cur);
            }
        }
    }
    let second_bullet = potential.and_then(|pot| {
        let mut acc = 0.0;
        for i in 0..npts {
            let x = field.xgrid.coord(i);
            let u = pot.eval_rough(&[x]);
            let lap = pot.rough.laplacian(&[x])?;
            for l in 0..np {
                let p = field.plat.coord(l);
                let integrand =
                    p.powi(4) / 4.0 + u * u + p * p * u + moyal_coefficient * eps * eps * lap;
                acc += integrand * field.data[i * np + l];
            }
        }
        Some(acc * field.cell_volume())
    });
    Ok(CvReport {
        derivative_sups: sups,
        second_bullet,
        moyal_coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::RoughPotential;

    fn grid1() -> SpaceGrid {
        SpaceGrid::new(1, 512, 8.0).unwrap()
    }

    fn coherent_pure(x0: f64, p0: f64, eps: f64) -> MixedState {
        let f = CoherentState::new(vec![x0], vec![p0], eps).field(grid1());
        MixedState::pure(eps, f).unwrap()
    }

    #[test]
    fn wigner_of_coherent_state_is_gaussian() {
        let eps = 0.25;
        let (x0, p0) = (0.8, 0.6);
        let s = coherent_pure(x0, p0, eps);
        let (w, imag) = wigner_with_realness(&s).unwrap();
        assert!(imag < 1e-10);
        let n = 512;
        let mut worst = 0.0f64;
        for (i, &x) in w.xgrid.axis_coords().iter().enumerate() {
            for (l, &p) in w.plat.axis_coords().iter().enumerate() {
                let expect = (-((x - x0).powi(2) + (p - p0).powi(2)) / eps).exp() / (PI * eps);
                worst = worst.max((w.data[i * n + l] - expect).abs());
            }
        }
        assert!(worst < 1e-6, "pointwise error {worst}");
        assert!((w.quadrature() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn wigner_direct_quadrature_oracle_at_points() {
        // direct quadrature of the defining y-integral at 3 sample points
        let eps = 0.25;
        let (x0, p0) = (0.3, -0.5);
        let s = coherent_pure(x0, p0, eps);
        let w = wigner(&s).unwrap();
        let g = grid1();
        let n = 512;
        let ev = |yy: f64| {
            let norm = (PI * eps).powf(-0.25);
            C64::from_polar(
                norm * (-(x0 - yy) * (x0 - yy) / (2.0 * eps)).exp(),
                p0 * yy / eps,
            )
        };
        for &(i, l) in &[(256usize, 256usize), (280, 240), (230, 270)] {
            let x = g.coord(i);
            let p = w.plat.coord(l);
            let mut acc = C64::new(0.0, 0.0);
            let ny = 8001;
            let ymax = 60.0;
            let dy = 2.0 * ymax / (ny as f64 - 1.0);
            for m in 0..ny {
                let y = -ymax + m as f64 * dy;
                let v = ev(x + eps * y / 2.0) * ev(x - eps * y / 2.0).conj();
                acc += v * C64::from_polar(1.0, -p * y) * dy;
            }
            let oracle = acc.re / (2.0 * PI);
            assert!(
                (w.data[i * n + l] - oracle).abs() < 1e-6,
                "({i},{l}): {} vs {oracle}",
                w.data[i * n + l]
            );
        }
    }

    #[test]
    fn husimi_routes_agree_and_positive() {
        for eps in [0.5, 0.25, 0.1] {
            let s = coherent_pure(0.5, -0.3, eps);
            let (h, gap) = husimi_dual_route(&s, 1e-6).unwrap();
            assert!(gap < 1e-6, "eps={eps}: {gap}");
            assert!(h.data.iter().all(|&v| v >= -1e-12));
            assert!((h.quadrature() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn wigner_marginals_match_references() {
        let eps = 0.25;
        let s = coherent_pure(-0.4, 0.7, eps);
        let w = wigner(&s).unwrap();
        let mx = marginal_x(&w);
        let kd = s.kernel_diagonal();
        let worst = mx
            .data
            .iter()
            .zip(&kd.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "x-marginal error {worst}");
        let mp = marginal_p(&w);
        let mp_ref = wigner_p_marginal_spectral(&s).unwrap();
        let worst = mp
            .iter()
            .zip(&mp_ref)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "p-marginal error {worst}");
        // plane-wave-modulated state: p-marginal peaks at its momentum
        let peak_idx = mp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((w.plat.coord(peak_idx) - 0.7).abs() <= 2.0 * w.plat.spacing);
    }

    #[test]
    fn husimi_marginals_are_smoothed_ones() {
        let eps = 0.25;
        let s = coherent_pure(0.2, -0.6, eps);
        let w = wigner(&s).unwrap();
        let h = husimi_via_convolution(&w, eps).unwrap();
        let hx = marginal_x(&h);
        let hx_ref = husimi_x_marginal_reference(&s).unwrap();
        let worst = hx
            .data
            .iter()
            .zip(&hx_ref.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "husimi x-marginal {worst}");
        let hp = marginal_p(&h);
        let hp_ref =
            gaussian_smooth_plattice(&wigner_p_marginal_spectral(&s).unwrap(), &h.plat, eps);
        let worst = hp
            .iter()
            .zip(&hp_ref)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "husimi p-marginal {worst}");
    }

    #[test]
    fn weyl_symbol_basics() {
        let eps = 0.25;
        let g = grid1();
        let plat = wigner_lattice(&g, eps);
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 2.0, center: 0.0 });
        let s = weyl_symbol(WeylOperator::Multiplication(&pot), g, plat, eps).unwrap();
        let i = 300;
        let x = g.coord(i);
        assert!((s.data[i * 512 + 10].re - x * x).abs() < 1e-12);
        let k = weyl_symbol(WeylOperator::KineticEps2, g, plat, eps).unwrap();
        let l = 100;
        let p = plat.coord(l);
        assert!((k.data[5 * 512 + l].re - p * p).abs() < 1e-12);
        assert!(k.max_imag() == 0.0);
        let st = coherent_pure(0.0, 0.0, eps);
        let fr = weyl_symbol(WeylOperator::FiniteRank(&st), g, plat, eps).unwrap();
        let expect = 2.0 * PI * eps / (PI * eps);
        assert!((fr.data[256 * 512 + 256].re - expect).abs() < 1e-4);
        assert!(fr.max_imag() < 1e-10);
    }

    #[test]
    fn moyal_first_order_term() {
        // f = |p|^2, g = U smooth: first-order term is -i eps p grad U
        let eps = 0.25;
        let g = grid1();
        let plat = wigner_lattice(&g, eps);
        let pot = PotentialSpec::rough_only(
            1,
            RoughPotential::SmoothedWell {
                depth: 1.0,
                width: 1.2,
                center: 0.3,
            },
        );
        let f = weyl_symbol(WeylOperator::KineticEps2, g, plat, eps).unwrap();
        let u = weyl_symbol(WeylOperator::Multiplication(&pot), g, plat, eps).unwrap();
        let fg = moyal_sharp(&f, &u, 2).unwrap();
        assert!(!fg.truncation_warning);
        let n = 512;
        let mut worst = 0.0f64;
        for &i in &[200usize, 256, 300] {
            let x = g.coord(i);
            let (grad, _) = pot.rough.gradient(&[x]);
            for &l in &[220usize, 256, 290] {
                let p = plat.coord(l);
                let got = fg.data[i * n + l].im;
                let expect = -eps * p * grad[0];
                worst = worst.max((got - expect).abs());
            }
        }
        assert!(worst < 1e-8, "first-order term error {worst}");
        // f#g + g#f has vanishing odd-eps (imaginary) part
        let gf = moyal_sharp(&u, &f, 2).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in fg.data.iter().zip(&gf.data) {
            worst = worst.max((a + b).im.abs());
        }
        assert!(worst < 1e-8, "symmetrized imaginary part {worst}");
    }

    #[test]
    fn moyal_second_order_coefficient_measured() {
        // the composition oracle resolves the Lap U coefficient to -1/4,
        // independent of dimension
        for eps in [0.25, 0.1] {
            let c = measure_moyal_coefficient(eps).unwrap();
            assert!(
                (c + 0.25).abs() < 1e-6,
                "eps={eps}: measured c = {c}, expected -0.25"
            );
        }
        // the truncated-product machinery reproduces the same coefficient
        let eps = 0.25;
        let g = grid1();
        let plat = wigner_lattice(&g, eps);
        let pot = PotentialSpec::rough_only(
            1,
            RoughPotential::SmoothedWell {
                depth: 1.0,
                width: 1.2,
                center: 0.0,
            },
        );
        let f = weyl_symbol(WeylOperator::KineticEps2, g, plat, eps).unwrap();
        let u = weyl_symbol(WeylOperator::Multiplication(&pot), g, plat, eps).unwrap();
        let fg = moyal_sharp(&f, &u, 2).unwrap();
        let gf = moyal_sharp(&u, &f, 2).unwrap();
        let (i, l) = (256usize, 256usize);
        let x = g.coord(i);
        let p0 = plat.coord(l);
        let sym = (fg.data[i * 512 + l] + gf.data[i * 512 + l]).re / 2.0;
        let u0 = pot.eval_rough(&[x]);
        let lap = pot.rough.laplacian(&[x]).unwrap();
        let c_lattice = (sym - p0 * p0 * u0) / (eps * eps * lap);
        assert!(
            (c_lattice + 0.25).abs() < 1e-6,
            "lattice route c = {c_lattice}"
        );
    }

    #[test]
    fn trace_pairing_identities() {
        let eps = 0.25;
        let g = grid1();
        let plat = wigner_lattice(&g, eps);
        let s = coherent_pure(0.9, 0.0, eps);
        let one = WeylSymbol::from_fn(g, plat, eps, "id", |_, _| C64::new(1.0, 0.0));
        assert!((trace_pairing(&one, &s).unwrap() - 1.0).abs() < 1e-8);
        let kin_sym = WeylSymbol::from_fn(g, plat, eps, "kin/2", |_, p| C64::new(p * p / 2.0, 0.0));
        let pot = PotentialSpec::free(1);
        let kin =
            crate::states::observable_expectation(&s, crate::states::Observable::Kinetic, &pot);
        assert!((trace_pairing(&kin_sym, &s).unwrap() - kin).abs() < 1e-8);
        // x^2 multiplication on a coherent state at x0: x0^2 + eps/2
        let x2 = WeylSymbol::from_fn(g, plat, eps, "x^2", |x, _| C64::new(x * x, 0.0));
        let got = trace_pairing(&x2, &s).unwrap();
        assert!((got - (0.81 + eps / 2.0)).abs() < 1e-6, "{got}");
    }

    #[test]
    fn trace_pairing_hilbert_schmidt_symmetry() {
        let eps = 0.25;
        let s1 = coherent_pure(0.5, 0.4, eps);
        let s2 = coherent_pure(-0.3, 0.9, eps);
        let g = grid1();
        let plat = wigner_lattice(&g, eps);
        let sym2 = weyl_symbol(WeylOperator::FiniteRank(&s2), g, plat, eps).unwrap();
        let sym1 = weyl_symbol(WeylOperator::FiniteRank(&s1), g, plat, eps).unwrap();
        let a = trace_pairing(&sym2, &s1).unwrap();
        let b = trace_pairing(&sym1, &s2).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn cv_check_coherent_derivative_bound() {
        // first derivatives of the Gaussian Wigner bounded by (2/eps) * peak
        let eps = 0.25;
        let s = coherent_pure(0.0, 0.0, eps);
        let w = wigner(&s).unwrap();
        let rep = cv_regularity_check(&w, eps, None, -0.25).unwrap();
        let peak = 1.0 / (PI * eps);
        assert!(rep.derivative_sups[1][0] <= 2.0 / eps * peak);
        assert!(rep.derivative_sups[0][1] <= 2.0 / eps * peak);
        assert!(rep.derivative_sups[0][0] <= peak * (1.0 + 1e-9));
        // oracle: max |d/dz e^{-z^2/eps}| = sqrt(2/eps) e^{-1/2}
        let d_oracle = (2.0f64 / eps).sqrt() * (-0.5f64).exp() * peak;
        assert!((rep.derivative_sups[1][0] - d_oracle).abs() < 2e-2 * d_oracle);
    }

    #[test]
    fn cv_derivative_sups_scale_with_eps() {
        // sup|d_x W| ~ eps^{-n - 1/2}: halving eps multiplies by 2^{3/2}
        let mut sups = vec![];
        for eps in [0.25, 0.125] {
            let s = coherent_pure(0.0, 0.0, eps);
            let w = wigner(&s).unwrap();
            let rep = cv_regularity_check(&w, eps, None, -0.25).unwrap();
            sups.push(rep.derivative_sups[1][0]);
        }
        let ratio = sups[1] / sups[0];
        let expect = 2f64.powf(1.5);
        assert!((ratio / expect - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn cv_second_bullet_free_case_nonnegative() {
        // U = 0: integral reduces to int |p|^4 W / 4 >= 0
        let eps = 0.25;
        let s = coherent_pure(0.0, 0.3, eps);
        let w = wigner(&s).unwrap();
        let pot = PotentialSpec::free(1);
        let rep = cv_regularity_check(&w, eps, Some(&pot), -0.25).unwrap();
        let v = rep.second_bullet.unwrap();
        assert!(v >= 0.0);
        let (_, m4) = wigner_p_moments(&s);
        assert!((v - m4 / 4.0).abs() < 1e-8);
    }

    #[test]
    fn hermite_first_excited_negative_at_origin() {
        // Wigner of psi_1 at the origin: -1/(pi eps) (Laguerre closed form)
        let eps: f64 = 0.25;
        let g = grid1();
        let f = ComplexField::from_fn(g, |y| {
            let z = y[0] / eps.sqrt();
            let h1 = 2f64.sqrt() * z * (-(z * z) / 2.0).exp() / PI.powf(0.25);
            C64::new(h1 * eps.powf(-0.25), 0.0)
        });
        let s = MixedState::pure(eps, f).unwrap();
        let w = wigner(&s).unwrap();
        let v = w.data[256 * 512 + 256];
        let expect = -1.0 / (PI * eps);
        assert!(v < 0.0);
        assert!((v - expect).abs() < 1e-4 * expect.abs(), "{v} vs {expect}");
        // Husimi of the same state stays nonnegative
        let h = husimi_via_overlap(&s).unwrap();
        assert!(h.data.iter().all(|&x| x >= -1e-12));
        assert!((h.quadrature() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn husimi_p_moments_match_field_route() {
        let eps = 0.25;
        let s = coherent_pure(0.4, 0.8, eps);
        let w = wigner(&s).unwrap();
        let h = husimi_via_convolution(&w, eps).unwrap();
        let hp = marginal_p(&h);
        let (m2_id, m4_id) = husimi_p_moments(&s);
        let dp = h.plat.spacing;
        let (mut m2, mut m4) = (0.0, 0.0);
        for (l, v) in hp.iter().enumerate() {
            let p = h.plat.coord(l);
            m2 += p * p * v * dp;
            m4 += p.powi(4) * v * dp;
        }
        assert!((m2 - m2_id).abs() < 1e-6, "{m2} vs {m2_id}");
        assert!((m4 - m4_id).abs() < 1e-5, "{m4} vs {m4_id}");
    }
}
