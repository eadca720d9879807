//! The analytic estimates made computable: error-term pairings, weak PDE
//! residuals for the Wigner and Husimi equations, the dictionary metric
//! `d_P`, tightness and singular-decay diagnostics, and the bound ledger.

use crate::error::{LabError, Result};
use crate::fourier::{self, Direction};
use crate::gridcore::{wigner_lattice, FieldTag, PhaseField};
use crate::phase_space;
use crate::potentials::PotentialSpec;
use crate::quantum_dynamics::StateSeries;
use crate::states::MixedState;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// smooth compactly supported profiles

/// `exp(1 - 1/(1 - (z/s)^2))` inside `|z| < s`, zero outside.
pub fn bump(z: f64, s: f64) -> f64 {
    let u = (z / s) * (z / s);
    if u < 1.0 {
        (1.0 - 1.0 / (1.0 - u)).exp()
    } else {
        0.0
    }
}

/// Derivative of [`bump`].
pub fn bump_deriv(z: f64, s: f64) -> f64 {
    let u = (z / s) * (z / s);
    if u < 1.0 {
        let denom = 1.0 - u;
        bump(z, s) * (-2.0 * z / (s * s)) / (denom * denom)
    } else {
        0.0
    }
}

/// Cached non-unitary Fourier transform `Bhat(y) = int B(p) e^{-i p y} dp`
/// of the bump of scale `s`, on a dense symmetric grid (real and even).
#[derive(Debug, Clone)]
pub struct BumpTransform {
    pub scale: f64,
    pub ymax: f64,
    pub dy: f64,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl BumpTransform {
    pub fn new(scale: f64, ymax: f64) -> Self {
        // dense quadrature in p; the bump is analytic inside its support
        let np = 4096usize;
        let dp = 2.0 * scale / np as f64;
        let pvals: Vec<f64> = (0..np).map(|i| -scale + (i as f64 + 0.5) * dp).collect();
        let bvals: Vec<f64> = pvals.iter().map(|&p| bump(p, scale)).collect();
        let ny = 8192usize;
        let dy = 2.0 * ymax / ny as f64;
        let mut values = Vec::with_capacity(ny + 1);
        let mut derivs = Vec::with_capacity(ny + 1);
        for j in 0..=ny {
            let y = -ymax + j as f64 * dy;
            let mut re = 0.0;
            let mut dre = 0.0;
            for (p, b) in pvals.iter().zip(&bvals) {
                re += b * (p * y).cos();
                dre += -b * p * (p * y).sin();
            }
            values.push(re * dp);
            derivs.push(dre * dp);
        }
        Self {
            scale,
            ymax,
            dy,
            values,
            derivs,
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        interp(&self.values, y, self.ymax, self.dy)
    }

    pub fn deriv(&self, y: f64) -> f64 {
        interp(&self.derivs, y, self.ymax, self.dy)
    }

    /// `int |Bhat| dy` restricted to `|y| <= cut` over the full integral.
    pub fn mass_fraction_within(&self, cut: f64) -> f64 {
        let mut inside = 0.0;
        let mut total = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let y = -self.ymax + j as f64 * self.dy;
            total += v.abs();
            if y.abs() <= cut {
                inside += v.abs();
            }
        }
        inside / total
    }
}

fn interp(vals: &[f64], y: f64, ymax: f64, dy: f64) -> f64 {
    if y.abs() >= ymax {
        return 0.0;
    }
    let f = (y + ymax) / dy;
    let i = f.floor() as usize;
    let t = f - i as f64;
    vals[i] * (1.0 - t) + vals[i.min(vals.len() - 2) + 1] * t
}

// ---------------------------------------------------------------------------
// test-function dictionary and the metric d_P

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// One dictionary element `B_s(x) B_s(p) trig(fx x + fp p)`, bounded by 1.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub scale: f64,
    pub freq_x: f64,
    pub freq_p: f64,
    pub parity: Parity,
    pub weight: f64,
    pub lipschitz: f64,
}

impl TestFunction {
    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let ph = self.freq_x * x + self.freq_p * p;
        bump(x, self.scale)
            * bump(p, self.scale)
            * match self.parity {
                Parity::Cos => ph.cos(),
                Parity::Sin => ph.sin(),
            }
    }

    pub fn grad_x(&self, x: f64, p: f64) -> f64 {
        let ph = self.freq_x * x + self.freq_p * p;
        let (tr, dtr) = match self.parity {
            Parity::Cos => (ph.cos(), -ph.sin()),
            Parity::Sin => (ph.sin(), ph.cos()),
        };
        bump(p, self.scale) * (bump_deriv(x, self.scale) * tr + bump(x, self.scale) * self.freq_x * dtr)
    }

    pub fn grad_p(&self, x: f64, p: f64) -> f64 {
        let ph = self.freq_x * x + self.freq_p * p;
        let (tr, dtr) = match self.parity {
            Parity::Cos => (ph.cos(), -ph.sin()),
            Parity::Sin => (ph.sin(), ph.cos()),
        };
        bump(x, self.scale) * (bump_deriv(p, self.scale) * tr + bump(p, self.scale) * self.freq_p * dtr)
    }
}

/// Deterministically ordered finite dictionary inducing the metric `d_P`.
#[derive(Debug, Clone)]
pub struct TestFunctionDictionary {
    pub functions: Vec<TestFunction>,
    pub omega0: f64,
    pub scales: Vec<f64>,
    pub freqs_per_axis: usize,
}

impl TestFunctionDictionary {
    /// The laboratory default: 2 window scales, 8 frequencies per axis at
    /// base `omega0 = 0.5`, cos/sin parities, weights `2^{-k}` in an order
    /// that puts low frequencies first.
    pub fn standard() -> Self {
        Self::build(&[4.0, 7.5], 0.5, 8)
    }

    pub fn build(scales: &[f64], omega0: f64, freqs_per_axis: usize) -> Self {
        let mut keys: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
        for a in 0..freqs_per_axis {
            for b in 0..freqs_per_axis {
                for (si, _) in scales.iter().enumerate() {
                    for par in 0..2usize {
                        if a == 0 && b == 0 && par == 1 {
                            continue; // sin(0) is identically zero
                        }
                        keys.push((a + b, a, b, si, par));
                    }
                }
            }
        }
        keys.sort();
        let functions = keys
            .iter()
            .enumerate()
            .map(|(k, &(_, a, b, si, par))| {
                let scale = scales[si];
                let freq_x = a as f64 * omega0;
                let freq_p = b as f64 * omega0;
                let parity = if par == 0 { Parity::Cos } else { Parity::Sin };
                // recorded Lipschitz estimate: sample on a 1-D section
                let mut lip: f64 = 0.0;
                let steps = 200;
                for i in 0..steps {
                    let z = -scale + (i as f64 + 0.5) * 2.0 * scale / steps as f64;
                    let gx = bump_deriv(z, scale).abs() + freq_x;
                    let gp = bump_deriv(z, scale).abs() + freq_p;
                    lip = lip.max(gx.hypot(gp));
                }
                TestFunction {
                    scale,
                    freq_x,
                    freq_p,
                    parity,
                    weight: 0.5f64.powi(k as i32),
                    lipschitz: lip,
                }
            })
            .collect();
        Self {
            functions,
            omega0,
            scales: scales.to_vec(),
            freqs_per_axis,
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Dictionary moments of a phase-space field (n = 1).
    pub fn moments_field(&self, field: &PhaseField) -> Result<Vec<f64>> {
        if field.dim() != 1 {
            return Err(LabError::Unsupported("dictionary moments are n = 1".into()));
        }
        let n = field.xgrid.points();
        let np = field.plat.points;
        let xs = field.xgrid.axis_coords();
        let ps = field.plat.axis_coords();
        let cell = field.cell_volume();
        Ok(self
            .functions
            .par_iter()
            .map(|f| {
                let mut acc = 0.0;
                for i in 0..n {
                    let bx = bump(xs[i], f.scale);
                    if bx == 0.0 {
                        continue;
                    }
                    let base = i * np;
                    for l in 0..np {
                        let v = field.data[base + l];
                        if v == 0.0 {
                            continue;
                        }
                        let ph = f.freq_x * xs[i] + f.freq_p * ps[l];
                        let tr = match f.parity {
                            Parity::Cos => ph.cos(),
                            Parity::Sin => ph.sin(),
                        };
                        acc += v * bx * bump(ps[l], f.scale) * tr;
                    }
                }
                acc * cell
            })
            .collect())
    }
}

/// `d_P` from precomputed moment vectors.
pub fn dp_from_moments(m1: &[f64], m2: &[f64], dict: &TestFunctionDictionary) -> f64 {
    m1.iter()
        .zip(m2)
        .zip(&dict.functions)
        .map(|((a, b), f)| f.weight * (a - b).abs())
        .sum()
}

/// The bounded dictionary metric between unit-mass nonnegative lattice
/// densities.
pub fn dp(mu: &PhaseField, nu: &PhaseField, dict: &TestFunctionDictionary) -> Result<f64> {
    for (name, f) in [("mu", mu), ("nu", nu)] {
        let mass = f.quadrature();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(LabError::MassMismatch(format!(
                "{name} has mass {mass}, expected 1"
            )));
        }
    }
    let m1 = dict.moments_field(mu)?;
    let m2 = dict.moments_field(nu)?;
    Ok(dp_from_moments(&m1, &m2, dict))
}

// ---------------------------------------------------------------------------
// error-term pairings

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorVariant {
    /// Full difference-quotient term (the transport right-hand side).
    FullDelta,
    /// Remainder after subtracting `grad U(x) . y` (the semiclassical error).
    Remainder,
}

/// Off-diagonal kernel products `K[i][m] = rho(x_i + u_m, x_i - u_m)`
/// windowed at `|u| <= L/2`, shared by the pairing routines (n = 1).
fn kernel_products(state: &MixedState, umax: isize) -> Vec<Vec<C64>> {
    let grid = state.grid;
    let n = grid.points();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![C64::new(0.0, 0.0); 2 * umax as usize + 1];
            for (mu, f) in state.weights.iter().zip(&state.eigenfunctions) {
                for (slot, ms) in (-umax..=umax).enumerate() {
                    let ip = (i as isize + ms).rem_euclid(n as isize) as usize;
                    let im = (i as isize - ms).rem_euclid(n as isize) as usize;
                    row[slot] += mu * f.data[ip] * f.data[im].conj();
                }
            }
            row
        })
        .collect()
}

/// `int int E'_eps(U, rho) phi dx dp` (or the remainder variant) through the
/// y-space representation on the lattice (n = 1).
///
/// Refuses when the dictionary profile's transform keeps less than
/// `1 - 1e-8` of its mass inside the covered y-range.
pub fn error_term_paired(
    state: &MixedState,
    potential: &PotentialSpec,
    f: &TestFunction,
    variant: ErrorVariant,
    bhat: &BumpTransform,
) -> Result<C64> {
    let grid = state.grid;
    if grid.dim() != 1 {
        return Err(LabError::Unsupported(
            "y-space pairing is n = 1; use coulomb_pairing_bound for n = 3".into(),
        ));
    }
    let n = grid.points();
    let eps = state.eps;
    let umax = (n / 2 - 1) as isize;
    let ycut = 2.0 * (umax as f64) * grid.dx() / eps;
    let frac = bhat.mass_fraction_within(ycut.min(bhat.ymax));
    if frac < 1.0 - 1e-8 {
        return Err(LabError::Resolution(format!(
            "y-range keeps only {frac} of the transform mass; enlarge the box or eps"
        )));
    }
    let kern = kernel_products(state, umax);
    let dy = 2.0 * grid.dx() / eps;
    let xs = grid.axis_coords();
    let acc: C64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = xs[i];
            let bx = bump(x, f.scale);
            if bx == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let mut row_acc = C64::new(0.0, 0.0);
            for (slot, ms) in (-umax..=umax).enumerate() {
                let u = ms as f64 * grid.dx();
                let y = 2.0 * u / eps;
                let xp = [x + u];
                let xm = [x - u];
                let dq = (potential.eval_rough(&xp) + potential.eval_singular(&xp)
                    - potential.eval_rough(&xm)
                    - potential.eval_singular(&xm))
                    / eps;
                let bracket = match variant {
                    ErrorVariant::FullDelta => dq,
                    ErrorVariant::Remainder => {
                        let (g, _) = potential.gradient(&[x]).unwrap_or((vec![0.0], true));
                        dq - g[0] * y
                    }
                };
                // F_p phi(x, y) for B(x)B(p)trig(fx x + fp p):
                //   cos: e^{i fx x} Bhat(y - fp)/2 + e^{-i fx x} Bhat(y + fp)/2
                //   sin: the same over 2i, with a minus on the second term
                let bm = bhat.eval(y - f.freq_p);
                let bp = bhat.eval(y + f.freq_p);
                let em = C64::from_polar(1.0, f.freq_x * x);
                let fp_phi = match f.parity {
                    Parity::Cos => (em * bm + em.conj() * bp) * 0.5,
                    Parity::Sin => (em * bm - em.conj() * bp) * C64::new(0.0, -0.5),
                };
                row_acc += bracket * kern[i][slot] * fp_phi * bx;
            }
            row_acc
        })
        .reduce(|| C64::new(0.0, 0.0), |a, b| a + b);
    Ok(acc * C64::new(0.0, -1.0) / (2.0 * PI) * grid.dx() * dy)
}

/// `E'_eps(U, rho)` (or the remainder) materialized as a phase-space field
/// on the Wigner lattice (n = 1), plus the discarded imaginary sup.
pub fn error_field(
    state: &MixedState,
    potential: &PotentialSpec,
    variant: ErrorVariant,
) -> Result<(PhaseField, f64)> {
    let grid = state.grid;
    if grid.dim() != 1 {
        return Err(LabError::Unsupported("error fields are n = 1".into()));
    }
    let n = grid.points();
    let eps = state.eps;
    let plat = wigner_lattice(&grid, eps);
    let umax = (n / 4) as isize;
    let xs = grid.axis_coords();
    let scale = grid.dx() / (PI * eps); // dy/(2 pi) with dy = 2 dx/eps
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = xs[i];
            let mut prod = vec![C64::new(0.0, 0.0); n];
            for (mu, f) in state.weights.iter().zip(&state.eigenfunctions) {
                for ms in -umax..=umax {
                    let u = ms as f64 * grid.dx();
                    let y = 2.0 * u / eps;
                    let ip = (i as isize + ms).rem_euclid(n as isize) as usize;
                    let im = (i as isize - ms).rem_euclid(n as isize) as usize;
                    let xp = [x + u];
                    let xm = [x - u];
                    let dq = (potential.eval_rough(&xp) + potential.eval_singular(&xp)
                        - potential.eval_rough(&xm)
                        - potential.eval_singular(&xm))
                        / eps;
                    let bracket = match variant {
                        ErrorVariant::FullDelta => dq,
                        ErrorVariant::Remainder => {
                            let (g, _) = potential.gradient(&[x]).unwrap_or((vec![0.0], true));
                            dq - g[0] * y
                        }
                    };
                    let slot = ms.rem_euclid(n as isize) as usize;
                    prod[slot] += mu * bracket * f.data[ip] * f.data[im].conj();
                }
            }
            fourier::fft_inplace(&mut prod, false);
            let mut row = vec![0.0; n];
            let mut imag: f64 = 0.0;
            for l in 0..n {
                let src = (l + n / 2) % n;
                // -i * (transform): the real part of E' is Im(transform)
                let z = prod[src] * C64::new(0.0, -1.0) * scale;
                row[l] = z.re;
                imag = imag.max(z.im.abs());
            }
            (row, imag)
        })
        .collect();
    let mut field = PhaseField::zeros(grid, plat, FieldTag::Residual);
    let mut worst = 0.0f64;
    for (i, (row, imag)) in rows.into_iter().enumerate() {
        field.data[i * n..(i + 1) * n].copy_from_slice(&row);
        worst = worst.max(imag);
    }
    Ok((field, worst))
}

// ---------------------------------------------------------------------------
// weak PDE residuals

/// Smooth time window compactly supported in `(lo, hi)`.
#[derive(Debug, Clone, Copy)]
pub struct TimeWindow {
    pub lo: f64,
    pub hi: f64,
}

impl TimeWindow {
    pub fn eval(&self, t: f64) -> f64 {
        let c = 0.5 * (self.lo + self.hi);
        let r = 0.5 * (self.hi - self.lo);
        bump(t - c, r)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let c = 0.5 * (self.lo + self.hi);
        let r = 0.5 * (self.hi - self.lo);
        bump_deriv(t - c, r)
    }
}

/// Composite quadrature over the uniformly spaced record times (Simpson on
/// even interval counts, trapezoid fallback).
fn time_quadrature(ts: &[f64], vals: &[f64]) -> f64 {
    let m = ts.len();
    if m < 2 {
        return 0.0;
    }
    let h = ts[1] - ts[0];
    if (m - 1) % 2 == 0 {
        let mut acc = vals[0] + vals[m - 1];
        for (k, v) in vals.iter().enumerate().take(m - 1).skip(1) {
            acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        acc * h / 3.0
    } else {
        let mut acc = 0.5 * (vals[0] + vals[m - 1]);
        for v in &vals[1..m - 1] {
            acc += v;
        }
        acc * h
    }
}

/// Weak-form defect of the Wigner transport identity over a record series:
/// `| int dt [phi_t' <W,f> + phi_t(<W, p f_x> + <E', f>)] |`.
pub fn wigner_residual(
    series: &StateSeries,
    potential: &PotentialSpec,
    f: &TestFunction,
    window: &TimeWindow,
) -> Result<f64> {
    let mut vals = Vec::with_capacity(series.times.len());
    for (t, st) in series.times.iter().zip(&series.states) {
        let wt = window.eval(*t);
        let dwt = window.deriv(*t);
        if wt == 0.0 && dwt == 0.0 {
            vals.push(0.0);
            continue;
        }
        let w = phase_space::wigner(st)?;
        let m_f = w.pair_with(|x, p| f.eval(x[0], p[0]));
        let m_tr = w.pair_with(|x, p| p[0] * f.grad_x(x[0], p[0]));
        let (ef, _) = error_field(st, potential, ErrorVariant::FullDelta)?;
        let m_err = ef.pair_with(|x, p| f.eval(x[0], p[0]));
        vals.push(dwt * m_f + wt * (m_tr + m_err));
    }
    Ok(time_quadrature(&series.times, &vals).abs())
}

/// Husimi residual: total defect plus the separately reported sqrt(eps)
/// divergence-correction magnitude.
#[derive(Debug, Clone)]
pub struct HusimiResidual {
    pub total: f64,
    pub sqrt_eps_term: f64,
}

/// Convolve a rasterized test function with the vector kernel `q G_eps^{(2n)}`
/// along its p-axis (spectral multiplier `-i eps k_p/2 e^{-eps k^2/4}`).
fn convolve_qgauss(field: &PhaseField, eps: f64) -> PhaseField {
    let n = field.xgrid.points();
    let np = field.plat.points;
    let shape = [n, np];
    let mut buf: Vec<C64> = field.data.iter().map(|&v| C64::new(v, 0.0)).collect();
    fourier::transform_axis(
        &mut buf,
        &shape,
        0,
        field.xgrid.dx(),
        field.xgrid.offset(),
        Direction::Forward,
    );
    fourier::transform_axis(&mut buf, &shape, 1, field.plat.spacing, 0.0, Direction::Forward);
    for i in 0..n {
        let kx = fourier::wavenumber(i, n, field.xgrid.dx());
        for l in 0..np {
            let kp = fourier::wavenumber(l, np, field.plat.spacing);
            let damp = (-eps * (kx * kx + kp * kp) / 4.0).exp();
            buf[i * np + l] *= C64::new(0.0, -eps * kp / 2.0) * damp;
        }
    }
    fourier::transform_axis(&mut buf, &shape, 1, field.plat.spacing, 0.0, Direction::Inverse);
    fourier::transform_axis(
        &mut buf,
        &shape,
        0,
        field.xgrid.dx(),
        field.xgrid.offset(),
        Direction::Inverse,
    );
    let mut out = field.clone();
    for (slot, z) in out.data.iter_mut().zip(&buf) {
        *slot = z.re;
    }
    out
}

/// Weak-form defect of the Husimi identity, with the sqrt(eps) divergence
/// correction computed through `<W, (q G) * grad_x f>`.
pub fn husimi_residual(
    series: &StateSeries,
    potential: &PotentialSpec,
    f: &TestFunction,
    window: &TimeWindow,
) -> Result<HusimiResidual> {
    let eps = series.states[0].eps;
    let mut vals = Vec::with_capacity(series.times.len());
    let mut sq_vals = Vec::with_capacity(series.times.len());
    for (t, st) in series.times.iter().zip(&series.states) {
        let wt = window.eval(*t);
        let dwt = window.deriv(*t);
        if wt == 0.0 && dwt == 0.0 {
            vals.push(0.0);
            sq_vals.push(0.0);
            continue;
        }
        let w = phase_space::wigner(st)?;
        let h = phase_space::husimi_via_convolution(&w, eps)?;
        let m_f = h.pair_with(|x, p| f.eval(x[0], p[0]));
        let m_tr = h.pair_with(|x, p| p[0] * f.grad_x(x[0], p[0]));
        let (ef, _) = error_field(st, potential, ErrorVariant::FullDelta)?;
        let ef_smoothed = ef.convolve_gaussian(eps)?;
        let m_err = ef_smoothed.pair_with(|x, p| f.eval(x[0], p[0]));
        // divergence correction: <grad_x . [W * (qG)], f> = -<W * (qG), f_x>
        //                       = <W, (qG) * f_x>   ((qG) is odd)
        let gradx = PhaseField::from_fn(w.xgrid, w.plat, FieldTag::Residual, |x, p| {
            f.grad_x(x[0], p[0])
        });
        let conv = convolve_qgauss(&gradx, eps);
        let mut m_div = 0.0;
        for (a, b) in w.data.iter().zip(&conv.data) {
            m_div += a * b;
        }
        m_div *= w.cell_volume();
        vals.push(dwt * m_f + wt * (m_tr + m_err + m_div));
        sq_vals.push(wt * m_div);
    }
    Ok(HusimiResidual {
        total: time_quadrature(&series.times, &vals).abs(),
        sqrt_eps_term: time_quadrature(&series.times, &sq_vals).abs(),
    })
}

// ---------------------------------------------------------------------------
// tightness and singular decay

/// Husimi mass outside the centered max-norm box of half-width `R`, per `R`,
/// estimated from the marginal split (x-side exact, p-side exact for n = 1
/// and Chebyshev-bounded otherwise). Nonincreasing in `R`.
pub fn tightness_profile_state(state: &MixedState, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let grid = state.grid;
    let n = grid.dim();
    let eps = state.eps;
    let xmarg = phase_space::gaussian_smooth_real(&state.kernel_diagonal(), eps)?;
    let cell = grid.cell_volume();
    let (p2, _) = phase_space::husimi_p_moments(state);
    let pmarg = if n == 1 {
        let plat = wigner_lattice(&grid, eps);
        let raw = phase_space::wigner_p_marginal_spectral(state)?;
        Some((plat, phase_space::gaussian_smooth_plattice(&raw, &plat, eps)))
    } else {
        None
    };
    let mut out = Vec::with_capacity(radii.len());
    let mut pos = vec![0.0; n];
    for &r in radii {
        let mut x_out = 0.0;
        for (flat, &v) in xmarg.data.iter().enumerate() {
            grid.position(flat, &mut pos);
            if pos.iter().any(|c| c.abs() > r) {
                x_out += v * cell;
            }
        }
        let p_out = match &pmarg {
            Some((plat, vals)) => {
                let mut acc = 0.0;
                for (l, v) in vals.iter().enumerate() {
                    if plat.coord(l).abs() > r {
                        acc += v * plat.spacing;
                    }
                }
                acc
            }
            None => (p2 / (r * r)).min(1.0), // Chebyshev bound
        };
        out.push((r, (x_out + p_out).max(0.0)));
    }
    Ok(out)
}

/// Same profile for a lattice field (direct sums; n = 1).
pub fn tightness_profile_field(field: &PhaseField, radii: &[f64]) -> Vec<(f64, f64)> {
    let n = field.xgrid.points();
    let np = field.plat.points;
    let xs = field.xgrid.axis_coords();
    let ps = field.plat.axis_coords();
    let cell = field.cell_volume();
    radii
        .iter()
        .map(|&r| {
            let mut acc = 0.0;
            for i in 0..n {
                for l in 0..np {
                    if xs[i].abs() > r || ps[l].abs() > r {
                        acc += field.data[i * np + l];
                    }
                }
            }
            (r, acc * cell)
        })
        .collect()
}

/// `int (|p|^4 + dist(x,S)^{-2}) dHusimi` via the moment and marginal routes
/// (any dimension; the distance term vanishes when `S` is empty).
pub fn singular_decay_moment(state: &MixedState, potential: &PotentialSpec) -> Result<f64> {
    let (_, p4) = phase_space::husimi_p_moments(state);
    let mut dist_term = 0.0;
    if potential.has_singular() {
        let grid = state.grid;
        let xmarg = phase_space::gaussian_smooth_real(&state.kernel_diagonal(), state.eps)?;
        let sset = potential.singular_set();
        let mut pos = vec![0.0; grid.dim()];
        for (flat, &v) in xmarg.data.iter().enumerate() {
            grid.position(flat, &mut pos);
            let d = sset.dist(&pos);
            if d > 0.0 {
                dist_term += v / (d * d);
            }
        }
        dist_term *= grid.cell_volume();
    }
    Ok(p4 + dist_term)
}

/// Field route for the same moment (n = 1).
pub fn singular_decay_moment_field(field: &PhaseField, potential: &PotentialSpec) -> f64 {
    let n = field.xgrid.points();
    let np = field.plat.points;
    let xs = field.xgrid.axis_coords();
    let ps = field.plat.axis_coords();
    let sset = potential.singular_set();
    let mut acc = 0.0;
    for i in 0..n {
        let dist2inv = if sset.is_empty() {
            0.0
        } else {
            let d = sset.dist(&[xs[i]]);
            if d > 0.0 {
                1.0 / (d * d)
            } else {
                continue;
            }
        };
        for l in 0..np {
            acc += field.data[i * np + l] * (ps[l].powi(4) + dist2inv);
        }
    }
    acc * field.cell_volume()
}

// ---------------------------------------------------------------------------
// bound ledger

/// One machine-checked inequality: measured left side against an assembled
/// right side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub components: Vec<(String, f64)>,
    pub pass: bool,
}

impl BoundEntry {
    fn new(name: &str, lhs: f64, rhs: f64, components: Vec<(String, f64)>) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs <= rhs,
            components,
        }
    }
}

/// The assembled weak-Lipschitz-in-time bound: measures
/// `sup_t |d/dt int f dHusimi_t|` by centered differences and compares with
/// `|grad U_b|_inf/(2pi)^n C1_f + C_* C_1 C1_f + C2_f/(2pi)^n`.
pub fn time_derivative_bound(
    series: &StateSeries,
    potential: &PotentialSpec,
    f: &TestFunction,
    bhat: &BumpTransform,
    grad_ub_sup: f64,
    c1_apriori: f64,
) -> Result<BoundEntry> {
    let eps = series.states[0].eps;
    // measured: centered differences of t -> int f dHusimi_t
    let mut fvals = Vec::with_capacity(series.times.len());
    for st in &series.states {
        let w = phase_space::wigner(st)?;
        let h = phase_space::husimi_via_convolution(&w, eps)?;
        fvals.push(h.pair_with(|x, p| f.eval(x[0], p[0])));
    }
    let mut measured: f64 = 0.0;
    for k in 1..fvals.len().saturating_sub(1) {
        let dt = series.times[k + 1] - series.times[k - 1];
        measured = measured.max(((fvals[k + 1] - fvals[k - 1]) / dt).abs());
    }
    // C1_f = int |y| sup_x |F_p f| dy  (upper estimate via |.|+|.|)
    let mut c1f = 0.0;
    let mut c2f_first = 0.0;
    let mut c2f_second = 0.0;
    // sup_x |B'(x) + i fx B(x)| over the window
    let mut w_a: f64 = 0.0;
    let steps = 400;
    for i in 0..steps {
        let z = -f.scale + (i as f64 + 0.5) * 2.0 * f.scale / steps as f64;
        let v = bump_deriv(z, f.scale).hypot(f.freq_x * bump(z, f.scale));
        w_a = w_a.max(v);
    }
    let ny = bhat.values.len();
    for j in 0..ny {
        let y = -bhat.ymax + j as f64 * bhat.dy;
        let sup_fp = 0.5 * (bhat.eval(y - f.freq_p).abs() + bhat.eval(y + f.freq_p).abs());
        let sup_dfp = 0.5 * (bhat.deriv(y - f.freq_p).abs() + bhat.deriv(y + f.freq_p).abs());
        c1f += y.abs() * sup_fp * bhat.dy;
        // F_p g = i d/dy F_p f ; sup_z |d/dz F_p g| <= w_a * |Bhat'|-terms
        c2f_first += w_a * sup_dfp * bhat.dy;
        c2f_second += 0.5 * y.abs() * w_a * sup_fp * bhat.dy;
    }
    let c2f = c2f_first + c2f_second;
    let coulomb_cstar = if potential.has_singular() {
        let zmin = potential
            .singular
            .iter()
            .map(|t| t.charge())
            .fold(f64::INFINITY, f64::min);
        1.0 / (2.0 * PI * zmin)
    } else {
        0.0
    };
    let rhs = grad_ub_sup / (2.0 * PI) * c1f + coulomb_cstar * c1_apriori * c1f + c2f / (2.0 * PI);
    Ok(BoundEntry::new(
        "equicontinuity",
        measured,
        rhs,
        vec![
            ("C1_f".into(), c1f),
            ("C2_f".into(), c2f),
            ("grad_Ub_sup".into(), grad_ub_sup),
            ("coulomb_term".into(), coulomb_cstar * c1_apriori * c1f),
        ],
    ))
}

/// A-priori lemma check on tensor test functions `f1(x) f2(p)`:
/// the measured pairing `sup_t |int E'(U_b, rho_t) f1 f2|` against the
/// four-term right side, for one smoothing parameter `lambda`.
#[allow(clippy::too_many_arguments)]
pub fn apriori_bound_check(
    series: &StateSeries,
    potential: &PotentialSpec,
    scale1: f64,
    _scale2: f64,
    lambda: f64,
    bhat2: &BumpTransform,
    disop_c: f64,
    box_halfwidth: f64,
) -> Result<BoundEntry> {
    let rough_only = PotentialSpec::rough_only(potential.dim, potential.rough.clone());
    let f = TestFunction {
        scale: scale1,
        freq_x: 0.0,
        freq_p: 0.0,
        parity: Parity::Cos,
        weight: 1.0,
        lipschitz: 0.0,
    };
    // for the pairing, f2's profile enters through bhat2 (shared scale2 cache);
    // f = B_{s1}(x) B_{s2}(p) needs its own evaluation path: reuse the
    // y-space pairing with freq 0 after swapping the p-profile.
    let mut lhs: f64 = 0.0;
    for st in &series.states {
        let pairing = error_term_paired_profile(st, &rough_only, scale1, bhat2)?;
        lhs = lhs.max(pairing.norm());
    }
    let _ = f;

    // assemble the right side on a fine 1-D grid over the box
    let m = 8000usize;
    let dx = 2.0 * box_halfwidth / m as f64;
    let mut phi1_l1 = 0.0;
    let mut grad_phi1_sup: f64 = 0.0;
    let mut ub_sup: f64 = 0.0;
    let mut grad_ub_sup: f64 = 0.0;
    let mut grad_a_sup: f64 = 0.0;
    let mut grad_a_l2 = 0.0;
    for i in 0..m {
        let x = -box_halfwidth + (i as f64 + 0.5) * dx;
        let b = bump(x, scale1);
        let db = bump_deriv(x, scale1);
        phi1_l1 += b.abs() * dx;
        grad_phi1_sup = grad_phi1_sup.max(db.abs());
        let u = rough_only.eval_rough(&[x]);
        let (g, _) = rough_only.rough.gradient(&[x]);
        if b > 0.0 {
            ub_sup = ub_sup.max(u.abs());
            grad_ub_sup = grad_ub_sup.max(g[0].abs());
        }
        let da = g[0] * b + u * db; // grad A a.e., A = U_b phi1
        grad_a_sup = grad_a_sup.max(da.abs());
        grad_a_l2 += da * da * dx;
    }
    let grad_a_l2 = grad_a_l2.sqrt();

    // phi2hat terms on the dense y-grid; G_lambda smoothing of the transform
    let ny = bhat2.values.len();
    let mut smoothed = vec![0.0; ny];
    let rad = (8.0 * lambda.sqrt() / bhat2.dy).ceil() as isize;
    for j in 0..ny {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for r in -rad..=rad {
            let jj = j as isize + r;
            if jj < 0 || jj >= ny as isize {
                continue;
            }
            let z = r as f64 * bhat2.dy;
            let g = (-z * z / lambda).exp();
            acc += g * bhat2.values[jj as usize];
            wsum += g;
        }
        smoothed[j] = acc / wsum;
    }
    let mut t1_sup: f64 = 0.0;
    let mut phi2hat_l1 = 0.0;
    let mut z_phi2hat_l1 = 0.0;
    let mut t4_int = 0.0;
    for j in 0..ny {
        let y = -bhat2.ymax + j as f64 * bhat2.dy;
        t1_sup = t1_sup.max(y.abs() * (bhat2.values[j] - smoothed[j]).abs());
        phi2hat_l1 += bhat2.values[j].abs() * bhat2.dy;
        z_phi2hat_l1 += y.abs() * bhat2.values[j].abs() * bhat2.dy;
        t4_int += y.abs() * smoothed[j].abs() * bhat2.dy;
    }
    let t1 = phi1_l1 * grad_ub_sup * t1_sup;
    let t2 = lambda.sqrt() * grad_a_sup * phi2hat_l1 / PI.sqrt();
    let t3 = disop_c.sqrt() * grad_a_l2 / (2.0 * PI * lambda).powf(0.25) * z_phi2hat_l1;
    let t4 = ub_sup * grad_phi1_sup * t4_int;
    let rhs = t1 + t2 + t3 + t4;
    Ok(BoundEntry::new(
        &format!("apriori(lambda={lambda})"),
        lhs,
        rhs,
        vec![
            ("T1_smoothing_gap".into(), t1),
            ("T2_sqrt_lambda".into(), t2),
            ("T3_disop".into(), t3),
            ("T4_window_motion".into(), t4),
        ],
    ))
}

/// `int int E'(U, rho) B_{s1}(x) f2(p) dx dp` with `f2`'s transform given by
/// `bhat2` (tensor test function, zero frequencies).
fn error_term_paired_profile(
    state: &MixedState,
    potential: &PotentialSpec,
    scale1: f64,
    bhat2: &BumpTransform,
) -> Result<C64> {
    let grid = state.grid;
    let n = grid.points();
    let eps = state.eps;
    let umax = (n / 2 - 1) as isize;
    let kern = kernel_products(state, umax);
    let dy = 2.0 * grid.dx() / eps;
    let xs = grid.axis_coords();
    let acc: C64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = xs[i];
            let b1 = bump(x, scale1);
            if b1 == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let mut row = C64::new(0.0, 0.0);
            for (slot, ms) in (-umax..=umax).enumerate() {
                let u = ms as f64 * grid.dx();
                let y = 2.0 * u / eps;
                let xp = [x + u];
                let xm = [x - u];
                let dq = (potential.eval_rough(&xp) + potential.eval_singular(&xp)
                    - potential.eval_rough(&xm)
                    - potential.eval_singular(&xm))
                    / eps;
                row += dq * kern[i][slot] * (bhat2.eval(y) * b1);
            }
            row
        })
        .reduce(|| C64::new(0.0, 0.0), |a, b| a + b);
    Ok(acc * C64::new(0.0, -1.0) / (2.0 * PI) * grid.dx() * dy)
}

/// Coulomb pairing bound (n = 3, separable test function
/// `prod_a B(x_a) B(p_a) cos(fx.x + fp.p)`): measured pairing against
/// `C_* (int U_s^2 rho) int |y| sup_x |F_p phi| dy`.
pub fn coulomb_pairing_bound(
    state: &MixedState,
    potential: &PotentialSpec,
    scale: f64,
    freq_x: [f64; 3],
    freq_p: [f64; 3],
    bhat: &BumpTransform,
) -> Result<BoundEntry> {
    let grid = state.grid;
    if grid.dim() != 3 {
        return Err(LabError::Unsupported("coulomb pairing bound is n = 3".into()));
    }
    let n = grid.points();
    let eps = state.eps;
    // y-offsets kept where the profile transform is non-negligible
    let dy_lattice = 2.0 * grid.dx() / eps;
    let bmax = bhat.values.iter().cloned().fold(0.0, f64::max);
    let freq_sup = freq_p.iter().cloned().fold(0.0f64, f64::max);
    let mut mlim = 0isize;
    for m in 0..(n / 4) as isize {
        let y = m as f64 * dy_lattice;
        if bhat.eval(y - freq_sup).abs() > 1e-12 * bmax
            || bhat.eval(y + freq_sup).abs() > 1e-12 * bmax
        {
            mlim = m;
        }
    }
    let offs: Vec<isize> = (-mlim..=mlim).collect();
    let xs = grid.axis_coords();
    let sset = potential.singular_set();

    // pairing: sum over x (3-D) and y (3-D, truncated)
    let nn = n * n * n;
    let partial: Vec<C64> = (0..nn)
        .into_par_iter()
        .map(|flat| {
            let i0 = flat / (n * n);
            let i1 = (flat / n) % n;
            let i2 = flat % n;
            let x = [xs[i0], xs[i1], xs[i2]];
            let bx = bump(x[0], scale) * bump(x[1], scale) * bump(x[2], scale);
            if bx == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let fxdot = freq_x[0] * x[0] + freq_x[1] * x[1] + freq_x[2] * x[2];
            let exi = C64::from_polar(1.0, fxdot);
            let mut acc = C64::new(0.0, 0.0);
            let mut xp = [0.0; 3];
            let mut xm = [0.0; 3];
            for &m0 in &offs {
                for &m1 in &offs {
                    for &m2 in &offs {
                        let ms = [m0, m1, m2];
                        let mut bplus = 1.0;
                        let mut bminus = 1.0;
                        for a in 0..3 {
                            let y = ms[a] as f64 * dy_lattice;
                            bplus *= bhat.eval(y - freq_p[a]);
                            bminus *= bhat.eval(y + freq_p[a]);
                        }
                        if bplus.abs() < 1e-14 * bmax && bminus.abs() < 1e-14 * bmax {
                            continue;
                        }
                        let ip = [
                            (i0 as isize + m0).rem_euclid(n as isize) as usize,
                            (i1 as isize + m1).rem_euclid(n as isize) as usize,
                            (i2 as isize + m2).rem_euclid(n as isize) as usize,
                        ];
                        let im = [
                            (i0 as isize - m0).rem_euclid(n as isize) as usize,
                            (i1 as isize - m1).rem_euclid(n as isize) as usize,
                            (i2 as isize - m2).rem_euclid(n as isize) as usize,
                        ];
                        for a in 0..3 {
                            xp[a] = x[a] + ms[a] as f64 * grid.dx();
                            xm[a] = x[a] - ms[a] as f64 * grid.dx();
                        }
                        if sset.dist(&xp) == 0.0 || sset.dist(&xm) == 0.0 {
                            continue;
                        }
                        let dq = (potential.eval_singular(&xp) - potential.eval_singular(&xm)) / eps;
                        let mut rho = C64::new(0.0, 0.0);
                        for (mu, fphi) in state.weights.iter().zip(&state.eigenfunctions) {
                            let fp = fphi.data[(ip[0] * n + ip[1]) * n + ip[2]];
                            let fm = fphi.data[(im[0] * n + im[1]) * n + im[2]];
                            rho += mu * fp * fm.conj();
                        }
                        let fp_phi = (exi * bplus + exi.conj() * bminus) * 0.5;
                        acc += dq * rho * fp_phi * bx;
                    }
                }
            }
            acc
        })
        .collect();
    let sum: C64 = partial.into_iter().sum();
    let pairing = sum * C64::new(0.0, -1.0) / (2.0 * PI).powi(3)
        * grid.cell_volume()
        * dy_lattice.powi(3);
    let lhs = pairing.norm();

    // RHS: C_* = (2 pi)^{-3} / Z_min ; C1 = int U_s^2 rho ; C1_f computed on
    // a product y-grid from the cached profile transform
    let zmin = potential
        .singular
        .iter()
        .map(|t| t.charge())
        .fold(f64::INFINITY, f64::min);
    let cstar = 1.0 / ((2.0 * PI).powi(3) * zmin);
    let (c1, _) = crate::quantum_dynamics::singular_moment(state, potential);
    let g = 60usize;
    let ymax_eff = (mlim as f64 + 1.0) * dy_lattice + freq_sup;
    let dyq = 2.0 * ymax_eff / g as f64;
    let mut c1f = 0.0;
    for a0 in 0..g {
        let y0 = -ymax_eff + (a0 as f64 + 0.5) * dyq;
        for a1 in 0..g {
            let y1 = -ymax_eff + (a1 as f64 + 0.5) * dyq;
            for a2 in 0..g {
                let y2 = -ymax_eff + (a2 as f64 + 0.5) * dyq;
                let ys = [y0, y1, y2];
                let mut bp = 1.0;
                let mut bm = 1.0;
                for a in 0..3 {
                    bp *= bhat.eval(ys[a] - freq_p[a]);
                    bm *= bhat.eval(ys[a] + freq_p[a]);
                }
                let supx = 0.5 * (bp.abs() + bm.abs());
                if supx == 0.0 {
                    continue;
                }
                let ynorm = (y0 * y0 + y1 * y1 + y2 * y2).sqrt();
                c1f += ynorm * supx * dyq * dyq * dyq;
            }
        }
    }
    let rhs = cstar * c1 * c1f;
    Ok(BoundEntry::new(
        "coulomb_pairing",
        lhs,
        rhs,
        vec![
            ("C_star".into(), cstar),
            ("C1".into(), c1),
            ("C1_f".into(), c1f),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridcore::SpaceGrid;
    use crate::gridcore::GaussianKernel;
    use crate::potentials::RoughPotential;
    use crate::quantum_dynamics::{propagate, PropagationPlan};
    use crate::states::CoherentState;

    fn grid1() -> SpaceGrid {
        SpaceGrid::new(1, 512, 8.0).unwrap()
    }

    fn coherent_pure(x0: f64, p0: f64, eps: f64) -> MixedState {
        let f = CoherentState::new(vec![x0], vec![p0], eps).field(grid1());
        MixedState::pure(eps, f).unwrap()
    }

    fn gauss_field(cx: f64, cp: f64, eps: f64) -> PhaseField {
        let g = grid1();
        let plat = wigner_lattice(&g, 0.25);
        let k = GaussianKernel::new(eps, 2).unwrap();
        PhaseField::from_fn(g, plat, FieldTag::Classical, |x, p| {
            k.eval(&[x[0] - cx, p[0] - cp])
        })
    }

    #[test]
    fn dp_is_a_metric_and_detects_shifts() {
        let dict = TestFunctionDictionary::standard();
        let a = gauss_field(0.0, 0.0, 0.3);
        assert!(dp(&a, &a, &dict).unwrap() == 0.0);
        // translated Gaussian: d_P linear in small shifts
        let mut vals = vec![];
        for s in [0.05, 0.1, 0.2] {
            let b = gauss_field(s, 0.0, 0.3);
            vals.push(dp(&a, &b, &dict).unwrap());
        }
        assert!(vals[0] > 0.0);
        let r1 = vals[1] / vals[0];
        let r2 = vals[2] / vals[1];
        assert!((r1 - 2.0).abs() < 0.1, "ratio {r1}");
        assert!((r2 - 2.0).abs() < 0.15, "ratio {r2}");
        // symmetry and triangle inequality on a triple
        let b = gauss_field(0.4, -0.2, 0.35);
        let c = gauss_field(-0.3, 0.3, 0.4);
        let ab = dp(&a, &b, &dict).unwrap();
        let ba = dp(&b, &a, &dict).unwrap();
        let ac = dp(&a, &c, &dict).unwrap();
        let cb = dp(&c, &b, &dict).unwrap();
        assert!((ab - ba).abs() < 1e-15);
        assert!(ab <= ac + cb + 1e-12);
        // far-apart bumps: d_P equals the sum of dictionary moment sizes
        let far1 = gauss_field(-3.0, 0.0, 0.1);
        let far2 = gauss_field(3.0, 0.0, 0.1);
        let d = dp(&far1, &far2, &dict).unwrap();
        let m1 = dict.moments_field(&far1).unwrap();
        let m2 = dict.moments_field(&far2).unwrap();
        let expected: f64 = m1
            .iter()
            .zip(&m2)
            .zip(&dict.functions)
            .map(|((x, y), f)| f.weight * (x - y).abs())
            .sum();
        assert!((d - expected).abs() < 1e-15);
        assert!(d > 0.1);
    }

    #[test]
    fn dp_rejects_mass_mismatch() {
        let dict = TestFunctionDictionary::standard();
        let a = gauss_field(0.0, 0.0, 0.3);
        let mut b = a.clone();
        for v in &mut b.data {
            *v *= 1.1;
        }
        assert!(dp(&a, &b, &dict).is_err());
    }

    #[test]
    fn error_term_vanishes_for_linear_and_quadratic() {
        let eps = 0.25;
        let s = coherent_pure(0.4, -0.3, eps);
        let dict = TestFunctionDictionary::standard();
        let f = &dict.functions[5];
        let bhat = BumpTransform::new(f.scale, 80.0);
        // linear potential: remainder is identically zero
        let lin = PotentialSpec::rough_only(
            1,
            RoughPotential::Table {
                grid: grid1(),
                values: grid1().axis_coords().iter().map(|&x| 0.7 * x).collect(),
            },
        );
        let e = error_term_paired(&s, &lin, f, ErrorVariant::Remainder, &bhat).unwrap();
        assert!(e.norm() < 1e-12, "linear remainder {e}");
        // quadratic potential: symmetric difference quotient is exact
        let quad = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.3, center: 0.0 });
        let e = error_term_paired(&s, &quad, f, ErrorVariant::Remainder, &bhat).unwrap();
        assert!(e.norm() < 1e-10, "quadratic remainder {e}");
    }

    #[test]
    fn error_term_quartic_scales_quadratically() {
        let dict = TestFunctionDictionary::standard();
        let f = &dict.functions[5];
        let bhat = BumpTransform::new(f.scale, 120.0);
        let quartic = PotentialSpec::rough_only(1, RoughPotential::Quartic { a: 1.0, center: 0.0 });
        let mut mags = vec![];
        for eps in [0.4, 0.2, 0.1] {
            let s = coherent_pure(0.8, 0.2, eps);
            let e = error_term_paired(&s, &quartic, f, ErrorVariant::Remainder, &bhat).unwrap();
            mags.push(e.norm());
        }
        // fitted order across the halvings
        let o1 = (mags[0] / mags[1]).log2();
        let o2 = (mags[1] / mags[2]).log2();
        assert!(o1 >= 1.8, "order {o1} ({mags:?})");
        assert!(o2 >= 1.8, "order {o2} ({mags:?})");
    }

    #[test]
    fn error_field_matches_paired_route() {
        let eps = 0.25;
        let s = coherent_pure(0.3, 0.5, eps);
        let pot = PotentialSpec::rough_only(1, RoughPotential::AbsoluteValue { a: 1.0, center: 0.0 });
        let dict = TestFunctionDictionary::standard();
        let f = &dict.functions[7];
        let bhat = BumpTransform::new(f.scale, 80.0);
        let direct = error_term_paired(&s, &pot, f, ErrorVariant::FullDelta, &bhat).unwrap();
        let (ef, imag) = error_field(&s, &pot, ErrorVariant::FullDelta).unwrap();
        assert!(imag < 1e-9, "imaginary remainder {imag}");
        let via_field = ef.pair_with(|x, p| f.eval(x[0], p[0]));
        assert!(
            (direct.re - via_field).abs() < 2e-6 + 1e-3 * via_field.abs(),
            "{} vs {via_field}",
            direct.re
        );
    }

    #[test]
    fn wigner_residual_free_and_harmonic() {
        let eps = 0.25;
        let dict = TestFunctionDictionary::standard();
        let f = &dict.functions[3];
        let window = TimeWindow { lo: 0.05, hi: 0.45 };
        // free: transport is spectrally exact
        let s = coherent_pure(0.0, 0.6, eps);
        let plan = PropagationPlan::new(1e-3, 0.5, 5);
        let series = propagate(&s, &plan, &PotentialSpec::free(1)).unwrap();
        let r = wigner_residual(&series, &PotentialSpec::free(1), f, &window).unwrap();
        assert!(r < 1e-8, "free residual {r}");
        // harmonic: E' pairing is exact for quadratics
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
        let s = coherent_pure(1.0, 0.0, eps);
        let series = propagate(&s, &plan, &pot).unwrap();
        let r = wigner_residual(&series, &pot, f, &window).unwrap();
        assert!(r < 1e-6, "harmonic residual {r}");
        // negative control: corrupt one frame
        let mut bad = series.clone();
        let mid = bad.states.len() / 2;
        for z in &mut bad.states[mid].eigenfunctions[0].data {
            *z = C64::new(0.0, 0.0);
        }
        let r = wigner_residual(&bad, &pot, f, &window).unwrap();
        assert!(r > 1e-3, "corrupted residual only {r}");
    }

    #[test]
    fn husimi_residual_free_and_sqrt_eps_scaling() {
        let dict = TestFunctionDictionary::standard();
        let f = &dict.functions[3];
        let window = TimeWindow { lo: 0.05, hi: 0.45 };
        let free = PotentialSpec::free(1);
        let r = {
            let s = coherent_pure(0.0, 0.6, 0.25);
            let plan = PropagationPlan::new(1e-3, 0.5, 5);
            let series = propagate(&s, &plan, &free).unwrap();
            husimi_residual(&series, &free, f, &window).unwrap()
        };
        assert!(r.total < 1e-6, "free husimi residual {}", r.total);
        // sqrt(eps) term magnitude: fitted order >= 0.45 across halvings
        let mut mags = vec![];
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let s = coherent_pure(0.5, 0.4, eps);
            let plan = PropagationPlan::new(1e-3, 0.5, 10);
            let pot =
                PotentialSpec::rough_only(1, RoughPotential::AbsoluteValue { a: 1.0, center: 0.0 });
            let series = propagate(&s, &plan, &pot).unwrap();
            let hr = husimi_residual(&series, &pot, f, &window).unwrap();
            mags.push(hr.sqrt_eps_term);
        }
        for w in mags.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 0.45, "sqrt(eps) order {order} ({mags:?})");
        }
    }

    #[test]
    fn tightness_profiles_and_gaussian_tail() {
        let eps = 0.25;
        let s = coherent_pure(0.0, 0.0, eps);
        let radii = [0.5, 1.0, 1.5, 2.0, 3.0];
        let prof = tightness_profile_state(&s, &radii).unwrap();
        for w in prof.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12, "profile not monotone");
        }
        // compactly supported density: zero beyond its support
        let g = grid1();
        let plat = wigner_lattice(&g, eps);
        let fld = PhaseField::from_fn(g, plat, FieldTag::Classical, |x, p| {
            bump(x[0], 1.0) * bump(p[0], 1.0)
        });
        let prof = tightness_profile_field(&fld, &[1.5, 2.0]);
        assert!(prof.iter().all(|&(_, m)| m == 0.0));
        // Gaussian Husimi tails match the erfc oracle within 10%
        // husimi variance per axis: eps -> x-marginal tail 2*Phi(-R/sqrt(eps))
        let prof = tightness_profile_state(&s, &[1.2]).unwrap();
        let r: f64 = 1.2;
        let tail_x = libm::erfc(r / eps.sqrt());
        let expect = 2.0 * tail_x; // x-side + p-side
        assert!(
            (prof[0].1 - expect).abs() < 0.1 * expect,
            "{} vs {expect}",
            prof[0].1
        );
    }

    #[test]
    fn chebyshev_p_tail_bound_holds() {
        let eps = 0.25;
        let s = coherent_pure(0.3, 0.8, eps);
        let (p2, _) = phase_space::husimi_p_moments(&s);
        let plat = wigner_lattice(&grid1(), eps);
        let raw = phase_space::wigner_p_marginal_spectral(&s).unwrap();
        let smoothed = phase_space::gaussian_smooth_plattice(&raw, &plat, eps);
        for r in [1.5, 2.0, 3.0] {
            let mut tail = 0.0;
            for (l, v) in smoothed.iter().enumerate() {
                if plat.coord(l).abs() > r {
                    tail += v * plat.spacing;
                }
            }
            assert!(tail <= p2 / (r * r) + 1e-9, "r={r}");
        }
    }

    #[test]
    fn singular_decay_moment_routes_agree() {
        let eps = 0.25;
        let s = coherent_pure(0.9, 0.2, eps);
        let pot = PotentialSpec::free(1);
        // S empty: reduces to the |p|^4 moment
        let m_state = singular_decay_moment(&s, &pot).unwrap();
        let (_, p4) = phase_space::husimi_p_moments(&s);
        assert!((m_state - p4).abs() < 1e-12);
        let w = phase_space::wigner(&s).unwrap();
        let h = phase_space::husimi_via_convolution(&w, eps).unwrap();
        let m_field = singular_decay_moment_field(&h, &pot);
        assert!((m_state - m_field).abs() < 1e-5, "{m_state} vs {m_field}");
    }

    #[test]
    fn time_derivative_bound_static_and_free() {
        let dict = TestFunctionDictionary::standard();
        let f = &dict.functions[4];
        let bhat = BumpTransform::new(f.scale, 80.0);
        // static eigenmixture: derivative ~ 0 <= bound
        let eps = 0.25;
        let grid = grid1();
        let fns = crate::initdata::hermite_functions(eps, 1, grid).unwrap();
        let s = MixedState::new(eps, grid, vec![0.5, 0.5], fns).unwrap();
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
        let plan = PropagationPlan::new(1e-3, 0.1, 10);
        let series = propagate(&s, &plan, &pot).unwrap();
        let entry = time_derivative_bound(&series, &pot, f, &bhat, 8.0, 0.0).unwrap();
        assert!(entry.pass, "{entry:?}");
        assert!(entry.lhs < 1e-6);
        // free transport: bound reduces to the C2 term and holds
        let s = coherent_pure(0.0, 0.7, eps);
        let series = propagate(&s, &plan, &PotentialSpec::free(1)).unwrap();
        let entry =
            time_derivative_bound(&series, &PotentialSpec::free(1), f, &bhat, 0.0, 0.0).unwrap();
        assert!(entry.pass, "{entry:?}");
        assert!(entry.lhs > 0.0);
    }

    #[test]
    fn apriori_bound_holds_across_lambdas() {
        let eps = 0.25;
        let pot = PotentialSpec::rough_only(1, RoughPotential::AbsoluteValue { a: 1.0, center: 0.0 });
        let s = coherent_pure(0.7, 0.0, eps);
        let c = crate::states::disop_certificate(&s, 10, 1).unwrap().constant;
        let plan = PropagationPlan::new(1e-3, 0.2, 20);
        let series = propagate(&s, &plan, &pot).unwrap();
        let bhat2 = BumpTransform::new(3.0, 80.0);
        for lambda in [1.0, 0.3, 0.1] {
            let entry =
                apriori_bound_check(&series, &pot, 3.0, 3.0, lambda, &bhat2, c, 8.0).unwrap();
            assert!(entry.pass, "lambda={lambda}: {entry:?}");
            assert!(entry.lhs > 0.0);
        }
        // zero potential: LHS = 0 <= RHS
        let free = PotentialSpec::free(1);
        let series = propagate(&s, &plan, &free).unwrap();
        let entry = apriori_bound_check(&series, &free, 3.0, 3.0, 0.3, &bhat2, c, 8.0).unwrap();
        assert!(entry.pass);
        assert!(entry.lhs < 1e-12);
    }
}
