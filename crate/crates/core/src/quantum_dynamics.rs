//! Split-operator (Strang) propagation of mixed states under
//! `i eps d_t psi = -(eps^2/2) Lap psi + U psi`, with audits of the
//! conserved quantities and of the propagated operator bound.

use crate::error::{LabError, Result};
use crate::fourier;
use crate::phase_space;
use crate::potentials::PotentialSpec;
use crate::states::{kinetic_energy, MixedState};
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Plan for one propagation run. The effective step is
/// `min(dt, eps/10)` so phase accuracy stays uniform across an eps sweep.
#[derive(Debug, Clone)]
pub struct PropagationPlan {
    pub dt: f64,
    pub horizon: f64,
    /// Record every `record_every` steps (t = 0 is always recorded).
    pub record_every: usize,
    /// Cells per side counted as "box edge" by the escape monitor.
    pub boundary_band: usize,
    /// Edge-mass threshold that aborts the run.
    pub boundary_limit: f64,
}

impl PropagationPlan {
    pub fn new(dt: f64, horizon: f64, record_every: usize) -> Self {
        Self {
            dt,
            horizon,
            record_every,
            boundary_band: 3,
            boundary_limit: 1e-6,
        }
    }

    pub fn effective_dt(&self, eps: f64) -> f64 {
        self.dt.min(eps / 10.0)
    }
}

/// Time-indexed snapshots produced by [`propagate`].
#[derive(Debug, Clone)]
pub struct StateSeries {
    pub times: Vec<f64>,
    pub states: Vec<MixedState>,
    pub dt: f64,
}

impl StateSeries {
    pub fn at(&self, t: f64) -> Option<&MixedState> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() < 1e-9)
            .map(|i| &self.states[i])
    }
}

/// Largest occupied wavenumber: the smallest `k` with at most `tail_mass`
/// spectral mass above it, maximized over eigenfunctions.
fn occupied_wavenumber(state: &MixedState, tail_mass: f64) -> f64 {
    let grid = state.grid;
    let npts = grid.points();
    let dim = grid.dim();
    let dk = 2.0 * PI / (npts as f64 * grid.dx());
    let cell_k = dk.powi(dim as i32);
    let mut kocc: f64 = 0.0;
    for f in &state.eigenfunctions {
        let hat = f.forward_transform();
        // collect |k| and mass, then find the tail quantile
        let mut idx = vec![0usize; dim];
        let mut pairs: Vec<(f64, f64)> = hat
            .data
            .iter()
            .enumerate()
            .map(|(flat, z)| {
                grid.decode(flat, &mut idx);
                let k2: f64 = idx
                    .iter()
                    .map(|&j| {
                        let k = fourier::wavenumber(j, npts, grid.dx());
                        k * k
                    })
                    .sum();
                (k2.sqrt(), z.norm_sqr() * cell_k)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut acc = 0.0;
        for (k, m) in pairs {
            acc += m;
            if acc > tail_mass {
                kocc = kocc.max(k);
                break;
            }
        }
    }
    kocc
}

/// Evolve every eigenfunction by Strang splitting (half potential phase,
/// full kinetic phase in Fourier space, half potential phase). Weights are
/// untouched; per-step unitarity is enforced at 1e-12.
pub fn propagate(
    state: &MixedState,
    plan: &PropagationPlan,
    potential: &PotentialSpec,
) -> Result<StateSeries> {
    let grid = state.grid;
    let eps = state.eps;
    let dt = plan.effective_dt(eps);
    let steps = (plan.horizon / dt).round() as usize;
    if steps == 0 {
        return Err(LabError::Parameter("horizon shorter than one step".into()));
    }
    // resolution: occupied momenta must sit in the lower half of the grid's
    // spectral range, with the kinetic phase per step below pi/4 there
    let kocc = occupied_wavenumber(state, 1e-10);
    let kmax = PI / grid.dx();
    if kocc > 0.5 * kmax {
        return Err(LabError::Resolution(format!(
            "occupied wavenumber {kocc:.2} exceeds half the grid Nyquist {:.2}",
            0.5 * kmax
        )));
    }
    if dt * eps * kocc * kocc / 2.0 > PI / 4.0 {
        return Err(LabError::Parameter(format!(
            "kinetic phase per step {:.3} exceeds pi/4; shrink dt",
            dt * eps * kocc * kocc / 2.0
        )));
    }

    // cached phase tables
    let npts = grid.points();
    let dim = grid.dim();
    let mut pos = vec![0.0; dim];
    let mut half_pot = vec![C64::new(0.0, 0.0); grid.len()];
    let sset = potential.singular_set();
    for (flat, slot) in half_pot.iter_mut().enumerate() {
        grid.position(flat, &mut pos);
        let u = if !sset.is_empty() && sset.dist(&pos) == 0.0 {
            0.0 // measure-zero exclusion; staggered grids avoid this entirely
        } else {
            potential.eval_rough(&pos) + potential.eval_singular(&pos)
        };
        *slot = C64::from_polar(1.0, -dt * u / (2.0 * eps));
    }
    let mut kin = vec![C64::new(0.0, 0.0); grid.len()];
    let mut idx = vec![0usize; dim];
    for (flat, slot) in kin.iter_mut().enumerate() {
        grid.decode(flat, &mut idx);
        let k2: f64 = idx
            .iter()
            .map(|&j| {
                let k = fourier::wavenumber(j, npts, grid.dx());
                k * k
            })
            .sum();
        *slot = C64::from_polar(1.0, -dt * eps * k2 / 2.0);
    }

    let mut fns = state.eigenfunctions.clone();
    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    for step in 1..=steps {
        let drift = fns
            .par_iter_mut()
            .map(|f| {
                for (z, h) in f.data.iter_mut().zip(&half_pot) {
                    *z *= h;
                }
                let mut hat = f.forward_transform();
                for (z, k) in hat.data.iter_mut().zip(&kin) {
                    *z *= k;
                }
                *f = hat.inverse_transform();
                for (z, h) in f.data.iter_mut().zip(&half_pot) {
                    *z *= h;
                }
                (f.norm() - 1.0).abs()
            })
            .reduce(|| 0.0, f64::max);
        if drift > 1e-12 {
            return Err(LabError::AuditFailure(format!(
                "per-step unitarity drift {drift:.3e} at step {step}"
            )));
        }
        // boundary escape monitor on the weighted density
        let edge: f64 = state
            .weights
            .iter()
            .zip(&fns)
            .map(|(mu, f)| mu * f.boundary_mass_fraction(plan.boundary_band))
            .sum();
        if edge > plan.boundary_limit {
            return Err(LabError::BoundaryEscape {
                mass: edge,
                limit: plan.boundary_limit,
                t: step as f64 * dt,
            });
        }
        if step % plan.record_every == 0 || step == steps {
            times.push(step as f64 * dt);
            states.push(MixedState::new_unchecked(
                eps,
                grid,
                state.weights.clone(),
                fns.clone(),
                state.truncated_mass,
            ));
        }
    }
    Ok(StateSeries { times, states, dt })
}

/// One audited record time.
#[derive(Debug, Clone)]
pub struct AuditRow {
    pub t: f64,
    pub trace: f64,
    pub energy: f64,
    pub h2sum: f64,
    /// `int U_s^2 rho(x,x) dx`.
    pub c1: f64,
    /// `sum_j mu_j ||eps grad phi_j||^2`.
    pub c2: f64,
    pub husimi_sup: f64,
    /// `int |p|^2 Husimi`.
    pub p2moment: f64,
    /// Spectral norm of the Gram representation (propagated disop).
    pub gram_norm: f64,
}

/// Conservation audit over a propagated series.
#[derive(Debug, Clone)]
pub struct ConservationAudit {
    pub rows: Vec<AuditRow>,
    pub max_rel_drift_trace: f64,
    pub max_rel_drift_energy: f64,
    pub max_rel_drift_h2: f64,
    /// Ceiling `C/(2 pi)^n + 1e-8` from the initial disop constant.
    pub husimi_ceiling: f64,
    pub husimi_ok: bool,
    /// `int |p|^2 Husimi <= C2 + n/2 + tol` at every record.
    pub p2_ok: bool,
    pub gram_norm_max_dev: f64,
}

impl ConservationAudit {
    /// Fail with the worst offender named when a drift exceeds `tol`.
    pub fn check(&self, tol_cons: f64) -> Result<()> {
        if self.max_rel_drift_trace > 1e-10 {
            return Err(LabError::AuditFailure(format!(
                "trace drift {:.3e}",
                self.max_rel_drift_trace
            )));
        }
        let worst = [
            ("energy", self.max_rel_drift_energy),
            ("h2sum", self.max_rel_drift_h2),
        ];
        for (name, v) in worst {
            if v > tol_cons {
                return Err(LabError::AuditFailure(format!(
                    "{name} drift {v:.3e} exceeds {tol_cons:.1e}"
                )));
            }
        }
        if !self.husimi_ok {
            return Err(LabError::AuditFailure("husimi sup bound violated".into()));
        }
        if !self.p2_ok {
            return Err(LabError::AuditFailure("|p|^2 moment bound violated".into()));
        }
        Ok(())
    }
}

/// Audit trace, energy, `sum mu ||H phi||^2`, the a-priori quantities, the
/// Husimi sup bound and the `|p|^2` moment over a series.
///
/// `disop_c0` is the certified constant of the initial data; the Husimi sup
/// ceiling is `disop_c0/(2 pi)^n + 1e-8` at every recorded time.
pub fn conservation_audit(
    series: &StateSeries,
    potential: &PotentialSpec,
    disop_c0: f64,
) -> Result<ConservationAudit> {
    use crate::states::{observable_expectation, Observable};
    let n = series.states[0].dim() as f64;
    let ceiling = disop_c0 / (2.0 * PI).powf(n) + 1e-8;
    let mut rows = Vec::with_capacity(series.times.len());
    for (t, st) in series.times.iter().zip(&series.states) {
        let trace: f64 = st
            .weights
            .iter()
            .zip(&st.eigenfunctions)
            .map(|(mu, f)| mu * f.norm_sqr())
            .sum();
        let energy = observable_expectation(st, Observable::H, potential);
        let h2sum = observable_expectation(st, Observable::HSquaredVector, potential);
        let (c1, c2) = singular_moment(st, potential);
        let husimi_sup = husimi_sup_estimate(st)?;
        let (p2, _) = phase_space::husimi_p_moments(st);
        let gram_norm = st.spectral_norm()?;
        rows.push(AuditRow {
            t: *t,
            trace,
            energy,
            h2sum,
            c1,
            c2,
            husimi_sup,
            p2moment: p2,
            gram_norm,
        });
    }
    let r0 = &rows[0];
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let max_rel_drift_trace = rows
        .iter()
        .map(|r| rel(r.trace, r0.trace))
        .fold(0.0, f64::max);
    let max_rel_drift_energy = rows
        .iter()
        .map(|r| rel(r.energy, r0.energy))
        .fold(0.0, f64::max);
    let max_rel_drift_h2 = rows
        .iter()
        .map(|r| rel(r.h2sum, r0.h2sum))
        .fold(0.0, f64::max);
    let husimi_ok = rows.iter().all(|r| r.husimi_sup <= ceiling);
    let c2_bound = rows[0].c2 + n / 2.0 + 1e-8;
    let p2_ok = rows.iter().all(|r| r.p2moment <= c2_bound + 1e-6);
    let gram_norm_max_dev = rows
        .iter()
        .map(|r| (r.gram_norm - r0.gram_norm).abs())
        .fold(0.0, f64::max);
    Ok(ConservationAudit {
        rows,
        max_rel_drift_trace,
        max_rel_drift_energy,
        max_rel_drift_h2,
        husimi_ceiling: ceiling,
        husimi_ok,
        p2_ok,
        gram_norm_max_dev,
    })
}

/// Husimi sup: full-lattice for n = 1, coherent probe lattice for n >= 2.
pub fn husimi_sup_estimate(state: &MixedState) -> Result<f64> {
    if state.dim() == 1 {
        let w = phase_space::wigner(state)?;
        let h = phase_space::husimi_via_convolution(&w, state.eps)?;
        Ok(h.data.iter().cloned().fold(f64::MIN, f64::max))
    } else {
        // probe lattice over the bulk of the kernel diagonal
        let grid = state.grid;
        let l = grid.halfwidth();
        let per_axis = 5usize;
        let dim = state.dim();
        let total = per_axis.pow(2 * dim as u32);
        let vals: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut rest = flat;
                let mut x = vec![0.0; dim];
                let mut p = vec![0.0; dim];
                for slot in x.iter_mut().chain(p.iter_mut()) {
                    let i = rest % per_axis;
                    rest /= per_axis;
                    *slot = -0.6 * l + (i as f64 + 0.5) * 1.2 * l / per_axis as f64;
                }
                state.coherent_matrix_element(&x, &p)
            })
            .collect();
        Ok(vals.into_iter().fold(f64::MIN, f64::max))
    }
}

/// The two a-priori quantities: `int U_s^2 rho(x,x) dx` and
/// `sum_j mu_j ||eps grad phi_j||^2`.
pub fn singular_moment(state: &MixedState, potential: &PotentialSpec) -> (f64, f64) {
    let grid = state.grid;
    let dim = grid.dim();
    let mut c1 = 0.0;
    if potential.has_singular() {
        let diag = state.kernel_diagonal();
        let sset = potential.singular_set();
        let mut pos = vec![0.0; dim];
        for (flat, &v) in diag.data.iter().enumerate() {
            grid.position(flat, &mut pos);
            if sset.dist(&pos) == 0.0 {
                continue;
            }
            let us = potential.eval_singular(&pos);
            c1 += us * us * v;
        }
        c1 *= grid.cell_volume();
    }
    let c2: f64 = state
        .weights
        .par_iter()
        .zip(&state.eigenfunctions)
        .map(|(mu, f)| mu * 2.0 * kinetic_energy(f, state.eps))
        .sum();
    (c1, c2)
}
