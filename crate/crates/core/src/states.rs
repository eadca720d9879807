//! Mixed quantum states as finite-rank spectral decompositions, coherent
//! states, kernel access, traces and observable expectations.

use crate::error::{LabError, Result};
use crate::fourier;
use crate::gridcore::{ComplexField, RealField, SpaceGrid};
use crate::linalg;
use crate::potentials::PotentialSpec;
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Finite-rank density operator `rho = sum_j mu_j |phi_j><phi_j|`.
#[derive(Debug, Clone)]
pub struct MixedState {
    pub eps: f64,
    pub grid: SpaceGrid,
    pub weights: Vec<f64>,
    pub eigenfunctions: Vec<ComplexField>,
    /// Weight mass dropped when truncating an infinite decomposition.
    pub truncated_mass: f64,
}

pub const TRACE_TOL: f64 = 1e-10;
pub const ORTHO_TOL: f64 = 1e-8;

impl MixedState {
    /// Build and validate (trace one, positive weights, orthonormal basis).
    pub fn new(
        eps: f64,
        grid: SpaceGrid,
        weights: Vec<f64>,
        eigenfunctions: Vec<ComplexField>,
    ) -> Result<Self> {
        let state = Self::new_unchecked(eps, grid, weights, eigenfunctions, 0.0);
        state.validate()?;
        Ok(state)
    }

    pub fn new_unchecked(
        eps: f64,
        grid: SpaceGrid,
        weights: Vec<f64>,
        eigenfunctions: Vec<ComplexField>,
        truncated_mass: f64,
    ) -> Self {
        Self {
            eps,
            grid,
            weights,
            eigenfunctions,
            truncated_mass,
        }
    }

    /// Rank-1 state from a normalized wavefunction.
    pub fn pure(eps: f64, phi: ComplexField) -> Result<Self> {
        let grid = phi.grid;
        Self::new(eps, grid, vec![1.0], vec![phi])
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Check the construction invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(LabError::Parameter("state needs eps > 0".into()));
        }
        if self.weights.len() != self.eigenfunctions.len() || self.weights.is_empty() {
            return Err(LabError::Parameter("weights/eigenfunctions mismatch".into()));
        }
        if self.weights.iter().any(|&m| m < 0.0) {
            return Err(LabError::Parameter("negative weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(LabError::Parameter(format!(
                "weights sum to {sum}, not 1 within {TRACE_TOL:.0e}"
            )));
        }
        for f in &self.eigenfunctions {
            if !f.grid.same_lattice(&self.grid) {
                return Err(LabError::GridMismatch("eigenfunction grid".into()));
            }
        }
        let j = self.rank();
        let worst = (0..j)
            .into_par_iter()
            .map(|a| {
                let mut w: f64 = 0.0;
                for b in a..j {
                    let g = self.eigenfunctions[a].inner(&self.eigenfunctions[b]);
                    let want = if a == b { 1.0 } else { 0.0 };
                    w = w.max((g - want).norm());
                }
                w
            })
            .reduce(|| 0.0, f64::max);
        if worst > ORTHO_TOL {
            return Err(LabError::Parameter(format!(
                "eigenbasis not orthonormal: worst Gram deviation {worst:.3e}"
            )));
        }
        Ok(())
    }

    /// `tr(rho)` as the weight sum, cross-checked against the quadrature of
    /// the kernel diagonal; the two must agree within 1e-8.
    pub fn trace(&self) -> Result<f64> {
        let by_weights: f64 = self.weights.iter().sum();
        let by_kernel = self.kernel_diagonal().quadrature();
        if (by_weights - by_kernel).abs() > 1e-8 {
            return Err(LabError::Resolution(format!(
                "trace cross-check: weights {by_weights} vs kernel diagonal {by_kernel}"
            )));
        }
        Ok(by_weights)
    }

    /// `rho(x,x) = sum_j mu_j |phi_j(x)|^2` (nonnegative).
    pub fn kernel_diagonal(&self) -> RealField {
        let mut out = RealField::zeros(self.grid);
        for (mu, f) in self.weights.iter().zip(&self.eigenfunctions) {
            for (slot, z) in out.data.iter_mut().zip(&f.data) {
                *slot += mu * z.norm_sqr();
            }
        }
        out
    }

    /// Husimi value at one phase-space point: squared overlaps with the
    /// unit-norm coherent probe, weighted `(2 pi eps)^{-n}`. Always >= 0.
    pub fn coherent_matrix_element(&self, x: &[f64], p: &[f64]) -> f64 {
        let probe = CoherentState::new(x.to_vec(), p.to_vec(), self.eps).field(self.grid);
        let scale = (2.0 * PI * self.eps).powi(-(self.dim() as i32));
        let s: f64 = self
            .weights
            .iter()
            .zip(&self.eigenfunctions)
            .map(|(mu, f)| mu * probe.inner(f).norm_sqr())
            .sum();
        scale * s
    }

    /// Spectral norm of `rho` over the span of the eigenbasis via the
    /// weighted Gram matrix (exact for finite rank).
    pub fn spectral_norm(&self) -> Result<f64> {
        let j = self.rank();
        let mut gram = vec![C64::new(0.0, 0.0); j * j];
        for a in 0..j {
            for b in a..j {
                let g = self.eigenfunctions[a].inner(&self.eigenfunctions[b])
                    * (self.weights[a] * self.weights[b]).sqrt();
                gram[a * j + b] = g;
                gram[b * j + a] = g.conj();
            }
        }
        linalg::spectral_norm_hermitian(&gram, j)
    }

    /// Quadratic form `<psi, rho psi> = sum_j mu_j |<phi_j, psi>|^2`.
    pub fn quadratic_form(&self, psi: &ComplexField) -> f64 {
        self.weights
            .iter()
            .zip(&self.eigenfunctions)
            .map(|(mu, f)| mu * f.inner(psi).norm_sqr())
            .sum()
    }
}

/// Minimal-uncertainty Gaussian wave packet centered at `(x, p)`.
///
/// Phase convention `e^{+i p.y/eps}` so the packet's momentum expectation is
/// `+p` under the Wigner convention used here (dual-route Husimi agreement
/// pins this sign).
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub center_x: Vec<f64>,
    pub center_p: Vec<f64>,
    pub eps: f64,
}

impl CoherentState {
    pub fn new(center_x: Vec<f64>, center_p: Vec<f64>, eps: f64) -> Self {
        Self {
            center_x,
            center_p,
            eps,
        }
    }

    /// Rasterize on a grid; unit L2 norm on a resolving grid.
    pub fn field(&self, grid: SpaceGrid) -> ComplexField {
        let n = grid.dim();
        let eps = self.eps;
        let norm = (PI * eps).powf(-(n as f64) / 4.0);
        ComplexField::from_fn(grid, |y| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..n {
                let d = self.center_x[a] - y[a];
                r2 += d * d;
                phase += self.center_p[a] * y[a];
            }
            C64::from_polar(norm * (-r2 / (2.0 * eps)).exp(), phase / eps)
        })
    }
}

/// Observables with dedicated expectation routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Kinetic,
    Potential,
    H,
    /// `sum_j mu_j ||H phi_j||^2`, computed without forming `H^2`.
    HSquaredVector,
}

/// Apply `H_eps = -(eps^2/2) Lap + U` to a wavefunction (spectral Laplacian).
pub fn apply_hamiltonian(
    phi: &ComplexField,
    eps: f64,
    potential: &PotentialSpec,
) -> ComplexField {
    let grid = phi.grid;
    let n = grid.dim();
    let npts = grid.points();
    let mut hat = phi.forward_transform();
    let mut idx = vec![0usize; n];
    for (flat, z) in hat.data.iter_mut().enumerate() {
        grid.decode(flat, &mut idx);
        let k2: f64 = idx
            .iter()
            .map(|&j| {
                let k = fourier::wavenumber(j, npts, grid.dx());
                k * k
            })
            .sum();
        *z *= eps * eps * k2 / 2.0;
    }
    let mut out = hat.inverse_transform();
    let mut pos = vec![0.0; n];
    for (flat, z) in out.data.iter_mut().enumerate() {
        grid.position(flat, &mut pos);
        let u = potential.eval_rough(&pos) + potential.eval_singular(&pos);
        *z += phi.data[flat] * u;
    }
    out
}

/// Kinetic energy `||eps grad phi||^2 / 2` of one wavefunction.
pub fn kinetic_energy(phi: &ComplexField, eps: f64) -> f64 {
    let grid = phi.grid;
    let n = grid.dim();
    let npts = grid.points();
    let hat = phi.forward_transform();
    let dk = 2.0 * PI / (npts as f64 * grid.dx());
    let mut idx = vec![0usize; n];
    let mut acc = 0.0;
    for (flat, z) in hat.data.iter().enumerate() {
        grid.decode(flat, &mut idx);
        let k2: f64 = idx
            .iter()
            .map(|&j| {
                let k = fourier::wavenumber(j, npts, grid.dx());
                k * k
            })
            .sum();
        acc += eps * eps * k2 / 2.0 * z.norm_sqr();
    }
    acc * dk.powi(n as i32)
}

/// Expectation of an observable in a mixed state.
///
/// Grid points that fall exactly on the singular set are excluded from the
/// potential quadrature (a set of measure zero; staggered grids avoid it by
/// construction). The count of excluded points is returned alongside.
pub fn observable_expectation_detailed(
    state: &MixedState,
    obs: Observable,
    potential: &PotentialSpec,
) -> (f64, usize) {
    let grid = state.grid;
    let n = grid.dim();
    let sset = potential.singular_set();
    let mut excluded = 0usize;
    let mut upts = vec![0.0; grid.len()];
    let mut pos = vec![0.0; n];
    for (flat, slot) in upts.iter_mut().enumerate() {
        grid.position(flat, &mut pos);
        if !sset.is_empty() && sset.dist(&pos) == 0.0 {
            excluded += 1;
            *slot = 0.0;
            continue;
        }
        *slot = potential.eval_rough(&pos) + potential.eval_singular(&pos);
    }
    let cell = grid.cell_volume();
    let value = match obs {
        Observable::Kinetic => state
            .weights
            .par_iter()
            .zip(&state.eigenfunctions)
            .map(|(mu, f)| mu * kinetic_energy(f, state.eps))
            .sum(),
        Observable::Potential => state
            .weights
            .iter()
            .zip(&state.eigenfunctions)
            .map(|(mu, f)| {
                mu * f
                    .data
                    .iter()
                    .zip(&upts)
                    .map(|(z, &u)| z.norm_sqr() * u)
                    .sum::<f64>()
                    * cell
            })
            .sum(),
        Observable::H => {
            let (k, _) = observable_expectation_detailed(state, Observable::Kinetic, potential);
            let (p, e) = observable_expectation_detailed(state, Observable::Potential, potential);
            excluded = e;
            k + p
        }
        Observable::HSquaredVector => state
            .weights
            .par_iter()
            .zip(&state.eigenfunctions)
            .map(|(mu, f)| {
                let hf = apply_hamiltonian(f, state.eps, potential);
                mu * hf.norm_sqr()
            })
            .sum(),
    };
    (value, excluded)
}

pub fn observable_expectation(
    state: &MixedState,
    obs: Observable,
    potential: &PotentialSpec,
) -> f64 {
    observable_expectation_detailed(state, obs, potential).0
}

/// Empirical certificate for the operator bound `rho / eps^n <= C Id`.
#[derive(Debug, Clone)]
pub struct DisopCertificate {
    /// Exact finite-rank constant: spectral norm of `rho` over `eps^n`.
    pub constant: f64,
    /// Largest quadratic form over the random probes, scaled by `eps^-n`.
    pub sampled_max: f64,
    pub probes: usize,
}

/// Certify the operator bound by the exact Gram spectral norm plus randomized
/// quadratic-form sampling (random unit vectors and coherent probes).
pub fn disop_certificate(state: &MixedState, probes: usize, seed: u64) -> Result<DisopCertificate> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let epsn = state.eps.powi(state.dim() as i32);
    let constant = state.spectral_norm()? / epsn;
    let mut sampled: f64 = 0.0;
    let l = state.grid.halfwidth();
    for trial in 0..probes {
        let psi = if trial % 2 == 0 {
            // random smooth unit vector from a few coherent bumps
            let mut f = ComplexField::zeros(state.grid);
            for _ in 0..4 {
                let cx: Vec<f64> = (0..state.dim())
                    .map(|_| rng.gen_range(-0.4 * l..0.4 * l))
                    .collect();
                let cp: Vec<f64> = (0..state.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let b = CoherentState::new(cx, cp, state.eps).field(state.grid);
                for (slot, z) in f.data.iter_mut().zip(&b.data) {
                    *slot += c * z;
                }
            }
            let nrm = f.norm();
            f.scale(1.0 / nrm);
            f
        } else {
            let cx: Vec<f64> = (0..state.dim())
                .map(|_| rng.gen_range(-0.5 * l..0.5 * l))
                .collect();
            let cp: Vec<f64> = (0..state.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            CoherentState::new(cx, cp, state.eps).field(state.grid)
        };
        sampled = sampled.max(state.quadratic_form(&psi) / epsn);
    }
    if sampled > constant + 1e-10 {
        return Err(LabError::AuditFailure(format!(
            "disop sampling exceeded the Gram constant: {sampled} > {constant}"
        )));
    }
    Ok(DisopCertificate {
        constant,
        sampled_max: sampled,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::RoughPotential;

    fn grid1() -> SpaceGrid {
        SpaceGrid::new(1, 512, 8.0).unwrap()
    }

    #[test]
    fn coherent_state_normalized() {
        for eps in [0.5, 0.25, 0.1] {
            let f = CoherentState::new(vec![0.7], vec![-0.4], eps).field(grid1());
            assert!((f.norm() - 1.0).abs() < 1e-10, "eps={eps}");
        }
    }

    #[test]
    fn trace_pure_and_two_term() {
        let eps = 0.25;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
        let s = MixedState::pure(eps, f).unwrap();
        assert!((s.trace().unwrap() - 1.0).abs() < 1e-10);

        let a = CoherentState::new(vec![-2.5], vec![0.0], eps).field(grid1());
        let b = CoherentState::new(vec![2.5], vec![0.0], eps).field(grid1());
        let s = MixedState::new(eps, grid1(), vec![0.3, 0.7], vec![a, b]).unwrap();
        assert!((s.trace().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_diagonal_linearity_and_integral() {
        let eps = 0.25;
        let a = CoherentState::new(vec![-2.5], vec![0.0], eps).field(grid1());
        let b = CoherentState::new(vec![2.5], vec![0.0], eps).field(grid1());
        let s = MixedState::new(eps, grid1(), vec![0.3, 0.7], vec![a.clone(), b.clone()]).unwrap();
        let d = s.kernel_diagonal();
        assert!(d.data.iter().all(|&v| v >= 0.0));
        let worst = d
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| (v - 0.3 * a.data[i].norm_sqr() - 0.7 * b.data[i].norm_sqr()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-14);
        assert!((d.quadrature() - s.trace().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn coherent_element_far_probe_vanishes() {
        let eps = 0.25;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
        let s = MixedState::pure(eps, f).unwrap();
        let v = s.coherent_matrix_element(&[6.0], &[0.0]);
        assert!(v.abs() < 1e-12);
        assert!(v >= -1e-12);
    }

    #[test]
    fn coherent_element_mixture_linearity() {
        let eps = 0.25;
        let a = CoherentState::new(vec![-2.5], vec![0.3], eps).field(grid1());
        let b = CoherentState::new(vec![2.5], vec![-0.2], eps).field(grid1());
        let sa = MixedState::pure(eps, a.clone()).unwrap();
        let sb = MixedState::pure(eps, b.clone()).unwrap();
        let alpha = 0.3;
        let s = MixedState::new(eps, grid1(), vec![alpha, 1.0 - alpha], vec![a, b]).unwrap();
        let (x, p) = ([0.4], [0.1]);
        let lhs = s.coherent_matrix_element(&x, &p);
        let rhs = alpha * sa.coherent_matrix_element(&x, &p)
            + (1.0 - alpha) * sb.coherent_matrix_element(&x, &p);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn harmonic_ground_energy() {
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
        for eps in [0.25, 0.1] {
            let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
            let s = MixedState::pure(eps, f).unwrap();
            let h = observable_expectation(&s, Observable::H, &pot);
            assert!((h - eps / 2.0).abs() < 2e-3 * eps, "eps={eps}: {h}");
        }
    }

    #[test]
    fn free_kinetic_approaches_classical() {
        // plane-wave-modulated Gaussian: kinetic = w^2/2 + eps/4 exactly
        let pot = PotentialSpec::free(1);
        let w = 1.2;
        for eps in [0.1, 0.05] {
            let f = CoherentState::new(vec![0.0], vec![w], eps).field(grid1());
            let s = MixedState::pure(eps, f).unwrap();
            let k = observable_expectation(&s, Observable::Kinetic, &pot);
            assert!((k - (w * w / 2.0 + eps / 4.0)).abs() < 1e-8, "eps={eps}");
            assert!((k - w * w / 2.0).abs() < 0.3 * eps);
        }
    }

    #[test]
    fn bounded_potential_bound() {
        let pot = PotentialSpec::rough_only(
            1,
            RoughPotential::SmoothedWell {
                depth: 0.7,
                width: 1.0,
                center: 0.0,
            },
        );
        let eps = 0.25;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
        let s = MixedState::pure(eps, f).unwrap();
        let h = observable_expectation(&s, Observable::H, &pot);
        let k = observable_expectation(&s, Observable::Kinetic, &pot);
        assert!(h <= k + 0.7 + 1e-12);
        assert!(h >= k - 0.7 - 1e-12);
    }

    #[test]
    fn h_squared_vector_on_ground_state() {
        // H phi0 = (eps/2) phi0 for the harmonic ground state
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
        let eps = 0.25;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
        let s = MixedState::pure(eps, f).unwrap();
        let h2 = observable_expectation(&s, Observable::HSquaredVector, &pot);
        assert!((h2 - eps * eps / 4.0).abs() < 1e-5, "{h2}");
    }

    #[test]
    fn disop_certificate_rank_one() {
        let eps = 0.25;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
        let s = MixedState::pure(eps, f).unwrap();
        let cert = disop_certificate(&s, 100, 7).unwrap();
        // rank-1 spectral norm is 1, so C = eps^{-n}
        assert!((cert.constant - 1.0 / eps).abs() < 1e-8);
        assert!(cert.sampled_max <= cert.constant + 1e-10);
    }

    #[test]
    fn rejects_invalid_states() {
        let eps = 0.25;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid1());
        assert!(MixedState::new(eps, grid1(), vec![0.5], vec![f.clone()]).is_err());
        let g = CoherentState::new(vec![0.1], vec![0.0], eps).field(grid1());
        assert!(MixedState::new(eps, grid1(), vec![0.5, 0.5], vec![f, g]).is_err());
    }
}
