//! Initial-data factories: Hermite band mixtures and Toplitz (anti-Wick)
//! coherent averages, plus validators for the hypotheses the convergence
//! theorem needs from the data.

use crate::error::{LabError, Result};
use crate::gridcore::{ComplexField, SpaceGrid};
use crate::linalg;
use crate::potentials::PotentialSpec;
use crate::states::{observable_expectation, MixedState, Observable};
#[cfg(test)]
use crate::states::CoherentState;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Orthonormal eps-scaled Hermite functions `psi_0 .. psi_jmax` by the
/// stable three-term recurrence on normalized functions.
pub fn hermite_functions(eps: f64, jmax: usize, grid: SpaceGrid) -> Result<Vec<ComplexField>> {
    if grid.dim() != 1 {
        return Err(LabError::Unsupported("Hermite factory is 1-D".into()));
    }
    if !(eps > 0.0) {
        return Err(LabError::Parameter("eps must be positive".into()));
    }
    let n = grid.points();
    let sq = eps.sqrt();
    let scale = eps.powf(-0.25);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut cur: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let xi = grid.coord(i) / sq;
        prev.push(scale * (-xi * xi / 2.0).exp() / PI.powf(0.25));
    }
    let mut out = Vec::with_capacity(jmax + 1);
    out.push(to_complex(grid, &prev));
    if jmax >= 1 {
        for i in 0..n {
            let xi = grid.coord(i) / sq;
            cur.push(2f64.sqrt() * xi * prev[i]);
        }
        out.push(to_complex(grid, &cur));
        for j in 1..jmax {
            let jf = j as f64;
            let a = (2.0 / (jf + 1.0)).sqrt();
            let b = (jf / (jf + 1.0)).sqrt();
            let mut next = Vec::with_capacity(n);
            for i in 0..n {
                let xi = grid.coord(i) / sq;
                next.push(a * xi * cur[i] - b * prev[i]);
            }
            prev = std::mem::replace(&mut cur, next);
            out.push(to_complex(grid, &cur));
        }
    }
    Ok(out)
}

fn to_complex(grid: SpaceGrid, vals: &[f64]) -> ComplexField {
    ComplexField {
        grid,
        data: vals.iter().map(|&v| C64::new(v, 0.0)).collect(),
    }
}

/// Weight rule over Hermite levels.
///
/// A uniform band centered at level `a/eps` concentrates, as `eps -> 0`, on
/// the classical shell `x^2 + p^2 = 2a` (the oscillator orbit of energy `a`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HermiteWeightRule {
    /// `j in [(a - w)/eps, (a + w)/eps]` with equal weights.
    UniformBand { center: f64, halfwidth: f64 },
    /// Same band with a smooth bump profile over `j eps`.
    SmoothedBand { center: f64, halfwidth: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermiteSpec {
    pub eps: f64,
    pub rule: HermiteWeightRule,
}

/// Numbers recorded while building a Hermite mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermiteBuildReport {
    pub j_min: usize,
    pub j_max: usize,
    /// `max_j mu_j / eps` (the Prop-herm constant `C`).
    pub weight_over_eps: f64,
    /// `eps^2 sum_j mu_j j^2`.
    pub level_second_moment: f64,
    /// Largest turning point `sqrt(eps (2 j_max + 1))`.
    pub turning_point: f64,
}

/// Build the Hermite band mixture on `grid` (1-D).
pub fn build_hermite(spec: &HermiteSpec, grid: SpaceGrid) -> Result<(MixedState, HermiteBuildReport)> {
    let (center, halfwidth, smoothed) = match spec.rule {
        HermiteWeightRule::UniformBand { center, halfwidth } => (center, halfwidth, false),
        HermiteWeightRule::SmoothedBand { center, halfwidth } => (center, halfwidth, true),
    };
    if !(center > 0.0) || !(halfwidth > 0.0) || halfwidth >= center {
        return Err(LabError::Parameter(
            "band needs 0 < halfwidth < center".into(),
        ));
    }
    let eps = spec.eps;
    let j_min = ((center - halfwidth) / eps).floor().max(0.0) as usize;
    let j_max = ((center + halfwidth) / eps).ceil() as usize;
    let turning = (eps * (2.0 * j_max as f64 + 1.0)).sqrt();
    if turning > 0.8 * grid.halfwidth() {
        return Err(LabError::Resolution(format!(
            "turning point {turning:.3} exceeds 0.8 L = {:.3}; enlarge the box",
            0.8 * grid.halfwidth()
        )));
    }
    let fns = hermite_functions(eps, j_max, grid)?;
    let mut weights: Vec<f64> = (j_min..=j_max)
        .map(|j| {
            if smoothed {
                let t = (j as f64 * eps - center) / halfwidth;
                if t.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            } else {
                1.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let eigenfunctions: Vec<ComplexField> = fns[j_min..=j_max].to_vec();
    let report = HermiteBuildReport {
        j_min,
        j_max,
        weight_over_eps: weights.iter().cloned().fold(0.0, f64::max) / eps,
        level_second_moment: eps
            * eps
            * weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * ((j_min + k) as f64).powi(2))
                .sum::<f64>(),
        turning_point: turning,
    };
    let state = MixedState::new(eps, grid, weights, eigenfunctions)?;
    Ok((state, report))
}

/// Window profile for the Toplitz construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "window", rename_all = "snake_case")]
pub enum WindowProfile {
    /// Standard Gaussian window.
    Gaussian,
}

/// Phase-space symbol catalog for `chi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "chi", rename_all = "snake_case")]
pub enum ChiDensity {
    /// Smooth compactly supported bump centered at `(q0, w0)` in
    /// (position, momentum), radius `radius`, normalized to unit mass.
    Bump { q0: f64, w0: f64, radius: f64 },
}

impl ChiDensity {
    fn profile(&self, w: f64, q: f64) -> f64 {
        match self {
            Self::Bump { q0, w0, radius } => {
                let s2 = ((w - w0) * (w - w0) + (q - q0) * (q - q0)) / (radius * radius);
                if s2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - s2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Normalization constant (radial quadrature of the catalog bump).
    pub fn mass_constant(&self) -> f64 {
        match self {
            Self::Bump { radius, .. } => {
                let m = 4000;
                let mut acc = 0.0;
                for i in 0..m {
                    let r = (i as f64 + 0.5) / m as f64;
                    acc += (1.0 - 1.0 / (1.0 - r * r)).exp() * r / m as f64;
                }
                2.0 * PI * radius * radius * acc
            }
        }
    }

    /// Normalized density at `(w, q)` (momentum, position).
    pub fn eval(&self, w: f64, q: f64, mass_constant: f64) -> f64 {
        self.profile(w, q) / mass_constant
    }

    pub fn sup(&self, mass_constant: f64) -> f64 {
        match self {
            Self::Bump { .. } => 1.0 / mass_constant,
        }
    }

    /// Support box `(w_lo, w_hi, q_lo, q_hi)`.
    pub fn support(&self) -> (f64, f64, f64, f64) {
        match self {
            Self::Bump { q0, w0, radius } => (w0 - radius, w0 + radius, q0 - radius, q0 + radius),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToeplitzSpec {
    pub eps: f64,
    /// Window width exponent: `varsigma = eps^alpha`, `alpha in (0,1)`.
    pub alpha: f64,
    pub window: WindowProfile,
    pub chi: ChiDensity,
    /// `(w,q)` lattice spacing in units of `sqrt(eps)` (default 0.5).
    pub lattice_factor: f64,
}

impl ToeplitzSpec {
    pub fn standard(eps: f64, chi: ChiDensity) -> Self {
        Self {
            eps,
            alpha: 0.5,
            window: WindowProfile::Gaussian,
            chi,
            lattice_factor: 0.5,
        }
    }
}

/// Numbers recorded while assembling the Toplitz state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToeplitzBuildReport {
    /// Raw lattice quadrature of `chi` minus one (coarseness gauge).
    pub raw_trace_deviation: f64,
    /// Coherent cells kept.
    pub cells: usize,
    /// Final spectral rank.
    pub rank: usize,
    pub truncated_mass: f64,
    pub top_eigenvalue: f64,
    /// `sup chi * (2 pi eps)^n` (the linfini ceiling for the top eigenvalue).
    pub linfini_bound: f64,
    pub sup_chi: f64,
    /// `int chi (|w|^4 + dist(q,S)^{-2})`; the distance part is skipped (and
    /// flagged vacuous) when the potential has no singular set.
    pub fourth_moment_integral: f64,
    pub distance_term_vacuous: bool,
}

/// Window function `psi_{w,q}` on the grid.
fn toeplitz_window(grid: SpaceGrid, eps: f64, sigma: f64, w: f64, q: f64) -> ComplexField {
    let norm = sigma.powf(-0.5) * PI.powf(-0.25);
    ComplexField::from_fn(grid, |y| {
        let t = (y[0] - q) / sigma;
        C64::from_polar(norm * (-t * t / 2.0).exp(), w * y[0] / eps)
    })
}

/// Build the Toplitz state: discretize the coherent average on a `(w,q)`
/// lattice, then re-orthogonalize into spectral form through the weighted
/// Gram matrix.
pub fn build_toeplitz(
    spec: &ToeplitzSpec,
    grid: SpaceGrid,
    potential: Option<&PotentialSpec>,
) -> Result<(MixedState, ToeplitzBuildReport)> {
    if grid.dim() != 1 {
        return Err(LabError::Unsupported("Toplitz factory is 1-D here".into()));
    }
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(LabError::Parameter("alpha must lie in (0,1)".into()));
    }
    let eps = spec.eps;
    let sigma = eps.powf(spec.alpha);
    let spacing = spec.lattice_factor * eps.sqrt();
    let mass_c = spec.chi.mass_constant();
    let (wlo, whi, qlo, qhi) = spec.chi.support();

    // lattice of coherent cells with midpoint weights
    let nw = ((whi - wlo) / spacing).ceil() as usize + 1;
    let nq = ((qhi - qlo) / spacing).ceil() as usize + 1;
    let mut centers = Vec::new();
    let mut cweights = Vec::new();
    let cell = spacing * spacing;
    for a in 0..nw {
        let w = wlo + (a as f64 + 0.5) * spacing;
        for b in 0..nq {
            let q = qlo + (b as f64 + 0.5) * spacing;
            let c = spec.chi.eval(w, q, mass_c) * cell;
            if c > 1e-16 {
                centers.push((w, q));
                cweights.push(c);
            }
        }
    }
    let raw: f64 = cweights.iter().sum();
    let raw_dev = raw - 1.0;
    if raw_dev.abs() > 1e-6 {
        return Err(LabError::LatticeTooCoarse(format!(
            "chi lattice quadrature off by {raw_dev:.3e}; halve the lattice factor \
             (currently {})",
            spec.lattice_factor
        )));
    }
    for c in &mut cweights {
        *c /= raw;
    }

    let r = centers.len();
    let windows: Vec<ComplexField> = centers
        .iter()
        .map(|&(w, q)| toeplitz_window(grid, eps, sigma, w, q))
        .collect();
    // B = C^{1/2} Gram C^{1/2}
    let mut b = vec![C64::new(0.0, 0.0); r * r];
    for i in 0..r {
        for j in i..r {
            let g = windows[i].inner(&windows[j]) * (cweights[i] * cweights[j]).sqrt();
            b[i * r + j] = g;
            b[j * r + i] = g.conj();
        }
    }
    let eig = linalg::hermitian_eigen(&b, r)?;
    let total: f64 = eig.values.iter().filter(|v| **v > 0.0).sum();
    let mut kept = 0usize;
    let mut acc = 0.0;
    for &v in &eig.values {
        if v <= 0.0 {
            break;
        }
        acc += v;
        kept += 1;
        if (total - acc) / total < 1e-8 {
            break;
        }
    }
    if kept == 0 {
        return Err(LabError::Parameter("Toplitz build produced no spectrum".into()));
    }
    let truncated_mass = (total - acc) / total;
    let kept_sum: f64 = eig.values[..kept].iter().sum();
    let weights: Vec<f64> = eig.values[..kept].iter().map(|v| v / kept_sum).collect();
    // phi_k = sum_r sqrt(c_r) V_{rk} psi_r / sqrt(lambda_k)
    let mut eigenfunctions = Vec::with_capacity(kept);
    for k in 0..kept {
        let lam = eig.values[k];
        let mut f = ComplexField::zeros(grid);
        for (ri, win) in windows.iter().enumerate() {
            let coef = eig.vectors[k][ri] * cweights[ri].sqrt() / lam.sqrt();
            for (slot, z) in f.data.iter_mut().zip(&win.data) {
                *slot += coef * z;
            }
        }
        eigenfunctions.push(f);
    }

    let sup_chi = spec.chi.sup(mass_c);
    let linfini = sup_chi * (2.0 * PI * eps).powi(grid.dim() as i32);
    let top = eig.values[0];
    if top > linfini * (1.0 + 1e-6) {
        return Err(LabError::AuditFailure(format!(
            "top eigenvalue {top:.6e} exceeds the linfini ceiling {linfini:.6e}"
        )));
    }

    // Prop-top third bullet: int chi (|w|^4 + dist(q,S)^{-2})
    let (mut moment, mut vacuous) = (0.0, true);
    let fine = 400usize;
    let dq = (qhi - qlo) / fine as f64;
    let dw = (whi - wlo) / fine as f64;
    let sset = potential.map(|p| p.singular_set());
    for a in 0..fine {
        let w = wlo + (a as f64 + 0.5) * dw;
        for bq in 0..fine {
            let q = qlo + (bq as f64 + 0.5) * dq;
            let c = spec.chi.eval(w, q, mass_c);
            if c == 0.0 {
                continue;
            }
            let mut term = w.powi(4);
            if let Some(ss) = &sset {
                if !ss.is_empty() {
                    vacuous = false;
                    let d = ss.dist(&[q]);
                    term += 1.0 / (d * d);
                }
            }
            moment += c * term * dw * dq;
        }
    }

    let report = ToeplitzBuildReport {
        raw_trace_deviation: raw_dev,
        cells: r,
        rank: kept,
        truncated_mass,
        top_eigenvalue: top,
        linfini_bound: linfini,
        sup_chi,
        fourth_moment_integral: moment,
        distance_term_vacuous: vacuous,
    };
    let state = MixedState::new_unchecked(eps, grid, weights, eigenfunctions, truncated_mass);
    state.validate()?;
    Ok((state, report))
}

/// Apply the discretized resolution of identity
/// `(cell/eps^n) sum_r |psi_r><psi_r|` to `probe` and report the relative
/// L2 error against `(2 pi)^n probe`.
pub fn resolution_of_identity_error(
    eps: f64,
    alpha: f64,
    grid: SpaceGrid,
    lattice_factor: f64,
    lattice_halfwidth_w: f64,
    lattice_halfwidth_q: f64,
    probe: &ComplexField,
) -> Result<f64> {
    let sigma = eps.powf(alpha);
    let spacing = lattice_factor * eps.sqrt();
    let nw = (2.0 * lattice_halfwidth_w / spacing).ceil() as usize;
    let nq = (2.0 * lattice_halfwidth_q / spacing).ceil() as usize;
    let cell = spacing * spacing;
    let mut acc = ComplexField::zeros(grid);
    for a in 0..nw {
        let w = -lattice_halfwidth_w + (a as f64 + 0.5) * spacing;
        for b in 0..nq {
            let q = -lattice_halfwidth_q + (b as f64 + 0.5) * spacing;
            let win = toeplitz_window(grid, eps, sigma, w, q);
            let ov = win.inner(probe);
            for (slot, z) in acc.data.iter_mut().zip(&win.data) {
                *slot += ov * z;
            }
        }
    }
    let scale = cell / eps;
    let target = 2.0 * PI;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, v) in acc.data.iter().zip(&probe.data) {
        let d = a * scale - v * target;
        num += d.norm_sqr();
        den += (v * target).norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Report from [`validate_assumptions`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `sum_j mu_j ||H phi_j||^2`.
    pub hyp_h2: f64,
    /// Operator-bound constant `C` (spectral norm of `rho` over `eps^n`).
    pub disop_constant: f64,
    /// Husimi mass outside the centered box of half-width `R`, per `R`.
    pub tightness: Vec<(f64, f64)>,
    /// Weight mass truncated at construction.
    pub truncated_mass: f64,
    pub pass_h2: bool,
    pub pass_disop: bool,
    pub pass_tightness: bool,
    pub pass: bool,
}

/// Thresholds the validator checks against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionThresholds {
    /// Ceiling for the disop constant `C`.
    pub c_max: f64,
    /// Ceiling for the hypH2 sum.
    pub h2_max: f64,
    /// Required tail mass at the largest probed `R`.
    pub tail_max: f64,
}

impl Default for AssumptionThresholds {
    fn default() -> Self {
        Self {
            c_max: 2.0,
            h2_max: 10.0,
            tail_max: 1e-6,
        }
    }
}

/// Check the initial-data hypotheses: finite `sum mu ||H phi||^2`, operator
/// bound with recorded constant, and spatial/momentum tightness of the
/// Husimi measure.
pub fn validate_assumptions(
    state: &MixedState,
    potential: &PotentialSpec,
    radii: &[f64],
    thresholds: &AssumptionThresholds,
) -> Result<AssumptionReport> {
    let h2 = observable_expectation(state, Observable::HSquaredVector, potential);
    let c = state.spectral_norm()? / state.eps.powi(state.dim() as i32);
    let tight = crate::residuals::tightness_profile_state(state, radii)?;
    let pass_h2 = h2.is_finite() && h2 <= thresholds.h2_max;
    let pass_disop = c <= thresholds.c_max;
    let tail = tight.last().map(|&(_, m)| m).unwrap_or(1.0);
    let pass_tightness = tail <= thresholds.tail_max;
    Ok(AssumptionReport {
        hyp_h2: h2,
        disop_constant: c,
        tightness: tight,
        truncated_mass: state.truncated_mass,
        pass_h2,
        pass_disop,
        pass_tightness,
        pass: pass_h2 && pass_disop && pass_tightness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space;

    #[test]
    fn hermite_orthonormal_gram() {
        let grid = SpaceGrid::new(1, 512, 8.0).unwrap();
        let eps = 0.25;
        let fns = hermite_functions(eps, 12, grid).unwrap();
        for a in 0..=12 {
            for b in a..=12 {
                let g = fns[a].inner(&fns[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - want).norm() < 1e-8, "gram ({a},{b}) = {g}");
            }
        }
    }

    #[test]
    fn hermite_recurrence_stable_to_high_order() {
        // ||psi_j|| = 1 +- 1e-10 up to j = 2000 at eps = 0.01
        let grid = SpaceGrid::new(1, 8192, 8.0).unwrap();
        let fns = hermite_functions(0.01, 2000, grid).unwrap();
        for j in [0usize, 1, 10, 500, 1000, 2000] {
            let n = fns[j].norm();
            assert!((n - 1.0).abs() < 1e-10, "j={j}: norm {n}");
        }
    }

    #[test]
    fn hermite_functions_are_oscillator_eigenstates() {
        use crate::potentials::RoughPotential;
        let grid = SpaceGrid::new(1, 512, 8.0).unwrap();
        let eps = 0.25;
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
        let fns = hermite_functions(eps, 6, grid).unwrap();
        for j in [0usize, 3, 6] {
            let s = MixedState::pure(eps, fns[j].clone()).unwrap();
            let h = observable_expectation(&s, Observable::H, &pot);
            let want = eps * (j as f64 + 0.5);
            assert!((h - want).abs() < 1e-8, "j={j}: {h} vs {want}");
        }
    }

    #[test]
    fn build_hermite_band_and_report() {
        let grid = SpaceGrid::new(1, 1024, 4.0).unwrap();
        let spec = HermiteSpec {
            eps: 0.04,
            rule: HermiteWeightRule::UniformBand {
                center: 0.5,
                halfwidth: 0.05,
            },
        };
        let (state, rep) = build_hermite(&spec, grid).unwrap();
        assert!((state.trace().unwrap() - 1.0).abs() < 1e-10);
        // uniform weights: mu = eps/(2 w + eps) -> C = mu/eps ~ 1/(2w)
        assert!(rep.weight_over_eps <= 1.0 / (2.0 * 0.05) * 1.5);
        assert!((rep.level_second_moment - 0.25).abs() < 0.05);
        // a band too large for the box is rejected
        let bad = HermiteSpec {
            eps: 0.04,
            rule: HermiteWeightRule::UniformBand {
                center: 6.0,
                halfwidth: 0.05,
            },
        };
        assert!(build_hermite(&bad, grid).is_err());
    }

    #[test]
    fn toeplitz_build_trace_and_ceiling() {
        let grid = SpaceGrid::new(1, 512, 8.0).unwrap();
        let eps = 0.25;
        let spec = ToeplitzSpec::standard(
            eps,
            ChiDensity::Bump {
                q0: 1.0,
                w0: 0.0,
                radius: 1.0,
            },
        );
        let (state, rep) = build_toeplitz(&spec, grid, None).unwrap();
        assert!((state.trace().unwrap() - 1.0).abs() < 1e-8);
        assert!(rep.truncated_mass < 1e-8);
        assert!(rep.top_eigenvalue <= rep.linfini_bound * (1.0 + 1e-6));
        assert!(rep.distance_term_vacuous);
        let (h, _) = phase_space::husimi_dual_route(&state, 1e-6).unwrap();
        assert!((h.quadrature() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn toeplitz_single_cell_is_rank_one() {
        let grid = SpaceGrid::new(1, 512, 8.0).unwrap();
        let eps = 0.25;
        let spec = ToeplitzSpec {
            eps,
            alpha: 0.5,
            window: WindowProfile::Gaussian,
            chi: ChiDensity::Bump {
                q0: 0.0,
                w0: 0.0,
                radius: 0.5 * eps.sqrt() * 0.45,
            },
            lattice_factor: 0.5,
        };
        let (state, rep) = build_toeplitz(&spec, grid, None).unwrap();
        assert!(state.weights[0] > 0.99, "top weight {}", state.weights[0]);
        assert!(rep.rank <= 4);
    }

    #[test]
    fn resolution_of_identity_on_probes() {
        use rand::{Rng, SeedableRng};
        let grid = SpaceGrid::new(1, 512, 8.0).unwrap();
        let eps = 0.25;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2 {
            let mut probe = ComplexField::zeros(grid);
            for _ in 0..4 {
                let x0 = rng.gen_range(-1.5..1.5);
                let p0 = rng.gen_range(-1.5..1.5);
                let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let b = CoherentState::new(vec![x0], vec![p0], eps).field(grid);
                for (slot, z) in probe.data.iter_mut().zip(&b.data) {
                    *slot += c * z;
                }
            }
            let nrm = probe.norm();
            probe.scale(1.0 / nrm);
            let err =
                resolution_of_identity_error(eps, 0.5, grid, 0.5, 5.0, 5.0, &probe).unwrap();
            assert!(err < 1e-4, "resolution error {err}");
        }
    }

    #[test]
    fn validator_passes_band_rejects_pure() {
        use crate::potentials::RoughPotential;
        let grid = SpaceGrid::new(1, 1024, 4.0).unwrap();
        let pot = PotentialSpec::rough_only(1, RoughPotential::AbsoluteValue { a: 1.0, center: 0.0 });
        let radii = [1.5, 2.0, 2.5, 3.0];
        for eps in [0.1, 0.05] {
            let spec = HermiteSpec {
                eps,
                rule: HermiteWeightRule::UniformBand {
                    center: 0.5,
                    halfwidth: 0.1,
                },
            };
            let (state, _) = build_hermite(&spec, grid).unwrap();
            let rep = validate_assumptions(
                &state,
                &pot,
                &radii,
                &AssumptionThresholds {
                    c_max: 6.0,
                    h2_max: 10.0,
                    tail_max: 1e-4,
                },
            )
            .unwrap();
            assert!(rep.pass, "eps={eps}: {rep:?}");
        }
        // pure state: disop constant is 1/eps, failing any fixed ceiling
        let eps = 0.05;
        let f = CoherentState::new(vec![0.0], vec![0.0], eps).field(grid);
        let pure = MixedState::pure(eps, f).unwrap();
        let rep = validate_assumptions(
            &pure,
            &pot,
            &radii,
            &AssumptionThresholds {
                c_max: 6.0,
                h2_max: 10.0,
                tail_max: 1e-4,
            },
        )
        .unwrap();
        assert!(!rep.pass_disop);
        assert!((rep.disop_constant - 1.0 / eps).abs() < 1e-6);
    }
}
