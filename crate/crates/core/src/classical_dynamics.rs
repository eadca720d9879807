//! Classical transport: particle ensembles advanced by symplectic leapfrog
//! under the mollified field `b_delta = (p, -grad U_b * G_{delta^2} - grad U_s)`,
//! kernel-density push-forwards, and measure-preservation audits.

use crate::error::{LabError, Result};
use crate::gridcore::{FieldTag, PhaseField, PhaseLattice, SpaceGrid};
use crate::potentials::{MollifiedGradient, PotentialSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Weighted phase-space samples.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub dim: usize,
    /// Positions, `count * dim`, particle-major.
    pub xs: Vec<f64>,
    /// Momenta, `count * dim`.
    pub ps: Vec<f64>,
    pub weights: Vec<f64>,
    pub seed: u64,
    /// Particles frozen by the step-halving floor near the singular set.
    pub frozen: Vec<bool>,
}

impl ParticleEnsemble {
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass carried by frozen particles.
    pub fn excluded_mass(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.frozen)
            .filter(|(_, &f)| f)
            .map(|(w, _)| w)
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if (self.weight_sum() - 1.0).abs() > 1e-12 {
            return Err(LabError::MassMismatch(format!(
                "ensemble weights sum to {}",
                self.weight_sum()
            )));
        }
        if self
            .xs
            .iter()
            .chain(self.ps.iter())
            .any(|v| !v.is_finite())
        {
            return Err(LabError::Parameter("non-finite particle coordinate".into()));
        }
        Ok(())
    }
}

/// A lattice density to sample from: cell probabilities plus cell geometry.
pub struct SampleSource {
    /// Per-cell probability mass (normalized internally).
    pub cell_mass: Vec<f64>,
    /// Cell center coordinates, `cells * (2 dim)` as `(x.., p..)`.
    pub centers: Vec<f64>,
    /// Cell half-extents per axis, length `2 dim`.
    pub half_extent: Vec<f64>,
    pub dim: usize,
}

impl SampleSource {
    /// From a phase-space field (rejects genuinely negative densities).
    pub fn from_field(field: &PhaseField) -> Result<Self> {
        let n = field.dim();
        let min = field.data.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(LabError::Parameter(format!(
                "density has negative values ({min:.3e}); not a probability density"
            )));
        }
        let npn = field.plat.points.pow(n as u32);
        let mut cell_mass = Vec::with_capacity(field.data.len());
        let mut centers = Vec::with_capacity(field.data.len() * 2 * n);
        let mut xpos = vec![0.0; n];
        for xi in 0..field.xgrid.len() {
            field.xgrid.position(xi, &mut xpos);
            for pj in 0..npn {
                cell_mass.push(field.data[xi * npn + pj].max(0.0));
                centers.extend_from_slice(&xpos);
                let mut rest = pj;
                for a in (0..n).rev() {
                    let _ = a;
                    let l = rest % field.plat.points;
                    rest /= field.plat.points;
                    centers.push(field.plat.coord(l));
                }
                // momentum axes were pushed innermost-first; fix ordering
                let len = centers.len();
                centers[len - n..].reverse();
            }
        }
        let mut half = vec![field.xgrid.dx() / 2.0; n];
        half.extend(vec![field.plat.spacing / 2.0; n]);
        Ok(Self {
            cell_mass,
            centers,
            half_extent: half,
            dim: n,
        })
    }

    /// Rasterize an analytic phase-space density `f(x, p)` over a box
    /// (n = 1) on a fine auxiliary lattice.
    pub fn from_analytic(
        f: impl Fn(f64, f64) -> f64,
        xlo: f64,
        xhi: f64,
        plo: f64,
        phi: f64,
        cells_per_axis: usize,
    ) -> Result<Self> {
        let dxc = (xhi - xlo) / cells_per_axis as f64;
        let dpc = (phi - plo) / cells_per_axis as f64;
        let mut cell_mass = Vec::new();
        let mut centers = Vec::new();
        for i in 0..cells_per_axis {
            let x = xlo + (i as f64 + 0.5) * dxc;
            for j in 0..cells_per_axis {
                let p = plo + (j as f64 + 0.5) * dpc;
                let v = f(x, p);
                if v < -1e-12 {
                    return Err(LabError::Parameter("negative analytic density".into()));
                }
                cell_mass.push(v.max(0.0));
                centers.push(x);
                centers.push(p);
            }
        }
        Ok(Self {
            cell_mass,
            centers,
            half_extent: vec![dxc / 2.0, dpc / 2.0],
            dim: 1,
        })
    }
}

/// Equal-weight inverse-CDF sampling on the lattice, deterministic per seed
/// (systematic strata plus in-cell jitter).
pub fn sample_initial(source: &SampleSource, m: usize, seed: u64) -> Result<ParticleEnsemble> {
    let total: f64 = source.cell_mass.iter().sum();
    if !(total > 0.0) {
        return Err(LabError::Parameter("density has no mass".into()));
    }
    let nonzero = source.cell_mass.iter().filter(|&&v| v > 0.0).count();
    if nonzero < 4 {
        return Err(LabError::Parameter(
            "density concentrated on fewer than 4 cells; not absolutely continuous \
             at this resolution"
                .into(),
        ));
    }
    let mut cdf = Vec::with_capacity(source.cell_mass.len());
    let mut acc = 0.0;
    for &v in &source.cell_mass {
        acc += v / total;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = source.dim;
    let mut xs = Vec::with_capacity(m * dim);
    let mut ps = Vec::with_capacity(m * dim);
    for i in 0..m {
        let u = (i as f64 + rng.gen_range(0.0..1.0)) / m as f64;
        let cell = match cdf.binary_search_by(|probe| probe.partial_cmp(&u).unwrap()) {
            Ok(c) | Err(c) => c.min(cdf.len() - 1),
        };
        let base = cell * 2 * dim;
        for a in 0..dim {
            let jit = rng.gen_range(-1.0..1.0) * source.half_extent[a];
            xs.push(source.centers[base + a] + jit);
        }
        for a in 0..dim {
            let jit = rng.gen_range(-1.0..1.0) * source.half_extent[dim + a];
            ps.push(source.centers[base + dim + a] + jit);
        }
    }
    let ens = ParticleEnsemble {
        dim,
        xs,
        ps,
        weights: vec![1.0 / m as f64; m],
        seed,
        frozen: vec![false; m],
    };
    ens.validate()?;
    Ok(ens)
}

/// Integration plan for the approximate regular Lagrangian flow.
#[derive(Debug, Clone)]
pub struct FlowPlan {
    /// Mollification scale for the rough gradient.
    pub delta: f64,
    pub h: f64,
    pub horizon: f64,
    /// Singular-guard radius: inside it steps are halved adaptively.
    pub r_min: f64,
    /// Record every this many steps (t = 0 always recorded).
    pub record_every: usize,
}

impl FlowPlan {
    pub fn new(delta: f64, h: f64, horizon: f64) -> Self {
        Self {
            delta,
            h,
            horizon,
            r_min: 1e-3,
            record_every: usize::MAX,
        }
    }
}

/// Result of a flow run.
pub struct FlowResult {
    pub snapshots: Vec<(f64, ParticleEnsemble)>,
    /// Mass frozen at the step-halving floor (must stay below 1e-4).
    pub excluded_mass: f64,
    /// Max energy drift along sampled trajectories.
    pub max_energy_drift: f64,
}

struct ForceContext<'a> {
    moll: MollifiedGradient,
    potential: &'a PotentialSpec,
    dim: usize,
}

impl ForceContext<'_> {
    /// Force `-grad U_b * G_{delta^2}(x) - grad U_s(x)` into `out`.
    fn force(&self, x: &[f64], out: &mut [f64]) {
        self.moll.eval(x, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
        if self.potential.has_singular() {
            let mut g = vec![0.0; self.dim];
            for t in &self.potential.singular {
                t.gradient(x, &mut g);
            }
            for (o, gv) in out.iter_mut().zip(&g) {
                *o -= gv;
            }
        }
    }

    fn energy(&self, x: &[f64], p: &[f64]) -> f64 {
        let kin: f64 = p.iter().map(|v| v * v).sum::<f64>() / 2.0;
        kin + self.moll.potential(x) + self.potential.eval_singular(x)
    }
}

/// One kick-drift-kick step; splits adaptively when the trajectory enters
/// the singular guard. Returns `false` when the halving floor was reached
/// (the particle is then frozen in place).
fn leapfrog_adaptive(
    ctx: &ForceContext<'_>,
    sset: &crate::potentials::SingularSet,
    x: &mut [f64],
    p: &mut [f64],
    h: f64,
    r_min: f64,
    depth: u32,
) -> bool {
    let dim = x.len();
    let mut f0 = vec![0.0; dim];
    ctx.force(x, &mut f0);
    let mut xt = vec![0.0; dim];
    let mut pt = vec![0.0; dim];
    for a in 0..dim {
        pt[a] = p[a] + 0.5 * h * f0[a];
        xt[a] = x[a] + h * pt[a];
    }
    let guard = !sset.is_empty() && sset.dist(&xt) < r_min;
    if guard {
        if depth >= 24 {
            return false;
        }
        // retry as two half steps
        let mut xh = x.to_vec();
        let mut ph = p.to_vec();
        if !leapfrog_adaptive(ctx, sset, &mut xh, &mut ph, h / 2.0, r_min, depth + 1) {
            return false;
        }
        if !leapfrog_adaptive(ctx, sset, &mut xh, &mut ph, h / 2.0, r_min, depth + 1) {
            return false;
        }
        x.copy_from_slice(&xh);
        p.copy_from_slice(&ph);
        return true;
    }
    let mut f1 = vec![0.0; dim];
    ctx.force(&xt, &mut f1);
    for a in 0..dim {
        p[a] = pt[a] + 0.5 * h * f1[a];
        x[a] = xt[a];
    }
    true
}

/// Transport the ensemble along `b_delta`; particles never leave the
/// ensemble, but ones that hit the halving floor are frozen and their mass
/// recorded.
pub fn flow(
    ensemble: &ParticleEnsemble,
    plan: &FlowPlan,
    potential: &PotentialSpec,
) -> Result<FlowResult> {
    let moll = potential.mollified_gradient(plan.delta)?;
    if plan.h * moll.lipschitz > 0.1 + 1e-12 {
        return Err(LabError::Parameter(format!(
            "h * Lip(mollified gradient) = {:.3} exceeds 0.1; shrink h or raise delta",
            plan.h * moll.lipschitz
        )));
    }
    let ctx = ForceContext {
        moll,
        potential,
        dim: ensemble.dim,
    };
    let sset = potential.singular_set();
    if !sset.is_empty() {
        for i in 0..ensemble.count() {
            let x = &ensemble.xs[i * ensemble.dim..(i + 1) * ensemble.dim];
            if sset.dist(x) <= plan.r_min {
                return Err(LabError::Singularity {
                    dist: sset.dist(x),
                    context: format!("particle {i} starts inside the singular guard"),
                });
            }
        }
    }

    let steps = (plan.horizon / plan.h).round() as usize;
    let dim = ensemble.dim;
    let mut cur = ensemble.clone();
    let mut snapshots = vec![(0.0, cur.clone())];
    // energy drift sampled on a fixed subset
    let probe_stride = (cur.count() / 512).max(1);
    let e0: Vec<f64> = (0..cur.count())
        .step_by(probe_stride)
        .map(|i| {
            ctx.energy(
                &cur.xs[i * dim..(i + 1) * dim],
                &cur.ps[i * dim..(i + 1) * dim],
            )
        })
        .collect();
    let mut max_energy_drift: f64 = 0.0;

    for step in 1..=steps {
        let frozen_flags: Vec<bool> = cur
            .xs
            .par_chunks_mut(dim)
            .zip(cur.ps.par_chunks_mut(dim))
            .zip(cur.frozen.par_iter())
            .map(|((x, p), &frozen)| {
                if frozen {
                    return true;
                }
                !leapfrog_adaptive(&ctx, &sset, x, p, plan.h, plan.r_min, 0)
            })
            .collect();
        cur.frozen = frozen_flags;
        if step % plan.record_every == 0 || step == steps {
            let t = step as f64 * plan.h;
            for (k, i) in (0..cur.count()).step_by(probe_stride).enumerate() {
                if cur.frozen[i] {
                    continue;
                }
                let e = ctx.energy(
                    &cur.xs[i * dim..(i + 1) * dim],
                    &cur.ps[i * dim..(i + 1) * dim],
                );
                max_energy_drift = max_energy_drift.max((e - e0[k]).abs());
            }
            snapshots.push((t, cur.clone()));
        }
    }
    let excluded = cur.excluded_mass();
    if excluded > 1e-4 {
        return Err(LabError::AuditFailure(format!(
            "frozen mass {excluded:.3e} exceeds 1e-4: run invalid"
        )));
    }
    Ok(FlowResult {
        snapshots,
        excluded_mass: excluded,
        max_energy_drift,
    })
}

/// Kernel-density reconstruction on a phase lattice: cloud-in-cell deposit
/// followed by Gaussian smoothing of standard deviation `bandwidth` per axis.
pub fn push_forward_density(
    ensemble: &ParticleEnsemble,
    xgrid: SpaceGrid,
    plat: PhaseLattice,
    bandwidth: f64,
) -> Result<PhaseField> {
    if ensemble.dim != xgrid.dim() {
        return Err(LabError::GridMismatch("ensemble vs lattice dim".into()));
    }
    if bandwidth < xgrid.dx().min(plat.spacing) {
        return Err(LabError::Parameter(format!(
            "bandwidth {bandwidth:.3e} below the lattice spacing; raise it"
        )));
    }
    if ensemble.dim != 1 {
        return Err(LabError::Unsupported(
            "push-forward reconstruction is n = 1 here".into(),
        ));
    }
    let n = xgrid.points();
    let np = plat.points;
    let mut field = PhaseField::zeros(xgrid, plat, FieldTag::Classical);
    let cell = field.cell_volume();
    // deterministic deposit: fixed particle order, cloud-in-cell
    let x0 = xgrid.coord(0);
    let p0 = plat.coord(0);
    for i in 0..ensemble.count() {
        let w = ensemble.weights[i] / cell;
        let fx = (ensemble.xs[i] - x0) / xgrid.dx();
        let fp = (ensemble.ps[i] - p0) / plat.spacing;
        let (ix, tx) = split_frac(fx, n);
        let (ip, tp) = split_frac(fp, np);
        field.data[ix * np + ip] += w * (1.0 - tx) * (1.0 - tp);
        field.data[(ix + 1).min(n - 1) * np + ip] += w * tx * (1.0 - tp);
        field.data[ix * np + (ip + 1).min(np - 1)] += w * (1.0 - tx) * tp;
        field.data[(ix + 1).min(n - 1) * np + (ip + 1).min(np - 1)] += w * tx * tp;
    }
    let smoothed = field.convolve_gaussian(2.0 * bandwidth * bandwidth)?;
    let mass = smoothed.quadrature();
    if (mass - ensemble.weight_sum()).abs() > 1e-10 {
        return Err(LabError::MassMismatch(format!(
            "reconstruction mass {mass} vs weights {}",
            ensemble.weight_sum()
        )));
    }
    Ok(smoothed)
}

fn split_frac(f: f64, n: usize) -> (usize, f64) {
    let i = f.floor();
    let idx = (i.max(0.0) as usize).min(n - 1);
    let t = (f - i).clamp(0.0, 1.0);
    (idx, t)
}

/// Simplex-probe volume ratio of one composite leapfrog step.
///
/// Edge vectors are carried through each stage with difference formulas, so
/// the measured ratio inherits the exact shear structure of the splitting
/// (each stage's chord map has unit determinant); only roundoff remains.
pub fn leapfrog_volume_ratio(
    potential: &PotentialSpec,
    delta: f64,
    h: f64,
    base_x: &[f64],
    base_p: &[f64],
    edge: f64,
) -> Result<f64> {
    let dim = base_x.len();
    let moll = potential.mollified_gradient(delta)?;
    let ctx = ForceContext {
        moll,
        potential,
        dim,
    };
    let d2 = 2 * dim;
    // edges as columns of a (2 dim) x (2 dim) matrix, rows = (dx, dp)
    let mut edges = vec![vec![0.0; d2]; d2];
    for (e, row) in edges.iter_mut().enumerate() {
        row[e] = edge;
    }
    let mut x = base_x.to_vec();
    let mut p = base_p.to_vec();
    let mut f_base = vec![0.0; dim];
    let mut f_shift = vec![0.0; dim];
    let mut xs = vec![0.0; dim];

    // kick(h/2): dp_e += (h/2) [f(x + dx_e) - f(x)]
    ctx.force(&x, &mut f_base);
    for e in edges.iter_mut() {
        for a in 0..dim {
            xs[a] = x[a] + e[a];
        }
        ctx.force(&xs, &mut f_shift);
        for a in 0..dim {
            e[dim + a] += 0.5 * h * (f_shift[a] - f_base[a]);
        }
    }
    for a in 0..dim {
        p[a] += 0.5 * h * f_base[a];
    }
    // drift: dx_e += h dp_e
    for e in edges.iter_mut() {
        for a in 0..dim {
            e[a] += h * e[dim + a];
        }
    }
    for a in 0..dim {
        x[a] += h * p[a];
    }
    // kick(h/2) at the new base
    ctx.force(&x, &mut f_base);
    for e in edges.iter_mut() {
        for a in 0..dim {
            xs[a] = x[a] + e[a];
        }
        ctx.force(&xs, &mut f_shift);
        for a in 0..dim {
            e[dim + a] += 0.5 * h * (f_shift[a] - f_base[a]);
        }
    }
    // det(edges)/edge^{2 dim}
    let mut m: Vec<f64> = (0..d2 * d2).map(|k| edges[k % d2][k / d2]).collect();
    let det = dense_det(&mut m, d2);
    Ok(det / edge.powi(d2 as i32))
}

fn dense_det(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let mut piv = c;
        for r in (c + 1)..n {
            if m[r * n + c].abs() > m[piv * n + c].abs() {
                piv = r;
            }
        }
        if m[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
            }
            det = -det;
        }
        det *= m[c * n + c];
        for r in (c + 1)..n {
            let f = m[r * n + c] / m[c * n + c];
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
        }
    }
    det
}

/// Measure-preservation report: simplex-probe Jacobians plus the empirical
/// compression constant of a uniform cloud.
#[derive(Debug, Clone)]
pub struct MeasureReport {
    pub max_jacobian_dev: f64,
    pub compression_constant: f64,
}

/// Audit phase-volume preservation: probe Jacobians at `probes` points and
/// push a uniform cloud on `[-box_half, box_half]^2` to horizon `T`,
/// reporting the max cell-density ratio against uniform.
pub fn measure_preservation_audit(
    potential: &PotentialSpec,
    plan: &FlowPlan,
    probes: &[(Vec<f64>, Vec<f64>)],
    box_half: f64,
    m: usize,
    seed: u64,
) -> Result<MeasureReport> {
    let mut max_dev: f64 = 0.0;
    for (x, p) in probes {
        let r = leapfrog_volume_ratio(potential, plan.delta, plan.h, x, p, 1e-5)?;
        max_dev = max_dev.max((r - 1.0).abs());
    }
    // uniform cloud compression
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = probes.first().map(|(x, _)| x.len()).unwrap_or(1);
    let mut xs = Vec::with_capacity(m * dim);
    let mut ps = Vec::with_capacity(m * dim);
    for _ in 0..m {
        for _ in 0..dim {
            xs.push(rng.gen_range(-box_half..box_half));
        }
        for _ in 0..dim {
            ps.push(rng.gen_range(-box_half..box_half));
        }
    }
    let ens = ParticleEnsemble {
        dim,
        xs,
        ps,
        weights: vec![1.0 / m as f64; m],
        seed,
        frozen: vec![false; m],
    };
    let res = flow(&ens, plan, potential)?;
    let (_, last) = res.snapshots.last().unwrap();
    // coarse histogram over the initial box; cells fully inside the support
    // of the pushed cloud estimate the density ratio
    let cells = 12usize;
    let mut hist = vec![0usize; cells.pow(2 * dim as u32)];
    let width = 2.0 * box_half;
    let mut inside = 0usize;
    for i in 0..last.count() {
        let mut idx = 0usize;
        let mut ok = true;
        for a in 0..dim {
            let fx = (last.xs[i * dim + a] + box_half) / width;
            if !(0.0..1.0).contains(&fx) {
                ok = false;
                break;
            }
            idx = idx * cells + (fx * cells as f64) as usize;
        }
        if !ok {
            continue;
        }
        for a in 0..dim {
            let fp = (last.ps[i * dim + a] + box_half) / width;
            if !(0.0..1.0).contains(&fp) {
                ok = false;
                break;
            }
            idx = idx * cells + (fp * cells as f64) as usize;
        }
        if ok {
            hist[idx] += 1;
            inside += 1;
        }
    }
    let expected = inside as f64 / cells.pow(2 * dim as u32) as f64;
    // interior ratio only: compression is about density increase
    let max_cell = hist.iter().cloned().max().unwrap_or(0) as f64;
    let compression = if expected > 0.0 {
        max_cell / expected
    } else {
        f64::NAN
    };
    Ok(MeasureReport {
        max_jacobian_dev: max_dev,
        compression_constant: compression,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridcore::{wigner_lattice, GaussianKernel};
    use crate::potentials::RoughPotential;

    fn uniform_square_source() -> SampleSource {
        SampleSource::from_analytic(
            |x, p| {
                if x.abs() < 1.0 && p.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            },
            -1.0,
            1.0,
            -1.0,
            1.0,
            64,
        )
        .unwrap()
    }

    #[test]
    fn sampling_uniform_and_gaussian() {
        let src = uniform_square_source();
        let ens = sample_initial(&src, 4, 42).unwrap();
        assert_eq!(ens.weights, vec![0.25; 4]);
        // Gaussian: empirical mean within 3 sigma/sqrt(M) of the center
        let k = GaussianKernel::new(0.5, 2).unwrap();
        let src = SampleSource::from_analytic(
            |x, p| k.eval(&[x - 0.3, p + 0.2]),
            -3.0,
            3.6,
            -3.2,
            3.0,
            200,
        )
        .unwrap();
        let m = 40000;
        let ens = sample_initial(&src, m, 7).unwrap();
        let mean_x: f64 = ens.xs.iter().sum::<f64>() / m as f64;
        let mean_p: f64 = ens.ps.iter().sum::<f64>() / m as f64;
        let sigma = (0.25f64).sqrt();
        let tol = 3.0 * sigma / (m as f64).sqrt();
        assert!((mean_x - 0.3).abs() < tol, "{mean_x}");
        assert!((mean_p + 0.2).abs() < tol, "{mean_p}");
    }

    #[test]
    fn sampling_rejects_point_mass() {
        let src = SampleSource::from_analytic(
            |x, p| {
                if x.abs() < 0.01 && p.abs() < 0.01 {
                    1.0
                } else {
                    0.0
                }
            },
            -1.0,
            1.0,
            -1.0,
            1.0,
            8,
        )
        .unwrap();
        assert!(sample_initial(&src, 100, 1).is_err());
    }

    #[test]
    fn free_flow_is_exact_drift() {
        let src = uniform_square_source();
        let ens = sample_initial(&src, 500, 9).unwrap();
        let pot = PotentialSpec::free(1);
        let mut plan = FlowPlan::new(0.1, 0.05, 1.0);
        plan.record_every = 10;
        let res = flow(&ens, &plan, &pot).unwrap();
        let (_, last) = res.snapshots.last().unwrap();
        for i in 0..ens.count() {
            let want = ens.xs[i] + 1.0 * ens.ps[i];
            assert!((last.xs[i] - want).abs() < 1e-12);
            assert!((last.ps[i] - ens.ps[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn harmonic_flow_rotates() {
        // quarter period: (x, p) -> (p, -x); energy error O(h^2)
        let pot = PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 });
        let h = 1e-3;
        let quarter = std::f64::consts::PI / 2.0;
        let steps = (quarter / h).round();
        let plan = FlowPlan::new(0.1, quarter / steps, quarter);
        let ens = ParticleEnsemble {
            dim: 1,
            xs: vec![1.0, 0.3],
            ps: vec![0.0, -0.4],
            weights: vec![0.5, 0.5],
            seed: 0,
            frozen: vec![false, false],
        };
        let res = flow(&ens, &plan, &pot).unwrap();
        let (_, last) = res.snapshots.last().unwrap();
        for i in 0..2 {
            let (x0, p0) = (ens.xs[i], ens.ps[i]);
            assert!((last.xs[i] - p0).abs() < 5e-4, "x {}", last.xs[i]);
            assert!((last.ps[i] + x0).abs() < 5e-4, "p {}", last.ps[i]);
        }
        assert!(res.max_energy_drift < 10.0 * plan.h * plan.h * quarter * 1.0);
    }

    #[test]
    fn abs_potential_piecewise_parabolic() {
        // from (x0 > 0, 0): x(t) = x0 - t^2/2 before the first kink crossing
        let pot =
            PotentialSpec::rough_only(1, RoughPotential::AbsoluteValue { a: 1.0, center: 0.0 });
        let x0 = 1.0;
        let t_end = 1.2; // crossing at sqrt(2 x0) ~ 1.414
        let h = 2.5e-4;
        let delta = 0.01; // kink smoothing well inside |x| > x0 - t^2/2
        let plan = FlowPlan::new(delta, h, t_end);
        let ens = ParticleEnsemble {
            dim: 1,
            xs: vec![x0],
            ps: vec![0.0],
            weights: vec![1.0],
            seed: 0,
            frozen: vec![false],
        };
        let res = flow(&ens, &plan, &pot).unwrap();
        let (_, last) = res.snapshots.last().unwrap();
        let want = x0 - t_end * t_end / 2.0;
        assert!((last.xs[0] - want).abs() < 1e-6, "{} vs {want}", last.xs[0]);
    }

    #[test]
    fn push_forward_mass_and_identity_reconstruction() {
        let k = GaussianKernel::new(0.5, 2).unwrap();
        let src = SampleSource::from_analytic(
            |x, p| k.eval(&[x, p]),
            -3.0,
            3.0,
            -3.0,
            3.0,
            200,
        )
        .unwrap();
        let ens = sample_initial(&src, 100_000, 11).unwrap();
        let xgrid = SpaceGrid::new(1, 256, 6.0).unwrap();
        let plat = wigner_lattice(&xgrid, 6.0 / std::f64::consts::PI); // dp = dx here
        let bw = 2.0 * xgrid.dx();
        let field = push_forward_density(&ens, xgrid, plat, bw).unwrap();
        assert!((field.quadrature() - 1.0).abs() < 1e-10);
        // reconstruction stays close to the source density in L1
        let mut l1 = 0.0;
        let np = plat.points;
        for (i, &x) in xgrid.axis_coords().iter().enumerate() {
            for (l, &p) in plat.axis_coords().iter().enumerate() {
                l1 += (field.data[i * np + l] - k.eval(&[x, p])).abs();
            }
        }
        l1 *= field.cell_volume();
        assert!(l1 < 0.05, "L1 reconstruction error {l1}");
    }

    #[test]
    fn leapfrog_volume_exact_on_probes() {
        for (name, pot) in [
            ("free", PotentialSpec::free(1)),
            (
                "harmonic",
                PotentialSpec::rough_only(1, RoughPotential::Harmonic { k: 1.0, center: 0.0 }),
            ),
            (
                "abs",
                PotentialSpec::rough_only(1, RoughPotential::AbsoluteValue { a: 1.0, center: 0.0 }),
            ),
            (
                "sawtooth",
                PotentialSpec::rough_only(
                    1,
                    RoughPotential::Sawtooth {
                        slope: 1.0,
                        halfperiod: 2.0,
                    },
                ),
            ),
        ] {
            for &(x, p) in &[(0.9, 0.1), (0.02, -0.7), (-1.3, 0.4)] {
                let r = leapfrog_volume_ratio(&pot, 0.05, 2e-3, &[x], &[p], 1e-5).unwrap();
                assert!((r - 1.0).abs() < 1e-10, "{name} at ({x},{p}): {r}");
            }
        }
    }

    #[test]
    fn uniform_cloud_compression_free_flow() {
        let pot = PotentialSpec::free(1);
        let mut plan = FlowPlan::new(0.1, 0.02, 0.3);
        plan.record_every = usize::MAX;
        let probes = vec![(vec![0.5], vec![0.1])];
        let rep = measure_preservation_audit(&pot, &plan, &probes, 2.0, 200_000, 3).unwrap();
        assert!(rep.max_jacobian_dev < 1e-10);
        // shear moves mass out near the corners; interior stays near 1
        assert!(rep.compression_constant < 1.15, "{}", rep.compression_constant);
    }
}
