//! The potential class `U = U_b + U_s`: a rough bounded part with BV
//! gradient plus a repulsive Coulomb-type singular part, with validators and
//! mollified gradients for the classical flow.

use crate::error::{LabError, Result};
use crate::gridcore::SpaceGrid;
use libm::erf;
use serde::{Deserialize, Serialize};

/// Catalog of rough potentials `U_b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoughPotential {
    Zero,
    /// `a |x - c|` (radial).
    AbsoluteValue { a: f64, center: f64 },
    /// `(k/2) |x - c|^2`. Not globally bounded; flagged by the validator.
    Harmonic { k: f64, center: f64 },
    /// `a (x - c)^4`, one-dimensional. Not globally bounded.
    Quartic { a: f64, center: f64 },
    /// `-depth * exp(-|x - c|^2 / (2 width^2))`; smooth, bounded.
    SmoothedWell { depth: f64, width: f64, center: f64 },
    /// Triangle wave, slope `+-slope`, linear pieces of length `halfperiod`,
    /// rising through the origin; kinks at odd multiples of `halfperiod/2`.
    Sawtooth { slope: f64, halfperiod: f64 },
    /// Tabulated values on a one-dimensional grid, linear interpolation.
    Table { grid: SpaceGrid, values: Vec<f64> },
}

impl RoughPotential {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::AbsoluteValue { a, center } => a * radial(x, *center),
            Self::Harmonic { k, center } => {
                0.5 * k * x.iter().map(|&v| (v - center) * (v - center)).sum::<f64>()
            }
            Self::Quartic { a, center } => {
                let r = x[0] - center;
                a * r.powi(4)
            }
            Self::SmoothedWell {
                depth,
                width,
                center,
            } => {
                let r2: f64 = x.iter().map(|&v| (v - center) * (v - center)).sum();
                -depth * (-r2 / (2.0 * width * width)).exp()
            }
            Self::Sawtooth { slope, halfperiod } => {
                x.iter().map(|&v| slope * triangle(v, *halfperiod)).sum()
            }
            Self::Table { grid, values } => table_eval(grid, values, x[0]),
        }
    }

    /// Pointwise gradient; `true` when `x` sits on a gradient-jump point
    /// (the midpoint subgradient is returned there).
    pub fn gradient(&self, x: &[f64]) -> (Vec<f64>, bool) {
        match self {
            Self::Zero => (vec![0.0; x.len()], false),
            Self::AbsoluteValue { a, center } => {
                let r = radial(x, *center);
                if r == 0.0 {
                    (vec![0.0; x.len()], true)
                } else {
                    (x.iter().map(|&v| a * (v - center) / r).collect(), false)
                }
            }
            Self::Harmonic { k, center } => {
                (x.iter().map(|&v| k * (v - center)).collect(), false)
            }
            Self::Quartic { a, center } => {
                let r = x[0] - center;
                (vec![4.0 * a * r.powi(3)], false)
            }
            Self::SmoothedWell {
                depth,
                width,
                center,
            } => {
                let w2 = width * width;
                let r2: f64 = x.iter().map(|&v| (v - center) * (v - center)).sum();
                let g = depth * (-r2 / (2.0 * w2)).exp() / w2;
                (x.iter().map(|&v| g * (v - center)).collect(), false)
            }
            Self::Sawtooth { slope, halfperiod } => {
                let mut flagged = false;
                let g = x
                    .iter()
                    .map(|&v| {
                        let (s, f) = triangle_slope(v, *halfperiod);
                        flagged |= f;
                        slope * s
                    })
                    .collect();
                (g, flagged)
            }
            Self::Table { grid, values } => {
                let (g, f) = table_gradient(grid, values, x[0]);
                (vec![g], f)
            }
        }
    }

    /// Kink locations inside `[-l, l]` with their jump sizes (used by the
    /// total-variation validator; exact for the catalog, empty for smooth
    /// entries).
    pub fn gradient_jumps(&self, l: f64) -> Vec<(f64, f64)> {
        match self {
            Self::AbsoluteValue { a, center } => {
                if center.abs() <= l {
                    vec![(*center, 2.0 * a.abs())]
                } else {
                    vec![]
                }
            }
            Self::Sawtooth { slope, halfperiod } => {
                let mut out = vec![];
                let mut m = ((-l) / halfperiod - 0.5).ceil() as i64;
                loop {
                    let k = (m as f64 + 0.5) * halfperiod;
                    if k > l {
                        break;
                    }
                    if k >= -l {
                        out.push((k, 2.0 * slope.abs()));
                    }
                    m += 1;
                }
                out
            }
            _ => vec![],
        }
    }

    /// Laplacian where the catalog entry is smooth (`None` on kinky entries).
    pub fn laplacian(&self, x: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        match self {
            Self::Zero => Some(0.0),
            Self::Harmonic { k, .. } => Some(k * n),
            Self::Quartic { a, center } => {
                let r = x[0] - center;
                Some(12.0 * a * r * r)
            }
            Self::SmoothedWell {
                depth,
                width,
                center,
            } => {
                let w2 = width * width;
                let r2: f64 = x.iter().map(|&v| (v - center) * (v - center)).sum();
                Some(depth * (-r2 / (2.0 * w2)).exp() * (n / w2 - r2 / (w2 * w2)))
            }
            _ => None,
        }
    }

    /// Catalog knowledge: bounded on all of `R^n`, not just the box.
    pub fn is_globally_bounded(&self) -> bool {
        matches!(
            self,
            Self::Zero | Self::SmoothedWell { .. } | Self::Sawtooth { .. }
        )
    }
}

fn radial(x: &[f64], center: f64) -> f64 {
    x.iter()
        .map(|&v| (v - center) * (v - center))
        .sum::<f64>()
        .sqrt()
}

/// Triangle wave with unit slope: `w(x) = (-1)^m (x - m l)`, `m = round(x/l)`.
fn triangle(x: f64, l: f64) -> f64 {
    let m = (x / l).round();
    let r = x - m * l;
    if (m as i64).rem_euclid(2) == 0 {
        r
    } else {
        -r
    }
}

fn triangle_slope(x: f64, l: f64) -> (f64, bool) {
    let m = (x / l).round();
    let r = x - m * l;
    // kink exactly at |r| = l/2
    if (r.abs() - l / 2.0).abs() < 1e-14 * l {
        return (0.0, true);
    }
    if (m as i64).rem_euclid(2) == 0 {
        (1.0, false)
    } else {
        (-1.0, false)
    }
}

fn table_eval(grid: &SpaceGrid, values: &[f64], x: f64) -> f64 {
    let dx = grid.dx();
    let n = grid.points();
    let f = (x - grid.coord(0)) / dx;
    let i = (f.floor() as isize).clamp(0, n as isize - 2) as usize;
    let t = (f - i as f64).clamp(0.0, 1.0);
    values[i] * (1.0 - t) + values[i + 1] * t
}

fn table_gradient(grid: &SpaceGrid, values: &[f64], x: f64) -> (f64, bool) {
    let dx = grid.dx();
    let n = grid.points();
    let f = (x - grid.coord(0)) / dx;
    let i = (f.floor() as isize).clamp(0, n as isize - 2) as usize;
    let on_node = (f - f.round()).abs() < 1e-12 && f.round() as usize > 0 && (f.round() as usize) < n - 1;
    if on_node {
        let j = f.round() as usize;
        let left = (values[j] - values[j - 1]) / dx;
        let right = (values[j + 1] - values[j]) / dx;
        (0.5 * (left + right), (left - right).abs() > 1e-12)
    } else {
        ((values[i + 1] - values[i]) / dx, false)
    }
}

/// One repulsive Coulomb contribution to `U_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoulombTerm {
    /// Reduced two-body form `Z / |x - center|`.
    Point { z: f64, center: Vec<f64> },
    /// Genuine pair form `Z_i Z_j / |x_i - x_j|` on `(R^3)^M x R^(n-3M)`;
    /// `i`, `j` index the 3-blocks.
    Pair { z: f64, i: usize, j: usize },
}

impl CoulombTerm {
    pub fn charge(&self) -> f64 {
        match self {
            Self::Point { z, .. } | Self::Pair { z, .. } => *z,
        }
    }

    /// Distance from `x` to this term's singular component.
    pub fn dist(&self, x: &[f64]) -> f64 {
        match self {
            Self::Point { center, .. } => x
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Self::Pair { i, j, .. } => {
                let d2: f64 = (0..3)
                    .map(|a| {
                        let d = x[3 * i + a] - x[3 * j + a];
                        d * d
                    })
                    .sum();
                (d2 / 2.0).sqrt()
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Point { z, .. } => z / self.dist(x).max(f64::MIN_POSITIVE),
            Self::Pair { z, i, j } => {
                let d2: f64 = (0..3)
                    .map(|a| {
                        let d = x[3 * i + a] - x[3 * j + a];
                        d * d
                    })
                    .sum();
                z / d2.sqrt().max(f64::MIN_POSITIVE)
            }
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Point { z, center } => {
                let d = self.dist(x);
                let c = -z / (d * d * d);
                for (o, (a, b)) in out.iter_mut().zip(x.iter().zip(center)) {
                    *o += c * (a - b);
                }
            }
            Self::Pair { z, i, j } => {
                let mut d2 = 0.0;
                for a in 0..3 {
                    let d = x[3 * i + a] - x[3 * j + a];
                    d2 += d * d;
                }
                let d = d2.sqrt();
                let c = -z / (d * d * d);
                for a in 0..3 {
                    let diff = x[3 * i + a] - x[3 * j + a];
                    out[3 * i + a] += c * diff;
                    out[3 * j + a] -= c * diff;
                }
            }
        }
    }

    /// Per-term constant `c` with `Z/|..| >= c / dist(x, S_term)`.
    fn maggus(&self) -> f64 {
        match self {
            Self::Point { z, .. } => *z,
            // pair distance to S is |x_i-x_j|/sqrt(2), so Z/|x_i-x_j| = (Z/sqrt(2))/dist
            Self::Pair { z, .. } => z / std::f64::consts::SQRT_2,
        }
    }
}

/// The singular set `S` of `U_s` with its distance function.
#[derive(Debug, Clone)]
pub struct SingularSet {
    terms: Vec<CoulombTerm>,
}

impl SingularSet {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Euclidean distance to `S` (`+inf` when `S` is empty).
    pub fn dist(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.dist(x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Full potential `U = U_b + U_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub dim: usize,
    pub rough: RoughPotential,
    pub singular: Vec<CoulombTerm>,
}

impl PotentialSpec {
    pub fn new(dim: usize, rough: RoughPotential, singular: Vec<CoulombTerm>) -> Result<Self> {
        for t in &singular {
            if t.charge() <= 0.0 {
                return Err(LabError::Parameter(
                    "Coulomb charge products must be positive (repulsive)".into(),
                ));
            }
            if let CoulombTerm::Point { center, .. } = t {
                if center.len() != dim {
                    return Err(LabError::Parameter("Coulomb center dim mismatch".into()));
                }
            }
            if let CoulombTerm::Pair { i, j, .. } = t {
                if 3 * i.max(j) + 3 > dim || i == j {
                    return Err(LabError::Parameter("Coulomb pair indices out of range".into()));
                }
            }
        }
        Ok(Self {
            dim,
            rough,
            singular,
        })
    }

    pub fn rough_only(dim: usize, rough: RoughPotential) -> Self {
        Self {
            dim,
            rough,
            singular: vec![],
        }
    }

    pub fn free(dim: usize) -> Self {
        Self::rough_only(dim, RoughPotential::Zero)
    }

    pub fn singular_set(&self) -> SingularSet {
        SingularSet {
            terms: self.singular.clone(),
        }
    }

    pub fn has_singular(&self) -> bool {
        !self.singular.is_empty()
    }

    /// `c` with `U_s(x) >= c / dist(x,S)` (min over per-term constants).
    pub fn maggus_constant(&self) -> f64 {
        self.singular
            .iter()
            .map(|t| t.maggus())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval_rough(&self, x: &[f64]) -> f64 {
        self.rough.eval(x)
    }

    pub fn eval_singular(&self, x: &[f64]) -> f64 {
        self.singular.iter().map(|t| t.eval(x)).sum()
    }

    /// Pointwise `U(x)`; errors when `x` lies on the singular set.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if self.has_singular() {
            let d = self.singular_set().dist(x);
            if d == 0.0 {
                return Err(LabError::Singularity {
                    dist: d,
                    context: "eval_potential".into(),
                });
            }
        }
        Ok(self.eval_rough(x) + self.eval_singular(x))
    }

    /// Pointwise gradient a.e.; flags gradient-jump points.
    pub fn gradient(&self, x: &[f64]) -> Result<(Vec<f64>, bool)> {
        if self.has_singular() && self.singular_set().dist(x) == 0.0 {
            return Err(LabError::Singularity {
                dist: 0.0,
                context: "eval_gradient".into(),
            });
        }
        let (mut g, flag) = self.rough.gradient(x);
        for t in &self.singular {
            t.gradient(x, &mut g);
        }
        Ok((g, flag))
    }

    /// Mollified rough gradient: closed-form `grad U_b * G^(n)_{delta^2}`.
    pub fn mollified_gradient(&self, delta: f64) -> Result<MollifiedGradient> {
        MollifiedGradient::new(self, delta)
    }

    /// Validate the §-level hypotheses on a box; always returns a report.
    pub fn validate(&self, grid: &SpaceGrid) -> PotentialReport {
        validate_potential(self, grid)
    }
}

/// Closed-form mollified rough gradient `grad U_b * G^(n)_{delta^2}` plus a
/// matching mollified potential for energy audits.
#[derive(Debug, Clone)]
pub struct MollifiedGradient {
    pub delta: f64,
    dim: usize,
    rough: RoughPotential,
    /// Recorded Lipschitz constant of the mollified gradient.
    pub lipschitz: f64,
}

impl MollifiedGradient {
    fn new(spec: &PotentialSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(LabError::Parameter("mollification scale must be > 0".into()));
        }
        match &spec.rough {
            RoughPotential::AbsoluteValue { .. }
            | RoughPotential::Quartic { .. }
            | RoughPotential::Sawtooth { .. }
            | RoughPotential::Table { .. }
                if spec.dim != 1 =>
            {
                return Err(LabError::Unsupported(
                    "closed-form mollification of this rough part needs n = 1".into(),
                ))
            }
            _ => {}
        }
        let mut out = Self {
            delta,
            dim: spec.dim,
            rough: spec.rough.clone(),
            lipschitz: 0.0,
        };
        out.lipschitz = out.estimate_lipschitz();
        Ok(out)
    }

    /// Mollified gradient at a point.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.delta;
        let s2 = d * d / 2.0; // per-axis variance of G_{delta^2}
        match &self.rough {
            RoughPotential::Zero => out.fill(0.0),
            RoughPotential::AbsoluteValue { a, center } => {
                out[0] = a * erf((x[0] - center) / d);
            }
            RoughPotential::Harmonic { k, center } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = k * (v - center);
                }
            }
            RoughPotential::Quartic { a, center } => {
                let r = x[0] - center;
                out[0] = 4.0 * a * (r * r * r + 3.0 * r * s2);
            }
            RoughPotential::SmoothedWell {
                depth,
                width,
                center,
            } => {
                let w2 = width * width;
                let v2 = w2 + s2;
                let r2: f64 = x.iter().map(|&v| (v - center) * (v - center)).sum();
                let pref =
                    depth / w2 * (w2 / v2).powf((self.dim as f64 + 2.0) / 2.0) * (-r2 / (2.0 * v2)).exp();
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = pref * (v - center);
                }
            }
            RoughPotential::Sawtooth { slope, halfperiod } => {
                out[0] = slope * mollified_square(x[0], *halfperiod, d);
            }
            RoughPotential::Table { grid, values } => {
                // grid convolution on the fly over a +-8 delta window
                let dx = grid.dx();
                let reach = ((8.0 * d) / dx).ceil() as isize;
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for m in -reach..=reach {
                    let y = m as f64 * dx;
                    let w = (-y * y / (d * d)).exp();
                    let (g, _) = table_gradient(grid, values, x[0] - y);
                    acc += w * g;
                    wsum += w;
                }
                out[0] = acc / wsum;
            }
        }
    }

    /// Mollified rough potential `U_b * G^(n)_{delta^2}` (energy audits).
    pub fn potential(&self, x: &[f64]) -> f64 {
        let d = self.delta;
        let s2 = d * d / 2.0;
        match &self.rough {
            RoughPotential::Zero => 0.0,
            RoughPotential::AbsoluteValue { a, center } => {
                let r = x[0] - center;
                a * (r * erf(r / d) + d / std::f64::consts::PI.sqrt() * (-r * r / (d * d)).exp())
            }
            RoughPotential::Harmonic { k, center } => {
                let r2: f64 = x.iter().map(|&v| (v - center) * (v - center)).sum();
                0.5 * k * (r2 + self.dim as f64 * s2)
            }
            RoughPotential::Quartic { a, center } => {
                let r = x[0] - center;
                a * (r.powi(4) + 6.0 * r * r * s2 + 3.0 * s2 * s2)
            }
            RoughPotential::SmoothedWell {
                depth,
                width,
                center,
            } => {
                let w2 = width * width;
                let v2 = w2 + s2;
                let r2: f64 = x.iter().map(|&v| (v - center) * (v - center)).sum();
                -depth * (w2 / v2).powf(self.dim as f64 / 2.0) * (-r2 / (2.0 * v2)).exp()
            }
            RoughPotential::Sawtooth { slope, halfperiod } => {
                // integrate the mollified slope from 0 (U(0) = 0 for the
                // triangle rising through the origin); numeric on the fly
                let steps = 64.max((x[0].abs() / (0.05 * self.delta)).ceil() as usize);
                let h = x[0] / steps as f64;
                let mut acc = 0.0;
                for i in 0..steps {
                    let xm = (i as f64 + 0.5) * h;
                    acc += slope * mollified_square(xm, *halfperiod, d) * h;
                }
                acc
            }
            RoughPotential::Table { grid, values } => {
                let dx = grid.dx();
                let reach = ((8.0 * d) / dx).ceil() as isize;
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for m in -reach..=reach {
                    let y = m as f64 * dx;
                    let w = (-y * y / (d * d)).exp();
                    acc += w * table_eval(grid, values, x[0] - y);
                    wsum += w;
                }
                acc / wsum
            }
        }
    }

    fn estimate_lipschitz(&self) -> f64 {
        match &self.rough {
            RoughPotential::Zero => 0.0,
            RoughPotential::Harmonic { k, .. } => k.abs(),
            RoughPotential::AbsoluteValue { a, .. } => {
                a.abs() * 2.0 / (self.delta * std::f64::consts::PI.sqrt())
            }
            RoughPotential::Sawtooth { slope, .. } => {
                slope.abs() * 4.0 / (self.delta * std::f64::consts::PI.sqrt())
            }
            _ => {
                // sampled two-point slope max over a generous 1-D section
                let mut lip: f64 = 0.0;
                let h = self.delta / 20.0;
                let mut g0 = vec![0.0; self.dim];
                let mut g1 = vec![0.0; self.dim];
                let mut x = vec![0.0; self.dim];
                let mut t = -10.0;
                while t < 10.0 {
                    x[0] = t;
                    self.eval(&x, &mut g0);
                    x[0] = t + h;
                    self.eval(&x, &mut g1);
                    lip = lip.max((g1[0] - g0[0]).abs() / h);
                    t += h * 7.3;
                }
                lip
            }
        }
    }
}

/// Mollified square wave of unit amplitude matching the sawtooth slope.
fn mollified_square(x: f64, l: f64, delta: f64) -> f64 {
    // kinks at (m + 1/2) l; slope is +1 on the piece containing 0
    let phi = |z: f64| 0.5 * (1.0 + erf(z / delta));
    let reach = (10.0 * delta / l).ceil() as i64 + 1;
    let m0 = (x / l).round() as i64;
    let mut acc = 0.0;
    for m in (m0 - reach)..=(m0 + reach) {
        let lo = (m as f64 - 0.5) * l;
        let hi = (m as f64 + 0.5) * l;
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        acc += sign * (phi(x - lo) - phi(x - hi));
    }
    acc
}

/// Report produced by [`PotentialSpec::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialReport {
    /// sup |U_b| over the box.
    pub rough_sup: f64,
    /// Empirical Lipschitz constant of `U_b` on the box.
    pub rough_lipschitz: f64,
    /// Max per-axis-line total variation of one gradient component (BV proxy).
    pub gradient_tv: f64,
    /// sup |grad U_b| / (1 + |x|) over the box.
    pub growth_ratio_sup: f64,
    /// min over grid points of dist(x, S) (`inf` when S is empty).
    pub min_dist_singular: f64,
    /// `U_s * dist >= maggus - tol` held everywhere off S.
    pub maggus_ok: bool,
    pub maggus_constant: f64,
    /// The rough part is bounded on all of `R^n` (catalog knowledge).
    pub globally_bounded: bool,
    pub pass: bool,
}

fn validate_potential(spec: &PotentialSpec, grid: &SpaceGrid) -> PotentialReport {
    let n = grid.points();
    let dim = grid.dim();
    let sset = spec.singular_set();
    let mut rough_sup: f64 = 0.0;
    let mut lipschitz: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let mut min_dist = f64::INFINITY;
    let mut maggus_ok = true;
    let c = spec.maggus_constant();

    let mut pos = vec![0.0; dim];
    let mut prev_u: Option<f64> = None;
    for flat in 0..grid.len() {
        grid.position(flat, &mut pos);
        let ub = spec.eval_rough(&pos);
        rough_sup = rough_sup.max(ub.abs());
        let (g, _) = spec.rough.gradient(&pos);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xnorm = pos.iter().map(|v| v * v).sum::<f64>().sqrt();
        growth = growth.max(gnorm / (1.0 + xnorm));
        // crude per-site Lipschitz probe along axis 0 (consecutive sites)
        if flat % n != 0 {
            if let Some(pu) = prev_u {
                lipschitz = lipschitz.max((ub - pu).abs() / grid.dx());
            }
        }
        prev_u = Some(ub);
        if !sset.is_empty() {
            let d = sset.dist(&pos);
            min_dist = min_dist.min(d);
            if d > 0.0 {
                let us = spec.eval_singular(&pos);
                if us * d < c - 1e-12 {
                    maggus_ok = false;
                }
            }
        }
    }

    // per-axis-line total variation of the gradient component along that axis
    let mut tv_max: f64 = 0.0;
    for axis in 0..dim {
        let stride: usize = grid.points().pow((dim - 1 - axis) as u32);
        let outer: usize = grid.len() / (n * stride);
        for o in 0..outer {
            for s in 0..stride {
                let mut tv = 0.0;
                let mut prev: Option<f64> = None;
                for i in 0..n {
                    let flat = o * n * stride + i * stride + s;
                    grid.position(flat, &mut pos);
                    let (g, _) = spec.rough.gradient(&pos);
                    if let Some(p) = prev {
                        tv += (g[axis] - p).abs();
                    }
                    prev = Some(g[axis]);
                }
                tv_max = tv_max.max(tv);
            }
        }
    }

    let globally_bounded = spec.rough.is_globally_bounded();
    let pass = growth.is_finite() && rough_sup.is_finite() && maggus_ok;
    PotentialReport {
        rough_sup,
        rough_lipschitz: lipschitz,
        gradient_tv: tv_max,
        growth_ratio_sup: growth,
        min_dist_singular: min_dist,
        maggus_ok,
        maggus_constant: c,
        globally_bounded,
        pass,
    }
}
