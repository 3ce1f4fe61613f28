//! Quadrature on the Shilov boundary `S` and on the rank-one chart of `N̄₁`.
//!
//! All rules are probability rules: weights sum to one, matching the normalized
//! Haar measure `dk` pushed to `S`.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{height, random_shilov_matrix, GroupElement, NbarBasis, ShilovPoint};
use crate::special::gauss_legendre;
use crate::structure::StructureData;
use crate::{CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    DeterministicSphere,
    MonteCarloStiefel,
    /// Rank one, for integrands depending on `U₁` only; nodes graded towards `U₁ = 1`.
    ZonalDisk,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::DeterministicSphere => "sphere",
            RuleKind::MonteCarloStiefel => "stiefel",
            RuleKind::ZonalDisk => "zonal-disk",
        })
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub r: usize,
    pub b: usize,
    pub kind: RuleKind,
    /// Level for sphere rules, sample count for Monte Carlo rules.
    pub param: usize,
    pub seed: Option<u64>,
    pub nodes: Vec<ShilovPoint>,
    pub weights: Vec<f64>,
    pub estimated_accuracy: f64,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cache_key(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!("r{}_b{}_{}_{}_{}", self.r, self.b, self.kind, self.param, seed)
    }

    /// `Σ wᵢ f(Uᵢ)`, node values computed in parallel and summed in node order.
    pub fn integrate(&self, f: impl Fn(&ShilovPoint) -> C64 + Sync) -> C64 {
        let vals: Vec<C64> = self.nodes.par_iter().map(&f).collect();
        weighted_sum(&vals, &self.weights)
    }

    pub fn try_integrate(&self, f: impl Fn(&ShilovPoint) -> Result<C64> + Sync) -> Result<C64> {
        let vals: Result<Vec<C64>> = self.nodes.par_iter().map(&f).collect();
        Ok(weighted_sum(&vals?, &self.weights))
    }

    /// Real-valued variant used for norms.
    pub fn integrate_real(&self, f: impl Fn(&ShilovPoint) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = self.nodes.par_iter().map(&f).collect();
        let c: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
        weighted_sum(&c, &self.weights).re
    }

    /// Writes nodes row-major (re, im pairs) after the weight column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("# key={}\n", self.cache_key()));
        out.push_str(&format!("# accuracy={:e}\n", self.estimated_accuracy));
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            out.push_str(&format!("{w:e}"));
            for z in u.matrix().as_slice() {
                out.push_str(&format!(",{:e},{:e}", z.re, z.im));
            }
            out.push('\n');
        }
        crate::io::write_atomic(path, out.as_bytes())
    }

    /// Loads a rule written by [`write_csv`](Self::write_csv); the key must match `template`.
    pub fn read_csv(path: &Path, kind: RuleKind, r: usize, b: usize, param: usize, seed: Option<u64>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut rule =
            QuadratureRule { r, b, kind, param, seed, nodes: Vec::new(), weights: Vec::new(), estimated_accuracy: 0.0 };
        let key = rule.cache_key();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix("# ") {
                if let Some(k) = meta.strip_prefix("key=") {
                    if k != key {
                        return Err(Error::Invalid(format!("cache key {k} does not match {key}")));
                    }
                } else if let Some(a) = meta.strip_prefix("accuracy=") {
                    rule.estimated_accuracy = a.parse().map_err(|_| Error::Invalid("bad accuracy".into()))?;
                }
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
            let nums = nums.map_err(|_| Error::Invalid(format!("bad cache line: {line}")))?;
            let q = r + b;
            if nums.len() != 1 + 2 * r * q {
                return Err(Error::Shape("cache row length".into()));
            }
            let u = CMat::from_fn(r, q, |i, j| C64::new(nums[1 + 2 * (i * q + j)], nums[2 + 2 * (i * q + j)]));
            rule.weights.push(nums[0]);
            rule.nodes.push(ShilovPoint::new(u)?);
        }
        Ok(rule)
    }
}

/// Compensated `Σ wᵢ vᵢ` in index order.
pub fn weighted_sum(vals: &[C64], weights: &[f64]) -> C64 {
    let (mut re, mut im) = (Neumaier::default(), Neumaier::default());
    for (v, &w) in vals.iter().zip(weights) {
        re.add(v.re * w);
        im.add(v.im * w);
    }
    C64::new(re.value(), im.value())
}

#[derive(Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn rank_one(sd: &StructureData) -> Result<()> {
    if sd.r == 1 {
        Ok(())
    } else {
        Err(Error::RankOneOnly(sd.r))
    }
}

/// Points and weights on the unit sphere of `ℂ^d`, exact to total degree `2·level`.
fn sphere_points(d: usize, level: usize) -> Vec<(Vec<C64>, f64)> {
    let m = 2 * level + 1;
    let angles: Vec<C64> = (0..m).map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64)).collect();
    if d == 1 {
        return angles.into_iter().map(|z| (vec![z], 1.0 / m as f64)).collect();
    }
    let inner = sphere_points(d - 1, level);
    let npts = (level + d).div_ceil(2);
    let (xs, ws) = gauss_legendre::<f64>(npts, 0.0, 1.0);
    let mut out = Vec::with_capacity(npts * m * inner.len());
    for (&x, &wx) in xs.iter().zip(&ws) {
        // density of |U₁|² is (d−1)(1−x)^{d−2}
        let wx = wx * (d - 1) as f64 * (1.0 - x).powi(d as i32 - 2);
        let (rad, rest) = (x.sqrt(), (1.0 - x).sqrt());
        for z in &angles {
            for (v, wv) in &inner {
                let mut p = Vec::with_capacity(d);
                p.push(z * rad);
                p.extend(v.iter().map(|c| c * rest));
                out.push((p, wx * wv / m as f64));
            }
        }
    }
    out
}

/// `E|U₁|^{2k} = k!(d−1)!/(k+d−1)!` on the unit sphere of `ℂ^d`.
pub fn sphere_moment(k: usize, d: usize) -> f64 {
    (1..d).fold(1.0, |acc, j| acc * j as f64 / (k + j) as f64)
}

pub fn sphere_rule(sd: &StructureData, level: usize) -> Result<QuadratureRule> {
    rank_one(sd)?;
    let d = 1 + sd.b;
    let pts = sphere_points(d, level);
    let (nodes, weights): (Vec<_>, Vec<_>) =
        pts.into_iter().map(|(p, w)| (ShilovPoint::new_unchecked(CMat::new(1, d, p)), w)).unzip();
    let mut rule = QuadratureRule {
        r: 1,
        b: sd.b,
        kind: RuleKind::DeterministicSphere,
        param: level,
        seed: None,
        nodes,
        weights,
        estimated_accuracy: 0.0,
    };
    // first moment beyond the exactness degree
    let k = level + 1;
    let got = rule.integrate_real(|u| u.first().norm_sqr().powi(k as i32));
    rule.estimated_accuracy = ((got - sphere_moment(k, d)) / sphere_moment(k, d)).abs().max(f64::EPSILON);
    Ok(rule)
}

const CHUNK: usize = 4096;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Haar sample of `S` as an equal-weight rule; node `i` is independent of the sample count.
pub fn stiefel_rule(sd: &StructureData, samples: usize, seed: u64) -> Result<QuadratureRule> {
    if samples == 0 {
        return Err(Error::Invalid("samples must be positive".into()));
    }
    let nchunks = samples.div_ceil(CHUNK);
    let nodes: Vec<ShilovPoint> = (0..nchunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(move |_| ShilovPoint::new_unchecked(random_shilov_matrix(&mut rng, sd))).collect::<Vec<_>>()
        })
        .collect();
    let q = (sd.r + sd.b) as f64;
    let var = (q - 1.0) / (q * q * (q + 1.0));
    Ok(QuadratureRule {
        r: sd.r,
        b: sd.b,
        kind: RuleKind::MonteCarloStiefel,
        param: samples,
        seed: Some(seed),
        weights: vec![1.0 / samples as f64; samples],
        nodes,
        estimated_accuracy: 3.0 * q * (var / samples as f64).sqrt(),
    })
}

/// Monte Carlo mean with standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    #[serde(serialize_with = "crate::structure::ser_complex")]
    pub mean: C64,
    pub std_err: f64,
    pub samples: usize,
}

/// Streams the same Haar sample as [`stiefel_rule`] without storing it, for several integrands at once.
pub fn stiefel_means(
    sd: &StructureData,
    samples: usize,
    seed: u64,
    k_fns: usize,
    f: impl Fn(&CMat, &mut [C64]) + Sync,
) -> Vec<McEstimate> {
    let nchunks = samples.div_ceil(CHUNK);
    let partial: Vec<(Vec<C64>, Vec<f64>)> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut sum = vec![C64::new(0.0, 0.0); k_fns];
            let mut sq = vec![0.0; k_fns];
            let mut buf = vec![C64::new(0.0, 0.0); k_fns];
            for _ in 0..len {
                let u = random_shilov_matrix(&mut rng, sd);
                f(&u, &mut buf);
                for i in 0..k_fns {
                    sum[i] += buf[i];
                    sq[i] += buf[i].norm_sqr();
                }
            }
            (sum, sq)
        })
        .collect();
    let nf = samples as f64;
    (0..k_fns)
        .map(|i| {
            let s: C64 = partial.iter().map(|(a, _)| a[i]).sum();
            let q: f64 = partial.iter().map(|(_, b)| b[i]).sum();
            let mean = s / nf;
            let var = (q / nf - mean.norm_sqr()).max(0.0);
            McEstimate { mean, std_err: (var / nf).sqrt(), samples }
        })
        .collect()
}

/// Rule for zonal integrands at rank one, concentrated near `U₁ = 1` at scale `eps`.
///
/// With `w = 1 − U₁ = ρe^{iψ}` the pushforward of `dU` is `(b/π)(1−|u|²)^{b−1} dA`;
/// `ψ` uses Gauss–Legendre and `log ρ` composite Gauss–Legendre panels of unit width.
/// Default angular and per-panel node counts for [`zonal_disk_rule`].
pub const ZONAL_PSI: usize = 160;
pub const ZONAL_PANEL: usize = 12;

pub fn zonal_disk_rule(sd: &StructureData, eps: f64, n_psi: usize, per_panel: usize) -> Result<QuadratureRule> {
    rank_one(sd)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Invalid(format!("concentration scale {eps} outside (0, 1]")));
    }
    let b = sd.b as f64;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (psis, wpsis) = tanh_sinh(n_psi, half_pi);
    let (gx, gw) = gauss_legendre::<f64>(per_panel, 0.0, 1.0);
    let v_lo = eps.ln() - 20.0;
    let q = 1 + sd.b;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (&psi, &wpsi) in psis.iter().zip(&wpsis) {
        let two_cos = 2.0 * psi.cos();
        let v_hi = two_cos.ln();
        let panels = ((v_hi - v_lo).ceil() as usize).max(1);
        let width = (v_hi - v_lo) / panels as f64;
        for p in 0..panels {
            for (&x, &wx) in gx.iter().zip(&gw) {
                let v = v_lo + width * (p as f64 + x);
                let rho = v.exp();
                let dens = (rho * (two_cos - rho)).max(0.0);
                let w = b / std::f64::consts::PI * rho * rho * dens.powf(b - 1.0) * wx * width * wpsi;
                let u1 = C64::new(1.0 - rho * psi.cos(), -rho * psi.sin());
                let mut row = vec![C64::new(0.0, 0.0); q];
                row[0] = u1;
                row[1] = C64::new((1.0 - u1.norm_sqr()).max(0.0).sqrt(), 0.0);
                nodes.push(ShilovPoint::new_unchecked(CMat::new(1, q, row)));
                weights.push(w);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    Ok(QuadratureRule {
        r: 1,
        b: sd.b,
        kind: RuleKind::ZonalDisk,
        param: n_psi * per_panel,
        seed: None,
        nodes,
        weights,
        estimated_accuracy: (total - 1.0).abs().max(f64::EPSILON),
    })
}

/// Tanh-sinh nodes on `(−a, a)`; the upper limit `ln(2cos ψ)` is singular at the ends.
fn tanh_sinh(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let n = n.max(3);
    let x_max = 3.2;
    let h = 2.0 * x_max / (n - 1) as f64;
    let c = std::f64::consts::FRAC_PI_2;
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        let x = -x_max + h * i as f64;
        let u = c * x.sinh();
        let y = u.tanh();
        if y.abs() >= 1.0 {
            continue;
        }
        xs.push(a * y);
        ws.push(a * h * c * x.cosh() / u.cosh().powi(2));
    }
    (xs, ws)
}

/// Trapezoid rule on `N̄₁` at rank one in `sinh`-mapped orthonormal coordinates.
#[derive(Clone, Debug)]
pub struct HeisenbergChart {
    pub basis: NbarBasis,
    pub coords: Vec<Vec<f64>>,
    /// Calibrated so that `Σ wᵢ e^{−2n h₁(n̄ᵢ)} = 1`.
    pub weights: Vec<f64>,
    pub heights: Vec<f64>,
    pub radius: f64,
    /// Raw Lebesgue mass of `e^{−2n h₁}` before calibration.
    pub raw_normalization: f64,
    pub shell_fraction: f64,
}

impl HeisenbergChart {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn element(&self, i: usize) -> GroupElement {
        self.basis.nbar(&self.coords[i], 1)
    }

    /// `Σ wᵢ f(n̄ᵢ, h₁(n̄ᵢ))`.
    pub fn integrate(&self, f: impl Fn(&[f64], f64) -> C64 + Sync) -> C64 {
        let vals: Vec<C64> = (0..self.len()).into_par_iter().map(|i| f(&self.coords[i], self.heights[i])).collect();
        weighted_sum(&vals, &self.weights)
    }
}

const SHELL_TOL: f64 = 1e-4;

/// `grid` trapezoid points per unit of the `sinh` variable; the radius doubles from
/// `radius` until the outer quarter of the box carries less than `1e-4` of the mass.
pub fn heisenberg_chart(sd: &StructureData, grid: usize, radius: f64) -> Result<HeisenbergChart> {
    rank_one(sd)?;
    if grid == 0 || !(radius > 0.0) {
        return Err(Error::Invalid("grid and radius must be positive".into()));
    }
    let basis = NbarBasis::new(sd);
    let dim = basis.dim();
    let two_n = 2.0 * sd.n as f64;
    let mut radius = radius;
    for _ in 0..6 {
        let per_axis = 2 * (grid as f64 * radius).ceil() as usize + 1;
        let h = 2.0 * radius / (per_axis - 1) as f64;
        let vs: Vec<f64> = (0..per_axis).map(|i| -radius + h * i as f64).collect();
        let total = per_axis.pow(dim as u32);
        let rows: Vec<(Vec<f64>, f64, f64, bool)> = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let mut coords = Vec::with_capacity(dim);
                let mut w = 1.0;
                let mut outer = false;
                for _ in 0..dim {
                    let v = vs[idx % per_axis];
                    idx /= per_axis;
                    outer |= v.abs() > 0.75 * radius;
                    let end = if v.abs() == radius { 0.5 } else { 1.0 };
                    coords.push(v.sinh());
                    w *= v.cosh() * h * end;
                }
                let ht = height(&basis.nbar(&coords, 1)).unwrap_or(f64::INFINITY);
                (coords, w, ht, outer)
            })
            .collect();
        let mass: f64 = rows.iter().map(|(_, w, ht, _)| w * (-two_n * ht).exp()).sum();
        let shell: f64 = rows.iter().filter(|r| r.3).map(|(_, w, ht, _)| w * (-two_n * ht).exp()).sum();
        let frac = shell / mass;
        if frac < SHELL_TOL {
            let (coords, weights, heights): (Vec<_>, Vec<_>, Vec<_>) =
                rows.into_iter().fold((vec![], vec![], vec![]), |mut acc, (c, w, ht, _)| {
                    acc.0.push(c);
                    acc.1.push(w / mass);
                    acc.2.push(ht);
                    acc
                });
            return Ok(HeisenbergChart {
                basis,
                coords,
                weights,
                heights,
                radius,
                raw_normalization: mass,
                shell_fraction: frac,
            });
        }
        radius *= 2.0;
    }
    Err(Error::NonConvergence("heisenberg chart tail did not fall below 1e-4".into()))
}

/// Seeded random chart coordinates: each `sinh⁻¹`-coordinate uniform in `[−radius, radius]`.
pub fn chart_samples(sd: &StructureData, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let dim = 2 * sd.b + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-radius..radius).sinh()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{kappa_factor, mobius_boundary, random_k};
    use crate::structure::structure_data;

    #[test]
    fn sphere_rule_moments() {
        let sd = structure_data(1, 1).unwrap();
        let rule = sphere_rule(&sd, 2).unwrap();
        assert_eq!(rule.len(), 50);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(rule.integrate(|u| u.first()).norm() < 1e-15);
        assert!((rule.integrate(|u| C64::new(u.first().norm_sqr(), 0.0)).re - 0.5).abs() < 1e-14);
        let sd3 = structure_data(1, 3).unwrap();
        let rule = sphere_rule(&sd3, 4).unwrap();
        let m1 = rule.integrate_real(|u| u.first().norm_sqr());
        assert!((m1 - 0.25).abs() < 1e-14, "{m1}");
        assert!((rule.integrate_real(|u| u.first().norm_sqr().powi(4)) - sphere_moment(4, 4)).abs() < 1e-14);
        assert!(sphere_rule(&structure_data(2, 1).unwrap(), 3).is_err());
    }

    #[test]
    fn sphere_rule_is_exact_on_mixed_monomials() {
        let sd = structure_data(1, 2).unwrap();
        let rule = sphere_rule(&sd, 3).unwrap();
        // E|U₁|²|U₂|² = 1/(d(d+1)) on ℂ^d
        let got = rule.integrate_real(|u| u.matrix()[(0, 0)].norm_sqr() * u.matrix()[(0, 1)].norm_sqr());
        assert!((got - 1.0 / 12.0).abs() < 1e-14);
        let odd = rule.integrate(|u| u.matrix()[(0, 0)] * u.matrix()[(0, 1)].conj());
        assert!(odd.norm() < 1e-15);
    }

    #[test]
    fn stiefel_rule_moments_and_determinism() {
        let sd = structure_data(2, 1).unwrap();
        let rule = stiefel_rule(&sd, 20000, 5).unwrap();
        let again = stiefel_rule(&sd, 20000, 5).unwrap();
        assert_eq!(rule.nodes, again.nodes);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let est = rule.integrate_real(|u| u.matrix()[(0, 0)].norm_sqr());
        assert!((est - 1.0 / 3.0).abs() < rule.estimated_accuracy, "{est}");
        let other = stiefel_rule(&sd, 20000, 6).unwrap().integrate_real(|u| u.matrix()[(0, 0)].norm_sqr());
        assert!((est - other).abs() < 2.0 * rule.estimated_accuracy);
        let means = stiefel_means(&sd, 20000, 5, 1, |u, out| out[0] = C64::new(u[(0, 0)].norm_sqr(), 0.0));
        assert!((means[0].mean.re - est).abs() < 1e-12);
    }

    #[test]
    fn zonal_disk_rule_integrates_moments() {
        for b in [1, 2] {
            let sd = structure_data(1, b).unwrap();
            for eps in [1.0, 1e-3, 1e-7] {
                let rule = zonal_disk_rule(&sd, eps, ZONAL_PSI, ZONAL_PANEL).unwrap();
                assert!(rule.estimated_accuracy < 1e-10, "b={b} eps={eps}: {}", rule.estimated_accuracy);
                let m = rule.integrate_real(|u| u.first().norm_sqr().powi(3));
                assert!((m - sphere_moment(3, b + 1)).abs() < 1e-10);
                assert!(rule.nodes.iter().all(|u| crate::group::isometry_residual(u.matrix()) < 1e-12));
            }
        }
    }

    #[test]
    fn haar_invariance_of_sphere_rule() {
        let sd = structure_data(1, 1).unwrap();
        let rule = sphere_rule(&sd, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_k(&mut rng, &sd);
        let f = |u: &ShilovPoint| C64::new(u.matrix()[(0, 0)].re.powi(2) + u.matrix()[(0, 1)].im, 0.0);
        let plain = rule.integrate(f);
        let moved = rule.integrate(|u| f(&mobius_boundary(&k, u).unwrap()));
        assert!((plain - moved).norm() < 1e-13);
    }

    #[test]
    fn heisenberg_normalization_and_pushforward() {
        let sd = structure_data(1, 1).unwrap();
        let chart = heisenberg_chart(&sd, 3, 4.0).unwrap();
        let total = chart.integrate(|_, h| C64::new((-4.0 * h).exp(), 0.0));
        assert!((total.re - 1.0).abs() < 1e-12);
        let u0 = ShilovPoint::base(&sd);
        let push = chart.integrate(|c, h| {
            let nb = chart.basis.nbar(c, 1);
            let k = kappa_factor(&nb, &sd).unwrap();
            let u = mobius_boundary(&k, &u0).unwrap();
            C64::new(u.first().norm_sqr() * (-4.0 * h).exp(), 0.0)
        });
        assert!((push.re - 0.5).abs() < 5e-3, "{push}");
        assert!(chart.heights.iter().all(|h| *h >= -1e-12));
    }

    #[test]
    fn cache_round_trip() {
        let sd = structure_data(1, 1).unwrap();
        let rule = sphere_rule(&sd, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.csv");
        rule.write_csv(&path).unwrap();
        let back = QuadratureRule::read_csv(&path, RuleKind::DeterministicSphere, 1, 1, 2, None).unwrap();
        assert_eq!(back.len(), rule.len());
        for (a, b) in back.weights.iter().zip(&rule.weights) {
            assert!((a - b).abs() < 1e-15 * b.abs().max(1.0));
        }
        assert!(QuadratureRule::read_csv(&path, RuleKind::DeterministicSphere, 1, 1, 3, None).is_err());
    }
}
