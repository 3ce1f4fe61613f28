//! K-types at rank one: disk polynomials, zonal projections, `Φ_{s,δ}`, and
//! band-limited functions on `S` with an exact resampler.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::{ZONAL_PANEL, ZONAL_PSI, sphere_rule, weighted_sum, zonal_disk_rule, QuadratureRule};
use crate::error::{Error, Result};
use crate::group::{complete_isometry, k_representative, radial, GroupElement, ShilovPoint};
use crate::poisson::{boundary_gap, transform, transform_radial, transform_transported, BoundaryFunction};
use crate::scalar::Real;
use crate::special::{jacobi, jacobi_at_one};
use crate::structure::{SpectralParam, StructureData};
use crate::{CMat, C64};

/// Bidegree `(p, q)` of harmonics on the sphere of `ℂ^{1+b}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct KTypeIndex {
    pub p: usize,
    pub q: usize,
}

impl KTypeIndex {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    pub fn degree(&self) -> usize {
        self.p + self.q
    }

    /// `dim H_{p,q}(ℂ^d)`, `d = b + 1`.
    pub fn dimension(&self, b: usize) -> usize {
        let d = b + 1;
        let (p, q) = (self.p, self.q);
        // (p+q+d−1)/(d−1) · C(p+d−2, p) · C(q+d−2, q)
        let binom = |n: usize, k: usize| (1..=k).fold(1usize, |acc, j| acc * (n + 1 - j) / j);
        (p + q + d - 1) * binom(p + d - 2, p) * binom(q + d - 2, q) / (d - 1)
    }

    /// All indices with `p + q ≤ max_degree`, in enumeration order.
    pub fn up_to(max_degree: usize) -> Vec<Self> {
        (0..=max_degree).flat_map(|deg| (0..=deg).map(move |p| Self::new(p, deg - p))).collect()
    }
}

impl Ord for KTypeIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.degree(), self.p).cmp(&(other.degree(), other.p))
    }
}

impl PartialOrd for KTypeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for KTypeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

/// Disk polynomial `R^{(b−1)}_{p,q}(u)` with `R(1) = 1`.
pub fn zonal<T: Real>(delta: KTypeIndex, u: Complex<T>, b: usize) -> Complex<T> {
    let alpha = T::of(b - 1);
    let (p, q) = (delta.p, delta.q);
    let k = p.min(q);
    let beta = T::of(p.abs_diff(q));
    let x = T::lit(2.0) * u.norm_sqr() - T::one();
    let radial_part = jacobi(k, alpha, beta, x) / jacobi_at_one(k, alpha);
    let lead = if p >= q { u } else { u.conj() };
    lead.powu(p.abs_diff(q) as u32) * radial_part
}

/// `φ_δ(U) = R_δ(U₁)`.
pub fn phi_delta(delta: KTypeIndex, b: usize) -> BoundaryFunction {
    BoundaryFunction::new(format!("zonal {delta}"), move |u| zonal(delta, u.first(), b))
        .with_coefficients(BTreeMap::from([(delta, C64::new(1.0, 0.0))]))
}

/// `R_δ(⟨U, W⟩)`, the zonal function of `V_δ` centred at `W`.
pub fn translated_zonal(delta: KTypeIndex, center: &ShilovPoint, b: usize) -> BoundaryFunction {
    let w = center.matrix().clone();
    BoundaryFunction::new(format!("zonal {delta} at W"), move |u| zonal(delta, pairing(u.matrix(), &w), b))
}

/// `⟨U, W⟩ = Σ Uᵢ W̄ᵢ` at rank one.
pub fn pairing(u: &CMat, w: &CMat) -> C64 {
    u.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b.conj()).sum()
}

fn rank_one(sd: &StructureData) -> Result<()> {
    if sd.r == 1 {
        Ok(())
    } else {
        Err(Error::RankOneOnly(sd.r))
    }
}

/// Coefficient of `φ_δ` in `f`: `d_δ ∫ f conj(φ_δ)`.
pub fn project_ktype(f: &BoundaryFunction, delta: KTypeIndex, rule: &QuadratureRule) -> Result<C64> {
    if rule.r != 1 {
        return Err(Error::RankOneOnly(rule.r));
    }
    let d = delta.dimension(rule.b) as f64;
    Ok(rule.integrate(|u| f.eval(u) * zonal(delta, u.first(), rule.b).conj()) * d)
}

#[derive(Clone, Debug, Serialize)]
pub struct ZonalExpansion {
    pub coefficients: Vec<(KTypeIndex, C64)>,
    pub norm_sq: f64,
    /// `1 − Σ |c_δ|²/d_δ ÷ ‖f‖²`.
    pub parseval_defect: f64,
}

/// Zonal coefficients up to `max_degree`, with the Parseval defect of the truncation.
pub fn zonal_expansion(f: &BoundaryFunction, max_degree: usize, rule: &QuadratureRule) -> Result<ZonalExpansion> {
    let norm_sq = rule.integrate_real(|u| f.eval(u).norm_sqr());
    let mut captured = 0.0;
    let mut coefficients = Vec::new();
    for delta in KTypeIndex::up_to(max_degree) {
        let c = project_ktype(f, delta, rule)?;
        captured += c.norm_sqr() / delta.dimension(rule.b) as f64;
        coefficients.push((delta, c));
    }
    let parseval_defect = if norm_sq > 0.0 { 1.0 - captured / norm_sq } else { 0.0 };
    if parseval_defect.abs() > 0.05 {
        log::warn!("zonal expansion captures only {:.1}% of the norm", 100.0 * (1.0 - parseval_defect));
    }
    Ok(ZonalExpansion { coefficients, norm_sq, parseval_defect })
}

/// `Φ_{s,δ}(a_t) = 𝓟_s φ_δ(a_t·0)` with the given rule.
pub fn phi_s_delta(sp: &SpectralParam, delta: KTypeIndex, t: f64, rule: &QuadratureRule) -> Result<C64> {
    rank_one(&sp.sd)?;
    let z = crate::poisson::radial_point(t, &sp.sd);
    transform(sp, &phi_delta(delta, sp.sd.b), &z, rule)
}

/// `e^{−growth·t} Φ_{s,δ}(a_t)` on the graded zonal rule.
pub fn renormalized_phi_s_delta(sp: &SpectralParam, delta: KTypeIndex, t: f64) -> Result<C64> {
    rank_one(&sp.sd)?;
    let b = sp.sd.b;
    let rule = zonal_disk_rule(&sp.sd, boundary_gap(t.abs()).min(1.0), ZONAL_PSI, ZONAL_PANEL)?;
    let tau = t.tanh();
    let ln_scale = -(sp.growth * t);
    let num = boundary_gap(t) * (1.0 + tau);
    Ok(rule.integrate(|u| {
        let u1 = u.first();
        let den = (C64::new(1.0, 0.0) - u1.conj() * tau).norm_sqr();
        (sp.sigma * (num / den).ln() + ln_scale).exp() * zonal(delta, u1, b)
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct SphericalProfile {
    pub delta: KTypeIndex,
    pub t_grid: Vec<f64>,
    pub values: Vec<(f64, f64)>,
}

/// Table of `Φ_{s,δ}(a_t)` for every `δ` with `p + q ≤ max_degree`.
pub fn spectrum(sp: &SpectralParam, max_degree: usize, t_grid: &[f64]) -> Result<Vec<SphericalProfile>> {
    rank_one(&sp.sd)?;
    KTypeIndex::up_to(max_degree)
        .into_iter()
        .map(|delta| {
            let values = t_grid
                .iter()
                .map(|&t| renormalized_phi_s_delta(sp, delta, t).map(|v| v * (sp.growth * t).exp()).map(|v| (v.re, v.im)))
                .collect::<Result<_>>()?;
            Ok(SphericalProfile { delta, t_grid: t_grid.to_vec(), values })
        })
        .collect()
}

/// Representative `k̃ a_t` of the point `τ·(kU₀)`.
pub fn node_element(u: &ShilovPoint, t: f64, sd: &StructureData) -> Result<GroupElement> {
    Ok(k_representative(u, sd)?.mul(&radial(t, sd)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SchurReport {
    pub delta: KTypeIndex,
    pub t: f64,
    pub used_nodes: usize,
    pub ratio_mean: (f64, f64),
    pub ratio_cv: f64,
    pub phi_s_delta: (f64, f64),
    pub mean_rel_err: f64,
    pub passed: bool,
}

/// Checks `𝓟_s f(k a_t) = Φ_{s,δ}(a_t) f(k)` for `f = R_δ(⟨·, W⟩)` over the given nodes.
pub fn schur_diagonality(
    sp: &SpectralParam,
    delta: KTypeIndex,
    t: f64,
    center: &ShilovPoint,
    nodes: &[ShilovPoint],
    rule: &QuadratureRule,
) -> Result<SchurReport> {
    rank_one(&sp.sd)?;
    let b = sp.sd.b;
    let f = translated_zonal(delta, center, b);
    let vals: Vec<C64> = nodes.iter().map(|u| f.eval(u)).collect();
    let top = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut ratios = Vec::new();
    for (u, fv) in nodes.iter().zip(&vals) {
        if fv.norm() <= 0.1 * top {
            continue;
        }
        let g = node_element(u, t, &sp.sd)?;
        ratios.push(transform_transported(sp, &f, &g, rule)? / fv);
    }
    if ratios.is_empty() {
        return Err(Error::Invalid("no node with |f| above 10% of its maximum".into()));
    }
    let k = ratios.len() as f64;
    let mean: C64 = ratios.iter().sum::<C64>() / k;
    let sd_dev = (ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / k).sqrt();
    let cv = sd_dev / mean.norm();
    let phi = renormalized_phi_s_delta(sp, delta, t)? * (sp.growth * t).exp();
    let mean_rel_err = (mean - phi).norm() / phi.norm();
    Ok(SchurReport {
        delta,
        t,
        used_nodes: ratios.len(),
        ratio_mean: (mean.re, mean.im),
        ratio_cv: cv,
        phi_s_delta: (phi.re, phi.im),
        mean_rel_err,
        passed: cv <= 1e-3 && mean_rel_err <= 1e-3,
    })
}

/// Polynomial in the entries of `U` and their conjugates, `Σ c_j U^{α_j} Ū^{β_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandLimited {
    pub entries: usize,
    pub degree: usize,
    pub exponents: Vec<(Vec<u8>, Vec<u8>)>,
    pub coeffs: Vec<C64>,
}

/// Exponent pairs `(α, β)` over `entries` variables with `|α| + |β| ≤ degree`.
pub fn monomials(entries: usize, degree: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
    fn rec(slots: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == slots {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e as u8);
            rec(slots, left - e, cur, out);
            cur.pop();
        }
    }
    let mut flat = Vec::new();
    rec(2 * entries, degree, &mut Vec::new(), &mut flat);
    flat.sort_by_key(|v| (v.iter().map(|&x| x as usize).sum::<usize>(), std::cmp::Reverse(v.clone())));
    flat.into_iter().map(|v| (v[..entries].to_vec(), v[entries..].to_vec())).collect()
}

fn monomial_values(u: &CMat, degree: usize, exps: &[(Vec<u8>, Vec<u8>)]) -> Vec<C64> {
    let entries = u.as_slice();
    let pows: Vec<Vec<C64>> = entries
        .iter()
        .map(|z| {
            let mut p = vec![C64::new(1.0, 0.0); degree + 1];
            for k in 1..=degree {
                p[k] = p[k - 1] * z;
            }
            p
        })
        .collect();
    exps.iter()
        .map(|(a, b)| {
            let mut v = C64::new(1.0, 0.0);
            for (i, (&ai, &bi)) in a.iter().zip(b).enumerate() {
                if ai > 0 {
                    v *= pows[i][ai as usize];
                }
                if bi > 0 {
                    v *= pows[i][bi as usize].conj();
                }
            }
            v
        })
        .collect()
}

impl BandLimited {
    pub fn eval_matrix(&self, u: &CMat) -> C64 {
        let d = self.degree + 1;
        let mut pows = [C64::new(0.0, 0.0); 64];
        if u.as_slice().len() * d > pows.len() {
            return monomial_values(u, self.degree, &self.exponents).iter().zip(&self.coeffs).map(|(m, c)| m * c).sum();
        }
        for (i, z) in u.as_slice().iter().enumerate() {
            pows[i * d] = C64::new(1.0, 0.0);
            for k in 1..d {
                pows[i * d + k] = pows[i * d + k - 1] * z;
            }
        }
        let mut acc = C64::new(0.0, 0.0);
        for ((a, b), c) in self.exponents.iter().zip(&self.coeffs) {
            let mut v = *c;
            for (i, (&ai, &bi)) in a.iter().zip(b).enumerate() {
                if ai > 0 {
                    v *= pows[i * d + ai as usize];
                }
                if bi > 0 {
                    v *= pows[i * d + bi as usize].conj();
                }
            }
            acc += v;
        }
        acc
    }

    pub fn to_function(&self, description: impl Into<String>) -> BoundaryFunction {
        let me = self.clone();
        BoundaryFunction::new(description, move |u| me.eval_matrix(u.matrix()))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|x| x * c).collect(), ..self.clone() }
    }
}

/// Random polynomial of total degree `≤ degree` in the entries of `U`, with a unit constant term
/// and the remaining coefficients drawn uniformly from the disk of radius `1/√terms`.
pub fn random_band_limited(sd: &StructureData, degree: usize, seed: u64) -> BandLimited {
    let entries = sd.r * (sd.r + sd.b);
    let exponents = monomials(entries, degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (exponents.len() as f64).sqrt();
    let coeffs = exponents
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i == 0 {
                C64::new(1.0, 0.0)
            } else {
                let (rad, arg): (f64, f64) = (rng.gen::<f64>().sqrt() * scale, rng.gen_range(0.0..std::f64::consts::TAU));
                C64::from_polar(rad, arg)
            }
        })
        .collect();
    BandLimited { entries, degree, exponents, coeffs }
}

/// Orthogonal projection onto polynomials of degree `≤ D` on the rank-one boundary,
/// from values on a sphere rule of level `D` (exact for the products involved).
#[derive(Clone, Debug)]
pub struct Resampler {
    pub rule: QuadratureRule,
    degree: usize,
    exponents: Vec<(Vec<u8>, Vec<u8>)>,
    /// Rows: orthonormal basis functions as monomial coefficient vectors.
    basis: Vec<Vec<C64>>,
    /// `values[node][j]`: monomial j at node.
    node_monomials: Vec<Vec<C64>>,
}

impl Resampler {
    pub fn new(sd: &StructureData, degree: usize) -> Result<Self> {
        rank_one(sd)?;
        let rule = sphere_rule(sd, degree)?;
        let exponents = monomials(1 + sd.b, degree);
        let node_monomials: Vec<Vec<C64>> =
            rule.nodes.iter().map(|u| monomial_values(u.matrix(), degree, &exponents)).collect();
        let nm = exponents.len();
        let inner = |x: &[C64], y: &[C64]| -> C64 {
            let vals: Vec<C64> = node_monomials
                .iter()
                .map(|row| {
                    let a: C64 = row.iter().zip(x).map(|(m, c)| m * c).sum();
                    let b: C64 = row.iter().zip(y).map(|(m, c)| m * c).sum();
                    a * b.conj()
                })
                .collect();
            weighted_sum(&vals, &rule.weights)
        };
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for j in 0..nm {
            let mut v = vec![C64::new(0.0, 0.0); nm];
            v[j] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for e in &basis {
                    let c = inner(&v, e);
                    for (vi, ei) in v.iter_mut().zip(e) {
                        *vi -= c * ei;
                    }
                }
            }
            let norm = inner(&v, &v).re.sqrt();
            if norm > 1e-8 {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        Ok(Self { rule, degree, exponents, basis, node_monomials })
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Projects the values `F(Vᵢ)` at the rule nodes to a polynomial.
    pub fn fit(&self, values: &[C64]) -> Result<BandLimited> {
        if values.len() != self.rule.len() {
            return Err(Error::Shape("one value per resampler node".into()));
        }
        let nm = self.exponents.len();
        let mut coeffs = vec![C64::new(0.0, 0.0); nm];
        for e in &self.basis {
            let vals: Vec<C64> = self
                .node_monomials
                .iter()
                .zip(values)
                .map(|(row, f)| f * row.iter().zip(e).map(|(m, c)| m * c).sum::<C64>().conj())
                .collect();
            let a = weighted_sum(&vals, &self.rule.weights);
            for (cj, ej) in coeffs.iter_mut().zip(e) {
                *cj += a * ej;
            }
        }
        Ok(BandLimited { entries: self.exponents[0].0.len(), degree: self.degree, exponents: self.exponents.clone(), coeffs })
    }

    pub fn fit_function(&self, f: &BoundaryFunction) -> Result<BandLimited> {
        let vals: Vec<C64> = self.rule.nodes.iter().map(|u| f.eval(u)).collect();
        self.fit(&vals)
    }
}

/// `𝓟_s f(τ·U)` for `U` at the resampler nodes, with the transported rule.
pub fn transform_on_nodes(
    sp: &SpectralParam,
    f: &BoundaryFunction,
    t: f64,
    nodes: &[ShilovPoint],
    rule: &QuadratureRule,
) -> Result<Vec<C64>> {
    nodes.iter().map(|u| transform_radial(sp, f, &complete_isometry(u.matrix())?, t, rule)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::random_shilov;
    use crate::structure::structure_data;

    #[test]
    fn zonal_small_cases() {
        let u = C64::new(0.3, -0.4);
        assert_eq!(zonal(KTypeIndex::new(0, 0), u, 1), C64::new(1.0, 0.0));
        assert!((zonal(KTypeIndex::new(1, 0), u, 2) - u).norm() < 1e-15);
        assert!((zonal(KTypeIndex::new(0, 1), u, 2) - u.conj()).norm() < 1e-15);
        for d in KTypeIndex::up_to(4) {
            assert!((zonal(d, C64::new(1.0, 0.0), 2) - 1.0).norm() < 1e-13);
        }
        let single = zonal(KTypeIndex::new(2, 1), Complex::<f32>::new(0.3, 0.1), 1);
        let double = zonal(KTypeIndex::new(2, 1), C64::new(0.3, 0.1), 1);
        assert!((single.re as f64 - double.re).abs() < 1e-6);
    }

    #[test]
    fn dimensions() {
        assert_eq!(KTypeIndex::new(2, 1).dimension(1), 4);
        // ℂ³: H_{1,0} = 3, H_{1,1} = 8
        assert_eq!(KTypeIndex::new(1, 0).dimension(2), 3);
        assert_eq!(KTypeIndex::new(1, 1).dimension(2), 8);
    }

    #[test]
    fn zonals_are_orthogonal_with_the_expected_norm() {
        let sd = structure_data(1, 1).unwrap();
        let rule = sphere_rule(&sd, 12).unwrap();
        let ds = KTypeIndex::up_to(4);
        for &a in &ds {
            for &b in &ds {
                let ip = rule.integrate(|u| zonal(a, u.first(), 1) * zonal(b, u.first(), 1).conj());
                let want = if a == b { 1.0 / a.dimension(1) as f64 } else { 0.0 };
                assert!((ip - want).norm() < 1e-12, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn projection_recovers_combinations() {
        let sd = structure_data(1, 2).unwrap();
        let rule = sphere_rule(&sd, 10).unwrap();
        let parts = [(KTypeIndex::new(0, 0), 0.5), (KTypeIndex::new(1, 0), -1.0), (KTypeIndex::new(2, 1), 0.25), (KTypeIndex::new(1, 2), 2.0)];
        let f = BoundaryFunction::new("mix", move |u| parts.iter().map(|(d, c)| zonal(*d, u.first(), 2) * *c).sum());
        for (d, c) in parts {
            assert!((project_ktype(&f, d, &rule).unwrap() - c).norm() < 1e-10);
        }
        assert!(project_ktype(&f, KTypeIndex::new(3, 0), &rule).unwrap().norm() < 1e-10);
        let ex = zonal_expansion(&f, 4, &rule).unwrap();
        assert!(ex.parseval_defect.abs() < 1e-10);
    }

    #[test]
    fn resampler_reproduces_band_limited_functions() {
        let sd = structure_data(1, 1).unwrap();
        let res = Resampler::new(&sd, 3).unwrap();
        assert_eq!(res.dimension(), 30);
        let f = random_band_limited(&sd, 3, 9);
        let fit = res.fit_function(&f.to_function("f")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = random_shilov(&mut rng, &sd);
            assert!((fit.eval_matrix(u.matrix()) - f.eval_matrix(u.matrix())).norm() < 1e-11);
        }
    }

    #[test]
    fn phi_s_delta_agrees_between_rules() {
        let sd = structure_data(1, 1).unwrap();
        let sp = SpectralParam::real(2.5, &sd);
        let rule = sphere_rule(&sd, 30).unwrap();
        let d = KTypeIndex::new(1, 1);
        let plain = phi_s_delta(&sp, d, 0.0, &rule).unwrap();
        assert!((plain - renormalized_phi_s_delta(&sp, d, 0.0).unwrap()).norm() < 1e-10);
        let zero = phi_s_delta(&sp, KTypeIndex::new(0, 0), 0.8, &rule).unwrap();
        let phi = crate::poisson::phi_s(&sp, 0.8, &rule).unwrap();
        assert!((zero - phi).norm() < 1e-14);
    }
}
