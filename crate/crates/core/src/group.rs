//! `G = SU(r, r+b)` in the block convention `J = diag(I_r, -I_{r+b})`,
//! acting on `r × (r+b)` matrices by `Z ↦ (AZ + B)(CZ + D)⁻¹`.
//!
//! The horospherical height `h₁(g)` (so that `H₁(g) = h₁ X₀`) is computed from
//! the determinant identity
//! `e^{-2r h₁(g)} = det(I − ZZ*) / |det(I − Z U₀*)|²`, `Z = g⁻¹·0`,
//! rather than by factoring `g`; the cocycle laws are checked in the tests.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::structure::StructureData;
use crate::{CMat, C64};

const MEMBERSHIP_TOL: f64 = 1e-8;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    g: CMat,
    r: usize,
}

impl GroupElement {
    /// Wraps `g`, rejecting matrices whose invariant residual exceeds `1e-8`.
    pub fn new(g: CMat, sd: &StructureData) -> Result<Self> {
        if g.rows() != sd.m || g.cols() != sd.m {
            return Err(Error::Shape(format!("group element must be {m}x{m}", m = sd.m)));
        }
        let el = Self { g, r: sd.r };
        let res = el.residual();
        if !(res <= MEMBERSHIP_TOL) {
            return Err(Error::OutsideGroup(res));
        }
        Ok(el)
    }

    pub(crate) fn new_unchecked(g: CMat, r: usize) -> Self {
        Self { g, r }
    }

    pub fn identity(sd: &StructureData) -> Self {
        Self { g: CMat::identity(sd.m), r: sd.r }
    }

    pub fn matrix(&self) -> &CMat {
        &self.g
    }

    pub fn size(&self) -> usize {
        self.g.rows()
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    /// `max(‖g*Jg − J‖_max, |det g − 1|)`.
    pub fn residual(&self) -> f64 {
        let j = signature(self.r, self.g.rows());
        let lhs = &(&self.g.adjoint() * &j) * &self.g;
        let unimod = (self.g.det() - C64::one()).norm();
        (&lhs - &j).max_abs().max(unimod)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { g: &self.g * &other.g, r: self.r }
    }

    /// `g⁻¹ = J g* J`.
    pub fn inverse(&self) -> Self {
        let j = signature(self.r, self.g.rows());
        Self { g: &(&j * &self.g.adjoint()) * &j, r: self.r }
    }

    fn blocks(&self) -> (CMat, CMat, CMat, CMat) {
        let (r, m) = (self.r, self.g.rows());
        let q = m - r;
        (self.g.block(0, 0, r, r), self.g.block(0, r, r, q), self.g.block(r, 0, q, r), self.g.block(r, r, q, q))
    }
}

/// `J = diag(I_r, −I_{m−r})`.
pub fn signature(r: usize, m: usize) -> CMat {
    CMat::diag(&(0..m).map(|i| if i < r { c(1.0) } else { c(-1.0) }).collect::<Vec<_>>())
}

/// A point `Z` of the domain: `I − ZZ*` positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPoint(CMat);

impl DomainPoint {
    pub fn new(z: CMat) -> Result<Self> {
        let h = &CMat::identity(z.rows()) - &(&z * &z.adjoint());
        if h.is_strictly_positive()? {
            Ok(Self(z))
        } else {
            Err(Error::OutsideDomain)
        }
    }

    pub fn origin(sd: &StructureData) -> Self {
        Self(CMat::zeros(sd.r, sd.r + sd.b))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

/// A point `U` of the Shilov boundary: `UU* = I_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShilovPoint(CMat);

impl ShilovPoint {
    pub fn new(u: CMat) -> Result<Self> {
        let res = isometry_residual(&u);
        if res <= 1e-10 {
            Ok(Self(u))
        } else {
            Err(Error::OffBoundary(res))
        }
    }

    pub(crate) fn new_unchecked(u: CMat) -> Self {
        Self(u)
    }

    /// Base point `U₀ = [I_r | 0]`.
    pub fn base(sd: &StructureData) -> Self {
        Self(base_point(sd.r, sd.b))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// First coordinate `U₁₁`; at rank one this is `⟨U, U₀⟩`.
    pub fn first(&self) -> C64 {
        self.0[(0, 0)]
    }
}

pub fn base_point(r: usize, b: usize) -> CMat {
    let mut u = CMat::zeros(r, r + b);
    for i in 0..r {
        u[(i, i)] = c(1.0);
    }
    u
}

pub fn isometry_residual(u: &CMat) -> f64 {
    (&(u * &u.adjoint()) - &CMat::identity(u.rows())).max_abs()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorosphericalData {
    pub h1: f64,
    pub boundary_image: ShilovPoint,
}

/// Fractional-linear action on an `r × (r+b)` matrix.
pub fn mobius_matrix(g: &GroupElement, z: &CMat) -> Result<CMat> {
    let (a, b, cc, d) = g.blocks();
    let num = &(&a * z) + &b;
    let den = &(&cc * z) + &d;
    let cond = den.condition();
    if !(cond <= 1e12) {
        return Err(Error::Degenerate(format!("CZ + D has condition number {cond:.3e}")));
    }
    // X = num · den⁻¹  ⇔  den* X* = num*
    Ok(den.adjoint().solve(&num.adjoint())?.adjoint())
}

pub fn mobius(g: &GroupElement, z: &DomainPoint) -> Result<DomainPoint> {
    Ok(DomainPoint(mobius_matrix(g, z.matrix())?))
}

pub fn mobius_boundary(g: &GroupElement, u: &ShilovPoint) -> Result<ShilovPoint> {
    Ok(ShilovPoint(mobius_matrix(g, u.matrix())?))
}

/// `g · 0 = B D⁻¹`.
pub fn orbit_of_origin(g: &GroupElement) -> Result<CMat> {
    let (r, m) = (g.r, g.g.rows());
    mobius_matrix(g, &CMat::zeros(r, m - r))
}

/// `det(I − ZZ*) / |det(I − ZU*)|²`, the base of the Poisson kernel.
pub fn poisson_ratio(z: &CMat, u: &CMat) -> Result<f64> {
    let r = z.rows();
    let num = (&CMat::identity(r) - &(z * &z.adjoint())).det().re;
    let den = (&CMat::identity(r) - &(z * &u.adjoint())).det().norm();
    if !(den > 1e-13) {
        return Err(Error::Degenerate(format!("|det(I - ZU*)| = {den:.3e} at the boundary")));
    }
    Ok(num / (den * den))
}

/// Radial element `a_t = exp(t X₀)` from its closed cosh/sinh form.
pub fn radial(t: f64, sd: &StructureData) -> GroupElement {
    let (r, m) = (sd.r, sd.m);
    let mut g = CMat::identity(m);
    for j in 0..r {
        g[(j, j)] = c(t.cosh());
        g[(r + j, r + j)] = c(t.cosh());
        g[(j, r + j)] = c(t.sinh());
        g[(r + j, j)] = c(t.sinh());
    }
    GroupElement { g, r }
}

/// `X_j = E_{j,r+j} + E_{r+j,j}`.
pub fn cartan_element(j: usize, sd: &StructureData) -> CMat {
    let mut x = CMat::zeros(sd.m, sd.m);
    x[(j, sd.r + j)] = c(1.0);
    x[(sd.r + j, j)] = c(1.0);
    x
}

/// `X₀ = Σ_j X_j`.
pub fn x0(sd: &StructureData) -> CMat {
    (0..sd.r).fold(CMat::zeros(sd.m, sd.m), |acc, j| &acc + &cartan_element(j, sd))
}

/// Scalar `h₁(g)` without the membership check.
pub fn height(g: &GroupElement) -> Result<f64> {
    let z = orbit_of_origin(&g.inverse())?;
    let u0 = base_point(g.r, g.g.rows() - 2 * g.r);
    Ok(-poisson_ratio(&z, &u0)?.ln() / (2.0 * g.r as f64))
}

pub fn h1(g: &GroupElement, sd: &StructureData) -> Result<HorosphericalData> {
    let res = g.residual();
    if !(res <= MEMBERSHIP_TOL) {
        return Err(Error::OutsideGroup(res));
    }
    Ok(HorosphericalData { h1: height(g)?, boundary_image: mobius_boundary(g, &ShilovPoint::base(sd))? })
}

/// Orthonormal basis of `su(r, r+b)` under `⟨X, Y⟩ = Re tr(XY*)`.
pub fn su_basis(sd: &StructureData) -> Vec<CMat> {
    let (r, m) = (sd.r, sd.m);
    let i = C64::i();
    let mut span = Vec::new();
    let same_block = |a: usize, b: usize| (a < r) == (b < r);
    for a in 0..m {
        for b in (a + 1)..m {
            let (eab, eba) = (CMat::unit(m, m, a, b), CMat::unit(m, m, b, a));
            if same_block(a, b) {
                span.push(&eab - &eba);
                span.push((&eab + &eba).scale(i));
            } else {
                span.push(&eab + &eba);
                span.push((&eab - &eba).scale(i));
            }
        }
    }
    for a in 0..m - 1 {
        span.push((&CMat::unit(m, m, a, a) - &CMat::unit(m, m, a + 1, a + 1)).scale(i));
    }
    gram_schmidt(span)
}

fn gram_schmidt(span: Vec<CMat>) -> Vec<CMat> {
    let mut out: Vec<CMat> = Vec::with_capacity(span.len());
    for mut v in span {
        for _ in 0..2 {
            for e in &out {
                let p = v.inner(e).re;
                v = &v - &e.scale_real(p);
            }
        }
        let norm = v.frobenius_norm();
        if norm > 1e-12 {
            out.push(v.scale_real(1.0 / norm));
        }
    }
    out
}

/// Real matrix of `ad(X)` in an orthonormal basis of the real Lie algebra.
pub fn ad_matrix(x: &CMat, basis: &[CMat]) -> Vec<f64> {
    let d = basis.len();
    let mut out = vec![0.0; d * d];
    for (col, e) in basis.iter().enumerate() {
        let br = x.bracket(e);
        for (row, f) in basis.iter().enumerate() {
            out[row * d + col] = br.inner(f).re;
        }
    }
    out
}

/// Graded basis of `n̄₁`: the `ad(X₀)`-eigenspaces for eigenvalues −1 and −2.
#[derive(Clone, Debug)]
pub struct NbarBasis {
    pub level1: Vec<CMat>,
    pub level2: Vec<CMat>,
}

impl NbarBasis {
    pub fn new(sd: &StructureData) -> Self {
        let basis = su_basis(sd);
        let d = basis.len();
        let (vals, vecs) = symmetric_eigen(&ad_matrix(&x0(sd), &basis), d);
        let combine = |col: usize| {
            basis.iter().enumerate().fold(CMat::zeros(sd.m, sd.m), |acc, (k, e)| &acc + &e.scale_real(vecs[k * d + col]))
        };
        let pick = |target: f64| -> Vec<CMat> {
            vals.iter().enumerate().filter(|(_, &v)| (v - target).abs() < 1e-8).map(|(col, _)| combine(col)).collect()
        };
        Self { level1: pick(-1.0), level2: pick(-2.0) }
    }

    pub fn dim(&self) -> usize {
        self.level1.len() + self.level2.len()
    }

    /// Lie algebra element with the given coordinates (level 1 first).
    pub fn element(&self, coords: &[f64]) -> CMat {
        assert_eq!(coords.len(), self.dim());
        let m = self.level1.first().or(self.level2.first()).map(|e| e.rows()).unwrap_or(0);
        self.level1
            .iter()
            .chain(&self.level2)
            .zip(coords)
            .fold(CMat::zeros(m, m), |acc, (e, &x)| &acc + &e.scale_real(x))
    }

    /// `n̄ = exp(Y)`; `Y` is nilpotent so the series terminates.
    pub fn nbar(&self, coords: &[f64], r: usize) -> GroupElement {
        GroupElement { g: exp_nilpotent(&self.element(coords)), r }
    }

    /// Coordinates of `a_t n̄ a_{−t}` given those of `n̄`.
    pub fn conjugate_coords(&self, coords: &[f64], t: f64) -> Vec<f64> {
        let k = self.level1.len();
        coords.iter().enumerate().map(|(i, &x)| if i < k { x * (-t).exp() } else { x * (-2.0 * t).exp() }).collect()
    }
}

pub fn exp_nilpotent(y: &CMat) -> CMat {
    let n = y.rows();
    let mut term = CMat::identity(n);
    let mut sum = CMat::identity(n);
    for k in 1..=n {
        term = (&term * y).scale_real(1.0 / k as f64);
        if term.max_abs() == 0.0 {
            break;
        }
        sum = &sum + &term;
    }
    sum
}

/// `exp` of a pseudo-random algebra element with coefficients uniform in `[-scale, scale]`.
pub fn random_group_element(seed: u64, scale: f64, sd: &StructureData) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_group_element_with(&mut rng, scale, sd)
}

pub fn random_group_element_with(rng: &mut impl Rng, scale: f64, sd: &StructureData) -> GroupElement {
    let basis = su_basis(sd);
    let x = basis
        .iter()
        .fold(CMat::zeros(sd.m, sd.m), |acc, e| &acc + &e.scale_real(scale * rng.gen_range(-1.0..1.0)));
    GroupElement { g: x.expm(), r: sd.r }
}

/// Haar-distributed `n × n` unitary: unitary factor of a complex Gaussian matrix.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    loop {
        let a = CMat::from_fn(n, n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        if let Ok((q, _)) = a.qr() {
            return q;
        }
    }
}

/// Random element of `K = S(U(r) × U(r+b))`, Haar in each block.
pub fn random_k(rng: &mut impl Rng, sd: &StructureData) -> GroupElement {
    let mut a = haar_unitary(sd.r, rng);
    let d = haar_unitary(sd.r + sd.b, rng);
    let phase = (a.det() * d.det()).arg();
    let fix = C64::from_polar(1.0, -phase);
    for i in 0..sd.r {
        a[(i, 0)] *= fix;
    }
    let mut k = CMat::zeros(sd.m, sd.m);
    k.set_block(0, 0, &a);
    k.set_block(sd.r, sd.r, &d);
    GroupElement { g: k, r: sd.r }
}

/// Unitary `W ∈ SU(r+b)` whose first `r` rows are `u`.
pub fn complete_isometry(u: &CMat) -> Result<CMat> {
    let (r, q) = (u.rows(), u.cols());
    let ustar = u.adjoint();
    let mut cols: Vec<Vec<C64>> = (0..r).map(|j| (0..q).map(|i| ustar[(i, j)]).collect()).collect();
    for e in 0..q {
        if cols.len() == q {
            break;
        }
        let mut v: Vec<C64> = (0..q).map(|i| if i == e { C64::one() } else { C64::zero() }).collect();
        for _ in 0..2 {
            for w in &cols {
                let dot: C64 = w.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, wi) in v.iter_mut().zip(w) {
                    *vi -= dot * wi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.3 {
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    if cols.len() != q {
        return Err(Error::Degenerate("isometry completion failed".into()));
    }
    let mut w = CMat::from_fn(q, q, |i, j| cols[i][j].conj());
    let phase = w.det().arg();
    let fix = C64::from_polar(1.0, -phase);
    for j in 0..q {
        w[(r, j)] *= fix;
    }
    Ok(w)
}

/// Element of `K` mapping `U₀` to the given boundary point: `diag(I_r, W*)`.
pub fn k_representative(u: &ShilovPoint, sd: &StructureData) -> Result<GroupElement> {
    let w = complete_isometry(u.matrix())?;
    let mut k = CMat::identity(sd.m);
    k.set_block(sd.r, sd.r, &w.adjoint());
    Ok(GroupElement { g: k, r: sd.r })
}

/// Representative of `κ(g)K₁` in `K` with the same action on `U₀` as `g`.
pub fn kappa_factor(g: &GroupElement, sd: &StructureData) -> Result<GroupElement> {
    let image = mobius_boundary(g, &ShilovPoint::base(sd))?;
    k_representative(&image, sd)
}

/// Summary of the group invariant suite.
#[derive(Clone, Debug, Serialize)]
pub struct SelfTestReport {
    pub r: usize,
    pub b: usize,
    pub seed: u64,
    pub cocycle_pairs: usize,
    pub cocycle_max_residual: f64,
    pub translation_max_residual: f64,
    pub contraction_samples: usize,
    pub contraction_violations: usize,
    pub mobius_max_residual: f64,
    pub passed: bool,
}

/// Cocycle, translation and contraction laws plus invariance of Ω and S.
pub fn selftest(sd: &StructureData, seed: u64, pairs: usize, contraction_samples: usize) -> Result<SelfTestReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cocycle: f64 = 0.0;
    let mut mob: f64 = 0.0;
    for _ in 0..pairs {
        let x = random_group_element_with(&mut rng, 1.0, sd);
        let y = random_group_element_with(&mut rng, 1.0, sd);
        let ky = kappa_factor(&y, sd)?;
        let lhs = height(&x.mul(&ky))?;
        let rhs = height(&x.mul(&y))? - height(&y)?;
        cocycle = cocycle.max((lhs - rhs).abs());
        let z = orbit_of_origin(&x)?;
        let zz = mobius_matrix(&y, &z)?;
        let h = &CMat::identity(sd.r) - &(&zz * &zz.adjoint());
        if !h.is_strictly_positive()? {
            mob = f64::INFINITY;
        }
        let u = mobius_matrix(&y, &random_shilov_matrix(&mut rng, sd))?;
        mob = mob.max(isometry_residual(&u));
    }
    let nb = NbarBasis::new(sd);
    let mut translation: f64 = 0.0;
    let mut violations = 0;
    for i in 0..contraction_samples {
        let coords: Vec<f64> = (0..nb.dim()).map(|_| rng.sample::<f64, _>(StandardNormal) * 1.5).collect();
        let nbar = nb.nbar(&coords, sd.r);
        let h_n = height(&nbar)?;
        let t = 0.05 + 4.0 * rng.gen::<f64>();
        let conj = nb.nbar(&nb.conjugate_coords(&coords, t), sd.r);
        if height(&conj)? > h_n + 1e-10 {
            violations += 1;
        }
        if i < pairs {
            let a = radial(t, sd);
            let lhs = height(&nbar.mul(&a.inverse()))?;
            translation = translation.max((lhs - (h_n - t)).abs());
        }
    }
    let passed = cocycle <= 1e-9 && translation <= 1e-9 && violations == 0 && mob <= 1e-10;
    Ok(SelfTestReport {
        r: sd.r,
        b: sd.b,
        seed,
        cocycle_pairs: pairs,
        cocycle_max_residual: cocycle,
        translation_max_residual: translation,
        contraction_samples,
        contraction_violations: violations,
        mobius_max_residual: mob,
        passed,
    })
}

/// Haar-random Shilov point as a raw matrix: first `r` rows of a Haar unitary.
pub fn random_shilov_matrix(rng: &mut impl Rng, sd: &StructureData) -> CMat {
    haar_unitary(sd.r + sd.b, rng).block(0, 0, sd.r, sd.r + sd.b)
}

pub fn random_shilov(rng: &mut impl Rng, sd: &StructureData) -> ShilovPoint {
    ShilovPoint(random_shilov_matrix(rng, sd))
}

/// Random domain point `g·0` for a random `g` at the given scale.
pub fn random_domain_point(rng: &mut impl Rng, scale: f64, sd: &StructureData) -> Result<DomainPoint> {
    let g = random_group_element_with(rng, scale, sd);
    Ok(DomainPoint(orbit_of_origin(&g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::structure_data;

    fn sd(r: usize, b: usize) -> StructureData {
        structure_data(r, b).unwrap()
    }

    #[test]
    fn basis_lies_in_the_algebra() {
        for (r, b) in [(1, 1), (2, 1), (1, 3)] {
            let sd = sd(r, b);
            let basis = su_basis(&sd);
            assert_eq!(basis.len(), sd.m * sd.m - 1);
            let j = signature(r, sd.m);
            for x in &basis {
                let lhs = &(&x.adjoint() * &j) + &(&j * x);
                assert!(lhs.max_abs() < 1e-14);
                assert!(x.trace().norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mobius_identity_and_radial_orbit() {
        let sd = sd(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_domain_point(&mut rng, 0.6, &sd).unwrap();
        assert_eq!(mobius(&GroupElement::identity(&sd), &z).unwrap(), z);
        let t = 0.8;
        let w = mobius(&radial(t, &sd), &DomainPoint::origin(&sd)).unwrap();
        assert!((w.matrix()[(0, 0)] - c(t.tanh())).norm() < 1e-15);
        assert!(w.matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn mobius_composes() {
        let sd = sd(2, 1);
        let g = random_group_element(1, 0.7, &sd);
        let h = random_group_element(2, 0.7, &sd);
        let z = orbit_of_origin(&random_group_element(3, 0.5, &sd)).unwrap();
        let lhs = mobius_matrix(&g, &mobius_matrix(&h, &z).unwrap()).unwrap();
        let rhs = mobius_matrix(&g.mul(&h), &z).unwrap();
        assert!((&lhs - &rhs).max_abs() < 1e-10);
    }

    #[test]
    fn radial_matches_expm_and_is_a_subgroup() {
        let sd = sd(2, 1);
        let exact = radial(1.0, &sd);
        let numeric = x0(&sd).expm();
        assert!((exact.matrix() - &numeric).max_abs() < 1e-13);
        let prod = radial(0.3, &sd).mul(&radial(0.9, &sd));
        assert!((prod.matrix() - radial(1.2, &sd).matrix()).max_abs() < 1e-12);
        assert!(exact.residual() < 1e-12);
        assert_eq!(radial(0.0, &sd).matrix(), &CMat::identity(sd.m));
    }

    #[test]
    fn height_of_radial_and_compact_elements() {
        for (r, b) in [(1, 1), (2, 1), (3, 1)] {
            let sd = sd(r, b);
            for &t in &[-1.3, 0.2, 2.5] {
                assert!((h1(&radial(t, &sd), &sd).unwrap().h1 - t).abs() < 1e-12);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let k = random_k(&mut rng, &sd);
            assert!(k.residual() < 1e-12);
            assert!(height(&k).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn h1_rejects_non_group_matrices() {
        let sd = sd(1, 1);
        let g = GroupElement::new_unchecked(CMat::identity(3).scale_real(1.1), 1);
        assert!(matches!(h1(&g, &sd), Err(Error::OutsideGroup(_))));
        assert!(GroupElement::new(CMat::identity(3).scale_real(1.1), &sd).is_err());
    }

    #[test]
    fn random_elements_are_in_the_group_and_reproducible() {
        let sd = sd(2, 2);
        let g = random_group_element(42, 1.5, &sd);
        assert!(g.residual() < 1e-10);
        assert_eq!(g, random_group_element(42, 1.5, &sd));
        assert_eq!(random_group_element(42, 0.0, &sd).matrix(), &CMat::identity(sd.m));
    }

    #[test]
    fn kappa_factor_matches_boundary_action() {
        let sd = sd(2, 1);
        let g = random_group_element(9, 1.0, &sd);
        let k = kappa_factor(&g, &sd).unwrap();
        assert!(k.residual() < 1e-12);
        let u0 = ShilovPoint::base(&sd);
        let a = mobius_boundary(&g, &u0).unwrap();
        let b = mobius_boundary(&k, &u0).unwrap();
        assert!((a.matrix() - b.matrix()).max_abs() < 1e-12);
        let kt = kappa_factor(&radial(1.7, &sd), &sd).unwrap();
        assert!((mobius_boundary(&kt, &u0).unwrap().matrix() - u0.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn nbar_dimensions() {
        let sd1 = sd(1, 2);
        let nb = NbarBasis::new(&sd1);
        assert_eq!((nb.level1.len(), nb.level2.len()), (4, 1));
        let sd2 = sd(2, 1);
        let nb = NbarBasis::new(&sd2);
        assert_eq!((nb.level1.len(), nb.level2.len()), (4, 4));
        assert!(height(&nb.nbar(&[0.0; 8], 2)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn selftest_passes_on_small_domains() {
        for (r, b) in [(1, 1), (2, 1)] {
            let rep = selftest(&sd(r, b), 11, 40, 200).unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }
}
