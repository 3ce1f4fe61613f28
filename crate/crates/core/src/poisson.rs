//! Poisson kernel `P_s(Z, U) = [det(I − ZZ*) / |det(I − ZU*)|²]^σ`, the transform,
//! `φ_s`, Hardy norms and the constant `c_s`.
//!
//! Besides the plain quadrature `Σ wᵢ P_s(Z, Uᵢ) f(Uᵢ)` there is a transported form
//! that integrates over `V = g⁻¹U`:
//! `∫ f(U) P_s(g·0, U) dU = ∫ f(gV) P(g⁻¹·0, V)^{n/r − σ} dV`.
//! It keeps the integrand spread out when `g·0` is close to the boundary.

use std::collections::BTreeMap;
use std::sync::Arc;

use log::warn;
use serde::Serialize;

use crate::boundary::{ZONAL_PANEL, ZONAL_PSI, heisenberg_chart, stiefel_means, weighted_sum, zonal_disk_rule, McEstimate, QuadratureRule};
use crate::error::{Error, Result};
use crate::group::{
    base_point, height, k_representative, mobius_matrix, orbit_of_origin, poisson_ratio, radial, random_group_element_with, random_shilov,
    DomainPoint, GroupElement, ShilovPoint,
};
use crate::ktypes::KTypeIndex;
use crate::special::ln_gamma;
use crate::structure::{restricted_roots, ser_complex, ser_opt_complex, RootKind, SpectralParam, StructureData};
use crate::{CMat, C64};

type Evaluator = Arc<dyn Fn(&ShilovPoint) -> C64 + Send + Sync>;

/// Function on `S`, optionally carrying its zonal K-type coefficients.
#[derive(Clone)]
pub struct BoundaryFunction {
    eval: Evaluator,
    pub description: String,
    pub ktype_coefficients: Option<BTreeMap<KTypeIndex, C64>>,
}

impl std::fmt::Debug for BoundaryFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryFunction").field("description", &self.description).finish()
    }
}

impl BoundaryFunction {
    pub fn new(description: impl Into<String>, f: impl Fn(&ShilovPoint) -> C64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f), description: description.into(), ktype_coefficients: None }
    }

    pub fn constant(c: C64) -> Self {
        let mut f = Self::new(format!("constant {c}"), move |_| c);
        f.ktype_coefficients = Some(BTreeMap::from([(KTypeIndex::new(0, 0), c)]));
        f
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn with_coefficients(mut self, coeffs: BTreeMap<KTypeIndex, C64>) -> Self {
        self.ktype_coefficients = Some(coeffs);
        self
    }

    pub fn eval(&self, u: &ShilovPoint) -> C64 {
        (self.eval)(u)
    }

    /// Evaluation on a raw `r × (r+b)` matrix assumed to satisfy `UU* = I`.
    pub fn eval_matrix(&self, u: CMat) -> C64 {
        (self.eval)(&ShilovPoint::new_unchecked(u))
    }

    pub fn scaled(&self, c: C64) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |u| c * inner(u)),
            description: format!("{c} * ({})", self.description),
            ktype_coefficients: self.ktype_coefficients.as_ref().map(|m| m.iter().map(|(k, v)| (*k, v * c)).collect()),
        }
    }

    pub fn conj(&self) -> Self {
        let inner = self.eval.clone();
        Self::new(format!("conj({})", self.description), move |u| inner(u).conj())
    }
}

/// `x^σ = exp(σ log x)` for `x > 0`.
pub fn real_power(x: f64, sigma: C64) -> C64 {
    (sigma * x.ln()).exp()
}

pub fn kernel(sp: &SpectralParam, z: &DomainPoint, u: &ShilovPoint) -> Result<C64> {
    kernel_matrix(sp, z.matrix(), u.matrix())
}

pub(crate) fn kernel_matrix(sp: &SpectralParam, z: &CMat, u: &CMat) -> Result<C64> {
    Ok(real_power(poisson_ratio(z, u)?, sp.sigma))
}

/// `Σ wᵢ P_s(Z, Uᵢ) f(Uᵢ)`.
pub fn transform(sp: &SpectralParam, f: &BoundaryFunction, z: &DomainPoint, rule: &QuadratureRule) -> Result<C64> {
    let pairs: Result<Vec<(C64, C64)>> = {
        use rayon::prelude::*;
        rule.nodes.par_iter().map(|u| Ok((kernel(sp, z, u)?, f.eval(u)))).collect()
    };
    let pairs = pairs?;
    let (lo, hi) = pairs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (k, _)| (lo.min(k.norm()), hi.max(k.norm())));
    if lo > 0.0 && hi / lo > 1e12 {
        warn!("kernel dynamic range {:.2e} over the rule; the point is deep and the rule may be too coarse", hi / lo);
    }
    let vals: Vec<C64> = pairs.iter().map(|(k, v)| k * v).collect();
    check_finite(weighted_sum(&vals, &rule.weights), "transform")
}

fn check_finite(v: C64, what: &str) -> Result<C64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// `𝓟_s f(g·0)` by integrating over `V = g⁻¹U`.
pub fn transform_transported(
    sp: &SpectralParam,
    f: &BoundaryFunction,
    g: &GroupElement,
    rule: &QuadratureRule,
) -> Result<C64> {
    let y = orbit_of_origin(&g.inverse())?;
    let exponent = C64::new(sp.sd.n_over_r(), 0.0) - sp.sigma;
    let v = rule.try_integrate(|u| {
        let image = mobius_matrix(g, u.matrix())?;
        Ok(f.eval_matrix(image) * real_power(poisson_ratio(&y, u.matrix())?, exponent))
    })?;
    check_finite(v, "transported transform")
}

/// [`transform_transported`] at `g = diag(I, W*)·a_t`, i.e. at the point `tanh(t)·U₀W`.
///
/// Uses `g·V = (a_t·V)W` and `P(g⁻¹·0, V) = (1 − τ²)^r / |det(I + τV₁)|²`, with a scalar
/// fast path at rank one.
pub fn transform_radial(sp: &SpectralParam, f: &BoundaryFunction, w: &CMat, t: f64, rule: &QuadratureRule) -> Result<C64> {
    let sd = &sp.sd;
    let (r, q) = (sd.r, sd.r + sd.b);
    if w.rows() != q || w.cols() != q {
        return Err(Error::Shape(format!("completion must be {q}x{q}")));
    }
    let tau = t.tanh();
    let gap = boundary_gap(t.abs());
    let ln_num = r as f64 * (gap * (2.0 - gap)).ln();
    let exponent = C64::new(sd.n_over_r(), 0.0) - sp.sigma;
    let g = radial(t, sd);
    let v = rule.try_integrate(|u| {
        let vm = u.matrix();
        if r == 1 {
            let v1 = vm[(0, 0)];
            let den = C64::new(1.0, 0.0) + v1 * tau;
            let d2 = den.norm_sqr();
            if !(d2 > 0.0) {
                return Err(Error::Degenerate("radial image at the pole".into()));
            }
            let scale = C64::new(1.0, 0.0) / (den * t.cosh());
            let row: Vec<C64> = (0..q).map(|j| if j == 0 { (v1 + tau) / den } else { vm[(0, j)] * scale }).collect();
            let img = &CMat::new(1, q, row) * w;
            Ok(f.eval_matrix(img) * (exponent * (ln_num - d2.ln())).exp())
        } else {
            let img = &mobius_matrix(&g, vm)? * w;
            let d2 = (&CMat::identity(r) + &vm.block(0, 0, r, r).scale_real(tau)).det().norm_sqr();
            Ok(f.eval_matrix(img) * (exponent * (ln_num - d2.ln())).exp())
        }
    })?;
    check_finite(v, "radial transform")
}

/// `φ_s(a_t)`: transform of `1` at `a_t·0` with the plain rule.
pub fn phi_s(sp: &SpectralParam, t: f64, rule: &QuadratureRule) -> Result<C64> {
    let z = DomainPoint::new(orbit_of_origin(&radial(t, &sp.sd))?)?;
    transform(sp, &BoundaryFunction::one(), &z, rule)
}

/// `1 − tanh t` without cancellation.
pub fn boundary_gap(t: f64) -> f64 {
    2.0 / ((2.0 * t).exp() + 1.0)
}

/// `e^{−growth·t} φ_s(a_t)` at rank one with a rule graded at the scale `1 − tanh t`.
pub fn renormalized_phi_zonal(sp: &SpectralParam, t: f64) -> Result<C64> {
    let sd = &sp.sd;
    let rule = zonal_disk_rule(sd, boundary_gap(t.abs()).min(1.0), ZONAL_PSI, ZONAL_PANEL)?;
    let tau = t.tanh();
    let gap = boundary_gap(t.abs());
    let ln_scale = -(sp.growth * t);
    let v = rule.try_integrate(|u| {
        let u1 = u.first();
        let num = gap * (2.0 - gap);
        let den = (C64::new(1.0, 0.0) - u1.conj() * tau).norm_sqr();
        if !(den > 0.0) {
            return Err(Error::Degenerate("kernel pole on the rule".into()));
        }
        Ok((sp.sigma * (num / den).ln() + ln_scale).exp())
    })?;
    check_finite(v, "phi_s")
}

/// `e^{−growth·t} φ_s(a_t)` for every `t` from one Haar sample (transported form).
pub fn renormalized_phi_mc(sp: &SpectralParam, t_grid: &[f64], samples: usize, seed: u64) -> Vec<McEstimate> {
    let sd = &sp.sd;
    let r = sd.r;
    let exponent = C64::new(sd.n_over_r(), 0.0) - sp.sigma;
    let prep: Vec<(f64, f64, C64)> =
        t_grid.iter().map(|&t| (t.tanh(), (r as f64) * (4.0f64.ln() - 2.0 * t - 2.0 * (-2.0 * t).exp().ln_1p()), -(sp.growth * t))).collect();
    stiefel_means(sd, samples, seed, t_grid.len(), |u, out| {
        let v1 = u.block(0, 0, r, r);
        for (slot, &(tau, ln_num, ln_scale)) in out.iter_mut().zip(&prep) {
            // P(−τU₀, V) = (1 − τ²)^r / |det(I + τV₁)|²
            let d = (&CMat::identity(r) + &v1.scale_real(tau)).det().norm_sqr();
            *slot = (exponent * (ln_num - d.ln()) + ln_scale).exp();
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CsMethod {
    Gk,
    Fatou,
    Direct,
}

#[derive(Clone, Debug)]
pub struct CsParams {
    pub t_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub chart_grid: usize,
    pub chart_radius: f64,
}

impl Default for CsParams {
    fn default() -> Self {
        Self { t_grid: (0..=20).map(|i| 0.5 * i as f64).collect(), samples: 1_000_000, seed: 7, chart_grid: 3, chart_radius: 8.0 }
    }
}

/// Limit of a sampled tail `v(t) ≈ L + A e^{−κt}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Extrapolation {
    #[serde(serialize_with = "ser_complex")]
    pub limit: C64,
    #[serde(serialize_with = "ser_complex")]
    pub previous: C64,
    pub kappa: Option<f64>,
    pub rel_change: f64,
    pub converged: bool,
}

/// Geometric-tail fit on the last four samples (uniform spacing); the previous
/// window gives the successive extrapolant used for the convergence test.
pub fn extrapolate(ts: &[f64], vals: &[C64], tol: f64) -> Result<Extrapolation> {
    if vals.len() < 5 || ts.len() != vals.len() {
        return Err(Error::Invalid("extrapolation needs at least five samples".into()));
    }
    let fit = |end: usize| -> (C64, Option<f64>) {
        let w = &vals[end - 4..end];
        let d: Vec<C64> = w.windows(2).map(|p| p[1] - p[0]).collect();
        let den: f64 = d[..2].iter().map(|x| x.norm_sqr()).sum();
        let last = w[3];
        if den == 0.0 {
            return (last, None);
        }
        let q: C64 = d[1..].iter().zip(&d[..2]).map(|(a, b)| a * b.conj()).sum::<C64>() / den;
        let h = ts[end - 1] - ts[end - 2];
        if q.norm() < 0.95 && q.re > 0.0 && h > 0.0 {
            (last + d[2] * q / (C64::new(1.0, 0.0) - q), Some(-q.norm().ln() / h))
        } else {
            (last, None)
        }
    };
    let n = vals.len();
    let (limit, kappa) = fit(n);
    let (previous, _) = fit(n - 1);
    let scale = limit.norm().max(f64::MIN_POSITIVE);
    let rel_change = (limit - previous).norm() / scale;
    Ok(Extrapolation { limit, previous, kappa, rel_change, converged: rel_change <= tol && limit.re.is_finite() })
}

/// Gamma-ratio factor of a reduced root with multiplicities `(m_α, m_{2α})` at `z = ⟨λ, α⟩/⟨α, α⟩`.
fn c_factor(z: C64, m_a: f64, m_2a: f64) -> C64 {
    let half = C64::new(0.5, 0.0);
    let ln = -z * std::f64::consts::LN_2 + ln_gamma(z)
        - ln_gamma(half * (z + (0.5 * m_a + 1.0)))
        - ln_gamma(half * (z + (0.5 * m_a + m_2a)));
    ln.exp()
}

/// Product formula over the reduced roots of `Σ⁺ ∖ Σ₁`, normalized to `1` at `s = n/r`.
///
/// `λ_s(X_k) = s − n/r + ρ(X_k)`. The Weyl twist permutes `Σ⁺ ∖ Σ₁`, so the product can be
/// taken at `λ_s` itself.
pub fn c_s_gk(sp: &SpectralParam) -> Result<C64> {
    sp.require_admissible()?;
    let sd = &sp.sd;
    let roots = restricted_roots(sd)?;
    let log_product = |s: C64| -> C64 {
        let lambda: Vec<C64> = roots.rho_on_a.iter().map(|&rho| s - sd.n_over_r() + rho).collect();
        let mut acc = C64::new(0.0, 0.0);
        for (label, &mult) in roots.positive() {
            let alpha = &label.0;
            if alpha.iter().sum::<i32>() == 0 || label.kind() == RootKind::Long {
                // Σ₁ vanishes on X₀; 2α is folded into the factor of α
                continue;
            }
            let double: Vec<i32> = alpha.iter().map(|x| 2 * x).collect();
            let m2 = roots.multiplicities.get(&crate::structure::RootLabel(double)).copied().unwrap_or(0) as f64;
            let norm2: f64 = alpha.iter().map(|&x| (x * x) as f64).sum();
            let z: C64 = alpha.iter().zip(&lambda).map(|(&a, l)| l * a as f64).sum::<C64>() / norm2;
            acc += c_factor(z, mult as f64, m2).ln();
        }
        acc
    };
    let s0 = C64::new(sd.n_over_r(), 0.0);
    check_finite((log_product(sp.s) - log_product(s0)).exp(), "c_s")
}

/// Renormalized radial profile of `φ_s` and its extrapolated limit.
pub fn c_s_fatou(sp: &SpectralParam, params: &CsParams) -> Result<(C64, Extrapolation, Vec<C64>)> {
    sp.require_admissible()?;
    let profile: Vec<C64> = if sp.sd.r == 1 {
        params.t_grid.iter().map(|&t| renormalized_phi_zonal(sp, t)).collect::<Result<_>>()?
    } else {
        renormalized_phi_mc(sp, &params.t_grid, params.samples, params.seed).into_iter().map(|e| e.mean).collect()
    };
    let ex = extrapolate(&params.t_grid, &profile, 1e-3)?;
    if !ex.converged {
        return Err(Error::NonConvergence(format!(
            "successive extrapolants differ by {:.2e} (need Re(s) > {})",
            ex.rel_change, sp.sd.admissibility_threshold
        )));
    }
    Ok((ex.limit, ex, profile))
}

/// `∫_{N̄₁} e^{−(s+n) h₁(n̄)} dn̄` on the rank-one chart.
pub fn c_s_direct(sp: &SpectralParam, params: &CsParams) -> Result<C64> {
    sp.require_admissible()?;
    if sp.sd.r != 1 {
        return Err(Error::RankOneOnly(sp.sd.r));
    }
    let chart = heisenberg_chart(&sp.sd, params.chart_grid, params.chart_radius)?;
    let e = -(sp.s + sp.sd.n as f64);
    check_finite(chart.integrate(|_, h| (e * h).exp()), "c_s direct")
}

pub fn c_s(sp: &SpectralParam, method: CsMethod, params: &CsParams) -> Result<C64> {
    match method {
        CsMethod::Gk => c_s_gk(sp),
        CsMethod::Fatou => Ok(c_s_fatou(sp, params)?.0),
        CsMethod::Direct => c_s_direct(sp, params),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CsReport {
    #[serde(serialize_with = "ser_complex")]
    pub s: C64,
    #[serde(serialize_with = "ser_complex")]
    pub cs_gk: C64,
    #[serde(serialize_with = "ser_complex")]
    pub cs_fatou: C64,
    #[serde(serialize_with = "ser_opt_complex")]
    pub cs_direct: Option<C64>,
    pub max_pairwise_rel_err: f64,
}

pub fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

pub fn cs_report(sp: &SpectralParam, params: &CsParams) -> Result<CsReport> {
    let gk = c_s_gk(sp)?;
    let (fatou, _, _) = c_s_fatou(sp, params)?;
    let direct = if sp.sd.r == 1 { Some(c_s_direct(sp, params)?) } else { None };
    let mut vals = vec![gk, fatou];
    vals.extend(direct);
    let mut worst: f64 = 0.0;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            worst = worst.max(rel_err(vals[i], vals[j]));
        }
    }
    Ok(CsReport { s: sp.s, cs_gk: gk, cs_fatou: fatou, cs_direct: direct, max_pairwise_rel_err: worst })
}

#[derive(Clone, Debug, Serialize)]
pub struct HardyNorm {
    pub value: f64,
    pub argmax_t: f64,
    pub per_t: Vec<(f64, f64)>,
}

/// `max_t e^{−t(Re(s)r − n)} (Σ wᵢ |F(Uᵢ, t)|^p)^{1/p}`, accumulated in the log domain.
pub fn hardy_norm(
    f: impl Fn(&ShilovPoint, f64) -> C64 + Sync,
    sp: &SpectralParam,
    p: f64,
    t_grid: &[f64],
    rule: &QuadratureRule,
) -> Result<HardyNorm> {
    if !(p >= 1.0) {
        return Err(Error::Invalid(format!("p = {p} must be at least 1")));
    }
    let rate = sp.s.re * sp.sd.r as f64 - sp.sd.n as f64;
    let mut per_t = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mods: Vec<f64> = {
            use rayon::prelude::*;
            rule.nodes.par_iter().map(|u| f(u, t).norm()).collect()
        };
        let top = mods.iter().copied().fold(0.0, f64::max);
        if !top.is_finite() {
            return Err(Error::NonFinite(format!("Hardy norm integrand at t = {t}")));
        }
        let value = if top == 0.0 {
            0.0
        } else {
            let scaled: Vec<C64> = mods.iter().map(|&m| C64::new((m / top).powf(p), 0.0)).collect();
            let integral = weighted_sum(&scaled, &rule.weights).re;
            (top.ln() + integral.ln() / p - rate * t).exp()
        };
        per_t.push((t, value));
    }
    let (argmax_t, value) = per_t.iter().copied().fold((0.0, 0.0), |acc, (t, v)| if v > acc.1 { (t, v) } else { acc });
    Ok(HardyNorm { value, argmax_t, per_t })
}

/// `‖f‖_p` against a probability rule.
pub fn lp_norm(f: &BoundaryFunction, p: f64, rule: &QuadratureRule) -> f64 {
    rule.integrate_real(|u| f.eval(u).norm().powf(p)).powf(1.0 / p)
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub argmax_t: f64,
    /// Relative change over the last quarter of the grid.
    pub tail_variation: f64,
    pub per_t: Vec<(f64, f64)>,
}

/// `sup_t e^{−t(Re(s)r − n)} ‖p_s^t‖₁` with `‖p_s^t‖₁ = φ_{Re s}(a_t)`.
pub fn gamma_estimate(sp: &SpectralParam, t_grid: &[f64], samples: usize, seed: u64) -> Result<GammaEstimate> {
    sp.require_admissible()?;
    let re = sp.with_s(C64::new(sp.s.re, 0.0));
    let vals: Vec<f64> = if sp.sd.r == 1 {
        t_grid.iter().map(|&t| renormalized_phi_zonal(&re, t).map(|v| v.re)).collect::<Result<_>>()?
    } else {
        renormalized_phi_mc(&re, t_grid, samples, seed).into_iter().map(|e| e.mean.re).collect()
    };
    gamma_from_profile(t_grid, &vals)
}

/// Same supremum from a plain rule (no grading or transport).
pub fn gamma_estimate_with(sp: &SpectralParam, t_grid: &[f64], rule: &QuadratureRule) -> Result<GammaEstimate> {
    sp.require_admissible()?;
    let re = sp.with_s(C64::new(sp.s.re, 0.0));
    let rate = re.growth.re;
    let vals: Vec<f64> =
        t_grid.iter().map(|&t| phi_s(&re, t, rule).map(|v| v.re * (-rate * t).exp())).collect::<Result<_>>()?;
    gamma_from_profile(t_grid, &vals)
}

fn gamma_from_profile(t_grid: &[f64], vals: &[f64]) -> Result<GammaEstimate> {
    let per_t: Vec<(f64, f64)> = t_grid.iter().copied().zip(vals.iter().copied()).collect();
    let (argmax_t, gamma) = per_t.iter().copied().fold((0.0, f64::NEG_INFINITY), |acc, (t, v)| if v > acc.1 { (t, v) } else { acc });
    let q = (vals.len() * 3 / 4).min(vals.len().saturating_sub(1));
    let tail = &vals[q..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(GammaEstimate { gamma, argmax_t, tail_variation: (hi - lo) / gamma.abs().max(f64::MIN_POSITIVE), per_t })
}

/// Convenience: base point raised to `τ`, i.e. `a_t·0 = tanh(t)·U₀`.
pub fn radial_point(t: f64, sd: &StructureData) -> DomainPoint {
    DomainPoint::new(base_point(sd.r, sd.b).scale_real(t.tanh())).expect("|tanh t| < 1")
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelFormReport {
    pub r: usize,
    pub b: usize,
    #[serde(serialize_with = "ser_complex")]
    pub s: C64,
    pub samples: usize,
    pub max_rel_err: f64,
}

/// Determinant form `P_s(g·0, kU₀)` against `e^{−(sr+n) h₁(g⁻¹k̃)}` on random pairs.
pub fn kernel_form_check(sp: &SpectralParam, samples: usize, seed: u64) -> Result<KernelFormReport> {
    use rand::SeedableRng;
    let sd = &sp.sd;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let e = -(sp.s * sd.r as f64 + sd.n as f64);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let g = random_group_element_with(&mut rng, 0.8, sd);
        let u = random_shilov(&mut rng, sd);
        let k = k_representative(&u, sd)?;
        let det_form = kernel_matrix(sp, &orbit_of_origin(&g)?, u.matrix())?;
        let group_form = (e * height(&g.inverse().mul(&k))?).exp();
        worst = worst.max(rel_err(det_form, group_form));
    }
    Ok(KernelFormReport { r: sd.r, b: sd.b, s: sp.s, samples, max_rel_err: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::sphere_rule;
    use crate::group::random_group_element;
    use crate::structure::structure_data;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(s: f64, r: usize, b: usize) -> SpectralParam {
        SpectralParam::real(s, &structure_data(r, b).unwrap())
    }

    #[test]
    fn kernel_examples() {
        let p = sp(3.0, 1, 1);
        let sd = &p.sd;
        let u = ShilovPoint::base(sd);
        assert!((kernel(&p, &DomainPoint::origin(sd), &u).unwrap() - 1.0).norm() < 1e-15);
        let t = 0.7;
        let k = kernel(&p, &radial_point(t, sd), &u).unwrap();
        assert!((k.re - ((3.0 + 2.0) * t).exp()).abs() < 1e-12 * k.re);
    }

    #[test]
    fn kernel_matches_group_form() {
        for (r, b) in [(1, 1), (1, 2), (2, 1)] {
            let sd = structure_data(r, b).unwrap();
            let p = SpectralParam::real(2.3, &sd);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for i in 0..30 {
                let g = random_group_element(i, 0.8, &sd);
                let u = random_shilov(&mut rng, &sd);
                let k = k_representative(&u, &sd).unwrap();
                let z = DomainPoint::new(orbit_of_origin(&g).unwrap()).unwrap();
                let det_form = kernel(&p, &z, &u).unwrap().re;
                let group_form = (-(2.3 * r as f64 + sd.n as f64) * height(&g.inverse().mul(&k)).unwrap()).exp();
                assert!((det_form - group_form).abs() < 1e-9 * det_form, "{det_form} vs {group_form}");
            }
            let rep = kernel_form_check(&SpectralParam::real(2.3, &sd).with_s(C64::new(2.3, 0.7)), 50, 1).unwrap();
            assert!(rep.max_rel_err < 1e-9, "{rep:?}");
        }
    }

    #[test]
    fn harmonic_transform_of_one_is_one() {
        let p = sp(2.0, 1, 1);
        let rule = sphere_rule(&p.sd, 30).unwrap();
        let z = DomainPoint::new(CMat::new(1, 2, vec![C64::new(0.5, 0.0), C64::new(0.0, 0.0)])).unwrap();
        let v = transform(&p, &BoundaryFunction::one(), &z, &rule).unwrap();
        assert!((v - 1.0).norm() < 1e-8, "{v}");
    }

    #[test]
    fn transported_matches_plain() {
        let p = sp(2.7, 1, 1);
        let rule = sphere_rule(&p.sd, 30).unwrap();
        let f = BoundaryFunction::new("U1 + |U2|^2", |u| u.matrix()[(0, 0)] + u.matrix()[(0, 1)].norm_sqr());
        let g = random_group_element(3, 0.4, &p.sd);
        let z = DomainPoint::new(orbit_of_origin(&g).unwrap()).unwrap();
        let plain = transform(&p, &f, &z, &rule).unwrap();
        let moved = transform_transported(&p, &f, &g, &rule).unwrap();
        assert!((plain - moved).norm() < 1e-8 * plain.norm(), "{plain} {moved}");
    }

    #[test]
    fn radial_matches_transported() {
        for (r, b) in [(1, 2), (2, 1)] {
            let sd = structure_data(r, b).unwrap();
            let p = SpectralParam::real(3.3, &sd);
            let rule = crate::boundary::stiefel_rule(&sd, 2000, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let u = random_shilov(&mut rng, &sd);
            let f = BoundaryFunction::new("Re U11 + |U12|^2", |u| C64::new(u.matrix()[(0, 0)].re, 0.0) + u.matrix()[(0, 1)].norm_sqr());
            let w = crate::group::complete_isometry(u.matrix()).unwrap();
            let g = k_representative(&u, &sd).unwrap().mul(&radial(1.3, &sd));
            let a = transform_radial(&p, &f, &w, 1.3, &rule).unwrap();
            let b = transform_transported(&p, &f, &g, &rule).unwrap();
            assert!((a - b).norm() < 1e-10 * b.norm(), "{a} {b}");
        }
    }

    #[test]
    fn phi_s_paths_agree() {
        let p = sp(2.5, 1, 1);
        let rule = sphere_rule(&p.sd, 40).unwrap();
        for t in [0.0, 0.25, 0.5] {
            let plain = phi_s(&p, t, &rule).unwrap() * (-p.growth * t).exp();
            let graded = renormalized_phi_zonal(&p, t).unwrap();
            assert!((plain - graded).norm() < 1e-9, "t={t}: {plain} {graded}");
        }
        let mc = renormalized_phi_mc(&p, &[0.0, 1.0], 200_000, 1);
        let graded = renormalized_phi_zonal(&p, 1.0).unwrap();
        assert!((mc[0].mean - 1.0).norm() < 1e-12);
        assert!((mc[1].mean - graded).norm() < 4.0 * mc[1].std_err);
    }

    #[test]
    fn gk_rank_one_closed_form() {
        for b in 1..=3 {
            let sd = structure_data(1, b).unwrap();
            let n = sd.n as f64;
            for s in [0.7, 1.5, 3.2] {
                let got = c_s_gk(&SpectralParam::real(s, &sd)).unwrap();
                let g = |x: f64| crate::special::gamma(C64::new(x, 0.0)).re;
                let want = 2f64.powf(n - s) * g(n) * g(s) / g(0.5 * (n + s)).powi(2);
                assert!((got.re - want).abs() < 1e-12 * want);
            }
        }
        let sd = structure_data(2, 1).unwrap();
        assert!((c_s_gk(&SpectralParam::real(3.0, &sd)).unwrap() - 1.0).norm() < 1e-13);
        assert!(matches!(c_s_gk(&SpectralParam::real(0.5, &sd)), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn extrapolation_recovers_geometric_tail() {
        let ts: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let vals: Vec<C64> = ts.iter().map(|t| C64::new(2.0, 1.0) + C64::new(0.3, 0.0) * (-1.3 * t).exp()).collect();
        let ex = extrapolate(&ts, &vals, 1e-3).unwrap();
        assert!((ex.limit - C64::new(2.0, 1.0)).norm() < 1e-12);
        assert!((ex.kappa.unwrap() - 1.3).abs() < 1e-9);
        let grow: Vec<C64> = ts.iter().map(|t| C64::new(t.exp(), 0.0)).collect();
        assert!(!extrapolate(&ts, &grow, 1e-3).unwrap().converged);
    }

    #[test]
    fn hardy_norm_of_zero_and_constant() {
        let p = sp(2.0, 1, 1);
        let rule = sphere_rule(&p.sd, 4).unwrap();
        let zero = hardy_norm(|_, _| C64::new(0.0, 0.0), &p, 2.0, &[0.0, 1.0], &rule).unwrap();
        assert_eq!(zero.value, 0.0);
        let one = hardy_norm(|_, _| C64::new(3.0, 0.0), &p, 1.5, &[0.0, 1.0], &rule).unwrap();
        assert!((one.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_includes_t_zero() {
        let p = sp(2.5, 1, 1);
        let grid: Vec<f64> = (0..=16).map(|i| 0.5 * i as f64).collect();
        let g = gamma_estimate(&p, &grid, 0, 0).unwrap();
        assert!(g.gamma >= 1.0 - 1e-12);
        let cs = c_s_gk(&p).unwrap().norm();
        assert!(g.gamma >= cs);
    }
}
