//! Radial boundary limits, the dominating majorant, the `L²` inversion formula and
//! the two-sided Hardy-norm bound.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{chart_samples, heisenberg_chart, QuadratureRule};
use crate::error::{Error, Result};
use crate::group::{complete_isometry, height, NbarBasis, ShilovPoint};
use crate::ktypes::{transform_on_nodes, BandLimited, Resampler};
use crate::poisson::{c_s_gk, extrapolate, gamma_estimate, hardy_norm, lp_norm, transform_radial, BoundaryFunction, Extrapolation};
use crate::structure::{ser_complex, ser_opt_complex, SpectralParam};
use crate::C64;

/// `𝓟_s f(k a_t)` on a node set and a `t` grid, with `e^{−(rs−n)t}` renormalization.
#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub t_grid: Vec<f64>,
    #[serde(skip)]
    pub nodes: Vec<ShilovPoint>,
    /// `values[node][t]`.
    #[serde(skip)]
    pub values: Vec<Vec<C64>>,
    #[serde(skip)]
    pub renormalized: Vec<Vec<C64>>,
}

impl RadialProfile {
    /// Rows `(node, t, re, im)` of the renormalized profile.
    pub fn rows(&self) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.renormalized.iter().enumerate() {
            for (&t, v) in self.t_grid.iter().zip(row) {
                out.push((i, t, v.re, v.im));
            }
        }
        out
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid[0] < 0.0 {
        return Err(Error::Invalid("t grid must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

pub fn radial_profile(
    sp: &SpectralParam,
    f: &BoundaryFunction,
    nodes: &[ShilovPoint],
    t_grid: &[f64],
    rule: &QuadratureRule,
) -> Result<RadialProfile> {
    check_grid(t_grid)?;
    if !sp.admissible {
        warn!("Re(s) = {} is not above {}; the renormalized profile need not converge", sp.s.re, sp.sd.admissibility_threshold);
    }
    if sp.s.re < sp.sd.n_over_r() && t_grid.last().copied().unwrap_or(0.0) > 6.0 {
        warn!("transported weight concentrates for Re(s) < n/r; large-t values depend on the rule resolution");
    }
    let completions: Vec<_> = nodes.iter().map(|u| complete_isometry(u.matrix())).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..nodes.len()).flat_map(|i| (0..t_grid.len()).map(move |j| (i, j))).collect();
    let flat: Vec<Result<C64>> = pairs
        .par_iter()
        .map(|&(i, j)| transform_radial(sp, f, &completions[i], t_grid[j], rule))
        .collect();
    let mut values = vec![Vec::with_capacity(t_grid.len()); nodes.len()];
    for (&(i, _), v) in pairs.iter().zip(flat) {
        values[i].push(v?);
    }
    let renormalized = values
        .iter()
        .map(|row| row.iter().zip(t_grid).map(|(v, &t)| v * (-(sp.growth * t)).exp()).collect())
        .collect();
    Ok(RadialProfile { t_grid: t_grid.to_vec(), nodes: nodes.to_vec(), values, renormalized })
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    #[serde(serialize_with = "ser_opt_complex")]
    pub c_s: Option<C64>,
    #[serde(skip)]
    pub estimates: Vec<C64>,
    #[serde(skip)]
    pub extrapolations: Vec<Extrapolation>,
    pub converged: bool,
    pub max_rel_change: f64,
    pub sup_error: Option<f64>,
    /// Root-mean-square error over the nodes relative to the reference's RMS.
    pub l2_error: Option<f64>,
    pub message: String,
}

impl LimitReport {
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence(self.message.clone()))
        }
    }
}

/// `c_s⁻¹ · lim e^{−(rs−n)t} 𝓟_s f(k a_t)` per node, compared to `reference` when given.
pub fn boundary_limit(sp: &SpectralParam, profile: &RadialProfile, reference: Option<&BoundaryFunction>, tol: f64) -> Result<LimitReport> {
    // c_s is undefined below the threshold; the raw limits are reported instead
    let cs = if sp.admissible { Some(c_s_gk(sp)?) } else { None };
    let mut estimates = Vec::with_capacity(profile.nodes.len());
    let mut extrapolations = Vec::with_capacity(profile.nodes.len());
    let mut converged = true;
    let mut max_rel_change: f64 = 0.0;
    for row in &profile.renormalized {
        let ex = extrapolate(&profile.t_grid, row, tol)?;
        converged &= ex.converged;
        max_rel_change = max_rel_change.max(if ex.rel_change.is_finite() { ex.rel_change } else { f64::INFINITY });
        estimates.push(ex.limit / cs.unwrap_or(C64::new(1.0, 0.0)));
        extrapolations.push(ex);
    }
    let (sup_error, l2_error) = match reference {
        None => (None, None),
        Some(f) => {
            let truth: Vec<C64> = profile.nodes.iter().map(|u| f.eval(u)).collect();
            let sup = truth.iter().zip(&estimates).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let k = truth.len() as f64;
            let err2 = truth.iter().zip(&estimates).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / k;
            let ref2 = truth.iter().map(|a| a.norm_sqr()).sum::<f64>() / k;
            (Some(sup), Some((err2 / ref2).sqrt()))
        }
    };
    converged &= cs.is_some();
    let message = if converged {
        "renormalized profile converged".to_string()
    } else {
        format!(
            "renormalized profile did not converge (relative change {max_rel_change:.2e} > {tol:.1e}); limits exist for Re(s) > {}",
            sp.sd.admissibility_threshold
        )
    };
    Ok(LimitReport { c_s: cs, estimates, extrapolations, converged, max_rel_change, sup_error, l2_error, message })
}

/// `F(·, t) = 𝓟_s f(· a_t)` fitted on the resampler nodes for each `t`.
pub fn transform_fits(
    sp: &SpectralParam,
    f: &BoundaryFunction,
    t_grid: &[f64],
    resampler: &Resampler,
    rule: &QuadratureRule,
) -> Result<Vec<BandLimited>> {
    t_grid
        .iter()
        .map(|&t| resampler.fit(&transform_on_nodes(sp, f, t, &resampler.rule.nodes, rule)?))
        .collect()
}

/// `g_t(k) = |c_s|⁻² e^{2(n − r Re s)t} ∫ conj(P_s(k a_t·0, U)) F(U) dU`, returned as a polynomial.
///
/// `F` is the slice `F(·, t)`; it is resampled to a polynomial so it can be evaluated at the
/// transported points.
pub fn invert_l2(
    sp: &SpectralParam,
    big_f: &(dyn Fn(&ShilovPoint) -> C64 + Sync),
    t: f64,
    resampler: &Resampler,
    rule: &QuadratureRule,
) -> Result<BandLimited> {
    if t < 2.0 {
        warn!("t = {t} is small; the inversion is biased by the non-leading K-types");
    }
    if t > 8.0 {
        warn!("t = {t} is large; the kernel concentrates beyond the rule resolution");
    }
    let nodes = &resampler.rule.nodes;
    let slice: Vec<C64> = nodes.iter().map(big_f).collect();
    let fitted = resampler.fit(&slice)?.to_function("F(., t)");
    let conj = sp.with_s(sp.s.conj());
    let cs = c_s_gk(sp)?;
    let sd = &sp.sd;
    let scale = (2.0 * (sd.n as f64 - sd.r as f64 * sp.s.re) * t).exp() / cs.norm_sqr();
    let vals = transform_on_nodes(&conj, &fitted, t, nodes, rule)?;
    resampler.fit(&vals.iter().map(|v| v * scale).collect::<Vec<_>>())
}

/// Relative `L²` distance `‖g − f‖₂ / ‖f‖₂` on a rule.
pub fn l2_distance(g: &BoundaryFunction, f: &BoundaryFunction, rule: &QuadratureRule) -> f64 {
    let diff = rule.integrate_real(|u| (g.eval(u) - f.eval(u)).norm_sqr()).sqrt();
    let norm = rule.integrate_real(|u| f.eval(u).norm_sqr()).sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MajorantBranch {
    /// `Re(s) > (a/2)(r−1) + b + 1`: `Φ = e^{−2⟨ρ₁, H₁⟩}`.
    Large,
    /// Otherwise `Φ = e^{−⟨Re(s)ρ₀ + ρ₁, H₁⟩}`.
    Small,
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub branch: MajorantBranch,
    pub nodes: usize,
    pub t_list: Vec<f64>,
    pub violations: usize,
    /// `max |Ψ_t| / Φ` over all samples.
    pub max_ratio: f64,
    /// `∫ Φ dn̄` on the chart.
    pub majorant_integral: f64,
}

/// Pointwise check `|Ψ_t(n̄)| ≤ Φ(n̄)` on random chart nodes.
pub fn domination_check(sp: &SpectralParam, t_list: &[f64], nodes: usize, radius: f64, seed: u64) -> Result<DominationReport> {
    let sd = &sp.sd;
    if sd.r != 1 {
        return Err(Error::RankOneOnly(sd.r));
    }
    sp.require_admissible()?;
    let (r, n) = (sd.r as f64, sd.n as f64);
    let threshold = 0.5 * sd.a as f64 * (r - 1.0) + sd.b as f64 + 1.0;
    let branch = if sp.s.re > threshold { MajorantBranch::Large } else { MajorantBranch::Small };
    let majorant = |h: f64| match branch {
        MajorantBranch::Large => -2.0 * n * h,
        MajorantBranch::Small => -(sp.s.re * r + n) * h,
    };
    let basis = NbarBasis::new(sd);
    let coords = chart_samples(sd, nodes, radius, seed);
    let plus = sp.s * r + n;
    let minus = sp.s * r - n;
    let pairs: Vec<(usize, f64)> = (0..coords.len()).flat_map(|i| t_list.iter().map(move |&t| (i, t))).collect();
    let ratios: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, t)| {
            let h = height(&basis.nbar(&coords[i], sd.r))?;
            let ht = height(&basis.nbar(&basis.conjugate_coords(&coords[i], t), sd.r))?;
            let log_psi = (-(plus * h) + minus * ht).re;
            Ok((log_psi - majorant(h)).exp())
        })
        .collect();
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for q in ratios {
        let q = q?;
        max_ratio = max_ratio.max(q);
        if q > 1.0 + 1e-10 {
            violations += 1;
        }
    }
    let chart = heisenberg_chart(sd, 3, 8.0)?;
    let majorant_integral = chart.integrate(|_, h| C64::new((majorant(h)).exp(), 0.0)).re;
    Ok(DominationReport { branch, nodes: coords.len(), t_list: t_list.to_vec(), violations, max_ratio, majorant_integral })
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichEntry {
    pub index: usize,
    pub lp_norm: f64,
    pub hardy_norm: f64,
    pub hardy_argmax_t: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub p: f64,
    #[serde(serialize_with = "ser_complex")]
    pub s: C64,
    pub abs_c_s: f64,
    pub gamma_s: f64,
    pub slack: f64,
    pub entries: Vec<SandwichEntry>,
    pub all_ok: bool,
}

/// `|c_s| ‖f‖_p ≤ ‖𝓟_s f‖_{s,p} ≤ γ_s ‖f‖_p` for each `f` and each `p`, up to a relative `slack`.
/// The transforms are computed once per `f` and shared across the exponents.
#[allow(clippy::too_many_arguments)]
pub fn norm_sandwich(
    sp: &SpectralParam,
    ps: &[f64],
    f_list: &[BoundaryFunction],
    t_grid: &[f64],
    resampler: &Resampler,
    rule: &QuadratureRule,
    norm_rule: &QuadratureRule,
    slack: f64,
) -> Result<Vec<SandwichReport>> {
    if let Some(p) = ps.iter().find(|&&p| !(p > 1.0)) {
        return Err(Error::Invalid(format!("p = {p} must exceed 1")));
    }
    check_grid(t_grid)?;
    sp.require_admissible()?;
    let cs = c_s_gk(sp)?.norm();
    let gamma = gamma_estimate(sp, t_grid, 200_000, 1)?.gamma;
    let mut reports: Vec<SandwichReport> = ps
        .iter()
        .map(|&p| SandwichReport { p, s: sp.s, abs_c_s: cs, gamma_s: gamma, slack, entries: Vec::new(), all_ok: true })
        .collect();
    for (index, f) in f_list.iter().enumerate() {
        let fits = transform_fits(sp, f, t_grid, resampler, rule)?;
        for rep in reports.iter_mut() {
            let p = rep.p;
            let hn = hardy_norm(
                |u, t| {
                    let j = t_grid.iter().position(|&x| x == t).expect("t from the grid");
                    fits[j].eval_matrix(u.matrix())
                },
                sp,
                p,
                t_grid,
                norm_rule,
            )?;
            let norm = lp_norm(f, p, norm_rule);
            let (lower, upper) = (cs * norm, gamma * norm);
            let e = SandwichEntry {
                index,
                lp_norm: norm,
                hardy_norm: hn.value,
                hardy_argmax_t: hn.argmax_t,
                lower,
                upper,
                lower_ok: hn.value >= lower * (1.0 - slack),
                upper_ok: hn.value <= upper * (1.0 + slack),
            };
            rep.all_ok &= e.lower_ok && e.upper_ok;
            rep.entries.push(e);
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::sphere_rule;
    use crate::ktypes::random_band_limited;
    use crate::structure::structure_data;

    fn setup(s: f64) -> (SpectralParam, QuadratureRule) {
        let sd = structure_data(1, 1).unwrap();
        (SpectralParam::real(s, &sd), sphere_rule(&sd, 16).unwrap())
    }

    fn grid(stop: f64) -> Vec<f64> {
        (0..=(2.0 * stop) as usize).map(|i| 0.5 * i as f64).collect()
    }

    #[test]
    fn constant_profile_tends_to_cs() {
        let (sp, rule) = setup(2.5);
        let rs = Resampler::new(&sp.sd, 2).unwrap();
        let nodes: Vec<ShilovPoint> = rs.rule.nodes.iter().take(6).cloned().collect();
        let prof = radial_profile(&sp, &BoundaryFunction::one(), &nodes, &grid(6.0), &rule).unwrap();
        let cs = c_s_gk(&sp).unwrap();
        for row in &prof.renormalized {
            assert!((row.last().unwrap() - cs).norm() < 1e-3 * cs.norm());
            assert!((row[0] - 1.0).norm() < 1e-12);
        }
        let lim = boundary_limit(&sp, &prof, Some(&BoundaryFunction::one()), 1e-3).unwrap();
        assert!(lim.converged);
        assert!(lim.sup_error.unwrap() < 5e-4, "{lim:?}");
    }

    #[test]
    fn recovers_linear_function() {
        let (sp, rule) = setup(2.5);
        let f = BoundaryFunction::new("1 + Re U1", |u| C64::new(1.0 + u.first().re, 0.0));
        let rs = Resampler::new(&sp.sd, 2).unwrap();
        let prof = radial_profile(&sp, &f, &rs.rule.nodes, &grid(6.0), &rule).unwrap();
        let lim = boundary_limit(&sp, &prof, Some(&f), 1e-3).unwrap();
        assert!(lim.converged, "{lim:?}");
        assert!(lim.sup_error.unwrap() < 1e-2, "{lim:?}");
    }

    #[test]
    fn inadmissible_parameter_does_not_converge() {
        let (sp, rule) = setup(-0.5);
        let nodes = vec![ShilovPoint::base(&sp.sd)];
        let prof = radial_profile(&sp, &BoundaryFunction::one(), &nodes, &grid(6.0), &rule).unwrap();
        let lim = boundary_limit(&sp, &prof, None, 1e-3).unwrap();
        assert!(!lim.converged);
        assert!(lim.require_converged().is_err());
    }

    #[test]
    fn inversion_round_trip_constant_and_zero() {
        let (sp, rule) = setup(2.0);
        let rs = Resampler::new(&sp.sd, 2).unwrap();
        let t = 5.0;
        let one = BoundaryFunction::one();
        let fits = transform_fits(&sp, &one, &[t], &rs, &rule).unwrap();
        let big_f = |u: &ShilovPoint| fits[0].eval_matrix(u.matrix());
        let g = invert_l2(&sp, &big_f, t, &rs, &rule).unwrap().to_function("g");
        assert!(l2_distance(&g, &one, &rule) < 5e-2);
        let zero = |_: &ShilovPoint| C64::new(0.0, 0.0);
        let g0 = invert_l2(&sp, &zero, t, &rs, &rule).unwrap();
        assert!(g0.coeffs.iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn domination_both_branches() {
        let sd = structure_data(1, 1).unwrap();
        for s in [1.5, 2.5, 3.0] {
            let sp = SpectralParam::real(s, &sd);
            let rep = domination_check(&sp, &[0.0, 0.5, 1.0, 2.0, 4.0], 300, 6.0, 9).unwrap();
            assert_eq!(rep.violations, 0, "{rep:?}");
            assert!(rep.majorant_integral.is_finite() && rep.majorant_integral > 0.0);
            let expect = if s > 2.0 { MajorantBranch::Large } else { MajorantBranch::Small };
            assert_eq!(rep.branch, expect);
        }
    }

    #[test]
    fn sandwich_constant_and_homogeneity() {
        let (sp, _) = setup(2.5);
        let rs = Resampler::new(&sp.sd, 3).unwrap();
        let norm_rule = sphere_rule(&sp.sd, 8).unwrap();
        let rule = sphere_rule(&sp.sd, 10).unwrap();
        let f = random_band_limited(&sp.sd, 3, 2);
        let fs = vec![BoundaryFunction::one(), f.to_function("f"), f.scaled(C64::new(2.0, 0.0)).to_function("2f")];
        let reps = norm_sandwich(&sp, &[2.0, 4.0], &fs, &grid(6.0), &rs, &rule, &norm_rule, 2e-2).unwrap();
        assert!(reps.iter().all(|r| r.all_ok), "{reps:?}");
        let rep = &reps[0];
        let (a, b) = (&rep.entries[1], &rep.entries[2]);
        assert!((b.hardy_norm - 2.0 * a.hardy_norm).abs() < 1e-9 * b.hardy_norm);
        assert!((b.lp_norm - 2.0 * a.lp_norm).abs() < 1e-9 * b.lp_norm);
        let one = &rep.entries[0];
        assert!((one.hardy_norm - rep.gamma_s).abs() < 1e-6 * rep.gamma_s);
    }
}
