//! Root data of `I_{r,r+b}` and its brute-force check on `su(r, r+b)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{ad_matrix, cartan_element, su_basis};
use crate::linalg::symmetric_eigen;
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureData {
    pub r: usize,
    pub b: usize,
    pub a: usize,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "rho0_X0")]
    pub rho0_x0: usize,
    #[serde(rename = "rho1_X0")]
    pub rho1_x0: usize,
    pub rho_on_a: Vec<f64>,
    pub admissibility_threshold: f64,
    pub genus_candidate: usize,
}

impl StructureData {
    /// `n / r`, the harmonic value of `s`.
    pub fn n_over_r(&self) -> f64 {
        self.n as f64 / self.r as f64
    }
}

pub fn structure_data(r: usize, b: usize) -> Result<StructureData> {
    if r == 0 {
        return Err(Error::ZeroRank);
    }
    if b == 0 {
        return Err(Error::TubeDomain);
    }
    let a = 2;
    let n = r * b + r + a * r * (r - 1) / 2;
    let half_a = a as f64 / 2.0;
    let rho_on_a = (1..=r)
        .map(|k| 1.0 + b as f64 + half_a * (r as f64 - 1.0) + half_a * (2.0 * k as f64 - r as f64 - 1.0))
        .collect();
    Ok(StructureData {
        r,
        b,
        a,
        n,
        m: 2 * r + b,
        rho0_x0: r,
        rho1_x0: n,
        rho_on_a,
        admissibility_threshold: half_a * (r as f64 - 1.0),
        genus_candidate: 2 * r + b,
    })
}

/// Restricted root, stored by its values on `X_1, …, X_r`.
///
/// `β_j` takes the value 2 on `X_j`, so `½β_j` is `e_j` and `½(β_j ± β_k)` is `e_j ± e_k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RootLabel(pub Vec<i32>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootKind {
    Long,
    Middle,
    Short,
}

impl RootLabel {
    pub fn kind(&self) -> RootKind {
        let nz: Vec<i32> = self.0.iter().copied().filter(|&x| x != 0).collect();
        match nz.as_slice() {
            [x] if x.abs() == 2 => RootKind::Long,
            [_, _] => RootKind::Middle,
            _ => RootKind::Short,
        }
    }

    /// Positive iff the last nonzero coordinate is positive.
    pub fn is_positive(&self) -> bool {
        self.0.iter().rev().find(|&&x| x != 0).is_some_and(|&x| x > 0)
    }

    fn classify(mu: &[i32]) -> Option<Self> {
        let nz: Vec<(usize, i32)> = mu.iter().copied().enumerate().filter(|&(_, x)| x != 0).collect();
        let ok = match nz.as_slice() {
            [(_, x)] => x.abs() == 1 || x.abs() == 2,
            [(_, x), (_, y)] => x.abs() == 1 && y.abs() == 1,
            _ => false,
        };
        ok.then(|| Self(mu.to_vec()))
    }
}

impl fmt::Display for RootLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nz: Vec<(usize, i32)> = self.0.iter().copied().enumerate().filter(|&(_, x)| x != 0).collect();
        let sign = |x: i32| if x < 0 { "-" } else { "" };
        match nz.as_slice() {
            [(j, x)] if x.abs() == 2 => write!(f, "{}b{}", sign(*x), j + 1),
            [(j, x)] => write!(f, "{}b{}/2", sign(*x), j + 1),
            [(j, x), (k, y)] => {
                let inner = if x * y > 0 { "+" } else { "-" };
                write!(f, "{}(b{}{inner}b{})/2", sign(*y), k + 1, j + 1)
            }
            _ => write!(f, "0"),
        }
    }
}

impl Serialize for RootLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RootSystem {
    pub multiplicities: BTreeMap<RootLabel, usize>,
    /// Dimension of the joint zero eigenspace, `𝔪 ⊕ 𝔞`.
    pub zero_dim: usize,
    /// `ρ(X_k)` from the multiplicity-weighted positive roots.
    pub rho_on_a: Vec<f64>,
}

impl RootSystem {
    pub fn positive(&self) -> impl Iterator<Item = (&RootLabel, &usize)> {
        self.multiplicities.iter().filter(|(l, _)| l.is_positive())
    }

    pub fn multiplicity_of(&self, kind: RootKind) -> Vec<usize> {
        self.multiplicities.iter().filter(|(l, _)| l.kind() == kind).map(|(_, &m)| m).collect()
    }

    /// Real dimension of `N`: sum of positive-root multiplicities.
    pub fn dim_n(&self) -> usize {
        self.positive().map(|(_, &m)| m).sum()
    }

    /// `n` rebuilt from the multiplicities: `r·m_long + r·m_short/2 + m_middle·r(r−1)/2`.
    pub fn reconstructed_n(&self, r: usize) -> usize {
        let first = |k| self.multiplicity_of(k).first().copied().unwrap_or(0);
        let long = first(RootKind::Long);
        let short = first(RootKind::Short);
        let middle = first(RootKind::Middle);
        r * long + r * short / 2 + middle * r * (r - 1) / 2
    }

    /// Positive roots as a string-keyed map for reports.
    pub fn positive_map(&self) -> BTreeMap<String, usize> {
        self.positive().map(|(l, &m)| (l.to_string(), m)).collect()
    }
}

const ROOT_TOL: f64 = 1e-10;

/// Joint eigenspaces of `ad(X_1), …, ad(X_r)` on `su(r, r+b)`, matched against the `BC_r` pattern.
pub fn restricted_roots(sd: &StructureData) -> Result<RootSystem> {
    let basis = su_basis(sd);
    let d = basis.len();
    let ads: Vec<Vec<f64>> = (0..sd.r).map(|j| ad_matrix(&cartan_element(j, sd), &basis)).collect();
    // weights 5^j separate the integer patterns with entries in [-2, 2]
    let mut h = vec![0.0; d * d];
    for (j, a) in ads.iter().enumerate() {
        let w = 5f64.powi(j as i32);
        for (hi, ai) in h.iter_mut().zip(a) {
            *hi += w * ai;
        }
    }
    let (vals, vecs) = symmetric_eigen(&h, d);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (vals[c[0]] - v).abs() < 1e-6 => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let mut multiplicities = BTreeMap::new();
    let mut zero_dim = 0;
    for cluster in &clusters {
        let k = cluster.len();
        let mut mu = Vec::with_capacity(sd.r);
        for a in &ads {
            // compression Qᵀ A Q of ad(X_j) onto the cluster must be scalar
            let mut comp = vec![0.0; k * k];
            for (p, &cp) in cluster.iter().enumerate() {
                for (q, &cq) in cluster.iter().enumerate() {
                    let mut acc = 0.0;
                    for row in 0..d {
                        let mut av = 0.0;
                        for col in 0..d {
                            av += a[row * d + col] * vecs[col * d + cq];
                        }
                        acc += vecs[row * d + cp] * av;
                    }
                    comp[p * k + q] = acc;
                }
            }
            let mean = (0..k).map(|p| comp[p * k + p]).sum::<f64>() / k as f64;
            let dev = (0..k)
                .flat_map(|p| (0..k).map(move |q| (p, q)))
                .map(|(p, q)| (comp[p * k + q] - if p == q { mean } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            let rounded = mean.round();
            if dev > ROOT_TOL || (mean - rounded).abs() > ROOT_TOL {
                return Err(Error::RootMismatch(format!(
                    "joint eigenvalue {mean} (spread {dev:.2e}) is not an integer pattern"
                )));
            }
            mu.push(rounded as i32);
        }
        if mu.iter().all(|&x| x == 0) {
            zero_dim += k;
            continue;
        }
        let label = RootLabel::classify(&mu)
            .ok_or_else(|| Error::RootMismatch(format!("joint eigenvalue {mu:?} is not a root of type BC_r")))?;
        *multiplicities.entry(label).or_insert(0) += k;
    }
    let mut rho_on_a = vec![0.0; sd.r];
    for (label, &mult) in multiplicities.iter().filter(|(l, _)| l.is_positive()) {
        for (k, &x) in label.0.iter().enumerate() {
            rho_on_a[k] += 0.5 * mult as f64 * x as f64;
        }
    }
    let sys = RootSystem { multiplicities, zero_dim, rho_on_a };
    verify(&sys, sd)?;
    Ok(sys)
}

fn verify(sys: &RootSystem, sd: &StructureData) -> Result<()> {
    let r = sd.r;
    let expect = [
        (RootKind::Long, 2 * r, 1),
        (RootKind::Middle, 2 * r * (r - 1), sd.a),
        (RootKind::Short, 2 * r, 2 * sd.b),
    ];
    for (kind, count, mult) in expect {
        let found = sys.multiplicity_of(kind);
        if found.len() != count || found.iter().any(|&m| m != mult) {
            return Err(Error::RootMismatch(format!("{kind:?} roots: expected {count} of multiplicity {mult}, found {found:?}")));
        }
    }
    if sys.reconstructed_n(r) != sd.n {
        return Err(Error::RootMismatch(format!("n = {} but multiplicities give {}", sd.n, sys.reconstructed_n(r))));
    }
    for (k, (&got, &want)) in sys.rho_on_a.iter().zip(&sd.rho_on_a).enumerate() {
        if (got - want).abs() > ROOT_TOL {
            return Err(Error::RootMismatch(format!("rho(X_{}) = {got}, expected {want}", k + 1)));
        }
    }
    let rho_x0: f64 = sys.rho_on_a.iter().sum();
    if (rho_x0 - sd.n as f64).abs() > ROOT_TOL {
        return Err(Error::RootMismatch(format!("rho(X_0) = {rho_x0}, expected n = {}", sd.n)));
    }
    Ok(())
}

/// Structure data validated against the brute-force root computation.
pub fn validated_structure(r: usize, b: usize) -> Result<StructureData> {
    let sd = structure_data(r, b)?;
    restricted_roots(&sd)?;
    Ok(sd)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralParam {
    #[serde(serialize_with = "ser_complex")]
    pub s: C64,
    #[serde(serialize_with = "ser_complex")]
    pub sigma: C64,
    #[serde(serialize_with = "ser_complex")]
    pub growth: C64,
    #[serde(serialize_with = "ser_complex")]
    pub hua_eigenvalue: C64,
    pub admissible: bool,
    pub kz1_ok: bool,
    #[serde(skip)]
    pub sd: StructureData,
}

pub(crate) fn ser_opt_complex<S: serde::Serializer>(z: &Option<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match z {
        Some(z) => ser_complex(z, s),
        None => s.serialize_none(),
    }
}

pub(crate) fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

pub fn spectral_param(s: C64, sd: &StructureData) -> SpectralParam {
    let (r, n, rb) = (sd.r as f64, sd.n as f64, (sd.r + sd.b) as f64);
    let kz1_ok = (0..=1).all(|j| {
        let v = (s - rb) * 0.5 + (sd.b + 1 + j) as f64;
        let w = v * -4.0;
        let k = w.re.round();
        !(w.im == 0.0 && w.re == k && k >= 1.0)
    });
    SpectralParam {
        s,
        sigma: (s + n / r) * 0.5,
        growth: s * r - n,
        hua_eigenvalue: (s * s - rb * rb) * 0.25,
        admissible: s.re > sd.admissibility_threshold,
        kz1_ok,
        sd: sd.clone(),
    }
}

impl SpectralParam {
    pub fn real(s: f64, sd: &StructureData) -> Self {
        spectral_param(C64::new(s, 0.0), sd)
    }

    pub fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::Inadmissible { re: self.s.re, im: self.s.im, threshold: self.sd.admissibility_threshold })
        }
    }

    pub fn with_s(&self, s: C64) -> Self {
        spectral_param(s, &self.sd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_examples() {
        let sd = structure_data(1, 1).unwrap();
        assert_eq!((sd.n, sd.m, sd.rho1_x0), (2, 3, 2));
        assert_eq!(sd.admissibility_threshold, 0.0);
        let sd = structure_data(2, 1).unwrap();
        assert_eq!((sd.n, sd.m), (6, 5));
        assert_eq!(sd.admissibility_threshold, 1.0);
        assert_eq!(structure_data(1, 3).unwrap().n, 4);
        assert!(matches!(structure_data(2, 0), Err(Error::TubeDomain)));
        assert!(matches!(structure_data(0, 1), Err(Error::ZeroRank)));
    }

    #[test]
    fn n_matches_both_formulas() {
        for r in 1..=4 {
            for b in 1..=4 {
                let sd = structure_data(r, b).unwrap();
                assert_eq!(sd.n, r * (r + b));
                assert_eq!(sd.rho1_x0 * sd.r, sd.n * sd.rho0_x0);
                assert!((sd.rho_on_a.iter().sum::<f64>() - sd.n as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn roots_of_su_1_2() {
        let sd = structure_data(1, 1).unwrap();
        let sys = restricted_roots(&sd).unwrap();
        let pos = sys.positive_map();
        assert_eq!(pos.len(), 2);
        assert_eq!(pos["b1"], 1);
        assert_eq!(pos["b1/2"], 2);
        assert_eq!(sys.dim_n(), 3);
        // dim su(1,2) = 8 = (dim m + dim a) + 2 dim N
        assert_eq!(sys.zero_dim + 2 * sys.dim_n(), 8);
    }

    #[test]
    fn roots_of_su_2_3() {
        let sd = structure_data(2, 1).unwrap();
        let sys = restricted_roots(&sd).unwrap();
        let pos = sys.positive_map();
        assert_eq!(pos["b1"], 1);
        assert_eq!(pos["b2"], 1);
        assert_eq!(pos["(b2+b1)/2"], 2);
        assert_eq!(pos["(b2-b1)/2"], 2);
        assert_eq!(pos["b2/2"], 2);
        assert_eq!(sys.reconstructed_n(2), 6);
    }

    #[test]
    fn labels() {
        assert!(RootLabel(vec![-1, 1]).is_positive());
        assert!(!RootLabel(vec![1, -1]).is_positive());
        assert_eq!(RootLabel(vec![0, -2]).to_string(), "-b2");
        assert_eq!(RootLabel(vec![-1, -1]).to_string(), "-(b2+b1)/2");
        assert_eq!(RootLabel(vec![1, -1]).to_string(), "-(b2-b1)/2");
    }

    #[test]
    fn spectral_examples() {
        let sd = structure_data(1, 1).unwrap();
        let sp = SpectralParam::real(2.0, &sd);
        assert_eq!(sp.hua_eigenvalue, C64::new(0.0, 0.0));
        assert_eq!(sp.growth, C64::new(0.0, 0.0));
        let sd = structure_data(2, 1).unwrap();
        let sp = SpectralParam::real(2.0, &sd);
        assert_eq!(sp.sigma.re, 2.5);
        assert_eq!(sp.growth.re, -2.0);
        let sp = SpectralParam::real(4.0, &sd);
        assert!(sp.admissible);
        assert_eq!(sp.hua_eigenvalue.re, 1.75);
        assert!(!SpectralParam::real(0.5, &sd).admissible);
    }

    #[test]
    fn kz1_condition() {
        let sd = structure_data(1, 1).unwrap();
        // -4[2 + j + (s-2)/2] = 1 at s = -2.5 (j = 0)
        assert!(!SpectralParam::real(-2.5, &sd).kz1_ok);
        assert!(SpectralParam::real(3.0, &sd).kz1_ok);
    }
}
