//! Gamma function for complex argument, Gauss–Legendre nodes, and Jacobi polynomials.

use num_complex::Complex;

use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Principal branch of `log Γ(z)` (Lanczos, g = 7) with reflection for `Re z < 1/2`.
pub fn ln_gamma<T: Real>(z: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let pi = T::PI();
    if z.re < half {
        // log Γ(z) = log π − log sin(πz) − log Γ(1 − z)
        let one = Complex::new(T::one(), T::zero());
        let s = (z * pi).sin();
        return Complex::new(pi.ln(), T::zero()) - s.ln() - ln_gamma(one - z);
    }
    let z = z - T::one();
    let mut x = Complex::new(T::lit(LANCZOS_COEF[0]), T::zero());
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += Complex::new(T::lit(c), T::zero()) / (z + T::of(i));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    let ln_sqrt_2pi = (T::lit(2.0) * pi).sqrt().ln();
    Complex::new(ln_sqrt_2pi, T::zero()) + (z + half) * t.ln() - t + x.ln()
}

pub fn gamma<T: Real>(z: Complex<T>) -> Complex<T> {
    ln_gamma(z).exp()
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let half_len = (b - a) * T::lit(0.5);
    let mid = (b + a) * T::lit(0.5);
    let nf = T::of(n);
    for i in 0..(n + 1) / 2 {
        let mut x = (T::PI() * (T::of(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != T::zero() { d } else { dp };
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = mid - half_len * x;
        nodes[n - 1 - i] = mid + half_len * x;
        weights[i] = w * half_len;
        weights[n - 1 - i] = w * half_len;
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 2..=n {
        let kf = T::of(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::of(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Jacobi polynomial `P_k^{(α,β)}(x)` by its three-term recurrence.
pub fn jacobi<T: Real>(k: usize, alpha: T, beta: T, x: T) -> T {
    let two = T::lit(2.0);
    let mut p0 = T::one();
    if k == 0 {
        return p0;
    }
    let mut p1 = (alpha + T::one()) + (alpha + beta + two) * (x - T::one()) / two;
    for m in 2..=k {
        let mf = T::of(m);
        let c = two * mf + alpha + beta;
        let a1 = two * mf * (mf + alpha + beta) * (c - two);
        let a2 = (c - T::one()) * (alpha * alpha - beta * beta);
        let a3 = (c - two) * (c - T::one()) * c;
        let a4 = two * (mf + alpha - T::one()) * (mf + beta - T::one()) * c;
        let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_k^{(α,β)}(1) = (α+1)_k / k!`.
pub fn jacobi_at_one<T: Real>(k: usize, alpha: T) -> T {
    (1..=k).fold(T::one(), |acc, j| acc * (alpha + T::of(j)) / T::of(j))
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn gamma_at_integers_and_half() {
        for n in 1..10usize {
            let fact: f64 = (1..n).map(|k| k as f64).product();
            let g = gamma(C::new(n as f64, 0.0));
            assert!((g.re - fact).abs() <= 1e-13 * fact);
        }
        let g = gamma(C::new(0.5, 0.0));
        assert!((g.re - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gamma_recurrence_complex() {
        let z = C::new(1.3, 0.7);
        let lhs = gamma(z + 1.0);
        let rhs = z * gamma(z);
        assert!((lhs - rhs).norm() < 1e-13 * rhs.norm());
        // reflection branch
        let w = C::new(-0.4, 0.3);
        let refl = gamma(w) * gamma(C::new(1.0, 0.0) - w);
        let want = C::new(std::f64::consts::PI, 0.0) / (w * std::f64::consts::PI).sin();
        assert!((refl - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(6, 0.0f64, 2.0);
        for deg in 0..12 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let want = 2f64.powi(deg + 1) / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-12 * want, "degree {deg}");
        }
    }

    #[test]
    fn jacobi_matches_closed_forms() {
        let (a, b) = (1.0f64, 2.0);
        for &x in &[-0.7, 0.1, 0.9] {
            assert!((jacobi(1, a, b, x) - (0.5 * (a - b) + 0.5 * (a + b + 2.0) * x)).abs() < 1e-14);
            // Legendre special case P_2 = (3x² − 1)/2
            assert!((jacobi(2, 0.0, 0.0, x) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-14);
        }
        assert!((jacobi(5, a, b, 1.0) - jacobi_at_one(5, a)).abs() < 1e-12);
    }
}
