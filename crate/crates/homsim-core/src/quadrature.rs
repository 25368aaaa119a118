//! Quadrature rules and weighted integrals.
//!
//! Gauss rules are built by the Golub-Welsch algorithm: nodes are the
//! eigenvalues of the symmetric tridiagonal Jacobi matrix of the orthogonal
//! polynomial recurrence, weights come from the first component of each
//! eigenvector scaled by the total weight of the measure. Rules are cached
//! process-wide by node count since the eigendecomposition dominates cost
//! for large rules.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Nodes and weights of a fixed quadrature rule, nodes ascending.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Weighted sum of `f` over the nodes.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodes/weights from the Jacobi matrix off-diagonal and the measure's
/// zeroth moment. The diagonal is zero for both measures used here
/// (symmetric weight functions).
fn golub_welsch(offdiag: &[f64], moment0: f64) -> QuadRule {
    let n = offdiag.len() + 1;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for (k, &b) in offdiag.iter().enumerate() {
        jacobi[(k, k + 1)] = b;
        jacobi[(k + 1, k)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], moment0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Symmetric measures give symmetric rules; enforce the symmetry exactly
    // so that sign-flip invariances downstream hold to the last bit.
    let m = pairs.len();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }

    QuadRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

type RuleCache = Mutex<HashMap<usize, Arc<QuadRule>>>;

static HERMITE_CACHE: LazyLock<RuleCache> = LazyLock::new(|| Mutex::new(HashMap::new()));
static LEGENDRE_CACHE: LazyLock<RuleCache> = LazyLock::new(|| Mutex::new(HashMap::new()));

/// Gauss-Hermite rule for the weight e^{-x^2} on (-inf, inf)
/// (physicists' convention): sum_k w_k f(x_k) ~ int f(x) e^{-x^2} dx.
pub fn gauss_hermite(n: usize) -> Arc<QuadRule> {
    assert!(n >= 1, "rule needs at least one node");
    let mut cache = HERMITE_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
            Arc::new(golub_welsch(&offdiag, std::f64::consts::PI.sqrt()))
        })
        .clone()
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<QuadRule> {
    assert!(n >= 1, "rule needs at least one node");
    let mut cache = LEGENDRE_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let offdiag: Vec<f64> = (1..n)
                .map(|k| {
                    let k = k as f64;
                    k / (4.0 * k * k - 1.0).sqrt()
                })
                .collect();
            Arc::new(golub_welsch(&offdiag, 2.0))
        })
        .clone()
}

/// Trapezoidal weights for an ascending, possibly nonuniform grid.
/// They reproduce `int 1 dx = span` exactly.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 2, "trapezoid needs at least two points");
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Weighted dot product sum_i w_i f_i.
pub fn weighted_sum(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

/// int q(x) e^{-i omega x} dx over the grid span, treating `q` as piecewise
/// linear between nodes (Filon-type rule). Each interval is integrated in
/// closed form, so arbitrarily fast phase oscillation costs no accuracy
/// beyond the piecewise-linear representation of `q` itself. At omega = 0
/// this reduces exactly to the trapezoid rule.
pub fn oscillatory_integral(x: &[f64], q: &[C64], omega: f64) -> C64 {
    assert_eq!(x.len(), q.len());
    let mut total = C64::new(0.0, 0.0);
    for j in 0..x.len().saturating_sub(1) {
        let h = x[j + 1] - x[j];
        let (i0, i1) = segment_moments(omega, h);
        let head = C64::from_polar(1.0, -omega * x[j]);
        // q(s) = q_j + (q_{j+1} - q_j) s/h on the interval
        total += head * (q[j] * (i0 - i1 / h) + q[j + 1] * (i1 / h));
    }
    total
}

/// (int_0^h e^{-i w s} ds, int_0^h s e^{-i w s} ds), series fallback for
/// small phase advance to avoid cancellation.
fn segment_moments(omega: f64, h: f64) -> (C64, C64) {
    let theta = omega * h;
    if theta.abs() < 1e-3 {
        let t = C64::new(0.0, -theta); // -i theta
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let i0 = h * (C64::new(1.0, 0.0) + t / 2.0 + t2 / 6.0 + t3 / 24.0 + t4 / 120.0);
        let i1 = h * h * (C64::new(0.5, 0.0) + t / 3.0 + t2 / 8.0 + t3 / 30.0 + t4 / 144.0);
        (i0, i1)
    } else {
        let iw = C64::new(0.0, omega);
        let e = C64::from_polar(1.0, -theta);
        let i0 = (C64::new(1.0, 0.0) - e) / iw;
        let i1 = (i0 - h * e) / iw;
        (i0, i1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_small_rules_match_known_values() {
        let r2 = gauss_hermite(2);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(r2.nodes[0], -inv_sqrt2, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.nodes[1], inv_sqrt2, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.weights[0], std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-14);

        let r3 = gauss_hermite(3);
        assert_eq!(r3.nodes[1], 0.0);
        assert_abs_diff_eq!(r3.nodes[2], (1.5_f64).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(
            r3.weights[1],
            2.0 * std::f64::consts::PI.sqrt() / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn hermite_integrates_monomials_exactly() {
        // int x^2 e^{-x^2} = sqrt(pi)/2; int x^4 e^{-x^2} = 3 sqrt(pi)/4
        let r = gauss_hermite(7);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(r.integrate(|x| x * x), sqrt_pi / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.integrate(|x| x.powi(4)), 0.75 * sqrt_pi, epsilon = 1e-12);
        assert_abs_diff_eq!(r.integrate(|x| x.powi(3)), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn hermite_weights_normalize() {
        for n in [3, 41, 81] {
            let r = gauss_hermite(n);
            let total: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(total, std::f64::consts::PI.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn hermite_gaussian_characteristic_function() {
        // int e^{-icx} e^{-x^2} dx = sqrt(pi) e^{-c^2/4}; accurate while the
        // phase is resolved by the rule.
        let r = gauss_hermite(41);
        let c = 3.0_f64;
        let mut s = C64::new(0.0, 0.0);
        for (&x, &w) in r.nodes.iter().zip(&r.weights) {
            s += w * C64::from_polar(1.0, -c * x);
        }
        let exact = std::f64::consts::PI.sqrt() * (-c * c / 4.0).exp();
        assert_abs_diff_eq!(s.re, exact, epsilon = 1e-10);
        assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn legendre_small_rules_match_known_values() {
        let r2 = gauss_legendre(2);
        assert_abs_diff_eq!(r2.nodes[1], 1.0 / 3.0_f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(r2.weights[0], 1.0, epsilon = 1e-14);
        let r3 = gauss_legendre(3);
        assert_abs_diff_eq!(r3.nodes[2], (0.6_f64).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(r3.weights[1], 8.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r3.weights[0], 5.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn trapezoid_reproduces_span() {
        let x = [0.0, 0.1, 0.35, 0.7, 1.3];
        let w = trapezoid_weights(&x);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 1.3, epsilon = 1e-15);
    }

    #[test]
    fn oscillatory_matches_closed_form_exponential() {
        // int_0^T e^{-t} e^{-iwt} dt = (1 - e^{-(1+iw)T})/(1+iw), with the
        // piecewise-linear error of representing e^{-t} on the grid.
        let n = 4001;
        let tmax = 20.0;
        let x: Vec<f64> = (0..n).map(|i| tmax * i as f64 / (n - 1) as f64).collect();
        let q: Vec<C64> = x.iter().map(|&t| C64::new((-t).exp(), 0.0)).collect();
        for omega in [0.0, 0.5, 7.0, 300.0] {
            let got = oscillatory_integral(&x, &q, omega);
            let z = C64::new(1.0, omega);
            let exact = (C64::new(1.0, 0.0) - (-z * tmax).exp()) / z;
            assert_abs_diff_eq!(got.re, exact.re, epsilon = 3e-6);
            assert_abs_diff_eq!(got.im, exact.im, epsilon = 3e-6);
        }
    }

    #[test]
    fn oscillatory_at_zero_equals_trapezoid() {
        let x = [0.0, 0.3, 0.9, 1.0];
        let q: Vec<C64> = [1.0, 2.0, 0.5, 0.25]
            .iter()
            .map(|&v| C64::new(v, 0.0))
            .collect();
        let w = trapezoid_weights(&x);
        let trap: f64 = w.iter().zip(&q).map(|(a, b)| a * b.re).sum();
        let osc = oscillatory_integral(&x, &q, 0.0);
        assert_abs_diff_eq!(osc.re, trap, epsilon = 1e-14);
        assert_abs_diff_eq!(osc.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn segment_moments_agree_with_simpson_on_both_branches() {
        // phase advances just below and above the series/closed-form switch,
        // each checked against a dense Simpson reference
        let h = 0.01;
        for omega in [0.09, 0.11] {
            let (i0, i1) = segment_moments(omega, h);
            let n = 2000; // panels
            let (mut r0, mut r1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            let dx = h / n as f64;
            for k in 0..n {
                let (a, mid, b) = (k as f64 * dx, (k as f64 + 0.5) * dx, (k + 1) as f64 * dx);
                let f = |s: f64| C64::from_polar(1.0, -omega * s);
                r0 += dx / 6.0 * (f(a) + 4.0 * f(mid) + f(b));
                r1 += dx / 6.0 * (a * f(a) + 4.0 * mid * f(mid) + b * f(b));
            }
            // the closed form loses ~6 digits of i1 to cancellation right at
            // the switch; that is the worst case by construction
            assert!((i0 - r0).norm() < 1e-15, "i0 branch mismatch at omega {omega}");
            assert!((i1 - r1).norm() < 1e-14, "i1 branch mismatch at omega {omega}");
        }
    }
}
