//! Gauss-Legendre rules and the panelled oscillatory integrator used for
//! Fourier transforms of surface measures.

use crate::error::{CoreError, Result};
use num_complex::Complex64;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Chebyshev-based initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                // Legendre P_n(x) and derivative by upward recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / pp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GlRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    pub fn integrate_c<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x) * *w;
        }
        acc * half
    }

    /// Composite rule over `panels` equal panels.
    pub fn composite_c<F: FnMut(f64) -> Complex64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> Complex64 {
        let h = (b - a) / panels as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            acc += self.integrate_c(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f);
        }
        acc
    }
}

/// Integrate an oscillatory integrand over [a, b]. `phase_span` is an upper
/// bound for the total phase variation (radians) across the interval; the
/// initial panel count keeps roughly one wavelength per panel, then panels are
/// doubled until two successive composite values agree to `tol`.
///
/// Returns the value and the last doubling difference as an error estimate.
pub fn oscillatory_c<F: FnMut(f64) -> Complex64>(
    a: f64,
    b: f64,
    phase_span: f64,
    tol: f64,
    max_panels: usize,
    mut f: F,
) -> Result<(Complex64, f64)> {
    let rule = GlRule::new(16);
    let mut panels = ((phase_span / std::f64::consts::TAU).ceil() as usize).max(4);
    let mut prev = rule.composite_c(a, b, panels, &mut f);
    loop {
        panels *= 2;
        let cur = rule.composite_c(a, b, panels, &mut f);
        let diff = (cur - prev).norm();
        if diff <= tol {
            return Ok((cur, diff));
        }
        if panels > max_panels {
            return Err(CoreError::UnsupportedFrequency { panels, estimate: diff });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_rule_exact_on_polynomials() {
        let rule = GlRule::new(8);
        // degree  <= 15 is exact
        let val = rule.integrate(0.0, 1.0, |x| x.powi(15));
        assert!((val - 1.0 / 16.0).abs() < 1e-14);
        let val = rule.integrate(-2.0, 3.0, |x| 4.0 * x * x * x - x + 2.0);
        let exact = (3.0f64.powi(4) - 16.0) - (4.5 - 2.0) + 2.0 * 5.0;
        assert!((val - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn gl_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 33, 64, 128] {
            let rule = GlRule::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn oscillatory_matches_closed_form() {
        // int_0^1 e^{i w u} du = (e^{iw} - 1)/(iw)
        let w = 4000.0;
        let (val, _) = oscillatory_c(0.0, 1.0, w, 1e-10, 1 << 20, |u| {
            Complex64::new(0.0, w * u).exp()
        })
        .unwrap();
        let exact = (Complex64::new(0.0, w).exp() - 1.0) / Complex64::new(0.0, w);
        assert!((val - exact).norm() < 1e-9);
    }
}
