//! Quadrature, minimization and fitting primitives shared by the other
//! modules.

use serde::{Deserialize, Serialize};

/// Resolution policy for composite Simpson quadrature.
///
/// The panel count on `[a, b]` is `panels_per_unit · (b − a)`, clamped to
/// `[min_panels, max_panels]` and rounded up to an even number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub panels_per_unit: f64,
    pub min_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            panels_per_unit: 16.0,
            min_panels: 64,
            max_panels: 4_000_000,
        }
    }
}

impl QuadConfig {
    pub fn is_valid(&self) -> bool {
        self.panels_per_unit > 0.0 && self.min_panels >= 2 && self.max_panels >= self.min_panels
    }

    pub fn panels_for(&self, length: f64) -> usize {
        let wanted = (self.panels_per_unit * length.abs()).ceil();
        let n = if wanted.is_finite() {
            (wanted as usize).clamp(self.min_panels, self.max_panels)
        } else {
            self.max_panels
        };
        n + (n & 1)
    }

    /// Same policy with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            panels_per_unit: 2.0 * self.panels_per_unit,
            min_panels: 2 * self.min_panels,
            max_panels: 2 * self.max_panels,
        }
    }
}

/// Composite Simpson rule with `n` panels (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2);
    let n = n + (n & 1);
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + i as f64 * h;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

/// Composite Simpson with the panel count chosen by `cfg`.
pub fn simpson_cfg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> f64 {
    simpson(f, a, b, cfg.panels_for(b - a))
}

/// Simpson over dyadic sub-intervals `[ε·2^k, ε·2^{k+1}]` covering `[eps, b]`.
///
/// Suited to integrands with an integrable power singularity at zero: each
/// sub-interval sees a bounded relative variation of the integrand.
pub fn simpson_graded<F: Fn(f64) -> f64>(f: F, eps: f64, b: f64, panels_per_octave: usize) -> f64 {
    debug_assert!(eps > 0.0 && b > eps);
    let mut lo = eps;
    let mut total = 0.0;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        total += simpson(&f, lo, hi, panels_per_octave);
        lo = hi;
    }
    total
}

// 5-point Gauss–Legendre on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// 5-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
///
/// Returns `(argmin, min)`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..500 {
        if (hi - lo) <= rel_tol * (1.0 + x1.abs().max(x2.abs())) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Ordinary least-squares fit `y ≈ intercept + slope·x`.
///
/// Returns `None` for fewer than two points or degenerate abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn panel_count_is_even_and_clamped() {
        let cfg = QuadConfig::default();
        assert_eq!(cfg.panels_for(0.0), 64);
        assert_eq!(cfg.panels_for(10.03) % 2, 0);
        assert_eq!(cfg.panels_for(f64::INFINITY), cfg.max_panels);
    }

    #[test]
    fn graded_simpson_handles_inverse_sqrt() {
        let eps = 1e-10;
        let v = simpson_graded(|s| s.powf(-0.5), eps, 4.0, 64) + 2.0 * eps.sqrt();
        assert!((v - 4.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_nine() {
        let v = gauss_legendre5(|x| x.powi(9) + x.powi(8), 0.0, 1.0);
        assert!((v - (0.1 + 1.0 / 9.0)).abs() < 1e-13);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section_min(|x| (x - 1.5) * (x - 1.5) - 2.0, 0.0, 10.0, 1e-12);
        assert!((x - 1.5).abs() < 1e-6);
        assert!((fx + 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (s, c) = linear_fit(&xs, &ys).unwrap();
        assert!((s + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
