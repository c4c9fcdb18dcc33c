//! Smooth cutoff functions with plateaus and certified derivative bounds.
//!
//! Every cutoff here is built from one primitive, the smooth step
//!
//! ```text
//! step(s) = h(s) / (h(s) + h(1 − s)),   h(s) = exp(−1/s) for s > 0, else 0
//! ```
//!
//! which is flat to all orders at `s = 0` and `s = 1`. The spatial cutoff is
//! `φ(x) = ζ(|x|)^κ` with `ζ(r) = 1 − step(r − 1)`; the time cutoff `f` and
//! the radial cutoff `g` are products of rescaled steps with the plateaus
//! `f = 1` on `[1/2, 2/3]`, `f = 0` off `(1/4, 3/4)`, `g = 1` on `[0, 1]`,
//! `g = 0` on `[2, ∞)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Values below this are treated as zero when dividing by powers of a
/// cutoff.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutoffError {
    #[error("θ = {theta} exceeds the capacity (κ−2)/κ = {capacity} of the κ = {kappa} family")]
    ThetaExceedsFamilyCapacity { theta: f64, capacity: f64, kappa: u32 },
    #[error("invalid cutoff parameter: {0}")]
    InvalidParameter(String),
}

/// Value and first two derivatives of a scalar function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    const ZERO: Jet = Jet {
        v: 0.0,
        d1: 0.0,
        d2: 0.0,
    };
    const ONE: Jet = Jet {
        v: 1.0,
        d1: 0.0,
        d2: 0.0,
    };

    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }

    fn one_minus(self) -> Jet {
        Jet {
            v: 1.0 - self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }

    /// `self^k` for real `k`, assuming `self.v > 0`.
    fn powf(self, k: f64) -> Jet {
        if self.v <= 0.0 {
            return Jet::ZERO;
        }
        let a = self.v.powf(k - 2.0);
        Jet {
            v: self.v.powf(k),
            d1: k * self.v.powf(k - 1.0) * self.d1,
            d2: k * (k - 1.0) * a * self.d1 * self.d1 + k * self.v.powf(k - 1.0) * self.d2,
        }
    }
}

fn bump(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let h = (-1.0 / s).exp();
    let s2 = s * s;
    (h, h / s2, h * (1.0 / (s2 * s2) - 2.0 / (s2 * s)))
}

/// The smooth step rising from 0 at `s ≤ 0` to 1 at `s ≥ 1`.
pub fn smooth_step(s: f64) -> Jet {
    if s <= 0.0 {
        return Jet::ZERO;
    }
    if s >= 1.0 {
        return Jet::ONE;
    }
    let (u, du, ddu) = bump(s);
    let (v, dv_raw, ddv) = bump(1.0 - s);
    let dv = -dv_raw;
    let d = u + v;
    let num = du * v - u * dv;
    let dnum = ddu * v - u * ddv;
    let dd = du + dv;
    Jet {
        v: u / d,
        d1: num / (d * d),
        d2: dnum / (d * d) - 2.0 * num * dd / (d * d * d),
    }
}

/// Smooth step rising over `[a, b]`.
fn rise(x: f64, a: f64, b: f64) -> Jet {
    let w = b - a;
    let j = smooth_step((x - a) / w);
    Jet {
        v: j.v,
        d1: j.d1 / w,
        d2: j.d2 / (w * w),
    }
}

/// `ζ(r) = 1` on `[0, 1]`, `0` on `[2, ∞)`.
pub fn zeta(r: f64) -> Jet {
    rise(r, 1.0, 2.0).one_minus()
}

/// Time cutoff: `1` on `[1/2, 2/3]`, `0` on `[0, 1/4] ∪ [3/4, ∞)`.
pub fn time_cutoff(tau: f64) -> Jet {
    rise(tau, 0.25, 0.5).mul(rise(tau, 2.0 / 3.0, 0.75).one_minus())
}

/// Radial cutoff: `1` on `[0, 1]`, `0` on `[2, ∞)`.
pub fn radial_cutoff(tau: f64) -> Jet {
    rise(tau, 1.0, 2.0).one_minus()
}

/// The spatial cutoff `φ = ζ(|x|)^κ` together with the exponent `p` that
/// fixes the powers used in the space-time cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub kappa: u32,
    pub p: f64,
}

/// Builds `φ` with `κ = ⌈2/(1 − θ_max)⌉`, which certifies
/// `|Δφ| ≤ C_θ φ^θ` for every `θ ≤ (κ − 2)/κ ⊇ (0, θ_max]`.
pub fn build_phi(theta_max: f64) -> Result<CutoffFamily, CutoffError> {
    if !(theta_max > 0.0 && theta_max < 1.0) {
        return Err(CutoffError::InvalidParameter(format!(
            "θ_max must lie in (0, 1), got {theta_max}"
        )));
    }
    let kappa = (2.0 / (1.0 - theta_max) - 1e-12).ceil().max(2.0) as u32;
    CutoffFamily::new(kappa, 2.0)
}

impl CutoffFamily {
    pub fn new(kappa: u32, p: f64) -> Result<Self, CutoffError> {
        if kappa < 2 {
            return Err(CutoffError::InvalidParameter(format!(
                "κ must be at least 2, got {kappa}"
            )));
        }
        if !(p > 1.0) {
            return Err(CutoffError::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        Ok(Self { kappa, p })
    }

    pub fn with_p(self, p: f64) -> Result<Self, CutoffError> {
        Self::new(self.kappa, p)
    }

    /// Largest `θ` for which this family certifies `|Δφ| ≤ C_θ φ^θ`.
    pub fn capacity(&self) -> f64 {
        (self.kappa as f64 - 2.0) / self.kappa as f64
    }

    /// `φ` and its first two radial derivatives at radius `r`.
    pub fn phi_jet(&self, r: f64) -> Jet {
        let z = zeta(r);
        if z.v <= 0.0 {
            return Jet::ZERO;
        }
        let k = self.kappa as f64;
        let zk1 = z.v.powi(self.kappa as i32 - 1);
        let zk2 = if self.kappa >= 2 {
            z.v.powi(self.kappa as i32 - 2)
        } else {
            0.0
        };
        Jet {
            v: zk1 * z.v,
            d1: k * zk1 * z.d1,
            d2: k * zk1 * z.d2 + k * (k - 1.0) * zk2 * z.d1 * z.d1,
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.phi_jet(r).v
    }

    /// `Δφ` in `ℝ^dim` at radius `r`.
    pub fn laplacian_phi(&self, r: f64, dim: u32) -> f64 {
        if r <= 1.0 || r >= 2.0 {
            return 0.0;
        }
        let j = self.phi_jet(r);
        j.d2 + (dim as f64 - 1.0) / r * j.d1
    }

    /// `|Δφ| / φ^θ` at radius `r` with the power of `ζ` cancelled:
    /// `ζ^{κ−2−κθ} |κ(κ−1)ζ'² + κζ(ζ'' + (N−1)ζ'/r)|`.
    ///
    /// `None` when `θ` exceeds the capacity, where the ratio is unbounded
    /// near `r = 2`.
    pub fn laplacian_over_power(&self, r: f64, dim: u32, theta: f64) -> Option<f64> {
        if theta > self.capacity() + 1e-12 {
            return None;
        }
        if r <= 1.0 || r >= 2.0 {
            return Some(0.0);
        }
        let z = zeta(r);
        let k = self.kappa as f64;
        let bracket = k * (k - 1.0) * z.d1 * z.d1 + k * z.v * (z.d2 + (dim as f64 - 1.0) / r * z.d1);
        let e = (k - 2.0 - k * theta).max(0.0);
        Some(z.v.powf(e) * bracket.abs())
    }

    /// `φ_R(x) = φ(x/R)` and `Δφ_R(x) = R⁻²(Δφ)(x/R)` at `|x| = r`.
    pub fn scaled_phi(&self, big_r: f64, r: f64, dim: u32) -> (f64, f64) {
        let s = r / big_r;
        (self.phi(s), self.laplacian_phi(s, dim) / (big_r * big_r))
    }
}

/// `f_T`, `g_R`, `ψ_{T,R} = f_T g_R` and their derivatives.
///
/// `f_T(t) = f(t/T)^{p/(p−1)}` and `g_R(x) = g(|x|²/R²)^{2p/(p−1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeCutoffs {
    pub p: f64,
    pub big_t: f64,
    pub big_r: f64,
}

pub fn build_spacetime_cutoffs(p: f64, big_t: f64, big_r: f64) -> Result<SpacetimeCutoffs, CutoffError> {
    if !(p > 1.0) {
        return Err(CutoffError::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    if !(big_t > 0.0 && big_r > 0.0) {
        return Err(CutoffError::InvalidParameter("T and R must be positive".into()));
    }
    Ok(SpacetimeCutoffs { p, big_t, big_r })
}

impl SpacetimeCutoffs {
    fn time_power(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn space_power(&self) -> f64 {
        2.0 * self.p / (self.p - 1.0)
    }

    pub fn f_t(&self, t: f64) -> f64 {
        time_cutoff(t / self.big_t).v.powf(self.time_power())
    }

    pub fn df_t(&self, t: f64) -> f64 {
        let f = time_cutoff(t / self.big_t);
        if f.v <= 0.0 {
            return 0.0;
        }
        let k = self.time_power();
        k * f.v.powf(k - 1.0) * f.d1 / self.big_t
    }

    /// The radial profile `r ↦ g_R(r)` and its first two derivatives.
    fn g_jet(&self, r: f64) -> Jet {
        let r2 = self.big_r * self.big_r;
        let g = radial_cutoff(r * r / r2);
        // chain rule through τ = r²/R²
        let dtau = 2.0 * r / r2;
        let inner = Jet {
            v: g.v,
            d1: g.d1 * dtau,
            d2: g.d2 * dtau * dtau + g.d1 * 2.0 / r2,
        };
        inner.powf(self.space_power())
    }

    pub fn g_r(&self, r: f64) -> f64 {
        self.g_jet(r).v
    }

    /// `Δg_R` in `ℝ^dim` at `|x| = r`.
    pub fn lap_g_r(&self, r: f64, dim: u32) -> f64 {
        if r <= self.big_r || r >= 2f64.sqrt() * self.big_r {
            return 0.0;
        }
        let j = self.g_jet(r);
        j.d2 + (dim as f64 - 1.0) / r * j.d1
    }

    pub fn psi(&self, t: f64, r: f64) -> f64 {
        self.f_t(t) * self.g_r(r)
    }

    /// `g_R^{−1/(p−1)} |Δg_R|^{p/(p−1)}` with the powers of `g` cancelled
    /// analytically, so it stays finite where `g` underflows.
    pub fn young_space_weight(&self, r: f64, dim: u32) -> f64 {
        if r <= self.big_r || r >= 2f64.sqrt() * self.big_r {
            return 0.0;
        }
        let beta = self.space_power();
        let r2 = self.big_r * self.big_r;
        let g = radial_cutoff(r * r / r2);
        let dtau = 2.0 * r / r2;
        let gp = g.d1 * dtau;
        let gpp = g.d2 * dtau * dtau + g.d1 * 2.0 / r2;
        // Δ(g^β) = g^{β−2} [β(β−1) g'² + β g (g'' + (N−1) g'/r)]
        let reduced = beta * (beta - 1.0) * gp * gp + beta * g.v * (gpp + (dim as f64 - 1.0) / r * gp);
        reduced.abs().powf(self.time_power())
    }

    /// `f_T^{−1/(p−1)} |∂_t f_T|^{p/(p−1)}` with the powers of `f`
    /// cancelled analytically.
    pub fn young_time_weight(&self, t: f64) -> f64 {
        let f = time_cutoff(t / self.big_t);
        if f.v <= 0.0 {
            return 0.0;
        }
        let k = self.time_power();
        (k * f.d1.abs() / self.big_t).powf(k)
    }
}

/// Largest `|Δφ|/φ^θ` over the grid points in `[1, 2]` where `φ` is above
/// the underflow floor: a numerical value for `C_θ`.
pub fn verify_phi3(family: &CutoffFamily, theta: f64, grid: &[f64], dim: u32) -> Result<f64, CutoffError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(CutoffError::InvalidParameter(format!(
            "θ must lie in (0, 1), got {theta}"
        )));
    }
    let capacity = family.capacity();
    if theta > capacity + 1e-12 {
        return Err(CutoffError::ThetaExceedsFamilyCapacity {
            theta,
            capacity,
            kappa: family.kappa,
        });
    }
    Ok(grid
        .iter()
        .filter(|r| (1.0..=2.0).contains(*r))
        .filter_map(|&r| {
            let phi = family.phi(r);
            (phi >= UNDERFLOW_FLOOR).then(|| family.laplacian_phi(r, dim).abs() / phi.powf(theta))
        })
        .fold(0.0, f64::max))
}

/// `n` equally spaced radii on `[1, 2]`.
pub fn annulus_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| 1.0 + i as f64 / (n - 1) as f64).collect()
}

/// Fitted constants of `|Δg_R| ≤ C R⁻² g_R^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianBound {
    /// `(R, sup_x |Δg_R(x)| R² / g_R(x)^{1/p})`.
    pub per_radius: Vec<(f64, f64)>,
    pub constant: f64,
    /// `max/min − 1` over the per-radius constants.
    pub spread: f64,
}

/// Dense-grid supremum of `|Δg_R| R² / g_R^{1/p}` on the annulus
/// `R ≤ |x| ≤ 2R` for each `R` in `radii`. Points where `g_R^{1/p}`
/// underflows are excluded; inside `B_R` the ratio is identically zero.
pub fn verify_laplacian_bound(p: f64, radii: &[f64], dim: u32, points: usize) -> Result<LaplacianBound, CutoffError> {
    if radii.is_empty() {
        return Err(CutoffError::InvalidParameter("radius grid is empty".into()));
    }
    let per_radius = radii
        .iter()
        .map(|&big_r| {
            let cut = build_spacetime_cutoffs(p, 1.0, big_r)?;
            let sup = (0..points.max(2))
                .map(|i| big_r * (1.0 + i as f64 / (points.max(2) - 1) as f64))
                .filter_map(|r| {
                    let denom = cut.g_r(r).powf(1.0 / p);
                    (denom >= UNDERFLOW_FLOOR).then(|| cut.lap_g_r(r, dim).abs() * big_r * big_r / denom)
                })
                .fold(0.0, f64::max);
            Ok((big_r, sup))
        })
        .collect::<Result<Vec<_>, CutoffError>>()?;
    let max = per_radius.iter().map(|x| x.1).fold(0.0, f64::max);
    let min = per_radius.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok(LaplacianBound {
        per_radius,
        constant: max,
        spread: max / min - 1.0,
    })
}

/// Worst deviations from the prescribed plateaus, supports and flatness
/// conditions, measured on dense grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    /// `max |φ − 1|` on `[0, 1]`.
    pub phi_inner: f64,
    /// `max |φ|` on `[2, 4]`.
    pub phi_outer: f64,
    /// `|φ'(1)| + |φ'(2)|`.
    pub phi_normal_derivative: f64,
    /// Amount by which `φ` leaves `[0, 1]` anywhere on the grid.
    pub phi_range: f64,
    /// `max |f − 1|` on `[1/2, 2/3]`.
    pub f_plateau: f64,
    /// `max |f|` on `[0, 1/4] ∪ [3/4, 2]`.
    pub f_support: f64,
    /// `max |g − 1|` on `[0, 1]`.
    pub g_plateau: f64,
    /// `max |g|` on `[2, 4]`.
    pub g_support: f64,
}

impl PlateauReport {
    pub fn worst(&self) -> f64 {
        [
            self.phi_inner,
            self.phi_outer,
            self.phi_normal_derivative,
            self.phi_range,
            self.f_plateau,
            self.f_support,
            self.g_plateau,
            self.g_support,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn certify_plateaus(family: &CutoffFamily, points: usize) -> PlateauReport {
    let sweep = |a: f64, b: f64| (0..=points).map(move |i| a + (b - a) * i as f64 / points as f64);
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    PlateauReport {
        phi_inner: max_of(&mut sweep(0.0, 1.0).map(|r| (family.phi(r) - 1.0).abs())),
        phi_outer: max_of(&mut sweep(2.0, 4.0).map(|r| family.phi(r).abs())),
        phi_normal_derivative: family.phi_jet(1.0).d1.abs() + family.phi_jet(2.0).d1.abs(),
        phi_range: max_of(&mut sweep(0.0, 4.0).map(|r| {
            let v = family.phi(r);
            (-v).max(v - 1.0).max(0.0)
        })),
        f_plateau: max_of(&mut sweep(0.5, 2.0 / 3.0).map(|t| (time_cutoff(t).v - 1.0).abs())),
        f_support: max_of(&mut sweep(0.0, 0.25).chain(sweep(0.75, 2.0)).map(|t| time_cutoff(t).v.abs())),
        g_plateau: max_of(&mut sweep(0.0, 1.0).map(|t| (radial_cutoff(t).v - 1.0).abs())),
        g_support: max_of(&mut sweep(2.0, 4.0).map(|t| radial_cutoff(t).v.abs())),
    }
}
