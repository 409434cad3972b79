//! Riesz and Bessel kernels.
//!
//! The Riesz kernel of order `alpha` in `R^n` is `|x|^(alpha - n)`, without the
//! customary normalizing constant. The Bessel kernel `g_alpha` is the function
//! whose Fourier transform (convention `∫ f(x) e^{-i<x,ξ>} dx`) is
//! `(1 + |ξ|^2)^(-alpha/2)`. It is evaluated from the heat-kernel subordination
//!
//! ```text
//! g_alpha(r) = (4π)^(-n/2) / Γ(alpha/2) · ∫_0^∞ t^((alpha-n)/2 - 1) exp(-t - r²/(4t)) dt
//! ```
//!
//! by adaptive quadrature on a logarithmic axis.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{check_dim, Error, Result};
use crate::numeric::norm;
use crate::quadrature::{integrate_log_axis, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Riesz,
    Bessel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub alpha: f64,
    pub n: usize,
}

impl KernelSpec {
    pub fn riesz(alpha: f64, n: usize) -> Result<Self> {
        check_riesz_order(alpha, n)?;
        Ok(KernelSpec {
            family: KernelFamily::Riesz,
            alpha,
            n,
        })
    }

    pub fn bessel(alpha: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("ambient dimension must be at least 1"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::input(format!("Bessel order must be positive, got {alpha}")));
        }
        Ok(KernelSpec {
            family: KernelFamily::Bessel,
            alpha,
            n,
        })
    }

    /// Evaluate the kernel of this spec at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self.family {
            KernelFamily::Riesz => riesz_kernel(self, x),
            KernelFamily::Bessel => bessel_kernel(self, x),
        }
    }
}

pub(crate) fn check_riesz_order(alpha: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::input("ambient dimension must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < n as f64) {
        return Err(Error::input(format!(
            "Riesz order must satisfy 0 < alpha < n = {n}, got {alpha}"
        )));
    }
    Ok(())
}

/// `r^(alpha - n)` with `+inf` at `r = 0`.
#[inline]
pub fn riesz_radial(alpha: f64, n: usize, r: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        r.powf(alpha - n as f64)
    }
}

pub fn riesz_kernel(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if spec.family != KernelFamily::Riesz {
        return Err(Error::input("riesz_kernel called with a Bessel spec"));
    }
    check_dim(spec.n, x.len())?;
    Ok(riesz_radial(spec.alpha, spec.n, norm(x)))
}

pub fn bessel_kernel(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if spec.family != KernelFamily::Bessel {
        return Err(Error::input("bessel_kernel called with a Riesz spec"));
    }
    check_dim(spec.n, x.len())?;
    Ok(bessel_radial(spec.alpha, spec.n, norm(x)))
}

/// Bessel kernel as a function of the radius. Returns `+inf` at `r = 0` when
/// `alpha <= n` (the singular case).
pub fn bessel_radial(alpha: f64, n: usize, r: f64) -> f64 {
    let nf = n as f64;
    let nu = 0.5 * (alpha - nf);
    if r == 0.0 && nu <= 0.0 {
        return f64::INFINITY;
    }
    let log_integrand = |t: f64| {
        let rt = if r == 0.0 { 0.0 } else { r * r / (4.0 * t) };
        (nu - 1.0) * t.ln() - t - rt
    };
    // Below e^{u_lo} the integrand is killed by exp(-r²/4t) (or by t^nu when
    // r = 0); above e^{u_hi} by exp(-t).
    let u_lo = if r > 0.0 {
        (r * r / 3200.0).ln()
    } else {
        -(700.0 / nu).min(700.0)
    };
    let u_hi = (r + 800.0 + 10.0 * nu.abs()).ln();
    // Rescale by the peak to keep the quadrature in a comfortable range.
    let peak_t = {
        // maximizer of (nu-1) ln t - t - r²/4t
        let b = nu - 1.0;
        let disc = b * b + r * r;
        ((b + disc.sqrt()) / 2.0).max(1e-300)
    };
    let shift = log_integrand(peak_t);
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-10,
        max_evals: 200_000,
    };
    let res = integrate_log_axis(|t| (log_integrand(t) - shift).exp(), u_lo, u_hi, &opts);
    let prefactor = (4.0 * std::f64::consts::PI).powf(-nf / 2.0) / gamma(alpha / 2.0);
    prefactor * res.value * shift.exp()
}

/// Empirical comparison constant `max_r k_alpha(r) / g_alpha(r)` over the sample
/// radii in `(0, radius)`. An estimate on the grid, not a proven bound.
pub fn kernel_comparison_constant(alpha: f64, n: usize, radius: f64, grid: &[f64]) -> Result<f64> {
    check_riesz_order(alpha, n)?;
    if !(radius > 0.0) {
        return Err(Error::input("comparison radius must be positive"));
    }
    if grid.is_empty() {
        return Err(Error::input("comparison grid is empty"));
    }
    let mut best = f64::NEG_INFINITY;
    for &r in grid {
        if !(r > 0.0 && r < radius) {
            return Err(Error::input(format!("grid radius {r} outside (0, {radius})")));
        }
        let ratio = riesz_radial(alpha, n, r) / bessel_radial(alpha, n, r);
        best = best.max(ratio);
    }
    Ok(best)
}

/// Dyadic radii `R 2^{-j}`, `j = 1..=levels`.
pub fn dyadic_grid(radius: f64, levels: usize) -> Vec<f64> {
    (1..=levels).map(|j| radius * 0.5f64.powi(j as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn riesz_examples() {
        let s = KernelSpec::riesz(1.0, 2).unwrap();
        assert_eq!(riesz_kernel(&s, &[1.0, 0.0]).unwrap(), 1.0);
        let s = KernelSpec::riesz(2.0, 3).unwrap();
        assert!((riesz_kernel(&s, &[2.0, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let s = KernelSpec::riesz(1.5, 2).unwrap();
        assert!((riesz_kernel(&s, &[0.5, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(riesz_kernel(&s, &[0.0, 0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn riesz_rejects_bad_order_and_dimension() {
        assert!(KernelSpec::riesz(2.0, 2).is_err());
        assert!(KernelSpec::riesz(0.0, 2).is_err());
        assert!(KernelSpec::riesz(0.5, 0).is_err());
        let s = KernelSpec::riesz(1.0, 2).unwrap();
        assert!(matches!(
            riesz_kernel(&s, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bessel_closed_forms() {
        // alpha = 2: n = 1 gives e^{-r}/2, n = 3 gives e^{-r}/(4 pi r).
        let s1 = KernelSpec::bessel(2.0, 1).unwrap();
        let s3 = KernelSpec::bessel(2.0, 3).unwrap();
        for &r in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let g1 = bessel_kernel(&s1, &[r]).unwrap();
            assert!((g1 / ((-r).exp() / 2.0) - 1.0).abs() < 1e-8, "r={r} g1={g1}");
            let g3 = bessel_kernel(&s3, &[r, 0.0, 0.0]).unwrap();
            let exact = (-r).exp() / (4.0 * PI * r);
            assert!((g3 / exact - 1.0).abs() < 1e-8, "r={r}");
        }
        assert!((bessel_kernel(&s1, &[1.0]).unwrap() - 0.18394).abs() < 1e-5);
        assert!((bessel_kernel(&s3, &[1.0, 0.0, 0.0]).unwrap() - 0.02928).abs() < 1e-5);
    }

    #[test]
    fn bessel_singular_at_origin() {
        let s = KernelSpec::bessel(1.0, 2).unwrap();
        assert_eq!(bessel_kernel(&s, &[0.0, 0.0]).unwrap(), f64::INFINITY);
        // alpha > n: finite at the origin
        let s = KernelSpec::bessel(3.0, 1).unwrap();
        let g0 = bessel_kernel(&s, &[0.0]).unwrap();
        assert!(g0.is_finite() && g0 > 0.0);
    }

    #[test]
    fn bessel_monotone() {
        for &(a, n) in &[(0.5, 1), (1.5, 2), (2.0, 3), (4.0, 2)] {
            let g1 = bessel_radial(a, n, 1.0);
            let g2 = bessel_radial(a, n, 2.0);
            assert!(g1 > g2, "alpha={a} n={n}");
        }
    }

    #[test]
    fn comparison_constant_3d() {
        // k/g = 4 pi e^r for alpha = 2, n = 3.
        let grid = dyadic_grid(1.0, 10);
        let c = kernel_comparison_constant(2.0, 3, 1.0, &grid).unwrap();
        let dense_max = grid
            .iter()
            .map(|r| 4.0 * PI * r.exp())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((c / dense_max - 1.0).abs() < 1e-7);
        for &r in &grid {
            let ratio = riesz_radial(2.0, 3, r) / bessel_radial(2.0, 3, r);
            assert!(ratio.is_finite() && ratio > 0.0 && ratio <= c);
        }
        assert!(kernel_comparison_constant(2.0, 3, 1.0, &[]).is_err());
    }
}
