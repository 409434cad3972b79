//! Explicit constants and integral conditions for the Gaussian feasibility bounds.
//!
//! Every constant is returned as a [`ConstantReport`]. The value is `+∞` with a
//! named violated condition when the admissibility test fails. Where a closed
//! form exists it is returned, and `error_estimate` holds its relative
//! discrepancy from an independent quadrature or Monte-Carlo evaluation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fields::{CovKind, CovModel};
use crate::kernels::check_riesz_order;
use crate::numeric::{double_factorial, unit_ball_volume, unit_sphere_area};
use crate::quadrature::{integrate, integrate_log_axis, integrate_with_breaks, QuadOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub name: String,
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    /// `closed form`, `quadrature` or `Monte-Carlo`.
    pub method: String,
    pub error_estimate: f64,
    /// Admissibility condition that failed, when `value` is `+∞`.
    pub violated: Option<String>,
}

impl ConstantReport {
    fn new(name: &str, inputs: &[(&str, f64)], method: &str) -> Self {
        ConstantReport {
            name: name.into(),
            value: f64::NAN,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            method: method.into(),
            error_estimate: 0.0,
            violated: None,
        }
    }

    fn infinite(mut self, why: impl Into<String>) -> Self {
        self.value = f64::INFINITY;
        self.violated = Some(why.into());
        self.error_estimate = 0.0;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Open interval `(lo, hi)`; empty when `hi <= lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("Hurst index must lie in (0,1), got {h}")))
    }
}

/// `ε` with `0 < ε < 2α` and `H (2(n-α) + ε) < k`.
pub fn epsilon_range(n: usize, alpha: f64, hurst: f64, k: usize) -> Result<Interval> {
    check_riesz_order(alpha, n)?;
    check_hurst(hurst)?;
    let gap = k as f64 / hurst - 2.0 * (n as f64 - alpha);
    Ok(Interval {
        lo: 0.0,
        hi: gap.min(2.0 * alpha),
    })
}

/// `∫_{[0,1]^k} ∫_{[0,1]^k} |t-s|^{-a} ds dt`, `+∞` when `a >= k`.
///
/// Closed form for `k = 1`. For `k >= 2` the integral is rewritten through the
/// density `Π(1-|d_i|)` of `t - s` and spherical coordinates in the positive
/// orthant, where the radial integral is exact; the angular integral is a
/// 1-D adaptive quadrature for `k = 2` and seeded Monte-Carlo otherwise.
pub fn grid_integral(k: usize, a: f64) -> f64 {
    if k == 0 || a >= k as f64 {
        return f64::INFINITY;
    }
    match k {
        1 => 2.0 / ((1.0 - a) * (2.0 - a)),
        2 => {
            let opts = QuadOptions {
                rel_tol: 1e-10,
                ..QuadOptions::default()
            };
            let q = integrate_with_breaks(
                |th| orthant_radial(&[th.cos(), th.sin()], a),
                &[0.0, PI / 4.0, PI / 2.0],
                &opts,
            );
            4.0 * q.value
        }
        _ => grid_integral_mc(k, a, 1 << 20, 0x5eed).0,
    }
}

/// Orthant-sphere Monte-Carlo estimate of [`grid_integral`] with its standard error.
pub fn grid_integral_mc(k: usize, a: f64, samples: usize, seed: u64) -> (f64, f64) {
    if k == 0 || a >= k as f64 {
        return (f64::INFINITY, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; k];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        for v in theta.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z.abs();
        }
        let r = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        theta.iter_mut().for_each(|v| *v /= r);
        let h = orthant_radial(&theta, a);
        s1 += h;
        s2 += h * h;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    // The orthant has area |S^{k-1}| / 2^k and the difference density carries 2^k.
    let scale = unit_sphere_area(k);
    (scale * mean, scale * (var / n).sqrt())
}

/// `∫_0^{R(θ)} Π(1 - r θ_i) r^{k-1-a} dr` with `R(θ) = 1 / max θ_i`.
fn orthant_radial(theta: &[f64], a: f64) -> f64 {
    let k = theta.len();
    let big_r = 1.0 / theta.iter().copied().fold(0.0, f64::max);
    // Elementary symmetric polynomials e_0..e_k of θ.
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &t in theta {
        for j in (1..=k).rev() {
            e[j] += t * e[j - 1];
        }
    }
    let mut sum = 0.0;
    for (j, ej) in e.iter().enumerate() {
        let p = k as f64 - a + j as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * ej * big_r.powf(p) / p;
    }
    sum
}

/// `∫_{R^n} exp(-|η|²/2) |η|^p dη`, `+∞` when `p <= -n`.
pub fn gaussian_moment(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    if p <= -nf {
        return f64::INFINITY;
    }
    let half = 0.5 * (p + nf);
    unit_sphere_area(n) * 2f64.powf(half - 1.0) * gamma(half)
}

/// Radial quadrature of [`gaussian_moment`].
pub fn gaussian_moment_quadrature(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    if p <= -nf {
        return f64::INFINITY;
    }
    let q = integrate_log_axis(
        |r| r.powf(p + nf - 1.0) * (-0.5 * r * r).exp(),
        -60.0,
        4.0,
        &QuadOptions::tight(),
    );
    unit_sphere_area(n) * q.value
}

/// Nested adaptive quadrature of the `k = 1` grid integral, used as an oracle.
fn grid_integral_nested(a: f64) -> f64 {
    let opts = QuadOptions {
        rel_tol: 1e-9,
        ..QuadOptions::default()
    };
    // ∫_0^L x^{-a} dx with x = u^{1/(1-a)}, which makes the integrand constant
    // in u; the inner integrals are still evaluated numerically.
    let q = 1.0 / (1.0 - a);
    let side = |len: f64| {
        if len <= 0.0 {
            return 0.0;
        }
        integrate(
            |u: f64| {
                let x = u.powf(q);
                if x == 0.0 {
                    q
                } else {
                    x.powf(-a) * q * u.powf(q - 1.0)
                }
            },
            0.0,
            len.powf(1.0 - a),
            &opts,
        )
        .value
    };
    integrate(|s| side(s) + side(1.0 - s), 0.0, 1.0, &opts).value
}

fn rel_diff(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `C(n,H,α,ε) = grid_integral(k, (2n+ε-2α)H) · gaussian_moment(n, n+ε-2α)`.
pub fn berman_c(n: usize, hurst: f64, alpha: f64, eps: f64, k: usize) -> Result<ConstantReport> {
    let range = epsilon_range(n, alpha, hurst, k)?;
    let nf = n as f64;
    let method = match k {
        1 => "closed form",
        2 => "quadrature",
        _ => "Monte-Carlo",
    };
    let rep = ConstantReport::new(
        "berman_C",
        &[("n", nf), ("H", hurst), ("alpha", alpha), ("eps", eps), ("k", k as f64)],
        method,
    );
    if !range.contains(eps) {
        return Ok(rep.infinite(format!(
            "ε must satisfy 0 < ε < 2α and H(2(n-α)+ε) < k, i.e. ε ∈ ({}, {})",
            range.lo, range.hi
        )));
    }
    let a = (2.0 * nf + eps - 2.0 * alpha) * hurst;
    let p = nf + eps - 2.0 * alpha;
    let g = grid_integral(k, a);
    let m = gaussian_moment(n, p);
    let oracle_g = match k {
        1 => grid_integral_nested(a),
        _ => grid_integral_mc(k, a, 1 << 18, 7).0,
    };
    let oracle = oracle_g * gaussian_moment_quadrature(n, p);
    let mut rep = rep;
    rep.value = g * m;
    rep.error_estimate = rel_diff(rep.value, oracle);
    Ok(rep)
}

/// `M₀ = (1/2π)(1/(n-α) + √C/√ε)`.
pub fn m0_bound(n: usize, alpha: f64, hurst: f64, eps: f64, k: usize) -> Result<ConstantReport> {
    let c = berman_c(n, hurst, alpha, eps, k)?;
    let mut rep = ConstantReport {
        name: "m0_bound".into(),
        ..c.clone()
    };
    if !c.is_finite() {
        return Ok(rep);
    }
    rep.value = (1.0 / (n as f64 - alpha) + c.value.sqrt() / eps.sqrt()) / (2.0 * PI);
    // Propagate the relative error of C through the square root.
    rep.error_estimate = 0.5 * c.error_estimate;
    Ok(rep)
}

fn check_ell(hurst: f64, k: usize, ell: usize) -> Result<()> {
    if !ell.is_multiple_of(2) || ell as f64 <= 2.0 * k as f64 / hurst {
        return Err(Error::input(format!(
            "ℓ must be an even integer with ℓ > 2k/H = {}, got {ell}",
            2.0 * k as f64 / hurst
        )));
    }
    Ok(())
}

/// `M₁ = M₀ + n^{ℓ/2} (ℓ-1)!! (k^{ℓH/2} + 1)`.
pub fn m1_bound(
    n: usize,
    alpha: f64,
    hurst: f64,
    eps: f64,
    k: usize,
    ell: usize,
) -> Result<ConstantReport> {
    check_ell(hurst, k, ell)?;
    let m0 = m0_bound(n, alpha, hurst, eps, k)?;
    let mut rep = ConstantReport {
        name: "m1_bound".into(),
        ..m0.clone()
    };
    rep.inputs.insert("ell".into(), ell as f64);
    if !m0.is_finite() {
        return Ok(rep);
    }
    let ellf = ell as f64;
    let extra = (n as f64).powf(0.5 * ellf)
        * double_factorial(ell as u32 - 1)
        * ((k as f64).powf(0.5 * ellf * hurst) + 1.0);
    rep.value = m0.value + extra;
    rep.error_estimate = m0.error_estimate * m0.value / rep.value;
    Ok(rep)
}

/// Sobolev-Hölder embedding constant: `[f]_{δ-k/ℓ,∞} ≤ c_embed · [f]_{δ,ℓ}` on `[0,1]^k`.
///
/// From the Garsia-Rodemich-Rumsey inequality with `Ψ(u) = u^ℓ` and
/// `p(u) = u^{δ+k/ℓ}` after rescaling distances by the cube diameter `√k`:
/// `c = 8 (4^{k+1}/λ_k)^{1/ℓ} k^{(δ+k/ℓ)/2} (δ+k/ℓ)/(δ-k/ℓ)` with
/// `λ_k = 4 ω_k / 2^k`, which for `k = 1` is the classical one-parameter constant.
pub fn c_embed(k: usize, delta: f64, ell: f64) -> Result<f64> {
    let kf = k as f64;
    if !(delta < 1.0 && delta > kf / ell) {
        return Err(Error::input(format!(
            "embedding needs k/ℓ < δ < 1, got δ = {delta}, k/ℓ = {}",
            kf / ell
        )));
    }
    let lambda = 4.0 * unit_ball_volume(k) / 2f64.powi(k as i32);
    let mu = delta + kf / ell;
    Ok(8.0 * (4f64.powf(kf + 1.0) / lambda).powf(1.0 / ell) * kf.powf(0.5 * mu) * mu / (delta - kf / ell))
}

/// `ρ₁ = c_embed(k, H-k/ℓ, ℓ) M^{1/ℓ}`, times `k^{(H-γ)/2-k/ℓ}` for a target
/// exponent `γ < H - 2k/ℓ`.
#[allow(clippy::too_many_arguments)]
pub fn rho1_bound(
    n: usize,
    alpha: f64,
    hurst: f64,
    eps: f64,
    k: usize,
    ell: usize,
    big_m: f64,
    target_gamma: Option<f64>,
) -> Result<ConstantReport> {
    let m1 = m1_bound(n, alpha, hurst, eps, k, ell)?;
    let mut rep = ConstantReport {
        name: "rho1_bound".into(),
        ..m1.clone()
    };
    rep.method = "closed form".into();
    rep.inputs.insert("M".into(), big_m);
    if !m1.is_finite() {
        return Ok(rep);
    }
    if !(big_m > m1.value) {
        return Err(Error::input(format!(
            "M must exceed M₁ = {}, got {big_m}",
            m1.value
        )));
    }
    let kf = k as f64;
    let ellf = ell as f64;
    let mut value = c_embed(k, hurst - kf / ellf, ellf)? * big_m.powf(1.0 / ellf);
    if let Some(g) = target_gamma {
        let top = hurst - 2.0 * kf / ellf;
        if !(g > 0.0 && g <= top) {
            return Err(Error::input(format!(
                "target exponent must lie in (0, H-2k/ℓ] = (0, {top}], got {g}"
            )));
        }
        rep.inputs.insert("gamma".into(), g);
        value *= kf.powf(0.5 * (hurst - g) - kf / ellf);
    }
    rep.value = value;
    rep.error_estimate = 0.0;
    Ok(rep)
}

/// Exponents of the bridge bound: `(aH, e, c)` with `a = 2n+ε-2α`,
/// `e = 2-2H` for `H ≥ ½` (else `2H`) and `c = n+ε/2-α`.
fn bridge_exponents(n: usize, alpha: f64, hurst: f64, eps: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let a = 2.0 * nf + eps - 2.0 * alpha;
    let e = if hurst >= 0.5 { 2.0 - 2.0 * hurst } else { 2.0 * hurst };
    (a * hurst, e, nf + 0.5 * eps - alpha)
}

fn bridge_integrand(d: f64, ah: f64, e: f64, c: f64) -> f64 {
    2.0 * (1.0 - d) * d.powf(-ah) * (1.0 - d.powf(e)).powf(-c)
}

fn check_bridge(n: usize, alpha: f64, hurst: f64, eps: f64) -> Result<Option<String>> {
    check_riesz_order(alpha, n)?;
    check_hurst(hurst)?;
    let hv = hurst.max(1.0 - hurst);
    let nf = n as f64;
    if !(alpha > nf - 1.0 / (2.0 * hv)) {
        return Err(Error::input(format!(
            "bridge constant needs n - 1/(2(H∨(1-H))) < α < n, i.e. α > {}",
            nf - 1.0 / (2.0 * hv)
        )));
    }
    let range = epsilon_range(n, alpha, hv, 1)?;
    if !range.contains(eps) {
        return Ok(Some(format!(
            "ε must satisfy 0 < ε < 2α and (H∨(1-H))(2(n-α)+ε) < 1, i.e. ε ∈ ({}, {})",
            range.lo, range.hi
        )));
    }
    let (ah, _, c) = bridge_exponents(n, alpha, hurst, eps);
    if ah >= 1.0 || c >= 2.0 {
        return Ok(Some("bridge bound integrand is not integrable".into()));
    }
    Ok(None)
}

/// Upper bound for the bridge constant `C′(n,H,α,ε)`:
/// `∫∫ (t-s)^{-aH} (1-(t-s)^e)^{-c} ds dt · gaussian_moment(n, n+ε-2α)`,
/// reduced to `2∫_0^1 (1-d) d^{-aH} (1-d^e)^{-c} dd` in the difference `d`.
pub fn bridge_c_prime(n: usize, alpha: f64, hurst: f64, eps: f64) -> Result<ConstantReport> {
    let rep = ConstantReport::new(
        "bridge_C_prime",
        &[("n", n as f64), ("alpha", alpha), ("H", hurst), ("eps", eps)],
        "quadrature",
    );
    if let Some(why) = check_bridge(n, alpha, hurst, eps)? {
        return Ok(rep.infinite(why));
    }
    let (ah, e, c) = bridge_exponents(n, alpha, hurst, eps);
    let moment = gaussian_moment(n, n as f64 + eps - 2.0 * alpha);
    let value = bridge_d_integral(ah, e, c) * moment;
    let mut rep = rep;
    rep.value = value;
    if e == 1.0 {
        let closed = 2.0 * beta(1.0 - ah, 2.0 - c) * moment;
        rep.error_estimate = rel_diff(value, closed);
    } else {
        let (mc, se) = bridge_d_integral_mc(ah, e, c, 1 << 18, 11);
        rep.error_estimate = rel_diff(value, mc * moment).max(se / mc);
    }
    Ok(rep)
}

/// Quadrature of the reduced bridge integral with the endpoint substitutions
/// `d = u^{1/(1-aH)}` near 0 and `1-d = v^{1/(2-c)}` near 1.
fn bridge_d_integral(ah: f64, e: f64, c: f64) -> f64 {
    let opts = QuadOptions {
        rel_tol: 1e-10,
        ..QuadOptions::default()
    };
    let p0 = 1.0 / (1.0 - ah);
    let lo = integrate(
        |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let d = u.powf(p0);
            // dd = p0 u^{p0-1} du and d^{-aH} = u^{-aH p0}; their product is p0.
            2.0 * (1.0 - d) * (1.0 - d.powf(e)).powf(-c) * p0
        },
        0.0,
        0.5f64.powf(1.0 - ah),
        &opts,
    );
    let p1 = 1.0 / (2.0 - c);
    let hi = integrate(
        |v: f64| {
            if v == 0.0 {
                return 0.0;
            }
            let w = v.powf(p1);
            let d = 1.0 - w;
            bridge_integrand(d, ah, e, c) * p1 * v.powf(p1 - 1.0)
        },
        0.0,
        0.5f64.powf(2.0 - c),
        &opts,
    );
    lo.value + hi.value
}

/// Importance-sampled Monte-Carlo for the reduced bridge integral, split at
/// `d = ½` with power-law proposals matching both endpoint singularities.
/// Returns the estimate and its standard error.
pub fn bridge_d_integral_mc(ah: f64, e: f64, c: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b0, b1) = (1.0 - ah, 2.0 - c);
    let mut total = 0.0;
    let mut var = 0.0;
    for half in 0..2 {
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let (val, dens) = if half == 0 {
                // density b0 d^{b0-1} / (½)^{b0} on (0, ½)
                let d = 0.5 * u.powf(1.0 / b0);
                (bridge_integrand(d, ah, e, c), b0 * d.powf(b0 - 1.0) / 0.5f64.powf(b0))
            } else {
                let w = 0.5 * u.powf(1.0 / b1);
                (bridge_integrand(1.0 - w, ah, e, c), b1 * w.powf(b1 - 1.0) / 0.5f64.powf(b1))
            };
            let r = val / dens;
            s1 += r;
            s2 += r * r;
        }
        let n = samples as f64;
        let mean = s1 / n;
        total += mean;
        var += (s2 / n - mean * mean).max(0.0) / n;
    }
    (total, var.sqrt())
}

/// Monte-Carlo evaluation of [`bridge_c_prime`] for cross-checking.
pub fn bridge_c_prime_mc(n: usize, alpha: f64, hurst: f64, eps: f64, samples: usize, seed: u64) -> Result<f64> {
    if check_bridge(n, alpha, hurst, eps)?.is_some() {
        return Ok(f64::INFINITY);
    }
    let (ah, e, c) = bridge_exponents(n, alpha, hurst, eps);
    let (v, _) = bridge_d_integral_mc(ah, e, c, samples, seed);
    Ok(v * gaussian_moment(n, n as f64 + eps - 2.0 * alpha))
}

/// Pitt's covariance condition
/// `sup_s ∫_{[0,1]^k} |det σ²(s,t)|^{-((n-α)/(2n)+δ)} dt`.
///
/// For the fBf model `det σ² = |t-s|^{2Hn}`, so the condition is finite iff
/// `H(n-α) + 2Hnδ < k`; the same exponent test is applied to the bridge,
/// whose increment variance also vanishes like `|t-s|^{2H}` on the diagonal.
/// The supremum is taken over a grid of base points `s`.
pub fn pitt_condition(cov: &CovModel, n: usize, alpha: f64, delta: f64, k: usize) -> Result<ConstantReport> {
    check_riesz_order(alpha, n)?;
    if !(delta > 0.0) {
        return Err(Error::input("δ must be positive"));
    }
    if cov.kind == CovKind::Bridge && k != 1 {
        return Err(Error::input("bridge model is a curve (k = 1)"));
    }
    let nf = n as f64;
    let h = cov.hurst;
    let exponent = (nf - alpha) / (2.0 * nf) + delta;
    let c = 2.0 * h * nf * exponent;
    let method = if k <= 2 { "quadrature" } else { "Monte-Carlo" };
    let mut rep = ConstantReport::new(
        "pitt_condition",
        &[("n", nf), ("alpha", alpha), ("delta", delta), ("k", k as f64), ("H", h)],
        method,
    );
    if c >= k as f64 {
        return Ok(rep.infinite(format!(
            "needs H(n-α) + 2Hnδ < k, got {c} >= {k}"
        )));
    }
    let opts = QuadOptions {
        rel_tol: 1e-8,
        ..QuadOptions::default()
    };
    let value = match (cov.kind, k) {
        (CovKind::Bridge, _) => {
            let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
            grid.iter()
                .map(|&s| {
                    let mut br = vec![0.0, s, 1.0];
                    br.dedup();
                    integrate_with_breaks(
                        |t| {
                            let v = cov.det_increment(&[s], &[t], n);
                            if v <= 0.0 { 0.0 } else { v.powf(-exponent) }
                        },
                        &br,
                        &opts,
                    )
                    .value
                })
                .fold(0.0, f64::max)
        }
        (CovKind::Fbf, 1) => {
            let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
            let vals: Vec<f64> = grid
                .iter()
                .map(|&s| {
                    let mut br = vec![0.0, s, 1.0];
                    br.dedup();
                    integrate_with_breaks(
                        |t| {
                            let v = cov.det_increment(&[s], &[t], n);
                            if v <= 0.0 { 0.0 } else { v.powf(-exponent) }
                        },
                        &br,
                        &opts,
                    )
                    .value
                })
                .collect();
            let closed = 2.0 * 0.5f64.powf(1.0 - c) / (1.0 - c);
            let best = vals.iter().copied().fold(0.0, f64::max);
            rep.error_estimate = rel_diff(best, closed);
            best
        }
        (CovKind::Fbf, _) => {
            let pts = 5usize;
            let mut best: f64 = 0.0;
            let total = pts.pow(k as u32);
            for idx in 0..total {
                let mut rem = idx;
                let s: Vec<f64> = (0..k)
                    .map(|_| {
                        let i = rem % pts;
                        rem /= pts;
                        (i as f64 + 0.5) / pts as f64
                    })
                    .collect();
                best = best.max(cube_radial_integral(&s, c));
            }
            best
        }
    };
    rep.value = value;
    Ok(rep)
}

/// `∫_{[0,1]^k} |t-s|^{-c} dt` in polar coordinates around `s`:
/// `∫_{S^{k-1}} R(θ)^{k-c}/(k-c) dθ`, with `R(θ)` the exit distance from the cube.
fn cube_radial_integral(s: &[f64], c: f64) -> f64 {
    let k = s.len();
    let p = k as f64 - c;
    let exit = |th: &[f64]| -> f64 {
        th.iter()
            .zip(s)
            .map(|(&d, &x)| {
                if d > 0.0 {
                    (1.0 - x) / d
                } else if d < 0.0 {
                    -x / d
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    };
    if k == 2 {
        // Breaks at the corner directions, where R(θ) has kinks.
        let mut br: Vec<f64> = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .iter()
            .map(|&(cx, cy): &(f64, f64)| {
                let a = (0.5 * (cy + 1.0) - s[1]).atan2(0.5 * (cx + 1.0) - s[0]);
                if a < 0.0 { a + 2.0 * PI } else { a }
            })
            .collect();
        br.push(0.0);
        br.push(2.0 * PI);
        br.sort_by(f64::total_cmp);
        let opts = QuadOptions {
            rel_tol: 1e-9,
            ..QuadOptions::default()
        };
        return integrate_with_breaks(|t| exit(&[t.cos(), t.sin()]).powf(p) / p, &br, &opts).value;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0be);
    let samples = 1 << 16;
    let mut th = vec![0.0; k];
    let mut acc = 0.0;
    for _ in 0..samples {
        for v in th.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let r = th.iter().map(|v| v * v).sum::<f64>().sqrt();
        th.iter_mut().for_each(|v| *v /= r);
        acc += exit(&th).powf(p) / p;
    }
    unit_sphere_area(k) * acc / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn epsilon_examples() {
        let r = epsilon_range(2, 1.5, 0.5, 1).unwrap();
        assert_relative_eq!(r.hi, 1.0);
        assert!(epsilon_range(3, 1.0, 0.5, 1).unwrap().is_empty());
        let r = epsilon_range(2, 1.2, 0.3, 2).unwrap();
        for i in 1..20 {
            let e = r.hi * i as f64 / 20.0;
            assert!((4.0 + e - 2.4) * 0.3 < 2.0);
        }
    }

    #[test]
    fn grid_integral_closed_and_oracles() {
        assert_relative_eq!(grid_integral(1, 0.5), 8.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(grid_integral(1, 1e-12), 1.0, max_relative = 1e-9);
        assert_relative_eq!(grid_integral_nested(0.5), 8.0 / 3.0, max_relative = 1e-6);
        assert_relative_eq!(grid_integral(2, 0.0), 1.0, max_relative = 1e-9);
        assert_relative_eq!(grid_integral(3, 0.0), 1.0, max_relative = 1e-2);
        let q = grid_integral(2, 1.0);
        let (mc, se) = grid_integral_mc(2, 1.0, 1 << 20, 3);
        assert!(q.is_finite() && q > 0.0);
        assert!((mc / q - 1.0).abs() < 0.005 && se / mc < 0.002, "{q} {mc} {se}");
        assert!(grid_integral(1, 1.0).is_infinite());
        assert!(grid_integral(2, 2.0).is_infinite());
    }

    #[test]
    fn grid_integral_raw_monte_carlo() {
        // Plain uniform sampling of (s,t) for a mild exponent.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let d0 = rng.random::<f64>() - rng.random::<f64>();
            let d1 = rng.random::<f64>() - rng.random::<f64>();
            acc += (d0 * d0 + d1 * d1).powf(-0.25);
        }
        assert_relative_eq!(acc / n as f64, grid_integral(2, 0.5), max_relative = 5e-3);
    }

    #[test]
    fn gaussian_moment_examples() {
        assert_relative_eq!(gaussian_moment(1, 0.0), (2.0 * PI).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(gaussian_moment(3, 0.0), (2.0 * PI).powf(1.5), max_relative = 1e-12);
        let v = gaussian_moment(2, -0.5);
        assert_relative_eq!(v, 2.0 * PI * 2f64.powf(-0.25) * gamma(0.75), max_relative = 1e-12);
        assert_relative_eq!(v, 6.4745, max_relative = 1e-4);
        assert_relative_eq!(gaussian_moment_quadrature(2, -0.5), v, max_relative = 1e-8);
        assert!(gaussian_moment(2, -2.0).is_infinite());
    }

    #[test]
    fn berman_family() {
        let c = berman_c(2, 0.5, 1.5, 0.5, 1).unwrap();
        assert_relative_eq!(c.value, 6.4 * gaussian_moment(2, -0.5), max_relative = 1e-12);
        assert!(c.error_estimate < 1e-5);
        let boundary = berman_c(2, 0.5, 1.5, 1.0, 1).unwrap();
        assert!(boundary.value.is_infinite() && boundary.violated.is_some());
        let m0 = m0_bound(2, 1.5, 0.5, 0.5, 1).unwrap();
        assert_relative_eq!(m0.value, (2.0 + (c.value / 0.5).sqrt()) / (2.0 * PI), max_relative = 1e-12);
        assert!(m0_bound(2, 1.6, 0.5, 0.5, 1).unwrap().is_finite());
        let m1 = m1_bound(2, 1.5, 0.5, 0.5, 1, 8).unwrap();
        assert_relative_eq!(m1.value - m0.value, 16.0 * 105.0 * 2.0, max_relative = 1e-12);
        assert!(m1_bound(2, 1.5, 0.5, 0.5, 1, 4).is_err());
        assert!(m1_bound(2, 1.5, 0.5, 0.5, 1, 9).is_err());
    }

    #[test]
    fn berman_k2_is_finite() {
        let c = berman_c(2, 0.4, 1.5, 0.5, 2).unwrap();
        assert!(c.is_finite() && c.value > 0.0 && c.error_estimate < 0.01, "{c:?}");
    }

    #[test]
    fn rho1_scaling() {
        let m1 = m1_bound(2, 1.5, 0.5, 0.5, 1, 8).unwrap().value;
        let a = rho1_bound(2, 1.5, 0.5, 0.5, 1, 8, 2.0 * m1, None).unwrap();
        let b = rho1_bound(2, 1.5, 0.5, 0.5, 1, 8, 4.0 * m1, None).unwrap();
        assert_relative_eq!(b.value / a.value, 2f64.powf(0.125), max_relative = 1e-12);
        let g = rho1_bound(2, 1.5, 0.5, 0.5, 1, 8, 2.0 * m1, Some(0.25)).unwrap();
        assert_relative_eq!(g.value, a.value, max_relative = 1e-12);
        assert!(rho1_bound(2, 1.5, 0.5, 0.5, 1, 8, m1, None).is_err());
        assert!(rho1_bound(2, 1.5, 0.5, 0.5, 1, 8, 2.0 * m1, Some(0.3)).is_err());
    }

    #[test]
    fn c_embed_k1_value() {
        // 8 · 4^{1/8} · (0.5/0.25) at δ = 0.375, ℓ = 8.
        assert_relative_eq!(c_embed(1, 0.375, 8.0).unwrap(), 16.0 * 4f64.powf(0.125), max_relative = 1e-12);
        assert!(c_embed(1, 0.1, 8.0).is_err());
    }

    #[test]
    fn bridge_constant() {
        let q = bridge_c_prime(1, 0.5, 0.5, 0.25).unwrap();
        assert!(q.is_finite() && q.value > 0.0);
        assert!(q.error_estimate < 1e-6, "{q:?}");
        let mc = bridge_c_prime_mc(1, 0.5, 0.5, 0.25, 1 << 20, 5).unwrap();
        assert_relative_eq!(mc, q.value, max_relative = 0.01);
        // Branches coincide at H = ½.
        let (ah, _, c) = bridge_exponents(1, 0.5, 0.5, 0.25);
        let a = bridge_d_integral(ah, 2.0 - 2.0 * 0.5, c);
        let b = bridge_d_integral(ah, 2.0 * 0.5, c);
        assert_relative_eq!(a, b, max_relative = 1e-8);
        let h7 = bridge_c_prime(1, 0.6, 0.7, 0.1).unwrap();
        assert!(h7.is_finite() && h7.error_estimate < 0.01, "{h7:?}");
        let h3 = bridge_c_prime(1, 0.6, 0.3, 0.1).unwrap();
        assert!(h3.is_finite() && h3.error_estimate < 0.01, "{h3:?}");
        assert!(bridge_c_prime(2, 0.5, 0.5, 0.25).is_err());
    }

    #[test]
    fn pitt_examples() {
        let fbf = CovModel::fbf(0.5).unwrap();
        let r = pitt_condition(&fbf, 2, 1.5, 0.1, 1).unwrap();
        let closed = 2.0 * 0.5f64.powf(0.55) / 0.55;
        assert_relative_eq!(r.value, closed, max_relative = 5e-3);
        assert!(r.error_estimate < 5e-3);
        let bad = pitt_condition(&fbf, 2, 0.5, 0.4, 1).unwrap();
        assert!(bad.value.is_infinite() && bad.violated.is_some());
        let br = pitt_condition(&CovModel::bridge(0.5).unwrap(), 1, 0.5, 0.05, 1).unwrap();
        assert!(br.is_finite() && br.value > 0.0, "{br:?}");
    }

    #[test]
    fn pitt_k2_center_matches_grid_integral_density() {
        // At the centre of the square, ∫|t-s|^{-c} dt is the largest over base points.
        let fbf = CovModel::fbf(0.5).unwrap();
        let r = pitt_condition(&fbf, 2, 1.5, 0.1, 2).unwrap();
        let centre = cube_radial_integral(&[0.5, 0.5], 0.45);
        assert!(r.is_finite());
        assert_relative_eq!(r.value, centre, max_relative = 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            acc += ((x - 0.5).powi(2) + (y - 0.5).powi(2)).powf(-0.225);
        }
        assert_relative_eq!(acc / n as f64, centre, max_relative = 5e-3);
    }
}
