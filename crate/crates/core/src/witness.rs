//! Feasibility witnesses: the planar Koch-type curve with prescribed Hölder
//! exponent, the dimension condition for bi-Hölder embeddings, and rescaled
//! Gaussian initializers that sit strictly inside a Hölder ball.
//!
//! The Koch generator has four similarities of ratio `r = 4^{-γ}`: two base
//! segments on the real axis and two forming a symmetric bump. It is simple
//! only for `r < 1/2`, i.e. `γ > 1/2`; smaller exponents use the Gaussian
//! initializer instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{holder_ratio_range, holder_seminorm, PairPolicy};
use crate::error::{Error, Result};
use crate::field::{FieldMeta, SampledField};
use crate::fields::{make_bridge, FbfSampler, FieldSpec};
use crate::minimize::ProblemSpec;

pub const MAX_KOCH_LEVEL: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KochSpec {
    pub gamma: f64,
    pub level: usize,
    pub n: usize,
}

/// Vertices of the level-`level` polygon, parametrized by quaternary intervals.
pub fn koch_curve(spec: &KochSpec) -> Result<SampledField> {
    if !(spec.gamma > 0.5 && spec.gamma < 1.0) {
        return Err(Error::input(format!(
            "Koch witness needs γ in (1/2, 1), got {}; use the fBm initializer for smaller γ",
            spec.gamma
        )));
    }
    if spec.level > MAX_KOCH_LEVEL {
        return Err(Error::input(format!("level must be at most {MAX_KOCH_LEVEL}")));
    }
    if spec.n < 2 {
        return Err(Error::input("the Koch curve needs n >= 2"));
    }
    let r = 4f64.powf(-spec.gamma);
    let half_gap = 0.5 - r;
    let apex = (r * r - half_gap * half_gap).sqrt();
    let generator = [
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
        Complex64::new(0.5, apex),
        Complex64::new(1.0 - r, 0.0),
        Complex64::new(1.0, 0.0),
    ];
    let mut pts = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    for _ in 0..spec.level {
        let mut next = Vec::with_capacity(4 * (pts.len() - 1) + 1);
        for w in pts.windows(2) {
            let (a, d) = (w[0], w[1] - w[0]);
            for g in &generator[..4] {
                next.push(a + d * g);
            }
        }
        next.push(*pts.last().unwrap());
        pts = next;
    }
    let m = pts.len();
    let mut values = vec![0.0; m * spec.n];
    for (i, z) in pts.iter().enumerate() {
        values[i * spec.n] = z.re;
        values[i * spec.n + 1] = z.im;
    }
    values[0] = 0.0;
    values[1] = 0.0;
    Ok(SampledField::new(1, spec.n, m, values)?.with_meta(FieldMeta {
        hurst: None,
        seed: None,
        generator: "koch".into(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiHolder {
    pub lower: f64,
    pub upper: f64,
    pub ratio: f64,
}

/// Empirical bi-Hölder constants over all vertex pairs of a curve.
pub fn bi_holder_constants(curve: &SampledField, gamma: f64) -> Result<BiHolder> {
    let (lower, upper) = holder_ratio_range(curve, gamma)?;
    Ok(BiHolder {
        lower,
        upper,
        ratio: upper / lower,
    })
}

/// `k(⌊1/γ⌋ + 1) ≤ n < k/γ + α`. Out-of-range arguments give `false`.
pub fn assouad_condition(k: usize, gamma: f64, n: usize, alpha: f64) -> bool {
    if !(gamma > 0.0 && gamma < 1.0 && alpha > 0.0 && alpha < n as f64 && k > 0) {
        return false;
    }
    let lhs = k as f64 * ((1.0 / gamma).floor() + 1.0);
    let nf = n as f64;
    lhs <= nf && nf < k as f64 / gamma + alpha
}

/// Hurst index used by [`feasible_init`]: midway between `γ` and `k/(n-α) ∧ 1`.
pub fn witness_hurst(problem: &ProblemSpec) -> f64 {
    0.5 * (problem.gamma + problem.holder_ceiling())
}

/// Largest pair count scanned exhaustively for `k >= 2`.
const ALL_PAIRS_LIMIT: usize = 1 << 24;
const SAMPLED_PAIRS: usize = 1 << 16;

/// Discrete Hölder seminorm used to certify a witness: exhaustive when affordable,
/// otherwise a seeded pair sample inflated by 10%.
pub fn certified_seminorm(field: &SampledField, gamma: f64, seed: u64) -> Result<f64> {
    let len = field.len();
    if field.k == 1 || len * (len - 1) / 2 <= ALL_PAIRS_LIMIT {
        holder_seminorm(field, gamma, PairPolicy::AllPairs)
    } else {
        Ok(1.1 * holder_seminorm(field, gamma, PairPolicy::Sampled { count: SAMPLED_PAIRS, seed })?)
    }
}

/// A field strictly inside the discrete Hölder ball of `problem`: a fractional
/// Brownian sample with `γ < H < k/(n-α) ∧ 1`, divided by `1 + K` (`K` its
/// seminorm) and scaled by `ρ`. With an endpoint `p` the sample is first turned
/// into a bridge, scaled by `ρ - |p|`, and the drift `t p` is added.
pub fn feasible_init(problem: &ProblemSpec, seed: u64) -> Result<SampledField> {
    problem.validate()?;
    let hurst = witness_hurst(problem);
    let spec = FieldSpec::new(hurst, problem.k, problem.n, problem.m, seed)?;
    let sample = FbfSampler::new(spec)?.sample(seed, 0);
    let mut out = match &problem.endpoint {
        None => {
            let kk = certified_seminorm(&sample, problem.gamma, seed)?;
            sample.scaled(problem.rho / (kk + 1.0))
        }
        Some(p) => {
            let pn = crate::numeric::norm(p);
            if !(pn < problem.rho) {
                return Err(Error::Infeasible(format!(
                    "endpoint norm {pn} must be below the Hölder radius {}",
                    problem.rho
                )));
            }
            let bridge = make_bridge(&sample, hurst)?;
            let kk = certified_seminorm(&bridge, problem.gamma, seed)?;
            let mut f = bridge.scaled((problem.rho - pn) / (kk + 1.0));
            for q in 0..f.len() {
                let t = f.param(q)[0];
                for (v, pj) in f.point_mut(q).iter_mut().zip(p) {
                    *v += t * pj;
                }
            }
            let last = f.last_index();
            f.point_mut(last).copy_from_slice(p);
            f
        }
    };
    out.refresh_pin();
    out.meta = FieldMeta {
        hurst: Some(hurst),
        seed: Some(seed),
        generator: "feasible_init".into(),
    };
    Ok(out)
}
