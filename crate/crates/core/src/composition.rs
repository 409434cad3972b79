//! Grid BV functions, fractional seminorms and the composition estimate
//! `[φ∘u]_{β,r} ≤ c [u]^s_{θ,q} V_{φ,s,p}(u)^{1/p}`.
//!
//! `φ` is cell-constant on a box in `R^n` (`n ∈ {1, 2}`) and takes a fixed
//! `outside` value beyond it, so its gradient measure is carried by the faces
//! where neighbouring values differ, box faces included.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{holder_seminorm, PairPolicy};
use crate::error::{check_dim, Error, Result};
use crate::field::SampledField;
use crate::fields::{FbfSampler, FieldSpec};
use crate::measure::DiscreteMeasure;
use crate::measures::{maximal_function, riesz_potential};
use crate::minimize::{minimize_derivative_free, SearchOptions, SearchResult};
use crate::numeric::{dist, par_sum};

/// Occupation mass of the jump set above which a composition is refused.
pub const JUMP_SET_TOLERANCE: f64 = 1e-6;
const FACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BVGridFunction {
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    /// One value per cell, last axis fastest.
    pub values: Vec<f64>,
    #[serde(default)]
    pub outside: f64,
}

/// A face between two cells (or a cell and the outside) carrying a jump.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpFace {
    pub center: Vec<f64>,
    pub axis: usize,
    pub jump: f64,
    pub area: f64,
}

/// Value of `φ` at a point together with whether the point lies on a jump face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    pub on_jump: bool,
}

impl BVGridFunction {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>, values: Vec<f64>, outside: f64) -> Result<Self> {
        let n = lo.len();
        if !(n == 1 || n == 2) {
            return Err(Error::input("grid BV functions are supported in dimension 1 or 2"));
        }
        check_dim(n, hi.len())?;
        check_dim(n, cells.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) || cells.contains(&0) {
            return Err(Error::input("box must have lo < hi and at least one cell per axis"));
        }
        check_dim(cells.iter().product(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) || !outside.is_finite() {
            return Err(Error::input("BV values must be finite"));
        }
        Ok(BVGridFunction {
            n,
            lo,
            hi,
            cells,
            values,
            outside,
        })
    }

    /// Sample `f` at cell centres.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>, outside: f64, f: F) -> Result<Self> {
        let n = lo.len();
        let total: usize = cells.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for flat in 0..total {
            let mut rem = flat;
            for d in (0..n).rev() {
                idx[d] = rem % cells[d];
                rem /= cells[d];
            }
            let c: Vec<f64> = (0..n)
                .map(|d| lo[d] + (idx[d] as f64 + 0.5) * (hi[d] - lo[d]) / cells[d] as f64)
                .collect();
            values.push(f(&c));
        }
        Self::new(lo, hi, cells, values, outside)
    }

    pub fn disc_indicator(center: &[f64], radius: f64, lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let c = center.to_vec();
        Self::from_fn(lo, hi, cells, 0.0, |x| if dist(x, &c) < radius { 1.0 } else { 0.0 })
    }

    pub fn square_indicator(center: &[f64], side: f64, lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let c = center.to_vec();
        Self::from_fn(lo, hi, cells, 0.0, |x| {
            if x.iter().zip(&c).all(|(a, b)| (a - b).abs() < 0.5 * side) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn cell_size(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / self.cells[d] as f64
    }

    fn cell_value(&self, idx: &[isize]) -> f64 {
        let mut flat = 0usize;
        for (&i, &c) in idx.iter().zip(&self.cells) {
            if i < 0 || i >= c as isize {
                return self.outside;
            }
            flat = flat * c + i as usize;
        }
        self.values[flat]
    }

    /// Faces with non-zero jump, ordered by axis then cell index.
    pub fn jump_faces(&self) -> Vec<JumpFace> {
        let mut out = Vec::new();
        for axis in 0..self.n {
            let other = if self.n == 2 { Some(1 - axis) } else { None };
            let area = other.map_or(1.0, |o| self.cell_size(o));
            let span_other = other.map_or(1, |o| self.cells[o]);
            for j in 0..span_other {
                for i in 0..=self.cells[axis] {
                    let mut a = vec![0isize; self.n];
                    a[axis] = i as isize - 1;
                    if let Some(o) = other {
                        a[o] = j as isize;
                    }
                    let mut b = a.clone();
                    b[axis] += 1;
                    let jump = self.cell_value(&b) - self.cell_value(&a);
                    if jump == 0.0 {
                        continue;
                    }
                    let mut center = vec![0.0; self.n];
                    center[axis] = self.lo[axis] + i as f64 * self.cell_size(axis);
                    if let Some(o) = other {
                        center[o] = self.lo[o] + (j as f64 + 0.5) * self.cell_size(o);
                    }
                    out.push(JumpFace {
                        center,
                        axis,
                        jump,
                        area,
                    });
                }
            }
        }
        out
    }

    /// Cell value away from faces; the average of the adjacent cells on a face.
    pub fn lookup(&self, x: &[f64]) -> Lookup {
        let mut choices: Vec<Vec<isize>> = vec![Vec::new()];
        for (d, &xd) in x.iter().enumerate().take(self.n) {
            let u = (xd - self.lo[d]) / self.cell_size(d);
            let r = u.round();
            let opts: Vec<isize> = if (u - r).abs() < FACE_TOL && r >= 0.0 && r <= self.cells[d] as f64 {
                vec![r as isize - 1, r as isize]
            } else {
                vec![u.floor() as isize]
            };
            choices = choices
                .into_iter()
                .flat_map(|c| {
                    opts.iter().map(move |&o| {
                        let mut c = c.clone();
                        c.push(o);
                        c
                    })
                })
                .collect();
        }
        let vals: Vec<f64> = choices.iter().map(|c| self.cell_value(c)).collect();
        let first = vals[0];
        Lookup {
            value: vals.iter().sum::<f64>() / vals.len() as f64,
            on_jump: vals.iter().any(|&v| v != first),
        }
    }
}

/// `‖Dφ‖` as atoms at jump-face centres with weights `|jump| · face area`.
pub fn gradient_measure(phi: &BVGridFunction) -> DiscreteMeasure {
    let faces = phi.jump_faces();
    let mut atoms = Vec::with_capacity(faces.len() * phi.n);
    let mut weights = Vec::with_capacity(faces.len());
    for f in faces {
        atoms.extend_from_slice(&f.center);
        weights.push(f.jump.abs() * f.area);
    }
    if weights.is_empty() {
        return DiscreteMeasure::empty(phi.n);
    }
    DiscreteMeasure::new(phi.n, atoms, weights).expect("face atoms are finite")
}

/// Discrete Gagliardo seminorm
/// `[u]_{δ,ℓ} = (m^{-2k} Σ_{i≠j} |u_i-u_j|^ℓ / |t_i-t_j|^{k+δℓ})^{1/ℓ}`;
/// `ℓ = ∞` gives the Hölder seminorm of order `δ`.
pub fn gagliardo_seminorm(u: &SampledField, delta: f64, ell: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input("Gagliardo order must lie in (0,1)"));
    }
    if !(ell >= 1.0) {
        return Err(Error::input("Gagliardo exponent must be at least 1"));
    }
    if ell.is_infinite() {
        return holder_seminorm(u, delta, PairPolicy::AllPairs);
    }
    let len = u.len();
    let w = 1.0 / len as f64;
    let tpow = 0.5 * (u.k as f64 + delta * ell);
    let sum = par_sum(len, |i| {
        let xi = u.point(i);
        let mut acc = 0.0;
        for j in (i + 1)..len {
            let du = dist(xi, u.point(j));
            if du == 0.0 {
                continue;
            }
            let pd = u.param_dist(i, j);
            acc += du.powf(ell) / (pd * pd).powf(tpow);
        }
        acc
    });
    Ok((2.0 * sum * w * w).powf(1.0 / ell))
}

/// `V_{φ,s,p}(u) = m^{-k} Σ_x (U^{1-s}‖Dφ‖(u(x)))^p`, or the maximum for `p = ∞`.
pub fn v_functional(phi: &BVGridFunction, u: &SampledField, s: f64, p: f64) -> Result<f64> {
    check_dim(phi.n, u.n)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::input("s must lie in (0,1)"));
    }
    if !(p >= 1.0) {
        return Err(Error::input("p must be at least 1"));
    }
    let grad = gradient_measure(phi);
    if grad.is_empty() {
        return Ok(0.0);
    }
    let pots: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|i| riesz_potential(&grad, u.point(i), 1.0 - s))
        .collect::<Result<_>>()?;
    if p.is_infinite() {
        return Ok(pots.iter().copied().fold(0.0, f64::max));
    }
    let terms: Vec<f64> = pots.iter().map(|v| v.powf(p)).collect();
    Ok(crate::numeric::pairwise_sum(&terms) / u.len() as f64)
}

/// Scalar field `φ∘u` on the parameter grid of `u`.
///
/// Refused when the sample mass lying exactly on jump faces exceeds
/// [`JUMP_SET_TOLERANCE`]: the composition is only defined when `u` does not
/// charge the jump set.
pub fn compose(phi: &BVGridFunction, u: &SampledField) -> Result<SampledField> {
    check_dim(phi.n, u.n)?;
    let looks: Vec<Lookup> = (0..u.len()).map(|i| phi.lookup(u.point(i))).collect();
    let hits = looks.iter().filter(|l| l.on_jump).count();
    let mass = hits as f64 / u.len() as f64;
    if mass > JUMP_SET_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "u spends occupation mass {mass:e} on the jump set of φ (tolerance {JUMP_SET_TOLERANCE:e}); φ∘u is undefined"
        )));
    }
    let values = looks.iter().map(|l| l.value).collect();
    let mut out = SampledField::new(u.k, 1, u.m, values)?;
    out.meta.generator = "compose".into();
    Ok(out)
}

/// Serialize `f64::INFINITY` as `"inf"` and accept numbers or `"inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("not a number: {t}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionParams {
    pub s: f64,
    pub theta: f64,
    #[serde(with = "ext_real")]
    pub p: f64,
    #[serde(with = "ext_real")]
    pub q: f64,
    #[serde(with = "ext_real")]
    pub r: f64,
    pub beta: f64,
}

fn recip(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

impl CompositionParams {
    /// `1/p + s/q ≤ 1/r`.
    pub fn gate_holds(&self) -> bool {
        recip(self.p) + self.s * recip(self.q) <= recip(self.r) + 1e-12
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s", self.s), ("theta", self.theta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::input(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        for (name, v) in [("p", self.p), ("q", self.q), ("r", self.r)] {
            if !(v >= 1.0) {
                return Err(Error::input(format!("{name} must lie in [1, ∞], got {v}")));
            }
        }
        if !self.gate_holds() {
            return Err(Error::input(format!(
                "parameter gate 1/p + s/q ≤ 1/r fails: {} > {}",
                recip(self.p) + self.s * recip(self.q),
                recip(self.r)
            )));
        }
        let top = self.theta * self.s;
        let endpoint_ok = self.r.is_infinite()
            || (self.q.is_finite() && (self.q - self.s * self.r).abs() <= 1e-12 * self.q);
        let beta_ok = self.beta > 0.0 && (self.beta < top || (self.beta == top && endpoint_ok));
        if !beta_ok {
            return Err(Error::input(format!(
                "β must satisfy 0 < β < θs = {top} (β = θs only when r = ∞ or q = sr), got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainEstimateReport {
    pub lhs: f64,
    pub rhs_factor_seminorm: f64,
    #[serde(rename = "rhs_factor_V")]
    pub rhs_factor_v: f64,
    pub ratio: f64,
}

/// Instance ratio `[φ∘u]_{β,r} / ([u]^s_{θ,q} V_{φ,s,p}(u)^{1/p})`
/// (the plain `V` factor when `p = ∞`).
pub fn verify_main_estimate(phi: &BVGridFunction, u: &SampledField, params: &CompositionParams) -> Result<MainEstimateReport> {
    params.validate()?;
    let composed = compose(phi, u)?;
    let lhs = gagliardo_seminorm(&composed, params.beta, params.r)?;
    let rhs_factor_seminorm = gagliardo_seminorm(u, params.theta, params.q)?.powf(params.s);
    let v = v_functional(phi, u, params.s, params.p)?;
    let rhs_factor_v = if params.p.is_infinite() { v } else { v.powf(1.0 / params.p) };
    let rhs = rhs_factor_seminorm * rhs_factor_v;
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    Ok(MainEstimateReport {
        lhs,
        rhs_factor_seminorm,
        rhs_factor_v,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub max_ratio: f64,
    /// `(level, quantile)` pairs of the ratio distribution.
    pub quantiles: Vec<(f64, f64)>,
    pub evaluated: usize,
    pub skipped_on_jump: usize,
    /// Pairs with a zero denominator and a non-zero numerator.
    pub unresolved: usize,
}

/// Ratios `|φ(ξ)-φ(η)| / (|ξ-η|^s [M(ξ) + M(η)])` with
/// `M = M_{1-s, 4|ξ-η|} ‖Dφ‖`.
pub fn pointwise_bv_check(phi: &BVGridFunction, pairs: &[(Vec<f64>, Vec<f64>)], s: f64) -> Result<PointwiseReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::input("s must lie in (0,1)"));
    }
    let grad = gradient_measure(phi);
    let results: Vec<Option<Option<f64>>> = pairs
        .par_iter()
        .map(|(a, b)| -> Result<Option<Option<f64>>> {
            check_dim(phi.n, a.len())?;
            check_dim(phi.n, b.len())?;
            let (la, lb) = (phi.lookup(a), phi.lookup(b));
            if la.on_jump || lb.on_jump {
                return Ok(None);
            }
            let num = (la.value - lb.value).abs();
            let d = dist(a, b);
            if num == 0.0 {
                return Ok(Some(Some(0.0)));
            }
            let ma = if grad.is_empty() { 0.0 } else { maximal_function(&grad, a, 1.0 - s, 4.0 * d)? };
            let mb = if grad.is_empty() { 0.0 } else { maximal_function(&grad, b, 1.0 - s, 4.0 * d)? };
            let den = d.powf(s) * (ma + mb);
            Ok(Some(if den > 0.0 { Some(num / den) } else { None }))
        })
        .collect::<Result<_>>()?;
    let skipped_on_jump = results.iter().filter(|r| r.is_none()).count();
    let unresolved = results.iter().filter(|r| matches!(r, Some(None))).count();
    let mut ratios: Vec<f64> = results.into_iter().flatten().flatten().collect();
    ratios.sort_by(f64::total_cmp);
    let quantile = |q: f64| -> f64 {
        if ratios.is_empty() {
            return 0.0;
        }
        let idx = ((ratios.len() - 1) as f64 * q).round() as usize;
        ratios[idx]
    };
    Ok(PointwiseReport {
        max_ratio: ratios.last().copied().unwrap_or(0.0),
        quantiles: [0.5, 0.9, 0.99, 1.0].iter().map(|&q| (q, quantile(q))).collect(),
        evaluated: ratios.len(),
        skipped_on_jump,
        unresolved,
    })
}

/// `P(u) = [u]^s_{θ,∞} · V_{φ,s,p}(u)`.
pub fn product_functional(phi: &BVGridFunction, u: &SampledField, s: f64, p: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::input("θ must lie in (0,1)"));
    }
    let semi = holder_seminorm(u, theta, PairPolicy::AllPairs)?;
    if semi == 0.0 {
        return Ok(0.0);
    }
    Ok(semi.powf(s) * v_functional(phi, u, s, p)?)
}

/// Minimize [`product_functional`] over fields with `u(0) = 0`,
/// `[u]_{θ,∞} < ρ` and `V_{φ,s,1}(u) < M`, starting from a member of that class.
#[allow(clippy::too_many_arguments)]
pub fn minimize_product(
    phi: &BVGridFunction,
    init: &SampledField,
    s: f64,
    p: f64,
    theta: f64,
    rho: f64,
    v_cap: f64,
    options: &SearchOptions,
) -> Result<SearchResult> {
    minimize_derivative_free(
        |u| product_functional(phi, u, s, p, theta),
        |u| Ok(v_functional(phi, u, s, 1.0)? < v_cap),
        init,
        theta,
        rho,
        options,
    )
}

/// A curve generator that can be sampled at any resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurveSpec {
    /// Piecewise-linear interpolation of a fixed fine fBm path.
    Path { points: Vec<[f64; 2]> },
    /// `t ↦ Σ_j (a_j sin(jπt), b_j (1 - cos(jπt)))`.
    Trig { a: Vec<f64>, b: Vec<f64> },
}

impl CurveSpec {
    pub fn eval(&self, t: f64) -> [f64; 2] {
        match self {
            CurveSpec::Path { points } => {
                let seg = (points.len() - 1) as f64;
                let x = (t * seg).clamp(0.0, seg);
                let i = (x.floor() as usize).min(points.len() - 2);
                let f = x - i as f64;
                let (p, q) = (points[i], points[i + 1]);
                [p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1])]
            }
            CurveSpec::Trig { a, b } => {
                let mut out = [0.0, 0.0];
                for (j, (aj, bj)) in a.iter().zip(b).enumerate() {
                    let w = (j + 1) as f64 * std::f64::consts::PI * t;
                    out[0] += aj * w.sin();
                    out[1] += bj * (1.0 - w.cos());
                }
                out
            }
        }
    }

    pub fn field(&self, m: usize) -> Result<SampledField> {
        SampledField::from_fn(1, 2, m, |t| self.eval(t[0]).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCase {
    pub label: String,
    pub phi: BVGridFunction,
    pub curve: CurveSpec,
}

/// Box and resolution used for corpus integrands.
pub const CORPUS_LO: [f64; 2] = [-1.51, -1.49];
pub const CORPUS_HI: [f64; 2] = [1.49, 1.51];
pub const CORPUS_CELLS: usize = 128;

/// Seeded corpus of (φ, u) pairs in the plane: disc and square indicators and
/// their ramp-smoothed variants, composed with fBm paths (H = 0.75) and
/// trigonometric curves.
pub fn seeded_corpus(count: usize, seed: u64) -> Result<Vec<CorpusCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = CORPUS_LO.to_vec();
    let hi = CORPUS_HI.to_vec();
    let cells = vec![CORPUS_CELLS; 2];
    let sampler = FbfSampler::new(FieldSpec::new(0.75, 1, 2, 4097, seed)?)?;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let c = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
        let size: f64 = rng.random_range(0.4..0.9);
        let ramp = 0.2;
        let (pname, phi) = match i % 4 {
            0 => ("disc", BVGridFunction::disc_indicator(&c, size, lo.clone(), hi.clone(), cells.clone())?),
            1 => ("square", BVGridFunction::square_indicator(&c, 2.0 * size, lo.clone(), hi.clone(), cells.clone())?),
            2 => (
                "smooth_disc",
                BVGridFunction::from_fn(lo.clone(), hi.clone(), cells.clone(), 0.0, |x| {
                    (0.5 + (size - dist(x, &c)) / ramp).clamp(0.0, 1.0)
                })?,
            ),
            _ => (
                "smooth_square",
                BVGridFunction::from_fn(lo.clone(), hi.clone(), cells.clone(), 0.0, |x| {
                    let cheb = (x[0] - c[0]).abs().max((x[1] - c[1]).abs());
                    (0.5 + (size - cheb) / ramp).clamp(0.0, 1.0)
                })?,
            ),
        };
        let (uname, curve) = if (i / 4) % 2 == 0 {
            let path = sampler.sample(seed, i as u64);
            let points = (0..path.len())
                .map(|q| [path.point(q)[0], path.point(q)[1]])
                .collect();
            ("fbm", CurveSpec::Path { points })
        } else {
            let a = (0..3).map(|j| rng.random_range(-1.0..1.0) / (j + 1) as f64).collect();
            let b = (0..3).map(|j| rng.random_range(-0.6..0.6) / (j + 1) as f64).collect();
            ("trig", CurveSpec::Trig { a, b })
        };
        out.push(CorpusCase {
            label: format!("{i:02}_{pname}_{uname}"),
            phi,
            curve,
        });
    }
    Ok(out)
}
