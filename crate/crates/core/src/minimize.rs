//! Hölder-constrained minimization of discrete Riesz energies.
//!
//! Iterates are fields pinned at the origin (and at `t = 1` when an endpoint is
//! prescribed). Each step moves along the negative gradient, normalized in the
//! sup norm, and maps back into the Hölder ball with [`project_holder`].
//! Steps are accepted by an Armijo test on the penalized objective, with
//! backtracking on failure and step growth on success. An optional potential
//! cap enters through a quadratic penalty whose weight ramps up, but only
//! iterates that satisfy the cap exactly are eligible as the result. Optional
//! annealing restarts perturb the best iterate with Gaussian noise at a
//! geometrically decreasing temperature.
//!
//! The projection is cyclic pairwise contraction, which is not the metric
//! projection onto the ball; a final pull-in toward the anchor `t ↦ t p` (or
//! `0`) makes the result feasible to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::{FieldMeta, SampledField};
use crate::kernels::check_riesz_order;
use crate::measure::DiscreteMeasure;
use crate::numeric::{dist2, norm, pairwise_sum};
use crate::witness::certified_seminorm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `I^α(μ_X)`, diagonal excluded.
    SelfInteraction,
    /// `I^α(μ_X, ν)`.
    MutualInteraction { medium: DiscreteMeasure },
    /// `∫ (U^α μ_X)^p dν`.
    PPotential { medium: DiscreteMeasure, p_power: f64 },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::SelfInteraction => "self_interaction",
            Objective::MutualInteraction { .. } => "mutual_interaction",
            Objective::PPotential { .. } => "p_potential",
        }
    }
}

/// `sup_{x ∈ eval_points} U^α μ_X(x) < bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCap {
    pub bound: f64,
    pub eval_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub objective: Objective,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub potential_cap: Option<PotentialCap>,
    pub endpoint: Option<Vec<f64>>,
}

impl ProblemSpec {
    /// `k/(n-α) ∧ 1`, the supremum of admissible Hölder exponents.
    pub fn holder_ceiling(&self) -> f64 {
        (self.k as f64 / (self.n as f64 - self.alpha)).min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_riesz_order(self.alpha, self.n)?;
        if self.k == 0 || self.m < 2 {
            return Err(Error::input("need k >= 1 and m >= 2"));
        }
        let ceiling = self.holder_ceiling();
        if !(self.gamma > 0.0 && self.gamma < ceiling) {
            return Err(Error::input(format!(
                "Hölder exponent must satisfy 0 < γ < k/(n-α) ∧ 1 = {ceiling}, got {}",
                self.gamma
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::input("Hölder radius must be positive"));
        }
        match &self.objective {
            Objective::SelfInteraction => {}
            Objective::MutualInteraction { medium } => check_dim(self.n, medium.n)?,
            Objective::PPotential { medium, p_power } => {
                check_dim(self.n, medium.n)?;
                if !(*p_power >= 1.0) {
                    return Err(Error::input("p must be at least 1"));
                }
            }
        }
        if let Some(cap) = &self.potential_cap {
            if !(cap.bound > 0.0) || cap.eval_points.is_empty() {
                return Err(Error::input("potential cap needs a positive bound and evaluation points"));
            }
            for x in &cap.eval_points {
                check_dim(self.n, x.len())?;
            }
        }
        if let Some(p) = &self.endpoint {
            if self.k != 1 {
                return Err(Error::input("an endpoint is only allowed for curves (k = 1)"));
            }
            check_dim(self.n, p.len())?;
        }
        Ok(())
    }

    fn check_field(&self, field: &SampledField) -> Result<()> {
        if field.k != self.k || field.n != self.n || field.m != self.m {
            return Err(Error::input(format!(
                "field shape (k={}, n={}, m={}) does not match the problem (k={}, n={}, m={})",
                field.k, field.n, field.m, self.k, self.n, self.m
            )));
        }
        Ok(())
    }

    /// Flat indices whose values never move.
    pub fn pinned_indices(&self) -> Vec<usize> {
        let mut v = vec![0];
        if self.endpoint.is_some() {
            v.push(self.m - 1);
        }
        v
    }
}

/// Objective value and its gradient with respect to every grid value
/// (zero at pinned indices). `infinite` marks a coincident pair, in which case
/// the gradient is zero.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub infinite: bool,
}

pub fn objective_and_gradient(problem: &ProblemSpec, field: &SampledField) -> Result<ObjectiveEval> {
    problem.validate()?;
    problem.check_field(field)?;
    let mut eval = raw_objective(problem, field);
    if eval.infinite {
        eval.gradient.iter_mut().for_each(|g| *g = 0.0);
    } else {
        zero_pinned(problem, &mut eval.gradient);
    }
    Ok(eval)
}

fn zero_pinned(problem: &ProblemSpec, grad: &mut [f64]) {
    for p in problem.pinned_indices() {
        grad[p * problem.n..(p + 1) * problem.n]
            .iter_mut()
            .for_each(|g| *g = 0.0);
    }
}

fn raw_objective(problem: &ProblemSpec, field: &SampledField) -> ObjectiveEval {
    let a = problem.alpha - problem.n as f64;
    let n = field.n;
    let len = field.len();
    let w = 1.0 / len as f64;
    match &problem.objective {
        Objective::SelfInteraction => {
            let rows: Vec<(f64, Vec<f64>, bool)> = (0..len)
                .into_par_iter()
                .map(|i| {
                    let xi = field.point(i);
                    let mut e = 0.0;
                    let mut g = vec![0.0; n];
                    let mut hit = false;
                    for j in 0..len {
                        if j == i {
                            continue;
                        }
                        let xj = field.point(j);
                        let d2 = dist2(xi, xj);
                        if d2 == 0.0 {
                            hit = true;
                            continue;
                        }
                        let k = d2.powf(0.5 * a);
                        e += k;
                        let c = a * k / d2;
                        for (gd, (u, v)) in g.iter_mut().zip(xi.iter().zip(xj)) {
                            *gd += c * (u - v);
                        }
                    }
                    g.iter_mut().for_each(|v| *v *= 2.0 * w * w);
                    (e * w * w, g, hit)
                })
                .collect();
            collect_rows(rows, n)
        }
        Objective::MutualInteraction { medium } => {
            let rows: Vec<(f64, Vec<f64>, bool)> = (0..len)
                .into_par_iter()
                .map(|i| {
                    let xi = field.point(i);
                    let mut e = 0.0;
                    let mut g = vec![0.0; n];
                    let mut hit = false;
                    for (b, &vb) in medium.weights.iter().enumerate() {
                        if vb == 0.0 {
                            continue;
                        }
                        let y = medium.atom(b);
                        let d2 = dist2(xi, y);
                        if d2 == 0.0 {
                            hit = true;
                            continue;
                        }
                        let k = d2.powf(0.5 * a);
                        e += vb * k;
                        let c = vb * a * k / d2;
                        for (gd, (u, v)) in g.iter_mut().zip(xi.iter().zip(y)) {
                            *gd += c * (u - v);
                        }
                    }
                    g.iter_mut().for_each(|v| *v *= w);
                    (e * w, g, hit)
                })
                .collect();
            collect_rows(rows, n)
        }
        Objective::PPotential { medium, p_power } => {
            let p = *p_power;
            let pots: Vec<f64> = (0..medium.len())
                .into_par_iter()
                .map(|b| potential_at(field, medium.atom(b), a))
                .collect();
            if pots
                .iter()
                .zip(&medium.weights)
                .any(|(u, &vb)| vb > 0.0 && u.is_infinite())
            {
                return ObjectiveEval {
                    value: f64::INFINITY,
                    gradient: vec![0.0; field.values.len()],
                    infinite: true,
                };
            }
            let terms: Vec<f64> = pots
                .iter()
                .zip(&medium.weights)
                .map(|(u, vb)| vb * u.powf(p))
                .collect();
            let coef: Vec<f64> = pots
                .iter()
                .zip(&medium.weights)
                .map(|(u, vb)| vb * p * u.powf(p - 1.0))
                .collect();
            let grads: Vec<Vec<f64>> = (0..len)
                .into_par_iter()
                .map(|i| {
                    let xi = field.point(i);
                    let mut g = vec![0.0; n];
                    for (b, &cb) in coef.iter().enumerate() {
                        if cb == 0.0 {
                            continue;
                        }
                        let y = medium.atom(b);
                        let d2 = dist2(xi, y);
                        let c = cb * w * a * d2.powf(0.5 * a) / d2;
                        for (gd, (u, v)) in g.iter_mut().zip(xi.iter().zip(y)) {
                            *gd += c * (u - v);
                        }
                    }
                    g
                })
                .collect();
            ObjectiveEval {
                value: pairwise_sum(&terms),
                gradient: grads.concat(),
                infinite: false,
            }
        }
    }
}

fn collect_rows(rows: Vec<(f64, Vec<f64>, bool)>, n: usize) -> ObjectiveEval {
    let infinite = rows.iter().any(|r| r.2);
    let energies: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut gradient = Vec::with_capacity(rows.len() * n);
    for r in &rows {
        gradient.extend_from_slice(&r.1);
    }
    ObjectiveEval {
        value: if infinite {
            f64::INFINITY
        } else {
            pairwise_sum(&energies)
        },
        gradient,
        infinite,
    }
}

/// `U^α μ_X(x) = m^{-k} Σ_i |x - X_i|^{α-n}` with `a = α - n`.
fn potential_at(field: &SampledField, x: &[f64], a: f64) -> f64 {
    let w = 1.0 / field.len() as f64;
    let mut s = 0.0;
    for i in 0..field.len() {
        let d2 = dist2(x, field.point(i));
        s += if d2 == 0.0 { f64::INFINITY } else { d2.powf(0.5 * a) };
    }
    s * w
}

/// Cap potentials `U^α μ_X(z_e)` and, when `grad_weights` is given, accumulate
/// `Σ_e c_e ∇U_e` into `grad`.
fn cap_potentials(problem: &ProblemSpec, field: &SampledField) -> Vec<f64> {
    let a = problem.alpha - problem.n as f64;
    match &problem.potential_cap {
        None => Vec::new(),
        Some(cap) => cap
            .eval_points
            .par_iter()
            .map(|z| potential_at(field, z, a))
            .collect(),
    }
}

fn add_cap_gradient(problem: &ProblemSpec, field: &SampledField, coef: &[f64], grad: &mut [f64]) {
    let Some(cap) = &problem.potential_cap else { return };
    let a = problem.alpha - problem.n as f64;
    let n = field.n;
    let w = 1.0 / field.len() as f64;
    let rows: Vec<Vec<f64>> = (0..field.len())
        .into_par_iter()
        .map(|i| {
            let xi = field.point(i);
            let mut g = vec![0.0; n];
            for (z, &c) in cap.eval_points.iter().zip(coef) {
                if c == 0.0 {
                    continue;
                }
                let d2 = dist2(xi, z);
                let f = c * w * a * d2.powf(0.5 * a) / d2;
                for (gd, (u, v)) in g.iter_mut().zip(xi.iter().zip(z)) {
                    *gd += f * (u - v);
                }
            }
            g
        })
        .collect();
    for (i, g) in rows.iter().enumerate() {
        for (d, v) in g.iter().enumerate() {
            grad[i * n + d] += v;
        }
    }
}

/// Options for [`project_holder_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOptions {
    pub max_sweeps: usize,
    /// Seed for the long-range pair sample used when `k >= 2`.
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_sweeps: 200,
            seed: 0,
        }
    }
}

/// Relative excess tolerated after the sweeps before the pull-in is refused.
const PULL_IN_LIMIT: f64 = 0.05;
const SWEEP_TOL: f64 = 1e-7;
const LOCAL_RADIUS: usize = 8;
const LONG_RANGE_PAIRS: usize = 1 << 14;

/// Map `field` into the discrete Hölder ball of radius `rho`, origin pinned.
pub fn project_holder(field: &SampledField, gamma: f64, rho: f64) -> Result<SampledField> {
    project_holder_with(field, gamma, rho, None, &ProjectionOptions::default())
}

/// As [`project_holder`], additionally pinning `X(1) = endpoint` for curves.
pub fn project_holder_with(
    field: &SampledField,
    gamma: f64,
    rho: f64,
    endpoint: Option<&[f64]>,
    opts: &ProjectionOptions,
) -> Result<SampledField> {
    if !(gamma > 0.0 && gamma <= 1.0 && rho > 0.0) {
        return Err(Error::input("need 0 < γ <= 1 and ρ > 0"));
    }
    if field.point(0).iter().any(|&v| v != 0.0) {
        return Err(Error::input("field must be pinned at the origin"));
    }
    let pnorm = match endpoint {
        Some(p) => {
            if field.k != 1 {
                return Err(Error::input("an endpoint is only allowed for curves"));
            }
            check_dim(field.n, p.len())?;
            if field.point(field.last_index()) != p {
                return Err(Error::input("field does not take the prescribed endpoint value"));
            }
            let pn = norm(p);
            if pn > rho {
                return Err(Error::Infeasible(format!(
                    "endpoint norm {pn} exceeds the Hölder radius {rho}"
                )));
            }
            pn
        }
        None => 0.0,
    };
    let mut x = field.clone();
    let n = x.n;
    let last = x.last_index();
    let pinned = |i: usize| i == 0 || (endpoint.is_some() && i == last);
    let pairs = pair_set(&x, opts.seed);
    let mut lim: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| rho * x.param_dist(i, j).powf(gamma))
        .collect();
    if pairs.is_empty() {
        lim.clear();
    }
    let mut sweeps = 0;
    let mut worst = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        worst = 0.0;
        let mut moved = false;
        for (&(i, j), &l) in pairs.iter().zip(&lim) {
            let d = dist2(x.point(i), x.point(j)).sqrt();
            if d <= l {
                continue;
            }
            worst = f64::max(worst, d / l - 1.0);
            let excess = d - l;
            let (pi, pj) = (pinned(i), pinned(j));
            if pi && pj {
                continue;
            }
            let (si, sj) = match (pi, pj) {
                (true, false) => (0.0, excess),
                (false, true) => (excess, 0.0),
                _ => (0.5 * excess, 0.5 * excess),
            };
            for c in 0..n {
                let u = (x.values[j * n + c] - x.values[i * n + c]) / d;
                x.values[i * n + c] += si * u;
                x.values[j * n + c] -= sj * u;
            }
            moved = true;
        }
        if !moved || worst <= SWEEP_TOL {
            break;
        }
    }
    let s = certified_seminorm(&x, gamma, opts.seed)?;
    if s > rho {
        if s > rho * (1.0 + PULL_IN_LIMIT) && worst > SWEEP_TOL {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                max_violation: s / rho - 1.0,
            });
        }
        // X_λ = (1-λ) φ + λ X with φ(t) = t p has seminorm ≤ (1-λ)|p| + λ s.
        let lambda = (rho - pnorm) / (s - pnorm);
        for q in 0..x.len() {
            let t = if endpoint.is_some() { x.param(q)[0] } else { 0.0 };
            for c in 0..n {
                let anchor = endpoint.map_or(0.0, |p| t * p[c]);
                let v = &mut x.values[q * n + c];
                *v = anchor + lambda * (*v - anchor);
            }
        }
    }
    x.point_mut(0).iter_mut().for_each(|v| *v = 0.0);
    if let Some(p) = endpoint {
        x.point_mut(last).copy_from_slice(p);
    }
    x.refresh_pin();
    Ok(x)
}

/// All pairs for curves; for `k >= 2` the pairs within Chebyshev grid distance
/// 8 plus a seeded long-range sample.
fn pair_set(field: &SampledField, seed: u64) -> Vec<(usize, usize)> {
    let len = field.len();
    if field.k == 1 {
        let mut v = Vec::with_capacity(len * (len - 1) / 2);
        for lag in 1..len {
            for i in 0..len - lag {
                v.push((i, i + lag));
            }
        }
        return v;
    }
    let mut v = Vec::new();
    for i in 0..len {
        let a = field.multi_index(i);
        for j in i + 1..len {
            let b = field.multi_index(j);
            if a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) <= LOCAL_RADIUS) {
                v.push((i, j));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..LONG_RANGE_PAIRS {
        let i = rng.random_range(0..len);
        let j = rng.random_range(0..len);
        if i != j {
            v.push((i.min(j), i.max(j)));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub holder_seminorm: f64,
    pub potential_sup: Option<f64>,
    pub endpoint_error: Option<f64>,
    pub origin_error: f64,
}

impl ConstraintReport {
    /// Hölder, cap, endpoint and origin constraints all hold.
    pub fn feasible(&self, problem: &ProblemSpec) -> bool {
        self.holder_seminorm <= problem.rho * (1.0 + 1e-9)
            && self.origin_error == 0.0
            && self.endpoint_error.is_none_or(|e| e == 0.0)
            && match (&problem.potential_cap, self.potential_sup) {
                (Some(cap), Some(u)) => u < cap.bound,
                _ => true,
            }
    }
}

pub fn check_constraints(problem: &ProblemSpec, field: &SampledField) -> Result<ConstraintReport> {
    problem.check_field(field)?;
    let holder_seminorm = certified_seminorm(field, problem.gamma, 0)?;
    let potential_sup = problem
        .potential_cap
        .as_ref()
        .map(|_| cap_potentials(problem, field).into_iter().fold(f64::NEG_INFINITY, f64::max));
    let endpoint_error = problem
        .endpoint
        .as_ref()
        .map(|p| dist2(field.point(field.last_index()), p).sqrt());
    Ok(ConstraintReport {
        holder_seminorm,
        potential_sup,
        endpoint_error,
        origin_error: norm(field.point(0)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub restarts: usize,
    /// Perturbation scale of the first restart, in units of `ρ m^{-γ}`.
    pub initial_temperature: f64,
    pub decay: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            restarts: 5,
            initial_temperature: 2.0,
            decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Initial step in the sup norm; `None` means `0.1 ρ m^{-γ}`.
    pub initial_step: Option<f64>,
    pub backtrack: f64,
    pub growth: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub anneal: Option<AnnealSchedule>,
    pub seed: u64,
    pub max_sweeps: usize,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    /// Penalty threshold as a fraction of the cap.
    pub penalty_margin: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 200,
            initial_step: None,
            backtrack: 0.5,
            growth: 1.5,
            armijo: 1e-4,
            max_backtracks: 30,
            anneal: None,
            seed: 0,
            max_sweeps: 200,
            penalty_initial: 1.0,
            penalty_growth: 1.2,
            penalty_margin: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub restart: usize,
    pub objective: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizerResult {
    pub field: SampledField,
    pub objective_value: f64,
    pub init_objective: f64,
    pub constraint_report: ConstraintReport,
    pub trace: Vec<TraceRow>,
    pub seed: u64,
    /// Iteration (counted across restarts) that produced the result.
    pub best_iteration: usize,
}

struct Evaluated {
    field: SampledField,
    objective: f64,
    penalized: f64,
    gradient: Vec<f64>,
    cap_sup: f64,
}

fn evaluate(problem: &ProblemSpec, field: SampledField, mu: f64, margin: f64) -> Evaluated {
    let raw = raw_objective(problem, &field);
    let mut gradient = raw.gradient;
    let pots = cap_potentials(problem, &field);
    let cap_sup = pots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut penalty = 0.0;
    if let Some(cap) = &problem.potential_cap {
        let thr = margin * cap.bound;
        let coef: Vec<f64> = pots
            .iter()
            .map(|&u| if u > thr { 2.0 * mu * (u - thr) } else { 0.0 })
            .collect();
        penalty = pots
            .iter()
            .map(|&u| if u > thr { mu * (u - thr) * (u - thr) } else { 0.0 })
            .sum();
        if !raw.infinite {
            add_cap_gradient(problem, &field, &coef, &mut gradient);
        }
    }
    zero_pinned(problem, &mut gradient);
    let objective = raw.value;
    let penalized = if raw.infinite || !penalty.is_finite() {
        f64::INFINITY
    } else {
        objective + penalty
    };
    Evaluated {
        field,
        objective,
        penalized,
        gradient,
        cap_sup,
    }
}

fn cap_violation(problem: &ProblemSpec, cap_sup: f64) -> f64 {
    match &problem.potential_cap {
        Some(cap) => (cap_sup / cap.bound - 1.0).max(0.0),
        None => 0.0,
    }
}

fn eligible(problem: &ProblemSpec, e: &Evaluated) -> bool {
    e.objective.is_finite()
        && match &problem.potential_cap {
            Some(cap) => e.cap_sup < cap.bound,
            None => true,
        }
}

/// Projected-gradient descent from `init`, returning the best eligible iterate.
pub fn minimize(
    problem: &ProblemSpec,
    init: &SampledField,
    options: &MinimizeOptions,
) -> Result<MinimizerResult> {
    problem.validate()?;
    problem.check_field(init)?;
    if init.point(0).iter().any(|&v| v != 0.0) {
        return Err(Error::input("init must be pinned at the origin"));
    }
    if let Some(p) = &problem.endpoint {
        if init.point(init.last_index()) != p.as_slice() {
            return Err(Error::input("init must take the prescribed endpoint value"));
        }
    }
    let popts = ProjectionOptions {
        max_sweeps: options.max_sweeps,
        seed: options.seed,
    };
    let endpoint = problem.endpoint.as_deref();
    let project = |f: &SampledField| project_holder_with(f, problem.gamma, problem.rho, endpoint, &popts);
    let step0 = options
        .initial_step
        .unwrap_or(0.1 * problem.rho * (problem.m as f64).powf(-problem.gamma));

    let start = if certified_seminorm(init, problem.gamma, options.seed)? > problem.rho * (1.0 + 1e-9) {
        project(init)?
    } else {
        init.clone()
    };
    let mut mu = options.penalty_initial;
    let first = evaluate(problem, start, mu, options.penalty_margin);
    let init_objective = first.objective;
    let mut trace = vec![TraceRow {
        iteration: 0,
        restart: 0,
        objective: first.objective,
        max_violation: cap_violation(problem, first.cap_sup),
    }];
    let mut best: Option<(SampledField, f64, usize)> = None;
    let mut least_violating = (first.field.clone(), cap_violation(problem, first.cap_sup));
    if eligible(problem, &first) {
        best = Some((first.field.clone(), first.objective, 0));
    }
    let mut counter = 0usize;
    let restarts = options.anneal.map_or(0, |a| a.restarts);
    let mut current = first;
    for restart in 0..=restarts {
        if restart > 0 {
            let sched = options.anneal.unwrap_or_default();
            let temp = sched.initial_temperature * sched.decay.powi(restart as i32 - 1);
            let base = best.as_ref().map_or(&least_violating.0, |b| &b.0);
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(restart as u64);
            let scale = temp * problem.rho * (problem.m as f64).powf(-problem.gamma);
            let mut perturbed = base.clone();
            let pinned = problem.pinned_indices();
            for q in 0..perturbed.len() {
                if pinned.contains(&q) {
                    continue;
                }
                for v in perturbed.point_mut(q) {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += scale * z;
                }
            }
            current = evaluate(problem, project(&perturbed)?, mu, options.penalty_margin);
        }
        let mut step = step0;
        for _ in 0..options.max_iters {
            counter += 1;
            if !current.penalized.is_finite() {
                break;
            }
            let gmax = current.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            if gmax == 0.0 {
                break;
            }
            let mut accepted = None;
            for _ in 0..options.max_backtracks {
                let mut trial = current.field.clone();
                for (v, g) in trial.values.iter_mut().zip(&current.gradient) {
                    *v -= step * g / gmax;
                }
                let trial = project(&trial)?;
                let decrease: f64 = trial
                    .values
                    .iter()
                    .zip(&current.field.values)
                    .zip(&current.gradient)
                    .map(|((y, x), g)| g * (y - x))
                    .sum();
                let cand = evaluate(problem, trial, mu, options.penalty_margin);
                if cand.penalized <= current.penalized + options.armijo * decrease && decrease < 0.0 {
                    accepted = Some(cand);
                    break;
                }
                step *= options.backtrack;
            }
            let Some(next) = accepted else { break };
            step *= options.growth;
            mu *= options.penalty_growth;
            current = evaluate(problem, next.field, mu, options.penalty_margin);
            let viol = cap_violation(problem, current.cap_sup);
            trace.push(TraceRow {
                iteration: counter,
                restart,
                objective: current.objective,
                max_violation: viol,
            });
            if eligible(problem, &current) {
                if best.as_ref().is_none_or(|b| current.objective < b.1) {
                    best = Some((current.field.clone(), current.objective, counter));
                }
            } else if viol < least_violating.1 {
                least_violating = (current.field.clone(), viol);
            }
        }
    }
    let Some((mut field, objective_value, best_iteration)) = best else {
        return Err(Error::Infeasible(format!(
            "no iterate satisfied the potential cap; least relative violation {:e}",
            least_violating.1
        )));
    };
    field.meta = FieldMeta {
        hurst: init.meta.hurst,
        seed: Some(options.seed),
        generator: "minimize".into(),
    };
    let constraint_report = check_constraints(problem, &field)?;
    Ok(MinimizerResult {
        field,
        objective_value,
        init_objective,
        constraint_report,
        trace,
        seed: options.seed,
        best_iteration,
    })
}

/// Crude lower bound `(1 - m^{-k}) (2 ρ k^{γ/2})^{α-n}` for the discrete self
/// energy of any field in the Hölder ball.
pub fn self_energy_floor(problem: &ProblemSpec) -> f64 {
    let mass = 1.0 - (problem.m as f64).powi(-(problem.k as i32));
    let diam = 2.0 * problem.rho * (problem.k as f64).powf(0.5 * problem.gamma);
    mass * diam.powf(problem.alpha - problem.n as f64)
}

/// One coordinate of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GradientCheck {
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// Compare analytic partials with central differences at `count` seeded free
/// coordinates. The relative error is measured against
/// `max(|g_i|, 1e-3 ‖g‖_∞)`.
pub fn gradient_check(
    problem: &ProblemSpec,
    field: &SampledField,
    count: usize,
    step: f64,
    seed: u64,
) -> Result<Vec<GradientCheck>> {
    let base = objective_and_gradient(problem, field)?;
    if base.infinite {
        return Err(Error::input("objective is infinite at the check point"));
    }
    let gmax = base.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let pinned = problem.pinned_indices();
    let free: Vec<usize> = (0..field.values.len())
        .filter(|c| !pinned.contains(&(c / field.n)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let c = free[rng.random_range(0..free.len())];
        let mut plus = field.clone();
        plus.values[c] += step;
        let mut minus = field.clone();
        minus.values[c] -= step;
        let fp = raw_objective(problem, &plus).value;
        let fm = raw_objective(problem, &minus).value;
        let numeric = (fp - fm) / (2.0 * step);
        let analytic = base.gradient[c];
        let denom = analytic.abs().max(1e-3 * gmax).max(f64::MIN_POSITIVE);
        out.push(GradientCheck {
            coordinate: c,
            analytic,
            numeric,
            relative_error: (analytic - numeric).abs() / denom,
        });
    }
    Ok(out)
}

/// Options for [`minimize_derivative_free`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub max_iters: usize,
    /// Initial proposal scale in units of `ρ m^{-γ}`.
    pub initial_scale: f64,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_iters: 200,
            initial_scale: 1.0,
            seed: 0,
            max_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub field: SampledField,
    pub value: f64,
    pub init_value: f64,
    pub trace: Vec<TraceRow>,
}

/// Projected random search for objectives without a usable gradient.
///
/// Proposals add Gaussian noise to the free values, are mapped into the
/// Hölder ball of radius `ρ(1 - 1e-6)` (the class is open), and are accepted
/// only when `feasible` holds and the objective strictly decreases. The
/// proposal scale grows by 1.5 on acceptance and shrinks by 0.8 otherwise.
pub fn minimize_derivative_free<F, C>(
    objective: F,
    feasible: C,
    init: &SampledField,
    gamma: f64,
    rho: f64,
    options: &SearchOptions,
) -> Result<SearchResult>
where
    F: Fn(&SampledField) -> Result<f64>,
    C: Fn(&SampledField) -> Result<bool>,
{
    if init.point(0).iter().any(|&v| v != 0.0) {
        return Err(Error::input("init must be pinned at the origin"));
    }
    if certified_seminorm(init, gamma, options.seed)? >= rho || !feasible(init)? {
        return Err(Error::Infeasible("initial field is outside the constraint class".into()));
    }
    let popts = ProjectionOptions {
        max_sweeps: options.max_sweeps,
        seed: options.seed,
    };
    let radius = rho * (1.0 - 1e-6);
    let unit = rho * (init.m as f64).powf(-gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut current = init.clone();
    let init_value = objective(init)?;
    let mut value = init_value;
    let mut scale = options.initial_scale;
    let mut trace = vec![TraceRow {
        iteration: 0,
        restart: 0,
        objective: value,
        max_violation: 0.0,
    }];
    for it in 1..=options.max_iters {
        let mut cand = current.clone();
        for q in 1..cand.len() {
            for v in cand.point_mut(q) {
                let z: f64 = rng.sample(StandardNormal);
                *v += scale * unit * z;
            }
        }
        let cand = project_holder_with(&cand, gamma, radius, None, &popts)?;
        let ok = feasible(&cand)?;
        let cv = if ok { objective(&cand)? } else { f64::INFINITY };
        if ok && cv < value {
            current = cand;
            value = cv;
            scale *= 1.5;
            trace.push(TraceRow {
                iteration: it,
                restart: 0,
                objective: value,
                max_violation: 0.0,
            });
        } else {
            scale *= 0.8;
        }
    }
    Ok(SearchResult {
        field: current,
        value,
        init_value,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{holder_seminorm, PairPolicy};
    use crate::measures::{mutual_energy, occupation_measure, self_energy, Diagonal};
    use crate::witness::feasible_init;

    fn problem(objective: Objective, m: usize) -> ProblemSpec {
        ProblemSpec {
            objective,
            alpha: 0.5,
            gamma: 0.6,
            rho: 1.0,
            k: 1,
            n: 2,
            m,
            potential_cap: None,
            endpoint: None,
        }
    }

    fn medium() -> DiscreteMeasure {
        DiscreteMeasure::from_points(
            &[vec![0.8, 0.9], vec![-0.7, 0.4], vec![0.1, -0.9]],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap()
    }

    #[test]
    fn objective_matches_energies() {
        let pb = problem(Objective::SelfInteraction, 33);
        let f = feasible_init(&pb, 1).unwrap();
        let e = objective_and_gradient(&pb, &f).unwrap();
        let direct = self_energy(&occupation_measure(&f), 0.5, Diagonal::Exclude).unwrap();
        assert!((e.value / direct - 1.0).abs() < 1e-12);
        let pb = problem(Objective::MutualInteraction { medium: medium() }, 33);
        let e = objective_and_gradient(&pb, &f).unwrap();
        let direct = mutual_energy(&occupation_measure(&f), &medium(), 0.5).unwrap();
        assert!((e.value / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let kinds = [
            Objective::SelfInteraction,
            Objective::MutualInteraction { medium: medium() },
            Objective::PPotential { medium: medium(), p_power: 2.0 },
        ];
        for obj in kinds {
            let pb = problem(obj, 33);
            let f = feasible_init(&pb, 4).unwrap();
            for c in gradient_check(&pb, &f, 20, 1e-6, 9).unwrap() {
                assert!(c.relative_error < 1e-5, "{c:?}");
            }
        }
    }

    #[test]
    fn self_objective_translation_and_scaling() {
        let pb = problem(Objective::SelfInteraction, 17);
        let f = feasible_init(&pb, 2).unwrap();
        let base = raw_objective(&pb, &f);
        let moved = raw_objective(&pb, &f.translated(&[0.3, -1.1]));
        assert!((moved.value / base.value - 1.0).abs() < 1e-12);
        for (a, b) in base.gradient.iter().zip(&moved.gradient) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3));
        }
        let scaled = raw_objective(&pb, &f.scaled(3.0));
        assert!((scaled.value / (3f64.powf(-1.5) * base.value) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_flagged() {
        let pb = problem(Objective::SelfInteraction, 3);
        let f = SampledField::new(1, 2, 3, vec![0.0, 0.0, 0.1, 0.0, 0.0, 0.0]).unwrap();
        let e = objective_and_gradient(&pb, &f).unwrap();
        assert!(e.infinite && e.value.is_infinite());
        assert!(e.gradient.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn projection_examples() {
        let f = SampledField::from_fn(1, 2, 65, |t| vec![0.5 * t[0], 0.2 * t[0]]).unwrap();
        assert_eq!(project_holder(&f, 0.6, 1.0).unwrap().values, f.values);
        let z = SampledField::new(1, 2, 9, vec![0.0; 18]).unwrap();
        assert_eq!(project_holder(&z, 0.6, 1.0).unwrap().values, z.values);
        let two = SampledField::new(1, 2, 2, vec![0.0, 0.0, 3.0, 4.0]).unwrap();
        let p = project_holder(&two, 0.5, 2.0).unwrap();
        assert!((p.point(1)[0] - 1.2).abs() < 1e-12 && (p.point(1)[1] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn projection_of_rough_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut vals: Vec<f64> = (0..2 * 129).map(|_| rng.random_range(-1.0..1.0)).collect();
        vals[0] = 0.0;
        vals[1] = 0.0;
        let f = SampledField::new(1, 2, 129, vals).unwrap();
        let p = project_holder(&f, 0.6, 1.0).unwrap();
        assert!(holder_seminorm(&p, 0.6, PairPolicy::AllPairs).unwrap() <= 1.0 + 1e-9);
        assert_eq!(p.point(0), &[0.0, 0.0]);
        let end = [0.4, 0.1];
        let mut g = f.clone();
        g.point_mut(128).copy_from_slice(&end);
        let p = project_holder_with(&g, 0.6, 1.0, Some(&end), &ProjectionOptions::default()).unwrap();
        assert_eq!(p.point(128), &end);
        assert!(holder_seminorm(&p, 0.6, PairPolicy::AllPairs).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn projection_k2() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut vals: Vec<f64> = (0..3 * 100).map(|_| rng.random_range(-1.0..1.0)).collect();
        vals[..3].iter_mut().for_each(|v| *v = 0.0);
        let f = SampledField::new(2, 3, 10, vals).unwrap();
        let p = project_holder(&f, 0.5, 1.0).unwrap();
        assert!(holder_seminorm(&p, 0.5, PairPolicy::AllPairs).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn minimize_decreases_and_stays_feasible() {
        let pb = problem(Objective::SelfInteraction, 33);
        let init = feasible_init(&pb, 0).unwrap();
        let opts = MinimizeOptions {
            max_iters: 40,
            anneal: Some(AnnealSchedule {
                restarts: 2,
                ..Default::default()
            }),
            ..Default::default()
        };
        let res = minimize(&pb, &init, &opts).unwrap();
        assert!(res.objective_value <= res.init_objective);
        assert!(res.constraint_report.feasible(&pb), "{:?}", res.constraint_report);
        assert!(res.objective_value >= self_energy_floor(&pb));
        let again = minimize(&pb, &res.field, &MinimizeOptions { max_iters: 10, ..Default::default() }).unwrap();
        assert!(again.objective_value <= res.objective_value);
    }

    #[test]
    fn minimize_with_endpoint() {
        let mut pb = problem(Objective::SelfInteraction, 33);
        pb.endpoint = Some(vec![0.5, 0.0]);
        let init = feasible_init(&pb, 1).unwrap();
        let res = minimize(&pb, &init, &MinimizeOptions { max_iters: 30, ..Default::default() }).unwrap();
        assert_eq!(res.constraint_report.endpoint_error, Some(0.0));
        assert!(res.constraint_report.feasible(&pb));
        assert!(res.objective_value <= res.init_objective);
    }

    #[test]
    fn cap_too_tight_is_infeasible() {
        let mut pb = problem(Objective::MutualInteraction { medium: medium() }, 17);
        pb.potential_cap = Some(PotentialCap {
            bound: 1e-3,
            eval_points: vec![vec![0.8, 0.9]],
        });
        let init = feasible_init(&pb, 0).unwrap();
        let err = minimize(&pb, &init, &MinimizeOptions { max_iters: 5, ..Default::default() }).unwrap_err();
        assert!(err.is_constraint_error());
    }

    #[test]
    fn scaling_law_at_initializer() {
        let pb = problem(Objective::SelfInteraction, 17);
        let init = feasible_init(&pb, 3).unwrap();
        let opts = MinimizeOptions { max_iters: 3, ..Default::default() };
        let a = minimize(&pb, &init, &opts).unwrap();
        let pb2 = ProblemSpec { rho: 2.0, ..pb.clone() };
        let b = minimize(&pb2, &init.scaled(2.0), &opts).unwrap();
        assert!((b.trace[0].objective / (2f64.powf(-1.5) * a.trace[0].objective) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_free_decreases() {
        let pb = problem(Objective::SelfInteraction, 17);
        let init = feasible_init(&pb, 1).unwrap().scaled(0.5);
        let f = |x: &SampledField| Ok(raw_objective(&pb, x).value);
        let res = minimize_derivative_free(f, |_| Ok(true), &init, 0.6, 1.0, &SearchOptions::default()).unwrap();
        assert!(res.value <= res.init_value);
        assert!(holder_seminorm(&res.field, 0.6, PairPolicy::AllPairs).unwrap() < 1.0);
    }

    #[test]
    fn check_constraints_examples() {
        let mut pb = problem(Objective::MutualInteraction { medium: medium() }, 33);
        let f = feasible_init(&pb, 0).unwrap();
        let r = check_constraints(&pb, &f).unwrap();
        assert!(r.feasible(&pb));
        let r10 = check_constraints(&pb, &f.scaled(10.0)).unwrap();
        assert!((r10.holder_seminorm / (10.0 * r.holder_seminorm) - 1.0).abs() < 1e-12);
        pb.potential_cap = Some(PotentialCap {
            bound: 10.0,
            eval_points: vec![f.point(5).to_vec()],
        });
        let r = check_constraints(&pb, &f).unwrap();
        assert_eq!(r.potential_sup, Some(f64::INFINITY));
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(24))]
        #[test]
        fn projection_lands_in_ball(
            noise in proptest::collection::vec(-3.0f64..3.0, 2 * 40),
            gamma in 0.3f64..0.9,
            rho in 0.2f64..2.0,
        ) {
            let mut values = noise;
            values[0] = 0.0;
            values[1] = 0.0;
            let f = SampledField::new(1, 2, 40, values).unwrap();
            let p = project_holder(&f, gamma, rho).unwrap();
            let s = holder_seminorm(&p, gamma, PairPolicy::AllPairs).unwrap();
            proptest::prop_assert!(s <= rho * (1.0 + 1e-9), "seminorm {} > {}", s, rho);
            proptest::prop_assert!(p.point(0).iter().all(|&v| v == 0.0));
        }
    }
}
