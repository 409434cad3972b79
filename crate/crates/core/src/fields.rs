//! Fractional Brownian fields, fractional Brownian bridges and their
//! covariance models.
//!
//! Scalar covariance of the fractional Brownian `(k,n)`-field:
//! `R(s,t) = ½(|s|^{2H} + |t|^{2H} - |t-s|^{2H})`, with `n` independent
//! components. The bridge is `b(t) - a(t) b(1)` with `a(t) = R(t,1)`.
//!
//! Sampling is exact on the grid. For `k = 1` the increments are drawn by
//! circulant embedding of fractional Gaussian noise; for `k >= 2` (or when the
//! embedding is not nonnegative definite) a dense Cholesky factor of the grid
//! covariance is used, with an eigenvalue-clipped square root as a last resort.
//! Every path draws from its own ChaCha stream selected by `(seed, path_index)`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{grid_len, FieldMeta, SampledField};

/// Largest grid handled by the dense covariance sampler.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub hurst: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl FieldSpec {
    pub fn new(hurst: f64, k: usize, n: usize, m: usize, seed: u64) -> Result<Self> {
        let spec = FieldSpec {
            hurst,
            k,
            n,
            m,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if self.k == 0 || self.n == 0 {
            return Err(Error::input("k and n must be positive"));
        }
        if self.m < 2 {
            return Err(Error::input("m must be at least 2"));
        }
        Ok(())
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("Hurst index must lie in (0,1), got {h}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKind {
    Fbf,
    Bridge,
}

/// Scalar covariance model of one component. The increment covariance matrix
/// is `Var(X(t)-X(s)) · I_n` for both kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovModel {
    pub kind: CovKind,
    pub hurst: f64,
}

impl CovModel {
    pub fn fbf(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(CovModel {
            kind: CovKind::Fbf,
            hurst,
        })
    }

    pub fn bridge(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(CovModel {
            kind: CovKind::Bridge,
            hurst,
        })
    }

    /// `Cov(X_i(s), X_i(t))` for one component. Bridge models are curves, so
    /// only the first parameter coordinate is used for them.
    pub fn cov(&self, s: &[f64], t: &[f64]) -> f64 {
        let h2 = 2.0 * self.hurst;
        match self.kind {
            CovKind::Fbf => {
                let ns = norm(s).powf(h2);
                let nt = norm(t).powf(h2);
                let d = s
                    .iter()
                    .zip(t)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    .powf(h2);
                0.5 * (ns + nt - d)
            }
            CovKind::Bridge => {
                let (s, t) = (s[0], t[0]);
                fbm_cov(s, t, self.hurst) - bridge_drift(s, self.hurst) * bridge_drift(t, self.hurst)
            }
        }
    }

    /// Variance of one component of `X(t) - X(s)`.
    pub fn increment_variance(&self, s: &[f64], t: &[f64]) -> f64 {
        match self.kind {
            CovKind::Fbf => s
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .powf(self.hurst),
            CovKind::Bridge => {
                let (a, b) = if s[0] <= t[0] { (s[0], t[0]) } else { (t[0], s[0]) };
                if a == b {
                    0.0
                } else {
                    bridge_increment_variance_raw(a, b, self.hurst)
                }
            }
        }
    }

    /// `det σ²(s,t)` for `n` independent components.
    pub fn det_increment(&self, s: &[f64], t: &[f64], n: usize) -> f64 {
        self.increment_variance(s, t).powi(n as i32)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn fbm_cov(s: f64, t: f64, h: f64) -> f64 {
    let h2 = 2.0 * h;
    0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// `a(t) = ½(t^{2H} + 1 - (1-t)^{2H})`, the regression coefficient of `b(t)` on `b(1)`.
pub fn bridge_drift(t: f64, h: f64) -> f64 {
    let h2 = 2.0 * h;
    0.5 * (t.powf(h2) + 1.0 - (1.0 - t).powf(h2))
}

/// Variance of one component of `b̊(t) - b̊(s)`:
/// `(t-s)^{2H} - (½(t^{2H}-s^{2H}) + ½((1-s)^{2H}-(1-t)^{2H}))²`.
pub fn bridge_increment_variance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(0.0 <= s && s < t && t <= 1.0) {
        return Err(Error::input(format!("need 0 <= s < t <= 1, got s={s}, t={t}")));
    }
    Ok(bridge_increment_variance_raw(s, t, hurst))
}

fn bridge_increment_variance_raw(s: f64, t: f64, h: f64) -> f64 {
    let h2 = 2.0 * h;
    let c = 0.5 * (t.powf(h2) - s.powf(h2)) + 0.5 * ((1.0 - s).powf(h2) - (1.0 - t).powf(h2));
    ((t - s).powf(h2) - c * c).max(0.0)
}

/// Which sampler produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Circulant,
    Cholesky,
    EigenClipped,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Circulant => "circulant",
            Backend::Cholesky => "cholesky",
            Backend::EigenClipped => "eigen_clipped",
        }
    }
}

enum Factor {
    /// `sqrt(λ_j / 2N)` of the circulant embedding of size `2N`.
    Circulant { sqrt_eig: Vec<f64>, nsteps: usize },
    /// Lower-triangular (or symmetric) square root of the covariance at all
    /// grid points except the origin, row-major.
    Dense { root: Vec<f64>, dim: usize },
}

/// Precomputed exact sampler for one `(H, k, n, m)`; cheap to clone and share.
#[derive(Clone)]
pub struct FbfSampler {
    spec: FieldSpec,
    backend: Backend,
    factor: Arc<Factor>,
}

impl std::fmt::Debug for FbfSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbfSampler")
            .field("spec", &self.spec)
            .field("backend", &self.backend)
            .finish()
    }
}

impl FbfSampler {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        spec.validate()?;
        if spec.k == 1 {
            if let Some(sqrt_eig) = circulant_sqrt_eigenvalues(spec.m - 1, spec.hurst) {
                return Ok(FbfSampler {
                    spec,
                    backend: Backend::Circulant,
                    factor: Arc::new(Factor::Circulant {
                        sqrt_eig,
                        nsteps: spec.m - 1,
                    }),
                });
            }
        }
        let pts = grid_len(spec.k, spec.m)?;
        if pts > DENSE_LIMIT {
            return Err(Error::input(format!(
                "dense sampler limited to {DENSE_LIMIT} grid points, got {pts}"
            )));
        }
        let (root, backend) = dense_root(&spec)?;
        Ok(FbfSampler {
            spec,
            backend,
            factor: Arc::new(Factor::Dense { root, dim: pts - 1 }),
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// Draw the path with stream `path_index` under `seed`.
    pub fn sample(&self, seed: u64, path_index: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        let FieldSpec { k, n, m, .. } = self.spec;
        let pts = self.spec_len();
        let mut values = vec![0.0; pts * n];
        match &*self.factor {
            Factor::Circulant { sqrt_eig, nsteps } => {
                let scale = (*nsteps as f64).powf(-self.spec.hurst);
                let mut comp = 0;
                while comp < n {
                    let (re, im) = circulant_draw(sqrt_eig, *nsteps, &mut rng);
                    for (c, noise) in [re, im].into_iter().enumerate() {
                        if comp + c >= n {
                            break;
                        }
                        let mut acc = 0.0;
                        for (i, z) in noise.iter().enumerate() {
                            acc += z * scale;
                            values[(i + 1) * n + comp + c] = acc;
                        }
                    }
                    comp += 2;
                }
            }
            Factor::Dense { root, dim } => {
                for c in 0..n {
                    let z: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                    for i in 0..*dim {
                        let row = &root[i * dim..(i + 1) * dim];
                        let v: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                        values[(i + 1) * n + c] = v;
                    }
                }
            }
        }
        let mut f = SampledField::new(k, n, m, values).expect("sampler produces a valid grid");
        f.origin_pinned = true;
        f.meta = FieldMeta {
            hurst: Some(self.spec.hurst),
            seed: Some(seed),
            generator: self.backend.name().to_string(),
        };
        f
    }

    /// `count` paths with stream indices `0..count`, drawn in parallel.
    pub fn sample_many(&self, seed: u64, count: usize) -> Vec<SampledField> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.sample(seed, i))
            .collect()
    }

    fn spec_len(&self) -> usize {
        self.spec.m.pow(self.spec.k as u32)
    }
}

fn fgn_autocov(j: usize, h: f64) -> f64 {
    let h2 = 2.0 * h;
    let j = j as f64;
    0.5 * ((j + 1.0).powf(h2) - 2.0 * j.powf(h2) + (j - 1.0).abs().powf(h2))
}

fn circulant_sqrt_eigenvalues(nsteps: usize, h: f64) -> Option<Vec<f64>> {
    let size = 2 * nsteps;
    let mut row: Vec<Complex64> = (0..size)
        .map(|j| {
            let lag = if j <= nsteps { j } else { size - j };
            Complex64::new(fgn_autocov(lag, h), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut row);
    let tol = 1e-10 * row[0].re.abs().max(1.0);
    if row.iter().any(|z| z.re < -tol) {
        return None;
    }
    Some(
        row.iter()
            .map(|z| (z.re.max(0.0) / size as f64).sqrt())
            .collect(),
    )
}

/// Two independent unit-spacing fGn vectors of length `nsteps`.
fn circulant_draw(sqrt_eig: &[f64], nsteps: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let size = sqrt_eig.len();
    let mut buf: Vec<Complex64> = sqrt_eig
        .iter()
        .map(|&s| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(s * a, s * b)
        })
        .collect();
    // Planning is cheap next to the draw and keeps the sampler `Sync`.
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    let re = buf[..nsteps].iter().map(|z| z.re).collect();
    let im = buf[..nsteps].iter().map(|z| z.im).collect();
    (re, im)
}

fn dense_root(spec: &FieldSpec) -> Result<(Vec<f64>, Backend)> {
    let model = CovModel::fbf(spec.hurst)?;
    let probe = SampledField::new(spec.k, 1, spec.m, vec![0.0; grid_len(spec.k, spec.m)?])?;
    let params: Vec<Vec<f64>> = (1..probe.len()).map(|p| probe.param(p)).collect();
    let dim = params.len();
    let cov = DMatrix::from_fn(dim, dim, |i, j| model.cov(&params[i], &params[j]));
    if let Some(ch) = cov.clone().cholesky() {
        let l = ch.l();
        let mut root = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                root[i * dim + j] = l[(i, j)];
            }
        }
        return Ok((root, Backend::Cholesky));
    }
    let eig = SymmetricEigen::new(cov);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min < -1e-8 * max.abs().max(1.0) {
        return Err(Error::Factorization(format!(
            "covariance indefinite: eigenvalues in [{min:e}, {max:e}]"
        )));
    }
    let q = &eig.eigenvectors;
    let sq: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut root = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            root[i * dim + j] = q[(i, j)] * sq[j];
        }
    }
    Ok((root, Backend::EigenClipped))
}

/// One fractional Brownian motion path on `m` grid points (`k = n = 1`).
/// `m - 1` must be a power of two.
pub fn sample_fbm_1d(spec: &FieldSpec) -> Result<SampledField> {
    if spec.k != 1 || spec.n != 1 {
        return Err(Error::input("sample_fbm_1d needs k = 1 and n = 1"));
    }
    if !(spec.m - 1).is_power_of_two() {
        return Err(Error::input(format!(
            "m must be a power of two plus one, got {}",
            spec.m
        )));
    }
    sample_fbf(spec)
}

/// One fractional Brownian `(k,n)`-field on the grid, stream 0 under `spec.seed`.
pub fn sample_fbf(spec: &FieldSpec) -> Result<SampledField> {
    Ok(FbfSampler::new(*spec)?.sample(spec.seed, 0))
}

/// Turn a curve `b` with `b(0) = 0` into `b(t) - a(t) b(1)`. The result vanishes
/// exactly at both ends.
pub fn make_bridge(path: &SampledField, hurst: f64) -> Result<SampledField> {
    check_hurst(hurst)?;
    if path.k != 1 {
        return Err(Error::input("bridges are defined for curves (k = 1)"));
    }
    if path.point(0).iter().any(|&v| v != 0.0) {
        return Err(Error::input("bridge input must start at the origin"));
    }
    let n = path.n;
    let last = path.last_index();
    let end = path.point(last).to_vec();
    let mut out = path.clone();
    for p in 1..last {
        let a = bridge_drift(path.param(p)[0], hurst);
        for (v, e) in out.point_mut(p).iter_mut().zip(&end) {
            *v -= a * e;
        }
    }
    out.point_mut(last).iter_mut().for_each(|v| *v = 0.0);
    out.origin_pinned = true;
    debug_assert_eq!(out.values.len(), path.len() * n);
    Ok(out)
}

/// `Var(Σ_j <u_j, σ_j^{-1}(X(t_j) - X(t_{j-1}))>)` with `t_0 = 0`, computed from
/// the covariance model. `t_points` are the curve parameters `t_1 < .. < t_ℓ`.
pub fn lnd_form_variance(cov: &CovModel, t_points: &[f64], u_vectors: &[Vec<f64>]) -> Result<f64> {
    let rho = lnd_correlation(cov, t_points)?;
    if u_vectors.len() != t_points.len() {
        return Err(Error::input("one u vector per parameter point is required"));
    }
    let n = u_vectors.first().map_or(0, |u| u.len());
    if u_vectors.iter().any(|u| u.len() != n) {
        return Err(Error::input("u vectors must share one dimension"));
    }
    let l = t_points.len();
    let mut var = 0.0;
    for j in 0..l {
        for i in 0..l {
            let dot: f64 = u_vectors[j].iter().zip(&u_vectors[i]).map(|(a, b)| a * b).sum();
            var += dot * rho[j * l + i];
        }
    }
    Ok(var.max(0.0))
}

/// Correlation matrix of the normalized increments, row-major `ℓ × ℓ`.
pub fn lnd_correlation(cov: &CovModel, t_points: &[f64]) -> Result<Vec<f64>> {
    if t_points.is_empty() {
        return Err(Error::input("need at least one parameter point"));
    }
    let mut ts = Vec::with_capacity(t_points.len() + 1);
    ts.push(0.0);
    ts.extend_from_slice(t_points);
    if ts.windows(2).any(|w| !(w[1] > w[0])) || *ts.last().unwrap() > 1.0 {
        return Err(Error::input("parameter points must increase strictly within (0, 1]"));
    }
    let l = t_points.len();
    let c = |a: f64, b: f64| cov.cov(&[a], &[b]);
    let mut var = Vec::with_capacity(l);
    for j in 1..=l {
        let v = cov.increment_variance(&[ts[j - 1]], &[ts[j]]);
        if !(v > 0.0) {
            return Err(Error::Factorization(format!(
                "increment {j} on [{}, {}] has singular covariance",
                ts[j - 1],
                ts[j]
            )));
        }
        var.push(v);
    }
    let mut rho = vec![0.0; l * l];
    for j in 1..=l {
        for i in 1..=l {
            let cij = c(ts[j], ts[i]) - c(ts[j], ts[i - 1]) - c(ts[j - 1], ts[i]) + c(ts[j - 1], ts[i - 1]);
            rho[(j - 1) * l + (i - 1)] = cij / (var[j - 1] * var[i - 1]).sqrt();
        }
    }
    Ok(rho)
}

/// Smallest eigenvalue of the normalized increment correlation over `configs`
/// seeded random configurations of `ell` points: an empirical value of the
/// local nondeterminism constant, not a certified bound.
pub fn lnd_empirical_constant(cov: &CovModel, ell: usize, configs: usize, seed: u64) -> Result<f64> {
    if ell == 0 || configs == 0 {
        return Err(Error::input("need ell >= 1 and at least one configuration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    // Bridges are singular at t = 1; keep the last point below it.
    let upper = match cov.kind {
        CovKind::Fbf => 1.0,
        CovKind::Bridge => 0.999,
    };
    for _ in 0..configs {
        let mut ts: Vec<f64> = (0..ell).map(|_| rng.random_range(1e-3..upper)).collect();
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup();
        if ts.len() < ell {
            continue;
        }
        let rho = lnd_correlation(cov, &ts)?;
        let mat = DMatrix::from_row_slice(ell, ell, &rho);
        best = best.min(SymmetricEigen::new(mat).eigenvalues.min());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_increment_variance_examples() {
        for &h in &[0.2, 0.5, 0.8] {
            assert!(bridge_increment_variance(0.0, 1.0, h).unwrap().abs() < 1e-15);
        }
        assert!((bridge_increment_variance(0.0, 0.5, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(bridge_increment_variance(0.5, 0.5, 0.5).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            let (s, t) = if a < b { (a, b) } else { (b, a) };
            let d = t - s;
            // mean value bound with the derivative factor 2H kept
            let v = bridge_increment_variance(s, t, 0.7).unwrap();
            assert!(v >= d.powf(1.4) * (1.0 - 1.96 * d.powf(0.6)) - 1e-14);
            let v = bridge_increment_variance(s, t, 0.3).unwrap();
            assert!(v >= d.powf(0.6) * (1.0 - d.powf(0.6)) - 1e-14);
        }
        // Without the factor 2H the H >= 1/2 bound fails for interior pairs.
        let (s, t) = (0.125, 0.875);
        let v = bridge_increment_variance(s, t, 0.7).unwrap();
        assert!(v < 0.75f64.powf(1.4) * (1.0 - 0.75f64.powf(0.6)));
    }

    #[test]
    fn bridge_model_matches_increment_formula() {
        let m = CovModel::bridge(0.35).unwrap();
        for &(s, t) in &[(0.1, 0.4), (0.0, 0.9), (0.25, 1.0)] {
            let direct = m.cov(&[t], &[t]) + m.cov(&[s], &[s]) - 2.0 * m.cov(&[s], &[t]);
            let closed = bridge_increment_variance(s, t, 0.35).unwrap();
            assert!((direct - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn circulant_embedding_is_valid() {
        for &h in &[0.1, 0.3, 0.5, 0.7, 0.95] {
            assert!(circulant_sqrt_eigenvalues(64, h).is_some(), "H={h}");
        }
    }

    #[test]
    fn deterministic_paths() {
        let spec = FieldSpec::new(0.7, 1, 1, 129, 42).unwrap();
        let a = sample_fbm_1d(&spec).unwrap();
        let b = sample_fbm_1d(&spec).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.point(0), &[0.0]);
        assert_eq!(a.meta.generator, "circulant");
        let c = sample_fbm_1d(&FieldSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.values, c.values);
        assert!(sample_fbm_1d(&FieldSpec { m: 100, ..spec }).is_err());
    }

    #[test]
    fn dense_sampler_pins_origin() {
        let spec = FieldSpec::new(0.5, 2, 3, 9, 5).unwrap();
        let f = sample_fbf(&spec).unwrap();
        assert_eq!(f.meta.generator, "cholesky");
        assert!(f.point(0).iter().all(|&v| v == 0.0));
        assert!(f.origin_pinned);
    }

    #[test]
    fn brownian_variance_over_seeds() {
        let spec = FieldSpec::new(0.5, 1, 1, 65, 9).unwrap();
        let sampler = FbfSampler::new(spec).unwrap();
        let paths = sampler.sample_many(9, 2000);
        let var = paths.iter().map(|p| p.point(64)[0].powi(2)).sum::<f64>() / 2000.0;
        assert!((var - 1.0).abs() < 0.07, "{var}");
    }

    #[test]
    fn bridge_pins_and_zero_input() {
        let spec = FieldSpec::new(0.3, 1, 2, 33, 1).unwrap();
        let f = sample_fbf(&spec).unwrap();
        let b = make_bridge(&f, 0.3).unwrap();
        assert!(b.point(0).iter().all(|&v| v == 0.0));
        assert!(b.point(32).iter().all(|&v| v == 0.0));
        let z = SampledField::new(1, 2, 5, vec![0.0; 10]).unwrap();
        assert!(make_bridge(&z, 0.6).unwrap().values.iter().all(|&v| v == 0.0));
        let off = SampledField::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(make_bridge(&off, 0.5).is_err());
    }

    #[test]
    fn lnd_examples() {
        let bm = CovModel::fbf(0.5).unwrap();
        let u = vec![vec![1.0, -2.0]];
        assert!((lnd_form_variance(&bm, &[0.3], &u).unwrap() - 5.0).abs() < 1e-12);
        let fb = CovModel::fbf(0.8).unwrap();
        assert!((lnd_form_variance(&fb, &[0.3], &u).unwrap() - 5.0).abs() < 1e-12);
        let us = vec![vec![0.0, 0.0]; 3];
        assert_eq!(lnd_form_variance(&fb, &[0.1, 0.5, 0.7], &us).unwrap(), 0.0);
        let us = vec![vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, 0.7]];
        let expect: f64 = us.iter().map(|u| u.iter().map(|v| v * v).sum::<f64>()).sum();
        let got = lnd_form_variance(&bm, &[0.1, 0.5, 0.7], &us).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!(lnd_form_variance(&bm, &[0.5, 0.5], &us[..2]).is_err());
        assert!(matches!(
            lnd_form_variance(&CovModel::bridge(0.5).unwrap(), &[1.0], &u),
            Err(Error::Factorization(_))
        ));
    }

    #[test]
    fn lnd_constant_positive() {
        let c = lnd_empirical_constant(&CovModel::fbf(0.7).unwrap(), 4, 200, 3).unwrap();
        assert!(c > 0.0 && c <= 1.0);
        let bm = lnd_empirical_constant(&CovModel::fbf(0.5).unwrap(), 4, 50, 3).unwrap();
        assert!((bm - 1.0).abs() < 1e-10);
    }
}
