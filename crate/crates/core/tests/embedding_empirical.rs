//! The explicit Sobolev–Hölder embedding constant against sampled paths.

use fractal_riesz::analysis::{holder_seminorm, PairPolicy};
use fractal_riesz::constants::{m1_bound, rho1_bound};
use fractal_riesz::fields::{FbfSampler, FieldSpec};

#[test]
fn rho1_bounds_sampled_brownian_paths() {
    let (n, alpha, hurst, eps, k, ell) = (2, 1.5, 0.5, 0.5, 1, 8);
    let m1 = m1_bound(n, alpha, hurst, eps, k, ell).unwrap().value;
    let rho1 = rho1_bound(n, alpha, hurst, eps, k, ell, 2.0 * m1, None).unwrap().value;
    let gamma = hurst - 2.0 * k as f64 / ell as f64;
    let sampler = FbfSampler::new(FieldSpec::new(hurst, k, n, 1025, 11).unwrap()).unwrap();
    let seeds = 500;
    let covered = (0..seeds)
        .filter(|&i| {
            let path = sampler.sample(11, i);
            holder_seminorm(&path, gamma, PairPolicy::AllPairs).unwrap() <= rho1
        })
        .count();
    assert!(covered * 100 >= 99 * seeds as usize, "{covered}/{seeds} paths within ρ₁ = {rho1}");
}
