//! Regularity and geometry diagnostics for sampled fields.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::numeric::{dist, linear_fit, par_max};

/// Pairs entering a discrete Hölder seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPolicy {
    AllPairs,
    Sampled { count: usize, seed: u64 },
}

/// `max |X(t) - X(s)| / |t - s|^γ` over the chosen pairs of grid points.
pub fn holder_seminorm(field: &SampledField, gamma: f64, policy: PairPolicy) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::input(format!("Hölder exponent must lie in (0,1], got {gamma}")));
    }
    let len = field.len();
    match policy {
        PairPolicy::AllPairs if field.k == 1 => {
            let table = inverse_power_table(field.m, gamma);
            Ok(par_max(len, |i| {
                let xi = field.point(i);
                let mut best: f64 = 0.0;
                for j in i + 1..len {
                    best = best.max(dist(xi, field.point(j)) * table[j - i]);
                }
                best
            })
            .max(0.0))
        }
        PairPolicy::AllPairs => Ok(par_max(len, |i| {
            let xi = field.point(i);
            let mut best: f64 = 0.0;
            for j in i + 1..len {
                let d = field.param_dist(i, j);
                best = best.max(dist(xi, field.point(j)) / d.powf(gamma));
            }
            best
        })
        .max(0.0)),
        PairPolicy::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best: f64 = 0.0;
            for _ in 0..count {
                let i = rng.random_range(0..len);
                let j = rng.random_range(0..len);
                if i == j {
                    continue;
                }
                let d = field.param_dist(i, j);
                best = best.max(dist(field.point(i), field.point(j)) / d.powf(gamma));
            }
            Ok(best)
        }
    }
}

/// `(d h)^{-γ}` for index differences `d = 0..m`, with `h = 1/(m-1)`.
pub(crate) fn inverse_power_table(m: usize, gamma: f64) -> Vec<f64> {
    let h = 1.0 / (m - 1) as f64;
    (0..m)
        .map(|d| if d == 0 { 0.0 } else { (d as f64 * h).powf(-gamma) })
        .collect()
}

/// Smallest and largest `|X(t) - X(s)| / |t - s|^γ` over all pairs of a curve.
pub fn holder_ratio_range(field: &SampledField, gamma: f64) -> Result<(f64, f64)> {
    if field.k != 1 {
        return Err(Error::input("ratio range is implemented for curves"));
    }
    let table = inverse_power_table(field.m, gamma);
    let len = field.len();
    let (lo, hi) = (0..len)
        .into_par_iter()
        .map(|i| {
            let xi = field.point(i);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for j in i + 1..len {
                let r = dist(xi, field.point(j)) * table[j - i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    Ok((lo, hi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxDimension {
    pub estimate: f64,
    pub r_squared: f64,
    /// Index range `[lo, hi)` into `scales` used for the fit.
    pub window: (usize, usize),
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Set when the cloud has zero diameter.
    pub degenerate: bool,
}

/// Geometric scales `diam · 2^{-j}`, `j = 1..=count`, for a cloud.
pub fn default_scales(points: &[Vec<f64>], count: usize) -> Vec<f64> {
    let diam = bounding_extent(points);
    (1..=count).map(|j| diam * 0.5f64.powi(j as i32)).collect()
}

fn bounding_extent(points: &[Vec<f64>]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let n = first.len();
    (0..n)
        .map(|d| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[d]), hi.max(p[d]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Box-counting dimension on a lattice anchored at the lower corner of the
/// bounding box.
///
/// Scales at which the count exceeds a quarter of the point count are treated
/// as saturated and dropped. The fit window is the contiguous run of at least
/// four remaining scales with the best R²; runs within 0.002 of the best R²
/// are preferred when longer.
pub fn box_dimension(points: &[Vec<f64>], scales: &[f64]) -> Result<BoxDimension> {
    if points.is_empty() {
        return Err(Error::input("empty point cloud"));
    }
    if scales.len() < 4 {
        return Err(Error::input("box counting needs at least 4 scales"));
    }
    if scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::input("scales must be positive"));
    }
    let extent = bounding_extent(points);
    if extent == 0.0 {
        return Ok(BoxDimension {
            estimate: 0.0,
            r_squared: 0.0,
            window: (0, 0),
            scales: scales.to_vec(),
            counts: vec![1; scales.len()],
            degenerate: true,
        });
    }
    let n = points[0].len();
    let lower: Vec<f64> = (0..n)
        .map(|d| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min))
        .collect();
    let upper: Vec<f64> = (0..n)
        .map(|d| points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let counts: Vec<usize> = scales
        .par_iter()
        .map(|&eps| {
            // Points on the upper face of the bounding box go into the last box.
            let top: Vec<i64> = lower
                .iter()
                .zip(&upper)
                .map(|(lo, hi)| (((hi - lo) / eps).ceil() as i64 - 1).max(0))
                .collect();
            let mut seen: HashSet<Vec<i64>> = HashSet::with_capacity(points.len());
            for p in points {
                let key: Vec<i64> = p
                    .iter()
                    .zip(&lower)
                    .zip(&top)
                    .map(|((x, lo), &t)| (((x - lo) / eps).floor() as i64).min(t))
                    .collect();
                seen.insert(key);
            }
            seen.len()
        })
        .collect();
    let limit = points.len() / 4;
    let usable: Vec<bool> = counts.iter().map(|&c| c > 1 && c <= limit.max(2)).collect();
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let mut best: Option<(f64, usize, usize, f64)> = None; // (r2, lo, hi, slope)
    let mut candidates = Vec::new();
    for lo in 0..scales.len() {
        for hi in lo + 4..=scales.len() {
            if !usable[lo..hi].iter().all(|&u| u) {
                continue;
            }
            let (_, slope, r2) = linear_fit(&xs[lo..hi], &ys[lo..hi]);
            candidates.push((r2, lo, hi, slope));
            if best.is_none_or(|b| r2 > b.0) {
                best = Some((r2, lo, hi, slope));
            }
        }
    }
    let Some(top) = best else {
        return Err(Error::input(
            "fewer than 4 unsaturated scales; use more points or coarser scales",
        ));
    };
    let chosen = candidates
        .iter()
        .filter(|c| c.0 >= top.0 - 0.002)
        .max_by(|a, b| (a.2 - a.1).cmp(&(b.2 - b.1)).then(b.1.cmp(&a.1)))
        .copied()
        .unwrap_or(top);
    Ok(BoxDimension {
        estimate: chosen.3,
        r_squared: chosen.0,
        window: (chosen.1, chosen.2),
        scales: scales.to_vec(),
        counts,
        degenerate: false,
    })
}

/// Image of a curve with every segment subdivided into `per_segment` pieces.
pub fn densify_curve(field: &SampledField, per_segment: usize) -> Vec<Vec<f64>> {
    let per = per_segment.max(1);
    let mut out = Vec::with_capacity(field.len() * per);
    for p in 0..field.len() - 1 {
        let (a, b) = (field.point(p), field.point(p + 1));
        for s in 0..per {
            let lam = s as f64 / per as f64;
            out.push(a.iter().zip(b).map(|(x, y)| x + lam * (y - x)).collect());
        }
    }
    out.push(field.point(field.len() - 1).to_vec());
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusRow {
    pub h: f64,
    pub upper: f64,
    pub lower: f64,
    pub upper_ratio: f64,
    pub lower_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuliReport {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub rows: Vec<ModulusRow>,
    pub notes: Vec<String>,
}

/// Per-point oscillation `w_h(t) = max_{0<|t-s|≤h} |X(t)-X(s)|` for grid points
/// with `h ≤ t ≤ 1-h`, given the window in grid steps.
fn local_oscillation(field: &SampledField, steps: usize) -> Vec<f64> {
    let last = field.len() - 1;
    (steps..=last - steps)
        .into_par_iter()
        .map(|i| {
            let xi = field.point(i);
            let mut w: f64 = 0.0;
            for j in i - steps..=i + steps {
                if j != i {
                    w = w.max(dist(xi, field.point(j)));
                }
            }
            w
        })
        .collect()
}

/// Upper and lower oscillation statistics of a curve at the given window sizes.
pub fn oscillation_moduli(
    field: &SampledField,
    h_values: &[f64],
    kappa_plus: f64,
    kappa_minus: f64,
) -> Result<ModuliReport> {
    if field.k != 1 {
        return Err(Error::input("oscillation moduli are defined for curves (k = 1)"));
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &h in h_values {
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::input(format!("window {h} outside (0, 1/2)")));
        }
        let steps = (h * (field.m - 1) as f64 + 1e-9).floor() as usize;
        if steps == 0 {
            notes.push(format!("h = {h} is below the grid resolution; skipped"));
            continue;
        }
        let w = local_oscillation(field, steps);
        let upper = w.iter().copied().fold(0.0, f64::max);
        let lower = w.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(ModulusRow {
            h,
            upper,
            lower,
            upper_ratio: upper / h.powf(kappa_plus),
            lower_ratio: lower / h.powf(kappa_minus),
        });
    }
    Ok(ModuliReport {
        kappa_plus,
        kappa_minus,
        rows,
        notes,
    })
}

/// Dyadic windows `2^{-j}` in `(0, 1/2)` resolvable on an `m`-point grid.
pub fn dyadic_windows(m: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = 0.25;
    while h * (m - 1) as f64 >= 1.0 {
        out.push(h);
        h *= 0.5;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdpotRow {
    pub h: f64,
    pub lower: f64,
    pub lower_ratio: f64,
    /// `2h · lower^{α-n}`, the local potential forced by the lower statistic.
    pub forced_potential: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdpotReport {
    pub alpha: f64,
    pub kappa_minus: f64,
    /// `max_t (1/m) Σ_{s≠t} |X(t)-X(s)|^{α-n}`.
    pub potential_sup: f64,
    pub rows: Vec<BdpotRow>,
    /// A lower statistic vanishes at some window or forces a local potential
    /// above `potential_sup`: the pattern a bounded potential rules out.
    pub flagged: bool,
}

/// Bounded potential versus lower oscillation statistic for a curve.
pub fn bdpot_diagnostic(field: &SampledField, alpha: f64, kappa_minus: f64) -> Result<BdpotReport> {
    if field.k != 1 {
        return Err(Error::input("bdpot diagnostic is defined for curves (k = 1)"));
    }
    crate::kernels::check_riesz_order(alpha, field.n)?;
    let gap = field.n as f64 - alpha;
    if !(kappa_minus > 1.0 / gap) {
        return Err(Error::input(format!(
            "lower modulus index must exceed 1/(n-α) = {}",
            1.0 / gap
        )));
    }
    let len = field.len();
    let half_exp = -0.5 * gap;
    let w = 1.0 / len as f64;
    let potential_sup = par_max(len, |i| {
        let xi = field.point(i);
        let mut s = 0.0;
        for j in 0..len {
            if j != i {
                let d2 = crate::numeric::dist2(xi, field.point(j));
                s += if d2 == 0.0 { f64::INFINITY } else { d2.powf(half_exp) };
            }
        }
        s * w
    });
    let scale = field
        .values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut rows = Vec::new();
    let mut flagged = false;
    for h in dyadic_windows(field.m) {
        let steps = (h * (field.m - 1) as f64 + 1e-9).floor() as usize;
        let lower = local_oscillation(field, steps)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let forced = if lower <= 1e-12 * scale {
            f64::INFINITY
        } else {
            2.0 * h * lower.powf(-gap)
        };
        if lower <= 1e-12 * scale || forced > potential_sup * (1.0 + 1e-9) {
            flagged = true;
        }
        rows.push(BdpotRow {
            h,
            lower,
            lower_ratio: lower / h.powf(kappa_minus),
            forced_potential: forced,
        });
    }
    Ok(BdpotReport {
        alpha,
        kappa_minus,
        potential_sup,
        rows,
        flagged,
    })
}
