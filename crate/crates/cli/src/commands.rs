//! One function per subcommand. Each returns the one-line summary printed on success.

use std::path::Path;

use fractal_riesz::analysis::{
    bdpot_diagnostic, box_dimension, default_scales, densify_curve, dyadic_windows, oscillation_moduli,
};
use fractal_riesz::composition::{seeded_corpus, verify_main_estimate, CompositionParams, MainEstimateReport};
use fractal_riesz::constants::{berman_c, bridge_c_prime, m0_bound, m1_bound, rho1_bound, ConstantReport};
use fractal_riesz::fields::{make_bridge, FbfSampler, FieldSpec};
use fractal_riesz::io::{read_bv, read_field, read_measure_csv, read_points_csv, write_field, write_json, ProblemConfig};
use fractal_riesz::measures::{
    bessel_potential, mutual_energy, occupation_measure, riesz_potential, self_energy, Diagonal,
};
use fractal_riesz::minimize::{self as minimizer, ProblemSpec};
use fractal_riesz::witness::{bi_holder_constants, certified_seminorm, feasible_init, koch_curve, witness_hurst, KochSpec};
use fractal_riesz::{DiscreteMeasure, Error, KernelFamily, Objective, Result, SampledField};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{load_config, Cell, Run, Table};
use crate::{Common, Format, SimulateArgs};

fn write_field_artifact(run: &Run, stem: &str, field: &SampledField, config: &Value) -> Result<std::path::PathBuf> {
    match run.format {
        Format::Csv => {
            let path = run.path(&format!("{stem}.csv"));
            write_field(&path, field, config)?;
            Ok(path)
        }
        Format::Json => {
            let path = run.path(&format!("{stem}.json"));
            write_json(&path, &json!({ "config": config, "field": field }))?;
            Ok(path)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(rename = "H")]
    hurst: f64,
    #[serde(default = "one")]
    k: usize,
    #[serde(default = "two")]
    n: usize,
    m: usize,
    #[serde(default = "one")]
    seeds: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    bridge: bool,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

pub fn simulate(common: &Common, args: &SimulateArgs) -> Result<String> {
    let (cfg, resolved): (SimulateConfig, Value) = load_config(
        common.config.as_deref(),
        vec![
            ("H", json!(args.hurst)),
            ("k", json!(args.k)),
            ("n", json!(args.n)),
            ("m", json!(args.m)),
            ("seeds", json!(args.seeds)),
            ("seed", json!(common.seed)),
            ("bridge", if args.bridge { json!(true) } else { Value::Null }),
        ],
    )?;
    if cfg.seeds == 0 {
        return Err(Error::input("seeds must be at least 1"));
    }
    if cfg.bridge && cfg.k != 1 {
        return Err(Error::input("bridges are defined for curves (k = 1)"));
    }
    let run = Run::new(common)?;
    let sampler = FbfSampler::new(FieldSpec::new(cfg.hurst, cfg.k, cfg.n, cfg.m, cfg.seed)?)?;
    let width = (cfg.seeds - 1).to_string().len().max(4);
    let mut files = Vec::with_capacity(cfg.seeds);
    for i in 0..cfg.seeds {
        let mut path = sampler.sample(cfg.seed, i as u64);
        if cfg.bridge {
            path = make_bridge(&path, cfg.hurst)?;
        }
        let stem = format!("path_{i:0width$}");
        write_field_artifact(&run, &stem, &path, &resolved)?;
        files.push(stem);
    }
    run.report(
        "simulate",
        &resolved,
        &json!({ "backend": sampler.backend().name(), "paths": files }),
    )?;
    Ok(format!(
        "simulate: {} {} path(s), H={}, k={}, n={}, m={}, backend {} -> {}",
        cfg.seeds,
        if cfg.bridge { "bridge" } else { "fBm" },
        cfg.hurst,
        cfg.k,
        cfg.n,
        cfg.m,
        sampler.backend().name(),
        run.out.display()
    ))
}

/// A measure given directly or as the occupation measure of a field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct MeasureSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measure_csv: Option<String>,
}

impl MeasureSource {
    fn load(&self, run: &Run) -> Result<DiscreteMeasure> {
        match (&self.field_csv, &self.measure_csv) {
            (Some(f), None) => Ok(occupation_measure(&read_field(&run.input(f))?)),
            (None, Some(m)) => read_measure_csv(&run.input(m)),
            _ => Err(Error::input("give exactly one of field_csv and measure_csv")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnergyConfig {
    #[serde(flatten)]
    source: MeasureSource,
    alpha: f64,
    #[serde(default = "default_diagonal")]
    diagonal: Diagonal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    medium_csv: Option<String>,
}

fn default_diagonal() -> Diagonal {
    Diagonal::Exclude
}

pub fn energy(common: &Common) -> Result<String> {
    let (cfg, resolved): (EnergyConfig, Value) = load_config(common.config.as_deref(), vec![])?;
    let run = Run::new(common)?;
    let mu = cfg.source.load(&run)?;
    let e = self_energy(&mu, cfg.alpha, cfg.diagonal)?;
    let mutual = match &cfg.medium_csv {
        Some(p) => Some(mutual_energy(&mu, &read_measure_csv(&run.input(p))?, cfg.alpha)?),
        None => None,
    };
    let path = run.report(
        "energy",
        &resolved,
        &json!({
            "self_energy": e, "mutual_energy": mutual,
            "atoms": mu.len(), "mass": mu.total_mass(), "alpha": cfg.alpha,
        }),
    )?;
    let mut line = format!("energy: self {e:.6e} (α={}, {} atoms)", cfg.alpha, mu.len());
    if let Some(m) = mutual {
        line.push_str(&format!(", mutual {m:.6e}"));
    }
    Ok(format!("{line} -> {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialConfig {
    #[serde(flatten)]
    source: MeasureSource,
    alpha: f64,
    #[serde(default = "default_kernel")]
    kernel: KernelFamily,
    points_csv: String,
}

fn default_kernel() -> KernelFamily {
    KernelFamily::Riesz
}

pub fn potential(common: &Common) -> Result<String> {
    let (cfg, resolved): (PotentialConfig, Value) = load_config(common.config.as_deref(), vec![])?;
    let run = Run::new(common)?;
    let mu = cfg.source.load(&run)?;
    let points = read_points_csv(&run.input(&cfg.points_csv))?;
    let cols = (1..=mu.n).map(|d| format!("x_{d}")).chain(["potential".to_string()]);
    let mut table = Table::new(cols);
    let mut sup = f64::NEG_INFINITY;
    for x in &points {
        let u = match cfg.kernel {
            KernelFamily::Riesz => riesz_potential(&mu, x, cfg.alpha)?,
            KernelFamily::Bessel => bessel_potential(&mu, x, cfg.alpha)?,
        };
        sup = sup.max(u);
        table.push(x.iter().map(|&v| Cell::from(v)).chain([Cell::from(u)]).collect());
    }
    let path = run.table("potential", &resolved, &table)?;
    Ok(format!(
        "potential: {} point(s), {:?} kernel α={}, sup {sup:.6e} -> {}",
        points.len(),
        cfg.kernel,
        cfg.alpha,
        path.display()
    ))
}

pub fn minimize(common: &Common) -> Result<String> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::input("minimize needs --config"))?;
    let (mut cfg, _): (ProblemConfig, Value) = load_config(Some(path), vec![])?;
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    let run = Run::new(common)?;
    let (problem, opts) = cfg.resolve(&run.base)?;
    let mut resolved_cfg = cfg.clone();
    resolved_cfg.seed = Some(opts.seed);
    resolved_cfg.optimizer = Some(opts);
    let resolved = serde_json::to_value(&resolved_cfg)?;
    let init = feasible_init(&problem, opts.seed)?;
    let result = minimizer::minimize(&problem, &init, &opts)?;
    write_field_artifact(&run, "field", &result.field, &resolved)?;
    let mut trace = Table::new(["iteration", "restart", "objective", "max_violation"]);
    for r in &result.trace {
        trace.push(vec![r.iteration.into(), r.restart.into(), r.objective.into(), r.max_violation.into()]);
    }
    run.table("trace", &resolved, &trace)?;
    let report = run.report("result", &resolved, &result)?;
    Ok(format!(
        "minimize: {} objective {:.6e} (init {:.6e}), seminorm {:.6}, {} iterations -> {}",
        problem.objective.name(),
        result.objective_value,
        result.init_objective,
        result.constraint_report.holder_seminorm,
        result.trace.len() - 1,
        report.display()
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points_csv: Option<String>,
    #[serde(default = "default_scales_count")]
    scales: usize,
    /// Subdivisions per segment when the field is a curve.
    #[serde(default = "one")]
    densify: usize,
}

fn default_scales_count() -> usize {
    14
}

pub fn dimension(common: &Common) -> Result<String> {
    let (cfg, resolved): (DimensionConfig, Value) = load_config(common.config.as_deref(), vec![])?;
    let run = Run::new(common)?;
    let points = match (&cfg.field_csv, &cfg.points_csv) {
        (Some(f), None) => {
            let field = read_field(&run.input(f))?;
            if field.k == 1 {
                densify_curve(&field, cfg.densify)
            } else {
                field.points()
            }
        }
        (None, Some(p)) => read_points_csv(&run.input(p))?,
        _ => return Err(Error::input("give exactly one of field_csv and points_csv")),
    };
    let bd = box_dimension(&points, &default_scales(&points, cfg.scales))?;
    let mut table = Table::new(["scale", "count", "in_fit"]);
    for (i, (s, c)) in bd.scales.iter().zip(&bd.counts).enumerate() {
        let used = i >= bd.window.0 && i < bd.window.1;
        table.push(vec![(*s).into(), (*c).into(), usize::from(used).into()]);
    }
    run.table("box_counts", &resolved, &table)?;
    let path = run.report("dimension", &resolved, &bd)?;
    Ok(format!(
        "dimension: estimate {:.4} (R² {:.4}, {} points) -> {}",
        bd.estimate,
        bd.r_squared,
        points.len(),
        path.display()
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuliConfig {
    field_csv: String,
    kappa_plus: f64,
    kappa_minus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h_values: Option<Vec<f64>>,
    /// Riesz order for the bounded-potential diagnostic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

pub fn moduli(common: &Common) -> Result<String> {
    let (cfg, resolved): (ModuliConfig, Value) = load_config(common.config.as_deref(), vec![])?;
    let run = Run::new(common)?;
    let field = read_field(&run.input(&cfg.field_csv))?;
    let hs = cfg.h_values.clone().unwrap_or_else(|| dyadic_windows(field.m));
    let rep = oscillation_moduli(&field, &hs, cfg.kappa_plus, cfg.kappa_minus)?;
    let mut table = Table::new(["h", "upper", "lower", "upper_ratio", "lower_ratio"]);
    for r in &rep.rows {
        table.push(vec![r.h.into(), r.upper.into(), r.lower.into(), r.upper_ratio.into(), r.lower_ratio.into()]);
    }
    run.table("oscillation", &resolved, &table)?;
    let bdpot = match cfg.alpha {
        Some(a) => Some(bdpot_diagnostic(&field, a, cfg.kappa_minus)?),
        None => None,
    };
    let path = run.report("moduli", &resolved, &json!({ "moduli": rep, "bdpot": bdpot }))?;
    let max_up = rep.rows.iter().map(|r| r.upper_ratio).fold(0.0, f64::max);
    let min_low = rep.rows.iter().map(|r| r.lower_ratio).fold(f64::INFINITY, f64::min);
    let mut line = format!(
        "moduli: {} window(s), max upper ratio {max_up:.4}, min lower ratio {min_low:.4}",
        rep.rows.len()
    );
    if let Some(b) = &bdpot {
        line.push_str(&format!(", bdpot flagged {}", b.flagged));
    }
    Ok(format!("{line} -> {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsGrid {
    n: Vec<usize>,
    alpha: Vec<f64>,
    #[serde(rename = "H")]
    hurst: Vec<f64>,
    eps: Vec<f64>,
    #[serde(default = "default_k")]
    k: Vec<usize>,
    #[serde(default)]
    ell: Vec<usize>,
    /// Levels `M` for ρ₁ and the event-probability bound `1 - M₀/M`.
    #[serde(default, rename = "M")]
    big_m: Vec<f64>,
    /// Also tabulate the bridge constant (curves only).
    #[serde(default)]
    bridge: bool,
}

fn default_k() -> Vec<usize> {
    vec![1]
}

struct Inputs {
    n: usize,
    alpha: f64,
    hurst: f64,
    eps: f64,
    k: usize,
    ell: Option<usize>,
    big_m: Option<f64>,
}

fn constant_row(table: &mut Table, inputs: &Inputs, rep: Result<ConstantReport>, extra: Option<f64>) {
    let opt = |v: Option<f64>| v.map_or(Cell::from(""), Cell::from);
    let (name, value, method, err, note) = match rep {
        Ok(r) => (r.name, r.value, r.method, r.error_estimate, r.violated.unwrap_or_default()),
        Err(e) => (String::new(), f64::NAN, String::new(), f64::NAN, e.to_string()),
    };
    table.push(vec![
        name.into(),
        inputs.n.into(),
        inputs.alpha.into(),
        inputs.hurst.into(),
        inputs.eps.into(),
        inputs.k.into(),
        inputs.ell.map_or(Cell::from(""), Cell::from),
        opt(inputs.big_m),
        value.into(),
        method.into(),
        err.into(),
        opt(extra),
        note.into(),
    ]);
}

pub fn constants(common: &Common, grid: Option<&Path>) -> Result<String> {
    let path = grid
        .or(common.config.as_deref())
        .ok_or_else(|| Error::input("constants needs --grid (or --config)"))?;
    let (cfg, resolved): (ConstantsGrid, Value) = load_config(Some(path), vec![])?;
    let run = Run::new(common)?;
    let mut table = Table::new([
        "constant", "n", "alpha", "H", "eps", "k", "ell", "M", "value", "method", "error_estimate",
        "event_probability_bound", "note",
    ]);
    let big_ms: Vec<Option<f64>> = if cfg.big_m.is_empty() { vec![None] } else { cfg.big_m.iter().map(|&v| Some(v)).collect() };
    for &n in &cfg.n {
        for &alpha in &cfg.alpha {
            for &hurst in &cfg.hurst {
                for &eps in &cfg.eps {
                    for &k in &cfg.k {
                        let base = Inputs { n, alpha, hurst, eps, k, ell: None, big_m: None };
                        constant_row(&mut table, &base, berman_c(n, hurst, alpha, eps, k), None);
                        let m0 = m0_bound(n, alpha, hurst, eps, k);
                        let m0_value = m0.as_ref().ok().filter(|r| r.is_finite()).map(|r| r.value);
                        constant_row(&mut table, &base, m0, None);
                        for &big_m in &big_ms {
                            if let (Some(bm), Some(m0v)) = (big_m, m0_value) {
                                // Markov: P(A₀(M)) ≥ 1 - M₀/M.
                                let with_m = Inputs { big_m, ..base };
                                constant_row(&mut table, &with_m, m0_bound(n, alpha, hurst, eps, k), Some((1.0 - m0v / bm).max(0.0)));
                            }
                        }
                        for &ell in &cfg.ell {
                            let with_ell = Inputs { ell: Some(ell), ..base };
                            let m1 = m1_bound(n, alpha, hurst, eps, k, ell);
                            let m1_value = m1.as_ref().ok().filter(|r| r.is_finite()).map(|r| r.value);
                            constant_row(&mut table, &with_ell, m1, None);
                            for &big_m in &big_ms {
                                let Some(bm) = big_m else { continue };
                                let with_m = Inputs { big_m, ..with_ell };
                                let bound = m1_value.map(|v| (1.0 - v / bm).max(0.0));
                                constant_row(
                                    &mut table,
                                    &with_m,
                                    rho1_bound(n, alpha, hurst, eps, k, ell, bm, None),
                                    bound,
                                );
                            }
                        }
                        if cfg.bridge && k == 1 {
                            constant_row(&mut table, &base, bridge_c_prime(n, alpha, hurst, eps), None);
                        }
                    }
                }
            }
        }
    }
    let rows = table.rows.len();
    let out = run.table("constants", &resolved, &table)?;
    Ok(format!("constants: {rows} row(s) -> {}", out.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusConfig {
    #[serde(default = "default_corpus_count")]
    count: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_corpus_m")]
    m: usize,
}

fn default_corpus_count() -> usize {
    50
}

fn default_corpus_m() -> usize {
    1025
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComposeConfig {
    params: CompositionParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corpus: Option<CorpusConfig>,
    /// Grid values of φ (CSV) with its box description (JSON).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi_box: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field_csv: Option<String>,
}

pub fn compose_verify(common: &Common) -> Result<String> {
    let (mut cfg, _): (ComposeConfig, Value) = load_config(common.config.as_deref(), vec![])?;
    if let (Some(s), Some(c)) = (common.seed, cfg.corpus.as_mut()) {
        c.seed = s;
    }
    let resolved = serde_json::to_value(&cfg)?;
    cfg.params.validate()?;
    let run = Run::new(common)?;
    let mut cases: Vec<(String, MainEstimateReport)> = Vec::new();
    match (&cfg.corpus, &cfg.phi_csv, &cfg.phi_box, &cfg.field_csv) {
        (Some(c), None, None, None) => {
            for case in seeded_corpus(c.count, c.seed)? {
                let u = case.curve.field(c.m)?;
                cases.push((case.label, verify_main_estimate(&case.phi, &u, &cfg.params)?));
            }
        }
        (None, Some(phi), Some(bx), Some(field)) => {
            let phi = read_bv(&run.input(phi), &run.input(bx))?;
            let u = read_field(&run.input(field))?;
            cases.push(("case".into(), verify_main_estimate(&phi, &u, &cfg.params)?));
        }
        _ => return Err(Error::input("give either corpus or all of phi_csv, phi_box and field_csv")),
    }
    let mut table = Table::new(["label", "lhs", "rhs_factor_seminorm", "rhs_factor_V", "ratio"]);
    for (label, r) in &cases {
        table.push(vec![
            label.clone().into(),
            r.lhs.into(),
            r.rhs_factor_seminorm.into(),
            r.rhs_factor_v.into(),
            r.ratio.into(),
        ]);
    }
    run.table("ratios", &resolved, &table)?;
    let (max_label, max_ratio) = cases
        .iter()
        .map(|(l, r)| (l.clone(), r.ratio))
        .fold((String::new(), 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    let all_finite = cases.iter().all(|(_, r)| r.ratio.is_finite());
    let path = run.report(
        "compose_verify",
        &resolved,
        &json!({
            "cases": cases.iter().map(|(l, r)| json!({ "label": l, "report": r })).collect::<Vec<_>>(),
            "max_ratio": max_ratio, "max_label": max_label, "all_finite": all_finite,
        }),
    )?;
    Ok(format!(
        "compose-verify: {} case(s), max ratio {max_ratio:.4} ({max_label}), all finite {all_finite} -> {}",
        cases.len(),
        path.display()
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum WitnessConfig {
    /// Generalized Koch curve with contraction `4^{-γ}`.
    Koch {
        gamma: f64,
        level: usize,
        #[serde(default = "two")]
        n: usize,
    },
    /// Scaled fractional Brownian sample inside the Hölder ball.
    Gaussian {
        alpha: f64,
        gamma: f64,
        rho: f64,
        k: usize,
        n: usize,
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        endpoint: Option<Vec<f64>>,
        #[serde(default)]
        seed: u64,
    },
}

/// Largest curve for which all-pairs bi-Hölder constants are reported.
const BI_HOLDER_LIMIT: usize = 1 << 17;

pub fn witness(common: &Common) -> Result<String> {
    let (mut cfg, _): (WitnessConfig, Value) = load_config(common.config.as_deref(), vec![])?;
    if let (Some(s), WitnessConfig::Gaussian { seed, .. }) = (common.seed, &mut cfg) {
        *seed = s;
    }
    let resolved = serde_json::to_value(&cfg)?;
    let run = Run::new(common)?;
    let (field, gamma, mut report) = match &cfg {
        WitnessConfig::Koch { gamma, level, n } => {
            let f = koch_curve(&KochSpec { gamma: *gamma, level: *level, n: *n })?;
            (f, *gamma, json!({ "generator": "koch" }))
        }
        WitnessConfig::Gaussian { alpha, gamma, rho, k, n, m, endpoint, seed } => {
            let problem = ProblemSpec {
                objective: Objective::SelfInteraction,
                alpha: *alpha,
                gamma: *gamma,
                rho: *rho,
                k: *k,
                n: *n,
                m: *m,
                potential_cap: None,
                endpoint: endpoint.clone(),
            };
            let f = feasible_init(&problem, *seed)?;
            let hurst = witness_hurst(&problem);
            (f, *gamma, json!({ "generator": "gaussian", "hurst": hurst }))
        }
    };
    let seminorm = certified_seminorm(&field, gamma, 0)?;
    report["holder_seminorm"] = json!(seminorm);
    report["points"] = json!(field.len());
    if field.k == 1 && field.len() <= BI_HOLDER_LIMIT {
        report["bi_holder"] = serde_json::to_value(bi_holder_constants(&field, gamma)?)?;
    }
    if field.k == 1 && field.n == 2 {
        let pts = densify_curve(&field, 4);
        if let Ok(bd) = box_dimension(&pts, &default_scales(&pts, 14)) {
            report["box_dimension"] = json!(bd.estimate);
        }
    }
    write_field_artifact(&run, "curve", &field, &resolved)?;
    let path = run.report("witness", &resolved, &report)?;
    Ok(format!(
        "witness: {} points, γ={gamma}, seminorm {seminorm:.6} -> {}",
        field.len(),
        path.display()
    ))
}
